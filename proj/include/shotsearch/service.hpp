#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "shotsearch/bundle.hpp"

namespace shotsearch {

struct ServiceOptions {
    std::optional<std::filesystem::path> thumbnail_dir;
    std::size_t shortlist_size = kDefaultShortlist;
    std::size_t default_k = kDefaultResultCount;
    std::size_t max_k = 10'000;
};

struct ApiRequest {
    std::string method;  // "GET" or "POST"
    std::string path;
    std::map<std::string, std::string> params;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;

    nlohmann::json json() const { return nlohmann::json::parse(body); }
};

int http_status(ErrorKind kind) noexcept;

/// Request handling over an immutable bundle; safe to call concurrently.
class SearchService {
public:
    SearchService(const ArchiveBundle& bundle, ServiceOptions options = {});

    ApiResponse handle(const ApiRequest& request) const;

    const ArchiveBundle& bundle() const noexcept { return bundle_; }

private:
    nlohmann::json shot_record(const ShotId& id) const;
    nlohmann::json similar(const nlohmann::json& body) const;
    nlohmann::json labeled(const ApiRequest& request, AnnotationKind kind) const;
    nlohmann::json text(const ApiRequest& request) const;
    nlohmann::json labels(const ApiRequest& request) const;
    nlohmann::json health() const;
    ApiResponse thumbnail(const std::string& video, const std::string& shot,
                          const std::string& file) const;

    std::size_t read_k(const ApiRequest& request) const;

    const ArchiveBundle& bundle_;
    ServiceOptions options_;
};

nlohmann::json ranked_to_json(const RankedResult& result, std::size_t offset);

/// HTTP front end for SearchService.
class HttpServer {
public:
    HttpServer(const ArchiveBundle& bundle, ServiceOptions options = {});
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds host:port (port 0 picks a free port) and returns the bound port.
    /// Throws Io when the address cannot be bound.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Blocks serving HTTP on host:port until the process stops.
void serve(const ArchiveBundle& bundle, const std::string& host, int port,
           ServiceOptions options = {});

}  // namespace shotsearch
