#include "shotsearch/service.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <httplib.h>

namespace shotsearch {

using nlohmann::json;

int http_status(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::UnknownShot:
    case ErrorKind::UnknownKeyframe:
    case ErrorKind::UnknownLabel:
        return 404;
    case ErrorKind::Parse:
    case ErrorKind::InvalidArgument:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::WidthMismatch:
    case ErrorKind::OutOfRange:
    case ErrorKind::Validation:
        return 400;
    case ErrorKind::ChecksumMismatch:
        return 409;
    default:
        return 500;
    }
}

namespace {

ApiResponse json_response(int status, const json& body)
{
    return ApiResponse{status, "application/json", body.dump()};
}

ApiResponse error_response(int status, std::string_view kind, std::string_view message)
{
    return json_response(status, json{{"error", kind}, {"message", message}});
}

std::vector<std::string> split_path(std::string_view path)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= path.size()) {
        auto slash = path.find('/', start);
        auto part = path.substr(start, slash == std::string_view::npos ? slash : slash - start);
        if (!part.empty()) parts.emplace_back(part);
        if (slash == std::string_view::npos) break;
        start = slash + 1;
    }
    return parts;
}

std::size_t parse_count(const std::string& text, const char* name)
{
    std::size_t v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error(ErrorKind::InvalidArgument, std::string("invalid ") + name + " '" + text + "'");
    }
    return v;
}

std::size_t param_count(const ApiRequest& r, const char* name, std::size_t fallback)
{
    auto it = r.params.find(name);
    return it == r.params.end() ? fallback : parse_count(it->second, name);
}

const std::string& require_param(const ApiRequest& r, const char* name)
{
    auto it = r.params.find(name);
    if (it == r.params.end() || it->second.empty()) {
        throw Error(ErrorKind::InvalidArgument, std::string("missing parameter '") + name + "'");
    }
    return it->second;
}

constexpr std::string_view kPlaceholder =
    R"(<svg xmlns="http://www.w3.org/2000/svg" width="160" height="90">)"
    R"(<rect width="160" height="90" fill="#ccc"/></svg>)";

}  // namespace

json ranked_to_json(const RankedResult& result, std::size_t offset)
{
    json results = json::array();
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        const auto& e = result.entries[i];
        results.push_back({{"rank", offset + i + 1},
                           {"shot", e.shot.str()},
                           {"video_id", e.shot.video_id},
                           {"shot_index", e.shot.shot_index},
                           {"score", e.score}});
    }
    return json{{"kind", to_string(result.kind)}, {"offset", offset}, {"results", results}};
}

SearchService::SearchService(const ArchiveBundle& bundle, ServiceOptions options)
    : bundle_(bundle), options_(std::move(options))
{}

std::size_t SearchService::read_k(const ApiRequest& request) const
{
    const auto k = param_count(request, "k", options_.default_k);
    if (k == 0 || k > options_.max_k) {
        throw Error(ErrorKind::InvalidArgument,
                    "k must lie in [1, " + std::to_string(options_.max_k) + "]");
    }
    return k;
}

ApiResponse SearchService::handle(const ApiRequest& request) const
{
    try {
        const auto parts = split_path(request.path);
        const bool get = request.method == "GET";
        const bool post = request.method == "POST";
        if (parts.size() == 4 && parts[0] == "thumbnails" && get) {
            return thumbnail(parts[1], parts[2], parts[3]);
        }
        if (parts.empty() || parts[0] != "api") {
            return error_response(404, "not_found", "no route for " + request.path);
        }
        if (parts.size() == 4 && parts[1] == "shots" && get) {
            ShotId id{parts[2], static_cast<std::uint32_t>(0)};
            const auto index = parse_count(parts[3], "shot_index");
            if (index > std::numeric_limits<std::uint32_t>::max()) {
                throw Error(ErrorKind::InvalidArgument, "shot_index out of range");
            }
            id.shot_index = static_cast<std::uint32_t>(index);
            return json_response(200, shot_record(id));
        }
        if (parts.size() == 3 && parts[1] == "search") {
            if (parts[2] == "similar" && post) {
                json body;
                try {
                    body = json::parse(request.body);
                } catch (const json::exception& e) {
                    throw Error(ErrorKind::Parse, std::string("malformed JSON body: ") + e.what());
                }
                return json_response(200, similar(body));
            }
            if (parts[2] == "concept" && get) {
                return json_response(200, labeled(request, AnnotationKind::Concept));
            }
            if (parts[2] == "person" && get) {
                return json_response(200, labeled(request, AnnotationKind::Person));
            }
            if (parts[2] == "text" && get) return json_response(200, text(request));
        }
        if (parts.size() == 2 && parts[1] == "labels" && get) {
            return json_response(200, labels(request));
        }
        if (parts.size() == 2 && parts[1] == "health" && get) {
            return json_response(200, health());
        }
        return error_response(404, "not_found", "no route for " + request.method + " " +
                                                    request.path);
    } catch (const Error& e) {
        return error_response(http_status(e.kind()), to_string(e.kind()), e.what());
    } catch (const json::exception& e) {
        return error_response(400, "parse", e.what());
    }
}

json SearchService::shot_record(const ShotId& id) const
{
    const ShotRef* shot = bundle_.shots.find(id);
    if (!shot) throw Error(ErrorKind::UnknownShot, "unknown shot " + id.str());
    json keyframes = json::array();
    for (int p = 0; p < kKeyframesPerShot; ++p) {
        const Keyframe* kf = bundle_.shots.find_keyframe(id, p);
        keyframes.push_back({{"position", p},
                             {"frame_number", kf->frame_number},
                             {"thumbnail", "/thumbnails/" + id.video_id + "/" +
                                               std::to_string(id.shot_index) + "/" +
                                               std::to_string(p) + ".jpg"}});
    }
    return json{{"shot", id.str()},
                {"video_id", id.video_id},
                {"shot_index", id.shot_index},
                {"start_frame", shot->start_frame},
                {"end_frame", shot->end_frame},
                {"keyframes", keyframes}};
}

json SearchService::similar(const json& body) const
{
    if (!body.is_object()) throw Error(ErrorKind::InvalidArgument, "body must be an object");
    if (!bundle_.similarity) {
        throw Error(ErrorKind::InvalidArgument, "bundle has no similarity index");
    }
    const double alpha = body.value("alpha", 1.0);
    const auto k = body.value("k", options_.default_k);
    const auto offset = body.value("offset", std::size_t{0});
    if (k == 0 || k > options_.max_k) {
        throw Error(ErrorKind::InvalidArgument,
                    "k must lie in [1, " + std::to_string(options_.max_k) + "]");
    }
    const bool by_shot = body.contains("shot");
    const bool by_vector = body.contains("vector");
    if (by_shot == by_vector) {
        throw Error(ErrorKind::InvalidArgument, "give exactly one of 'shot' or 'vector'");
    }

    RankedResult result;
    if (by_shot) {
        const auto& ref = body["shot"];
        ShotId id = ref.is_string()
                        ? ShotId::parse(ref.get<std::string>())
                        : ShotId{ref.at("video_id").get<std::string>(),
                                 ref.at("shot_index").get<std::uint32_t>()};
        if (!bundle_.shots.contains(id)) throw Error(ErrorKind::UnknownShot, "unknown shot " + id.str());
        const int position = body.value("position", 0);
        result = query_by_shot(*bundle_.similarity, id, position, alpha, k + offset,
                               options_.shortlist_size);
    } else {
        FeatureVector v{body["vector"].get<std::vector<double>>()};
        result = query_by_vector(*bundle_.similarity, bundle_.encoders(), v, alpha, k + offset,
                                 options_.shortlist_size);
    }
    return ranked_to_json(page(result, offset, k), offset);
}

json SearchService::labeled(const ApiRequest& request, AnnotationKind kind) const
{
    const auto& label = require_param(request, "label");
    const auto k = read_k(request);
    const auto offset = param_count(request, "offset", 0);
    return ranked_to_json(bundle_.annotations.search(label, kind, k, offset), offset);
}

json SearchService::text(const ApiRequest& request) const
{
    const auto& q = require_param(request, "q");
    const auto k = read_k(request);
    const auto offset = param_count(request, "offset", 0);
    return ranked_to_json(bundle_.text.search(q, k, offset), offset);
}

json SearchService::labels(const ApiRequest& request) const
{
    auto it = request.params.find("kind");
    const AnnotationKind kind =
        it == request.params.end() ? AnnotationKind::Concept : parse_annotation_kind(it->second);
    return json{{"kind", to_string(kind)}, {"labels", bundle_.annotations.labels(kind)}};
}

json SearchService::health() const
{
    const auto& m = bundle_.metadata;
    json spaces = json::object();
    if (bundle_.similarity) {
        spaces["semantic"] = {{"keyframes", bundle_.similarity->semantic().store.size()},
                              {"vector_queries", bundle_.semantic_encoder.has_value()}};
        if (const auto* low = bundle_.similarity->low_level()) {
            spaces["low_level"] = {{"keyframes", low->store.size()},
                                   {"vector_queries", bundle_.low_level_encoder.has_value()}};
        }
    }
    json j{{"status", "ok"},
           {"shots", m.shots},
           {"keyframes", m.keyframes},
           {"annotations", m.annotations},
           {"text_occurrences", m.text_occurrences},
           {"spaces", spaces},
           {"ingested_at", m.ingested_at},
           {"built_at", m.built_at}};
    if (m.tree_seed) j["tree_seed"] = *m.tree_seed;
    return j;
}

ApiResponse SearchService::thumbnail(const std::string& video, const std::string& shot,
                                     const std::string& file) const
{
    // Guard against path traversal: components are single plain names.
    auto plain = [](const std::string& s) {
        return !s.empty() && s != "." && s != ".." && s.find('/') == std::string::npos &&
               s.find('\\') == std::string::npos;
    };
    if (options_.thumbnail_dir && plain(video) && plain(shot) && plain(file)) {
        const auto path = *options_.thumbnail_dir / video / shot / file;
        std::ifstream in(path, std::ios::binary);
        if (in) {
            return ApiResponse{200, "image/jpeg",
                               std::string((std::istreambuf_iterator<char>(in)),
                                           std::istreambuf_iterator<char>())};
        }
    }
    return ApiResponse{200, "image/svg+xml", std::string(kPlaceholder)};
}

struct HttpServer::Impl {
    SearchService service;
    httplib::Server server;

    Impl(const ArchiveBundle& bundle, ServiceOptions options)
        : service(bundle, std::move(options))
    {
        auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
            ApiRequest request{req.method, req.path, {}, req.body};
            for (const auto& [key, value] : req.params) request.params.emplace(key, value);
            auto response = service.handle(request);
            res.status = response.status;
            res.set_content(response.body, response.content_type);
        };
        server.Get(".*", dispatch);
        server.Post(".*", dispatch);
    }
};

HttpServer::HttpServer(const ArchiveBundle& bundle, ServiceOptions options)
    : impl_(std::make_unique<Impl>(bundle, std::move(options)))
{}

HttpServer::~HttpServer()
{
    stop();
}

int HttpServer::bind(const std::string& host, int port)
{
    int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                          : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen()
{
    impl_->server.listen_after_bind();
}

void HttpServer::stop()
{
    if (impl_) impl_->server.stop();
}

void serve(const ArchiveBundle& bundle, const std::string& host, int port, ServiceOptions options)
{
    HttpServer server(bundle, std::move(options));
    server.bind(host, port);
    server.listen();
}

}  // namespace shotsearch
