#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "shotsearch/ingest.hpp"
#include "shotsearch/similarity.hpp"

namespace fixtures {

/// `shots` shots spread over `videos` videos, 100 frames each.
inline shotsearch::ShotTable table(std::size_t shots, std::size_t videos = 3)
{
    std::vector<shotsearch::ShotRef> refs;
    std::vector<shotsearch::Keyframe> frames;
    for (std::size_t i = 0; i < shots; ++i) {
        shotsearch::ShotRef ref{{"vid" + std::to_string(i % videos), static_cast<std::uint32_t>(i / videos)},
                                i * 100, i * 100 + 99};
        for (const auto& kf : shotsearch::derive_keyframes(ref)) frames.push_back(kf);
        refs.push_back(ref);
    }
    return shotsearch::ShotTable(std::move(refs), std::move(frames));
}

inline std::vector<shotsearch::CodeRecord> random_records(const shotsearch::ShotTable& t,
                                                          shotsearch::CodeSpace space,
                                                          std::mt19937_64& rng)
{
    std::vector<shotsearch::CodeRecord> out;
    for (const auto& kf : t.keyframes()) {
        shotsearch::CodeRecord r{kf, space, {rng()}, {}};
        for (auto& w : r.code256.words) w = rng();
        out.push_back(r);
    }
    return out;
}

inline shotsearch::SpaceIndex space_index(std::span<const shotsearch::CodeRecord> records,
                                          std::uint64_t seed = 1)
{
    auto store = shotsearch::CodeStore::from_records(records);
    auto tree = shotsearch::VpTree::build(store, seed);
    return {std::move(store), std::move(tree)};
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir()
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("shotsearch-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

    std::filesystem::path write(const std::string& name, const std::string& content) const
    {
        auto p = path_ / name;
        std::ofstream(p, std::ios::binary) << content;
        return p;
    }

private:
    std::filesystem::path path_;
};

}  // namespace fixtures
