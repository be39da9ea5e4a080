#include "shotsearch/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

namespace shotsearch {

CodeStore synthesize_store(std::size_t keyframes, std::uint64_t seed, CodeSpace space)
{
    constexpr std::size_t kShotsPerVideo = 1000;
    const std::size_t shots = (keyframes + kKeyframesPerShot - 1) / kKeyframesPerShot;
    const std::size_t videos = std::max<std::size_t>(1, (shots + kShotsPerVideo - 1) / kShotsPerVideo);

    std::vector<std::string> names;
    names.reserve(videos);
    for (std::size_t v = 0; v < videos; ++v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "synth%07zu", v);
        names.emplace_back(buf);
    }

    std::mt19937_64 engine(seed);
    std::vector<KeyframeKey> keys(keyframes);
    std::vector<std::uint64_t> codes64(keyframes);
    std::vector<Code256> codes256(keyframes);
    for (std::size_t i = 0; i < keyframes; ++i) {
        const std::size_t shot = i / kKeyframesPerShot;
        keys[i] = KeyframeKey{static_cast<std::uint32_t>(shot / kShotsPerVideo),
                              static_cast<std::uint32_t>(shot % kShotsPerVideo),
                              static_cast<std::uint8_t>(i % kKeyframesPerShot)};
        codes64[i] = engine();
        for (auto& w : codes256[i].words) w = engine();
    }
    return CodeStore(space, std::move(names), std::move(keys), std::move(codes64),
                     std::move(codes256));
}

double percentile(std::vector<double> sample, double p)
{
    if (sample.empty()) return 0.0;
    std::sort(sample.begin(), sample.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sample.size())));
    return sample[std::clamp<std::size_t>(rank, 1, sample.size()) - 1];
}

LatencyReport run_similarity_bench(const SimilarityIndex& index, const BenchConfig& config)
{
    std::mt19937_64 engine(config.seed);
    LatencyReport report;
    report.seconds.reserve(config.queries);
    for (std::size_t q = 0; q < config.queries; ++q) {
        SimilarityQuery query;
        query.semantic.code64.bits = engine();
        for (auto& w : query.semantic.code256.words) w = engine();
        if (config.alpha < 1.0) {
            QueryCodes low;
            low.code64.bits = engine();
            for (auto& w : low.code256.words) w = engine();
            query.low_level = low;
        }
        query.alpha = config.alpha;
        query.k_shots = config.k_shots;
        query.shortlist_size = config.shortlist_size;

        const auto start = std::chrono::steady_clock::now();
        auto result = similarity_search(index, query);
        const auto stop = std::chrono::steady_clock::now();
        if (result.entries.empty()) throw Error(ErrorKind::InvalidArgument, "empty bench result");
        report.seconds.push_back(std::chrono::duration<double>(stop - start).count());
    }
    report.p50 = percentile(report.seconds, 50);
    report.p95 = percentile(report.seconds, 95);
    report.p99 = percentile(report.seconds, 99);
    report.max = report.seconds.empty() ? 0.0
                                        : *std::max_element(report.seconds.begin(), report.seconds.end());
    return report;
}

}  // namespace shotsearch
