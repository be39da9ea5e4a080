#pragma once

#include <cstdint>
#include <vector>

#include "shotsearch/similarity.hpp"

namespace shotsearch {

/// Uniformly random semantic codes for `keyframes` keyframes, five per shot,
/// 1,000 shots per video.
CodeStore synthesize_store(std::size_t keyframes, std::uint64_t seed,
                           CodeSpace space = CodeSpace::Semantic);

struct BenchConfig {
    std::size_t queries = 100;
    std::uint64_t seed = 7;
    double alpha = 1.0;
    std::size_t k_shots = kDefaultResultCount;
    std::size_t shortlist_size = kDefaultShortlist;
};

struct LatencyReport {
    std::vector<double> seconds;  // per query, in issue order
    double p50 = 0.0;
    double p95 = 0.0;
    double p99 = 0.0;
    double max = 0.0;
};

/// Nearest-rank percentile of an unsorted sample.
double percentile(std::vector<double> sample, double p);

/// Times `config.queries` end-to-end similarity searches with random query codes.
LatencyReport run_similarity_bench(const SimilarityIndex& index, const BenchConfig& config);

}  // namespace shotsearch
