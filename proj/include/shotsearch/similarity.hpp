#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "shotsearch/core.hpp"
#include "shotsearch/hamming.hpp"
#include "shotsearch/ingest.hpp"

namespace shotsearch {

inline constexpr std::size_t kDefaultShortlist = 10'000;
inline constexpr std::size_t kDefaultResultCount = 100;

/// Code store plus its VP-tree for one code space.
struct SpaceIndex {
    CodeStore store;
    VpTree tree;
};

/// Semantic index with an optional low-level index over the same keyframes.
class SimilarityIndex {
public:
    /// Throws InvalidArgument when the low-level store does not cover exactly
    /// the semantic store's keyframes.
    SimilarityIndex(SpaceIndex semantic, std::optional<SpaceIndex> low_level = std::nullopt);

    const SpaceIndex& semantic() const noexcept { return semantic_; }
    const SpaceIndex* low_level() const noexcept { return low_level_ ? &*low_level_ : nullptr; }
    const CodeStore& keyframes() const noexcept { return semantic_.store; }

private:
    SpaceIndex semantic_;
    std::optional<SpaceIndex> low_level_;
};

struct QueryCodes {
    Code64 code64;
    Code256 code256;
};

struct SimilarityQuery {
    QueryCodes semantic;
    std::optional<QueryCodes> low_level;
    double alpha = 1.0;  // semantic weight
    std::size_t k_shots = kDefaultResultCount;
    std::size_t shortlist_size = kDefaultShortlist;
};

struct KeyframeHit {
    Ordinal ordinal = 0;
    double distance = 0.0;  // blended, normalized to [0, 1]

    bool operator==(const KeyframeHit&) const = default;
};

struct ShotScore {
    ShotId shot;
    double best_distance = 0.0;
    double score = 1.0;  // 1 / (1 + best_distance)

    bool operator==(const ShotScore&) const = default;
};

inline double distance_to_score(double distance) noexcept
{
    return 1.0 / (1.0 + distance);
}

/// Coarse 64-bit shortlist per active space, exact 256-bit distances on the
/// union, then alpha * d_sem/256 + (1 - alpha) * d_low/256. Ascending
/// (distance, ordinal).
std::vector<KeyframeHit> two_stage_search(const SimilarityIndex& index,
                                          const SimilarityQuery& query);

/// Minimum keyframe distance per shot, ascending (distance, shot id), at most
/// k_shots entries. `ranking` must be sorted ascending by distance.
std::vector<ShotScore> keyframes_to_shots(const CodeStore& store,
                                          std::span<const KeyframeHit> ranking,
                                          std::size_t k_shots);

RankedResult to_ranked_result(std::span<const ShotScore> shots);

/// Full pipeline: two-stage search, shot aggregation, scores.
RankedResult similarity_search(const SimilarityIndex& index, const SimilarityQuery& query);

/// Uses the stored codes of (shot, position) in every available space.
/// Throws UnknownKeyframe when absent.
RankedResult query_by_shot(const SimilarityIndex& index, const ShotId& shot, int position,
                           double alpha, std::size_t k,
                           std::size_t shortlist_size = kDefaultShortlist);

struct QueryEncoders {
    const HyperplaneEncoder* semantic = nullptr;
    const HyperplaneEncoder* low_level = nullptr;
};

/// Encodes v with each available encoder, then searches.
RankedResult query_by_vector(const SimilarityIndex& index, const QueryEncoders& encoders,
                             const FeatureVector& v, double alpha, std::size_t k,
                             std::size_t shortlist_size = kDefaultShortlist);

}  // namespace shotsearch
