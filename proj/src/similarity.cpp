#include "shotsearch/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace shotsearch {

namespace {

bool same_keyframes(const CodeStore& a, const CodeStore& b)
{
    return std::ranges::equal(a.videos(), b.videos()) && std::ranges::equal(a.keys(), b.keys());
}

std::vector<Ordinal> shortlist(const SpaceIndex& space, Code64 query, std::size_t size)
{
    auto neighbors = space.tree.knn(query, size);
    std::vector<Ordinal> out;
    out.reserve(neighbors.size());
    for (const auto& n : neighbors) out.push_back(n.ordinal);
    return out;
}

}  // namespace

SimilarityIndex::SimilarityIndex(SpaceIndex semantic, std::optional<SpaceIndex> low_level)
    : semantic_(std::move(semantic)), low_level_(std::move(low_level))
{
    if (semantic_.store.space() != CodeSpace::Semantic) {
        throw Error(ErrorKind::InvalidArgument, "semantic index built from non-semantic codes");
    }
    if (semantic_.tree.store_checksum() != semantic_.store.checksum()) {
        throw Error(ErrorKind::ChecksumMismatch, "semantic tree does not match its code store");
    }
    if (low_level_) {
        if (low_level_->store.space() != CodeSpace::LowLevel) {
            throw Error(ErrorKind::InvalidArgument, "low-level index built from non-low-level codes");
        }
        if (low_level_->tree.store_checksum() != low_level_->store.checksum()) {
            throw Error(ErrorKind::ChecksumMismatch, "low-level tree does not match its code store");
        }
        if (!same_keyframes(semantic_.store, low_level_->store)) {
            throw Error(ErrorKind::InvalidArgument,
                        "low-level codes must cover exactly the semantic keyframes");
        }
    }
}

std::vector<KeyframeHit> two_stage_search(const SimilarityIndex& index,
                                          const SimilarityQuery& query)
{
    if (!(query.alpha >= 0.0 && query.alpha <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "alpha must lie in [0,1]");
    }
    if (query.shortlist_size == 0) {
        throw Error(ErrorKind::InvalidArgument, "shortlist size must be positive");
    }
    const bool use_semantic = query.alpha > 0.0;
    const bool use_low = query.alpha < 1.0;
    if (use_low && (!index.low_level() || !query.low_level)) {
        throw Error(ErrorKind::InvalidArgument,
                    "alpha < 1 needs low-level codes in both the index and the query");
    }

    // Single space: the 256-bit refinement already is the final ranking.
    if (use_semantic != use_low) {
        const SpaceIndex& space = use_semantic ? index.semantic() : *index.low_level();
        const QueryCodes& codes = use_semantic ? query.semantic : *query.low_level;
        auto refined = refine256(space.store, codes.code256,
                                 shortlist(space, codes.code64, query.shortlist_size));
        std::vector<KeyframeHit> hits;
        hits.reserve(refined.size());
        for (const auto& n : refined) hits.push_back({n.ordinal, n.distance / 256.0});
        return hits;
    }

    auto candidates = shortlist(index.semantic(), query.semantic.code64, query.shortlist_size);
    auto low = shortlist(*index.low_level(), query.low_level->code64, query.shortlist_size);
    candidates.insert(candidates.end(), low.begin(), low.end());
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const auto sem = index.semantic().store.codes256();
    const auto lowc = index.low_level()->store.codes256();
    const double alpha = query.alpha;
    std::vector<KeyframeHit> hits;
    hits.reserve(candidates.size());
    for (Ordinal o : candidates) {
        const int ds = hamming(sem[o], query.semantic.code256);
        const int dl = hamming(lowc[o], query.low_level->code256);
        hits.push_back({o, alpha * (ds / 256.0) + (1.0 - alpha) * (dl / 256.0)});
    }
    std::sort(hits.begin(), hits.end(), [](const KeyframeHit& a, const KeyframeHit& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.ordinal < b.ordinal;
    });
    return hits;
}

std::vector<ShotScore> keyframes_to_shots(const CodeStore& store,
                                          std::span<const KeyframeHit> ranking,
                                          std::size_t k_shots)
{
    struct Best {
        KeyframeKey key;
        double distance;
    };
    std::vector<Best> best;
    std::unordered_map<std::uint64_t, std::size_t> slot;
    for (const auto& hit : ranking) {
        const auto& key = store.key(hit.ordinal);
        const std::uint64_t shot = (std::uint64_t{key.video} << 32) | key.shot_index;
        auto [it, inserted] = slot.emplace(shot, best.size());
        if (inserted) {
            best.push_back({key, hit.distance});
        } else if (hit.distance < best[it->second].distance) {
            best[it->second].distance = hit.distance;
        }
    }
    // Video ordinals follow sorted video ids, so key order is shot id order.
    std::sort(best.begin(), best.end(), [](const Best& a, const Best& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return std::tie(a.key.video, a.key.shot_index) < std::tie(b.key.video, b.key.shot_index);
    });
    if (best.size() > k_shots) best.resize(k_shots);

    std::vector<ShotScore> out;
    out.reserve(best.size());
    for (const auto& b : best) {
        out.push_back(ShotScore{ShotId{store.videos()[b.key.video], b.key.shot_index}, b.distance,
                                distance_to_score(b.distance)});
    }
    return out;
}

RankedResult to_ranked_result(std::span<const ShotScore> shots)
{
    RankedResult result{QueryKind::Similarity, {}};
    result.entries.reserve(shots.size());
    for (const auto& s : shots) result.entries.push_back({s.shot, s.score});
    return result;
}

RankedResult similarity_search(const SimilarityIndex& index, const SimilarityQuery& query)
{
    if (query.k_shots == 0) throw Error(ErrorKind::InvalidArgument, "k must be positive");
    auto hits = two_stage_search(index, query);
    auto shots = keyframes_to_shots(index.keyframes(), hits, query.k_shots);
    return to_ranked_result(shots);
}

RankedResult query_by_shot(const SimilarityIndex& index, const ShotId& shot, int position,
                           double alpha, std::size_t k, std::size_t shortlist_size)
{
    const auto ordinal = index.keyframes().find(shot, position);
    if (ordinal < 0) {
        throw Error(ErrorKind::UnknownKeyframe,
                    "unknown keyframe " + shot.str() + "/" + std::to_string(position));
    }
    const auto o = static_cast<Ordinal>(ordinal);
    SimilarityQuery query;
    query.semantic = {index.semantic().store.code64(o), index.semantic().store.code256(o)};
    if (const auto* low = index.low_level()) {
        query.low_level = QueryCodes{low->store.code64(o), low->store.code256(o)};
    }
    query.alpha = alpha;
    query.k_shots = k;
    query.shortlist_size = shortlist_size;
    return similarity_search(index, query);
}

RankedResult query_by_vector(const SimilarityIndex& index, const QueryEncoders& encoders,
                             const FeatureVector& v, double alpha, std::size_t k,
                             std::size_t shortlist_size)
{
    if (!encoders.semantic) {
        throw Error(ErrorKind::InvalidArgument, "no semantic encoder configured");
    }
    SimilarityQuery query;
    auto [c64, c256] = encoders.semantic->encode(v);
    query.semantic = {c64, c256};
    if (encoders.low_level) {
        auto [l64, l256] = encoders.low_level->encode(v);
        query.low_level = QueryCodes{l64, l256};
    }
    query.alpha = alpha;
    query.k_shots = k;
    query.shortlist_size = shortlist_size;
    return similarity_search(index, query);
}

}  // namespace shotsearch
