#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shotsearch/core.hpp"

namespace shotsearch {

inline int hamming(Code64 a, Code64 b) noexcept
{
    return std::popcount(a.bits ^ b.bits);
}

inline int hamming(const Code256& a, const Code256& b) noexcept
{
    return std::popcount(a.words[0] ^ b.words[0]) + std::popcount(a.words[1] ^ b.words[1]) +
           std::popcount(a.words[2] ^ b.words[2]) + std::popcount(a.words[3] ^ b.words[3]);
}

/// Throws WidthMismatch when the widths differ.
int hamming(const BinaryCode& a, const BinaryCode& b);

using Ordinal = std::uint32_t;

/// Compact keyframe key: video ordinal into CodeStore::videos().
struct KeyframeKey {
    std::uint32_t video = 0;
    std::uint32_t shot_index = 0;
    std::uint8_t position = 0;

    auto operator<=>(const KeyframeKey&) const = default;
    bool same_shot(const KeyframeKey& o) const noexcept
    {
        return video == o.video && shot_index == o.shot_index;
    }
};

/// Contiguous code arrays addressed by keyframe ordinal.
///
/// Ordinals are assigned in (video_id, shot_index, position) order and the
/// video table is sorted, so comparing keys compares shot ids.
class CodeStore {
public:
    CodeStore() = default;

    /// Throws Duplicate when two records share a keyframe, and
    /// InvalidArgument when spaces are mixed.
    static CodeStore from_records(std::span<const CodeRecord> records);

    /// Pre-sorted columns; throws InvalidArgument if lengths or order disagree.
    CodeStore(CodeSpace space, std::vector<std::string> videos, std::vector<KeyframeKey> keys,
              std::vector<std::uint64_t> codes64, std::vector<Code256> codes256);

    CodeSpace space() const noexcept { return space_; }
    std::size_t size() const noexcept { return keys_.size(); }
    bool empty() const noexcept { return keys_.empty(); }

    std::span<const std::uint64_t> codes64() const noexcept { return codes64_; }
    std::span<const Code256> codes256() const noexcept { return codes256_; }
    std::span<const KeyframeKey> keys() const noexcept { return keys_; }
    std::span<const std::string> videos() const noexcept { return videos_; }

    Code64 code64(Ordinal o) const { return Code64{codes64_.at(o)}; }
    const Code256& code256(Ordinal o) const { return codes256_.at(o); }
    const KeyframeKey& key(Ordinal o) const { return keys_.at(o); }
    ShotId shot(Ordinal o) const;

    /// Ordinal of (shot, position), or -1 when absent.
    std::int64_t find(const ShotId& shot, int position) const;

    /// FNV-1a over both code arrays and keys; identifies store content.
    std::uint64_t checksum() const;

    std::vector<CodeRecord> to_records() const;

private:
    CodeSpace space_ = CodeSpace::Semantic;
    std::vector<std::string> videos_;
    std::vector<KeyframeKey> keys_;
    std::vector<std::uint64_t> codes64_;
    std::vector<Code256> codes256_;
};

struct Neighbor {
    Ordinal ordinal = 0;
    int distance = 0;

    bool operator==(const Neighbor&) const = default;
    auto operator<=>(const Neighbor& o) const
    {
        if (auto c = distance <=> o.distance; c != 0) return c;
        return ordinal <=> o.ordinal;
    }
};

/// Per-query instrumentation.
struct SearchStats {
    std::size_t nodes_visited = 0;
    std::size_t distance_evaluations = 0;
    std::size_t nodes_pruned = 0;
    /// When non-null, receives the index of every node whose subtree was skipped.
    std::vector<std::uint32_t>* pruned_nodes = nullptr;
};

/// Vantage-point tree over the 64-bit codes of a CodeStore.
///
/// Each internal node owns one vantage item; the remaining items split into
/// left (distance to vantage < radius) and right (>= radius). Radius is the
/// median distance. Leaves hold up to kLeafSize items scanned linearly.
class VpTree {
public:
    static constexpr std::size_t kLeafSize = 32;
    static constexpr std::uint32_t kNone = 0xffffffffU;

    struct Node {
        std::uint32_t left = kNone;
        std::uint32_t right = kNone;
        std::uint32_t begin = 0;  // range into items(); internal nodes use begin as vantage slot
        std::uint32_t end = 0;
        std::uint8_t radius = 0;
        bool leaf = false;
        // Distance-to-vantage range of each child's items, for tighter pruning.
        std::uint8_t left_min = 0, left_max = 0, right_min = 0, right_max = 0;

        bool operator==(const Node&) const = default;
    };

    /// Throws InvalidArgument on an empty store. The tree keeps no reference
    /// to the store; codes are copied in tree order.
    static VpTree build(const CodeStore& store, std::uint64_t seed);

    /// Exact k nearest by Hamming distance, ascending (distance, ordinal).
    std::vector<Neighbor> knn(Code64 query, std::size_t k, SearchStats* stats = nullptr) const;

    std::size_t size() const noexcept { return items_.size(); }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t store_checksum() const noexcept { return store_checksum_; }
    std::span<const Node> nodes() const noexcept { return nodes_; }
    /// Ordinals in tree order; every indexed ordinal appears exactly once.
    std::span<const Ordinal> items() const noexcept { return items_; }
    /// Ordinals contained in the subtree rooted at `node`.
    std::vector<Ordinal> subtree_items(std::uint32_t node) const;

    // Snapshot: "SHGT" u16 version, u64 seed, u64 store checksum, u64 item
    // count, u64 node count, nodes { u32 left, u32 right, u32 begin, u32 end,
    // u8 radius, u8 leaf, u8 left_min, u8 left_max, u8 right_min, u8 right_max },
    // items { u32 ordinal }.
    std::vector<std::uint8_t> serialize() const;
    /// Validates structure and that the snapshot was built from `store`
    /// (ChecksumMismatch otherwise).
    static VpTree deserialize(std::span<const std::uint8_t> bytes, const CodeStore& store);
    void save(const std::filesystem::path& path) const;
    static VpTree load(const std::filesystem::path& path, const CodeStore& store);

    bool operator==(const VpTree& o) const
    {
        return seed_ == o.seed_ && store_checksum_ == o.store_checksum_ && nodes_ == o.nodes_ &&
               items_ == o.items_;
    }

private:
    void attach_codes(const CodeStore& store);
    std::uint32_t root() const noexcept { return nodes_.empty() ? kNone : 0; }

    std::uint64_t seed_ = 0;
    std::uint64_t store_checksum_ = 0;
    std::vector<Node> nodes_;
    std::vector<Ordinal> items_;
    std::vector<std::uint64_t> item_codes_;  // codes64 in tree order
};

/// Exact 256-bit distances for the shortlist, ascending (distance, ordinal).
/// Throws InvalidArgument on an empty shortlist or out-of-range ordinal.
std::vector<Neighbor> refine256(const CodeStore& store, const Code256& query,
                                std::span<const Ordinal> shortlist);

}  // namespace shotsearch
