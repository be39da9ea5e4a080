#include "shotsearch/hamming.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <queue>
#include <random>

namespace shotsearch {

int hamming(const BinaryCode& a, const BinaryCode& b)
{
    if (a.width() != b.width()) {
        throw Error(ErrorKind::WidthMismatch, "cannot compare " + std::to_string(a.width()) +
                                                  "-bit and " + std::to_string(b.width()) +
                                                  "-bit codes");
    }
    int d = 0;
    auto wa = a.words();
    auto wb = b.words();
    for (std::size_t i = 0; i < wa.size(); ++i) d += std::popcount(wa[i] ^ wb[i]);
    return d;
}

CodeStore CodeStore::from_records(std::span<const CodeRecord> records)
{
    CodeStore store;
    if (records.empty()) return store;
    store.space_ = records.front().space;

    std::vector<const CodeRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) {
        if (r.space != store.space_) {
            throw Error(ErrorKind::InvalidArgument, "code records mix spaces");
        }
        sorted.push_back(&r);
    }
    std::sort(sorted.begin(), sorted.end(), [](const CodeRecord* a, const CodeRecord* b) {
        return std::tie(a->keyframe.shot, a->keyframe.position) <
               std::tie(b->keyframe.shot, b->keyframe.position);
    });

    std::map<std::string, std::uint32_t> video_ids;
    for (const auto* r : sorted) video_ids.emplace(r->keyframe.shot.video_id, 0);
    for (auto& [name, id] : video_ids) {
        id = static_cast<std::uint32_t>(store.videos_.size());
        store.videos_.push_back(name);
    }

    store.keys_.reserve(sorted.size());
    store.codes64_.reserve(sorted.size());
    store.codes256_.reserve(sorted.size());
    for (const auto* r : sorted) {
        KeyframeKey key{video_ids.at(r->keyframe.shot.video_id), r->keyframe.shot.shot_index,
                        r->keyframe.position};
        if (!store.keys_.empty() && store.keys_.back() == key) {
            throw Error(ErrorKind::Duplicate, "duplicate code record for keyframe " +
                                                  r->keyframe.shot.str() + "/" +
                                                  std::to_string(r->keyframe.position));
        }
        store.keys_.push_back(key);
        store.codes64_.push_back(r->code64.bits);
        store.codes256_.push_back(r->code256);
    }
    if (store.keys_.size() > std::numeric_limits<Ordinal>::max()) {
        throw Error(ErrorKind::InvalidArgument, "code store exceeds ordinal range");
    }
    return store;
}

CodeStore::CodeStore(CodeSpace space, std::vector<std::string> videos,
                     std::vector<KeyframeKey> keys, std::vector<std::uint64_t> codes64,
                     std::vector<Code256> codes256)
    : space_(space),
      videos_(std::move(videos)),
      keys_(std::move(keys)),
      codes64_(std::move(codes64)),
      codes256_(std::move(codes256))
{
    if (keys_.size() != codes64_.size() || keys_.size() != codes256_.size()) {
        throw Error(ErrorKind::InvalidArgument, "code store column lengths differ");
    }
    if (!std::is_sorted(videos_.begin(), videos_.end()) ||
        std::adjacent_find(videos_.begin(), videos_.end()) != videos_.end()) {
        throw Error(ErrorKind::InvalidArgument, "video table must be sorted and unique");
    }
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        if (keys_[i].video >= videos_.size()) {
            throw Error(ErrorKind::InvalidArgument, "key references unknown video ordinal");
        }
        if (i > 0 && !(keys_[i - 1] < keys_[i])) {
            throw Error(ErrorKind::InvalidArgument, "keys must be strictly increasing");
        }
    }
}

ShotId CodeStore::shot(Ordinal o) const
{
    const auto& k = keys_.at(o);
    return ShotId{videos_[k.video], k.shot_index};
}

std::int64_t CodeStore::find(const ShotId& shot, int position) const
{
    auto v = std::lower_bound(videos_.begin(), videos_.end(), shot.video_id);
    if (v == videos_.end() || *v != shot.video_id || position < 0 || position > 255) return -1;
    KeyframeKey key{static_cast<std::uint32_t>(v - videos_.begin()), shot.shot_index,
                    static_cast<std::uint8_t>(position)};
    auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) return -1;
    return it - keys_.begin();
}

std::uint64_t CodeStore::checksum() const
{
    constexpr std::uint64_t kPrime = 0x100000001b3ULL;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint64_t w) {
        h ^= w;
        h *= kPrime;
    };
    mix(static_cast<std::uint64_t>(space_));
    mix(keys_.size());
    for (const auto& v : videos_) {
        mix(v.size());
        for (unsigned char c : v) mix(c);
    }
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        mix((std::uint64_t{keys_[i].video} << 32) | keys_[i].shot_index);
        mix(keys_[i].position);
        mix(codes64_[i]);
        for (auto w : codes256_[i].words) mix(w);
    }
    return h;
}

std::vector<CodeRecord> CodeStore::to_records() const
{
    std::vector<CodeRecord> out;
    out.reserve(size());
    for (Ordinal o = 0; o < size(); ++o) {
        CodeRecord r;
        r.keyframe.shot = shot(o);
        r.keyframe.position = keys_[o].position;
        r.space = space_;
        r.code64 = Code64{codes64_[o]};
        r.code256 = codes256_[o];
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

struct BuildItem {
    std::uint64_t code;
    Ordinal ordinal;
    std::uint8_t distance;
};

struct Task {
    std::uint32_t node;
    std::uint32_t lo;
    std::uint32_t hi;
};

}  // namespace

VpTree VpTree::build(const CodeStore& store, std::uint64_t seed)
{
    if (store.empty()) throw Error(ErrorKind::InvalidArgument, "cannot build a tree over no codes");

    VpTree tree;
    tree.seed_ = seed;
    tree.store_checksum_ = store.checksum();

    const auto codes = store.codes64();
    std::vector<BuildItem> work(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        work[i] = BuildItem{codes[i], static_cast<Ordinal>(i), 0};
    }

    // Vantage choice uses engine() % n: slightly biased, but fully specified.
    std::mt19937_64 engine(seed);
    tree.nodes_.emplace_back();
    std::vector<Task> stack{{0, 0, static_cast<std::uint32_t>(work.size())}};
    while (!stack.empty()) {
        const Task task = stack.back();
        stack.pop_back();
        Node node;
        node.begin = task.lo;
        node.end = task.hi;
        const std::uint32_t n = task.hi - task.lo;
        if (n <= kLeafSize) {
            node.leaf = true;
            tree.nodes_[task.node] = node;
            continue;
        }

        const std::uint32_t pick = task.lo + static_cast<std::uint32_t>(engine() % n);
        std::swap(work[task.lo], work[pick]);
        const std::uint64_t vantage = work[task.lo].code;
        auto first = work.begin() + task.lo + 1;
        auto last = work.begin() + task.hi;
        for (auto it = first; it != last; ++it) {
            it->distance = static_cast<std::uint8_t>(std::popcount(it->code ^ vantage));
        }
        auto by_distance = [](const BuildItem& a, const BuildItem& b) {
            return a.distance < b.distance;
        };
        auto median = first + (last - first - 1) / 2;
        std::nth_element(first, median, last, by_distance);
        int radius = median->distance;
        auto below = [&](const BuildItem& it) { return it.distance < radius; };
        auto mid = std::partition(first, last, below);
        if (mid == first) {
            // Median equals the minimum: split off everything at that distance.
            ++radius;
            mid = std::partition(first, last, below);
        }
        if (mid == last) {
            // Every remaining item is equidistant from the vantage; scan linearly.
            node.leaf = true;
            tree.nodes_[task.node] = node;
            continue;
        }

        node.radius = static_cast<std::uint8_t>(radius);
        auto [lmin, lmax] = std::minmax_element(first, mid, by_distance);
        auto [rmin, rmax] = std::minmax_element(mid, last, by_distance);
        node.left_min = lmin->distance;
        node.left_max = lmax->distance;
        node.right_min = rmin->distance;
        node.right_max = rmax->distance;

        const auto split = static_cast<std::uint32_t>(mid - work.begin());
        node.left = static_cast<std::uint32_t>(tree.nodes_.size());
        node.right = node.left + 1;
        tree.nodes_.emplace_back();
        tree.nodes_.emplace_back();
        tree.nodes_[task.node] = node;
        stack.push_back({node.right, split, task.hi});
        stack.push_back({node.left, task.lo + 1, split});
    }

    tree.items_.resize(work.size());
    tree.item_codes_.resize(work.size());
    for (std::size_t i = 0; i < work.size(); ++i) {
        tree.items_[i] = work[i].ordinal;
        tree.item_codes_[i] = work[i].code;
    }
    return tree;
}

std::vector<Neighbor> VpTree::knn(Code64 query, std::size_t k, SearchStats* stats) const
{
    if (items_.empty()) throw Error(ErrorKind::InvalidArgument, "knn on an empty tree");
    if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
    k = std::min(k, items_.size());

    // Max-heap on (distance, ordinal): top is the current k-th candidate.
    std::vector<Neighbor> heap;
    heap.reserve(k + 1);
    auto offer = [&](Neighbor cand) {
        if (heap.size() < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end());
        }
    };
    // A subtree whose lower bound equals the k-th distance may still hold a
    // tie with a smaller ordinal, so only strictly larger bounds are pruned.
    auto prunable = [&](int bound) { return heap.size() == k && bound > heap.front().distance; };

    struct Pending {
        int bound;
        std::uint32_t node;
        bool operator<(const Pending& o) const { return bound > o.bound; }
    };
    std::priority_queue<Pending> todo;
    todo.push({0, root()});

    auto note_pruned = [&](std::uint32_t node) {
        if (!stats) return;
        ++stats->nodes_pruned;
        if (stats->pruned_nodes) stats->pruned_nodes->push_back(node);
    };

    while (!todo.empty()) {
        const Pending p = todo.top();
        todo.pop();
        if (prunable(p.bound)) {
            note_pruned(p.node);
            continue;
        }
        const Node& node = nodes_[p.node];
        if (stats) ++stats->nodes_visited;

        if (node.leaf) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const int d = std::popcount(item_codes_[i] ^ query.bits);
                if (heap.size() == k && d > heap.front().distance) continue;
                offer(Neighbor{items_[i], d});
            }
            if (stats) stats->distance_evaluations += node.end - node.begin;
            continue;
        }

        const int d = std::popcount(item_codes_[node.begin] ^ query.bits);
        if (stats) ++stats->distance_evaluations;
        offer(Neighbor{items_[node.begin], d});

        auto bound = [d](int lo, int hi) { return std::max({0, lo - d, d - hi}); };
        const int left_bound = bound(node.left_min, node.left_max);
        const int right_bound = bound(node.right_min, node.right_max);
        for (auto [child, b] : {std::pair{node.left, left_bound}, std::pair{node.right, right_bound}}) {
            if (prunable(b)) {
                note_pruned(child);
            } else {
                todo.push({b, child});
            }
        }
    }

    std::sort_heap(heap.begin(), heap.end());
    return heap;
}

std::vector<Ordinal> VpTree::subtree_items(std::uint32_t node) const
{
    const Node& n = nodes_.at(node);
    return {items_.begin() + n.begin, items_.begin() + n.end};
}

namespace {

constexpr std::uint16_t kSnapshotVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value)
{
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T read()
    {
        if (bytes_.size() - pos_ < sizeof(T)) {
            throw Error(ErrorKind::Format, "truncated index snapshot");
        }
        T value{};
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
        }
        pos_ += sizeof(T);
        return value;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

constexpr std::size_t kNodeBytes = 4 * 4 + 6;

}  // namespace

std::vector<std::uint8_t> VpTree::serialize() const
{
    std::vector<std::uint8_t> out;
    out.reserve(38 + nodes_.size() * kNodeBytes + items_.size() * 4);
    for (char c : std::string_view("SHGT")) out.push_back(static_cast<std::uint8_t>(c));
    put<std::uint16_t>(out, kSnapshotVersion);
    put<std::uint64_t>(out, seed_);
    put<std::uint64_t>(out, store_checksum_);
    put<std::uint64_t>(out, items_.size());
    put<std::uint64_t>(out, nodes_.size());
    for (const auto& n : nodes_) {
        put<std::uint32_t>(out, n.left);
        put<std::uint32_t>(out, n.right);
        put<std::uint32_t>(out, n.begin);
        put<std::uint32_t>(out, n.end);
        put<std::uint8_t>(out, n.radius);
        put<std::uint8_t>(out, n.leaf ? 1 : 0);
        put<std::uint8_t>(out, n.left_min);
        put<std::uint8_t>(out, n.left_max);
        put<std::uint8_t>(out, n.right_min);
        put<std::uint8_t>(out, n.right_max);
    }
    for (auto o : items_) put<std::uint32_t>(out, o);
    return out;
}

VpTree VpTree::deserialize(std::span<const std::uint8_t> bytes, const CodeStore& store)
{
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "SHGT", 4) != 0) {
        throw Error(ErrorKind::Format, "bad magic: not an index snapshot");
    }
    Reader r(bytes.subspan(4));
    auto version = r.read<std::uint16_t>();
    if (version != kSnapshotVersion) {
        throw Error(ErrorKind::Format, "unsupported snapshot version " + std::to_string(version));
    }
    VpTree tree;
    tree.seed_ = r.read<std::uint64_t>();
    tree.store_checksum_ = r.read<std::uint64_t>();
    if (tree.store_checksum_ != store.checksum()) {
        throw Error(ErrorKind::ChecksumMismatch, "index snapshot was built from different codes");
    }
    auto item_count = r.read<std::uint64_t>();
    auto node_count = r.read<std::uint64_t>();
    if (item_count != store.size()) {
        throw Error(ErrorKind::Format, "snapshot item count does not match code store");
    }
    if (node_count == 0 || node_count > r.remaining() / kNodeBytes ||
        item_count > (r.remaining() - node_count * kNodeBytes) / 4) {
        throw Error(ErrorKind::Format, "truncated index snapshot");
    }
    tree.nodes_.resize(static_cast<std::size_t>(node_count));
    for (auto& n : tree.nodes_) {
        n.left = r.read<std::uint32_t>();
        n.right = r.read<std::uint32_t>();
        n.begin = r.read<std::uint32_t>();
        n.end = r.read<std::uint32_t>();
        n.radius = r.read<std::uint8_t>();
        auto leaf = r.read<std::uint8_t>();
        n.left_min = r.read<std::uint8_t>();
        n.left_max = r.read<std::uint8_t>();
        n.right_min = r.read<std::uint8_t>();
        n.right_max = r.read<std::uint8_t>();
        if (leaf > 1) throw Error(ErrorKind::Format, "corrupt snapshot node");
        n.leaf = leaf == 1;
    }
    tree.items_.resize(static_cast<std::size_t>(item_count));
    for (auto& o : tree.items_) o = r.read<Ordinal>();
    if (r.remaining() != 0) throw Error(ErrorKind::Format, "trailing bytes in index snapshot");

    // Structural check: every node range nests inside its parent, items are a
    // permutation of the store ordinals.
    std::vector<bool> seen(tree.items_.size(), false);
    for (auto o : tree.items_) {
        if (o >= seen.size() || seen[o]) throw Error(ErrorKind::Format, "corrupt snapshot items");
        seen[o] = true;
    }
    std::vector<std::uint32_t> stack{0};
    std::size_t reached = 0;
    if (tree.nodes_[0].begin != 0 || tree.nodes_[0].end != item_count) {
        throw Error(ErrorKind::Format, "corrupt snapshot root");
    }
    while (!stack.empty()) {
        const auto id = stack.back();
        stack.pop_back();
        if (++reached > tree.nodes_.size()) throw Error(ErrorKind::Format, "corrupt snapshot tree");
        const Node& n = tree.nodes_[id];
        if (n.begin >= n.end || n.end > item_count) {
            throw Error(ErrorKind::Format, "corrupt snapshot node range");
        }
        if (n.leaf) continue;
        if (n.left >= node_count || n.right >= node_count) {
            throw Error(ErrorKind::Format, "corrupt snapshot child index");
        }
        const Node& l = tree.nodes_[n.left];
        const Node& rt = tree.nodes_[n.right];
        if (l.begin != n.begin + 1 || l.end != rt.begin || rt.end != n.end) {
            throw Error(ErrorKind::Format, "corrupt snapshot child ranges");
        }
        stack.push_back(n.left);
        stack.push_back(n.right);
    }
    if (reached != tree.nodes_.size()) throw Error(ErrorKind::Format, "unreachable snapshot nodes");

    tree.attach_codes(store);

    // Search correctness rests on the stored radii and child bounds, so they
    // are re-derived from the codes rather than trusted.
    for (const Node& n : tree.nodes_) {
        if (n.leaf) continue;
        const std::uint64_t vantage = tree.item_codes_[n.begin];
        auto check_child = [&](const Node& child, std::uint8_t lo, std::uint8_t hi, bool left) {
            for (std::uint32_t i = child.begin; i < child.end; ++i) {
                const int d = std::popcount(tree.item_codes_[i] ^ vantage);
                if (d < lo || d > hi || (left ? d >= n.radius : d < n.radius)) {
                    throw Error(ErrorKind::Format, "snapshot bounds disagree with the codes");
                }
            }
        };
        check_child(tree.nodes_[n.left], n.left_min, n.left_max, true);
        check_child(tree.nodes_[n.right], n.right_min, n.right_max, false);
    }
    return tree;
}

void VpTree::attach_codes(const CodeStore& store)
{
    const auto codes = store.codes64();
    item_codes_.resize(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) item_codes_[i] = codes[items_[i]];
}

void VpTree::save(const std::filesystem::path& path) const
{
    auto bytes = serialize();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

VpTree VpTree::load(const std::filesystem::path& path, const CodeStore& store)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize(bytes, store);
}

std::vector<Neighbor> refine256(const CodeStore& store, const Code256& query,
                                std::span<const Ordinal> shortlist)
{
    if (shortlist.empty()) throw Error(ErrorKind::InvalidArgument, "empty shortlist");
    const auto codes = store.codes256();
    std::vector<Neighbor> out;
    out.reserve(shortlist.size());
    for (Ordinal o : shortlist) {
        if (o >= codes.size()) {
            throw Error(ErrorKind::InvalidArgument, "invalid ordinal " + std::to_string(o));
        }
        out.push_back(Neighbor{o, hamming(codes[o], query)});
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace shotsearch
