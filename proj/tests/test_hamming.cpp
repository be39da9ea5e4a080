#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "shotsearch/hamming.hpp"

using namespace shotsearch;

namespace {

CodeStore random_store(std::size_t n, std::mt19937_64& rng, int bits_kept = 64)
{
    std::vector<CodeRecord> records;
    const std::uint64_t mask = bits_kept == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits_kept) - 1;
    for (std::size_t i = 0; i < n; ++i) {
        CodeRecord r;
        r.keyframe = Keyframe{{"v", static_cast<std::uint32_t>(i / 5)}, static_cast<std::uint8_t>(i % 5), i};
        r.code64.bits = rng() & mask;
        r.code256 = oracle::random256(rng);
        records.push_back(r);
    }
    return CodeStore::from_records(records);
}

std::vector<std::uint64_t> codes_of(const CodeStore& s)
{
    return {s.codes64().begin(), s.codes64().end()};
}

std::vector<std::pair<int, std::uint32_t>> as_pairs(const std::vector<Neighbor>& ns)
{
    std::vector<std::pair<int, std::uint32_t>> out;
    for (const auto& n : ns) out.emplace_back(n.distance, n.ordinal);
    return out;
}

void check_partition_invariant(const VpTree& tree, const CodeStore& store)
{
    auto nodes = tree.nodes();
    auto items = tree.items();
    for (const auto& node : nodes) {
        if (node.leaf) continue;
        const std::uint64_t vantage = store.codes64()[items[node.begin]];
        for (auto o : tree.subtree_items(node.left)) {
            CHECK(oracle::bit_distance(vantage, store.codes64()[o]) < node.radius);
        }
        for (auto o : tree.subtree_items(node.right)) {
            CHECK(oracle::bit_distance(vantage, store.codes64()[o]) >= node.radius);
        }
    }
}

}  // namespace

TEST_CASE("hamming distance")
{
    CHECK(hamming(Code64{0x1234}, Code64{0x1234}) == 0);
    CHECK(hamming(Code64{0}, Code64{~std::uint64_t{0}}) == 64);
    CHECK(hamming(Code64{0b1010}, Code64{0b0110}) == oracle::bit_distance(0b1010, 0b0110));
    CHECK(hamming(Code64{0b1010}, Code64{0b0110}) == 2);

    Code256 ones;
    ones.words.fill(~std::uint64_t{0});
    CHECK(hamming(Code256{}, ones) == 256);
    CHECK(hamming(BinaryCode(Code64{1}), BinaryCode(Code64{2})) == 2);
    CHECK_THROWS_AS(hamming(BinaryCode(Code64{1}), BinaryCode(Code256{})), Error);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        const auto a = oracle::random256(rng), b = oracle::random256(rng), c = oracle::random256(rng);
        CHECK(hamming(a, b) == oracle::bit_distance(a, b));
        CHECK(hamming(a, b) == hamming(b, a));
        CHECK(hamming(a, c) <= hamming(a, b) + hamming(b, c));
        CHECK(hamming(a, a) == 0);
    }
}

TEST_CASE("code store")
{
    std::vector<CodeRecord> records{
        {{{"b", 0}, 1, 10}, CodeSpace::Semantic, {1}, {}},
        {{{"a", 3}, 0, 30}, CodeSpace::Semantic, {2}, {}},
        {{{"a", 3}, 4, 40}, CodeSpace::Semantic, {3}, {}},
    };
    auto store = CodeStore::from_records(records);
    REQUIRE(store.size() == 3);
    CHECK(store.shot(0) == ShotId{"a", 3});
    CHECK(store.code64(1).bits == 3);
    CHECK(store.shot(2) == ShotId{"b", 0});
    CHECK(store.find({"a", 3}, 4) == 1);
    CHECK(store.find({"a", 3}, 2) == -1);
    CHECK(store.find({"zzz", 0}, 0) == -1);
    CHECK(store.codes64().size() == store.codes256().size());

    auto dup = records;
    dup.push_back(records[0]);
    CHECK_THROWS_AS(CodeStore::from_records(dup), Error);

    auto back = CodeStore::from_records(store.to_records());
    CHECK(back.checksum() == store.checksum());
    records[0].code64.bits ^= 1;
    CHECK(CodeStore::from_records(records).checksum() != store.checksum());
}

TEST_CASE("build_vptree")
{
    std::mt19937_64 rng(17);

    SUBCASE("empty store is rejected")
    {
        CHECK_THROWS_AS(VpTree::build(CodeStore{}, 1), Error);
    }
    SUBCASE("one code gives a single leaf")
    {
        auto store = random_store(1, rng);
        auto tree = VpTree::build(store, 3);
        REQUIRE(tree.nodes().size() == 1);
        CHECK(tree.nodes()[0].leaf);
        CHECK(tree.knn(store.code64(0), 1)[0] == Neighbor{0, 0});
    }
    SUBCASE("1000 random codes: every code reachable exactly once")
    {
        auto store = random_store(1000, rng);
        auto tree = VpTree::build(store, 3);
        // Traverse from the root through child links only.
        std::vector<std::uint32_t> reached;
        std::vector<std::uint32_t> stack{0};
        while (!stack.empty()) {
            const auto& node = tree.nodes()[stack.back()];
            stack.pop_back();
            if (node.leaf) {
                for (auto i = node.begin; i < node.end; ++i) reached.push_back(tree.items()[i]);
            } else {
                reached.push_back(tree.items()[node.begin]);
                stack.push_back(node.left);
                stack.push_back(node.right);
            }
        }
        CHECK(reached.size() == 1000);
        std::set<std::uint32_t> unique(reached.begin(), reached.end());
        CHECK(unique.size() == 1000);
        CHECK(*unique.rbegin() == 999);
        check_partition_invariant(tree, store);
    }
    SUBCASE("identical codes are all indexed and all returned")
    {
        std::vector<CodeRecord> records(2);
        records[0].keyframe = Keyframe{{"v", 0}, 0, 0};
        records[1].keyframe = Keyframe{{"v", 0}, 1, 1};
        records[0].code64.bits = records[1].code64.bits = 0xabc;
        auto store = CodeStore::from_records(records);
        auto tree = VpTree::build(store, 1);
        auto hits = tree.knn(Code64{0xabc}, 2);
        CHECK(hits == std::vector<Neighbor>{{0, 0}, {1, 0}});
    }
    SUBCASE("many duplicates and low-entropy codes keep the invariant")
    {
        auto store = random_store(3000, rng, 3);
        auto tree = VpTree::build(store, 9);
        check_partition_invariant(tree, store);
        CHECK(tree.size() == 3000);
    }
    SUBCASE("deterministic in the seed")
    {
        auto store = random_store(2000, rng);
        CHECK(VpTree::build(store, 4) == VpTree::build(store, 4));
        CHECK_FALSE(VpTree::build(store, 4) == VpTree::build(store, 5));
    }
}

TEST_CASE("knn64 is exact")
{
    std::mt19937_64 rng(23);

    SUBCASE("query equal to an indexed code")
    {
        auto store = random_store(500, rng);
        auto tree = VpTree::build(store, 1);
        auto hits = tree.knn(store.code64(321), 3);
        CHECK(hits[0] == Neighbor{321, 0});
    }
    SUBCASE("k at least the corpus size returns the whole corpus sorted")
    {
        auto store = random_store(77, rng);
        auto tree = VpTree::build(store, 1);
        const std::uint64_t q = rng();
        CHECK(as_pairs(tree.knn(Code64{q}, 500)) == oracle::linear_knn(codes_of(store), q, 500));
        CHECK_THROWS_AS(tree.knn(Code64{q}, 0), Error);
    }
    SUBCASE("10,000 random codes, 100 queries, k=100")
    {
        auto store = random_store(10000, rng);
        auto tree = VpTree::build(store, 2);
        auto codes = codes_of(store);
        for (int q = 0; q < 100; ++q) {
            const std::uint64_t query = q % 4 == 0 ? codes[rng() % codes.size()] ^ (rng() & rng() & rng()) : rng();
            // Ties resolve by ordinal, so the full pair lists agree, not just the multisets.
            CHECK(as_pairs(tree.knn(Code64{query}, 100)) == oracle::linear_knn(codes, query, 100));
        }
    }
    SUBCASE("clustered corpora with heavy ties")
    {
        for (int bits : {2, 6, 12}) {
            auto store = random_store(4000, rng, bits);
            auto tree = VpTree::build(store, 7);
            auto codes = codes_of(store);
            for (int q = 0; q < 20; ++q) {
                const std::uint64_t query = rng() & ((std::uint64_t{1} << (bits + 1)) - 1);
                for (std::size_t k : {1UL, 10UL, 333UL}) {
                    CHECK(as_pairs(tree.knn(Code64{query}, k)) == oracle::linear_knn(codes, query, k));
                }
            }
        }
    }
}

TEST_CASE("pruning soundness: skipped subtrees hold no closer items")
{
    std::mt19937_64 rng(29);
    // Clustered codes make pruning actually happen.
    std::vector<CodeRecord> records;
    std::vector<std::uint64_t> centers;
    for (int c = 0; c < 20; ++c) centers.push_back(rng());
    for (std::uint32_t i = 0; i < 5000; ++i) {
        CodeRecord r;
        r.keyframe = Keyframe{{"v", i / 5}, static_cast<std::uint8_t>(i % 5), i};
        r.code64.bits = centers[rng() % centers.size()] ^ (rng() & rng() & rng() & rng());
        records.push_back(r);
    }
    auto store = CodeStore::from_records(records);
    auto tree = VpTree::build(store, 11);
    std::size_t total_pruned = 0;
    for (int q = 0; q < 50; ++q) {
        const std::uint64_t query = centers[q % centers.size()] ^ (rng() & rng() & rng());
        std::vector<std::uint32_t> pruned;
        SearchStats stats;
        stats.pruned_nodes = &pruned;
        auto hits = tree.knn(Code64{query}, 10, &stats);
        const int kth = hits.back().distance;
        CHECK(stats.nodes_pruned == pruned.size());
        std::size_t skipped_items = 0;
        for (auto node : pruned) {
            for (auto o : tree.subtree_items(node)) {
                ++skipped_items;
                CHECK(oracle::bit_distance(store.codes64()[o], query) > kth);
            }
        }
        CHECK(stats.distance_evaluations + skipped_items >= store.size());
        CHECK(as_pairs(hits) == oracle::linear_knn(codes_of(store), query, 10));
        total_pruned += pruned.size();
    }
    CHECK(total_pruned > 0);
}

TEST_CASE("refine256")
{
    std::mt19937_64 rng(31);
    auto store = random_store(1000, rng);
    const auto query = oracle::random256(rng);

    std::vector<Ordinal> one{42};
    auto single = refine256(store, query, one);
    REQUIRE(single.size() == 1);
    CHECK(single[0] == Neighbor{42, oracle::bit_distance(store.code256(42), query)});

    std::vector<Ordinal> some{5, 9, 700};
    CHECK(refine256(store, store.code256(9), some)[0] == Neighbor{9, 0});

    std::vector<Ordinal> all(1000);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    auto refined = refine256(store, query, all);
    std::vector<std::pair<int, Ordinal>> oracle_scan;
    for (Ordinal o = 0; o < 1000; ++o) oracle_scan.emplace_back(oracle::bit_distance(store.code256(o), query), o);
    std::sort(oracle_scan.begin(), oracle_scan.end());
    CHECK(as_pairs(refined) == oracle_scan);

    CHECK_THROWS_AS(refine256(store, query, std::vector<Ordinal>{}), Error);
    CHECK_THROWS_AS(refine256(store, query, std::vector<Ordinal>{1000}), Error);
}

TEST_CASE("tree snapshots")
{
    std::mt19937_64 rng(37);
    auto store = random_store(3000, rng);
    auto tree = VpTree::build(store, 8);

    auto bytes = tree.serialize();
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SHGT");
    auto back = VpTree::deserialize(bytes, store);
    CHECK(back == tree);
    for (int q = 0; q < 30; ++q) {
        const Code64 query{rng()};
        CHECK(back.knn(query, 50) == tree.knn(query, 50));
    }

    fixtures::TempDir dir;
    tree.save(dir / "t.shgt");
    CHECK(VpTree::load(dir / "t.shgt", store) == tree);

    auto other = random_store(3000, rng);
    try {
        VpTree::deserialize(bytes, other);
        FAIL("expected checksum mismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ChecksumMismatch);
    }

    int structured = 0;
    for (int t = 0; t < 500; ++t) {
        auto bad = bytes;
        if (t % 2) {
            bad.resize(rng() % bad.size());
        } else {
            for (int e = 0; e < 3; ++e) bad[rng() % bad.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        }
        try {
            auto loaded = VpTree::deserialize(bad, store);
            // Anything accepted must still answer exactly.
            const Code64 query{rng()};
            CHECK(as_pairs(loaded.knn(query, 20)) == oracle::linear_knn(codes_of(store), query.bits, 20));
        } catch (const Error&) {
            ++structured;
        }
    }
    CHECK(structured > 0);
}
