#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "shotsearch/eval.hpp"

using namespace shotsearch;

namespace {

std::vector<ShotId> shots(std::initializer_list<const char*> names)
{
    std::vector<ShotId> out;
    for (const char* n : names) out.push_back({n, 0});
    return out;
}

std::set<ShotId> set_of(std::initializer_list<const char*> names)
{
    auto v = shots(names);
    return {v.begin(), v.end()};
}

struct Pair {
    std::vector<ShotId> ranking;
    std::set<ShotId> relevant;
    std::vector<std::string> ranking_str;
    std::set<std::string> relevant_str;
};

Pair random_pair(std::mt19937_64& rng, std::size_t max_len = 250)
{
    Pair p;
    const std::size_t universe = 20 + rng() % 400;
    std::vector<std::uint32_t> ids(universe);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t len = rng() % std::min(max_len, universe);
    for (std::size_t i = 0; i < len; ++i) {
        p.ranking.push_back({"s", ids[i]});
        p.ranking_str.push_back(p.ranking.back().str());
    }
    const std::size_t rel = 1 + rng() % 40;
    for (std::size_t i = 0; i < rel; ++i) {
        ShotId id{"s", static_cast<std::uint32_t>(rng() % universe)};
        p.relevant.insert(id);
        p.relevant_str.insert(id.str());
    }
    return p;
}

RankedResult ranked(const std::vector<ShotId>& ids)
{
    RankedResult r{QueryKind::Concept, {}};
    double score = 1.0;
    for (const auto& id : ids) r.entries.push_back({id, score -= 1e-4});
    return r;
}

}  // namespace

TEST_CASE("average_precision examples")
{
    auto abc = shots({"a", "b", "c"});
    CHECK(average_precision(abc, set_of({"a", "b", "c"}), 100) == 1.0);
    CHECK(average_precision(abc, set_of({"a", "c"}), 100) ==
          doctest::Approx(oracle::average_precision({"a#0", "b#0", "c#0"}, {"a#0", "c#0"}, 100)).epsilon(1e-15));
    CHECK(average_precision(abc, set_of({"a", "c"}), 100) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(average_precision(shots({"x", "y", "z"}), set_of({"a"}), 100) == 0.0);
    CHECK(average_precision(std::vector<ShotId>{}, set_of({"a"}), 100) == 0.0);

    // Cutoff truncates before both the sum and the normalizer.
    CHECK(average_precision(shots({"x", "a", "b"}), set_of({"a", "b"}), 1) == 0.0);
    CHECK(average_precision(shots({"x", "a", "b"}), set_of({"a", "b"}), 2) == 0.5);
    CHECK_THROWS_AS(average_precision(abc, set_of({"a"}), 0), Error);
    CHECK_THROWS_AS(average_precision(shots({"a", "a"}), set_of({"a"}), 10), Error);

    RelevanceJudgments j{"q", set_of({"a", "c"})};
    CHECK(average_precision(ranked(abc), j, 100) == average_precision(abc, j.relevant, 100));
}

TEST_CASE("normalization is by retrieved relevant shots, not by all relevant shots")
{
    // Two relevant shots retrieved at ranks 1 and 2; eight more never retrieved.
    std::vector<ShotId> ranking = shots({"r1", "r2", "n1", "n2"});
    std::set<ShotId> relevant = set_of({"r1", "r2", "m1", "m2", "m3", "m4", "m5", "m6", "m7", "m8"});
    std::set<std::string> rel_str;
    for (const auto& r : relevant) rel_str.insert(r.str());
    std::vector<std::string> rank_str{"r1#0", "r2#0", "n1#0", "n2#0"};

    const double retrieved = oracle::average_precision(rank_str, rel_str, 100, false);
    const double all = oracle::average_precision(rank_str, rel_str, 100, true);
    CHECK(retrieved == 1.0);
    CHECK(all == doctest::Approx(0.2));
    CHECK(average_precision(ranking, relevant, 100) == retrieved);
    CHECK(average_precision(ranking, relevant, 100) != doctest::Approx(all));
}

TEST_CASE("average_precision agrees with the literal expansion on random pairs")
{
    std::mt19937_64 rng(97);
    int distinguishing = 0;
    for (int i = 0; i < 300; ++i) {
        auto p = random_pair(rng);
        for (std::size_t n : {1UL, 10UL, 100UL, 200UL}) {
            const double got = average_precision(p.ranking, p.relevant, n);
            CHECK(std::abs(got - oracle::average_precision(p.ranking_str, p.relevant_str, n)) <= 1e-12);
            CHECK(got >= 0.0);
            CHECK(got <= 1.0);
            distinguishing += std::abs(got - oracle::average_precision(p.ranking_str, p.relevant_str, n, true)) > 1e-9;
        }
    }
    CHECK(distinguishing > 0);
}

TEST_CASE("average_precision properties")
{
    std::mt19937_64 rng(113);
    for (int i = 0; i < 300; ++i) {
        auto p = random_pair(rng, 60);
        const std::size_t n = 1 + rng() % 80;
        const double ap = average_precision(p.ranking, p.relevant, n);

        // AP is 1 exactly when the retrieved relevant shots form a prefix.
        const std::size_t len = std::min(n, p.ranking.size());
        std::size_t hits = 0, prefix = 0;
        bool still_prefix = true;
        for (std::size_t k = 0; k < len; ++k) {
            const bool rel = p.relevant.count(p.ranking[k]) > 0;
            hits += rel;
            if (rel && still_prefix) ++prefix;
            if (!rel) still_prefix = false;
        }
        CHECK((ap == 1.0) == (hits > 0 && hits == prefix));

        // Moving a relevant shot one place earlier, past a non-relevant one, never lowers AP.
        for (std::size_t k = 1; k < len; ++k) {
            if (p.relevant.count(p.ranking[k]) && !p.relevant.count(p.ranking[k - 1])) {
                auto swapped = p.ranking;
                std::swap(swapped[k], swapped[k - 1]);
                CHECK(average_precision(swapped, p.relevant, n) >= ap - 1e-15);
                break;
            }
        }
    }
}

TEST_CASE("mean_ap")
{
    CHECK(mean_ap(std::vector<double>{1.0}) == 1.0);
    CHECK(mean_ap(std::vector<double>{1.0, 0.0}) == 0.5);
    CHECK_THROWS_AS(mean_ap(std::vector<double>{}), Error);

    std::mt19937_64 rng(127);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> aps(50);
        for (auto& a : aps) a = u(rng);
        long double sum = 0.0L;
        for (double a : aps) sum += a;
        CHECK(std::abs(mean_ap(aps) - static_cast<double>(sum / 50.0L)) <= 1e-12);
    }
}

TEST_CASE("evaluate_run")
{
    std::vector<EvalQuery> queries{
        {"q1", ranked(shots({"a", "b"})), {"q1", set_of({"a"})}},
        {"q2", ranked(shots({"x", "c"})), {"q2", set_of({"c"})}},
    };
    std::vector<std::size_t> cutoffs{100};
    auto reports = evaluate_run(queries, cutoffs);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].per_query.at("q1") == 1.0);
    CHECK(reports[0].per_query.at("q2") == 0.5);
    CHECK(reports[0].mean_ap == 0.75);

    // The longer cutoff sees a relevant shot the shorter one misses.
    std::vector<ShotId> long_ranking;
    for (std::uint32_t i = 0; i < 150; ++i) long_ranking.push_back({"n", i});
    long_ranking.push_back({"hit", 0});
    std::vector<EvalQuery> deep{{"q", ranked(long_ranking), {"q", {ShotId{"hit", 0}}}}};
    std::vector<std::size_t> both{100, 200};
    auto two = evaluate_run(deep, both);
    REQUIRE(two.size() == 2);
    CHECK(two[0].cutoff == 100);
    CHECK(two[0].mean_ap == 0.0);
    CHECK(two[1].mean_ap == doctest::Approx(1.0 / 151.0).epsilon(1e-15));

    CHECK_THROWS_AS(evaluate_run(std::vector<EvalQuery>{}, both), Error);
    std::vector<EvalQuery> unjudged{{"q", ranked(shots({"a"})), {"q", {}}}};
    CHECK_THROWS_AS(evaluate_run(unjudged, both), Error);
    std::vector<std::size_t> zero{0};
    CHECK_THROWS_AS(evaluate_run(queries, zero), Error);
}

TEST_CASE("judgment and run files")
{
    std::istringstream qrels("q1\tv\t1\nq1\tv\t2\nq2\tw\t0\n");
    auto judgments = parse_judgments(qrels);
    REQUIRE(judgments.size() == 2);
    CHECK(judgments.at("q1").relevant == std::set<ShotId>{{"v", 1}, {"v", 2}});

    std::istringstream run_text("q1\tv\t2\t0.9\nq1\tv\t7\t0.5\nq1\tv\t1\t0.5\n");
    auto run = parse_run(run_text);
    REQUIRE(run.at("q1").entries.size() == 3);
    CHECK(run.at("q1").entries[2].shot == ShotId{"v", 1});

    auto joined = join_run(run, judgments);
    REQUIRE(joined.size() == 2);
    CHECK(joined[1].ranking.entries.empty());
    std::vector<std::size_t> cutoffs{100, 200};
    auto reports = evaluate_run(joined, cutoffs);
    const double q1 = (1.0 + 2.0 / 3.0) / 2.0;
    CHECK(reports[0].per_query.at("q1") == doctest::Approx(q1).epsilon(1e-15));
    CHECK(reports[0].per_query.at("q2") == 0.0);
    CHECK(reports[0].mean_ap == doctest::Approx(q1 / 2.0).epsilon(1e-15));

    std::ostringstream table;
    write_report_table(table, reports);
    CHECK(table.str().find("AP@100") != std::string::npos);
    CHECK(table.str().find("AP@200") != std::string::npos);
    CHECK(table.str().find("mAP") != std::string::npos);

    std::ostringstream jsonl;
    write_report_jsonl(jsonl, reports);
    std::istringstream lines(jsonl.str());
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 6);  // two queries and one summary per cutoff

    std::istringstream increasing("q\tv\t1\t0.1\nq\tv\t2\t0.2\n");
    CHECK_THROWS_AS(parse_run(increasing), Error);
    std::istringstream repeated("q\tv\t1\t0.3\nq\tv\t1\t0.2\n");
    CHECK_THROWS_AS(parse_run(repeated), Error);
    std::istringstream short_line("q\tv\n");
    CHECK_THROWS_AS(parse_judgments(short_line), Error);
}
