#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "shotsearch/core.hpp"

namespace shotsearch {

struct RelevanceJudgments {
    std::string query_id;
    std::set<ShotId> relevant;
};

/// Average precision of the top-N prefix:
///
///   AP = 1/|R ∩ ρ^N| * Σ_{k=1..N} |R ∩ ρ^k| / k * [i_k ∈ R]
///
/// Normalized by the relevant shots actually retrieved, not by |R|. Returns 0
/// when none are retrieved. Rankings shorter than N are used as they are.
double average_precision(std::span<const ShotId> ranking, const std::set<ShotId>& relevant,
                         std::size_t cutoff);
double average_precision(const RankedResult& ranking, const RelevanceJudgments& judgments,
                         std::size_t cutoff);

/// Arithmetic mean; throws InvalidArgument on an empty list.
double mean_ap(std::span<const double> aps);

struct EvalReport {
    std::size_t cutoff = 0;
    std::map<std::string, double> per_query;
    double mean_ap = 0.0;
};

struct EvalQuery {
    std::string query_id;
    RankedResult ranking;
    RelevanceJudgments judgments;
};

/// One report per cutoff. Throws InvalidArgument for no queries, a zero
/// cutoff, or a query whose relevant set is empty.
std::vector<EvalReport> evaluate_run(std::span<const EvalQuery> queries,
                                     std::span<const std::size_t> cutoffs);

// Judgments: `query_id TAB video_id TAB shot_index`.
std::map<std::string, RelevanceJudgments> parse_judgments(std::istream& in);
std::map<std::string, RelevanceJudgments> load_judgments(const std::filesystem::path& path);

// Run: `query_id TAB video_id TAB shot_index TAB score`; line order per
// query is rank order and scores must not increase.
std::map<std::string, RankedResult> parse_run(std::istream& in);
std::map<std::string, RankedResult> load_run(const std::filesystem::path& path);

/// Pairs judged queries with their rankings; a judged query without a
/// ranking is evaluated against an empty one.
std::vector<EvalQuery> join_run(const std::map<std::string, RankedResult>& run,
                                const std::map<std::string, RelevanceJudgments>& judgments);

void write_report_table(std::ostream& out, std::span<const EvalReport> reports);
/// One JSON object per line: {"query_id", "cutoff", "ap"} per query, then a
/// {"cutoff", "mean_ap", "queries"} summary per cutoff.
void write_report_jsonl(std::ostream& out, std::span<const EvalReport> reports);

}  // namespace shotsearch
