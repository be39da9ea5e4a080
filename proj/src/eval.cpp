#include "shotsearch/eval.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace shotsearch {

double average_precision(std::span<const ShotId> ranking, const std::set<ShotId>& relevant,
                         std::size_t cutoff)
{
    if (cutoff == 0) throw Error(ErrorKind::InvalidArgument, "cutoff N must be at least 1");
    const std::size_t n = std::min(cutoff, ranking.size());
    std::set<ShotId> seen;
    std::size_t retrieved_relevant = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!seen.insert(ranking[k]).second) {
            throw Error(ErrorKind::InvalidArgument, "shot " + ranking[k].str() +
                                                        " appears twice in ranking");
        }
        if (relevant.contains(ranking[k])) {
            ++retrieved_relevant;
            sum += static_cast<double>(retrieved_relevant) / static_cast<double>(k + 1);
        }
    }
    return retrieved_relevant == 0 ? 0.0 : sum / static_cast<double>(retrieved_relevant);
}

double average_precision(const RankedResult& ranking, const RelevanceJudgments& judgments,
                         std::size_t cutoff)
{
    std::vector<ShotId> shots;
    shots.reserve(ranking.entries.size());
    for (const auto& e : ranking.entries) shots.push_back(e.shot);
    return average_precision(shots, judgments.relevant, cutoff);
}

double mean_ap(std::span<const double> aps)
{
    if (aps.empty()) throw Error(ErrorKind::InvalidArgument, "mean AP of no queries");
    // Neumaier summation keeps the mean exact to the last bits for long runs.
    double sum = 0.0;
    double carry = 0.0;
    for (double x : aps) {
        const double t = sum + x;
        carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return (sum + carry) / static_cast<double>(aps.size());
}

std::vector<EvalReport> evaluate_run(std::span<const EvalQuery> queries,
                                     std::span<const std::size_t> cutoffs)
{
    if (queries.empty()) throw Error(ErrorKind::InvalidArgument, "no queries to evaluate");
    for (const auto& q : queries) {
        if (q.judgments.relevant.empty()) {
            throw Error(ErrorKind::InvalidArgument,
                        "query " + q.query_id + " has no relevant shots");
        }
    }
    std::vector<EvalReport> reports;
    for (std::size_t cutoff : cutoffs) {
        EvalReport report;
        report.cutoff = cutoff;
        std::vector<double> aps;
        aps.reserve(queries.size());
        for (const auto& q : queries) {
            const double ap = average_precision(q.ranking, q.judgments, cutoff);
            report.per_query[q.query_id] = ap;
            aps.push_back(ap);
        }
        report.mean_ap = mean_ap(aps);
        reports.push_back(std::move(report));
    }
    return reports;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return fields;
}

std::string at_line(std::size_t line)
{
    return "line " + std::to_string(line) + ": ";
}

ShotId parse_shot(std::string_view video, std::string_view index, std::size_t line)
{
    std::uint32_t shot_index{};
    auto [ptr, ec] = std::from_chars(index.data(), index.data() + index.size(), shot_index);
    if (video.empty() || index.empty() || ec != std::errc{} ||
        ptr != index.data() + index.size()) {
        throw Error(ErrorKind::Parse, at_line(line) + "invalid shot reference");
    }
    return ShotId{std::string(video), shot_index};
}

template <typename Fn>
void for_each_record(std::istream& in, std::size_t fields, Fn&& fn)
{
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view text = raw;
        if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
        if (text.empty() || text.front() == '#') continue;
        auto f = split_tabs(text);
        if (f.size() != fields) {
            throw Error(ErrorKind::Parse, at_line(line) + "expected " + std::to_string(fields) +
                                              " fields, got " + std::to_string(f.size()));
        }
        if (f[0].empty()) throw Error(ErrorKind::Parse, at_line(line) + "empty query id");
        fn(f, line);
    }
}

}  // namespace

std::map<std::string, RelevanceJudgments> parse_judgments(std::istream& in)
{
    std::map<std::string, RelevanceJudgments> out;
    for_each_record(in, 3, [&](const auto& f, std::size_t line) {
        auto& j = out[std::string(f[0])];
        j.query_id = std::string(f[0]);
        j.relevant.insert(parse_shot(f[1], f[2], line));
    });
    return out;
}

std::map<std::string, RelevanceJudgments> load_judgments(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return parse_judgments(in);
}

std::map<std::string, RankedResult> parse_run(std::istream& in)
{
    std::map<std::string, RankedResult> out;
    std::map<std::string, std::set<ShotId>> seen;
    for_each_record(in, 4, [&](const auto& f, std::size_t line) {
        const std::string query(f[0]);
        ShotId shot = parse_shot(f[1], f[2], line);
        double score{};
        auto [ptr, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), score);
        if (f[3].empty() || ec != std::errc{} || ptr != f[3].data() + f[3].size() ||
            !std::isfinite(score)) {
            throw Error(ErrorKind::Parse, at_line(line) + "invalid score");
        }
        auto& ranking = out[query];
        if (!ranking.entries.empty() && score > ranking.entries.back().score) {
            throw Error(ErrorKind::Validation, at_line(line) + "scores increase within query " +
                                                   query);
        }
        if (!seen[query].insert(shot).second) {
            throw Error(ErrorKind::Duplicate, at_line(line) + "shot " + shot.str() +
                                                  " ranked twice for query " + query);
        }
        ranking.entries.push_back(RankedEntry{std::move(shot), score});
    });
    return out;
}

std::map<std::string, RankedResult> load_run(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return parse_run(in);
}

std::vector<EvalQuery> join_run(const std::map<std::string, RankedResult>& run,
                                const std::map<std::string, RelevanceJudgments>& judgments)
{
    std::vector<EvalQuery> out;
    for (const auto& [id, j] : judgments) {
        auto it = run.find(id);
        out.push_back(EvalQuery{id, it == run.end() ? RankedResult{} : it->second, j});
    }
    return out;
}

void write_report_table(std::ostream& out, std::span<const EvalReport> reports)
{
    if (reports.empty()) return;
    std::size_t width = 8;
    for (const auto& [id, ap] : reports.front().per_query) width = std::max(width, id.size());
    const auto flags = out.flags();
    out << std::left << std::setw(static_cast<int>(width)) << "query";
    for (const auto& r : reports) out << "  " << std::right << std::setw(8) << ("AP@" + std::to_string(r.cutoff));
    out << '\n';
    for (const auto& [id, ap] : reports.front().per_query) {
        out << std::left << std::setw(static_cast<int>(width)) << id;
        for (const auto& r : reports) {
            out << "  " << std::right << std::setw(8) << std::fixed << std::setprecision(4)
                << r.per_query.at(id);
        }
        out << '\n';
    }
    out << std::left << std::setw(static_cast<int>(width)) << "mAP";
    for (const auto& r : reports) {
        out << "  " << std::right << std::setw(8) << std::fixed << std::setprecision(4)
            << r.mean_ap;
    }
    out << '\n';
    out.flags(flags);
}

void write_report_jsonl(std::ostream& out, std::span<const EvalReport> reports)
{
    for (const auto& r : reports) {
        for (const auto& [id, ap] : r.per_query) {
            out << nlohmann::json{{"query_id", id}, {"cutoff", r.cutoff}, {"ap", ap}}.dump()
                << '\n';
        }
        out << nlohmann::json{{"cutoff", r.cutoff},
                              {"mean_ap", r.mean_ap},
                              {"queries", r.per_query.size()}}
                   .dump()
            << '\n';
    }
}

}  // namespace shotsearch
