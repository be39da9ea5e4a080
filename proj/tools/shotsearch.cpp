// shotsearch: ingest, build, serve, query, eval and bench over a shot archive.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "shotsearch/bench.hpp"
#include "shotsearch/bundle.hpp"
#include "shotsearch/eval.hpp"
#include "shotsearch/service.hpp"

namespace fs = std::filesystem;
using namespace shotsearch;

namespace {

// Exit codes per failure class.
int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Io: return 3;
    case ErrorKind::Parse:
    case ErrorKind::Format: return 4;
    case ErrorKind::Validation:
    case ErrorKind::Duplicate:
    case ErrorKind::OutOfRange:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::WidthMismatch: return 5;
    case ErrorKind::UnknownShot:
    case ErrorKind::UnknownKeyframe:
    case ErrorKind::UnknownLabel: return 6;
    case ErrorKind::ChecksumMismatch: return 7;
    default: return 2;
    }
}

void print_ranking(const RankedResult& result, std::size_t offset)
{
    std::cout << std::fixed << std::setprecision(6);
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        std::cout << offset + i + 1 << ' ' << result.entries[i].shot.str() << ' '
                  << result.entries[i].score << '\n';
    }
}

std::vector<double> parse_vector(const std::string& text)
{
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Parse, "invalid vector component '" + item + "'");
        }
    }
    return values;
}

double elapsed_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Shot-level video retrieval: similarity, concept, person and text search"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate raw inputs and write a bundle directory");
    IngestInputs inputs;
    std::string manifest, annotations, text_file, out_dir;
    std::string sem_codes, sem_features, low_codes, low_features;
    std::uint64_t sem_seed = 42, low_seed = 43;
    std::size_t dimension = HyperplaneEncoder::kDefaultDimension;
    ingest->add_option("--manifest", manifest, "Shot manifest (TSV)")->required();
    ingest->add_option("--annotations", annotations, "Concept/person annotations (TSV)");
    ingest->add_option("--text", text_file, "Recognized text (TSV)");
    ingest->add_option("--codes-semantic", sem_codes, "Semantic code file (SHGC)");
    ingest->add_option("--features-semantic", sem_features, "Semantic feature vectors (TSV)");
    ingest->add_option("--codes-low-level", low_codes, "Low-level code file (SHGC)");
    ingest->add_option("--features-low-level", low_features, "Low-level feature vectors (TSV)");
    ingest->add_option("--semantic-seed", sem_seed, "Encoder seed for semantic features");
    ingest->add_option("--low-level-seed", low_seed, "Encoder seed for low-level features");
    ingest->add_option("--dim", dimension, "Feature dimension");
    ingest->add_option("--out", out_dir, "Bundle directory")->required();

    // build
    auto* build = app.add_subcommand("build", "Build VP-tree snapshots for a bundle");
    std::string bundle_dir;
    std::uint64_t tree_seed = 1;
    build->add_option("--bundle", bundle_dir, "Bundle directory")->required();
    build->add_option("--seed", tree_seed, "Vantage selection seed");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API over a bundle");
    std::string bind = "127.0.0.1:8080";
    std::string thumbnails;
    std::size_t shortlist = kDefaultShortlist;
    serve_cmd->add_option("--bundle", bundle_dir, "Bundle directory")->required();
    serve_cmd->add_option("--bind", bind, "host:port");
    serve_cmd->add_option("--thumbnails", thumbnails, "Thumbnail directory");
    serve_cmd->add_option("--shortlist", shortlist, "Coarse shortlist size");

    // query
    auto* query = app.add_subcommand("query", "Run one query against a bundle");
    query->require_subcommand(1);
    std::size_t k = kDefaultResultCount, offset = 0;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--bundle", bundle_dir, "Bundle directory")->required();
        sub->add_option("--k", k, "Number of results");
        sub->add_option("--offset", offset, "Results to skip");
    };
    auto* q_similar = query->add_subcommand("similar", "Similarity search");
    std::string shot_ref, vector_text;
    int position = 0;
    double alpha = 1.0;
    common(q_similar);
    q_similar->add_option("--shot", shot_ref, "Query shot as video_id#shot_index");
    q_similar->add_option("--position", position, "Keyframe position 0-4");
    q_similar->add_option("--vector", vector_text, "Comma-separated feature vector");
    q_similar->add_option("--alpha", alpha, "Semantic weight in [0,1]");
    q_similar->add_option("--shortlist", shortlist, "Coarse shortlist size");
    std::string label;
    auto* q_concept = query->add_subcommand("concept", "Concept search");
    common(q_concept);
    q_concept->add_option("--label", label, "Concept label")->required();
    auto* q_person = query->add_subcommand("person", "Person search");
    common(q_person);
    q_person->add_option("--label", label, "Person name")->required();
    auto* q_text = query->add_subcommand("text", "Recognized-text search");
    std::string q;
    common(q_text);
    q_text->add_option("--q", q, "Query text")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "Average precision of a run against judgments");
    std::string run_file, judgments_file, jsonl_file;
    std::vector<std::size_t> cutoffs;
    eval->add_option("--run", run_file, "Run TSV")->required();
    eval->add_option("--judgments", judgments_file, "Judgments TSV")->required();
    eval->add_option("--n", cutoffs, "Cutoff N (repeatable)");
    eval->add_option("--jsonl", jsonl_file, "Also write line-delimited records here");

    // bench
    auto* bench = app.add_subcommand("bench", "Similarity query latency");
    std::size_t synthetic = 0;
    BenchConfig bench_config;
    double bound = 2.0;
    bench->add_option("--synthetic", synthetic, "Synthesize this many keyframe codes");
    bench->add_option("--bundle", bundle_dir, "Benchmark a bundle's codes instead");
    bench->add_option("--queries", bench_config.queries, "Number of queries");
    bench->add_option("--seed", bench_config.seed, "Query and data seed");
    bench->add_option("--shortlist", bench_config.shortlist_size, "Coarse shortlist size");
    bench->add_option("--k", bench_config.k_shots, "Shots per query");
    bench->add_option("--bound", bound, "Latency bound in seconds for the verdict line");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            inputs.manifest = manifest;
            if (!annotations.empty()) inputs.annotations = annotations;
            if (!text_file.empty()) inputs.text = text_file;
            if (!sem_codes.empty()) inputs.semantic.codes = sem_codes;
            if (!sem_features.empty()) inputs.semantic.features = sem_features;
            inputs.semantic.encoder = EncoderInfo{sem_seed, dimension};
            if (!low_codes.empty() || !low_features.empty()) {
                SpaceInput low;
                if (!low_codes.empty()) low.codes = low_codes;
                if (!low_features.empty()) low.features = low_features;
                low.encoder = EncoderInfo{low_seed, dimension};
                inputs.low_level = low;
            }
            auto m = ingest_bundle(inputs, out_dir);
            std::cout << "ingested " << m.shots << " shots, " << m.keyframes << " keyframes, "
                      << m.annotations << " annotations, " << m.text_occurrences
                      << " text occurrences into " << out_dir << '\n';
            return 0;
        }
        if (build->parsed()) {
            const auto start = std::chrono::steady_clock::now();
            auto m = build_bundle(bundle_dir, tree_seed);
            std::cout << "built indexes for " << (m.semantic ? m.semantic->records : 0)
                      << " semantic and " << (m.low_level ? m.low_level->records : 0)
                      << " low-level keyframes in " << elapsed_since(start) << " s\n";
            return 0;
        }
        if (serve_cmd->parsed()) {
            auto colon = bind.rfind(':');
            if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--bind needs host:port");
            const std::string host = bind.substr(0, colon);
            const int port = std::stoi(bind.substr(colon + 1));
            auto bundle = load_bundle(bundle_dir);
            ServiceOptions options;
            if (!thumbnails.empty()) options.thumbnail_dir = thumbnails;
            options.shortlist_size = shortlist;
            HttpServer server(bundle, options);
            const int bound_port = server.bind(host, port);
            std::cerr << "serving " << bundle_dir << " on " << host << ':' << bound_port << '\n';
            server.listen();
            return 0;
        }
        if (query->parsed()) {
            auto bundle = load_bundle(bundle_dir);
            RankedResult result;
            if (q_similar->parsed()) {
                if (!bundle.similarity) throw Error(ErrorKind::InvalidArgument, "bundle has no codes");
                if (shot_ref.empty() == vector_text.empty()) {
                    throw Error(ErrorKind::InvalidArgument, "give exactly one of --shot or --vector");
                }
                result = shot_ref.empty()
                             ? query_by_vector(*bundle.similarity, bundle.encoders(),
                                               FeatureVector{parse_vector(vector_text)}, alpha,
                                               k + offset, shortlist)
                             : query_by_shot(*bundle.similarity, ShotId::parse(shot_ref), position,
                                             alpha, k + offset, shortlist);
                result = page(result, offset, k);
            } else if (q_concept->parsed()) {
                result = bundle.annotations.search(label, AnnotationKind::Concept, k, offset);
            } else if (q_person->parsed()) {
                result = bundle.annotations.search(label, AnnotationKind::Person, k, offset);
            } else {
                result = bundle.text.search(q, k, offset);
            }
            print_ranking(result, offset);
            return 0;
        }
        if (eval->parsed()) {
            if (cutoffs.empty()) cutoffs = {100};
            auto run = load_run(run_file);
            auto judgments = load_judgments(judgments_file);
            auto reports = evaluate_run(join_run(run, judgments), cutoffs);
            write_report_table(std::cout, reports);
            if (!jsonl_file.empty()) {
                std::ofstream out(jsonl_file);
                if (!out) throw Error(ErrorKind::Io, "cannot write " + jsonl_file);
                write_report_jsonl(out, reports);
            }
            return 0;
        }
        if (bench->parsed()) {
            if ((synthetic == 0) == bundle_dir.empty()) {
                throw Error(ErrorKind::InvalidArgument, "give exactly one of --synthetic or --bundle");
            }
            auto start = std::chrono::steady_clock::now();
            std::optional<SimilarityIndex> index;
            std::optional<ArchiveBundle> bundle;
            if (synthetic) {
                auto store = synthesize_store(synthetic, bench_config.seed);
                std::cout << "synthesized " << store.size() << " keyframe codes in "
                          << elapsed_since(start) << " s\n";
                start = std::chrono::steady_clock::now();
                auto tree = VpTree::build(store, bench_config.seed);
                std::cout << "built VP-tree in " << elapsed_since(start) << " s\n";
                index.emplace(SpaceIndex{std::move(store), std::move(tree)});
            } else {
                bundle.emplace(load_bundle(bundle_dir));
                if (!bundle->similarity) throw Error(ErrorKind::InvalidArgument, "bundle has no codes");
                std::cout << "loaded bundle in " << elapsed_since(start) << " s\n";
            }
            const SimilarityIndex& idx = index ? *index : *bundle->similarity;
            auto report = run_similarity_bench(idx, bench_config);
            std::cout << std::fixed << std::setprecision(4) << "queries " << report.seconds.size()
                      << " corpus " << idx.keyframes().size() << " shortlist "
                      << bench_config.shortlist_size << " k " << bench_config.k_shots << '\n'
                      << "latency_s p50 " << report.p50 << " p95 " << report.p95 << " p99 "
                      << report.p99 << " max " << report.max << '\n'
                      << (report.max < bound ? "PASS" : "FAIL") << " every query under "
                      << bound << " s\n";
            return report.max < bound ? 0 : 1;
        }
    } catch (const Error& e) {
        std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
