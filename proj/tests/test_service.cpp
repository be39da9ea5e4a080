#include <doctest.h>

#include <sstream>
#include <thread>

#include <httplib.h>

#include "fixtures.hpp"
#include "shotsearch/bundle.hpp"
#include "shotsearch/service.hpp"

using namespace shotsearch;
using nlohmann::json;

namespace {

constexpr std::size_t kDim = 8;

/// Writes raw inputs for a 12-shot archive with feature vectors in both spaces.
IngestInputs write_inputs(const fixtures::TempDir& dir)
{
    std::ostringstream manifest, features_sem, features_low, annotations, text;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal;
    for (std::uint32_t s = 0; s < 12; ++s) {
        const std::string video = s < 6 ? "ak_1978" : "ak_1989";
        const std::uint32_t index = s % 6;
        manifest << video << '\t' << index << '\t' << s * 100 << '\t' << s * 100 + 80 << '\n';
        for (int p = 0; p < 5; ++p) {
            for (auto* out : {&features_sem, &features_low}) {
                *out << video << '\t' << index << '\t' << p << '\t';
                for (std::size_t d = 0; d < kDim; ++d) *out << (d ? "," : "") << normal(rng);
                *out << '\n';
            }
        }
        annotations << video << '\t' << index << "\tconcept\tapplause\t" << (s + 1) / 13.0 << '\n';
        if (s % 3 == 0) annotations << video << '\t' << index << "\tperson\tErich Honecker\t0.9\n";
    }
    text << "ak_1978\t1\t105\tPlanerfüllung\n"
         << "ak_1989\t2\t815\tRauchen verboten\n"
         << "ak_1989\t3\t910\tplanerfülung\n";

    IngestInputs in;
    in.manifest = dir.write("in_manifest.tsv", manifest.str());
    in.annotations = dir.write("in_annotations.tsv", annotations.str());
    in.text = dir.write("in_text.tsv", text.str());
    in.semantic.features = dir.write("in_sem.tsv", features_sem.str());
    in.semantic.encoder = {42, kDim};
    SpaceInput low;
    low.features = dir.write("in_low.tsv", features_low.str());
    low.encoder = {43, kDim};
    in.low_level = low;
    return in;
}

ApiResponse get(const SearchService& s, const std::string& path,
                std::map<std::string, std::string> params = {})
{
    return s.handle({"GET", path, std::move(params), ""});
}

ApiResponse post(const SearchService& s, const std::string& path, const json& body)
{
    return s.handle({"POST", path, {}, body.dump()});
}

std::vector<std::pair<std::string, double>> results_of(const json& j)
{
    std::vector<std::pair<std::string, double>> out;
    for (const auto& r : j.at("results")) out.emplace_back(r.at("shot"), r.at("score"));
    return out;
}

std::vector<std::pair<std::string, double>> results_of(const RankedResult& r)
{
    std::vector<std::pair<std::string, double>> out;
    for (const auto& e : r.entries) out.emplace_back(e.shot.str(), e.score);
    return out;
}

struct Archive {
    fixtures::TempDir dir;
    std::filesystem::path bundle_dir = dir / "bundle";
    ArchiveBundle bundle;

    Archive()
    {
        ingest_bundle(write_inputs(dir), bundle_dir);
        build_bundle(bundle_dir, 5);
        bundle = load_bundle(bundle_dir);
    }
};

}  // namespace

TEST_CASE("bundle ingest, build and load")
{
    Archive a;
    const auto& m = a.bundle.metadata;
    CHECK(m.shots == 12);
    CHECK(m.keyframes == 60);
    CHECK(m.annotations == 16);
    CHECK(m.text_occurrences == 4);
    CHECK(m.tree_seed == 5u);
    REQUIRE(m.semantic.has_value());
    CHECK(m.semantic->encoder->seed == 42);
    CHECK(std::filesystem::exists(a.bundle_dir / bundle_files::tree(CodeSpace::LowLevel)));
    REQUIRE(a.bundle.similarity.has_value());
    CHECK(a.bundle.similarity->semantic().tree.seed() == 5);

    SUBCASE("reload gives identical query behaviour")
    {
        auto again = load_bundle(a.bundle_dir);
        CHECK(again.similarity->semantic().tree == a.bundle.similarity->semantic().tree);
        CHECK(query_by_shot(*again.similarity, {"ak_1989", 2}, 3, 0.4, 20) ==
              query_by_shot(*a.bundle.similarity, {"ak_1989", 2}, 3, 0.4, 20));
    }
    SUBCASE("a modified file is a checksum mismatch")
    {
        {
            std::ofstream out(a.bundle_dir / bundle_files::kText, std::ios::app);
            out << "ak_1978\t0\t1\textra\n";
        }
        try {
            load_bundle(a.bundle_dir);
            FAIL("expected checksum mismatch");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ChecksumMismatch);
            CHECK(http_status(e.kind()) == 409);
        }
    }
    SUBCASE("a tampered tree snapshot is rejected")
    {
        const auto path = a.bundle_dir / bundle_files::tree(CodeSpace::Semantic);
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        f.put('\x7f');
        f.close();
        try {
            load_bundle(a.bundle_dir);
            FAIL("expected checksum mismatch");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ChecksumMismatch);
        }
    }
    SUBCASE("without snapshots the trees are rebuilt")
    {
        std::filesystem::remove(a.bundle_dir / bundle_files::tree(CodeSpace::Semantic));
        std::filesystem::remove(a.bundle_dir / bundle_files::tree(CodeSpace::LowLevel));
        auto rebuilt = load_bundle(a.bundle_dir, 5);
        CHECK(rebuilt.similarity->semantic().tree == a.bundle.similarity->semantic().tree);
    }
    SUBCASE("ingest rejects inconsistent inputs")
    {
        auto inputs = write_inputs(a.dir);
        inputs.annotations = a.dir.write("bad_ann.tsv", "ghost\t0\tconcept\tx\t0.5\n");
        CHECK_THROWS_AS(ingest_bundle(inputs, a.dir / "other"), Error);
        inputs = write_inputs(a.dir);
        inputs.semantic.encoder.dimension = 4;
        CHECK_THROWS_AS(ingest_bundle(inputs, a.dir / "other2"), Error);
    }
}

TEST_CASE("HTTP API over a loaded bundle")
{
    Archive a;
    fixtures::TempDir thumbs;
    std::filesystem::create_directories(thumbs / "ak_1978" / "1");
    thumbs.write("ak_1978/1/2.jpg", "JPEGDATA");
    SearchService service(a.bundle, ServiceOptions{thumbs.path()});

    SUBCASE("shot record with five keyframes")
    {
        auto r = get(service, "/api/shots/ak_1978/1");
        REQUIRE(r.status == 200);
        auto j = r.json();
        CHECK(j["shot"] == "ak_1978#1");
        CHECK(j["start_frame"] == 100);
        CHECK(j["keyframes"].size() == 5);
        CHECK(j["keyframes"][4]["frame_number"] == 180);
        CHECK(j["keyframes"][2]["thumbnail"] == "/thumbnails/ak_1978/1/2.jpg");
        CHECK(get(service, "/api/shots/ak_1978/99").status == 404);
        CHECK(get(service, "/api/shots/nope/0").status == 404);
        CHECK(get(service, "/api/shots/ak_1978/x").status == 400);
    }
    SUBCASE("concept and person search equal the library call")
    {
        auto r = get(service, "/api/search/concept", {{"label", "applause"}, {"k", "5"}});
        REQUIRE(r.status == 200);
        auto j = r.json();
        CHECK(j["kind"] == "concept");
        CHECK(results_of(j) == results_of(a.bundle.annotations.search("applause", AnnotationKind::Concept, 5)));
        CHECK(j["results"][0]["rank"] == 1);
        CHECK(j["results"][0]["shot"] == "ak_1989#5");

        auto paged = get(service, "/api/search/concept", {{"label", "applause"}, {"k", "2"}, {"offset", "3"}}).json();
        CHECK(paged["results"][0]["rank"] == 4);
        CHECK(paged["results"][0]["shot"] == j["results"][3]["shot"]);

        auto person = get(service, "/api/search/person", {{"label", "Erich Honecker"}}).json();
        CHECK(person["results"].size() == 4);
        CHECK(get(service, "/api/search/person", {{"label", "applause"}}).status == 404);
        CHECK(get(service, "/api/search/concept", {}).status == 400);
        CHECK(get(service, "/api/search/concept", {{"label", "applause"}, {"k", "0"}}).status == 400);
        CHECK(get(service, "/api/search/concept", {{"label", "applause"}, {"k", "-3"}}).status == 400);
    }
    SUBCASE("text search")
    {
        auto j = get(service, "/api/search/text", {{"q", "planerfüllung"}, {"k", "10"}}).json();
        CHECK(results_of(j) == results_of(a.bundle.text.search("planerfüllung", 10)));
        REQUIRE(j["results"].size() == 2);
        CHECK(j["results"][0]["shot"] == "ak_1978#1");
        CHECK(j["results"][0]["score"] == 1.0);
        CHECK(get(service, "/api/search/text", {{"q", " "}}).status == 400);
    }
    SUBCASE("similarity search by shot and by vector")
    {
        auto r = post(service, "/api/search/similar", {{"shot", "ak_1989#2"}, {"alpha", 1.0}, {"k", 5}});
        REQUIRE(r.status == 200);
        auto j = r.json();
        CHECK(j["results"][0]["shot"] == "ak_1989#2");
        CHECK(j["results"][0]["score"] == 1.0);
        CHECK(results_of(j) == results_of(query_by_shot(*a.bundle.similarity, {"ak_1989", 2}, 0, 1.0, 5)));

        auto obj = post(service, "/api/search/similar",
                        {{"shot", {{"video_id", "ak_1989"}, {"shot_index", 2}}}, {"position", 3}, {"alpha", 0.3},
                         {"k", 4}, {"offset", 2}})
                       .json();
        auto direct = page(query_by_shot(*a.bundle.similarity, {"ak_1989", 2}, 3, 0.3, 6), 2, 4);
        CHECK(results_of(obj) == results_of(direct));
        CHECK(obj["results"][0]["rank"] == 3);

        std::vector<double> v(kDim, 0.25);
        auto vec = post(service, "/api/search/similar", {{"vector", v}, {"alpha", 0.5}, {"k", 3}}).json();
        CHECK(results_of(vec) ==
              results_of(query_by_vector(*a.bundle.similarity, a.bundle.encoders(), FeatureVector{v}, 0.5, 3)));

        CHECK(post(service, "/api/search/similar", {{"shot", "ak_1989#99"}}).status == 404);
        CHECK(post(service, "/api/search/similar", {{"shot", "ak_1989#2"}, {"position", 7}}).status == 404);
        CHECK(post(service, "/api/search/similar", {{"vector", {1.0, 2.0}}}).status == 400);
        CHECK(post(service, "/api/search/similar", {{"alpha", 1.0}}).status == 400);
        CHECK(post(service, "/api/search/similar", {{"shot", "ak_1989#2"}, {"vector", v}}).status == 400);
        CHECK(post(service, "/api/search/similar", {{"shot", "ak_1989#2"}, {"alpha", 2.0}}).status == 400);
        CHECK(post(service, "/api/search/similar", {{"shot", "ak_1989#2"}, {"k", "many"}}).status == 400);
        CHECK(service.handle({"POST", "/api/search/similar", {}, "{not json"}).status == 400);
    }
    SUBCASE("labels, health, thumbnails, unknown routes")
    {
        auto labels = get(service, "/api/labels", {{"kind", "person"}}).json();
        CHECK(labels["labels"] == json::array({"Erich Honecker"}));
        CHECK(get(service, "/api/labels", {{"kind", "object"}}).status == 400);

        auto health = get(service, "/api/health").json();
        CHECK(health["status"] == "ok");
        CHECK(health["shots"] == 12);
        CHECK(health["tree_seed"] == 5);
        CHECK(health["spaces"]["low_level"]["vector_queries"] == true);

        auto thumb = get(service, "/thumbnails/ak_1978/1/2.jpg");
        CHECK(thumb.content_type == "image/jpeg");
        CHECK(thumb.body == "JPEGDATA");
        auto missing = get(service, "/thumbnails/ak_1978/1/3.jpg");
        CHECK(missing.status == 200);
        CHECK(missing.content_type == "image/svg+xml");
        CHECK(get(service, "/thumbnails/../1/2.jpg").content_type == "image/svg+xml");

        CHECK(get(service, "/api/nothing").status == 404);
        CHECK(service.handle({"DELETE", "/api/health", {}, ""}).status == 404);
    }
    SUBCASE("responses are stable across service instances")
    {
        SearchService fresh(a.bundle);
        for (const char* q : {"planerfüllung", "rauchen", "verboten"}) {
            CHECK(get(fresh, "/api/search/text", {{"q", q}}).body == get(service, "/api/search/text", {{"q", q}}).body);
        }
    }
}

TEST_CASE("error kinds map to HTTP statuses")
{
    CHECK(http_status(ErrorKind::UnknownShot) == 404);
    CHECK(http_status(ErrorKind::UnknownLabel) == 404);
    CHECK(http_status(ErrorKind::UnknownKeyframe) == 404);
    CHECK(http_status(ErrorKind::InvalidArgument) == 400);
    CHECK(http_status(ErrorKind::Parse) == 400);
    CHECK(http_status(ErrorKind::DimensionMismatch) == 400);
    CHECK(http_status(ErrorKind::ChecksumMismatch) == 409);
    CHECK(http_status(ErrorKind::Io) == 500);
}

TEST_CASE("real HTTP round trip")
{
    Archive a;
    HttpServer server(a.bundle);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread loop([&] { server.listen(); });

    httplib::Client client("127.0.0.1", port);
    client.set_connection_timeout(5);
    httplib::Result health;
    for (int attempt = 0; attempt < 50 && !health; ++attempt) {
        health = client.Get("/api/health");
        if (!health) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    REQUIRE(health);
    CHECK(health->status == 200);

    auto concept_hits = client.Get("/api/search/concept?label=applause&k=3");
    REQUIRE(concept_hits);
    CHECK(json::parse(concept_hits->body)["results"].size() == 3);

    auto text = client.Get("/api/search/text?q=Planerf%C3%BCllung&k=10");
    REQUIRE(text);
    CHECK(json::parse(text->body)["results"][0]["shot"] == "ak_1978#1");

    auto similar = client.Post("/api/search/similar", R"({"shot": "ak_1978#4", "alpha": 1, "k": 3})",
                               "application/json");
    REQUIRE(similar);
    CHECK(json::parse(similar->body)["results"][0]["shot"] == "ak_1978#4");

    auto missing = client.Get("/api/search/concept?label=parade");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body)["error"] == "unknown_label");

    server.stop();
    loop.join();

    HttpServer second(a.bundle);
    CHECK_THROWS_AS(second.bind("256.0.0.1", 1), Error);
}
