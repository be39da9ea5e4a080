#include "shotsearch/bundle.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

namespace shotsearch {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t file_checksum(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return fnv1a(bytes);
}

namespace bundle_files {
std::string codes(CodeSpace space)
{
    return "codes." + std::string(to_string(space)) + ".shgc";
}
std::string tree(CodeSpace space)
{
    return "tree." + std::string(to_string(space)) + ".shgt";
}
}  // namespace bundle_files

namespace {

std::string now_utc()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t unhex(const std::string& s)
{
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &used, 16);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size()) throw Error(ErrorKind::Format, "bad checksum '" + s + "'");
    return v;
}

json space_json(const SpaceMetadata& m)
{
    json j{{"records", m.records},
           {"file_checksum", hex(m.file_checksum)},
           {"store_checksum", hex(m.store_checksum)}};
    if (m.encoder) j["encoder"] = {{"seed", m.encoder->seed}, {"dimension", m.encoder->dimension}};
    if (m.tree_checksum) j["tree_checksum"] = hex(*m.tree_checksum);
    return j;
}

SpaceMetadata space_from_json(const json& j)
{
    SpaceMetadata m;
    m.records = j.at("records").get<std::size_t>();
    m.file_checksum = unhex(j.at("file_checksum").get<std::string>());
    m.store_checksum = unhex(j.at("store_checksum").get<std::string>());
    if (j.contains("encoder")) {
        m.encoder = EncoderInfo{j["encoder"].at("seed").get<std::uint64_t>(),
                                j["encoder"].at("dimension").get<std::size_t>()};
    }
    if (j.contains("tree_checksum")) m.tree_checksum = unhex(j["tree_checksum"].get<std::string>());
    return m;
}

template <typename Writer>
std::uint64_t write_text_file(const fs::path& path, Writer&& writer)
{
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
        writer(out);
    }
    return file_checksum(path);
}

std::vector<CodeRecord> space_records(const SpaceInput& input, CodeSpace space,
                                      const ShotTable& table, std::optional<EncoderInfo>& encoder)
{
    if (input.codes && input.features) {
        throw Error(ErrorKind::InvalidArgument, std::string(to_string(space)) +
                                                    ": give either a code file or features");
    }
    if (input.codes) return load_codes(*input.codes, space, table);
    HyperplaneEncoder enc(input.encoder.seed, input.encoder.dimension);
    auto features = load_features(*input.features, table, input.encoder.dimension);
    encoder = input.encoder;
    return encode_features(enc, features, space, table);
}

void verify(const fs::path& path, std::uint64_t expected)
{
    if (file_checksum(path) != expected) {
        throw Error(ErrorKind::ChecksumMismatch,
                    path.filename().string() + " does not match the bundle checksum");
    }
}

}  // namespace

void write_metadata(const fs::path& dir, const BundleMetadata& m)
{
    json j{{"format_version", m.format_version},
           {"manifest_checksum", hex(m.manifest_checksum)},
           {"annotations_checksum", hex(m.annotations_checksum)},
           {"text_checksum", hex(m.text_checksum)},
           {"counts",
            {{"shots", m.shots},
             {"keyframes", m.keyframes},
             {"annotations", m.annotations},
             {"text_occurrences", m.text_occurrences}}},
           {"ingested_at", m.ingested_at},
           {"built_at", m.built_at}};
    if (m.semantic) j["spaces"]["semantic"] = space_json(*m.semantic);
    if (m.low_level) j["spaces"]["low_level"] = space_json(*m.low_level);
    if (m.tree_seed) j["tree_seed"] = *m.tree_seed;
    std::ofstream out(dir / bundle_files::kMetadata);
    if (!out) throw Error(ErrorKind::Io, "cannot write bundle metadata in " + dir.string());
    out << j.dump(2) << '\n';
}

BundleMetadata read_metadata(const fs::path& dir)
{
    std::ifstream in(dir / bundle_files::kMetadata);
    if (!in) throw Error(ErrorKind::Io, "no " + std::string(bundle_files::kMetadata) + " in " + dir.string());
    try {
        json j = json::parse(in);
        BundleMetadata m;
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != 1) {
            throw Error(ErrorKind::Format, "unsupported bundle format " +
                                               std::to_string(m.format_version));
        }
        m.manifest_checksum = unhex(j.at("manifest_checksum").get<std::string>());
        m.annotations_checksum = unhex(j.at("annotations_checksum").get<std::string>());
        m.text_checksum = unhex(j.at("text_checksum").get<std::string>());
        const auto& c = j.at("counts");
        m.shots = c.at("shots").get<std::size_t>();
        m.keyframes = c.at("keyframes").get<std::size_t>();
        m.annotations = c.at("annotations").get<std::size_t>();
        m.text_occurrences = c.at("text_occurrences").get<std::size_t>();
        m.ingested_at = j.value("ingested_at", "");
        m.built_at = j.value("built_at", "");
        if (j.contains("spaces")) {
            if (j["spaces"].contains("semantic")) m.semantic = space_from_json(j["spaces"]["semantic"]);
            if (j["spaces"].contains("low_level")) m.low_level = space_from_json(j["spaces"]["low_level"]);
        }
        if (j.contains("tree_seed")) m.tree_seed = j["tree_seed"].get<std::uint64_t>();
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Format, std::string("malformed bundle metadata: ") + e.what());
    }
}

BundleMetadata ingest_bundle(const IngestInputs& inputs, const fs::path& out_dir)
{
    fs::create_directories(out_dir);
    BundleMetadata m;
    m.ingested_at = now_utc();

    ShotTable table = load_manifest(inputs.manifest);
    m.shots = table.shots().size();
    m.keyframes = table.keyframes().size();
    m.manifest_checksum = write_text_file(out_dir / bundle_files::kManifest,
                                          [&](std::ostream& os) { write_manifest(os, table); });

    std::vector<AnnotationEntry> annotations;
    if (inputs.annotations) annotations = load_annotations(*inputs.annotations, table);
    m.annotations = annotations.size();
    m.annotations_checksum =
        write_text_file(out_dir / bundle_files::kAnnotations,
                        [&](std::ostream& os) { write_annotations(os, annotations); });

    std::vector<TextOccurrence> text;
    if (inputs.text) text = load_text(*inputs.text, table);
    m.text_occurrences = text.size();
    m.text_checksum = write_text_file(out_dir / bundle_files::kText,
                                      [&](std::ostream& os) { write_text(os, text); });

    std::optional<CodeStore> semantic_store;
    auto ingest_space = [&](const SpaceInput& input, CodeSpace space) -> std::optional<SpaceMetadata> {
        if (!input.codes && !input.features) return std::nullopt;
        SpaceMetadata sm;
        auto records = space_records(input, space, table, sm.encoder);
        auto store = CodeStore::from_records(records);
        if (space == CodeSpace::LowLevel) {
            if (!semantic_store ||
                !std::ranges::equal(semantic_store->keys(), store.keys()) ||
                !std::ranges::equal(semantic_store->videos(), store.videos())) {
                throw Error(ErrorKind::Validation,
                            "low-level codes must cover exactly the semantic keyframes");
            }
        }
        const auto canonical = store.to_records();
        const auto path = out_dir / bundle_files::codes(space);
        write_codes(path, canonical, space);
        sm.records = canonical.size();
        sm.file_checksum = file_checksum(path);
        sm.store_checksum = store.checksum();
        if (space == CodeSpace::Semantic) semantic_store = std::move(store);
        return sm;
    };
    m.semantic = ingest_space(inputs.semantic, CodeSpace::Semantic);
    if (inputs.low_level) m.low_level = ingest_space(*inputs.low_level, CodeSpace::LowLevel);

    for (auto space : {CodeSpace::Semantic, CodeSpace::LowLevel}) {
        fs::remove(out_dir / bundle_files::tree(space));
        if (!(space == CodeSpace::Semantic ? m.semantic : m.low_level)) {
            fs::remove(out_dir / bundle_files::codes(space));
        }
    }
    write_metadata(out_dir, m);
    return m;
}

BundleMetadata build_bundle(const fs::path& dir, std::uint64_t seed)
{
    BundleMetadata m = read_metadata(dir);
    verify(dir / bundle_files::kManifest, m.manifest_checksum);
    ShotTable table = load_manifest(dir / bundle_files::kManifest);
    for (auto space : {CodeSpace::Semantic, CodeSpace::LowLevel}) {
        auto& meta = space == CodeSpace::Semantic ? m.semantic : m.low_level;
        if (!meta) continue;
        const auto path = dir / bundle_files::codes(space);
        verify(path, meta->file_checksum);
        auto store = CodeStore::from_records(load_codes(path, space, table));
        if (store.empty()) continue;
        const auto tree_path = dir / bundle_files::tree(space);
        VpTree::build(store, seed).save(tree_path);
        meta->tree_checksum = file_checksum(tree_path);
    }
    m.tree_seed = seed;
    m.built_at = now_utc();
    write_metadata(dir, m);
    return m;
}

ArchiveBundle load_bundle(const fs::path& dir, std::uint64_t fallback_seed)
{
    ArchiveBundle bundle;
    bundle.metadata = read_metadata(dir);
    const auto& m = bundle.metadata;

    verify(dir / bundle_files::kManifest, m.manifest_checksum);
    verify(dir / bundle_files::kAnnotations, m.annotations_checksum);
    verify(dir / bundle_files::kText, m.text_checksum);

    bundle.shots = load_manifest(dir / bundle_files::kManifest);
    bundle.annotations = PostingIndex(load_annotations(dir / bundle_files::kAnnotations, bundle.shots));
    bundle.text = TextIndex(load_text(dir / bundle_files::kText, bundle.shots));

    auto load_space = [&](CodeSpace space,
                          const std::optional<SpaceMetadata>& meta) -> std::optional<SpaceIndex> {
        if (!meta) return std::nullopt;
        const auto path = dir / bundle_files::codes(space);
        verify(path, meta->file_checksum);
        auto store = CodeStore::from_records(load_codes(path, space, bundle.shots));
        if (store.checksum() != meta->store_checksum) {
            throw Error(ErrorKind::ChecksumMismatch, "code store checksum mismatch");
        }
        if (store.empty()) return std::nullopt;
        const auto tree_path = dir / bundle_files::tree(space);
        if (fs::exists(tree_path)) {
            if (!meta->tree_checksum) {
                throw Error(ErrorKind::ChecksumMismatch,
                            tree_path.filename().string() + " is not recorded in the bundle");
            }
            verify(tree_path, *meta->tree_checksum);
        }
        VpTree tree = fs::exists(tree_path) ? VpTree::load(tree_path, store)
                                            : VpTree::build(store, m.tree_seed.value_or(fallback_seed));
        return SpaceIndex{std::move(store), std::move(tree)};
    };
    auto semantic = load_space(CodeSpace::Semantic, m.semantic);
    auto low = load_space(CodeSpace::LowLevel, m.low_level);
    if (semantic) bundle.similarity.emplace(std::move(*semantic), std::move(low));

    if (m.semantic && m.semantic->encoder) {
        bundle.semantic_encoder.emplace(m.semantic->encoder->seed, m.semantic->encoder->dimension);
    }
    if (m.low_level && m.low_level->encoder) {
        bundle.low_level_encoder.emplace(m.low_level->encoder->seed, m.low_level->encoder->dimension);
    }
    return bundle;
}

}  // namespace shotsearch
