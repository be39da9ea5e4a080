#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "shotsearch/ingest.hpp"
#include "shotsearch/lexical.hpp"
#include "shotsearch/similarity.hpp"

namespace shotsearch {

/// FNV-1a 64 over raw bytes.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes);
std::uint64_t file_checksum(const std::filesystem::path& path);

struct EncoderInfo {
    std::uint64_t seed = 0;
    std::size_t dimension = HyperplaneEncoder::kDefaultDimension;
};

struct SpaceMetadata {
    std::size_t records = 0;
    std::uint64_t file_checksum = 0;
    std::uint64_t store_checksum = 0;
    std::optional<EncoderInfo> encoder;  // set when codes came from feature vectors
    std::optional<std::uint64_t> tree_checksum;  // set by build
};

/// Contents of bundle.json.
struct BundleMetadata {
    int format_version = 1;
    std::uint64_t manifest_checksum = 0;
    std::uint64_t annotations_checksum = 0;
    std::uint64_t text_checksum = 0;
    std::size_t shots = 0;
    std::size_t keyframes = 0;
    std::size_t annotations = 0;
    std::size_t text_occurrences = 0;
    std::optional<SpaceMetadata> semantic;
    std::optional<SpaceMetadata> low_level;
    std::optional<std::uint64_t> tree_seed;  // set by build
    std::string ingested_at;
    std::string built_at;
};

/// Raw inputs for `ingest`. Each space takes either a code file or a
/// feature file plus encoder settings.
struct SpaceInput {
    std::optional<std::filesystem::path> codes;
    std::optional<std::filesystem::path> features;
    EncoderInfo encoder;
};

struct IngestInputs {
    std::filesystem::path manifest;
    std::optional<std::filesystem::path> annotations;
    std::optional<std::filesystem::path> text;
    SpaceInput semantic;
    std::optional<SpaceInput> low_level;
};

namespace bundle_files {
inline constexpr const char* kMetadata = "bundle.json";
inline constexpr const char* kManifest = "manifest.tsv";
inline constexpr const char* kAnnotations = "annotations.tsv";
inline constexpr const char* kText = "text.tsv";
std::string codes(CodeSpace space);
std::string tree(CodeSpace space);
}  // namespace bundle_files

/// Validates every input against the manifest and writes a bundle directory.
BundleMetadata ingest_bundle(const IngestInputs& inputs, const std::filesystem::path& out_dir);

/// Builds VP-trees for every code space and writes their snapshots.
BundleMetadata build_bundle(const std::filesystem::path& dir, std::uint64_t seed);

/// Immutable in-memory archive: everything the query layer needs.
struct ArchiveBundle {
    BundleMetadata metadata;
    ShotTable shots;
    std::optional<SimilarityIndex> similarity;
    PostingIndex annotations;
    TextIndex text;
    std::optional<HyperplaneEncoder> semantic_encoder;
    std::optional<HyperplaneEncoder> low_level_encoder;

    QueryEncoders encoders() const
    {
        return {semantic_encoder ? &*semantic_encoder : nullptr,
                low_level_encoder ? &*low_level_encoder : nullptr};
    }
};

/// Loads a bundle, verifying every file checksum (ChecksumMismatch on any
/// difference). Trees come from snapshots when present, otherwise are built
/// with `fallback_seed`.
ArchiveBundle load_bundle(const std::filesystem::path& dir, std::uint64_t fallback_seed = 1);

BundleMetadata read_metadata(const std::filesystem::path& dir);
void write_metadata(const std::filesystem::path& dir, const BundleMetadata& metadata);

}  // namespace shotsearch
