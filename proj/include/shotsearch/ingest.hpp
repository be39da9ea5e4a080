#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "shotsearch/core.hpp"

namespace shotsearch {

/// Validated shot and keyframe tables, with lookup by identity.
class ShotTable {
public:
    ShotTable() = default;
    /// Throws Validation with the full report when the tables are inconsistent.
    ShotTable(std::vector<ShotRef> shots, std::vector<Keyframe> keyframes);

    const std::vector<ShotRef>& shots() const noexcept { return shots_; }
    const std::vector<Keyframe>& keyframes() const noexcept { return keyframes_; }

    const ShotRef* find(const ShotId& id) const;
    const Keyframe* find_keyframe(const ShotId& id, int position) const;
    bool contains(const ShotId& id) const { return find(id) != nullptr; }

private:
    std::vector<ShotRef> shots_;
    std::vector<Keyframe> keyframes_;
    std::map<ShotId, std::size_t> shot_index_;
    std::map<std::pair<ShotId, int>, std::size_t> keyframe_index_;
};

// Manifest: `video_id TAB shot_index TAB start_frame TAB end_frame`, or explicit
// keyframe lines `K TAB video_id TAB shot_index TAB position TAB frame_number`.
// Shots without explicit keyframe lines get derive_keyframes().
ShotTable parse_manifest(std::istream& in);
ShotTable load_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const ShotTable& table);

// Code file, little-endian:
//   "SHGC" u16 version=1, u8 space, u64 count,
//   count x { u32 video string offset, u32 shot_index, u8 position,
//             u64 code64, 4 x u64 code256 },
//   string table: { u32 byte length, UTF-8 bytes } addressed by offset from
//   the start of the table.
inline constexpr std::uint16_t kCodeFileVersion = 1;

std::vector<CodeRecord> parse_codes(std::span<const std::uint8_t> bytes, CodeSpace expected_space,
                                    const ShotTable& table);
std::vector<CodeRecord> load_codes(const std::filesystem::path& path, CodeSpace expected_space,
                                   const ShotTable& table);
/// Records must all carry `space`.
std::vector<std::uint8_t> serialize_codes(std::span<const CodeRecord> records, CodeSpace space);
void write_codes(const std::filesystem::path& path, std::span<const CodeRecord> records,
                 CodeSpace space);

// Annotations: `video_id TAB shot_index TAB kind TAB label TAB probability`.
std::vector<AnnotationEntry> parse_annotations(std::istream& in, const ShotTable& table);
std::vector<AnnotationEntry> load_annotations(const std::filesystem::path& path,
                                              const ShotTable& table);
void write_annotations(std::ostream& out, std::span<const AnnotationEntry> entries);

// Text: `video_id TAB shot_index TAB frame_number TAB text...`; the text is
// split on whitespace into one occurrence per token.
std::vector<TextOccurrence> parse_text(std::istream& in, const ShotTable& table);
std::vector<TextOccurrence> load_text(const std::filesystem::path& path, const ShotTable& table);
void write_text(std::ostream& out, std::span<const TextOccurrence> occurrences);

struct FeatureVector {
    std::vector<double> values;
};

/// Random-hyperplane sign encoder standing in for a learned hash.
///
/// Planes are drawn from std::mt19937_64 seeded with `seed`: first the 64 x D
/// matrix for the 64-bit code, then the 256 x D matrix for the 256-bit code,
/// both row-major. Each entry is one standard normal produced by Box-Muller
/// from two consecutive engine outputs x1, x2:
///   u1 = ((x1 >> 11) + 1) * 2^-53, u2 = (x2 >> 11) * 2^-53,
///   z  = sqrt(-2 ln u1) * cos(2 pi u2).
/// Bit b is 1 iff dot(plane_b, v) >= 0.
class HyperplaneEncoder {
public:
    static constexpr std::size_t kDefaultDimension = 128;

    HyperplaneEncoder(std::uint64_t seed, std::size_t dimension = kDefaultDimension);

    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t dimension() const noexcept { return dimension_; }
    std::span<const double> planes64() const noexcept { return planes64_; }
    std::span<const double> planes256() const noexcept { return planes256_; }

    /// Throws DimensionMismatch when v has the wrong dimension and
    /// InvalidArgument when any value is not finite.
    std::pair<Code64, Code256> encode(const FeatureVector& v) const;

private:
    std::uint64_t seed_;
    std::size_t dimension_;
    std::vector<double> planes64_;
    std::vector<double> planes256_;
};

// Features: `video_id TAB shot_index TAB position TAB v1,v2,...,vD`.
struct KeyframeFeature {
    ShotId shot;
    std::uint8_t position = 0;
    FeatureVector vector;
};

std::vector<KeyframeFeature> parse_features(std::istream& in, const ShotTable& table,
                                            std::size_t dimension);
std::vector<KeyframeFeature> load_features(const std::filesystem::path& path,
                                           const ShotTable& table, std::size_t dimension);
std::vector<CodeRecord> encode_features(const HyperplaneEncoder& encoder,
                                        std::span<const KeyframeFeature> features,
                                        CodeSpace space, const ShotTable& table);

}  // namespace shotsearch
