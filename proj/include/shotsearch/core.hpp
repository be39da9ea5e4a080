#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shotsearch/error.hpp"

namespace shotsearch {

inline constexpr int kKeyframesPerShot = 5;

/// Archive-wide shot identity. Orders by video id (bytewise), then shot index.
struct ShotId {
    std::string video_id;
    std::uint32_t shot_index = 0;

    /// External rendering "video_id#shot_index".
    std::string str() const;
    static ShotId parse(std::string_view text);

    auto operator<=>(const ShotId&) const = default;
    bool operator==(const ShotId&) const = default;
};

struct ShotRef {
    ShotId id;
    std::uint64_t start_frame = 0;
    std::uint64_t end_frame = 0;

    bool operator==(const ShotRef&) const = default;
};

struct Keyframe {
    ShotId shot;
    std::uint8_t position = 0;
    std::uint64_t frame_number = 0;

    bool operator==(const Keyframe&) const = default;
};

/// The five keyframes of a shot: first, last, and the frames at 1/4, 1/2
/// and 3/4 of the span (rounded down).
std::array<Keyframe, kKeyframesPerShot> derive_keyframes(const ShotRef& shot);

struct Code64 {
    std::uint64_t bits = 0;
    bool operator==(const Code64&) const = default;
};

struct Code256 {
    std::array<std::uint64_t, 4> words{};  // words[0] holds bits 0..63
    bool operator==(const Code256&) const = default;
};

/// Width-tagged code, only 64 or 256 bits.
class BinaryCode {
public:
    BinaryCode(Code64 code) : width_(64), words_{code.bits, 0, 0, 0} {}
    BinaryCode(const Code256& code) : width_(256), words_(code.words) {}

    /// Throws WidthMismatch unless width is 64 or 256 and words fit it.
    static BinaryCode from_words(int width, std::span<const std::uint64_t> words);

    int width() const noexcept { return width_; }
    std::span<const std::uint64_t> words() const noexcept
    {
        return {words_.data(), static_cast<std::size_t>(width_ / 64)};
    }
    bool bit(int index) const;

    bool operator==(const BinaryCode&) const = default;

private:
    BinaryCode(int width, std::array<std::uint64_t, 4> words) : width_(width), words_(words) {}

    int width_;
    std::array<std::uint64_t, 4> words_;
};

enum class CodeSpace : std::uint8_t { Semantic = 0, LowLevel = 1 };

std::string_view to_string(CodeSpace space) noexcept;
CodeSpace parse_code_space(std::string_view text);

struct CodeRecord {
    Keyframe keyframe;
    CodeSpace space = CodeSpace::Semantic;
    Code64 code64;
    Code256 code256;

    bool operator==(const CodeRecord&) const = default;
};

enum class AnnotationKind : std::uint8_t { Concept, Person };

std::string_view to_string(AnnotationKind kind) noexcept;
AnnotationKind parse_annotation_kind(std::string_view text);

struct AnnotationEntry {
    ShotId shot;
    std::string label;
    AnnotationKind kind = AnnotationKind::Concept;
    double probability = 0.0;

    bool operator==(const AnnotationEntry&) const = default;
};

struct TextOccurrence {
    ShotId shot;
    std::uint64_t frame_number = 0;
    std::string word;  // NFC, case-folded, no whitespace

    bool operator==(const TextOccurrence&) const = default;
};

enum class QueryKind : std::uint8_t { Similarity, Concept, Person, Text };

std::string_view to_string(QueryKind kind) noexcept;

struct RankedEntry {
    ShotId shot;
    double score = 0.0;  // higher is better

    bool operator==(const RankedEntry&) const = default;
};

struct RankedResult {
    QueryKind kind = QueryKind::Similarity;
    std::vector<RankedEntry> entries;

    bool operator==(const RankedResult&) const = default;
};

/// True iff scores are non-increasing and no shot appears twice.
bool is_well_formed(const RankedResult& result);

/// Entries [offset, offset + limit) of a ranking.
RankedResult page(const RankedResult& result, std::size_t offset, std::size_t limit);

struct ValidationReport {
    std::vector<std::string> issues;

    bool ok() const noexcept { return issues.empty(); }
    std::string joined() const;
};

/// Checks every shot/keyframe invariant; an empty report means consistent.
ValidationReport validate_shot_table(std::span<const ShotRef> shots,
                                     std::span<const Keyframe> keyframes);

}  // namespace shotsearch
