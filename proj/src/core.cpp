#include "shotsearch/core.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

namespace shotsearch {

std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Format: return "format";
    case ErrorKind::UnknownKeyframe: return "unknown_keyframe";
    case ErrorKind::UnknownShot: return "unknown_shot";
    case ErrorKind::UnknownLabel: return "unknown_label";
    case ErrorKind::OutOfRange: return "out_of_range";
    case ErrorKind::Duplicate: return "duplicate";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::WidthMismatch: return "width_mismatch";
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::ChecksumMismatch: return "checksum_mismatch";
    }
    return "unknown";
}

std::string ShotId::str() const
{
    return video_id + "#" + std::to_string(shot_index);
}

ShotId ShotId::parse(std::string_view text)
{
    auto hash = text.rfind('#');
    if (hash == std::string_view::npos || hash == 0 || hash + 1 == text.size()) {
        throw Error(ErrorKind::Parse, "malformed shot id '" + std::string(text) + "'");
    }
    ShotId id{std::string(text.substr(0, hash)), 0};
    auto digits = text.substr(hash + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id.shot_index);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
        throw Error(ErrorKind::Parse, "malformed shot index in '" + std::string(text) + "'");
    }
    return id;
}

std::array<Keyframe, kKeyframesPerShot> derive_keyframes(const ShotRef& shot)
{
    std::array<Keyframe, kKeyframesPerShot> frames;
    const std::uint64_t span = shot.end_frame - shot.start_frame;
    for (int p = 0; p < kKeyframesPerShot; ++p) {
        frames[p].shot = shot.id;
        frames[p].position = static_cast<std::uint8_t>(p);
        // span * p may overflow for absurd frame numbers; split the product.
        frames[p].frame_number = shot.start_frame + (span / 4) * p + ((span % 4) * p) / 4;
    }
    return frames;
}

BinaryCode BinaryCode::from_words(int width, std::span<const std::uint64_t> words)
{
    if (width != 64 && width != 256) {
        throw Error(ErrorKind::WidthMismatch,
                    "binary code width must be 64 or 256, got " + std::to_string(width));
    }
    if (words.size() != static_cast<std::size_t>(width / 64)) {
        throw Error(ErrorKind::WidthMismatch, "word count does not match code width");
    }
    std::array<std::uint64_t, 4> buf{};
    std::copy(words.begin(), words.end(), buf.begin());
    return BinaryCode(width, buf);
}

bool BinaryCode::bit(int index) const
{
    if (index < 0 || index >= width_) {
        throw Error(ErrorKind::OutOfRange, "bit index out of range");
    }
    return (words_[index / 64] >> (index % 64)) & 1U;
}

std::string_view to_string(CodeSpace space) noexcept
{
    return space == CodeSpace::Semantic ? "semantic" : "low_level";
}

CodeSpace parse_code_space(std::string_view text)
{
    if (text == "semantic") return CodeSpace::Semantic;
    if (text == "low_level") return CodeSpace::LowLevel;
    throw Error(ErrorKind::Parse, "unknown code space '" + std::string(text) + "'");
}

std::string_view to_string(AnnotationKind kind) noexcept
{
    return kind == AnnotationKind::Concept ? "concept" : "person";
}

AnnotationKind parse_annotation_kind(std::string_view text)
{
    if (text == "concept") return AnnotationKind::Concept;
    if (text == "person") return AnnotationKind::Person;
    throw Error(ErrorKind::Parse, "unknown annotation kind '" + std::string(text) + "'");
}

std::string_view to_string(QueryKind kind) noexcept
{
    switch (kind) {
    case QueryKind::Similarity: return "similarity";
    case QueryKind::Concept: return "concept";
    case QueryKind::Person: return "person";
    case QueryKind::Text: return "text";
    }
    return "unknown";
}

bool is_well_formed(const RankedResult& result)
{
    std::set<ShotId> seen;
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        if (i > 0 && result.entries[i].score > result.entries[i - 1].score) return false;
        if (!seen.insert(result.entries[i].shot).second) return false;
    }
    return true;
}

RankedResult page(const RankedResult& result, std::size_t offset, std::size_t limit)
{
    RankedResult out{result.kind, {}};
    if (offset >= result.entries.size()) return out;
    auto first = result.entries.begin() + static_cast<std::ptrdiff_t>(offset);
    auto count = std::min(limit, result.entries.size() - offset);
    out.entries.assign(first, first + static_cast<std::ptrdiff_t>(count));
    return out;
}

std::string ValidationReport::joined() const
{
    std::ostringstream os;
    for (std::size_t i = 0; i < issues.size(); ++i) {
        if (i) os << "; ";
        os << issues[i];
    }
    return os.str();
}

ValidationReport validate_shot_table(std::span<const ShotRef> shots,
                                     std::span<const Keyframe> keyframes)
{
    ValidationReport report;
    std::map<ShotId, const ShotRef*> by_id;
    for (const auto& shot : shots) {
        if (shot.start_frame > shot.end_frame) {
            report.issues.push_back("shot " + shot.id.str() + ": start_frame " +
                                    std::to_string(shot.start_frame) + " > end_frame " +
                                    std::to_string(shot.end_frame));
        }
        if (!by_id.emplace(shot.id, &shot).second) {
            report.issues.push_back("duplicate shot id " + shot.id.str());
        }
    }

    std::map<ShotId, std::vector<const Keyframe*>> frames_of;
    for (const auto& kf : keyframes) {
        if (!by_id.contains(kf.shot)) {
            report.issues.push_back("keyframe references unknown shot " + kf.shot.str());
            continue;
        }
        frames_of[kf.shot].push_back(&kf);
    }

    for (const auto& [id, shot] : by_id) {
        auto it = frames_of.find(id);
        std::size_t count = it == frames_of.end() ? 0 : it->second.size();
        if (count != kKeyframesPerShot) {
            report.issues.push_back("shot " + id.str() + ": keyframe count " +
                                    std::to_string(count) + " ≠ 5");
        }
        if (it == frames_of.end()) continue;

        std::array<const Keyframe*, kKeyframesPerShot> slot{};
        for (const Keyframe* kf : it->second) {
            if (kf->position >= kKeyframesPerShot) {
                report.issues.push_back("shot " + id.str() + ": keyframe position " +
                                        std::to_string(kf->position) + " out of range");
                continue;
            }
            if (slot[kf->position]) {
                report.issues.push_back("shot " + id.str() + ": duplicate keyframe position " +
                                        std::to_string(kf->position));
                continue;
            }
            slot[kf->position] = kf;
        }
        if (slot[0] && slot[0]->frame_number != shot->start_frame) {
            report.issues.push_back("shot " + id.str() +
                                    ": keyframe position 0 is not the start frame");
        }
        if (slot[4] && slot[4]->frame_number != shot->end_frame) {
            report.issues.push_back("shot " + id.str() +
                                    ": keyframe position 4 is not the end frame");
        }
        const Keyframe* prev = nullptr;
        for (const Keyframe* kf : slot) {
            if (!kf) continue;
            if (prev && kf->frame_number < prev->frame_number) {
                report.issues.push_back("shot " + id.str() +
                                        ": keyframe frame numbers decrease at position " +
                                        std::to_string(kf->position));
            }
            prev = kf;
        }
    }
    return report;
}

}  // namespace shotsearch
