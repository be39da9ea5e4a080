#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shotsearch/core.hpp"

namespace shotsearch {

struct Posting {
    ShotId shot;
    double probability = 0.0;

    bool operator==(const Posting&) const = default;
};

/// Postings for one label, probability descending, ties by shot id ascending.
struct PostingList {
    std::string label;
    AnnotationKind kind = AnnotationKind::Concept;
    std::vector<Posting> postings;
};

/// Concept and person occurrence index.
class PostingIndex {
public:
    PostingIndex() = default;
    explicit PostingIndex(std::span<const AnnotationEntry> entries);

    /// Top-k postings from `offset`. Throws UnknownLabel for a label without
    /// postings of that kind.
    RankedResult search(std::string_view label, AnnotationKind kind, std::size_t k,
                        std::size_t offset = 0) const;

    const PostingList* find(std::string_view label, AnnotationKind kind) const;
    std::vector<std::string> labels(AnnotationKind kind) const;

private:
    std::map<std::pair<AnnotationKind, std::string>, PostingList> lists_;
};

/// Unit-cost edit distance over Unicode scalar values.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
/// UTF-8 convenience overload; throws Parse on invalid UTF-8.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// 1 - levenshtein / max(|a|, |b|); 1 for two empty strings.
double edit_similarity(std::u32string_view a, std::u32string_view b);

struct TextSearchConfig {
    double min_similarity = 0.6;
};

struct WordOccurrence {
    ShotId shot;
    std::uint64_t frame_number = 0;
};

/// Recognized-word vocabulary with fuzzy ranked lookup.
class TextIndex {
public:
    TextIndex() = default;
    explicit TextIndex(std::span<const TextOccurrence> occurrences, TextSearchConfig config = {});

    /// Query is normalized like ingested text and split into tokens. A shot
    /// scores the mean over tokens of its best word similarity per token;
    /// shots below the configured floor are dropped. Descending score, ties
    /// by shot id. Throws InvalidArgument for an empty query.
    RankedResult search(std::string_view query, std::size_t k, std::size_t offset = 0) const;

    std::size_t vocabulary_size() const noexcept { return words_.size(); }
    const std::vector<WordOccurrence>* occurrences(std::string_view word) const;
    const TextSearchConfig& config() const noexcept { return config_; }

private:
    struct Word {
        std::string utf8;
        std::u32string scalars;
        std::vector<std::uint32_t> shots;  // indexes into shots_, unique
        std::vector<WordOccurrence> occurrences;
    };

    TextSearchConfig config_;
    std::vector<Word> words_;
    std::map<std::string, std::size_t, std::less<>> by_word_;
    std::vector<ShotId> shots_;  // sorted
};

}  // namespace shotsearch
