#include "shotsearch/lexical.hpp"

#include <algorithm>
#include <numeric>

#include "shotsearch/text.hpp"

namespace shotsearch {

PostingIndex::PostingIndex(std::span<const AnnotationEntry> entries)
{
    for (const auto& e : entries) {
        auto& list = lists_[{e.kind, e.label}];
        list.label = e.label;
        list.kind = e.kind;
        list.postings.push_back(Posting{e.shot, e.probability});
    }
    for (auto& [key, list] : lists_) {
        std::sort(list.postings.begin(), list.postings.end(),
                  [](const Posting& a, const Posting& b) {
                      if (a.probability != b.probability) return a.probability > b.probability;
                      return a.shot < b.shot;
                  });
    }
}

const PostingList* PostingIndex::find(std::string_view label, AnnotationKind kind) const
{
    auto it = lists_.find({kind, std::string(label)});
    return it == lists_.end() ? nullptr : &it->second;
}

RankedResult PostingIndex::search(std::string_view label, AnnotationKind kind, std::size_t k,
                                  std::size_t offset) const
{
    const PostingList* list = find(label, kind);
    if (!list) {
        throw Error(ErrorKind::UnknownLabel,
                    "no such " + std::string(to_string(kind)) + " '" + std::string(label) + "'");
    }
    RankedResult result{kind == AnnotationKind::Concept ? QueryKind::Concept : QueryKind::Person,
                        {}};
    const auto& p = list->postings;
    for (std::size_t i = offset; i < p.size() && i - offset < k; ++i) {
        result.entries.push_back(RankedEntry{p[i].shot, p[i].probability});
    }
    return result;
}

std::vector<std::string> PostingIndex::labels(AnnotationKind kind) const
{
    std::vector<std::string> out;
    for (const auto& [key, list] : lists_) {
        if (key.first == kind) out.push_back(key.second);
    }
    return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b)
{
    if (a.size() < b.size()) std::swap(a, b);
    // Row over the shorter string.
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diagonal = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t above = row[j];
            const std::size_t substitute = diagonal + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({above + 1, row[j - 1] + 1, substitute});
            diagonal = above;
        }
    }
    return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b)
{
    return levenshtein(text::to_scalars(a), text::to_scalars(b));
}

double edit_similarity(std::u32string_view a, std::u32string_view b)
{
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

TextIndex::TextIndex(std::span<const TextOccurrence> occurrences, TextSearchConfig config)
    : config_(config)
{
    for (const auto& occ : occurrences) shots_.push_back(occ.shot);
    std::sort(shots_.begin(), shots_.end());
    shots_.erase(std::unique(shots_.begin(), shots_.end()), shots_.end());

    for (const auto& occ : occurrences) {
        if (occ.word.empty()) throw Error(ErrorKind::InvalidArgument, "empty indexed word");
        auto [it, inserted] = by_word_.emplace(occ.word, words_.size());
        if (inserted) {
            words_.push_back(Word{occ.word, text::to_scalars(occ.word), {}, {}});
        }
        Word& w = words_[it->second];
        w.occurrences.push_back(WordOccurrence{occ.shot, occ.frame_number});
        const auto shot = static_cast<std::uint32_t>(
            std::lower_bound(shots_.begin(), shots_.end(), occ.shot) - shots_.begin());
        w.shots.push_back(shot);
    }
    for (auto& w : words_) {
        std::sort(w.shots.begin(), w.shots.end());
        w.shots.erase(std::unique(w.shots.begin(), w.shots.end()), w.shots.end());
    }
}

const std::vector<WordOccurrence>* TextIndex::occurrences(std::string_view word) const
{
    auto it = by_word_.find(word);
    return it == by_word_.end() ? nullptr : &words_[it->second].occurrences;
}

RankedResult TextIndex::search(std::string_view query, std::size_t k, std::size_t offset) const
{
    auto tokens = text::tokenize(query);
    if (tokens.empty()) throw Error(ErrorKind::InvalidArgument, "empty text query");

    const std::size_t n_tokens = tokens.size();
    // best[shot * n_tokens + t]: best similarity of token t among the shot's words.
    std::vector<double> best(shots_.size() * n_tokens, -1.0);
    for (std::size_t t = 0; t < n_tokens; ++t) {
        const auto token = text::to_scalars(tokens[t]);
        for (const auto& w : words_) {
            const double sim = edit_similarity(token, w.scalars);
            for (auto s : w.shots) {
                double& slot = best[s * n_tokens + t];
                slot = std::max(slot, sim);
            }
        }
    }

    std::vector<std::pair<double, std::uint32_t>> scored;
    for (std::uint32_t s = 0; s < shots_.size(); ++s) {
        double sum = 0.0;
        for (std::size_t t = 0; t < n_tokens; ++t) sum += best[s * n_tokens + t];
        const double score = sum / static_cast<double>(n_tokens);
        if (score >= config_.min_similarity) scored.emplace_back(score, s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });

    RankedResult result{QueryKind::Text, {}};
    for (std::size_t i = offset; i < scored.size() && i - offset < k; ++i) {
        result.entries.push_back(RankedEntry{shots_[scored[i].second], scored[i].first});
    }
    return result;
}

}  // namespace shotsearch
