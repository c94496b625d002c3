#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unitscope/corpus.hpp"

namespace unitscope {

enum class ConceptKind { morpheme, word, phrase };

// A text span at one of six granularities: morpheme, word, or contiguous
// N-gram phrase with N in 2..5.
struct Concept {
    std::string text;
    ConceptKind kind = ConceptKind::word;
    int ngram = 1;  // 1 for morphemes and words, 2..5 for phrases

    // Tie-break order: text first, then morpheme < word < phrase(2) < ... < phrase(5).
    int kind_rank() const;
    std::string kind_label() const;  // "morpheme", "word", "phrase2".."phrase5"
    auto operator<=>(const Concept&) const = default;
};

Concept make_morpheme(std::string text);
Concept make_word(std::string text);
Concept make_phrase(const std::vector<std::string>& words);
std::optional<Concept> concept_from_label(const std::string& text, const std::string& label);

bool concept_order(const Concept& a, const Concept& b);  // (text, kind_rank)

// Optional word -> segmentation table (`word<TAB>seg1 seg2 ...` per line).
struct MorphemeLexicon {
    std::map<std::string, std::vector<std::string>> entries;  // case-folded keys
};

MorphemeLexicon load_morpheme_lexicon(const std::string& path);

// Lexicon entry when present, otherwise longest-suffix stripping over the
// built-in list {s, es, ed, ing, er, est, ly, ion}; the concatenation of the
// returned segments always equals the input word.
std::vector<std::string> segment_morphemes(const std::string& word,
                                           const MorphemeLexicon* lexicon = nullptr);

struct CandidateSet {
    int layer = 0;
    int unit = 0;
    std::vector<Concept> concepts;  // deduplicated, sorted by (text, kind_rank)
};

// Every word, every contiguous word N-gram with N <= max_n, and every
// morpheme of every word across the given sentences, deduplicated.
CandidateSet extract_candidates(const std::vector<std::string>& sentence_texts, int layer,
                                int unit, int max_n, const MorphemeLexicon* lexicon = nullptr);

struct ReplicatedSentence {
    Concept term;
    std::string text;
    std::vector<int> encoded;
};

// Concept tiled with single-space separators: the maximal whole number of
// copies whose joined length stays within target_chars, at least one copy.
ReplicatedSentence replicate(const Concept& term, int target_chars, const Alphabet& alphabet);

// Occurrence search in encoded space, where case folding and unknown mapping
// already happened. Words and phrases match at word boundaries (spaces or
// sentence edges); morphemes match as plain substrings.
struct EncodedConcept {
    Concept term;
    std::vector<int> needle;
    bool word_boundary = true;

    EncodedConcept(const Concept& c, const Alphabet& alphabet);
};

bool contains(const std::vector<int>& encoded, const EncodedConcept& needle, int space_index);
bool concept_in_sentence(const Sentence& sentence, const Concept& term,
                         const Alphabet& alphabet);

// Leftmost, non-overlapping match start positions.
std::vector<int> find_occurrences(const std::vector<int>& encoded, const EncodedConcept& needle,
                                  int space_index);

}  // namespace unitscope
