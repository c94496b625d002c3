#include "unitscope/concepts.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "unitscope/text.hpp"

namespace unitscope {

int Concept::kind_rank() const {
    switch (kind) {
        case ConceptKind::morpheme: return 0;
        case ConceptKind::word: return 1;
        case ConceptKind::phrase: return ngram;
    }
    return 0;
}

std::string Concept::kind_label() const {
    switch (kind) {
        case ConceptKind::morpheme: return "morpheme";
        case ConceptKind::word: return "word";
        case ConceptKind::phrase: return "phrase" + std::to_string(ngram);
    }
    return "word";
}

Concept make_morpheme(std::string text) {
    if (text.empty()) throw std::invalid_argument("concept: empty morpheme");
    return Concept{std::move(text), ConceptKind::morpheme, 1};
}

Concept make_word(std::string text) {
    if (text.empty()) throw std::invalid_argument("concept: empty word");
    return Concept{std::move(text), ConceptKind::word, 1};
}

Concept make_phrase(const std::vector<std::string>& words) {
    if (words.size() < 2 || words.size() > 5) {
        throw std::invalid_argument("concept: phrase must have 2..5 words");
    }
    std::string text;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) text.push_back(' ');
        text += words[i];
    }
    return Concept{std::move(text), ConceptKind::phrase, static_cast<int>(words.size())};
}

std::optional<Concept> concept_from_label(const std::string& text, const std::string& label) {
    if (label == "morpheme") return Concept{text, ConceptKind::morpheme, 1};
    if (label == "word") return Concept{text, ConceptKind::word, 1};
    if (label.rfind("phrase", 0) == 0 && label.size() == 7 && label[6] >= '2' && label[6] <= '5') {
        return Concept{text, ConceptKind::phrase, label[6] - '0'};
    }
    return std::nullopt;
}

bool concept_order(const Concept& a, const Concept& b) {
    if (a.text != b.text) return a.text < b.text;
    return a.kind_rank() < b.kind_rank();
}

MorphemeLexicon load_morpheme_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open morpheme lexicon: " + path);
    MorphemeLexicon lex;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected `word<TAB>seg1 seg2 ...`");
        }
        const std::string word = fold_case(trim(line.substr(0, tab)));
        std::vector<std::string> segs = split_whitespace(line.substr(tab + 1));
        if (word.empty() || segs.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": empty word or segmentation");
        }
        for (std::string& s : segs) s = fold_case(s);
        lex.entries.emplace(word, std::move(segs));  // first occurrence wins
    }
    return lex;
}

namespace {

// Longest first, so "es" beats "s" and "est" beats "ed".
const std::vector<std::string>& builtin_suffixes() {
    static const std::vector<std::string> suffixes = {"ing", "est", "ion", "es",
                                                      "ed",  "er",  "ly",  "s"};
    return suffixes;
}

}  // namespace

std::vector<std::string> segment_morphemes(const std::string& word, const MorphemeLexicon* lexicon) {
    if (word.empty()) throw std::invalid_argument("segment_morphemes: empty word");
    if (word.find(' ') != std::string::npos || word.find('\t') != std::string::npos) {
        throw std::invalid_argument("segment_morphemes: word contains whitespace");
    }

    if (lexicon) {
        const auto it = lexicon->entries.find(fold_case(word));
        if (it != lexicon->entries.end()) return it->second;
    }

    const std::string folded = fold_case(word);
    for (const std::string& suffix : builtin_suffixes()) {
        if (folded.size() > suffix.size() &&
            folded.compare(folded.size() - suffix.size(), suffix.size(), suffix) == 0) {
            const std::size_t stem_len = word.size() - suffix.size();
            return {word.substr(0, stem_len), word.substr(stem_len)};
        }
    }
    return {word};
}

CandidateSet extract_candidates(const std::vector<std::string>& sentence_texts, int layer,
                                int unit, int max_n, const MorphemeLexicon* lexicon) {
    if (max_n < 1 || max_n > 5) throw std::invalid_argument("extract_candidates: max_n must be in 1..5");

    std::set<Concept, decltype(&concept_order)> seen(&concept_order);
    for (const std::string& text : sentence_texts) {
        const std::vector<std::string> tokens = split_whitespace(text);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            seen.insert(make_word(tokens[i]));
            for (const std::string& seg : segment_morphemes(tokens[i], lexicon)) {
                if (!seg.empty()) seen.insert(make_morpheme(seg));
            }
            for (int n = 2; n <= max_n; ++n) {
                if (i + static_cast<std::size_t>(n) > tokens.size()) break;
                seen.insert(make_phrase(
                    std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                             tokens.begin() + static_cast<std::ptrdiff_t>(i) + n)));
            }
        }
    }

    CandidateSet out;
    out.layer = layer;
    out.unit = unit;
    out.concepts.assign(seen.begin(), seen.end());
    return out;
}

ReplicatedSentence replicate(const Concept& term, int target_chars, const Alphabet& alphabet) {
    if (target_chars < 1) throw std::invalid_argument("replicate: target_chars must be >= 1");
    if (term.text.empty()) throw std::invalid_argument("replicate: empty concept");

    const std::size_t unit_len = utf8_length(term.text);
    // k copies joined by spaces occupy k*len + (k-1) characters
    std::size_t copies = 1;
    while (static_cast<long long>((copies + 1) * unit_len + copies) <=
           static_cast<long long>(target_chars)) {
        ++copies;
    }

    ReplicatedSentence out;
    out.term = term;
    for (std::size_t i = 0; i < copies; ++i) {
        if (i) out.text.push_back(' ');
        out.text += term.text;
    }
    out.encoded = alphabet.encode(out.text);
    return out;
}

EncodedConcept::EncodedConcept(const Concept& c, const Alphabet& alphabet)
    : term(c), needle(alphabet.encode(c.text)),
      word_boundary(c.kind != ConceptKind::morpheme) {}

namespace {

bool match_at(const std::vector<int>& haystack, const std::vector<int>& needle, std::size_t pos) {
    for (std::size_t k = 0; k < needle.size(); ++k) {
        if (haystack[pos + k] != needle[k]) return false;
    }
    return true;
}

bool boundary_ok(const std::vector<int>& haystack, std::size_t pos, std::size_t len,
                 int space_index) {
    const bool left = pos == 0 || haystack[pos - 1] == space_index;
    const bool right = pos + len == haystack.size() || haystack[pos + len] == space_index;
    return left && right;
}

}  // namespace

bool contains(const std::vector<int>& encoded, const EncodedConcept& needle, int space_index) {
    const std::size_t n = needle.needle.size();
    if (n == 0 || n > encoded.size()) return false;
    for (std::size_t pos = 0; pos + n <= encoded.size(); ++pos) {
        if (!match_at(encoded, needle.needle, pos)) continue;
        if (!needle.word_boundary || boundary_ok(encoded, pos, n, space_index)) return true;
    }
    return false;
}

bool concept_in_sentence(const Sentence& sentence, const Concept& term,
                         const Alphabet& alphabet) {
    const EncodedConcept needle(term, alphabet);
    return contains(sentence.encoded, needle, alphabet.index_of(' '));
}

std::vector<int> find_occurrences(const std::vector<int>& encoded, const EncodedConcept& needle,
                                  int space_index) {
    std::vector<int> starts;
    const std::size_t n = needle.needle.size();
    if (n == 0 || n > encoded.size()) return starts;
    std::size_t pos = 0;
    while (pos + n <= encoded.size()) {
        if (match_at(encoded, needle.needle, pos) &&
            (!needle.word_boundary || boundary_ok(encoded, pos, n, space_index))) {
            starts.push_back(static_cast<int>(pos));
            pos += n;  // leftmost-first, non-overlapping
        } else {
            ++pos;
        }
    }
    return starts;
}

}  // namespace unitscope
