#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "test_util.hpp"
#include "unitscope/concepts.hpp"

using namespace unitscope;

namespace {

bool has_concept(const CandidateSet& set, const std::string& text, ConceptKind kind, int n = 1) {
    return std::any_of(set.concepts.begin(), set.concepts.end(), [&](const Concept& c) {
        return c.text == text && c.kind == kind && c.ngram == n;
    });
}

}  // namespace

TEST_CASE("candidates cover words, phrases and morphemes") {
    const CandidateSet set = extract_candidates({"John hit the balls"}, 0, 0, 4);
    CHECK(has_concept(set, "John", ConceptKind::word));
    CHECK(has_concept(set, "hit", ConceptKind::word));
    CHECK(has_concept(set, "the", ConceptKind::word));
    CHECK(has_concept(set, "balls", ConceptKind::word));
    CHECK(has_concept(set, "the balls", ConceptKind::phrase, 2));
    CHECK(has_concept(set, "hit the balls", ConceptKind::phrase, 3));
    CHECK(has_concept(set, "John hit the balls", ConceptKind::phrase, 4));
    CHECK(has_concept(set, "ball", ConceptKind::morpheme));
    CHECK(has_concept(set, "s", ConceptKind::morpheme));
}

TEST_CASE("duplicate sentences do not change the candidate set") {
    const CandidateSet once = extract_candidates({"John hit the balls"}, 0, 0, 4);
    const CandidateSet twice =
        extract_candidates({"John hit the balls", "John hit the balls"}, 0, 0, 4);
    CHECK(once.concepts == twice.concepts);
}

TEST_CASE("candidate extraction is order-insensitive") {
    const std::vector<std::string> a = {"red fish", "blue bird sings"};
    const std::vector<std::string> b = {"blue bird sings", "red fish"};
    CHECK(extract_candidates(a, 0, 0, 3).concepts == extract_candidates(b, 0, 0, 3).concepts);
}

TEST_CASE("every candidate text occurs in some input sentence") {
    const std::vector<std::string> texts = {"walking under tall trees", "the cat walked home"};
    const CandidateSet set = extract_candidates(texts, 0, 0, 5);
    for (const Concept& c : set.concepts) {
        if (c.kind == ConceptKind::morpheme) {
            const bool found = std::any_of(texts.begin(), texts.end(), [&](const std::string& t) {
                return t.find(c.text) != std::string::npos;
            });
            CHECK_MESSAGE(found, "morpheme '", c.text, "' not found");
        } else {
            const bool found = std::any_of(texts.begin(), texts.end(), [&](const std::string& t) {
                const std::size_t pos = t.find(c.text);
                if (pos == std::string::npos) return false;
                const bool left = pos == 0 || t[pos - 1] == ' ';
                const std::size_t end = pos + c.text.size();
                const bool right = end == t.size() || t[end] == ' ';
                return left && right;
            });
            CHECK_MESSAGE(found, "concept '", c.text, "' not word-aligned in any sentence");
        }
    }
}

TEST_CASE("max_n caps phrase length") {
    const CandidateSet set = extract_candidates({"a b c d e"}, 0, 0, 2);
    CHECK(has_concept(set, "a b", ConceptKind::phrase, 2));
    CHECK_FALSE(has_concept(set, "a b c", ConceptKind::phrase, 3));
}

TEST_CASE("suffix segmentation") {
    CHECK(segment_morphemes("balls") == std::vector<std::string>{"ball", "s"});
    CHECK(segment_morphemes("the") == std::vector<std::string>{"the"});
    CHECK(segment_morphemes("walking") == std::vector<std::string>{"walk", "ing"});
    CHECK(segment_morphemes("boxes") == std::vector<std::string>{"box", "es"});
    CHECK(segment_morphemes("greatest") == std::vector<std::string>{"great", "est"});
    // the suffix itself is not split (stem would be empty)
    CHECK(segment_morphemes("ing") == std::vector<std::string>{"ing"});
}

TEST_CASE("segmentation preserves concatenation") {
    for (const std::string word : {"running", "cats", "quickly", "information", "x", "Walking"}) {
        const std::vector<std::string> segs = segment_morphemes(word);
        std::string joined;
        for (const std::string& s : segs) joined += s;
        CHECK(joined == word);
    }
}

TEST_CASE("segmentation rejects whitespace") {
    CHECK_THROWS_AS(segment_morphemes("two words"), std::invalid_argument);
    CHECK_THROWS_AS(segment_morphemes(""), std::invalid_argument);
}

TEST_CASE("lexicon entries win over suffix rules") {
    testutil::TempDir tmp("lexicon");
    const std::string path = tmp.write("lex.tsv", "walking\twalk ing\nunbelievable\tun believe able\n");
    const MorphemeLexicon lex = load_morpheme_lexicon(path);
    CHECK(segment_morphemes("unbelievable", &lex) ==
          std::vector<std::string>{"un", "believe", "able"});
    CHECK(segment_morphemes("Walking", &lex) == std::vector<std::string>{"walk", "ing"});
    // not in the lexicon: falls back to the suffix list
    CHECK(segment_morphemes("jumps", &lex) == std::vector<std::string>{"jump", "s"});
}

TEST_CASE("replication fills the target length with whole copies") {
    const Alphabet alphabet;
    SUBCASE("paper example: `the ball` at target 26") {
        const ReplicatedSentence r = replicate(make_phrase({"the", "ball"}), 26, alphabet);
        CHECK(r.text == "the ball the ball the ball");
        CHECK(r.encoded.size() == 26);
    }
    SUBCASE("three copies of `a` fill 5 characters") {
        const ReplicatedSentence r = replicate(make_word("a"), 5, alphabet);
        CHECK(r.text == "a a a");
    }
    SUBCASE("a concept longer than the target keeps one whole copy") {
        const std::string long_word(40, 'z');
        const ReplicatedSentence r = replicate(make_word(long_word), 26, alphabet);
        CHECK(r.text == long_word);
        CHECK(r.encoded.size() == 40);
    }
}

TEST_CASE("replication length bounds") {
    const Alphabet alphabet;
    for (const std::string text : {"a", "ab", "cat", "the cat", "abcdefgh"}) {
        for (int target = 1; target <= 30; ++target) {
            const ReplicatedSentence r = replicate(make_word(text), target, alphabet);
            const std::size_t len = r.text.size();
            CHECK(len >= text.size());
            CHECK(len <= std::max<std::size_t>(static_cast<std::size_t>(target), text.size()));
            // contains at least one full copy
            CHECK(r.text.find(text) != std::string::npos);
        }
    }
}

TEST_CASE("containment respects kind-specific boundary rules") {
    const Alphabet alphabet;
    Sentence s;
    s.text = "the cats sat";
    s.encoded = alphabet.encode(s.text);

    CHECK(concept_in_sentence(s, make_word("cats"), alphabet));
    CHECK_FALSE(concept_in_sentence(s, make_word("cat"), alphabet));  // word needs boundaries
    CHECK(concept_in_sentence(s, make_morpheme("cat"), alphabet));    // morphemes are substrings
    CHECK(concept_in_sentence(s, make_phrase({"cats", "sat"}), alphabet));
    CHECK_FALSE(concept_in_sentence(s, make_phrase({"the", "sat"}), alphabet));
}

TEST_CASE("containment folds case like the alphabet") {
    const Alphabet alphabet;
    Sentence s;
    s.text = "John hit the Balls";
    s.encoded = alphabet.encode(s.text);
    CHECK(concept_in_sentence(s, make_word("john"), alphabet));
    CHECK(concept_in_sentence(s, make_word("BALLS"), alphabet));
}

TEST_CASE("occurrence search is leftmost and non-overlapping") {
    const Alphabet alphabet;
    const EncodedConcept needle(make_morpheme("aa"), alphabet);
    const std::vector<int> hay = alphabet.encode("aaa");
    CHECK(find_occurrences(hay, needle, alphabet.index_of(' ')) == std::vector<int>{0});
    const std::vector<int> hay2 = alphabet.encode("aaaa");
    CHECK(find_occurrences(hay2, needle, alphabet.index_of(' ')) == std::vector<int>{0, 2});
}
