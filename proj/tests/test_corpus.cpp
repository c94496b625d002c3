#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "unitscope/corpus.hpp"
#include "unitscope/text.hpp"

using namespace unitscope;

TEST_CASE("alphabet indexing and folding") {
    Alphabet a;
    CHECK(a.index_of('a') == 0);
    CHECK(a.index_of('b') == 1);
    CHECK(a.index_of('A') == 0);  // case folds
    CHECK(a.index_of('0') == 26);
    CHECK(a.index_of(' ') == 36);
    CHECK(a.index_of(0x2603) == a.unknown_index());  // snowman
    CHECK(a.dummy_index() == a.size() + 1);
    CHECK(a.vocab_size() == a.size() + 2);
}

TEST_CASE("encode maps unknown characters and preserves length") {
    Alphabet a("ab");
    CHECK(a.encode("ab") == std::vector<int>{0, 1});
    CHECK(a.unknown_index() == 2);
    const auto enc = a.encode("a\xE2\x98\x83");  // "a☃"
    CHECK(enc == std::vector<int>{0, 2});
}

TEST_CASE("decode(encode(x)) is identity on in-alphabet text") {
    Alphabet a;
    const std::string text = "the quick brown fox, 42!";
    CHECK(a.decode(a.encode(text)) == text);
}

TEST_CASE("load_corpus computes the mean character length") {
    testutil::TempDir tmp("corpus_mean");
    const std::string path = tmp.write("c.tsv", "1\tgood food\n0\tbad food\n");
    const Corpus corpus = load_corpus(path, Alphabet());
    REQUIRE(corpus.size() == 2);
    CHECK(corpus.avg_char_length == doctest::Approx(8.5).epsilon(1e-12));
    CHECK(corpus.sentences[0].label == 1);
    CHECK(corpus.sentences[1].label == 0);
    CHECK(corpus.num_classes == 2);
    CHECK(corpus.sentences[0].encoded.size() == 9);
}

TEST_CASE("load_corpus rejects an empty file") {
    testutil::TempDir tmp("corpus_empty");
    const std::string path = tmp.write("empty.tsv", "");
    CHECK_THROWS_WITH_AS(load_corpus(path, Alphabet()), doctest::Contains("empty corpus"),
                         std::runtime_error);
}

TEST_CASE("load_corpus reports malformed lines with their number") {
    testutil::TempDir tmp("corpus_malformed");
    const std::string path = tmp.write("bad.tsv", "1\tfine\nnot_an_int\talso text\n");
    CHECK_THROWS_WITH_AS(load_corpus(path, Alphabet()), doctest::Contains(":2:"),
                         std::runtime_error);
}

TEST_CASE("load_corpus enforces the declared label range") {
    testutil::TempDir tmp("corpus_range");
    const std::string path = tmp.write("c.tsv", "0\ta\n5\tb\n");
    CHECK_THROWS_WITH_AS(load_corpus(path, Alphabet(), 2), doctest::Contains("out of declared range"),
                         std::runtime_error);
}

TEST_CASE("avg_char_length matches an independent one-pass average") {
    testutil::TempDir tmp("corpus_1000");
    std::ostringstream content;
    for (int i = 0; i < 1000; ++i) {
        content << (i % 3) << '\t';
        const int words = 3 + (i * 7) % 9;
        for (int w = 0; w < words; ++w) {
            if (w) content << ' ';
            content << "w" << ((i + w) % 23);
        }
        content << '\n';
    }
    const std::string path = tmp.write("big.tsv", content.str());

    // independent oracle: re-read the file, count code points per line
    std::ifstream in(path);
    std::string line;
    double total = 0.0;
    int count = 0;
    while (std::getline(in, line)) {
        const std::size_t tab = line.find('\t');
        total += static_cast<double>(utf8_length(line.substr(tab + 1)));
        ++count;
    }
    const double expected = total / count;

    const Corpus corpus = load_corpus(path, Alphabet());
    CHECK(corpus.size() == 1000);
    CHECK(corpus.avg_char_length == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("corpus invariant: mean length within 1e-9 of direct mean") {
    testutil::TempDir tmp("corpus_inv");
    const std::string path = tmp.write("c.tsv", "abc\nde\nfghij\n");
    const Corpus corpus = load_corpus(path, Alphabet());
    double total = 0.0;
    for (const Sentence& s : corpus.sentences) total += s.length();
    CHECK(std::abs(corpus.avg_char_length - total / corpus.size()) < 1e-9);
    CHECK(corpus.replication_length() == 3);  // floor(10/3)
}

namespace {

SyntheticSpec two_class_spec() {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.sentences = 100;
    spec.words_min = 4;
    spec.words_max = 8;
    spec.filler = {"red", "blue", "green", "round", "flat", "tall", "wide", "soft"};
    spec.plants = {{1, "excellent", 1.0}, {0, "awful", 1.0}};
    return spec;
}

}  // namespace

TEST_CASE("synthetic corpus plants decide the label") {
    const SyntheticCorpus synth = generate_synthetic(two_class_spec(), 42);
    REQUIRE(synth.corpus.size() == 100);
    for (const Sentence& s : synth.corpus.sentences) {
        REQUIRE(s.label.has_value());
        const bool has_excellent = s.text.find("excellent") != std::string::npos;
        const bool has_awful = s.text.find("awful") != std::string::npos;
        if (*s.label == 1) {
            CHECK(has_excellent);
            CHECK_FALSE(has_awful);
        } else {
            CHECK(has_awful);
            CHECK_FALSE(has_excellent);
        }
    }
}

TEST_CASE("synthetic generation is a pure function of spec and seed") {
    const SyntheticCorpus a = generate_synthetic(two_class_spec(), 7);
    const SyntheticCorpus b = generate_synthetic(two_class_spec(), 7);
    REQUIRE(a.corpus.size() == b.corpus.size());
    for (int i = 0; i < a.corpus.size(); ++i) {
        CHECK(a.corpus.sentences[i].text == b.corpus.sentences[i].text);
        CHECK(a.corpus.sentences[i].label == b.corpus.sentences[i].label);
    }
    const SyntheticCorpus c = generate_synthetic(two_class_spec(), 8);
    bool any_diff = false;
    for (int i = 0; i < a.corpus.size() && !any_diff; ++i) {
        any_diff = a.corpus.sentences[i].text != c.corpus.sentences[i].text;
    }
    CHECK(any_diff);
}

TEST_CASE("plant document frequency tracks its probability") {
    SyntheticSpec spec;
    spec.classes = 1;
    spec.sentences = 2000;
    spec.words_min = 6;
    spec.words_max = 10;
    spec.filler = {"red", "blue", "green", "round", "flat", "tall"};
    spec.plants = {{0, "excellent", 0.5}};
    spec.force_plant = false;  // measure the raw Bernoulli rate

    const SyntheticCorpus synth = generate_synthetic(spec, 123);
    int with = 0;
    for (const Sentence& s : synth.corpus.sentences) {
        if (s.text.find("excellent") != std::string::npos) ++with;
    }
    const double freq = static_cast<double>(with) / synth.corpus.size();
    CHECK(freq > 0.45);
    CHECK(freq < 0.55);
}

TEST_CASE("synthetic spec validation") {
    SyntheticSpec spec = two_class_spec();
    spec.classes = 0;
    CHECK_THROWS_AS(generate_synthetic(spec, 1), std::invalid_argument);
    spec = two_class_spec();
    spec.filler.clear();
    CHECK_THROWS_AS(generate_synthetic(spec, 1), std::invalid_argument);
}

TEST_CASE("synthetic spec file round-trips through the loader") {
    testutil::TempDir tmp("synth_spec");
    const std::string path = tmp.write("s.ini",
                                       "classes = 2\n"
                                       "sentences = 50\n"
                                       "words_min = 4\n"
                                       "words_max = 6\n"
                                       "seed = 99\n"
                                       "filler = red blue green\n"
                                       "plant = 0:awful:0.8\n"
                                       "plant = 1:truly great:0.6\n");
    const SyntheticSpec spec = load_synthetic_spec(path);
    CHECK(spec.classes == 2);
    CHECK(spec.sentences == 50);
    CHECK(spec.seed == 99);
    CHECK(spec.filler.size() == 3);
    REQUIRE(spec.plants.size() == 2);
    CHECK(spec.plants[1].text == "truly great");
    CHECK(spec.plants[1].probability == doctest::Approx(0.6));

    // file seed pins the corpus regardless of the run seed
    const SyntheticCorpus a = generate_synthetic(spec, 1);
    const SyntheticCorpus b = generate_synthetic(spec, 2);
    CHECK(a.corpus.sentences[0].text == b.corpus.sentences[0].text);
}

TEST_CASE("save and reload a corpus") {
    testutil::TempDir tmp("corpus_roundtrip");
    const SyntheticCorpus synth = generate_synthetic(two_class_spec(), 3);
    const std::string path = tmp.file("saved.tsv");
    save_corpus(synth.corpus, path);
    const Corpus loaded = load_corpus(path, Alphabet(), synth.corpus.num_classes);
    REQUIRE(loaded.size() == synth.corpus.size());
    for (int i = 0; i < loaded.size(); ++i) {
        CHECK(loaded.sentences[i].text == synth.corpus.sentences[i].text);
        CHECK(loaded.sentences[i].encoded == synth.corpus.sentences[i].encoded);
    }
    CHECK(loaded.avg_char_length == doctest::Approx(synth.corpus.avg_char_length).epsilon(1e-12));
}
