#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "test_util.hpp"
#include "unitscope/evaluation.hpp"
#include "unitscope/rng.hpp"

using namespace unitscope;

namespace {

Corpus corpus_from_texts(const std::vector<std::string>& texts,
                         const std::vector<int>& labels = {}, int num_classes = 0) {
    std::vector<Sentence> sentences;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        Sentence s;
        s.text = texts[i];
        if (i < labels.size()) s.label = labels[i];
        sentences.push_back(std::move(s));
    }
    return make_corpus(std::move(sentences), Alphabet(), num_classes);
}

Model detector_model(const Alphabet& alphabet, char c) {
    ModelConfig cfg;
    cfg.vocab_size = alphabet.vocab_size();
    cfg.dummy_index = alphabet.dummy_index();
    cfg.embedding_dim = 2;
    cfg.layers = {{1, 3}};
    cfg.num_classes = 2;
    Model m = Model::init(cfg, 0);
    std::fill(m.embedding.begin(), m.embedding.end(), 0.0);
    std::fill(m.conv[0].weights.begin(), m.conv[0].weights.end(), 0.0);
    std::fill(m.conv[0].bias.begin(), m.conv[0].bias.end(), 0.0);
    std::fill(m.classifier_weights.begin(), m.classifier_weights.end(), 0.0);
    m.embedding[static_cast<std::size_t>(alphabet.index_of(static_cast<std::uint32_t>(c))) * 2] = 1.0;
    m.conv[0].weights[1] = 1.0;
    return m;
}

UnitAlignment fake_alignment(int layer, int unit, const std::vector<Concept>& concepts) {
    UnitAlignment ua;
    ua.layer = layer;
    ua.unit = unit;
    double doa = static_cast<double>(concepts.size());
    for (const Concept& c : concepts) ua.aligned.push_back({c, doa--});
    return ua;
}

}  // namespace

TEST_CASE("selectivity hits 1 at the extremes") {
    // unit 0 means exactly 1 on all-`a` sentences and 0 on `b`-only ones
    const Corpus corpus = corpus_from_texts({"aa", "aaa", "bbbb", "bb"});
    const Model m = detector_model(corpus.alphabet, 'a');
    UnitAlignment ua = fake_alignment(0, 0, {make_morpheme("a")});

    const SelectivityBreakdown sel =
        selectivity(m, corpus, ua, SelectivityMode::inclusion, 1);
    CHECK_FALSE(sel.degenerate);
    CHECK(sel.mu_plus == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sel.mu_minus == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sel.act_max == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sel.act_min == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sel.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a constant unit has selectivity exactly 0") {
    const Corpus corpus = corpus_from_texts({"cc", "dd"});
    const Model m = detector_model(corpus.alphabet, 'a');  // never fires here
    UnitAlignment ua = fake_alignment(0, 0, {make_word("cc")});
    for (const SelectivityMode mode :
         {SelectivityMode::replicate, SelectivityMode::one_instance, SelectivityMode::inclusion,
          SelectivityMode::random}) {
        const SelectivityBreakdown sel = selectivity(m, corpus, ua, mode, 1);
        CHECK_FALSE(sel.degenerate);
        CHECK(sel.value == 0.0);
    }
}

TEST_CASE("an empty S- is flagged degenerate, not silently zero") {
    const Corpus corpus = corpus_from_texts({"aa", "ba"});
    const Model m = detector_model(corpus.alphabet, 'a');
    UnitAlignment ua = fake_alignment(0, 0, {make_morpheme("a")});  // in every sentence
    const SelectivityBreakdown sel = selectivity(m, corpus, ua, SelectivityMode::inclusion, 1);
    CHECK(sel.degenerate);
    CHECK(sel.note.find("S-") != std::string::npos);
}

TEST_CASE("selectivity values stay in [-1, 1] for corpus-drawn modes") {
    const Corpus corpus = corpus_from_texts(
        {"ab ba", "ccc", "a b a", "dd cd", "bbb a", "cd dc", "aa ca", "db bd"});
    const Model m = detector_model(corpus.alphabet, 'a');
    UnitAlignment ua = fake_alignment(0, 0, {make_morpheme("a")});
    for (const SelectivityMode mode : {SelectivityMode::inclusion, SelectivityMode::random}) {
        const SelectivityBreakdown sel = selectivity(m, corpus, ua, mode, 5);
        REQUIRE_FALSE(sel.degenerate);
        CHECK(sel.value <= 1.0);
        CHECK(sel.value >= -1.0);
    }
}

TEST_CASE("random-mode selectivity is reproducible for a fixed seed") {
    const Corpus corpus = corpus_from_texts(
        {"ab", "cd", "a a", "dd", "ba", "cc", "ad", "db", "ca", "bb"});
    const Model m = detector_model(corpus.alphabet, 'a');
    UnitAlignment ua = fake_alignment(0, 0, {make_morpheme("a")});
    const SelectivityBreakdown s1 = selectivity(m, corpus, ua, SelectivityMode::random, 42);
    const SelectivityBreakdown s2 = selectivity(m, corpus, ua, SelectivityMode::random, 42);
    const SelectivityBreakdown s3 = selectivity(m, corpus, ua, SelectivityMode::random, 43);
    CHECK(s1.mu_plus == s2.mu_plus);
    CHECK(s1.value == s2.value);
    // a different seed picks a different sample (usually a different mean)
    CHECK(s3.mu_plus != s1.mu_plus);
}

TEST_CASE("selectivity summary: singleton unit mean equals its value, variance 0") {
    const Corpus corpus = corpus_from_texts({"aa", "ab", "bb", "cd"});
    const Model m = detector_model(corpus.alphabet, 'a');
    const ActivationCache cache = ActivationCache::compute(m, corpus);
    std::vector<UnitAlignment> alignments = {fake_alignment(0, 0, {make_morpheme("a")})};

    const auto rows = selectivity_summary(m, corpus, cache, alignments,
                                          {SelectivityMode::inclusion}, {1}, 9);
    REQUIRE(rows.size() == 1);
    const SelectivityBreakdown direct =
        selectivity(m, corpus, cache, alignments[0], SelectivityMode::inclusion, 9);
    CHECK(rows[0].units == 1);
    CHECK(rows[0].mean == doctest::Approx(direct.value).epsilon(1e-12));
    CHECK(rows[0].variance == 0.0);
}

TEST_CASE("selectivity summary row count is layers x modes x m values") {
    const Corpus corpus = corpus_from_texts({"aa bb", "ba ab", "cc dd", "ad bc"});
    ModelConfig cfg;
    cfg.vocab_size = corpus.alphabet.vocab_size();
    cfg.dummy_index = corpus.alphabet.dummy_index();
    cfg.embedding_dim = 3;
    cfg.layers = {{2, 3}, {3, 3}};
    cfg.num_classes = 2;
    const Model m = Model::init(cfg, 77);
    const ActivationCache cache = ActivationCache::compute(m, corpus);

    AlignmentConfig acfg;
    acfg.k = 2;
    acfg.m = 2;
    const auto alignments = align_all(m, corpus, acfg);
    const std::vector<SelectivityMode> modes = {SelectivityMode::replicate,
                                                SelectivityMode::random};
    const auto rows = selectivity_summary(m, corpus, cache, alignments, modes, {1, 2}, 3);
    CHECK(rows.size() == 2u * 2u * 2u);  // layers * modes * m values
}

TEST_CASE("occlude replaces the concept with dummy tokens, length preserved") {
    const Alphabet alphabet;
    Sentence s;
    s.text = "the cat sat";
    s.encoded = alphabet.encode(s.text);

    const Sentence occluded = occlude(s, make_word("cat"), alphabet);
    REQUIRE(occluded.encoded.size() == s.encoded.size());
    for (std::size_t i = 0; i < occluded.encoded.size(); ++i) {
        if (i >= 4 && i <= 6) {
            CHECK(occluded.encoded[i] == alphabet.dummy_index());
        } else {
            CHECK(occluded.encoded[i] == s.encoded[i]);
        }
    }
    CHECK(occluded.text == "the @@@ sat");
}

TEST_CASE("occluding an absent concept returns the sentence unchanged") {
    const Alphabet alphabet;
    Sentence s;
    s.text = "the cat sat";
    s.encoded = alphabet.encode(s.text);
    const Sentence same = occlude(s, make_word("dog"), alphabet);
    CHECK(same.text == s.text);
    CHECK(same.encoded == s.encoded);
}

TEST_CASE("overlapping occurrences occlude leftmost-first without overlap") {
    const Alphabet alphabet;
    Sentence s;
    s.text = "aaa";
    s.encoded = alphabet.encode(s.text);
    const Sentence occluded = occlude(s, make_morpheme("aa"), alphabet);
    const int dummy = alphabet.dummy_index();
    CHECK(occluded.encoded == std::vector<int>{dummy, dummy, alphabet.index_of('a')});
}

TEST_CASE("occlude is idempotent") {
    const Alphabet alphabet;
    Sentence s;
    s.text = "big cats and small cats";
    s.encoded = alphabet.encode(s.text);
    for (const Concept& c : {make_word("cats"), make_morpheme("cat"), make_phrase({"small", "cats"})}) {
        const Sentence once = occlude(s, c, alphabet);
        const Sentence twice = occlude(once, c, alphabet);
        CHECK(once.encoded == twice.encoded);
        CHECK(once.encoded.size() == s.encoded.size());
    }
}

TEST_CASE("DEL is exactly zero for a concept absent from the corpus") {
    const Corpus corpus = corpus_from_texts({"aa bb", "cc dd"}, {0, 1});
    const Model m = detector_model(corpus.alphabet, 'a');
    CHECK(delta_expected_loss(m, corpus, make_word("zebra")) == 0.0);
}

TEST_CASE("DEL on a single sentence equals the two-pass loss difference") {
    const Corpus corpus = corpus_from_texts({"ba ab"}, {1});
    const Alphabet& alphabet = corpus.alphabet;
    Model m = detector_model(alphabet, 'a');
    // give the classifier some signal so occlusion changes the loss
    m.classifier_weights[0] = -1.0;  // class 0 weight on unit 0
    m.classifier_weights[1] = 2.0;   // class 1 weight on unit 0

    const Concept c = make_morpheme("a");
    const double got = delta_expected_loss(m, corpus, c);

    const Sentence occluded = occlude(corpus.sentences[0], c, alphabet);
    const oracle::ForwardResult before = oracle::forward(m, corpus.sentences[0].encoded);
    const oracle::ForwardResult after = oracle::forward(m, occluded.encoded);
    const double want = static_cast<double>(oracle::cross_entropy(after.logits, 1) -
                                            oracle::cross_entropy(before.logits, 1));
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
    CHECK(got > 0.0);  // occluding the favorable evidence raises the loss
}

TEST_CASE("DEL requires labels") {
    const Corpus corpus = corpus_from_texts({"aa", "bb"});
    const Model m = detector_model(corpus.alphabet, 'a');
    CHECK_THROWS_AS(delta_expected_loss(m, corpus, make_word("aa")), std::invalid_argument);
}

TEST_CASE("concept distribution counts and ranks units per concept") {
    const Concept x = make_word("x");
    const Concept y = make_word("y");
    std::vector<UnitAlignment> alignments;
    for (int u = 0; u < 16; ++u) alignments.push_back(fake_alignment(0, u, {x}));
    alignments[3].aligned.push_back({y, 0.5});

    const auto ranked = concept_distribution(alignments, 0);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].first == x);
    CHECK(ranked[0].second == 16);
    CHECK(ranked[1].first == y);
    CHECK(ranked[1].second == 1);

    // a concept aligned nowhere is absent
    for (const auto& [c, n] : ranked) CHECK(c.text != "z");
}

TEST_CASE("concept distribution counts match a direct tally oracle") {
    Rng rng(31);
    const std::vector<Concept> pool = {make_word("a"), make_word("b"), make_morpheme("c"),
                                       make_phrase({"d", "e"}), make_word("f")};
    std::vector<UnitAlignment> alignments;
    for (int u = 0; u < 12; ++u) {
        std::vector<Concept> picks;
        for (const Concept& c : pool) {
            if (rng.uniform() < 0.4) picks.push_back(c);
        }
        if (picks.empty()) picks.push_back(pool[0]);
        alignments.push_back(fake_alignment(0, u, picks));
    }

    std::map<std::string, int> tally;
    for (const UnitAlignment& ua : alignments) {
        for (const AlignedConcept& a : ua.aligned) {
            tally[a.term.kind_label() + ":" + a.term.text] += 1;
        }
    }
    int total_from_ranked = 0;
    for (const auto& [c, n] : concept_distribution(alignments, 0)) {
        CHECK(tally.at(c.kind_label() + ":" + c.text) == n);
        total_from_ranked += n;
    }
    int total = 0;
    for (const auto& [k, v] : tally) total += v;
    CHECK(total_from_ranked == total);
}

TEST_CASE("granularity histogram conserves the aligned-concept count") {
    std::vector<UnitAlignment> alignments;
    alignments.push_back(fake_alignment(0, 0, {make_word("a"), make_morpheme("b")}));
    alignments.push_back(fake_alignment(0, 1, {make_phrase({"c", "d"}), make_word("e")}));
    alignments.push_back(
        fake_alignment(0, 2, {make_phrase({"f", "g", "h", "i", "j"}), make_word("k")}));
    alignments.push_back(fake_alignment(1, 0, {make_word("z")}));  // other layer

    const std::array<int, 6> bins = granularity_histogram(alignments, 0);
    CHECK(bins[0] == 1);  // morpheme
    CHECK(bins[1] == 3);  // word
    CHECK(bins[2] == 1);  // phrase2
    CHECK(bins[3] == 0);
    CHECK(bins[4] == 0);
    CHECK(bins[5] == 1);  // phrase5
    int sum = 0;
    for (int b : bins) sum += b;
    CHECK(sum == 6);
}

TEST_CASE("all-word alignments put everything in the word bin") {
    std::vector<UnitAlignment> alignments = {
        fake_alignment(0, 0, {make_word("a"), make_word("b"), make_word("c")})};
    const std::array<int, 6> bins = granularity_histogram(alignments, 0);
    CHECK(bins[1] == 3);
    CHECK(bins[0] + bins[2] + bins[3] + bins[4] + bins[5] == 0);
}

TEST_CASE("interpretable_ratio matches per-unit reclassification") {
    const Corpus corpus = corpus_from_texts({"ab ab", "ba", "bb bb a"});
    ModelConfig cfg;
    cfg.vocab_size = corpus.alphabet.vocab_size();
    cfg.dummy_index = corpus.alphabet.dummy_index();
    cfg.embedding_dim = 4;
    cfg.layers = {{3, 3}, {4, 3}};
    cfg.num_classes = 2;
    const Model m = Model::init(cfg, 12);

    AlignmentConfig acfg;
    acfg.k = 2;
    acfg.m = 3;
    const auto alignments = align_all(m, corpus, acfg);
    const ActivationCache cache = ActivationCache::compute(m, corpus);
    const int avg_len = corpus.replication_length();

    for (int layer = 0; layer < 2; ++layer) {
        int expected_interpretable = 0;
        int total = 0;
        for (const UnitAlignment& ua : alignments) {
            if (ua.layer != layer) continue;
            ++total;
            // oracle: rebuild the candidate set and compare both maxima
            std::vector<std::string> texts;
            for (const ScoredSentence& t : ua.top_sentences) {
                texts.push_back(corpus.sentences[static_cast<std::size_t>(t.id)].text);
            }
            const CandidateSet cands = extract_candidates(texts, ua.layer, ua.unit, acfg.max_n);
            if (unit_interpretability(m, corpus, ua.layer, ua.unit, cands, avg_len) ==
                Interpretability::interpretable) {
                ++expected_interpretable;
            }
        }
        const double got = interpretable_ratio(cache, alignments, layer);
        CHECK(got == doctest::Approx(static_cast<double>(expected_interpretable) / total)
                         .epsilon(1e-12));
    }
}

TEST_CASE("all-dead layer has interpretable ratio 0") {
    const Corpus corpus = corpus_from_texts({"ab", "cd"});
    Model m = detector_model(corpus.alphabet, 'a');
    std::fill(m.embedding.begin(), m.embedding.end(), 0.0);  // kill the signal
    AlignmentConfig acfg;
    acfg.k = 2;
    acfg.m = 2;
    const auto alignments = align_all(m, corpus, acfg);
    const ActivationCache cache = ActivationCache::compute(m, corpus);
    CHECK(interpretable_ratio(cache, alignments, 0) == 0.0);
}

TEST_CASE("pearson basics") {
    const std::vector<double> xs = {1, 2, 3, 4, 5};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(2.0 * x + 1.0);
    CHECK(pearson(xs, ys) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> neg;
    for (double x : xs) neg.push_back(-x);
    CHECK(pearson(xs, neg) == doctest::Approx(-1.0).epsilon(1e-12));

    CHECK_THROWS_AS(pearson({1.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), std::invalid_argument);  // zero variance
    CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("pearson is symmetric and affine-invariant") {
    Rng rng(88);
    std::vector<double> xs, ys;
    for (int i = 0; i < 40; ++i) {
        xs.push_back(rng.uniform(-3, 3));
        ys.push_back(0.7 * xs.back() + rng.uniform(-1, 1));
    }
    const double r = pearson(xs, ys);
    CHECK(pearson(ys, xs) == doctest::Approx(r).epsilon(1e-12));

    std::vector<double> scaled;
    for (double x : xs) scaled.push_back(4.5 * x + 17.0);
    CHECK(pearson(scaled, ys) == doctest::Approx(r).epsilon(1e-12));
    CHECK(std::abs(r) <= 1.0);
}

TEST_CASE("correlation report has one row per distinct aligned concept") {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.sentences = 80;
    spec.words_min = 3;
    spec.words_max = 6;
    spec.filler = {"rock", "blue", "cloud", "lamp"};
    spec.plants = {{0, "awful", 1.0}, {1, "super", 1.0}};
    const Corpus corpus = generate_synthetic(spec, 13).corpus;

    ModelConfig cfg;
    cfg.vocab_size = corpus.alphabet.vocab_size();
    cfg.dummy_index = corpus.alphabet.dummy_index();
    cfg.embedding_dim = 6;
    cfg.layers = {{6, 3}};
    cfg.num_classes = 2;
    Model m = Model::init(cfg, 3);
    TrainConfig tc;
    tc.learning_rate = 0.5;
    tc.batch_size = 16;
    tc.epochs = 10;
    tc.seed = 4;
    train(m, corpus, tc);

    AlignmentConfig acfg;
    acfg.k = 5;
    acfg.m = 3;
    const auto alignments = align_all(m, corpus, acfg);
    const CorrelationReport report = correlation_report(m, corpus, alignments, 0);

    std::set<std::pair<std::string, int>> distinct;
    for (const UnitAlignment& ua : alignments) {
        for (const AlignedConcept& a : ua.aligned) distinct.insert({a.term.text, a.term.kind_rank()});
    }
    CHECK(report.table.size() == distinct.size());
    CHECK(std::abs(report.r_docfreq) <= 1.0);
    CHECK(std::abs(report.r_del) <= 1.0);
    for (const ConceptStats& s : report.table) {
        CHECK(s.doc_freq >= 1);  // aligned concepts come from corpus sentences
        CHECK(s.units_aligned >= 1);
    }
}

TEST_CASE("occurrence across layers matches a recount") {
    const Concept a = make_word("a");
    const Concept b = make_word("b");
    std::vector<UnitAlignment> alignments;
    alignments.push_back(fake_alignment(0, 0, {a, b}));
    alignments.push_back(fake_alignment(1, 0, {a}));
    alignments.push_back(fake_alignment(2, 0, {a, b}));
    alignments.push_back(fake_alignment(2, 1, {a}));

    const auto rows = occurrence_across_layers(alignments, 3);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].term == a);  // in all 3 layers
    CHECK(rows[0].layer_count == 3);
    CHECK(rows[0].unit_count == 4);
    CHECK(rows[0].per_layer_units == std::vector<int>{1, 1, 2});
    CHECK(rows[1].term == b);
    CHECK(rows[1].layer_count == 2);
    CHECK(rows[1].unit_count == 2);

    int total = 0;
    for (const auto& r : rows) total += r.unit_count;
    int expected_total = 0;
    for (const UnitAlignment& ua : alignments) expected_total += static_cast<int>(ua.aligned.size());
    CHECK(total == expected_total);
}
