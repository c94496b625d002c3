#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace unitscope {

// Character inventory of the model. Indices are dense: real characters first,
// then unknown_index for out-of-alphabet input, then dummy_index. The dummy
// slot maps to no real character; occlusion writes it into encoded text so
// occluded spans carry no signal.
class Alphabet {
public:
    Alphabet();
    explicit Alphabet(const std::string& characters);

    static const std::string& default_characters();

    int size() const { return static_cast<int>(characters_.size()); }
    int vocab_size() const { return size() + 2; }
    int unknown_index() const { return size(); }
    int dummy_index() const { return size() + 1; }
    const std::string& characters() const { return characters_; }

    // Uppercase ASCII folds to lowercase before lookup.
    int index_of(std::uint32_t code_point) const;

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& encoded) const;

    static constexpr char kUnknownChar = '^';  // not in the default set
    static constexpr char kDummyChar = '@';    // not in the default set

private:
    std::string characters_;
    std::array<int, 128> ascii_lookup_{};
};

struct Sentence {
    int id = 0;
    std::string text;
    std::optional<int> label;
    std::vector<int> encoded;  // one index per code point of text

    int length() const { return static_cast<int>(encoded.size()); }
};

struct Corpus {
    std::vector<Sentence> sentences;
    Alphabet alphabet;
    double avg_char_length = 0.0;
    int num_classes = 0;

    int size() const { return static_cast<int>(sentences.size()); }
    bool labeled() const;
    // Replication target: average sentence length in characters, floored.
    int replication_length() const;
};

// One sentence per line, UTF-8, either `text` or `label<TAB>text`.
// num_classes 0 means infer from the largest label seen.
Corpus load_corpus(const std::string& path, const Alphabet& alphabet, int num_classes = 0);
Corpus make_corpus(std::vector<Sentence> sentences, const Alphabet& alphabet, int num_classes = 0);
void save_corpus(const Corpus& corpus, const std::string& path);

struct Plant {
    int class_index = 0;
    std::string text;          // keyword or space-separated phrase
    double probability = 1.0;  // per sentence of its class
};

struct SyntheticSpec {
    int classes = 2;
    int sentences = 1000;
    int words_min = 6;
    int words_max = 12;
    std::vector<std::string> filler;
    std::vector<Plant> plants;
    // Guarantee at least one same-class plant per sentence so labels stay
    // decidable; lifts measured plant frequency above the nominal probability.
    bool force_plant = true;
    std::optional<std::uint64_t> seed;  // overrides the run seed when set
};

SyntheticSpec load_synthetic_spec(const std::string& path);

struct SyntheticCorpus {
    Corpus corpus;
    std::vector<Plant> plants;  // ground truth for downstream checks
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace unitscope
