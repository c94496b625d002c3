#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unitscope/charcnn.hpp"
#include "unitscope/concepts.hpp"
#include "unitscope/corpus.hpp"

namespace unitscope {

struct AlignmentConfig {
    int k = 10;     // top sentences per unit
    int m = 3;      // concepts kept per unit
    int max_n = 5;  // phrase N-gram cap

    void validate() const;
};

struct ScoredSentence {
    int id = 0;
    double activation = 0.0;
};

struct AlignedConcept {
    Concept term;
    double doa = 0.0;
};

struct UnitAlignment {
    int layer = 0;
    int unit = 0;
    std::vector<ScoredSentence> top_sentences;  // a_u desc, ties by ascending id
    std::vector<AlignedConcept> aligned;        // DoA desc, ties by (text, kind)
};

// a_u for every (sentence, unit) pair, one corpus pass. Rows are sentences,
// columns global units in layer-major order.
class ActivationCache {
public:
    static ActivationCache compute(const Model& model, const Corpus& corpus, int threads = 1);

    double at(int sentence_index, int layer, int unit) const {
        return values_[static_cast<std::size_t>(sentence_index) * stride_ +
                       static_cast<std::size_t>(offsets_[static_cast<std::size_t>(layer)] + unit)];
    }
    std::span<const double> row(int sentence_index) const {
        return {values_.data() + static_cast<std::size_t>(sentence_index) * stride_, stride_};
    }
    double corpus_max(int layer, int unit) const;
    double corpus_min(int layer, int unit) const;
    int num_sentences() const { return static_cast<int>(values_.size() / stride_); }

private:
    std::vector<double> values_;
    std::vector<int> offsets_;
    std::size_t stride_ = 0;
};

void check_unit(const ModelConfig& config, int layer, int unit);

// The k sentences with highest mean activation for the unit; all of them
// when the corpus is smaller than k.
std::vector<ScoredSentence> top_k_sentences(const ActivationCache& cache, const Corpus& corpus,
                                            int layer, int unit, int k);
std::vector<ScoredSentence> top_k_sentences(const Model& model, const Corpus& corpus, int layer,
                                            int unit, int k);

// Eq-style degree of alignment: mean activation of the unit on the concept
// replicated to the corpus average sentence length.
double doa(const Model& model, int layer, int unit, const Concept& term, int avg_len,
           const Alphabet& alphabet);

UnitAlignment align_unit(const Model& model, const Corpus& corpus, int layer, int unit,
                         const AlignmentConfig& cfg, const MorphemeLexicon* lexicon = nullptr);

// One alignment per unit, layer-major then unit-ascending; identical output
// for any thread count.
std::vector<UnitAlignment> align_all(const Model& model, const Corpus& corpus,
                                     const AlignmentConfig& cfg, int threads = 1,
                                     const MorphemeLexicon* lexicon = nullptr);

// Same pipeline over an explicit (layer, unit) list; a subset run equals the
// corresponding slice of the full run.
std::vector<UnitAlignment> align_units(const Model& model, const Corpus& corpus,
                                       const AlignmentConfig& cfg,
                                       const std::vector<std::pair<int, int>>& units,
                                       int threads = 1, const MorphemeLexicon* lexicon = nullptr);

// PMI alternative: log(p(u,c) / (p(u) p(c))) with document frequencies over
// the corpus and the unit's top-k set. Returns -infinity when the concept is
// missing from either.
double doa_pmi(const std::vector<int>& top_k_ids, const Corpus& corpus, const Concept& term);

// Occlusion alternative: mean activation drop over the top sentences that
// contain the concept; zero when none does.
double doa_occlusion(const Model& model, int layer, int unit,
                     const std::vector<const Sentence*>& top_sentences, const Concept& term,
                     const Alphabet& alphabet);

enum class Interpretability { interpretable, non_interpretable };

// A unit is interpretable when some replicated candidate drives it above its
// maximal activation on any real corpus sentence (strict inequality).
Interpretability unit_interpretability(const Model& model, const Corpus& corpus, int layer,
                                       int unit, const CandidateSet& candidates, int avg_len);

}  // namespace unitscope
