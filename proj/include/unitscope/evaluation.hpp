#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "unitscope/alignment.hpp"
#include "unitscope/charcnn.hpp"
#include "unitscope/concepts.hpp"
#include "unitscope/corpus.hpp"

namespace unitscope {

enum class SelectivityMode { replicate, one_instance, inclusion, random };

const char* selectivity_mode_name(SelectivityMode mode);

struct SelectivityBreakdown {
    int layer = 0;
    int unit = 0;
    SelectivityMode mode = SelectivityMode::replicate;
    double mu_plus = 0.0;
    double mu_minus = 0.0;
    double act_max = 0.0;
    double act_min = 0.0;
    double value = 0.0;
    // Set when S+ or S- is empty; the value is then meaningless and summaries
    // must skip it rather than average a silent zero.
    bool degenerate = false;
    std::string note;
};

// Normalized activation gap between concept-bearing inputs and concept-free
// corpus sentences. act_max/act_min range over original corpus sentences
// only, so replicate-mode values may exceed 1. A constant unit yields 0.
SelectivityBreakdown selectivity(const Model& model, const Corpus& corpus,
                                 const ActivationCache& cache, const UnitAlignment& alignment,
                                 SelectivityMode mode, std::uint64_t seed);
SelectivityBreakdown selectivity(const Model& model, const Corpus& corpus,
                                 const UnitAlignment& alignment, SelectivityMode mode,
                                 std::uint64_t seed);

struct SelectivitySummaryRow {
    int layer = 0;
    SelectivityMode mode = SelectivityMode::replicate;
    int m = 0;
    double mean = 0.0;
    double variance = 0.0;
    int units = 0;       // units contributing to the mean
    int degenerate = 0;  // units skipped
};

// Mean/variance per (layer, mode, m). Alignments must carry at least
// max(m_values) concepts per unit; each row slices the top m.
std::vector<SelectivitySummaryRow> selectivity_summary(
    const Model& model, const Corpus& corpus, const ActivationCache& cache,
    const std::vector<UnitAlignment>& alignments, const std::vector<SelectivityMode>& modes,
    const std::vector<int>& m_values, std::uint64_t seed, int threads = 1);

// Replaces every occurrence of the concept with dummy tokens, character for
// character; unchanged when the concept is absent. Matching is word-boundary
// for words and phrases, substring for morphemes, leftmost-first on overlap.
Sentence occlude(const Sentence& sentence, const Concept& term, const Alphabet& alphabet);

// Expected-loss increase caused by occluding the concept corpus-wide:
// E[L(Occ_c(s), y)] - E[L(s, y)]. Positive means the concept helps the task.
// Exactly zero when no sentence contains the concept.
double delta_expected_loss(const Model& model, const Corpus& corpus, const Concept& term);
double delta_expected_loss(const Model& model, const Corpus& corpus, const Concept& term,
                           const std::vector<double>& base_losses);

std::vector<double> per_sentence_losses(const Model& model, const Corpus& corpus,
                                        int threads = 1);

// Concepts ranked by how many of the layer's units aligned them.
std::vector<std::pair<Concept, int>> concept_distribution(
    const std::vector<UnitAlignment>& alignments, int layer, int top_n = 30);

// Counts per granularity: morpheme, word, phrase2..phrase5.
std::array<int, 6> granularity_histogram(const std::vector<UnitAlignment>& alignments, int layer);
const std::array<const char*, 6>& granularity_bin_names();

// Fraction of the layer's units whose strongest replicated candidate beats
// their maximal corpus activation. Alignments supply that maximum as the
// top-ranked DoA.
double interpretable_ratio(const ActivationCache& cache,
                           const std::vector<UnitAlignment>& alignments, int layer);

// Sample Pearson correlation; throws on fewer than two points or zero
// variance rather than returning NaN.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct ConceptStats {
    Concept term;
    int units_aligned = 0;
    int doc_freq = 0;
    double del = 0.0;
};

struct CorrelationReport {
    double r_docfreq = 0.0;
    double r_del = 0.0;
    std::vector<ConceptStats> table;  // one row per distinct aligned concept
};

CorrelationReport correlation_report(const Model& model, const Corpus& corpus,
                                     const std::vector<UnitAlignment>& alignments, int layer,
                                     int threads = 1);

struct OccurrenceRow {
    Concept term;
    int layer_count = 0;
    int unit_count = 0;
    std::vector<int> per_layer_units;
};

// How widely each aligned concept recurs across layers, most widespread first.
std::vector<OccurrenceRow> occurrence_across_layers(const std::vector<UnitAlignment>& alignments,
                                                    int num_layers);

}  // namespace unitscope
