#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unitscope/alignment.hpp"
#include "unitscope/concepts.hpp"
#include "unitscope/corpus.hpp"

namespace unitscope {

// Word -> vector table; keys are case-folded. A stand-in for pretrained
// embedding files (`word v1 v2 ... vd` per line).
struct EmbeddingTable {
    int dimension = 0;
    std::map<std::string, std::vector<double>> entries;

    const std::vector<double>* find(const std::string& word) const;
};

EmbeddingTable load_embeddings(const std::string& path);

// Word: its own vector. Phrase: mean over constituent words found in the
// table. Morpheme: its own entry only; a missing morpheme is out of
// vocabulary. Returns nullopt for fully out-of-vocabulary concepts.
std::optional<std::vector<double>> embed_concept(const Concept& term,
                                                 const EmbeddingTable& table);

struct MergeStep {
    int a = 0;  // cluster ids: 0..n-1 are leaves, n+i is the result of merge i
    int b = 0;
    double distance = 0.0;
    int size = 0;
    bool inversion = false;  // merged at a smaller distance than a previous step
};

struct Dendrogram {
    std::vector<Concept> leaves;    // embeddable concepts, input order
    std::vector<Concept> excluded;  // out-of-vocabulary concepts
    std::vector<MergeStep> merges;  // exactly |leaves| - 1 steps

    std::vector<int> leaf_order() const;  // left-first traversal of the tree
};

// Agglomerative clustering with Euclidean metric and centroid linkage
// (centroid = mean of member vectors). Distance ties break on the
// lexicographically smallest leaf of each cluster. OOV concepts are excluded;
// fewer than two embeddable concepts is an error.
Dendrogram hierarchical_cluster(const std::vector<Concept>& concepts,
                                const EmbeddingTable& table);

struct CoalignmentMatrix {
    std::vector<Concept> concepts;
    std::vector<std::vector<int>> counts;  // symmetric, zero diagonal
};

// counts[i][j] = number of the layer's units whose aligned set contains both
// concepts; row order follows the given concept order.
CoalignmentMatrix coalignment_matrix(const std::vector<UnitAlignment>& alignments, int layer,
                                     const std::vector<Concept>& order);

// Mean over the layer's units of the average pairwise Euclidean distance
// between each unit's embeddable aligned concepts; units with fewer than two
// embeddable concepts are skipped. Throws when no unit is eligible.
double mean_pairwise_distance(const std::vector<UnitAlignment>& alignments, int layer,
                              const EmbeddingTable& table);

// Distinct (text, kind) count among aligned concepts, per layer.
std::vector<int> unique_concepts_per_layer(const std::vector<UnitAlignment>& alignments,
                                           int num_layers);

// Deterministic embedding built from the corpus itself: windowed token
// co-occurrence, positive PMI, then rank truncation via eigendecomposition.
// Tokens and their morphemes both receive vectors so morpheme concepts stay
// in vocabulary.
EmbeddingTable build_fallback_embeddings(const Corpus& corpus, int dimension,
                                         const MorphemeLexicon* lexicon = nullptr);

}  // namespace unitscope
