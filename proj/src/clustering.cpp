#include "unitscope/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "unitscope/text.hpp"

namespace unitscope {

const std::vector<double>* EmbeddingTable::find(const std::string& word) const {
    const auto it = entries.find(fold_case(word));
    return it == entries.end() ? nullptr : &it->second;
}

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path);

    EmbeddingTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_whitespace(line);
        if (fields.size() < 2) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected `word v1 v2 ...`");
        }
        std::vector<double> vec;
        vec.reserve(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            double v = 0.0;
            if (!parse_double(fields[i], v)) {
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": component " + std::to_string(i) + " is not a number");
            }
            vec.push_back(v);
        }
        if (table.dimension == 0) {
            table.dimension = static_cast<int>(vec.size());
        } else if (static_cast<int>(vec.size()) != table.dimension) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": dimension " + std::to_string(vec.size()) +
                                     " does not match first line's " +
                                     std::to_string(table.dimension));
        }
        table.entries.emplace(fold_case(fields[0]), std::move(vec));  // first wins
    }
    if (table.entries.empty()) throw std::runtime_error("empty embedding file: " + path);
    return table;
}

std::optional<std::vector<double>> embed_concept(const Concept& term,
                                                 const EmbeddingTable& table) {
    if (term.kind == ConceptKind::morpheme) {
        const std::vector<double>* v = table.find(term.text);
        if (!v) return std::nullopt;
        return *v;
    }
    const std::vector<std::string> words = split_whitespace(term.text);
    std::vector<double> mean(static_cast<std::size_t>(table.dimension), 0.0);
    int found = 0;
    for (const std::string& w : words) {
        if (const std::vector<double>* v = table.find(w)) {
            for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += (*v)[d];
            ++found;
        }
    }
    if (found == 0) return std::nullopt;
    for (double& x : mean) x /= static_cast<double>(found);
    return mean;
}

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double sq = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

// Centroid recomputed as the plain mean over member leaf vectors, summed in
// ascending leaf order, so independent implementations agree bitwise.
std::vector<double> centroid_of(const std::vector<int>& members,
                                const std::vector<std::vector<double>>& vectors) {
    std::vector<double> c(vectors[0].size(), 0.0);
    for (int m : members) {
        const std::vector<double>& v = vectors[static_cast<std::size_t>(m)];
        for (std::size_t d = 0; d < c.size(); ++d) c[d] += v[d];
    }
    for (double& x : c) x /= static_cast<double>(members.size());
    return c;
}

}  // namespace

std::vector<int> Dendrogram::leaf_order() const {
    const int n = static_cast<int>(leaves.size());
    std::vector<int> order;
    if (n == 0) return order;
    if (merges.empty()) {
        for (int i = 0; i < n; ++i) order.push_back(i);
        return order;
    }
    // depth-first from the final cluster, first-listed child first
    std::vector<int> stack{n + static_cast<int>(merges.size()) - 1};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        if (id < n) {
            order.push_back(id);
        } else {
            const MergeStep& m = merges[static_cast<std::size_t>(id - n)];
            stack.push_back(m.b);
            stack.push_back(m.a);
        }
    }
    return order;
}

Dendrogram hierarchical_cluster(const std::vector<Concept>& concepts,
                                const EmbeddingTable& table) {
    Dendrogram out;
    std::vector<std::vector<double>> vectors;
    for (const Concept& c : concepts) {
        if (auto v = embed_concept(c, table)) {
            out.leaves.push_back(c);
            vectors.push_back(std::move(*v));
        } else {
            out.excluded.push_back(c);
        }
    }
    const int n = static_cast<int>(out.leaves.size());
    if (n < 2) {
        throw std::invalid_argument("hierarchical_cluster: fewer than 2 embeddable concepts");
    }

    struct Cluster {
        int id;                    // leaf index or n + merge index
        std::vector<int> members;  // ascending leaf indices
        std::vector<double> centroid;
        const Concept* min_leaf;   // lexicographic tie key
    };
    std::vector<Cluster> active;
    active.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        active.push_back({i, {i}, vectors[static_cast<std::size_t>(i)],
                          &out.leaves[static_cast<std::size_t>(i)]});
    }

    double max_seen = 0.0;
    for (int step = 0; step < n - 1; ++step) {
        std::size_t best_i = 0, best_j = 1;
        double best_dist = 0.0;
        bool first = true;
        for (std::size_t i = 0; i < active.size(); ++i) {
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                const double dist = euclidean(active[i].centroid, active[j].centroid);
                bool better = false;
                if (first || dist < best_dist) {
                    better = true;
                } else if (dist == best_dist) {
                    // tie: smallest lexicographic (min leaf of i, min leaf of j)
                    const auto key = [](const Cluster& a, const Cluster& b) {
                        return std::make_pair(a.min_leaf, b.min_leaf);
                    };
                    const auto cand = key(active[i], active[j]);
                    const auto cur = key(active[best_i], active[best_j]);
                    if (concept_order(*cand.first, *cur.first) ||
                        (!concept_order(*cur.first, *cand.first) &&
                         concept_order(*cand.second, *cur.second))) {
                        better = true;
                    }
                }
                if (better) {
                    best_i = i;
                    best_j = j;
                    best_dist = dist;
                    first = false;
                }
            }
        }

        Cluster merged;
        merged.id = n + step;
        merged.members = active[best_i].members;
        merged.members.insert(merged.members.end(), active[best_j].members.begin(),
                              active[best_j].members.end());
        std::sort(merged.members.begin(), merged.members.end());
        merged.centroid = centroid_of(merged.members, vectors);
        merged.min_leaf = concept_order(*active[best_i].min_leaf, *active[best_j].min_leaf)
                              ? active[best_i].min_leaf
                              : active[best_j].min_leaf;

        MergeStep ms;
        ms.a = active[best_i].id;
        ms.b = active[best_j].id;
        ms.distance = best_dist;
        ms.size = static_cast<int>(merged.members.size());
        ms.inversion = step > 0 && best_dist < max_seen;
        max_seen = std::max(max_seen, best_dist);
        out.merges.push_back(ms);

        active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_j));
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_i));
        active.push_back(std::move(merged));
    }
    return out;
}

CoalignmentMatrix coalignment_matrix(const std::vector<UnitAlignment>& alignments, int layer,
                                     const std::vector<Concept>& order) {
    if (order.size() < 2) {
        throw std::invalid_argument("coalignment_matrix: fewer than 2 concepts");
    }
    CoalignmentMatrix out;
    out.concepts = order;
    out.counts.assign(order.size(), std::vector<int>(order.size(), 0));

    std::map<Concept, std::size_t, decltype(&concept_order)> index(&concept_order);
    for (std::size_t i = 0; i < order.size(); ++i) index.emplace(order[i], i);

    for (const UnitAlignment& ua : alignments) {
        if (ua.layer != layer) continue;
        std::vector<std::size_t> present;
        for (const AlignedConcept& a : ua.aligned) {
            const auto it = index.find(a.term);
            if (it != index.end()) present.push_back(it->second);
        }
        std::sort(present.begin(), present.end());
        present.erase(std::unique(present.begin(), present.end()), present.end());
        for (std::size_t i = 0; i < present.size(); ++i) {
            for (std::size_t j = i + 1; j < present.size(); ++j) {
                out.counts[present[i]][present[j]] += 1;
                out.counts[present[j]][present[i]] += 1;
            }
        }
    }
    return out;
}

double mean_pairwise_distance(const std::vector<UnitAlignment>& alignments, int layer,
                              const EmbeddingTable& table) {
    double unit_sum = 0.0;
    int eligible_units = 0;
    for (const UnitAlignment& ua : alignments) {
        if (ua.layer != layer) continue;
        std::vector<std::vector<double>> vecs;
        for (const AlignedConcept& a : ua.aligned) {
            if (auto v = embed_concept(a.term, table)) vecs.push_back(std::move(*v));
        }
        if (vecs.size() < 2) continue;
        double pair_sum = 0.0;
        int pairs = 0;
        for (std::size_t i = 0; i < vecs.size(); ++i) {
            for (std::size_t j = i + 1; j < vecs.size(); ++j) {
                pair_sum += euclidean(vecs[i], vecs[j]);
                ++pairs;
            }
        }
        unit_sum += pair_sum / static_cast<double>(pairs);
        ++eligible_units;
    }
    if (eligible_units == 0) {
        throw std::invalid_argument("mean_pairwise_distance: no unit with 2+ embeddable concepts");
    }
    return unit_sum / static_cast<double>(eligible_units);
}

std::vector<int> unique_concepts_per_layer(const std::vector<UnitAlignment>& alignments,
                                           int num_layers) {
    std::vector<std::set<Concept, decltype(&concept_order)>> sets;
    for (int l = 0; l < num_layers; ++l) sets.emplace_back(&concept_order);
    for (const UnitAlignment& ua : alignments) {
        for (const AlignedConcept& a : ua.aligned) {
            sets.at(static_cast<std::size_t>(ua.layer)).insert(a.term);
        }
    }
    std::vector<int> counts;
    counts.reserve(sets.size());
    for (const auto& s : sets) counts.push_back(static_cast<int>(s.size()));
    return counts;
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix; A is overwritten
// with a diagonal of eigenvalues, V receives the eigenvectors as columns.
void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& v) {
    v.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;
    auto at = [&](std::vector<double>& m, int r, int c) -> double& {
        return m[static_cast<std::size_t>(r) * n + c];
    };

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
        }
        if (off < 1e-24) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(a, p, q);
                if (apq == 0.0) continue;
                const double theta = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = at(a, k, p);
                    const double akq = at(a, k, q);
                    at(a, k, p) = c * akp - s * akq;
                    at(a, k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = at(a, p, k);
                    const double aqk = at(a, q, k);
                    at(a, p, k) = c * apk - s * aqk;
                    at(a, q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = at(v, k, p);
                    const double vkq = at(v, k, q);
                    at(v, k, p) = c * vkp - s * vkq;
                    at(v, k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
}

}  // namespace

EmbeddingTable build_fallback_embeddings(const Corpus& corpus, int dimension,
                                         const MorphemeLexicon* lexicon) {
    if (dimension < 1) throw std::invalid_argument("fallback embeddings: dimension must be >= 1");

    // Vocabulary: corpus tokens plus their morphemes, so morpheme concepts
    // are embeddable too. Each position contributes its token and that
    // token's segments as co-occurring symbols.
    std::map<std::string, int> vocab;
    std::vector<std::vector<std::vector<int>>> sentence_symbols;  // [sentence][pos][symbols]
    auto intern = [&vocab](const std::string& s) {
        return vocab.emplace(s, static_cast<int>(vocab.size())).first->second;
    };
    for (const Sentence& s : corpus.sentences) {
        std::vector<std::vector<int>> positions;
        for (const std::string& token : split_whitespace(fold_case(s.text))) {
            std::vector<int> symbols{intern(token)};
            for (const std::string& seg : segment_morphemes(token, lexicon)) {
                if (seg != token) symbols.push_back(intern(fold_case(seg)));
            }
            positions.push_back(std::move(symbols));
        }
        sentence_symbols.push_back(std::move(positions));
    }

    const int v = static_cast<int>(vocab.size());
    if (v == 0) throw std::invalid_argument("fallback embeddings: corpus has no tokens");
    const int dim = std::min(dimension, v);

    // windowed co-occurrence, +-2 positions, within sentence
    constexpr int kWindow = 2;
    std::vector<double> cooc(static_cast<std::size_t>(v) * static_cast<std::size_t>(v), 0.0);
    std::vector<double> totals(static_cast<std::size_t>(v), 0.0);
    double grand_total = 0.0;
    for (const auto& positions : sentence_symbols) {
        const int len = static_cast<int>(positions.size());
        for (int i = 0; i < len; ++i) {
            for (int j = i + 1; j <= std::min(len - 1, i + kWindow); ++j) {
                for (int si : positions[static_cast<std::size_t>(i)]) {
                    for (int sj : positions[static_cast<std::size_t>(j)]) {
                        cooc[static_cast<std::size_t>(si) * v + sj] += 1.0;
                        cooc[static_cast<std::size_t>(sj) * v + si] += 1.0;
                        totals[static_cast<std::size_t>(si)] += 1.0;
                        totals[static_cast<std::size_t>(sj)] += 1.0;
                        grand_total += 2.0;
                    }
                }
            }
        }
    }

    // positive PMI
    std::vector<double> ppmi(static_cast<std::size_t>(v) * static_cast<std::size_t>(v), 0.0);
    for (int i = 0; i < v; ++i) {
        for (int j = 0; j < v; ++j) {
            const double c = cooc[static_cast<std::size_t>(i) * v + j];
            if (c <= 0.0) continue;
            const double pmi = std::log(c * grand_total /
                                        (totals[static_cast<std::size_t>(i)] *
                                         totals[static_cast<std::size_t>(j)]));
            if (pmi > 0.0) ppmi[static_cast<std::size_t>(i) * v + j] = pmi;
        }
    }

    std::vector<double> eigvecs;
    jacobi_eigen(ppmi, v, eigvecs);
    std::vector<int> order(static_cast<std::size_t>(v));
    for (int i = 0; i < v; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int x, int y) {
        const double ex = std::abs(ppmi[static_cast<std::size_t>(x) * v + x]);
        const double ey = std::abs(ppmi[static_cast<std::size_t>(y) * v + y]);
        if (ex != ey) return ex > ey;
        return x < y;
    });

    EmbeddingTable table;
    table.dimension = dim;
    for (const auto& [word, row] : vocab) {
        std::vector<double> vec(static_cast<std::size_t>(dim), 0.0);
        for (int k = 0; k < dim; ++k) {
            const int col = order[static_cast<std::size_t>(k)];
            const double lambda = ppmi[static_cast<std::size_t>(col) * v + col];
            vec[static_cast<std::size_t>(k)] = eigvecs[static_cast<std::size_t>(row) * v + col] *
                                               std::sqrt(std::abs(lambda));
        }
        table.entries.emplace(word, std::move(vec));
    }

    // orient axes deterministically: flip so the largest-|entry| is positive
    for (int k = 0; k < dim; ++k) {
        double best = 0.0;
        for (const auto& [word, vec] : table.entries) {
            if (std::abs(vec[static_cast<std::size_t>(k)]) > std::abs(best)) {
                best = vec[static_cast<std::size_t>(k)];
            }
        }
        if (best < 0.0) {
            for (auto& [word, vec] : table.entries) {
                vec[static_cast<std::size_t>(k)] = -vec[static_cast<std::size_t>(k)];
            }
        }
    }
    return table;
}

}  // namespace unitscope
