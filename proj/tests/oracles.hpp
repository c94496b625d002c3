// Independent reference implementations used only by tests. These are kept
// deliberately naive and structurally different from the library code paths
// they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "unitscope/charcnn.hpp"
#include "unitscope/concepts.hpp"

namespace oracle {

struct ForwardResult {
    // activations[layer][unit][position], post-ReLU
    std::vector<std::vector<std::vector<double>>> activations;
    std::vector<double> logits;
};

// Direct per-position gather convolution with explicit bounds checks instead
// of a padded buffer.
inline ForwardResult forward(const unitscope::Model& model, const std::vector<int>& encoded) {
    const unitscope::ModelConfig& cfg = model.config;
    const int length = static_cast<int>(encoded.size());

    std::vector<std::vector<double>> prev(static_cast<std::size_t>(cfg.embedding_dim),
                                          std::vector<double>(static_cast<std::size_t>(length)));
    for (int p = 0; p < length; ++p) {
        for (int d = 0; d < cfg.embedding_dim; ++d) {
            prev[static_cast<std::size_t>(d)][static_cast<std::size_t>(p)] =
                model.embedding[static_cast<std::size_t>(encoded[static_cast<std::size_t>(p)]) *
                                    static_cast<std::size_t>(cfg.embedding_dim) +
                                static_cast<std::size_t>(d)];
        }
    }

    ForwardResult result;
    for (int l = 0; l < cfg.num_layers(); ++l) {
        const auto& lc = cfg.layers[static_cast<std::size_t>(l)];
        const int cin = cfg.layer_input_channels(l);
        const int half = lc.filter_width / 2;
        std::vector<std::vector<double>> cur(static_cast<std::size_t>(lc.units),
                                             std::vector<double>(static_cast<std::size_t>(length)));
        for (int o = 0; o < lc.units; ++o) {
            for (int p = 0; p < length; ++p) {
                double acc = model.conv[static_cast<std::size_t>(l)].bias[static_cast<std::size_t>(o)];
                for (int i = 0; i < cin; ++i) {
                    for (int t = 0; t < lc.filter_width; ++t) {
                        const int q = p + t - half;
                        if (q < 0 || q >= length) continue;
                        const double w =
                            model.conv[static_cast<std::size_t>(l)]
                                .weights[((static_cast<std::size_t>(o) * cin +
                                           static_cast<std::size_t>(i)) *
                                          static_cast<std::size_t>(lc.filter_width)) +
                                         static_cast<std::size_t>(t)];
                        acc += w * prev[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)];
                    }
                }
                cur[static_cast<std::size_t>(o)][static_cast<std::size_t>(p)] = std::max(0.0, acc);
            }
        }
        result.activations.push_back(cur);
        prev = std::move(cur);
    }

    const int last_units = cfg.layers.back().units;
    std::vector<double> pooled(static_cast<std::size_t>(last_units));
    for (int u = 0; u < last_units; ++u) {
        const auto& row = result.activations.back()[static_cast<std::size_t>(u)];
        if (cfg.pooling == unitscope::Pooling::mean) {
            double s = 0.0;
            for (double v : row) s += v;
            pooled[static_cast<std::size_t>(u)] = s / static_cast<double>(length);
        } else {
            pooled[static_cast<std::size_t>(u)] = *std::max_element(row.begin(), row.end());
        }
    }
    result.logits.assign(static_cast<std::size_t>(cfg.num_classes), 0.0);
    for (int c = 0; c < cfg.num_classes; ++c) {
        double acc = model.classifier_bias[static_cast<std::size_t>(c)];
        for (int u = 0; u < last_units; ++u) {
            acc += model.classifier_weights[static_cast<std::size_t>(c) *
                                                static_cast<std::size_t>(last_units) +
                                            static_cast<std::size_t>(u)] *
                   pooled[static_cast<std::size_t>(u)];
        }
        result.logits[static_cast<std::size_t>(c)] = acc;
    }
    return result;
}

inline double mean_activation(const ForwardResult& r, int layer, int unit) {
    const auto& row = r.activations[static_cast<std::size_t>(layer)][static_cast<std::size_t>(unit)];
    double s = 0.0;
    for (double v : row) s += v;
    return s / static_cast<double>(row.size());
}

// Softmax cross-entropy in extended precision, no max-shift trick.
inline long double cross_entropy(const std::vector<double>& logits, int label) {
    long double sum = 0.0L;
    for (double v : logits) sum += expl(static_cast<long double>(v));
    return logl(sum) - static_cast<long double>(logits[static_cast<std::size_t>(label)]);
}

struct Merge {
    int a = 0;
    int b = 0;
    double distance = 0.0;
};

// O(n^3) centroid-linkage agglomeration over leaf-index sets; same contract
// as the library (leaves 0..n-1, merge i produces id n+i, ties on the
// lexicographically smallest leaf concept of each side).
inline std::vector<Merge> agglomerate(const std::vector<std::vector<double>>& points,
                                      const std::vector<unitscope::Concept>& names) {
    const int n = static_cast<int>(points.size());
    struct Cl {
        int id;
        std::set<int> leaves;
    };
    std::vector<Cl> clusters;
    for (int i = 0; i < n; ++i) clusters.push_back({i, {i}});

    auto centroid = [&](const Cl& c) {
        std::vector<double> m(points[0].size(), 0.0);
        for (int leaf : c.leaves) {
            for (std::size_t d = 0; d < m.size(); ++d) m[d] += points[static_cast<std::size_t>(leaf)][d];
        }
        for (double& x : m) x /= static_cast<double>(c.leaves.size());
        return m;
    };
    auto min_name = [&](const Cl& c) {
        const unitscope::Concept* best = nullptr;
        for (int leaf : c.leaves) {
            const unitscope::Concept& cand = names[static_cast<std::size_t>(leaf)];
            if (!best || unitscope::concept_order(cand, *best)) best = &cand;
        }
        return best;
    };

    std::vector<Merge> merges;
    for (int step = 0; step < n - 1; ++step) {
        int bi = -1, bj = -1;
        double bd = 0.0;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const std::vector<double> ci = centroid(clusters[i]);
                const std::vector<double> cj = centroid(clusters[j]);
                double sq = 0.0;
                for (std::size_t d = 0; d < ci.size(); ++d) sq += (ci[d] - cj[d]) * (ci[d] - cj[d]);
                const double dist = std::sqrt(sq);
                bool take = bi < 0 || dist < bd;
                if (!take && dist == bd) {
                    const auto* ni = min_name(clusters[i]);
                    const auto* nj = min_name(clusters[j]);
                    const auto* oi = min_name(clusters[static_cast<std::size_t>(bi)]);
                    const auto* oj = min_name(clusters[static_cast<std::size_t>(bj)]);
                    if (unitscope::concept_order(*ni, *oi)) {
                        take = true;
                    } else if (!unitscope::concept_order(*oi, *ni) &&
                               unitscope::concept_order(*nj, *oj)) {
                        take = true;
                    }
                }
                if (take) {
                    bi = static_cast<int>(i);
                    bj = static_cast<int>(j);
                    bd = dist;
                }
            }
        }
        Cl merged;
        merged.id = n + step;
        merged.leaves = clusters[static_cast<std::size_t>(bi)].leaves;
        merged.leaves.insert(clusters[static_cast<std::size_t>(bj)].leaves.begin(),
                             clusters[static_cast<std::size_t>(bj)].leaves.end());
        merges.push_back({clusters[static_cast<std::size_t>(bi)].id,
                          clusters[static_cast<std::size_t>(bj)].id, bd});
        clusters.erase(clusters.begin() + bj);
        clusters.erase(clusters.begin() + bi);
        clusters.push_back(std::move(merged));
    }
    return merges;
}

}  // namespace oracle
