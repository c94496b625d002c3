#include "unitscope/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "unitscope/parallel.hpp"
#include "unitscope/rng.hpp"

namespace unitscope {

const char* selectivity_mode_name(SelectivityMode mode) {
    switch (mode) {
        case SelectivityMode::replicate: return "replicate";
        case SelectivityMode::one_instance: return "one_instance";
        case SelectivityMode::inclusion: return "inclusion";
        case SelectivityMode::random: return "random";
    }
    return "?";
}

namespace {

// Sentence ids containing at least one aligned concept, and the complement.
struct InclusionSplit {
    std::vector<int> with_concept;
    std::vector<int> without_concept;
};

InclusionSplit split_by_concepts(const Corpus& corpus, const std::vector<AlignedConcept>& aligned) {
    std::vector<EncodedConcept> needles;
    needles.reserve(aligned.size());
    for (const AlignedConcept& a : aligned) needles.emplace_back(a.term, corpus.alphabet);
    const int space = corpus.alphabet.index_of(' ');

    InclusionSplit split;
    for (const Sentence& s : corpus.sentences) {
        bool any = false;
        for (const EncodedConcept& n : needles) {
            if (contains(s.encoded, n, space)) {
                any = true;
                break;
            }
        }
        (any ? split.with_concept : split.without_concept).push_back(s.id);
    }
    return split;
}

double mean_over_ids(const ActivationCache& cache, const std::vector<int>& ids, int layer,
                     int unit) {
    double sum = 0.0;
    for (int id : ids) sum += cache.at(id, layer, unit);
    return sum / static_cast<double>(ids.size());
}

}  // namespace

SelectivityBreakdown selectivity(const Model& model, const Corpus& corpus,
                                 const ActivationCache& cache, const UnitAlignment& alignment,
                                 SelectivityMode mode, std::uint64_t seed) {
    const int layer = alignment.layer;
    const int unit = alignment.unit;
    check_unit(model.config, layer, unit);

    SelectivityBreakdown out;
    out.layer = layer;
    out.unit = unit;
    out.mode = mode;
    out.act_max = cache.corpus_max(layer, unit);
    out.act_min = cache.corpus_min(layer, unit);

    const InclusionSplit split = split_by_concepts(corpus, alignment.aligned);
    if (split.without_concept.empty()) {
        out.degenerate = true;
        out.note = "empty S-: every corpus sentence contains an aligned concept";
        return out;
    }
    out.mu_minus = mean_over_ids(cache, split.without_concept, layer, unit);

    const int avg_len = corpus.replication_length();
    const int col = model.config.unit_offset(layer) + unit;
    thread_local ForwardWorkspace ws;
    thread_local std::vector<double> means;
    means.resize(static_cast<std::size_t>(model.config.total_units()));

    switch (mode) {
        case SelectivityMode::replicate: {
            if (alignment.aligned.empty()) {
                out.degenerate = true;
                out.note = "empty S+: no aligned concepts";
                return out;
            }
            double sum = 0.0;
            for (const AlignedConcept& a : alignment.aligned) {
                sum += doa(model, layer, unit, a.term, avg_len, corpus.alphabet);
            }
            out.mu_plus = sum / static_cast<double>(alignment.aligned.size());
            break;
        }
        case SelectivityMode::one_instance: {
            if (alignment.aligned.empty()) {
                out.degenerate = true;
                out.note = "empty S+: no aligned concepts";
                return out;
            }
            double sum = 0.0;
            for (const AlignedConcept& a : alignment.aligned) {
                const std::vector<int> encoded = corpus.alphabet.encode(a.term.text);
                forward_pass(model, encoded, ws, means);
                sum += means[static_cast<std::size_t>(col)];
            }
            out.mu_plus = sum / static_cast<double>(alignment.aligned.size());
            break;
        }
        case SelectivityMode::inclusion: {
            if (split.with_concept.empty()) {
                out.degenerate = true;
                out.note = "empty S+: no corpus sentence contains an aligned concept";
                return out;
            }
            out.mu_plus = mean_over_ids(cache, split.with_concept, layer, unit);
            break;
        }
        case SelectivityMode::random: {
            // Size-matched to the inclusion set so mode comparisons are fair;
            // sampled without replacement from the whole corpus.
            const std::size_t want = split.with_concept.size();
            if (want == 0) {
                out.degenerate = true;
                out.note = "empty S+: inclusion set is empty, nothing to size-match";
                return out;
            }
            std::vector<int> ids(corpus.sentences.size());
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(layer),
                                static_cast<std::uint64_t>(unit)));
            rng.shuffle(ids);
            ids.resize(std::min(want, ids.size()));
            out.mu_plus = mean_over_ids(cache, ids, layer, unit);
            break;
        }
    }

    const double denom = out.act_max - out.act_min;
    out.value = denom > 0.0 ? (out.mu_plus - out.mu_minus) / denom : 0.0;
    return out;
}

SelectivityBreakdown selectivity(const Model& model, const Corpus& corpus,
                                 const UnitAlignment& alignment, SelectivityMode mode,
                                 std::uint64_t seed) {
    const ActivationCache cache = ActivationCache::compute(model, corpus);
    return selectivity(model, corpus, cache, alignment, mode, seed);
}

std::vector<SelectivitySummaryRow> selectivity_summary(
    const Model& model, const Corpus& corpus, const ActivationCache& cache,
    const std::vector<UnitAlignment>& alignments, const std::vector<SelectivityMode>& modes,
    const std::vector<int>& m_values, std::uint64_t seed, int threads) {
    for (int m : m_values) {
        if (m < 1) throw std::invalid_argument("selectivity_summary: m values must be >= 1");
    }

    struct Task {
        std::size_t alignment_index;
        std::size_t mode_index;
        std::size_t m_index;
    };
    std::vector<Task> tasks;
    tasks.reserve(alignments.size() * modes.size() * m_values.size());
    for (std::size_t a = 0; a < alignments.size(); ++a) {
        for (std::size_t mo = 0; mo < modes.size(); ++mo) {
            for (std::size_t mi = 0; mi < m_values.size(); ++mi) tasks.push_back({a, mo, mi});
        }
    }

    std::vector<SelectivityBreakdown> results(tasks.size());
    parallel_for(tasks.size(), threads, [&](std::size_t t) {
        const Task& task = tasks[t];
        const UnitAlignment& full = alignments[task.alignment_index];
        UnitAlignment sliced;
        sliced.layer = full.layer;
        sliced.unit = full.unit;
        sliced.top_sentences = full.top_sentences;
        const std::size_t m = static_cast<std::size_t>(m_values[task.m_index]);
        sliced.aligned.assign(full.aligned.begin(),
                              full.aligned.begin() +
                                  static_cast<std::ptrdiff_t>(std::min(m, full.aligned.size())));
        results[t] = selectivity(model, corpus, cache, sliced, modes[task.mode_index], seed);
    });

    int num_layers = 0;
    for (const UnitAlignment& a : alignments) num_layers = std::max(num_layers, a.layer + 1);

    std::vector<SelectivitySummaryRow> rows;
    for (int layer = 0; layer < num_layers; ++layer) {
        for (std::size_t mo = 0; mo < modes.size(); ++mo) {
            for (std::size_t mi = 0; mi < m_values.size(); ++mi) {
                SelectivitySummaryRow row;
                row.layer = layer;
                row.mode = modes[mo];
                row.m = m_values[mi];
                std::vector<double> vals;
                for (std::size_t t = 0; t < tasks.size(); ++t) {
                    if (tasks[t].mode_index != mo || tasks[t].m_index != mi) continue;
                    if (alignments[tasks[t].alignment_index].layer != layer) continue;
                    if (results[t].degenerate) {
                        ++row.degenerate;
                    } else {
                        vals.push_back(results[t].value);
                    }
                }
                row.units = static_cast<int>(vals.size());
                if (!vals.empty()) {
                    double sum = 0.0;
                    for (double v : vals) sum += v;
                    row.mean = sum / static_cast<double>(vals.size());
                    if (vals.size() > 1) {
                        double sq = 0.0;
                        for (double v : vals) sq += (v - row.mean) * (v - row.mean);
                        row.variance = sq / static_cast<double>(vals.size() - 1);
                    }
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

Sentence occlude(const Sentence& sentence, const Concept& term, const Alphabet& alphabet) {
    const EncodedConcept needle(term, alphabet);
    const std::vector<int> starts =
        find_occurrences(sentence.encoded, needle, alphabet.index_of(' '));
    if (starts.empty()) return sentence;

    Sentence out = sentence;
    const int len = static_cast<int>(needle.needle.size());
    for (int start : starts) {
        for (int k = 0; k < len; ++k) {
            out.encoded[static_cast<std::size_t>(start + k)] = alphabet.dummy_index();
        }
    }
    // keep text in step with the encoded form; dummies render as kDummyChar
    out.text = alphabet.decode(out.encoded);
    return out;
}

std::vector<double> per_sentence_losses(const Model& model, const Corpus& corpus, int threads) {
    if (!corpus.labeled()) throw std::invalid_argument("per_sentence_losses: corpus must be labeled");
    std::vector<double> losses(corpus.sentences.size());
    parallel_for(corpus.sentences.size(), threads, [&](std::size_t i) {
        thread_local ForwardWorkspace ws;
        std::vector<double> logits;
        forward_pass(model, corpus.sentences[i].encoded, ws, {}, &logits);
        losses[i] = loss_from_logits(logits, *corpus.sentences[i].label);
    });
    return losses;
}

double delta_expected_loss(const Model& model, const Corpus& corpus, const Concept& term,
                           const std::vector<double>& base_losses) {
    if (!corpus.labeled()) throw std::invalid_argument("delta_expected_loss: corpus must be labeled");
    if (base_losses.size() != corpus.sentences.size()) {
        throw std::invalid_argument("delta_expected_loss: base loss table size mismatch");
    }

    // Occlusion is the identity on sentences without the concept, so only
    // containing sentences contribute; the difference is exactly zero when
    // the concept appears nowhere.
    const EncodedConcept needle(term, corpus.alphabet);
    const int space = corpus.alphabet.index_of(' ');
    thread_local ForwardWorkspace ws;
    std::vector<double> logits;

    double diff_sum = 0.0;
    for (const Sentence& s : corpus.sentences) {
        if (!contains(s.encoded, needle, space)) continue;
        const Sentence occluded = occlude(s, term, corpus.alphabet);
        forward_pass(model, occluded.encoded, ws, {}, &logits);
        diff_sum += loss_from_logits(logits, *s.label) - base_losses[static_cast<std::size_t>(s.id)];
    }
    return diff_sum / static_cast<double>(corpus.sentences.size());
}

double delta_expected_loss(const Model& model, const Corpus& corpus, const Concept& term) {
    return delta_expected_loss(model, corpus, term, per_sentence_losses(model, corpus));
}

std::vector<std::pair<Concept, int>> concept_distribution(
    const std::vector<UnitAlignment>& alignments, int layer, int top_n) {
    std::map<Concept, int, decltype(&concept_order)> counts(&concept_order);
    for (const UnitAlignment& ua : alignments) {
        if (ua.layer != layer) continue;
        for (const AlignedConcept& a : ua.aligned) ++counts[a.term];
    }
    std::vector<std::pair<Concept, int>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return concept_order(a.first, b.first);
    });
    if (top_n > 0 && ranked.size() > static_cast<std::size_t>(top_n)) {
        ranked.resize(static_cast<std::size_t>(top_n));
    }
    return ranked;
}

const std::array<const char*, 6>& granularity_bin_names() {
    static const std::array<const char*, 6> names = {"morpheme", "word",    "phrase2",
                                                     "phrase3",  "phrase4", "phrase5"};
    return names;
}

std::array<int, 6> granularity_histogram(const std::vector<UnitAlignment>& alignments, int layer) {
    std::array<int, 6> bins{};
    for (const UnitAlignment& ua : alignments) {
        if (ua.layer != layer) continue;
        for (const AlignedConcept& a : ua.aligned) {
            switch (a.term.kind) {
                case ConceptKind::morpheme: ++bins[0]; break;
                case ConceptKind::word: ++bins[1]; break;
                case ConceptKind::phrase: ++bins[static_cast<std::size_t>(a.term.ngram)]; break;
            }
        }
    }
    return bins;
}

double interpretable_ratio(const ActivationCache& cache,
                           const std::vector<UnitAlignment>& alignments, int layer) {
    int total = 0;
    int interpretable = 0;
    for (const UnitAlignment& ua : alignments) {
        if (ua.layer != layer) continue;
        ++total;
        // aligned is sorted by DoA, so the front is the best candidate probe
        if (!ua.aligned.empty() &&
            cache.corpus_max(ua.layer, ua.unit) < ua.aligned.front().doa) {
            ++interpretable;
        }
    }
    if (total == 0) throw std::invalid_argument("interpretable_ratio: no units in layer");
    return static_cast<double>(interpretable) / static_cast<double>(total);
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson: size mismatch");
    if (xs.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

CorrelationReport correlation_report(const Model& model, const Corpus& corpus,
                                     const std::vector<UnitAlignment>& alignments, int layer,
                                     int threads) {
    std::map<Concept, int, decltype(&concept_order)> counts(&concept_order);
    for (const UnitAlignment& ua : alignments) {
        if (ua.layer != layer) continue;
        for (const AlignedConcept& a : ua.aligned) ++counts[a.term];
    }
    if (counts.size() < 2) {
        throw std::invalid_argument("correlation_report: fewer than 2 distinct aligned concepts");
    }

    CorrelationReport report;
    report.table.reserve(counts.size());
    for (const auto& [term, units] : counts) {
        ConceptStats stats;
        stats.term = term;
        stats.units_aligned = units;
        report.table.push_back(std::move(stats));
    }

    const std::vector<double> base_losses = per_sentence_losses(model, corpus, threads);
    const int space = corpus.alphabet.index_of(' ');
    parallel_for(report.table.size(), threads, [&](std::size_t i) {
        ConceptStats& stats = report.table[i];
        const EncodedConcept needle(stats.term, corpus.alphabet);
        int freq = 0;
        for (const Sentence& s : corpus.sentences) {
            if (contains(s.encoded, needle, space)) ++freq;
        }
        stats.doc_freq = freq;
        stats.del = delta_expected_loss(model, corpus, stats.term, base_losses);
    });

    std::vector<double> units_axis, freq_axis, del_axis;
    units_axis.reserve(report.table.size());
    for (const ConceptStats& s : report.table) {
        units_axis.push_back(static_cast<double>(s.units_aligned));
        freq_axis.push_back(static_cast<double>(s.doc_freq));
        del_axis.push_back(s.del);
    }
    report.r_docfreq = pearson(units_axis, freq_axis);
    report.r_del = pearson(units_axis, del_axis);
    return report;
}

std::vector<OccurrenceRow> occurrence_across_layers(const std::vector<UnitAlignment>& alignments,
                                                    int num_layers) {
    std::map<Concept, std::vector<int>, decltype(&concept_order)> per_layer(&concept_order);
    for (const UnitAlignment& ua : alignments) {
        for (const AlignedConcept& a : ua.aligned) {
            auto it = per_layer.find(a.term);
            if (it == per_layer.end()) {
                it = per_layer.emplace(a.term, std::vector<int>(static_cast<std::size_t>(num_layers), 0))
                         .first;
            }
            it->second.at(static_cast<std::size_t>(ua.layer)) += 1;
        }
    }

    std::vector<OccurrenceRow> rows;
    rows.reserve(per_layer.size());
    for (const auto& [term, layer_counts] : per_layer) {
        OccurrenceRow row;
        row.term = term;
        row.per_layer_units = layer_counts;
        for (int c : layer_counts) {
            if (c > 0) ++row.layer_count;
            row.unit_count += c;
        }
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const OccurrenceRow& a, const OccurrenceRow& b) {
        if (a.layer_count != b.layer_count) return a.layer_count > b.layer_count;
        if (a.unit_count != b.unit_count) return a.unit_count > b.unit_count;
        return concept_order(a.term, b.term);
    });
    return rows;
}

}  // namespace unitscope
