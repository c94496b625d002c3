#include "unitscope/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "unitscope/evaluation.hpp"
#include "unitscope/parallel.hpp"

namespace unitscope {

void AlignmentConfig::validate() const {
    if (k < 1) throw std::invalid_argument("alignment config: k must be >= 1");
    if (m < 1) throw std::invalid_argument("alignment config: m must be >= 1");
    if (max_n < 1 || max_n > 5) throw std::invalid_argument("alignment config: max_n must be in 1..5");
}

void check_unit(const ModelConfig& config, int layer, int unit) {
    if (layer < 0 || layer >= config.num_layers()) {
        throw std::out_of_range("layer index " + std::to_string(layer) + " out of range");
    }
    if (unit < 0 || unit >= config.layer_units(layer)) {
        throw std::out_of_range("unit index " + std::to_string(unit) + " out of range for layer " +
                                std::to_string(layer));
    }
}

ActivationCache ActivationCache::compute(const Model& model, const Corpus& corpus, int threads) {
    const ModelConfig& cfg = model.config;
    ActivationCache cache;
    cache.stride_ = static_cast<std::size_t>(cfg.total_units());
    cache.offsets_.resize(cfg.layers.size());
    for (int l = 0; l < cfg.num_layers(); ++l) {
        cache.offsets_[static_cast<std::size_t>(l)] = cfg.unit_offset(l);
    }
    cache.values_.assign(cache.stride_ * corpus.sentences.size(), 0.0);

    parallel_for(corpus.sentences.size(), threads, [&](std::size_t i) {
        thread_local ForwardWorkspace ws;
        std::span<double> row{cache.values_.data() + i * cache.stride_, cache.stride_};
        forward_pass(model, corpus.sentences[i].encoded, ws, row);
    });
    return cache;
}

double ActivationCache::corpus_max(int layer, int unit) const {
    const std::size_t col = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(layer)] + unit);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values_.size() / stride_; ++i) {
        best = std::max(best, values_[i * stride_ + col]);
    }
    return best;
}

double ActivationCache::corpus_min(int layer, int unit) const {
    const std::size_t col = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(layer)] + unit);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values_.size() / stride_; ++i) {
        best = std::min(best, values_[i * stride_ + col]);
    }
    return best;
}

namespace {

std::vector<ScoredSentence> select_top_k(std::vector<ScoredSentence> all, int k) {
    std::sort(all.begin(), all.end(), [](const ScoredSentence& a, const ScoredSentence& b) {
        if (a.activation != b.activation) return a.activation > b.activation;
        return a.id < b.id;
    });
    if (static_cast<std::size_t>(k) < all.size()) all.resize(static_cast<std::size_t>(k));
    return all;
}

}  // namespace

std::vector<ScoredSentence> top_k_sentences(const ActivationCache& cache, const Corpus& corpus,
                                            int layer, int unit, int k) {
    if (k < 1) throw std::invalid_argument("top_k_sentences: k must be >= 1");
    std::vector<ScoredSentence> all;
    all.reserve(corpus.sentences.size());
    for (const Sentence& s : corpus.sentences) {
        all.push_back({s.id, cache.at(s.id, layer, unit)});
    }
    return select_top_k(std::move(all), k);
}

std::vector<ScoredSentence> top_k_sentences(const Model& model, const Corpus& corpus, int layer,
                                            int unit, int k) {
    check_unit(model.config, layer, unit);
    if (k < 1) throw std::invalid_argument("top_k_sentences: k must be >= 1");
    const int offset = model.config.unit_offset(layer) + unit;
    std::vector<double> means(static_cast<std::size_t>(model.config.total_units()));
    ForwardWorkspace ws;
    std::vector<ScoredSentence> all;
    all.reserve(corpus.sentences.size());
    for (const Sentence& s : corpus.sentences) {
        forward_pass(model, s.encoded, ws, means);
        all.push_back({s.id, means[static_cast<std::size_t>(offset)]});
    }
    return select_top_k(std::move(all), k);
}

double doa(const Model& model, int layer, int unit, const Concept& term, int avg_len,
           const Alphabet& alphabet) {
    check_unit(model.config, layer, unit);
    const ReplicatedSentence probe = replicate(term, avg_len, alphabet);
    thread_local ForwardWorkspace ws;
    thread_local std::vector<double> means;
    means.resize(static_cast<std::size_t>(model.config.total_units()));
    forward_pass(model, probe.encoded, ws, means);
    return means[static_cast<std::size_t>(model.config.unit_offset(layer) + unit)];
}

namespace {

void sort_aligned(std::vector<AlignedConcept>& scored) {
    std::sort(scored.begin(), scored.end(), [](const AlignedConcept& a, const AlignedConcept& b) {
        if (a.doa != b.doa) return a.doa > b.doa;
        return concept_order(a.term, b.term);
    });
}

std::vector<std::string> top_sentence_texts(const Corpus& corpus,
                                            const std::vector<ScoredSentence>& top) {
    std::vector<std::string> texts;
    texts.reserve(top.size());
    for (const ScoredSentence& t : top) {
        texts.push_back(corpus.sentences[static_cast<std::size_t>(t.id)].text);
    }
    return texts;
}

}  // namespace

UnitAlignment align_unit(const Model& model, const Corpus& corpus, int layer, int unit,
                         const AlignmentConfig& cfg, const MorphemeLexicon* lexicon) {
    cfg.validate();
    check_unit(model.config, layer, unit);
    if (corpus.sentences.empty()) throw std::invalid_argument("align_unit: empty corpus");

    UnitAlignment out;
    out.layer = layer;
    out.unit = unit;
    out.top_sentences = top_k_sentences(model, corpus, layer, unit, cfg.k);

    const CandidateSet candidates = extract_candidates(top_sentence_texts(corpus, out.top_sentences),
                                                       layer, unit, cfg.max_n, lexicon);
    const int avg_len = corpus.replication_length();
    std::vector<AlignedConcept> scored;
    scored.reserve(candidates.concepts.size());
    for (const Concept& c : candidates.concepts) {
        scored.push_back({c, doa(model, layer, unit, c, avg_len, corpus.alphabet)});
    }
    sort_aligned(scored);
    if (scored.size() > static_cast<std::size_t>(cfg.m)) {
        scored.resize(static_cast<std::size_t>(cfg.m));
    }
    out.aligned = std::move(scored);
    return out;
}

std::vector<UnitAlignment> align_all(const Model& model, const Corpus& corpus,
                                     const AlignmentConfig& cfg, int threads,
                                     const MorphemeLexicon* lexicon) {
    const ModelConfig& mc = model.config;
    std::vector<std::pair<int, int>> units;
    units.reserve(static_cast<std::size_t>(mc.total_units()));
    for (int l = 0; l < mc.num_layers(); ++l) {
        for (int u = 0; u < mc.layer_units(l); ++u) units.emplace_back(l, u);
    }
    return align_units(model, corpus, cfg, units, threads, lexicon);
}

std::vector<UnitAlignment> align_units(const Model& model, const Corpus& corpus,
                                       const AlignmentConfig& cfg,
                                       const std::vector<std::pair<int, int>>& units, int threads,
                                       const MorphemeLexicon* lexicon) {
    cfg.validate();
    if (corpus.sentences.empty()) throw std::invalid_argument("align_units: empty corpus");
    const ModelConfig& mc = model.config;
    for (const auto& [l, u] : units) check_unit(mc, l, u);
    const ActivationCache cache = ActivationCache::compute(model, corpus, threads);
    const int avg_len = corpus.replication_length();

    // Phase 1: candidate sets per unit from the cached top-k lists.
    std::vector<UnitAlignment> result(units.size());
    std::vector<CandidateSet> candidate_sets(units.size());
    parallel_for(units.size(), threads, [&](std::size_t i) {
        const auto [layer, unit] = units[i];
        UnitAlignment& ua = result[i];
        ua.layer = layer;
        ua.unit = unit;
        ua.top_sentences = top_k_sentences(cache, corpus, layer, unit, cfg.k);
        candidate_sets[i] = extract_candidates(top_sentence_texts(corpus, ua.top_sentences), layer,
                                               unit, cfg.max_n, lexicon);
    });

    // Phase 2: each distinct term is replicated and forwarded once; the
    // pass yields a_u for every unit simultaneously.
    std::vector<Concept> probe_concepts;
    {
        std::set<Concept, decltype(&concept_order)> distinct(&concept_order);
        for (const CandidateSet& cs : candidate_sets) {
            distinct.insert(cs.concepts.begin(), cs.concepts.end());
        }
        probe_concepts.assign(distinct.begin(), distinct.end());
    }
    const std::size_t total_units = static_cast<std::size_t>(mc.total_units());
    std::vector<double> probe_means(probe_concepts.size() * total_units);
    parallel_for(probe_concepts.size(), threads, [&](std::size_t i) {
        thread_local ForwardWorkspace ws;
        const ReplicatedSentence probe = replicate(probe_concepts[i], avg_len, corpus.alphabet);
        forward_pass(model, probe.encoded, ws,
                     {probe_means.data() + i * total_units, total_units});
    });
    std::map<Concept, std::size_t, decltype(&concept_order)> probe_index(&concept_order);
    for (std::size_t i = 0; i < probe_concepts.size(); ++i) probe_index.emplace(probe_concepts[i], i);

    // Phase 3: rank per unit.
    parallel_for(units.size(), threads, [&](std::size_t i) {
        const auto [layer, unit] = units[i];
        const std::size_t col = static_cast<std::size_t>(mc.unit_offset(layer) + unit);
        std::vector<AlignedConcept> scored;
        scored.reserve(candidate_sets[i].concepts.size());
        for (const Concept& c : candidate_sets[i].concepts) {
            const std::size_t row = probe_index.at(c);
            scored.push_back({c, probe_means[row * total_units + col]});
        }
        sort_aligned(scored);
        if (scored.size() > static_cast<std::size_t>(cfg.m)) {
            scored.resize(static_cast<std::size_t>(cfg.m));
        }
        result[i].aligned = std::move(scored);
    });
    return result;
}

double doa_pmi(const std::vector<int>& top_k_ids, const Corpus& corpus, const Concept& term) {
    if (top_k_ids.empty()) throw std::invalid_argument("doa_pmi: empty top-k set");
    const EncodedConcept needle(term, corpus.alphabet);
    const int space = corpus.alphabet.index_of(' ');

    const std::size_t total = corpus.sentences.size();
    std::size_t doc_freq = 0;
    for (const Sentence& s : corpus.sentences) {
        if (contains(s.encoded, needle, space)) ++doc_freq;
    }
    std::size_t top_freq = 0;
    for (int id : top_k_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= total) {
            throw std::out_of_range("doa_pmi: sentence id out of range");
        }
        if (contains(corpus.sentences[static_cast<std::size_t>(id)].encoded, needle, space)) {
            ++top_freq;
        }
    }
    if (doc_freq == 0 || top_freq == 0) return -std::numeric_limits<double>::infinity();

    const double p_u = static_cast<double>(top_k_ids.size()) / static_cast<double>(total);
    const double p_c = static_cast<double>(doc_freq) / static_cast<double>(total);
    const double p_uc = static_cast<double>(top_freq) / static_cast<double>(top_k_ids.size());
    return std::log(p_uc / (p_u * p_c));
}

double doa_occlusion(const Model& model, int layer, int unit,
                     const std::vector<const Sentence*>& top_sentences, const Concept& term,
                     const Alphabet& alphabet) {
    check_unit(model.config, layer, unit);
    const int col = model.config.unit_offset(layer) + unit;
    thread_local ForwardWorkspace ws;
    thread_local std::vector<double> means;
    means.resize(static_cast<std::size_t>(model.config.total_units()));

    double drop_sum = 0.0;
    int containing = 0;
    for (const Sentence* s : top_sentences) {
        if (!concept_in_sentence(*s, term, alphabet)) continue;
        ++containing;
        forward_pass(model, s->encoded, ws, means);
        const double base = means[static_cast<std::size_t>(col)];
        const Sentence occluded = occlude(*s, term, alphabet);
        forward_pass(model, occluded.encoded, ws, means);
        drop_sum += base - means[static_cast<std::size_t>(col)];
    }
    if (containing == 0) return 0.0;
    return drop_sum / static_cast<double>(containing);
}

Interpretability unit_interpretability(const Model& model, const Corpus& corpus, int layer,
                                       int unit, const CandidateSet& candidates, int avg_len) {
    check_unit(model.config, layer, unit);
    if (candidates.concepts.empty()) {
        throw std::invalid_argument("unit_interpretability: empty candidate set");
    }

    const int col = model.config.unit_offset(layer) + unit;
    thread_local ForwardWorkspace ws;
    thread_local std::vector<double> means;
    means.resize(static_cast<std::size_t>(model.config.total_units()));

    double corpus_max = -std::numeric_limits<double>::infinity();
    for (const Sentence& s : corpus.sentences) {
        forward_pass(model, s.encoded, ws, means);
        corpus_max = std::max(corpus_max, means[static_cast<std::size_t>(col)]);
    }
    double probe_max = -std::numeric_limits<double>::infinity();
    for (const Concept& c : candidates.concepts) {
        probe_max = std::max(probe_max, doa(model, layer, unit, c, avg_len, corpus.alphabet));
    }
    return corpus_max < probe_max ? Interpretability::interpretable
                                  : Interpretability::non_interpretable;
}

}  // namespace unitscope
