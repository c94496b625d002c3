#include "unitscope/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "unitscope/evaluation.hpp"
#include "unitscope/parallel.hpp"
#include "unitscope/rng.hpp"
#include "unitscope/text.hpp"

namespace unitscope {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// seed tags so each stochastic component gets an independent stream
constexpr std::uint64_t kSeedModelInit = 0x01;
constexpr std::uint64_t kSeedTrain = 0x02;
constexpr std::uint64_t kSeedSelectivity = 0x03;

std::string out_path(const RunConfig& config, const std::string& name) {
    return (fs::path(config.out_dir) / name).string();
}

std::ofstream open_report(const std::string& path) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    return out;
}

void log_line(const std::string& msg) { std::cout << msg << "\n"; }

// Collects per-report failures so one broken report does not silently stop
// the rest; the command exits nonzero listing every failure.
class ReportRunner {
public:
    void run(const std::string& name, const std::function<void()>& fn) {
        try {
            fn();
            log_line("wrote " + name);
        } catch (const std::exception& e) {
            failures_.push_back(name + ": " + e.what());
            log_line("FAILED " + name + ": " + e.what());
        }
    }
    void finish(const std::string& command) const {
        if (failures_.empty()) return;
        std::string msg = command + ": " + std::to_string(failures_.size()) + " report(s) failed:";
        for (const std::string& f : failures_) msg += "\n  " + f;
        throw std::runtime_error(msg);
    }

private:
    std::vector<std::string> failures_;
};

}  // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

PreparedCorpus prepare_corpus(const RunConfig& config) {
    PreparedCorpus out;
    if (!config.lexicon_path.empty()) {
        out.lexicon = load_morpheme_lexicon(config.resolve_relative(config.lexicon_path));
    }
    if (!config.synthetic_spec_path.empty()) {
        const SyntheticSpec spec =
            load_synthetic_spec(config.resolve_relative(config.synthetic_spec_path));
        SyntheticCorpus synth = generate_synthetic(spec, config.seed);
        out.corpus = std::move(synth.corpus);
        out.plants = std::move(synth.plants);
        out.synthetic = true;
    } else {
        out.corpus = load_corpus(config.resolve_relative(config.corpus_path), Alphabet(),
                                 config.num_classes);
    }
    return out;
}

ModelConfig model_config_for(const RunConfig& config, const Corpus& corpus) {
    ModelConfig mc;
    mc.vocab_size = corpus.alphabet.vocab_size();
    mc.dummy_index = corpus.alphabet.dummy_index();
    mc.embedding_dim = config.embedding_dim;
    mc.layers = config.layers;
    mc.num_classes = config.num_classes > 0 ? config.num_classes : corpus.num_classes;
    mc.pooling = config.pooling;
    return mc;
}

namespace {

json concept_to_json(const Concept& c) { return {{"text", c.text}, {"kind", c.kind_label()}}; }

Concept concept_from_json(const json& j) {
    const auto parsed =
        concept_from_label(j.at("text").get<std::string>(), j.at("kind").get<std::string>());
    if (!parsed) throw std::runtime_error("alignments file: bad concept kind");
    return *parsed;
}

Model load_checkpoint_for(const RunConfig& config, const Corpus& corpus) {
    const std::string path = config.resolved_checkpoint();
    Checkpoint ck = load_checkpoint(path);
    if (ck.alphabet_chars != corpus.alphabet.characters()) {
        throw std::runtime_error("checkpoint/config mismatch: checkpoint alphabet differs from "
                                 "the corpus alphabet (" + path + ")");
    }
    const ModelConfig expected = model_config_for(config, corpus);
    if (!(ck.model.config == expected)) {
        throw std::runtime_error(
            "checkpoint/config mismatch: model shapes in " + path +
            " do not match the [model] section (embedding_dim/layers/pooling/classes)");
    }
    return std::move(ck.model);
}

void write_plants_json(const std::vector<Plant>& plants, const std::string& path) {
    json arr = json::array();
    for (const Plant& p : plants) {
        arr.push_back({{"class", p.class_index}, {"text", p.text}, {"probability", p.probability}});
    }
    std::ofstream out = open_report(path);
    out << arr.dump(2) << "\n";
}

}  // namespace

void write_alignments_json(const AlignmentsFile& file, const std::string& path) {
    json root;
    root["k"] = file.config.k;
    root["m"] = file.config.m;
    root["max_n"] = file.config.max_n;
    root["m_stored"] = file.m_stored;
    root["avg_len"] = file.avg_len;
    root["corpus_sentences"] = file.corpus_sentences;
    root["layer_units"] = file.layer_units;
    json units = json::array();
    for (const UnitAlignment& ua : file.units) {
        json top = json::array();
        for (const ScoredSentence& s : ua.top_sentences) {
            top.push_back({{"id", s.id}, {"a", s.activation}});
        }
        json aligned = json::array();
        for (const AlignedConcept& a : ua.aligned) {
            json c = concept_to_json(a.term);
            c["doa"] = a.doa;
            aligned.push_back(std::move(c));
        }
        units.push_back({{"layer", ua.layer},
                         {"unit", ua.unit},
                         {"top", std::move(top)},
                         {"aligned", std::move(aligned)}});
    }
    root["units"] = std::move(units);
    std::ofstream out = open_report(path);
    out << root.dump(2) << "\n";
}

AlignmentsFile read_alignments_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("missing alignments file: " + path + " (run `align` first)");
    }
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw std::runtime_error("cannot parse alignments file " + path + ": " + e.what());
    }

    AlignmentsFile file;
    file.config.k = root.at("k").get<int>();
    file.config.m = root.at("m").get<int>();
    file.config.max_n = root.at("max_n").get<int>();
    file.m_stored = root.at("m_stored").get<int>();
    file.avg_len = root.at("avg_len").get<int>();
    file.corpus_sentences = root.at("corpus_sentences").get<int>();
    file.layer_units = root.at("layer_units").get<std::vector<int>>();
    for (const json& ju : root.at("units")) {
        UnitAlignment ua;
        ua.layer = ju.at("layer").get<int>();
        ua.unit = ju.at("unit").get<int>();
        for (const json& jt : ju.at("top")) {
            ua.top_sentences.push_back({jt.at("id").get<int>(), jt.at("a").get<double>()});
        }
        for (const json& ja : ju.at("aligned")) {
            ua.aligned.push_back({concept_from_json(ja), ja.at("doa").get<double>()});
        }
        file.units.push_back(std::move(ua));
    }
    return file;
}

void cmd_train(const RunConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);
    const PreparedCorpus prepared = prepare_corpus(config);
    const Corpus& corpus = prepared.corpus;
    log_line("corpus: " + std::to_string(corpus.size()) + " sentences, " +
             std::to_string(corpus.num_classes) + " classes, avg length " +
             format_double(corpus.avg_char_length));

    if (prepared.synthetic) {
        save_corpus(corpus, out_path(config, "corpus.tsv"));
        write_plants_json(prepared.plants, out_path(config, "plants.json"));
        log_line("wrote " + out_path(config, "corpus.tsv"));
    }

    Model model = Model::init(model_config_for(config, corpus),
                              derive_seed(config.seed, kSeedModelInit, 0));
    TrainConfig tc;
    tc.learning_rate = config.learning_rate;
    tc.batch_size = config.batch_size;
    tc.epochs = config.epochs;
    tc.seed = derive_seed(config.seed, kSeedTrain, 0);

    const std::vector<EpochStats> stats = train(model, corpus, tc);
    {
        std::ofstream log = open_report(out_path(config, "train_log.csv"));
        log << "epoch,loss,accuracy\n";
        for (const EpochStats& s : stats) {
            log << s.epoch << ',' << format_double(s.loss) << ',' << format_double(s.accuracy)
                << "\n";
            log_line("epoch " + std::to_string(s.epoch) + ": loss " + format_double(s.loss) +
                     ", accuracy " + format_double(s.accuracy));
        }
    }

    save_checkpoint(model, corpus.alphabet.characters(), config.resolved_checkpoint());
    log_line("wrote " + config.resolved_checkpoint());
}

void cmd_align(const RunConfig& config, std::optional<int> layer_filter) {
    config.validate();
    const PreparedCorpus prepared = prepare_corpus(config);
    const Corpus& corpus = prepared.corpus;
    const Model model = load_checkpoint_for(config, corpus);
    const ModelConfig& mc = model.config;

    if (layer_filter && (*layer_filter < 0 || *layer_filter >= mc.num_layers())) {
        throw std::runtime_error("--layer " + std::to_string(*layer_filter) +
                                 " out of range: model has " + std::to_string(mc.num_layers()) +
                                 " layers");
    }

    // store enough concepts per unit for the evaluation M-sweep
    AlignmentConfig store_cfg = config.alignment;
    for (int m : config.m_sweep) store_cfg.m = std::max(store_cfg.m, m);

    std::vector<std::pair<int, int>> units;
    for (int l = 0; l < mc.num_layers(); ++l) {
        if (layer_filter && *layer_filter != l) continue;
        for (int u = 0; u < mc.layer_units(l); ++u) units.emplace_back(l, u);
    }

    AlignmentsFile file;
    file.config = config.alignment;
    file.m_stored = store_cfg.m;
    file.avg_len = corpus.replication_length();
    file.corpus_sentences = corpus.size();
    for (int l = 0; l < mc.num_layers(); ++l) file.layer_units.push_back(mc.layer_units(l));
    file.units =
        align_units(model, corpus, store_cfg, units, config.threads, prepared.lexicon_ptr());

    write_alignments_json(file, out_path(config, "alignments.json"));
    log_line("wrote " + out_path(config, "alignments.json"));

    for (int l = 0; l < mc.num_layers(); ++l) {
        if (layer_filter && *layer_filter != l) continue;
        const std::string csv_path = out_path(config, "alignment_layer" + std::to_string(l) + ".csv");
        std::ofstream out = open_report(csv_path);
        out << "layer,unit,rank,concept,kind,doa,top_ids,top_activations\n";
        for (const UnitAlignment& ua : file.units) {
            if (ua.layer != l) continue;
            std::string ids, acts;
            for (std::size_t i = 0; i < ua.top_sentences.size(); ++i) {
                if (i) {
                    ids.push_back('|');
                    acts.push_back('|');
                }
                ids += std::to_string(ua.top_sentences[i].id);
                acts += format_double(ua.top_sentences[i].activation);
            }
            const int m_report = std::min<int>(config.alignment.m,
                                               static_cast<int>(ua.aligned.size()));
            for (int r = 0; r < m_report; ++r) {
                const AlignedConcept& a = ua.aligned[static_cast<std::size_t>(r)];
                out << l << ',' << ua.unit << ',' << r << ',' << '"' << a.term.text << '"' << ','
                    << a.term.kind_label() << ',' << format_double(a.doa) << ',' << ids << ','
                    << acts << "\n";
            }
        }
        log_line("wrote " + csv_path);
    }
}

namespace {

std::vector<UnitAlignment> slice_alignments(const std::vector<UnitAlignment>& units, int m) {
    std::vector<UnitAlignment> sliced = units;
    for (UnitAlignment& ua : sliced) {
        if (ua.aligned.size() > static_cast<std::size_t>(m)) {
            ua.aligned.resize(static_cast<std::size_t>(m));
        }
    }
    return sliced;
}

struct MetricComparison {
    // per final-layer unit mean text length (code points) of the top-M set
    std::vector<double> eq1_lengths;
    std::vector<double> pmi_lengths;
    double mean_diff = 0.0;  // mean(pmi - eq1) over units
};

double mean_text_length(const std::vector<AlignedConcept>& picks) {
    double sum = 0.0;
    for (const AlignedConcept& a : picks) {
        sum += static_cast<double>(utf8_length(a.term.text));
    }
    return picks.empty() ? 0.0 : sum / static_cast<double>(picks.size());
}

}  // namespace

void cmd_evaluate(const RunConfig& config) {
    config.validate();
    const PreparedCorpus prepared = prepare_corpus(config);
    const Corpus& corpus = prepared.corpus;
    const Model model = load_checkpoint_for(config, corpus);
    const ModelConfig& mc = model.config;

    const AlignmentsFile file = read_alignments_json(out_path(config, "alignments.json"));
    if (file.corpus_sentences != corpus.size()) {
        throw std::runtime_error("alignments.json was computed on a different corpus (" +
                                 std::to_string(file.corpus_sentences) + " vs " +
                                 std::to_string(corpus.size()) + " sentences)");
    }
    const int num_layers = mc.num_layers();
    const int final_layer = num_layers - 1;
    const int headline_m = config.alignment.m;
    const std::vector<UnitAlignment> headline = slice_alignments(file.units, headline_m);

    log_line("computing activation cache (" + std::to_string(corpus.size()) + " sentences x " +
             std::to_string(mc.total_units()) + " units)");
    const ActivationCache cache = ActivationCache::compute(model, corpus, config.threads);

    const bool with_del = !config.skip_del && corpus.labeled();
    ReportRunner reports;

    // selectivity: modes x layers x M
    reports.run(out_path(config, "selectivity.csv"), [&] {
        const std::vector<SelectivityMode> modes = {
            SelectivityMode::replicate, SelectivityMode::one_instance, SelectivityMode::inclusion,
            SelectivityMode::random};
        std::vector<int> m_values = config.m_sweep;
        if (std::find(m_values.begin(), m_values.end(), headline_m) == m_values.end()) {
            m_values.push_back(headline_m);
        }
        std::sort(m_values.begin(), m_values.end());
        for (int m : m_values) {
            if (m > file.m_stored) {
                throw std::runtime_error("m_sweep value " + std::to_string(m) +
                                         " exceeds stored alignment depth " +
                                         std::to_string(file.m_stored) + "; re-run align");
            }
        }
        const std::vector<SelectivitySummaryRow> rows =
            selectivity_summary(model, corpus, cache, file.units, modes, m_values,
                                derive_seed(config.seed, kSeedSelectivity, 0), config.threads);
        std::ofstream out = open_report(out_path(config, "selectivity.csv"));
        out << "layer,mode,m,mean,variance,units,degenerate\n";
        for (const SelectivitySummaryRow& r : rows) {
            out << r.layer << ',' << selectivity_mode_name(r.mode) << ',' << r.m << ','
                << format_double(r.mean) << ',' << format_double(r.variance) << ',' << r.units
                << ',' << r.degenerate << "\n";
        }
    });

    // concept distribution per layer
    for (int l = 0; l < num_layers; ++l) {
        const std::string name = out_path(config, "distribution_layer" + std::to_string(l) + ".csv");
        reports.run(name, [&, l] {
            const auto ranked = concept_distribution(headline, l, 30);
            std::ofstream out = open_report(name);
            out << "rank,concept,kind,units\n";
            for (std::size_t i = 0; i < ranked.size(); ++i) {
                out << i << ',' << '"' << ranked[i].first.text << '"' << ','
                    << ranked[i].first.kind_label() << ',' << ranked[i].second << "\n";
            }
        });
    }

    reports.run(out_path(config, "granularity.csv"), [&] {
        std::ofstream out = open_report(out_path(config, "granularity.csv"));
        out << "layer";
        for (const char* name : granularity_bin_names()) out << ',' << name;
        out << "\n";
        for (int l = 0; l < num_layers; ++l) {
            const std::array<int, 6> bins = granularity_histogram(headline, l);
            out << l;
            for (int b : bins) out << ',' << b;
            out << "\n";
        }
    });

    reports.run(out_path(config, "interpretability.csv"), [&] {
        std::ofstream out = open_report(out_path(config, "interpretability.csv"));
        out << "layer,interpretable_units,total_units,ratio\n";
        for (int l = 0; l < num_layers; ++l) {
            const double ratio = interpretable_ratio(cache, headline, l);
            int total = 0;
            for (const UnitAlignment& ua : headline) {
                if (ua.layer == l) ++total;
            }
            const int interpretable = static_cast<int>(std::lround(ratio * total));
            out << l << ',' << interpretable << ',' << total << ',' << format_double(ratio)
                << "\n";
        }
    });

    // correlations + DEL on the final layer
    std::optional<CorrelationReport> correlation;
    if (with_del) {
        reports.run(out_path(config, "correlation.csv"), [&] {
            correlation = correlation_report(model, corpus, headline, final_layer, config.threads);
            std::ofstream out = open_report(out_path(config, "correlation.csv"));
            out << "# layer = " << final_layer << "\n";
            out << "# r_docfreq = " << format_double(correlation->r_docfreq) << "\n";
            out << "# r_del = " << format_double(correlation->r_del) << "\n";
            out << "concept,kind,units_aligned,doc_freq,del\n";
            for (const ConceptStats& s : correlation->table) {
                out << '"' << s.term.text << '"' << ',' << s.term.kind_label() << ','
                    << s.units_aligned << ',' << s.doc_freq << ',' << format_double(s.del) << "\n";
            }
        });
        reports.run(out_path(config, "del.csv"), [&] {
            if (!correlation) throw std::runtime_error("correlation table unavailable");
            std::ofstream out = open_report(out_path(config, "del.csv"));
            out << "concept,kind,doc_freq,del\n";
            for (const ConceptStats& s : correlation->table) {
                out << '"' << s.term.text << '"' << ',' << s.term.kind_label() << ',' << s.doc_freq
                    << ',' << format_double(s.del) << "\n";
            }
        });
    } else {
        reports.run(out_path(config, "correlation.csv"), [&] {
            // without labels DEL is undefined; report frequency correlation only
            std::map<Concept, int, decltype(&concept_order)> counts(&concept_order);
            for (const UnitAlignment& ua : headline) {
                if (ua.layer != final_layer) continue;
                for (const AlignedConcept& a : ua.aligned) ++counts[a.term];
            }
            if (counts.size() < 2) {
                throw std::runtime_error("fewer than 2 distinct aligned concepts");
            }
            const int space = corpus.alphabet.index_of(' ');
            std::vector<double> units_axis, freq_axis;
            std::vector<std::pair<Concept, std::pair<int, int>>> rows;
            for (const auto& [c, n] : counts) {
                const EncodedConcept needle(c, corpus.alphabet);
                int freq = 0;
                for (const Sentence& s : corpus.sentences) {
                    if (contains(s.encoded, needle, space)) ++freq;
                }
                rows.push_back({c, {n, freq}});
                units_axis.push_back(n);
                freq_axis.push_back(freq);
            }
            const double r = pearson(units_axis, freq_axis);
            std::ofstream out = open_report(out_path(config, "correlation.csv"));
            out << "# layer = " << final_layer << "\n";
            out << "# r_docfreq = " << format_double(r) << "\n";
            out << "# del skipped (" << (config.skip_del ? "--skip-del" : "unlabeled corpus")
                << ")\n";
            out << "concept,kind,units_aligned,doc_freq\n";
            for (const auto& [c, nf] : rows) {
                out << '"' << c.text << '"' << ',' << c.kind_label() << ',' << nf.first << ','
                    << nf.second << "\n";
            }
        });
        log_line("skipped " + out_path(config, "del.csv") +
                 (config.skip_del ? " (--skip-del)" : " (unlabeled corpus)"));
    }

    reports.run(out_path(config, "occurrence.csv"), [&] {
        const std::vector<OccurrenceRow> rows = occurrence_across_layers(headline, num_layers);
        std::ofstream out = open_report(out_path(config, "occurrence.csv"));
        out << "concept,kind,layer_count,unit_count";
        for (int l = 0; l < num_layers; ++l) out << ",units_layer" << l;
        out << "\n";
        for (const OccurrenceRow& r : rows) {
            out << '"' << r.term.text << '"' << ',' << r.term.kind_label() << ',' << r.layer_count
                << ',' << r.unit_count;
            for (int c : r.per_layer_units) out << ',' << c;
            out << "\n";
        }
    });

    // alternative DoA metrics on the final layer: replication vs PMI vs occlusion
    MetricComparison comparison;
    reports.run(out_path(config, "doa_metrics.csv"), [&] {
        std::ofstream out = open_report(out_path(config, "doa_metrics.csv"));
        out << "layer,unit,metric,rank,concept,kind,score,text_chars\n";

        std::vector<const UnitAlignment*> final_units;
        for (const UnitAlignment& ua : file.units) {
            if (ua.layer == final_layer) final_units.push_back(&ua);
        }

        struct UnitRows {
            std::vector<AlignedConcept> eq1, pmi, occ;
        };
        std::vector<UnitRows> all_rows(final_units.size());
        parallel_for(final_units.size(), config.threads, [&](std::size_t i) {
            const UnitAlignment& ua = *final_units[i];
            UnitRows& rows = all_rows[i];

            rows.eq1.assign(ua.aligned.begin(),
                            ua.aligned.begin() + std::min<std::ptrdiff_t>(
                                                     headline_m,
                                                     static_cast<std::ptrdiff_t>(ua.aligned.size())));

            // same candidate pool the replication metric ranked
            std::vector<std::string> texts;
            std::vector<int> top_ids;
            std::vector<const Sentence*> top_sentences;
            for (const ScoredSentence& t : ua.top_sentences) {
                texts.push_back(corpus.sentences[static_cast<std::size_t>(t.id)].text);
                top_ids.push_back(t.id);
                top_sentences.push_back(&corpus.sentences[static_cast<std::size_t>(t.id)]);
            }
            const CandidateSet candidates = extract_candidates(
                texts, ua.layer, ua.unit, file.config.max_n, prepared.lexicon_ptr());

            std::vector<AlignedConcept> by_pmi, by_occ;
            for (const Concept& c : candidates.concepts) {
                by_pmi.push_back({c, doa_pmi(top_ids, corpus, c)});
                by_occ.push_back({c, doa_occlusion(model, ua.layer, ua.unit, top_sentences, c,
                                                   corpus.alphabet)});
            }
            auto rank = [&](std::vector<AlignedConcept>& v) {
                std::sort(v.begin(), v.end(), [](const AlignedConcept& a, const AlignedConcept& b) {
                    if (a.doa != b.doa) return a.doa > b.doa;
                    return concept_order(a.term, b.term);
                });
                if (v.size() > static_cast<std::size_t>(headline_m)) {
                    v.resize(static_cast<std::size_t>(headline_m));
                }
            };
            rank(by_pmi);
            rank(by_occ);
            rows.pmi = std::move(by_pmi);
            rows.occ = std::move(by_occ);
        });

        double diff_sum = 0.0;
        for (std::size_t i = 0; i < final_units.size(); ++i) {
            const UnitAlignment& ua = *final_units[i];
            const UnitRows& rows = all_rows[i];
            auto emit = [&](const char* metric, const std::vector<AlignedConcept>& picks) {
                for (std::size_t r = 0; r < picks.size(); ++r) {
                    out << ua.layer << ',' << ua.unit << ',' << metric << ',' << r << ',' << '"'
                        << picks[r].term.text << '"' << ',' << picks[r].term.kind_label() << ','
                        << format_double(picks[r].doa) << ',' << utf8_length(picks[r].term.text)
                        << "\n";
                }
            };
            emit("replication", rows.eq1);
            emit("pmi", rows.pmi);
            emit("occlusion", rows.occ);
            const double len_eq1 = mean_text_length(rows.eq1);
            const double len_pmi = mean_text_length(rows.pmi);
            comparison.eq1_lengths.push_back(len_eq1);
            comparison.pmi_lengths.push_back(len_pmi);
            diff_sum += len_pmi - len_eq1;
        }
        comparison.mean_diff =
            final_units.empty() ? 0.0 : diff_sum / static_cast<double>(final_units.size());
    });

    reports.run(out_path(config, "summary.json"), [&] {
        json summary;
        summary["corpus"] = {{"sentences", corpus.size()},
                             {"classes", corpus.num_classes},
                             {"avg_char_length", corpus.avg_char_length}};
        summary["alignment"] = {{"k", file.config.k},
                                {"m", headline_m},
                                {"max_n", file.config.max_n},
                                {"avg_len", file.avg_len}};

        json sel;
        const std::vector<SelectivityMode> modes = {
            SelectivityMode::replicate, SelectivityMode::one_instance, SelectivityMode::inclusion,
            SelectivityMode::random};
        const std::vector<SelectivitySummaryRow> rows = selectivity_summary(
            model, corpus, cache, file.units, modes, {headline_m},
            derive_seed(config.seed, kSeedSelectivity, 0), config.threads);
        // aggregate over layers, weighted by contributing units
        for (SelectivityMode mode : modes) {
            double weighted = 0.0;
            int total_units = 0;
            for (const SelectivitySummaryRow& r : rows) {
                if (r.mode != mode) continue;
                weighted += r.mean * r.units;
                total_units += r.units;
            }
            sel[selectivity_mode_name(mode)] =
                total_units > 0 ? weighted / total_units : 0.0;
        }
        summary["mean_selectivity"] = std::move(sel);

        json interp = json::array();
        for (int l = 0; l < num_layers; ++l) {
            interp.push_back(interpretable_ratio(cache, headline, l));
        }
        summary["interpretable_ratio"] = std::move(interp);

        if (correlation) {
            summary["correlation"] = {{"layer", final_layer},
                                      {"r_docfreq", correlation->r_docfreq},
                                      {"r_del", correlation->r_del},
                                      {"concepts", correlation->table.size()}};
        }
        summary["pmi_length_bias"] = {{"layer", final_layer},
                                      {"mean_len_replication",
                                       comparison.eq1_lengths.empty()
                                           ? 0.0
                                           : std::accumulate(comparison.eq1_lengths.begin(),
                                                             comparison.eq1_lengths.end(), 0.0) /
                                                 comparison.eq1_lengths.size()},
                                      {"mean_len_pmi",
                                       comparison.pmi_lengths.empty()
                                           ? 0.0
                                           : std::accumulate(comparison.pmi_lengths.begin(),
                                                             comparison.pmi_lengths.end(), 0.0) /
                                                 comparison.pmi_lengths.size()},
                                      {"mean_paired_diff", comparison.mean_diff}};

        std::ofstream out = open_report(out_path(config, "summary.json"));
        out << summary.dump(2) << "\n";
    });

    reports.finish("evaluate");
}

void cmd_cluster(const RunConfig& config) {
    config.validate();
    const PreparedCorpus prepared = prepare_corpus(config);
    const Corpus& corpus = prepared.corpus;

    const AlignmentsFile file = read_alignments_json(out_path(config, "alignments.json"));
    const int num_layers = static_cast<int>(file.layer_units.size());
    const int final_layer = num_layers - 1;
    const std::vector<UnitAlignment> headline = slice_alignments(file.units, config.alignment.m);

    EmbeddingTable table;
    std::string embeddings_note;
    if (!config.embeddings_path.empty()) {
        table = load_embeddings(config.resolve_relative(config.embeddings_path));
        embeddings_note = config.embeddings_path;
    } else {
        table = build_fallback_embeddings(corpus, config.fallback_dim, prepared.lexicon_ptr());
        embeddings_note = "fallback(ppmi, dim=" + std::to_string(table.dimension) + ")";
    }
    log_line("embeddings: " + embeddings_note);

    ReportRunner reports;
    std::optional<Dendrogram> dendrogram;

    reports.run(out_path(config, "dendrogram.json"), [&] {
        const auto ranked = concept_distribution(headline, final_layer, config.cluster_top_n);
        std::vector<Concept> top;
        for (const auto& [c, n] : ranked) top.push_back(c);
        dendrogram = hierarchical_cluster(top, table);

        json root;
        root["embeddings"] = embeddings_note;
        root["layer"] = final_layer;
        json leaves = json::array();
        for (const Concept& c : dendrogram->leaves) leaves.push_back(concept_to_json(c));
        root["leaves"] = std::move(leaves);
        json excluded = json::array();
        for (const Concept& c : dendrogram->excluded) excluded.push_back(concept_to_json(c));
        root["excluded_oov"] = std::move(excluded);
        json merges = json::array();
        for (const MergeStep& m : dendrogram->merges) {
            merges.push_back({{"a", m.a},
                              {"b", m.b},
                              {"distance", m.distance},
                              {"size", m.size},
                              {"inversion", m.inversion}});
        }
        root["merges"] = std::move(merges);
        root["leaf_order"] = dendrogram->leaf_order();
        std::ofstream out = open_report(out_path(config, "dendrogram.json"));
        out << root.dump(2) << "\n";
    });

    reports.run(out_path(config, "coalignment.csv"), [&] {
        if (!dendrogram) throw std::runtime_error("dendrogram unavailable");
        std::vector<Concept> order;
        for (int leaf : dendrogram->leaf_order()) {
            order.push_back(dendrogram->leaves[static_cast<std::size_t>(leaf)]);
        }
        const CoalignmentMatrix matrix = coalignment_matrix(headline, final_layer, order);
        std::ofstream out = open_report(out_path(config, "coalignment.csv"));
        out << "# embeddings = " << embeddings_note << "\n";
        out << "concept";
        for (const Concept& c : matrix.concepts) out << ',' << '"' << c.text << '"';
        out << "\n";
        for (std::size_t i = 0; i < matrix.concepts.size(); ++i) {
            out << '"' << matrix.concepts[i].text << '"';
            for (std::size_t j = 0; j < matrix.concepts.size(); ++j) {
                out << ',' << matrix.counts[i][j];
            }
            out << "\n";
        }
    });

    reports.run(out_path(config, "layer_distance.csv"), [&] {
        std::ofstream out = open_report(out_path(config, "layer_distance.csv"));
        out << "# embeddings = " << embeddings_note << "\n";
        out << "layer,mean_pairwise_distance,note\n";
        for (int l = 0; l < num_layers; ++l) {
            try {
                const double d = mean_pairwise_distance(headline, l, table);
                out << l << ',' << format_double(d) << ",\n";
            } catch (const std::exception&) {
                out << l << ",,no unit with 2+ embeddable concepts\n";
            }
        }
    });

    reports.run(out_path(config, "unique_concepts.csv"), [&] {
        const std::vector<int> counts = unique_concepts_per_layer(headline, num_layers);
        std::ofstream out = open_report(out_path(config, "unique_concepts.csv"));
        out << "layer,unique_concepts\n";
        for (int l = 0; l < num_layers; ++l) {
            out << l << ',' << counts[static_cast<std::size_t>(l)] << "\n";
        }
    });

    reports.finish("cluster");
}

void cmd_all(const RunConfig& config) {
    cmd_train(config);
    cmd_align(config);
    cmd_evaluate(config);
    cmd_cluster(config);
}

}  // namespace unitscope
