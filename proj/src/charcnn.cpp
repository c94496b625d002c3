#include "unitscope/charcnn.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "unitscope/rng.hpp"

namespace unitscope {

void ModelConfig::validate() const {
    if (vocab_size < 1) throw std::invalid_argument("model config: vocab_size must be >= 1");
    if (dummy_index < 0 || dummy_index >= vocab_size) {
        throw std::invalid_argument("model config: dummy_index out of range");
    }
    if (embedding_dim < 1) throw std::invalid_argument("model config: embedding_dim must be >= 1");
    if (layers.empty()) throw std::invalid_argument("model config: at least one conv layer required");
    for (const ConvLayerConfig& l : layers) {
        if (l.units < 1) throw std::invalid_argument("model config: layer units must be >= 1");
        if (l.filter_width < 1 || l.filter_width % 2 == 0) {
            throw std::invalid_argument("model config: filter_width must be odd and >= 1");
        }
    }
    if (num_classes < 2) throw std::invalid_argument("model config: num_classes must be >= 2");
}

int ModelConfig::total_units() const {
    int n = 0;
    for (const ConvLayerConfig& l : layers) n += l.units;
    return n;
}

int ModelConfig::unit_offset(int layer) const {
    int n = 0;
    for (int l = 0; l < layer; ++l) n += layers[static_cast<std::size_t>(l)].units;
    return n;
}

namespace {

// Flat parameter segments in a fixed order: embedding, conv weights/bias per
// layer, classifier weights/bias.
struct ParamLayout {
    struct Segment {
        std::size_t offset;
        std::size_t count;
    };
    Segment embedding;
    std::vector<Segment> conv_weights;
    std::vector<Segment> conv_bias;
    Segment cls_weights;
    Segment cls_bias;
    std::size_t total;

    explicit ParamLayout(const ModelConfig& cfg) {
        std::size_t off = 0;
        auto seg = [&off](std::size_t count) {
            Segment s{off, count};
            off += count;
            return s;
        };
        embedding = seg(static_cast<std::size_t>(cfg.vocab_size) *
                        static_cast<std::size_t>(cfg.embedding_dim));
        for (int l = 0; l < cfg.num_layers(); ++l) {
            const auto& lc = cfg.layers[static_cast<std::size_t>(l)];
            conv_weights.push_back(seg(static_cast<std::size_t>(lc.units) *
                                       static_cast<std::size_t>(cfg.layer_input_channels(l)) *
                                       static_cast<std::size_t>(lc.filter_width)));
            conv_bias.push_back(seg(static_cast<std::size_t>(lc.units)));
        }
        const int last_units = cfg.layers.back().units;
        cls_weights = seg(static_cast<std::size_t>(cfg.num_classes) *
                          static_cast<std::size_t>(last_units));
        cls_bias = seg(static_cast<std::size_t>(cfg.num_classes));
        total = off;
    }
};

template <typename ModelT, typename Fn>
decltype(auto) with_parameter(ModelT& model, std::size_t index, Fn&& fn) {
    const ParamLayout layout(model.config);
    if (index >= layout.total) throw std::out_of_range("parameter index out of range");
    if (index < layout.embedding.count) return fn(model.embedding[index]);
    for (std::size_t l = 0; l < model.conv.size(); ++l) {
        const auto& w = layout.conv_weights[l];
        if (index >= w.offset && index < w.offset + w.count) {
            return fn(model.conv[l].weights[index - w.offset]);
        }
        const auto& b = layout.conv_bias[l];
        if (index >= b.offset && index < b.offset + b.count) {
            return fn(model.conv[l].bias[index - b.offset]);
        }
    }
    const auto& cw = layout.cls_weights;
    if (index >= cw.offset && index < cw.offset + cw.count) {
        return fn(model.classifier_weights[index - cw.offset]);
    }
    return fn(model.classifier_bias[index - layout.cls_bias.offset]);
}

}  // namespace

std::size_t Model::parameter_count() const { return ParamLayout(config).total; }

double Model::get_parameter(std::size_t index) const {
    return with_parameter(*this, index, [](const double& v) { return v; });
}

void Model::set_parameter(std::size_t index, double value) {
    with_parameter(*this, index, [value](double& v) {
        v = value;
        return 0.0;
    });
}

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Model m;
    m.config = config;
    Rng rng(seed);

    // unit-RMS rows keep early conv pre-activations at a workable scale
    const double emb_bound = std::sqrt(3.0 / config.embedding_dim);
    m.embedding.resize(static_cast<std::size_t>(config.vocab_size) *
                       static_cast<std::size_t>(config.embedding_dim));
    for (double& v : m.embedding) v = rng.uniform(-emb_bound, emb_bound);
    // dummy row carries no signal, ever
    const std::size_t dummy_off = static_cast<std::size_t>(config.dummy_index) *
                                  static_cast<std::size_t>(config.embedding_dim);
    std::fill_n(m.embedding.begin() + static_cast<std::ptrdiff_t>(dummy_off),
                config.embedding_dim, 0.0);

    m.conv.resize(config.layers.size());
    for (int l = 0; l < config.num_layers(); ++l) {
        const auto& lc = config.layers[static_cast<std::size_t>(l)];
        const int cin = config.layer_input_channels(l);
        const double bound = std::sqrt(6.0 / (static_cast<double>(cin) * lc.filter_width +
                                              static_cast<double>(lc.units) * lc.filter_width));
        auto& layer = m.conv[static_cast<std::size_t>(l)];
        layer.weights.resize(static_cast<std::size_t>(lc.units) * static_cast<std::size_t>(cin) *
                             static_cast<std::size_t>(lc.filter_width));
        for (double& v : layer.weights) v = rng.uniform(-bound, bound);
        layer.bias.assign(static_cast<std::size_t>(lc.units), 0.0);
    }

    const int last_units = config.layers.back().units;
    const double cls_bound = std::sqrt(6.0 / (last_units + config.num_classes));
    m.classifier_weights.resize(static_cast<std::size_t>(config.num_classes) *
                                static_cast<std::size_t>(last_units));
    for (double& v : m.classifier_weights) v = rng.uniform(-cls_bound, cls_bound);
    m.classifier_bias.assign(static_cast<std::size_t>(config.num_classes), 0.0);
    return m;
}

std::span<const double> ForwardWorkspace::layer_map(int layer) const {
    return maps[static_cast<std::size_t>(layer) + 1];
}

std::span<const double> ForwardWorkspace::unit_row(int layer, int unit) const {
    const auto& m = maps[static_cast<std::size_t>(layer) + 1];
    return std::span<const double>(m.data() + static_cast<std::size_t>(unit) * length,
                                   static_cast<std::size_t>(length));
}

namespace {

// Runs embedding + conv stack; leaves maps filled. Padded scratch holds the
// previous layer's map with filter_width/2 zeros on both sides.
void run_stack(const Model& model, std::span<const int> encoded, ForwardWorkspace& ws) {
    const ModelConfig& cfg = model.config;
    const int length = static_cast<int>(encoded.size());
    if (length < 1) throw std::invalid_argument("forward: sentence must have length >= 1");

    ws.length = length;
    ws.maps.resize(static_cast<std::size_t>(cfg.num_layers()) + 1);

    auto& emb_map = ws.maps[0];
    const int dim = cfg.embedding_dim;
    emb_map.assign(static_cast<std::size_t>(dim) * static_cast<std::size_t>(length), 0.0);
    for (int p = 0; p < length; ++p) {
        const int idx = encoded[static_cast<std::size_t>(p)];
        if (idx < 0 || idx >= cfg.vocab_size) {
            throw std::invalid_argument("forward: encoded index out of vocabulary range");
        }
        const double* row = model.embedding.data() +
                            static_cast<std::size_t>(idx) * static_cast<std::size_t>(dim);
        for (int d = 0; d < dim; ++d) {
            emb_map[static_cast<std::size_t>(d) * static_cast<std::size_t>(length) +
                    static_cast<std::size_t>(p)] = row[d];
        }
    }

    for (int l = 0; l < cfg.num_layers(); ++l) {
        const auto& lc = cfg.layers[static_cast<std::size_t>(l)];
        const int cin = cfg.layer_input_channels(l);
        const int cout = lc.units;
        const int width = lc.filter_width;
        const int pad = width / 2;
        const int padded_len = length + 2 * pad;

        const auto& prev = ws.maps[static_cast<std::size_t>(l)];
        ws.padded.assign(static_cast<std::size_t>(cin) * static_cast<std::size_t>(padded_len), 0.0);
        for (int i = 0; i < cin; ++i) {
            std::memcpy(ws.padded.data() + static_cast<std::size_t>(i) * padded_len + pad,
                        prev.data() + static_cast<std::size_t>(i) * length,
                        sizeof(double) * static_cast<std::size_t>(length));
        }

        auto& out = ws.maps[static_cast<std::size_t>(l) + 1];
        out.assign(static_cast<std::size_t>(cout) * static_cast<std::size_t>(length), 0.0);
        const auto& layer = model.conv[static_cast<std::size_t>(l)];
        for (int o = 0; o < cout; ++o) {
            double* orow = out.data() + static_cast<std::size_t>(o) * length;
            for (int i = 0; i < cin; ++i) {
                const double* w =
                    layer.weights.data() +
                    (static_cast<std::size_t>(o) * cin + static_cast<std::size_t>(i)) * width;
                const double* prow = ws.padded.data() + static_cast<std::size_t>(i) * padded_len;
                for (int t = 0; t < width; ++t) {
                    const double wt = w[t];
                    if (wt == 0.0) continue;
                    const double* src = prow + t;
                    for (int p = 0; p < length; ++p) orow[p] += wt * src[p];
                }
            }
            const double bias = layer.bias[static_cast<std::size_t>(o)];
            for (int p = 0; p < length; ++p) {
                const double v = orow[p] + bias;
                orow[p] = v > 0.0 ? v : 0.0;
            }
        }
    }
}

void pool_last_layer(const Model& model, ForwardWorkspace& ws) {
    const ModelConfig& cfg = model.config;
    const int units = cfg.layers.back().units;
    const int length = ws.length;
    const auto& last = ws.maps.back();
    ws.pooled.assign(static_cast<std::size_t>(units), 0.0);
    for (int u = 0; u < units; ++u) {
        const double* row = last.data() + static_cast<std::size_t>(u) * length;
        if (cfg.pooling == Pooling::mean) {
            double sum = 0.0;
            for (int p = 0; p < length; ++p) sum += row[p];
            ws.pooled[static_cast<std::size_t>(u)] = sum / static_cast<double>(length);
        } else {
            double best = row[0];
            for (int p = 1; p < length; ++p) best = std::max(best, row[p]);
            ws.pooled[static_cast<std::size_t>(u)] = best;
        }
    }
}

void compute_logits(const Model& model, const ForwardWorkspace& ws, std::vector<double>& logits) {
    const ModelConfig& cfg = model.config;
    const int units = cfg.layers.back().units;
    logits.assign(static_cast<std::size_t>(cfg.num_classes), 0.0);
    for (int c = 0; c < cfg.num_classes; ++c) {
        double acc = model.classifier_bias[static_cast<std::size_t>(c)];
        const double* w = model.classifier_weights.data() + static_cast<std::size_t>(c) * units;
        for (int u = 0; u < units; ++u) acc += w[u] * ws.pooled[static_cast<std::size_t>(u)];
        logits[static_cast<std::size_t>(c)] = acc;
    }
}

thread_local ForwardWorkspace tl_workspace;

}  // namespace

void forward_pass(const Model& model, std::span<const int> encoded, ForwardWorkspace& ws,
                  std::span<double> mean_out, std::vector<double>* logits_out) {
    run_stack(model, encoded, ws);
    const ModelConfig& cfg = model.config;
    if (!mean_out.empty()) {
        if (static_cast<int>(mean_out.size()) != cfg.total_units()) {
            throw std::invalid_argument("forward_pass: mean_out has wrong size");
        }
        const double inv_len = 1.0 / static_cast<double>(ws.length);
        std::size_t g = 0;
        for (int l = 0; l < cfg.num_layers(); ++l) {
            const auto& map = ws.maps[static_cast<std::size_t>(l) + 1];
            for (int u = 0; u < cfg.layer_units(l); ++u, ++g) {
                const double* row = map.data() + static_cast<std::size_t>(u) * ws.length;
                double sum = 0.0;
                for (int p = 0; p < ws.length; ++p) sum += row[p];
                mean_out[g] = sum * inv_len;
            }
        }
    }
    if (logits_out) {
        pool_last_layer(model, ws);
        compute_logits(model, ws, *logits_out);
    }
}

ForwardResult forward(const Model& model, const Sentence& sentence) {
    ForwardResult result;
    ForwardWorkspace ws;
    forward_pass(model, sentence.encoded, ws, {}, &result.logits);

    const ModelConfig& cfg = model.config;
    result.activations.reserve(static_cast<std::size_t>(cfg.total_units()));
    for (int l = 0; l < cfg.num_layers(); ++l) {
        for (int u = 0; u < cfg.layer_units(l); ++u) {
            ActivationRecord rec;
            rec.layer = l;
            rec.unit = u;
            const auto row = ws.unit_row(l, u);
            rec.values.assign(row.begin(), row.end());
            result.activations.push_back(std::move(rec));
        }
    }
    return result;
}

double mean_unit_activation(const ActivationRecord& record) {
    if (record.values.empty()) {
        throw std::invalid_argument("mean_unit_activation: empty activation record");
    }
    double sum = 0.0;
    for (double v : record.values) sum += v;
    return sum / static_cast<double>(record.values.size());
}

double loss_from_logits(std::span<const double> logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size())) {
        throw std::invalid_argument("loss: label out of range");
    }
    double max_logit = logits[0];
    for (double v : logits) max_logit = std::max(max_logit, v);
    double sum_exp = 0.0;
    for (double v : logits) sum_exp += std::exp(v - max_logit);
    return std::log(sum_exp) - (logits[static_cast<std::size_t>(label)] - max_logit);
}

double loss(const Model& model, const Sentence& sentence, int label) {
    std::vector<double> logits;
    ForwardWorkspace& ws = tl_workspace;
    forward_pass(model, sentence.encoded, ws, {}, &logits);
    return loss_from_logits(logits, label);
}

double loss(const Model& model, const Sentence& sentence) {
    if (!sentence.label) throw std::invalid_argument("loss: sentence has no label");
    return loss(model, sentence, *sentence.label);
}

void Gradients::resize_for(const Model& model) { values.assign(model.parameter_count(), 0.0); }

void Gradients::zero() { std::fill(values.begin(), values.end(), 0.0); }

namespace {

struct BackwardScratch {
    std::vector<std::vector<double>> dmaps;
    std::vector<double> dlogits;
    std::vector<double> dpooled;
    std::vector<double> padded_prev;
};

thread_local BackwardScratch tl_backward;

}  // namespace

double loss_gradients(const Model& model, std::span<const int> encoded, int label,
                      Gradients& grads, int* predicted) {
    const ModelConfig& cfg = model.config;
    const ParamLayout layout(cfg);
    if (grads.values.size() != layout.total) {
        throw std::invalid_argument("loss_gradients: gradient buffer not sized for model");
    }

    ForwardWorkspace& ws = tl_workspace;
    BackwardScratch& bs = tl_backward;
    std::vector<double> logits;
    forward_pass(model, encoded, ws, {}, &logits);
    const double value = loss_from_logits(logits, label);
    const int length = ws.length;

    if (predicted) {
        int best = 0;
        for (int c = 1; c < cfg.num_classes; ++c) {
            if (logits[static_cast<std::size_t>(c)] > logits[static_cast<std::size_t>(best)]) best = c;
        }
        *predicted = best;
    }

    // softmax cross-entropy: dlogits = p - onehot(label)
    bs.dlogits.assign(logits.size(), 0.0);
    double max_logit = logits[0];
    for (double v : logits) max_logit = std::max(max_logit, v);
    double sum_exp = 0.0;
    for (double v : logits) sum_exp += std::exp(v - max_logit);
    for (std::size_t c = 0; c < logits.size(); ++c) {
        bs.dlogits[c] = std::exp(logits[c] - max_logit) / sum_exp;
    }
    bs.dlogits[static_cast<std::size_t>(label)] -= 1.0;

    const int last_units = cfg.layers.back().units;
    double* g_cls_w = grads.values.data() + layout.cls_weights.offset;
    double* g_cls_b = grads.values.data() + layout.cls_bias.offset;
    bs.dpooled.assign(static_cast<std::size_t>(last_units), 0.0);
    for (int c = 0; c < cfg.num_classes; ++c) {
        const double dl = bs.dlogits[static_cast<std::size_t>(c)];
        g_cls_b[c] += dl;
        const double* w = model.classifier_weights.data() + static_cast<std::size_t>(c) * last_units;
        double* gw = g_cls_w + static_cast<std::size_t>(c) * last_units;
        for (int u = 0; u < last_units; ++u) {
            gw[u] += dl * ws.pooled[static_cast<std::size_t>(u)];
            bs.dpooled[static_cast<std::size_t>(u)] += dl * w[u];
        }
    }

    // gradient w.r.t. the last post-ReLU map, through the pooling head
    const int num_layers = cfg.num_layers();
    bs.dmaps.resize(static_cast<std::size_t>(num_layers) + 1);
    auto& dlast = bs.dmaps[static_cast<std::size_t>(num_layers)];
    dlast.assign(static_cast<std::size_t>(last_units) * static_cast<std::size_t>(length), 0.0);
    const auto& last_map = ws.maps[static_cast<std::size_t>(num_layers)];
    for (int u = 0; u < last_units; ++u) {
        double* drow = dlast.data() + static_cast<std::size_t>(u) * length;
        const double du = bs.dpooled[static_cast<std::size_t>(u)];
        if (cfg.pooling == Pooling::mean) {
            const double share = du / static_cast<double>(length);
            for (int p = 0; p < length; ++p) drow[p] = share;
        } else {
            const double* row = last_map.data() + static_cast<std::size_t>(u) * length;
            int arg = 0;
            for (int p = 1; p < length; ++p) {
                if (row[p] > row[arg]) arg = p;
            }
            drow[arg] = du;
        }
    }

    for (int l = num_layers - 1; l >= 0; --l) {
        const auto& lc = cfg.layers[static_cast<std::size_t>(l)];
        const int cin = cfg.layer_input_channels(l);
        const int cout = lc.units;
        const int width = lc.filter_width;
        const int pad = width / 2;
        const int padded_len = length + 2 * pad;

        // ReLU gate applied in place on this layer's upstream gradient
        auto& dout = bs.dmaps[static_cast<std::size_t>(l) + 1];
        const auto& out_map = ws.maps[static_cast<std::size_t>(l) + 1];
        for (std::size_t i = 0; i < dout.size(); ++i) {
            if (out_map[i] <= 0.0) dout[i] = 0.0;
        }

        const auto& prev = ws.maps[static_cast<std::size_t>(l)];
        bs.padded_prev.assign(static_cast<std::size_t>(cin) * static_cast<std::size_t>(padded_len),
                              0.0);
        for (int i = 0; i < cin; ++i) {
            std::memcpy(bs.padded_prev.data() + static_cast<std::size_t>(i) * padded_len + pad,
                        prev.data() + static_cast<std::size_t>(i) * length,
                        sizeof(double) * static_cast<std::size_t>(length));
        }

        auto& dprev = bs.dmaps[static_cast<std::size_t>(l)];
        dprev.assign(static_cast<std::size_t>(cin) * static_cast<std::size_t>(padded_len), 0.0);

        const auto& layer = model.conv[static_cast<std::size_t>(l)];
        double* g_w = grads.values.data() + layout.conv_weights[static_cast<std::size_t>(l)].offset;
        double* g_b = grads.values.data() + layout.conv_bias[static_cast<std::size_t>(l)].offset;
        for (int o = 0; o < cout; ++o) {
            const double* drow = dout.data() + static_cast<std::size_t>(o) * length;
            double bias_grad = 0.0;
            for (int p = 0; p < length; ++p) bias_grad += drow[p];
            g_b[o] += bias_grad;
            for (int i = 0; i < cin; ++i) {
                const std::size_t w_off =
                    (static_cast<std::size_t>(o) * cin + static_cast<std::size_t>(i)) * width;
                const double* w = layer.weights.data() + w_off;
                double* gw = g_w + w_off;
                const double* prow = bs.padded_prev.data() + static_cast<std::size_t>(i) * padded_len;
                double* dprow = dprev.data() + static_cast<std::size_t>(i) * padded_len;
                for (int t = 0; t < width; ++t) {
                    double acc = 0.0;
                    const double* src = prow + t;
                    double* dst = dprow + t;
                    const double wt = w[t];
                    for (int p = 0; p < length; ++p) {
                        const double d = drow[p];
                        acc += d * src[p];
                        dst[p] += wt * d;
                    }
                    gw[t] += acc;
                }
            }
        }

        // strip the padding margins; interior gradient feeds the layer below
        std::vector<double>& dtrim = dprev;
        if (pad > 0) {
            for (int i = 0; i < cin; ++i) {
                std::memmove(dtrim.data() + static_cast<std::size_t>(i) * length,
                             dprev.data() + static_cast<std::size_t>(i) * padded_len + pad,
                             sizeof(double) * static_cast<std::size_t>(length));
            }
            dtrim.resize(static_cast<std::size_t>(cin) * static_cast<std::size_t>(length));
        }
    }

    // embedding rows; the dummy row stays frozen
    double* g_emb = grads.values.data() + layout.embedding.offset;
    const auto& demb = bs.dmaps[0];
    const int dim = cfg.embedding_dim;
    for (int p = 0; p < length; ++p) {
        const int idx = encoded[static_cast<std::size_t>(p)];
        if (idx == cfg.dummy_index) continue;
        double* grow = g_emb + static_cast<std::size_t>(idx) * dim;
        for (int d = 0; d < dim; ++d) {
            grow[d] += demb[static_cast<std::size_t>(d) * length + static_cast<std::size_t>(p)];
        }
    }
    return value;
}

void TrainConfig::validate() const {
    // zero is allowed so a no-op update stays expressible
    if (!(learning_rate >= 0.0)) {
        throw std::invalid_argument("train config: learning_rate must be >= 0");
    }
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
    if (optimizer != "sgd") throw std::invalid_argument("train config: unknown optimizer '" + optimizer + "'");
}

std::vector<EpochStats> train(Model& model, const Corpus& corpus, const TrainConfig& cfg) {
    cfg.validate();
    if (!corpus.labeled()) throw std::invalid_argument("train: corpus must be fully labeled");
    if (corpus.num_classes != model.config.num_classes) {
        throw std::invalid_argument("train: corpus has " + std::to_string(corpus.num_classes) +
                                    " classes but model expects " +
                                    std::to_string(model.config.num_classes));
    }

    const std::size_t n = corpus.sentences.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    Rng rng(cfg.seed);
    Gradients grads;
    grads.resize_for(model);
    const ParamLayout layout(model.config);

    std::vector<EpochStats> stats;
    stats.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t correct = 0;

        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            grads.zero();
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const Sentence& s = corpus.sentences[order[k]];
                int predicted = -1;
                batch_loss += loss_gradients(model, s.encoded, *s.label, grads, &predicted);
                if (predicted == *s.label) ++correct;
            }
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("train: diverged (non-finite loss) at epoch " +
                                         std::to_string(epoch) + ", batch starting at sample " +
                                         std::to_string(start));
            }
            loss_sum += batch_loss;

            const double scale = cfg.learning_rate / static_cast<double>(end - start);
            auto apply = [&](std::vector<double>& params, const ParamLayout::Segment& seg) {
                const double* g = grads.values.data() + seg.offset;
                for (std::size_t i = 0; i < seg.count; ++i) params[i] -= scale * g[i];
            };
            apply(model.embedding, layout.embedding);
            for (std::size_t l = 0; l < model.conv.size(); ++l) {
                apply(model.conv[l].weights, layout.conv_weights[l]);
                apply(model.conv[l].bias, layout.conv_bias[l]);
            }
            apply(model.classifier_weights, layout.cls_weights);
            apply(model.classifier_bias, layout.cls_bias);
        }

        EpochStats es;
        es.epoch = epoch;
        es.loss = loss_sum / static_cast<double>(n);
        es.accuracy = static_cast<double>(correct) / static_cast<double>(n);
        stats.push_back(es);
    }
    return stats;
}

namespace {

std::uint32_t crc32(const unsigned char* data, std::size_t size) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < size; ++i) {
        crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFu;
}

constexpr char kMagic[6] = {'U', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint16_t kVersion = 1;

void append_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f64(std::string& out, double v) { append_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t read_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

double read_f64(const unsigned char* p) { return std::bit_cast<double>(read_u64(p)); }

nlohmann::json config_to_json(const ModelConfig& cfg) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : cfg.layers) layers.push_back({l.units, l.filter_width});
    return {{"vocab_size", cfg.vocab_size},
            {"dummy_index", cfg.dummy_index},
            {"embedding_dim", cfg.embedding_dim},
            {"layers", layers},
            {"num_classes", cfg.num_classes},
            {"pooling", cfg.pooling == Pooling::mean ? "mean" : "max"}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.dummy_index = j.at("dummy_index").get<int>();
    cfg.embedding_dim = j.at("embedding_dim").get<int>();
    for (const auto& l : j.at("layers")) {
        cfg.layers.push_back({l.at(0).get<int>(), l.at(1).get<int>()});
    }
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.pooling = j.at("pooling").get<std::string>() == "max" ? Pooling::max : Pooling::mean;
    return cfg;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& alphabet_chars,
                     const std::string& path) {
    nlohmann::json header = config_to_json(model.config);
    header["alphabet"] = alphabet_chars;
    const std::string header_text = header.dump();

    std::string buf;
    buf.append(kMagic, sizeof(kMagic));
    append_u16(buf, kVersion);
    append_u64(buf, header_text.size());
    buf += header_text;

    const std::size_t count = model.parameter_count();
    append_u64(buf, count);
    buf.reserve(buf.size() + count * 8 + 4);
    auto append_all = [&buf](const std::vector<double>& v) {
        for (double x : v) append_f64(buf, x);
    };
    append_all(model.embedding);
    for (const auto& layer : model.conv) {
        append_all(layer.weights);
        append_all(layer.bias);
    }
    append_all(model.classifier_weights);
    append_all(model.classifier_bias);

    const std::uint32_t crc =
        crc32(reinterpret_cast<const unsigned char*>(buf.data()), buf.size());
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((crc >> (8 * i)) & 0xFF));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const std::size_t min_size = sizeof(kMagic) + 2 + 8 + 8 + 4;
    if (buf.size() < min_size) throw std::runtime_error("checkpoint truncated: " + path);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data());

    if (std::memcmp(p, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path);
    }
    const std::uint16_t version = read_u16(p + sizeof(kMagic));
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 " in " + path);
    }

    const std::uint32_t stored_crc = read_u32(p + buf.size() - 4);
    const std::uint32_t actual_crc = crc32(p, buf.size() - 4);
    if (stored_crc != actual_crc) {
        throw std::runtime_error("checkpoint checksum mismatch (corrupted file): " + path);
    }

    std::size_t off = sizeof(kMagic) + 2;
    const std::uint64_t header_len = read_u64(p + off);
    off += 8;
    if (off + header_len + 8 + 4 > buf.size()) {
        throw std::runtime_error("checkpoint truncated: " + path);
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.substr(off, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint header is not valid JSON: " + std::string(e.what()));
    }
    off += header_len;

    Checkpoint ck;
    ck.model.config = config_from_json(header);
    ck.model.config.validate();
    ck.alphabet_chars = header.at("alphabet").get<std::string>();

    const std::uint64_t count = read_u64(p + off);
    off += 8;
    const ParamLayout layout(ck.model.config);
    if (count != layout.total) {
        throw std::runtime_error("checkpoint parameter count does not match its config");
    }
    if (off + count * 8 + 4 != buf.size()) {
        throw std::runtime_error("checkpoint truncated: " + path);
    }

    Model& m = ck.model;
    m.embedding.resize(layout.embedding.count);
    m.conv.resize(m.config.layers.size());
    for (int l = 0; l < m.config.num_layers(); ++l) {
        m.conv[static_cast<std::size_t>(l)].weights.resize(
            layout.conv_weights[static_cast<std::size_t>(l)].count);
        m.conv[static_cast<std::size_t>(l)].bias.resize(
            layout.conv_bias[static_cast<std::size_t>(l)].count);
    }
    m.classifier_weights.resize(layout.cls_weights.count);
    m.classifier_bias.resize(layout.cls_bias.count);

    auto read_all = [&](std::vector<double>& v) {
        for (double& x : v) {
            x = read_f64(p + off);
            off += 8;
        }
    };
    read_all(m.embedding);
    for (auto& layer : m.conv) {
        read_all(layer.weights);
        read_all(layer.bias);
    }
    read_all(m.classifier_weights);
    read_all(m.classifier_bias);
    return ck;
}

}  // namespace unitscope
