#include "unitscope/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "unitscope/text.hpp"

namespace unitscope {

namespace {

struct IniEntry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

std::vector<IniEntry> parse_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::vector<IniEntry> entries;
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": unterminated section header");
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected `key = value`");
        }
        entries.push_back({section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)), line_no});
    }
    return entries;
}

long long require_int(const IniEntry& e, const std::string& path, long long lo, long long hi) {
    long long v = 0;
    if (!parse_int(e.value, v) || v < lo || v > hi) {
        throw std::runtime_error(path + ":" + std::to_string(e.line) + ": " + e.key +
                                 " must be an integer in [" + std::to_string(lo) + ", " +
                                 std::to_string(hi) + "]");
    }
    return v;
}

double require_double(const IniEntry& e, const std::string& path) {
    double v = 0.0;
    if (!parse_double(e.value, v)) {
        throw std::runtime_error(path + ":" + std::to_string(e.line) + ": " + e.key +
                                 " must be a number");
    }
    return v;
}

bool require_bool(const IniEntry& e, const std::string& path) {
    if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
    if (e.value == "false" || e.value == "0" || e.value == "no") return false;
    throw std::runtime_error(path + ":" + std::to_string(e.line) + ": " + e.key +
                             " must be true or false");
}

// layers: comma-separated `units:width` pairs, e.g. "16:3, 32:3"
std::vector<ConvLayerConfig> parse_layers(const IniEntry& e, const std::string& path) {
    std::vector<ConvLayerConfig> layers;
    for (const std::string& part : split(e.value, ',')) {
        const std::string p = trim(part);
        if (p.empty()) continue;
        const std::size_t colon = p.find(':');
        long long units = 0, width = 0;
        if (colon == std::string::npos || !parse_int(p.substr(0, colon), units) ||
            !parse_int(p.substr(colon + 1), width)) {
            throw std::runtime_error(path + ":" + std::to_string(e.line) +
                                     ": layers must be `units:width` pairs, e.g. `16:3, 32:3`");
        }
        layers.push_back({static_cast<int>(units), static_cast<int>(width)});
    }
    if (layers.empty()) {
        throw std::runtime_error(path + ":" + std::to_string(e.line) + ": layers is empty");
    }
    return layers;
}

std::vector<int> parse_int_list(const IniEntry& e, const std::string& path) {
    std::vector<int> values;
    for (const std::string& part : split(e.value, ',')) {
        const std::string p = trim(part);
        if (p.empty()) continue;
        long long v = 0;
        if (!parse_int(p, v) || v < 1) {
            throw std::runtime_error(path + ":" + std::to_string(e.line) + ": " + e.key +
                                     " must be a comma-separated list of positive integers");
        }
        values.push_back(static_cast<int>(v));
    }
    if (values.empty()) {
        throw std::runtime_error(path + ":" + std::to_string(e.line) + ": " + e.key + " is empty");
    }
    return values;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    cfg.config_dir = std::filesystem::path(path).parent_path().string();

    for (const IniEntry& e : parse_ini(path)) {
        auto unknown = [&]() {
            return std::runtime_error(path + ":" + std::to_string(e.line) + ": unknown key '" +
                                      e.key + "' in section [" + e.section + "]");
        };
        if (e.section.empty()) {
            if (e.key == "seed") {
                cfg.seed = static_cast<std::uint64_t>(require_int(e, path, 0, (1LL << 62)));
            } else if (e.key == "threads") {
                cfg.threads = static_cast<int>(require_int(e, path, 1, 1024));
            } else if (e.key == "out") {
                cfg.out_dir = e.value;
            } else {
                throw unknown();
            }
        } else if (e.section == "corpus") {
            if (e.key == "path") cfg.corpus_path = e.value;
            else if (e.key == "synthetic") cfg.synthetic_spec_path = e.value;
            else if (e.key == "lexicon") cfg.lexicon_path = e.value;
            else if (e.key == "num_classes") cfg.num_classes = static_cast<int>(require_int(e, path, 0, 4096));
            else throw unknown();
        } else if (e.section == "model") {
            if (e.key == "embedding_dim") cfg.embedding_dim = static_cast<int>(require_int(e, path, 1, 4096));
            else if (e.key == "layers") cfg.layers = parse_layers(e, path);
            else if (e.key == "pooling") {
                if (e.value == "mean") cfg.pooling = Pooling::mean;
                else if (e.value == "max") cfg.pooling = Pooling::max;
                else throw std::runtime_error(path + ":" + std::to_string(e.line) +
                                              ": pooling must be mean or max");
            } else throw unknown();
        } else if (e.section == "train") {
            if (e.key == "learning_rate") cfg.learning_rate = require_double(e, path);
            else if (e.key == "batch_size") cfg.batch_size = static_cast<int>(require_int(e, path, 1, 1 << 20));
            else if (e.key == "epochs") cfg.epochs = static_cast<int>(require_int(e, path, 0, 1 << 20));
            else throw unknown();
        } else if (e.section == "alignment") {
            if (e.key == "k") cfg.alignment.k = static_cast<int>(require_int(e, path, 1, 1 << 20));
            else if (e.key == "m") cfg.alignment.m = static_cast<int>(require_int(e, path, 1, 1 << 20));
            else if (e.key == "max_n") cfg.alignment.max_n = static_cast<int>(require_int(e, path, 1, 5));
            else throw unknown();
        } else if (e.section == "evaluation") {
            if (e.key == "m_sweep") cfg.m_sweep = parse_int_list(e, path);
            else if (e.key == "skip_del") cfg.skip_del = require_bool(e, path);
            else throw unknown();
        } else if (e.section == "clustering") {
            if (e.key == "embeddings") cfg.embeddings_path = e.value;
            else if (e.key == "top_n") cfg.cluster_top_n = static_cast<int>(require_int(e, path, 2, 1 << 20));
            else if (e.key == "fallback_dim") cfg.fallback_dim = static_cast<int>(require_int(e, path, 1, 4096));
            else throw unknown();
        } else {
            throw std::runtime_error(path + ": unknown section [" + e.section + "]");
        }
    }
    return cfg;
}

void RunConfig::validate() const {
    if (corpus_path.empty() && synthetic_spec_path.empty()) {
        throw std::runtime_error(
            "config: set either [corpus] path or [corpus] synthetic (a synthetic spec file)");
    }
    if (!corpus_path.empty() && !synthetic_spec_path.empty()) {
        throw std::runtime_error("config: [corpus] path and synthetic are mutually exclusive");
    }
    if (!corpus_path.empty() && !std::filesystem::exists(resolve_relative(corpus_path))) {
        throw std::runtime_error("config: corpus file does not exist: " + corpus_path);
    }
    if (!synthetic_spec_path.empty() &&
        !std::filesystem::exists(resolve_relative(synthetic_spec_path))) {
        throw std::runtime_error("config: synthetic spec does not exist: " + synthetic_spec_path);
    }
    if (!lexicon_path.empty() && !std::filesystem::exists(resolve_relative(lexicon_path))) {
        throw std::runtime_error("config: morpheme lexicon does not exist: " + lexicon_path);
    }
    if (!embeddings_path.empty() && !std::filesystem::exists(resolve_relative(embeddings_path))) {
        throw std::runtime_error("config: embedding file does not exist: " + embeddings_path);
    }
    alignment.validate();
    if (learning_rate < 0.0) throw std::runtime_error("config: learning_rate must be >= 0");
    if (threads < 1) throw std::runtime_error("config: threads must be >= 1");
    for (const ConvLayerConfig& l : layers) {
        if (l.units < 1 || l.filter_width < 1 || l.filter_width % 2 == 0) {
            throw std::runtime_error("config: each layer needs units >= 1 and odd filter width");
        }
    }
}

std::string RunConfig::resolve_relative(const std::string& path) const {
    const std::filesystem::path p(path);
    if (p.is_absolute() || config_dir.empty()) return path;
    return (std::filesystem::path(config_dir) / p).string();
}

std::string RunConfig::resolved_checkpoint() const {
    if (!checkpoint_path.empty()) return checkpoint_path;
    return (std::filesystem::path(out_dir) / "model.ckpt").string();
}

void apply_overrides(RunConfig& config, const CliOverrides& overrides) {
    if (overrides.out_dir) config.out_dir = *overrides.out_dir;
    if (overrides.checkpoint) config.checkpoint_path = *overrides.checkpoint;
    if (overrides.seed) config.seed = *overrides.seed;
    if (overrides.threads) config.threads = *overrides.threads;
    if (overrides.k) config.alignment.k = *overrides.k;
    if (overrides.m) config.alignment.m = *overrides.m;
    if (overrides.skip_del) config.skip_del = *overrides.skip_del;

    if (config.out_dir.empty()) {
        if (const char* env = std::getenv("UNITSCOPE_OUT")) config.out_dir = env;
    }
    if (config.out_dir.empty()) config.out_dir = "out";
}

}  // namespace unitscope
