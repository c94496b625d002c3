#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unitscope/alignment.hpp"
#include "unitscope/charcnn.hpp"

namespace unitscope {

// One committable file drives a whole run; command-line flags override
// individual keys.
struct RunConfig {
    // [corpus] - exactly one of path / synthetic must be set
    std::string corpus_path;
    std::string synthetic_spec_path;
    std::string lexicon_path;  // optional morpheme lexicon
    int num_classes = 0;       // 0: infer from labels

    // [model]
    int embedding_dim = 16;
    std::vector<ConvLayerConfig> layers = {{16, 3}, {32, 3}};
    Pooling pooling = Pooling::mean;

    // [train]
    double learning_rate = 0.01;
    int batch_size = 32;
    int epochs = 20;

    // [alignment]
    AlignmentConfig alignment;

    // [evaluation]
    std::vector<int> m_sweep = {1, 3, 5, 10};
    bool skip_del = false;

    // [clustering]
    std::string embeddings_path;  // empty: deterministic corpus-built fallback
    int cluster_top_n = 30;
    int fallback_dim = 16;

    // top-level keys (before any section)
    std::uint64_t seed = 7;
    int threads = 1;
    std::string out_dir;  // falls back to $UNITSCOPE_OUT, then "out"
    std::string checkpoint_path;  // defaults to <out_dir>/model.ckpt

    std::string config_dir;  // directory of the config file, for relative paths

    void validate() const;  // throws with actionable messages
    std::string resolved_checkpoint() const;
    std::string resolve_relative(const std::string& path) const;
};

RunConfig load_run_config(const std::string& path);

struct CliOverrides {
    std::optional<std::string> out_dir;
    std::optional<std::string> checkpoint;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<int> k;
    std::optional<int> m;
    std::optional<bool> skip_del;
};

void apply_overrides(RunConfig& config, const CliOverrides& overrides);

}  // namespace unitscope
