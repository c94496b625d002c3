#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unitscope/alignment.hpp"
#include "unitscope/clustering.hpp"
#include "unitscope/config.hpp"
#include "unitscope/corpus.hpp"

namespace unitscope {

struct PreparedCorpus {
    Corpus corpus;
    std::vector<Plant> plants;  // synthetic ground truth; empty for file corpora
    bool synthetic = false;
    std::optional<MorphemeLexicon> lexicon;

    const MorphemeLexicon* lexicon_ptr() const { return lexicon ? &*lexicon : nullptr; }
};

PreparedCorpus prepare_corpus(const RunConfig& config);
ModelConfig model_config_for(const RunConfig& config, const Corpus& corpus);

// On-disk alignment artifact. `aligned` lists carry up to m_stored concepts
// (enough for the evaluation M-sweep); the headline reports use config.m.
struct AlignmentsFile {
    AlignmentConfig config;
    int m_stored = 0;
    int avg_len = 0;
    int corpus_sentences = 0;
    std::vector<int> layer_units;
    std::vector<UnitAlignment> units;
};

void write_alignments_json(const AlignmentsFile& file, const std::string& path);
AlignmentsFile read_alignments_json(const std::string& path);

// Subcommands. Each validates the config, writes its fixed-name artifacts
// under out_dir and throws with the failing report(s) listed on error.
void cmd_train(const RunConfig& config);
void cmd_align(const RunConfig& config, std::optional<int> layer_filter = {});
void cmd_evaluate(const RunConfig& config);
void cmd_cluster(const RunConfig& config);
void cmd_all(const RunConfig& config);

std::string format_double(double v);  // fixed CSV float formatting

}  // namespace unitscope
