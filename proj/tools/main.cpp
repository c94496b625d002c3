#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "unitscope/config.hpp"
#include "unitscope/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string checkpoint;
    std::uint64_t seed = 0;
    int threads = 0;
    int k = 0;
    int m = 0;
    std::int64_t layer = -1;
    bool skip_del = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration file (INI)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir,
                    "output directory (default: config `out`, then $UNITSCOPE_OUT, then ./out)");
    cmd->add_option("--checkpoint", args.checkpoint, "checkpoint path (default: <out>/model.ckpt)");
    cmd->add_option("--seed", args.seed, "global seed override")->default_val(std::uint64_t(0));
    cmd->add_option("--threads", args.threads, "worker threads (results are independent of this)");
    cmd->add_option("--k", args.k, "top-K sentences per unit");
    cmd->add_option("--m", args.m, "aligned concepts per unit");
}

unitscope::RunConfig resolve(const CLI::App* cmd, const CommonArgs& args) {
    unitscope::RunConfig config = unitscope::load_run_config(args.config_path);
    unitscope::CliOverrides overrides;
    if (cmd->count("--out")) overrides.out_dir = args.out_dir;
    if (cmd->count("--checkpoint")) overrides.checkpoint = args.checkpoint;
    if (cmd->count("--seed")) overrides.seed = args.seed;
    if (cmd->count("--threads")) overrides.threads = args.threads;
    if (cmd->count("--k")) overrides.k = args.k;
    if (cmd->count("--m")) overrides.m = args.m;
    if (args.skip_del) overrides.skip_del = true;
    unitscope::apply_overrides(config, overrides);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unitscope: aligns natural-language concepts to character-CNN units"};
    app.require_subcommand(1);

    CommonArgs train_args, align_args, eval_args, cluster_args, all_args;

    CLI::App* train = app.add_subcommand("train", "train the classifier and write a checkpoint");
    add_common(train, train_args);

    CLI::App* align = app.add_subcommand("align", "align concepts to every unit");
    add_common(align, align_args);
    align->add_option("--layer", align_args.layer, "restrict alignment to one layer");

    CLI::App* evaluate = app.add_subcommand("evaluate", "selectivity, DEL and distribution reports");
    add_common(evaluate, eval_args);
    evaluate->add_flag("--skip-del", eval_args.skip_del,
                       "skip delta-of-expected-loss (works on unlabeled corpora)");

    CLI::App* cluster = app.add_subcommand("cluster", "concept clustering reports");
    add_common(cluster, cluster_args);

    CLI::App* all = app.add_subcommand("all", "train, align, evaluate and cluster in sequence");
    add_common(all, all_args);
    all->add_flag("--skip-del", all_args.skip_del,
                  "skip delta-of-expected-loss (works on unlabeled corpora)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            unitscope::cmd_train(resolve(train, train_args));
        } else if (*align) {
            std::optional<int> layer;
            if (align->count("--layer")) layer = static_cast<int>(align_args.layer);
            unitscope::cmd_align(resolve(align, align_args), layer);
        } else if (*evaluate) {
            unitscope::cmd_evaluate(resolve(evaluate, eval_args));
        } else if (*cluster) {
            unitscope::cmd_cluster(resolve(cluster, cluster_args));
        } else if (*all) {
            unitscope::cmd_all(resolve(all, all_args));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
