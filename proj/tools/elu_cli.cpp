// Command-line front end for the entity-level unlearning laboratory.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "elu/harness.hpp"

namespace fs = std::filesystem;
using namespace elu;

int main(int argc, char** argv) {
    CLI::App app{"elu: entity-level unlearning laboratory for tiny language models"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int parallel = 1;
    app.add_option("--config", config_path, "experiment config JSON")->envname("ELU_CONFIG");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--seed", seed, "master seed (overrides every component seed)")
        ->each([&](const std::string&) { seed_given = true; });
    app.add_option("--parallel", parallel, "worker processes for per-entity analyses")
        ->check(CLI::PositiveNumber);

    auto load_config = [&]() {
        harness::ExperimentConfig cfg = config_path.empty()
                                            ? harness::default_config()
                                            : harness::config_from_json(
                                                  harness::read_json(config_path));
        if (seed_given) harness::apply_master_seed(cfg, seed);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        return cfg;
    };

    std::string entity, algorithm = "ga", forget_type = "target";
    std::string corpus_file, model_file;
    std::vector<std::string> report_inputs;

    auto* gen = app.add_subcommand("gen-world", "generate the synthetic corpus");

    auto* train = app.add_subcommand("train-target", "train the target model on the corpus");
    train->add_option("--corpus", corpus_file, "corpus JSON (default <out>/corpus.json)");

    auto* probe_cmd = app.add_subcommand("probe", "construct a forget set by probing the model");
    probe_cmd->add_option("--entity", entity, "target entity id")->required();
    probe_cmd->add_option("--corpus", corpus_file, "corpus JSON");
    probe_cmd->add_option("--model", model_file, "model snapshot");

    auto* unlearn_cmd = app.add_subcommand("unlearn", "run one unlearning trajectory");
    unlearn_cmd->add_option("--entity", entity, "target entity id")->required();
    unlearn_cmd->add_option("--algorithm", algorithm, "ga|gd|kl|po|npo_gd")
        ->check(CLI::IsMember({"ga", "gd", "kl", "po", "npo_gd"}));
    unlearn_cmd->add_option("--forget-set", forget_type, "target|constructed")
        ->check(CLI::IsMember({"target", "constructed"}));
    unlearn_cmd->add_option("--corpus", corpus_file, "corpus JSON");
    unlearn_cmd->add_option("--model", model_file, "model snapshot");

    auto* abl_cov = app.add_subcommand("ablate-coverage", "replacement-ratio analysis");
    abl_cov->add_option("--corpus", corpus_file, "corpus JSON");
    abl_cov->add_option("--model", model_file, "model snapshot");

    auto* abl_size = app.add_subcommand("ablate-size", "constructed-set size analysis");
    abl_size->add_option("--corpus", corpus_file, "corpus JSON");
    abl_size->add_option("--model", model_file, "model snapshot");

    auto* abl_steps = app.add_subcommand("ablate-steps", "unlearning-step analysis");
    abl_steps->add_option("--algorithm", algorithm, "ga|gd|kl|po|npo_gd")
        ->check(CLI::IsMember({"ga", "gd", "kl", "po", "npo_gd"}));
    abl_steps->add_option("--corpus", corpus_file, "corpus JSON");
    abl_steps->add_option("--model", model_file, "model snapshot");

    auto* phases = app.add_subcommand("compare-phases",
                                      "pretrain-vs-finetune entity vulnerability comparison");
    phases->add_option("--algorithm", algorithm, "ga|gd|kl|po|npo_gd")
        ->check(CLI::IsMember({"ga", "gd", "kl", "po", "npo_gd"}));

    auto* report = app.add_subcommand("report", "render plots and tables from result files");
    report->add_option("inputs", report_inputs, "record.json / analysis json files")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load_config();
        const fs::path out(cfg.out_dir);
        const fs::path corpus_path = corpus_file.empty() ? out / "corpus.json" : fs::path(corpus_file);
        auto model_path = [&]() -> fs::path {
            if (!model_file.empty()) return model_file;
            // default: the cached target model for this config
            return harness::cmd_train_target(cfg, corpus_path);
        };

        if (gen->parsed()) {
            harness::cmd_gen_world(cfg);
        } else if (train->parsed()) {
            harness::cmd_train_target(cfg, corpus_path);
        } else if (probe_cmd->parsed()) {
            harness::cmd_probe(cfg, corpus_path, model_path(), entity);
        } else if (unlearn_cmd->parsed()) {
            harness::cmd_unlearn(cfg, corpus_path, model_path(), entity, algorithm,
                                 forget_type == "target" ? harness::ForgetSetType::target
                                                         : harness::ForgetSetType::constructed);
        } else if (abl_cov->parsed()) {
            harness::cmd_ablate_coverage(cfg, corpus_path, model_path(), parallel);
        } else if (abl_size->parsed()) {
            harness::cmd_ablate_size(cfg, corpus_path, model_path(), parallel);
        } else if (abl_steps->parsed()) {
            harness::cmd_ablate_steps(cfg, corpus_path, model_path(), algorithm, parallel);
        } else if (phases->parsed()) {
            harness::cmd_compare_phases(cfg, algorithm);
        } else if (report->parsed()) {
            std::vector<fs::path> inputs(report_inputs.begin(), report_inputs.end());
            harness::cmd_report(inputs, out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
