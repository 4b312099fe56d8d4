#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "mmclass/error.hpp"
#include "mmclass/gbdt.hpp"
#include "mmclass/grid.hpp"
#include "mmclass/kernels.hpp"
#include "mmclass/pipeline.hpp"
#include "mmclass/synth.hpp"

namespace {

using mmc::pipeline::RunConfig;

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
    std::optional<std::string> loss;
    std::optional<std::string> imbalance;
    std::optional<std::string> grid;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config_path, "run configuration (JSON)")
        ->envname("MMCLASS_CONFIG")
        ->required();
    cmd->add_option("--seed", o.seed, "override the config seed")
        ->envname("MMCLASS_SEED");
    cmd->add_option("--threads", o.threads, "worker threads for per-task stages")
        ->envname("MMCLASS_THREADS");
    cmd->add_option("--out", o.out, "override the run directory")
        ->envname("MMCLASS_OUT");
}

std::filesystem::path require_existing(const std::string& p, const char* what) {
    if (!std::filesystem::exists(p))
        throw mmc::ConfigError(std::string(what) + " does not exist: " + p);
    return p;
}

/// Load the config file and fold in command-line overrides, re-validating
/// the combined result. `modality` is non-empty for `train`.
RunConfig resolve_config(const Overrides& o, const std::string& modality = "") {
    RunConfig config = mmc::pipeline::load_config(o.config_path);
    if (o.seed) config.seed = *o.seed;
    if (o.threads) config.threads = *o.threads;
    if (o.out) config.out_dir = *o.out;
    if (o.loss || o.imbalance) {
        if (modality != "image" && modality != "text")
            throw mmc::ConfigError(
                "--loss/--imbalance only apply when training an embedding "
                "modality (image or text)");
        mmc::pipeline::HeadConfig& head =
            modality == "image" ? config.image : config.text;
        if (o.loss) head.loss = *o.loss;
        if (o.imbalance) head.imbalance = *o.imbalance;
    }
    if (o.grid) {
        if (modality == "tabular")
            config.tabular_grid = require_existing(*o.grid, "--grid file");
        else if (modality.empty())  // fuse-evaluate
            config.fusion_grid = require_existing(*o.grid, "--grid file");
        else
            throw mmc::ConfigError(
                "--grid only applies to `train tabular` and `fuse-evaluate`");
    }
    config.validate();
    return config;
}

void emit_run_config(const std::filesystem::path& dir, const mmc::synth::SynthSpec& spec) {
    mmc::gbdt::GridSpec tabular;
    tabular.max_depth = {2, 4};
    tabular.n_rounds = {10, 30};
    tabular.sample_weight = {"none", "balanced"};
    mmc::gbdt::save_grid(dir / "grid_tabular.json", tabular);

    mmc::gbdt::GridSpec fusion;
    fusion.max_depth = {2, 3};
    fusion.n_rounds = {10, 25};
    mmc::gbdt::save_grid(dir / "grid_fusion.json", fusion);

    nlohmann::ordered_json head = {
        {"trunk_widths", {64, 32}}, {"batch_size", 64},
        {"max_epochs", 60},         {"patience", 10},
        {"learning_rate", 3e-3},
    };
    nlohmann::ordered_json j;
    j["corpus_csv"] = "records.csv";
    j["manifest"] = "manifest.tsv";
    j["grouping"] = "grouping.tsv";
    j["unmapped_labels"] = "abort";
    j["out_dir"] = "out";
    j["min_label_count"] = 10;
    j["min_text_chars"] = 25;
    j["split_ratios"] = {0.6, 0.2, 0.2};
    j["seed"] = spec.seed;
    j["threads"] = 1;
    j["image"] = head;
    j["text"] = head;
    j["tabular_grid"] = "grid_tabular.json";
    j["fusion_grid"] = "grid_fusion.json";
    j["agent"] = "mmclass late fusion";
    j["export_timestamp"] = "2024-01-01T00:00:00Z";
    mmc::pipeline::atomic_write(dir / "config.json", j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multitask multimodal classification of silk heritage records"};
    app.set_version_flag(
        "--version", std::string("mmclass 0.1.0 (kernels: ") +
                         mmc::kernels::backend_name(mmc::kernels::active_backend()) +
                         ")");
    app.require_subcommand(1);

    auto* synth_cmd =
        app.add_subcommand("synth", "generate a seeded synthetic corpus");
    std::string synth_out;
    mmc::synth::SynthSpec spec;
    bool emit_config = false;
    synth_cmd->add_option("--out", synth_out, "directory to write the corpus into")
        ->required();
    synth_cmd->add_option("--records", spec.n_records, "number of records");
    synth_cmd->add_option("--seed", spec.seed, "generator seed")
        ->envname("MMCLASS_SEED");
    synth_cmd->add_option("--noise", spec.noise, "embedding noise scale");
    synth_cmd->add_option("--image-dim", spec.image_dim, "image embedding width");
    synth_cmd->add_option("--text-dim", spec.text_dim, "text embedding width");
    synth_cmd->add_option("--image-coverage", spec.image_coverage,
                          "fraction of records with image embeddings");
    synth_cmd->add_option("--text-coverage", spec.text_coverage,
                          "fraction of records with text embeddings");
    synth_cmd->add_flag("--emit-config", emit_config,
                        "also write a ready-to-run config.json and small grids");

    Overrides ingest_o, train_o, fuse_o;
    auto* ingest_cmd = app.add_subcommand(
        "ingest", "parse, group, filter, split, and archive the corpus");
    add_common(ingest_cmd, ingest_o);

    auto* train_cmd =
        app.add_subcommand("train", "train one modality on the ingested archive");
    std::string modality;
    train_cmd->add_option("modality", modality, "image, text, or tabular")
        ->required()
        ->check(CLI::IsMember({"image", "text", "tabular"}));
    add_common(train_cmd, train_o);
    train_cmd->add_option("--loss", train_o.loss, "softmax or focal")
        ->envname("MMCLASS_LOSS")
        ->check(CLI::IsMember({"softmax", "focal"}));
    train_cmd
        ->add_option("--imbalance", train_o.imbalance,
                     "none, weight_rescale, or uniform_sampling")
        ->envname("MMCLASS_IMBALANCE")
        ->check(CLI::IsMember({"none", "weight_rescale", "uniform_sampling"}));
    train_cmd->add_option("--grid", train_o.grid, "hyperparameter grid (JSON)")
        ->envname("MMCLASS_GRID");

    auto* fuse_cmd = app.add_subcommand(
        "fuse-evaluate", "fuse the three modalities, evaluate, and export");
    add_common(fuse_cmd, fuse_o);
    fuse_cmd->add_option("--grid", fuse_o.grid, "fusion hyperparameter grid (JSON)")
        ->envname("MMCLASS_GRID");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (app.got_subcommand(synth_cmd)) {
            const auto report = mmc::synth::generate_corpus(synth_out, spec);
            std::printf("synth: %zu records, %zu image vectors, %zu text vectors\n",
                        report.n_records, report.n_image_vectors,
                        report.n_text_vectors);
            std::printf("  %s\n", report.csv.string().c_str());
            if (emit_config) {
                emit_run_config(synth_out, spec);
                std::printf("  %s\n",
                            (std::filesystem::path(synth_out) / "config.json")
                                .string()
                                .c_str());
            }
        } else if (app.got_subcommand(ingest_cmd)) {
            const auto config = resolve_config(ingest_o);
            mmc::pipeline::cmd_ingest(config);
            std::printf("ingest: %s\n",
                        mmc::pipeline::ingest_dir(config).string().c_str());
        } else if (app.got_subcommand(train_cmd)) {
            const auto config = resolve_config(train_o, modality);
            mmc::pipeline::cmd_train(config, modality);
            std::printf("train %s: %s\n", modality.c_str(),
                        mmc::pipeline::train_dir(config).string().c_str());
        } else {
            const auto config = resolve_config(fuse_o);
            mmc::pipeline::cmd_fuse_evaluate(config);
            std::printf("fuse-evaluate: %s\n",
                        mmc::pipeline::fuse_dir(config).string().c_str());
        }
    } catch (const mmc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
