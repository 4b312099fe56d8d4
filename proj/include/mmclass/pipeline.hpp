#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mmclass/corpus.hpp"
#include "mmclass/decision.hpp"

/// Batch pipeline behind the CLI: ingest -> train per modality -> fuse +
/// evaluate. Stages communicate only through files under the run
/// directory. Every stage checks that its upstream artifacts exist and
/// came from the same corpus configuration, writes outputs atomically
/// (temp file + rename), and stamps them with the configuration hash and
/// seed.
namespace mmc::pipeline {

/// Training knobs for one embedding modality (image or text).
struct HeadConfig {
    std::string loss = "softmax";    // softmax | focal
    double gamma = 2.0;              // focal exponent
    std::string imbalance = "none";  // none | weight_rescale | uniform_sampling
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    int batch_size = 300;
    int max_epochs = 20;
    int patience = 5;
    std::vector<std::size_t> trunk_widths = {1024, 128};
    double dropout = 0.10;
};

inline HeadConfig default_text_head() {
    HeadConfig h;
    h.batch_size = 64;
    return h;
}

struct RunConfig {
    std::filesystem::path corpus_csv;
    std::filesystem::path manifest;      // empty: corpus has no embeddings
    std::filesystem::path grouping;      // empty: labels already canonical
    std::string unmapped_labels = "abort";  // abort | drop
    std::filesystem::path out_dir = "out";
    int min_label_count = 150;
    int min_text_chars = 60;
    std::array<double, 3> split_ratios = {0.6, 0.2, 0.2};
    std::uint64_t seed = 0;
    int threads = 1;
    HeadConfig image;
    HeadConfig text = default_text_head();
    std::filesystem::path tabular_grid;  // empty: the full default grid
    std::filesystem::path fusion_grid;
    std::filesystem::path facet_map;     // empty: no facet rewrites
    std::filesystem::path property_map;  // empty: built-in CIDOC properties
    std::string agent = "mmclass late fusion";
    std::string export_timestamp = "2024-01-01T00:00:00Z";

    /// Enum strings, hyperparameter ranges, timestamp shape. ConfigError.
    void validate() const;
};

/// Parse a JSON run config. Unknown keys are rejected; relative paths are
/// resolved against the config file's directory; referenced input files
/// must exist. Throws ConfigError / ParseError / IoError.
RunConfig load_config(const std::filesystem::path& path);

/// The config as canonical JSON. Excludes out_dir and threads: where a run
/// writes and how many workers it uses do not change what it computes.
std::string canonical_json(const RunConfig& config);

/// 16-hex-digit FNV-1a of canonical_json.
std::string config_hash(const RunConfig& config);

/// Hash over the ingest-relevant subset (corpus paths, label handling,
/// filters, split ratios, seed). Downstream stages match it against their
/// upstream artifacts, so a stale archive cannot silently feed a new run.
std::string ingest_hash(const RunConfig& config);

std::filesystem::path ingest_dir(const RunConfig& config);
std::filesystem::path train_dir(const RunConfig& config);
std::filesystem::path fuse_dir(const RunConfig& config);

/// Parse raw records, group + filter them, split, and write the archive:
/// corpus.csv, manifest.tsv + embeddings/, split.csv, stats/, meta.json.
void cmd_ingest(const RunConfig& config);

/// modality in {image, text, tabular}. Image and text train the multitask
/// head on the archive's embeddings; tabular grid-searches one boosted
/// model per task. All three leave a model artifact, a validation report,
/// and a decisions file for every record in the archive.
void cmd_train(const RunConfig& config, const std::string& modality);

/// Tune + train per-task late fusion on the validation split's decisions,
/// then write the four-column comparison, the modality-subset ablation,
/// per-task confusion matrices (CSV + PNG), and Turtle predictions for
/// records lacking a gold label.
void cmd_fuse_evaluate(const RunConfig& config);

/// Write-to-temp + rename in the target directory, so readers never
/// observe a partial file. Throws IoError.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

using DecisionMap = std::map<std::string, ModalityDecision>;

/// record_id,split,task,class,confidence; one row per record x task in
/// record order, class -1 when the modality had nothing to say. `stamp`
/// becomes a leading '#' comment line.
void write_decisions_csv(const std::filesystem::path& path,
                         const corpus::RecordSet& records,
                         const corpus::SplitAssignment& split,
                         const DecisionMap& decisions, const std::string& stamp);
DecisionMap read_decisions_csv(const std::filesystem::path& path,
                               const corpus::TaskSchema& schema);

/// Run fn(0..n-1), spread over up to `threads` workers. Work items must be
/// independent; the first exception is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace mmc::pipeline
