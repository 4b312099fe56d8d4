#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmclass/decision.hpp"
#include "mmclass/imbalance.hpp"
#include "mmclass/rng.hpp"

/// Multitask neural head over precomputed embeddings: shared
/// fully-connected trunk with rectified-linear activations, one softmax
/// output layer per task, masked multitask cross-entropy or multi-class
/// focal loss, hand-written gradients, Adam, early stopping, and
/// record-level aggregation of per-embedding predictions.
namespace mmc::mtnet {

struct HeadTopology {
    std::size_t input_dim = 2048;                  // image-embedding default
    std::vector<std::size_t> trunk_widths = {1024, 128};
    double dropout = 0.10;                         // input dropout, inverted scaling
    std::vector<std::size_t> head_widths;          // classes per task

    void validate() const;  // widths >= 1, dropout in [0,1), heads non-empty
};

/// One dense layer, row-major weights [rows x cols] + bias [rows].
struct Layer {
    std::size_t rows = 0, cols = 0;
    std::vector<double> w;
    std::vector<double> b;

    static Layer zeros(std::size_t rows, std::size_t cols);
};

struct MultitaskHeadModel {
    HeadTopology topology;
    std::vector<Layer> trunk;
    std::vector<Layer> heads;

    /// Weights from N(0, 0.02), biases zero, reproducible by seed.
    static MultitaskHeadModel init(const HeadTopology& topo, std::uint64_t seed);

    std::size_t num_tasks() const { return heads.size(); }
    std::size_t trunk_output_dim() const;
};

/// One training instance: an embedding plus per-task labels (-1 missing).
/// Records with several image embeddings contribute several samples that
/// share labels.
struct Sample {
    std::vector<double> embedding;
    std::vector<int> labels;
};

using Dataset = std::vector<Sample>;

enum class LossKind { softmax_ce, focal };

struct TrainConfig {
    LossKind loss = LossKind::softmax_ce;
    double gamma = 2.0;          // focal exponent; 0 reduces to softmax_ce
    double weight_decay = 0.0;   // coefficient on R = 1/2 sum w^2
    bool decoupled_decay = false;  // apply decay in the update step instead
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t batch_size = 300;  // text configs use 64
    imbalance::SamplerKind sampler = imbalance::SamplerKind::proportional_task;
    std::optional<std::vector<std::vector<double>>> class_weights;  // per task
    int max_epochs = 20;
    int patience = 5;
    std::int64_t batches_per_epoch = 0;  // 0: ceil(labeled instances / batch)
    std::uint64_t seed = 0;
};

/// Per-task probability vectors for one embedding. Dropout fires only in
/// train mode, where it needs the caller's generator.
std::vector<std::vector<double>> forward(const MultitaskHeadModel& model,
                                         const std::vector<double>& embedding,
                                         bool train_mode = false,
                                         Rng* rng = nullptr);

/// Masked multitask softmax cross-entropy over the batch (a set of indices
/// into data): -sum_n sum_{m in M_n} [w_c] ln y_true + weight_decay * R.
/// Samples without a label for a task contribute exactly nothing to it.
double loss_sce(const Dataset& data, const std::vector<std::size_t>& batch,
                const MultitaskHeadModel& model, double weight_decay = 0.0,
                const std::vector<std::vector<double>>* class_weights = nullptr);

/// Multi-class focal loss: the log term is damped by (1 - y_true)^gamma.
/// gamma = 0 reproduces unweighted loss_sce bit-for-bit.
double loss_focal(const Dataset& data, const std::vector<std::size_t>& batch,
                  const MultitaskHeadModel& model, double gamma,
                  double weight_decay = 0.0);

struct Gradients {
    std::vector<Layer> trunk;
    std::vector<Layer> heads;

    static Gradients zeros_like(const MultitaskHeadModel& model);
};

/// Analytic gradients of the configured loss over a batch, dropout off.
/// task_filter >= 0 restricts the mask to that task (single-task batches).
Gradients backward(const Dataset& data, const std::vector<std::size_t>& batch,
                   const MultitaskHeadModel& model, const TrainConfig& config,
                   int task_filter = -1);

struct EpochLog {
    double train_loss = 0.0;  // mean batch objective
    double val_loss = 0.0;    // full-mask objective on the validation set
    std::vector<std::int64_t> task_batches;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;  // 0-based; the restored snapshot
    double best_val_loss = 0.0;
};

/// Sampler-driven minibatch training. Each batch carries one task (the
/// sampler's draw) and optimizes that head plus the trunk. Keeps and
/// restores the snapshot with the lowest validation loss; stops after
/// `patience` epochs without improvement.
TrainLog train(MultitaskHeadModel& model, const Dataset& train_set,
               const Dataset& validation_set, const TrainConfig& config);

/// Record-level aggregation: classify every embedding, keep the class with
/// the highest softmax score per task. No embeddings -> all-missing.
ModalityDecision predict_record(const MultitaskHeadModel& model,
                                const std::vector<std::vector<double>>& embeddings);

/// Versioned binary checkpoint: header (magic, version, topology) then
/// parameters as little-endian 64-bit floats in declaration order.
void save_checkpoint(const std::filesystem::path& path,
                     const MultitaskHeadModel& model);
MultitaskHeadModel load_checkpoint(const std::filesystem::path& path);

namespace detail {

/// Shared loss/gradient core. dropout_rng non-null enables input dropout
/// (training); out non-null accumulates gradients. Returns the objective.
double loss_and_grads(const Dataset& data, const std::vector<std::size_t>& batch,
                      const MultitaskHeadModel& model, const TrainConfig& config,
                      int task_filter, Rng* dropout_rng, Gradients* out);

}  // namespace detail

}  // namespace mmc::mtnet
