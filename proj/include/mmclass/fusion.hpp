#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mmclass/corpus.hpp"
#include "mmclass/decision.hpp"
#include "mmclass/gbdt.hpp"
#include "mmclass/grid.hpp"

/// Decision-level late fusion: per task, a boosted-tree classifier over the
/// predicted labels of the three single-modality classifiers, tuned by
/// five-fold cross-validation on the validation split and retrained on all
/// of it. Missing modalities are ordinary [NA] categories, so every record
/// gets a fused decision.
namespace mmc::fusion {

inline constexpr int kImage = 0;
inline constexpr int kText = 1;
inline constexpr int kTabular = 2;
inline constexpr std::array<const char*, 3> kModalityNames{"image", "text", "tabular"};

/// record_id -> per-task decisions of one modality's classifier.
using DecisionMap = std::map<std::string, ModalityDecision>;

/// Rows for one task. `columns` lists the modality behind each column in
/// ascending id order; fresh datasets carry {image, text, tabular} and
/// ablation projections carry subsets. Cells hold class + 1, with 0 = [NA].
struct FusionDataset {
    std::size_t task = 0;
    std::string task_name;
    std::size_t n_classes = 0;
    std::vector<int> columns{kImage, kText, kTabular};
    gbdt::Matrix rows;
    std::vector<int> labels;
    std::vector<std::string> record_ids;
};

/// One row per record labeled for `task`, in record-set order. A null map,
/// an absent record, or a missing decision all produce [NA]. Throws
/// DataError when a decision names a class outside the task's vocabulary.
FusionDataset build_fusion_rows(const corpus::RecordSet& records,
                                const std::array<const DecisionMap*, 3>& decisions,
                                std::size_t task);

/// Keeps only the given modality columns (deduplicated, ascending). Throws
/// ConfigError when the subset is empty or asks for a column the dataset
/// does not have.
FusionDataset project(const FusionDataset& dataset, const std::vector<int>& modalities);

/// Seeded shuffle of [0, n), cut into k near-equal folds. Disjoint and
/// exhaustive by construction. Throws ConfigError when k == 0.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k,
                                                 std::uint64_t seed);

struct FusionModel {
    std::string task_name;
    std::size_t task = 0;
    std::size_t n_classes = 0;
    std::vector<int> columns;
    gbdt::TreeEnsemble ensemble;
    gbdt::GridOutcome chosen;  // score = fold-mean macro-F1
};

/// Exhaustive grid search scored by mean macro-F1 over 5 seeded folds of
/// the validation rows (same folds for every grid point), ties broken by
/// fewer rounds then lower depth; the winner is retrained on all rows.
/// Throws ConfigError when a fold would hold fewer than 5 records.
FusionModel tune_and_train_fusion(const FusionDataset& validation_rows,
                                  const gbdt::GridSpec& grid, std::uint64_t seed = 0,
                                  std::vector<gbdt::GridOutcome>* outcomes = nullptr);

/// Fused decision for a full three-column row (indexed image, text,
/// tabular; the model picks out its own columns). Confidence is the
/// winning class probability. Total: all-[NA] rows are fine.
TaskDecision predict_row(const FusionModel& model, const gbdt::Row& full_row);

struct AblationEntry {
    std::vector<int> modalities;
    double test_macro_f1 = 0.0;
    double test_accuracy = 0.0;
};

/// For each subset: retune and retrain fusion on the validation rows
/// restricted to those columns, then score on the test rows. Throws
/// ConfigError on an empty subset list or an empty subset.
std::vector<AblationEntry> ablate_modalities(const FusionDataset& validation_rows,
                                             const FusionDataset& test_rows,
                                             const std::vector<std::vector<int>>& subsets,
                                             const gbdt::GridSpec& grid,
                                             std::uint64_t seed = 0);

/// JSON manifest binding task, class count, and modality column order
/// around the serialized tree ensemble.
void save_fusion_model(const std::filesystem::path& path, const FusionModel& model);
FusionModel load_fusion_model(const std::filesystem::path& path);

}  // namespace mmc::fusion
