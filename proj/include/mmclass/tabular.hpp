#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmclass/corpus.hpp"
#include "mmclass/decision.hpp"
#include "mmclass/gbdt.hpp"
#include "mmclass/grid.hpp"

/// Task-specific tabular classifiers: boosted trees over the categorical
/// record fields (museum plus the labels of every other task), grid-tuned
/// on the validation split by macro-F1.
namespace mmc::tabular {

/// Maps a record's categorical fields onto integer feature categories.
/// Column 0 is the museum, the rest are the non-target tasks in schema
/// order. Category 0 of every column is [NA]; task columns shift class c
/// to c + 1, the museum column indexes a sorted vocabulary. Values outside
/// a column's vocabulary (new museums at inference) encode as [NA].
struct TabularEncoder {
    int target_task = -1;
    std::vector<std::string> feature_names;
    std::vector<int> feature_tasks;  // task index per column, -1 = museum
    std::vector<std::vector<std::string>> feature_values;  // id -> display value

    gbdt::Row encode(const corpus::Record& record) const;
    std::size_t num_features() const { return feature_names.size(); }
};

struct TabularDataset {
    std::string target_name;
    TabularEncoder encoder;
    std::size_t n_classes = 0;
    gbdt::Matrix rows;
    std::vector<int> labels;  // target class per row
    std::vector<std::string> record_ids;
};

/// One row per record labeled for target_task; the museum vocabulary is
/// collected from the whole record set so every split shares one encoding.
/// The target task's own label never appears among the features. Throws
/// ConfigError when target_task is not in the schema.
TabularDataset build_tabular_inputs(const corpus::RecordSet& records,
                                    const std::string& target_task);

/// Splits rows by record id into {train, validation, test}, all sharing
/// the source encoder.
std::array<TabularDataset, 3> partition(const TabularDataset& dataset,
                                        const corpus::SplitAssignment& split);

struct TabularModel {
    std::string target_name;
    TabularEncoder encoder;
    std::size_t n_classes = 0;
    gbdt::TreeEnsemble ensemble;
    gbdt::GridOutcome chosen;  // winning grid point and its validation scores
};

/// Exhaustive search over the grid: each point trains on `train` (with
/// per-sample balanced weights when the point says so) and is scored by
/// macro-F1 on `validation`; ties prefer fewer rounds, then lower depth.
/// The winner is returned trained as-is (no retrain on train+validation).
/// When `outcomes` is non-null every scored point is appended to it.
/// Throws ConfigError on an empty grid or empty train split.
TabularModel grid_search_tabular(const TabularDataset& train,
                                 const TabularDataset& validation,
                                 const gbdt::GridSpec& grid,
                                 std::uint64_t seed = 0,
                                 std::vector<gbdt::GridOutcome>* outcomes = nullptr);

std::vector<int> predict_classes(const TabularModel& model, const gbdt::Matrix& rows);

/// Encodes an arbitrary record (labeled for the target or not) and returns
/// the predicted class with its probability.
TaskDecision predict_record(const TabularModel& model, const corpus::Record& record);

/// JSON artifact: the serialized ensemble plus the encoder and the chosen
/// grid point, so inference needs no corpus pass.
void save_tabular_model(const std::filesystem::path& path, const TabularModel& model);
TabularModel load_tabular_model(const std::filesystem::path& path);

}  // namespace mmc::tabular
