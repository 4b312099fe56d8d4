#include "mmclass/fusion.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "mmclass/error.hpp"
#include "mmclass/metrics.hpp"
#include "mmclass/rng.hpp"

namespace mmc::fusion {

namespace {

using nlohmann::ordered_json;

constexpr std::size_t kFolds = 5;
constexpr std::size_t kMinFoldSize = 5;

gbdt::Row select_columns(const gbdt::Row& full_row, const std::vector<int>& columns) {
    gbdt::Row out;
    out.reserve(columns.size());
    for (const int c : columns) out.push_back(full_row[static_cast<std::size_t>(c)]);
    return out;
}

int modality_id(const std::string& name) {
    for (std::size_t m = 0; m < kModalityNames.size(); ++m)
        if (name == kModalityNames[m]) return static_cast<int>(m);
    return -1;
}

}  // namespace

FusionDataset build_fusion_rows(const corpus::RecordSet& records,
                                const std::array<const DecisionMap*, 3>& decisions,
                                std::size_t task) {
    if (task >= records.schema.tasks.size())
        throw ConfigError("fusion: task index " + std::to_string(task) +
                          " outside the schema");

    FusionDataset out;
    out.task = task;
    out.task_name = records.schema.tasks[task].name;
    out.n_classes = records.schema.tasks[task].classes.size();

    for (const auto& record : records.records) {
        if (task >= record.labels.size() || record.labels[task] < 0) continue;
        gbdt::Row row(3, 0);
        for (std::size_t m = 0; m < 3; ++m) {
            const DecisionMap* map = decisions[m];
            if (!map) continue;
            const auto it = map->find(record.record_id);
            if (it == map->end() || task >= it->second.size()) continue;
            const TaskDecision& d = it->second[task];
            if (d.missing()) continue;
            if (static_cast<std::size_t>(d.cls) >= out.n_classes)
                throw DataError("fusion: " + std::string(kModalityNames[m]) +
                                " decision for record " + record.record_id +
                                " names class " + std::to_string(d.cls) +
                                " outside the " + out.task_name + " vocabulary");
            row[m] = d.cls + 1;
        }
        out.rows.push_back(std::move(row));
        out.labels.push_back(record.labels[task]);
        out.record_ids.push_back(record.record_id);
    }
    return out;
}

FusionDataset project(const FusionDataset& dataset, const std::vector<int>& modalities) {
    if (modalities.empty()) throw ConfigError("fusion: empty modality subset");
    std::set<int> wanted(modalities.begin(), modalities.end());

    std::vector<std::size_t> keep;  // positions within dataset.columns
    for (const int m : wanted) {
        const auto it = std::find(dataset.columns.begin(), dataset.columns.end(), m);
        if (it == dataset.columns.end())
            throw ConfigError("fusion: dataset has no column for modality id " +
                              std::to_string(m));
        keep.push_back(static_cast<std::size_t>(it - dataset.columns.begin()));
    }

    FusionDataset out;
    out.task = dataset.task;
    out.task_name = dataset.task_name;
    out.n_classes = dataset.n_classes;
    out.columns.clear();
    for (const int m : wanted) out.columns.push_back(m);
    out.labels = dataset.labels;
    out.record_ids = dataset.record_ids;
    out.rows.reserve(dataset.rows.size());
    for (const auto& row : dataset.rows) {
        gbdt::Row projected;
        projected.reserve(keep.size());
        for (const std::size_t pos : keep) projected.push_back(row[pos]);
        out.rows.push_back(std::move(projected));
    }
    return out;
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k,
                                                 std::uint64_t seed) {
    if (k == 0) throw ConfigError("fusion: fold count must be positive");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t begin = f * n / k;
        const std::size_t end = (f + 1) * n / k;
        folds[f].assign(order.begin() + begin, order.begin() + end);
    }
    return folds;
}

FusionModel tune_and_train_fusion(const FusionDataset& validation_rows,
                                  const gbdt::GridSpec& grid, std::uint64_t seed,
                                  std::vector<gbdt::GridOutcome>* outcomes) {
    const std::size_t n = validation_rows.rows.size();
    if (n / kFolds < kMinFoldSize)
        throw ConfigError("fusion: " + std::to_string(n) + " rows leave fewer than " +
                          std::to_string(kMinFoldSize) + " records per fold");

    gbdt::BoostParams base;
    base.seed = seed;
    const std::vector<gbdt::GridPoint> points = enumerate_grid(grid, base);
    const auto folds = make_folds(n, kFolds, seed);

    // Fold train/eval index sets, shared by every grid point.
    std::vector<std::vector<std::size_t>> train_idx(kFolds);
    for (std::size_t f = 0; f < kFolds; ++f)
        for (std::size_t g = 0; g < kFolds; ++g)
            if (g != f)
                train_idx[f].insert(train_idx[f].end(), folds[g].begin(), folds[g].end());

    bool have_best = false;
    gbdt::GridOutcome best;
    for (const auto& point : points) {
        double f1_sum = 0.0;
        double acc_sum = 0.0;
        for (std::size_t f = 0; f < kFolds; ++f) {
            gbdt::Matrix train_rows;
            std::vector<int> train_labels;
            train_rows.reserve(train_idx[f].size());
            train_labels.reserve(train_idx[f].size());
            for (const std::size_t i : train_idx[f]) {
                train_rows.push_back(validation_rows.rows[i]);
                train_labels.push_back(validation_rows.labels[i]);
            }

            gbdt::BoostParams params = point.params;
            const std::vector<double> weights = gbdt::sample_weights_for(
                point.sample_weight, train_labels, validation_rows.n_classes);
            if (!weights.empty()) params.sample_weights = weights;
            const gbdt::TreeEnsemble ensemble = gbdt::fit(
                train_rows, train_labels, validation_rows.n_classes, params);

            std::vector<int> preds;
            std::vector<int> truths;
            preds.reserve(folds[f].size());
            truths.reserve(folds[f].size());
            for (const std::size_t i : folds[f]) {
                preds.push_back(gbdt::predict_class(ensemble, validation_rows.rows[i]));
                truths.push_back(validation_rows.labels[i]);
            }
            const metrics::Evaluation eval =
                metrics::evaluate(preds, truths, validation_rows.n_classes);
            f1_sum += eval.report.macro_f1;
            acc_sum += eval.report.overall_accuracy;
        }

        gbdt::GridOutcome outcome{point.index, point.params, point.sample_weight,
                                  f1_sum / kFolds, acc_sum / kFolds};
        if (outcomes) outcomes->push_back(outcome);
        if (!have_best ||
            gbdt::improves(outcome.score, outcome.params, best.score, best.params)) {
            best = outcome;
            have_best = true;
        }
    }

    FusionModel model;
    model.task_name = validation_rows.task_name;
    model.task = validation_rows.task;
    model.n_classes = validation_rows.n_classes;
    model.columns = validation_rows.columns;
    model.chosen = best;
    gbdt::BoostParams params = best.params;
    const std::vector<double> weights = gbdt::sample_weights_for(
        best.sample_weight, validation_rows.labels, validation_rows.n_classes);
    if (!weights.empty()) params.sample_weights = weights;
    model.ensemble = gbdt::fit(validation_rows.rows, validation_rows.labels,
                               validation_rows.n_classes, params);
    return model;
}

TaskDecision predict_row(const FusionModel& model, const gbdt::Row& full_row) {
    if (full_row.size() != kModalityNames.size())
        throw DataError("fusion: expected a " + std::to_string(kModalityNames.size()) +
                        "-column row, got " + std::to_string(full_row.size()));
    const std::vector<double> proba =
        gbdt::predict_proba(model.ensemble, select_columns(full_row, model.columns));
    const auto it = std::max_element(proba.begin(), proba.end());
    return {static_cast<int>(it - proba.begin()), *it};
}

std::vector<AblationEntry> ablate_modalities(const FusionDataset& validation_rows,
                                             const FusionDataset& test_rows,
                                             const std::vector<std::vector<int>>& subsets,
                                             const gbdt::GridSpec& grid,
                                             std::uint64_t seed) {
    if (subsets.empty()) throw ConfigError("fusion: no modality subsets to ablate");

    std::vector<AblationEntry> entries;
    entries.reserve(subsets.size());
    for (const auto& subset : subsets) {
        const FusionDataset val = project(validation_rows, subset);
        const FusionDataset test = project(test_rows, subset);
        const FusionModel model = tune_and_train_fusion(val, grid, seed);

        std::vector<int> preds;
        preds.reserve(test.rows.size());
        for (const auto& row : test.rows)
            preds.push_back(gbdt::predict_class(model.ensemble, row));
        const metrics::Evaluation eval =
            metrics::evaluate(preds, test.labels, test.n_classes);
        entries.push_back(
            {val.columns, eval.report.macro_f1, eval.report.overall_accuracy});
    }
    return entries;
}

void save_fusion_model(const std::filesystem::path& path, const FusionModel& model) {
    ordered_json j;
    j["format"] = "fusion-model";
    j["version"] = 1;
    j["task"] = model.task_name;
    j["task_index"] = model.task;
    j["n_classes"] = model.n_classes;
    std::vector<std::string> columns;
    for (const int c : model.columns)
        columns.emplace_back(kModalityNames[static_cast<std::size_t>(c)]);
    j["columns"] = columns;
    j["chosen"]["index"] = model.chosen.index;
    j["chosen"]["sample_weight"] = model.chosen.sample_weight;
    j["chosen"]["cv_macro_f1"] = model.chosen.score;
    j["chosen"]["cv_accuracy"] = model.chosen.accuracy;
    j["ensemble"] = ordered_json::parse(gbdt::serialize(model.ensemble));

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out.flush()) throw IoError("short write to " + path.string());
}

FusionModel load_fusion_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }

    FusionModel model;
    try {
        if (j.at("format") != "fusion-model")
            throw ParseError(path.string() + ": not a fusion model file");
        if (j.at("version") != 1)
            throw ParseError(path.string() + ": unsupported version");
        model.task_name = j.at("task").get<std::string>();
        model.task = j.at("task_index").get<std::size_t>();
        model.n_classes = j.at("n_classes").get<std::size_t>();
        for (const auto& name : j.at("columns")) {
            const int id = modality_id(name.get<std::string>());
            if (id < 0)
                throw ParseError(path.string() + ": unknown modality column \"" +
                                 name.get<std::string>() + "\"");
            model.columns.push_back(id);
        }
        const auto& chosen = j.at("chosen");
        model.chosen.index = chosen.at("index").get<std::size_t>();
        model.chosen.sample_weight = chosen.at("sample_weight").get<std::string>();
        model.chosen.score = chosen.at("cv_macro_f1").get<double>();
        model.chosen.accuracy = chosen.at("cv_accuracy").get<double>();
        model.ensemble = gbdt::deserialize(j.at("ensemble").dump());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (model.columns.empty() ||
        model.columns.size() != model.ensemble.n_features)
        throw ParseError(path.string() + ": column list does not match the ensemble");
    model.chosen.params = model.ensemble.params;
    return model;
}

}  // namespace mmc::fusion
