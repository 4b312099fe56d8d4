#include "mmclass/tabular.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mmclass/error.hpp"
#include "mmclass/metrics.hpp"

namespace mmc::tabular {

namespace {

using nlohmann::ordered_json;

int museum_category(const std::vector<std::string>& vocab, const std::string& museum) {
    if (museum.empty() || museum == "[NA]") return 0;
    // vocab[0] is [NA]; the rest is sorted.
    const auto begin = vocab.begin() + 1;
    const auto it = std::lower_bound(begin, vocab.end(), museum);
    if (it == vocab.end() || *it != museum) return 0;
    return static_cast<int>(it - vocab.begin());
}

}  // namespace

gbdt::Row TabularEncoder::encode(const corpus::Record& record) const {
    gbdt::Row row(feature_names.size(), 0);
    for (std::size_t f = 0; f < feature_names.size(); ++f) {
        const int task = feature_tasks[f];
        if (task < 0) {
            row[f] = museum_category(feature_values[f], record.museum);
        } else if (static_cast<std::size_t>(task) < record.labels.size()) {
            const int cls = record.labels[task];
            row[f] = cls < 0 ? 0 : cls + 1;
        }
    }
    return row;
}

TabularDataset build_tabular_inputs(const corpus::RecordSet& records,
                                    const std::string& target_task) {
    const int target = records.schema.task_index(target_task);
    if (target < 0) throw ConfigError("tabular: unknown task \"" + target_task + "\"");

    TabularDataset out;
    out.target_name = target_task;
    out.encoder.target_task = target;
    out.n_classes = records.schema.tasks[target].classes.size();

    std::set<std::string> museums;
    for (const auto& r : records.records)
        if (!r.museum.empty() && r.museum != "[NA]") museums.insert(r.museum);

    out.encoder.feature_names.push_back("museum");
    out.encoder.feature_tasks.push_back(-1);
    std::vector<std::string> museum_vocab{"[NA]"};
    museum_vocab.insert(museum_vocab.end(), museums.begin(), museums.end());
    out.encoder.feature_values.push_back(std::move(museum_vocab));

    for (std::size_t t = 0; t < records.schema.tasks.size(); ++t) {
        if (static_cast<int>(t) == target) continue;
        const auto& task = records.schema.tasks[t];
        out.encoder.feature_names.push_back(task.name);
        out.encoder.feature_tasks.push_back(static_cast<int>(t));
        std::vector<std::string> vocab{"[NA]"};
        vocab.insert(vocab.end(), task.classes.begin(), task.classes.end());
        out.encoder.feature_values.push_back(std::move(vocab));
    }

    for (const auto& r : records.records) {
        if (static_cast<std::size_t>(target) >= r.labels.size()) continue;
        const int label = r.labels[target];
        if (label < 0) continue;
        out.rows.push_back(out.encoder.encode(r));
        out.labels.push_back(label);
        out.record_ids.push_back(r.record_id);
    }
    return out;
}

std::array<TabularDataset, 3> partition(const TabularDataset& dataset,
                                        const corpus::SplitAssignment& split) {
    std::array<TabularDataset, 3> parts;
    for (auto& part : parts) {
        part.target_name = dataset.target_name;
        part.encoder = dataset.encoder;
        part.n_classes = dataset.n_classes;
    }
    for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
        auto& part = parts[static_cast<std::size_t>(split.of(dataset.record_ids[i]))];
        part.rows.push_back(dataset.rows[i]);
        part.labels.push_back(dataset.labels[i]);
        part.record_ids.push_back(dataset.record_ids[i]);
    }
    return parts;
}

TabularModel grid_search_tabular(const TabularDataset& train,
                                 const TabularDataset& validation,
                                 const gbdt::GridSpec& grid, std::uint64_t seed,
                                 std::vector<gbdt::GridOutcome>* outcomes) {
    if (train.rows.empty()) throw ConfigError("tabular: empty training split");

    gbdt::BoostParams base;
    base.seed = seed;
    const std::vector<gbdt::GridPoint> points = enumerate_grid(grid, base);

    std::vector<double> balanced;
    const auto balanced_weights = [&]() -> const std::vector<double>& {
        if (balanced.empty())
            balanced = gbdt::sample_weights_for("balanced", train.labels, train.n_classes);
        return balanced;
    };

    bool have_best = false;
    gbdt::GridOutcome best;
    for (const auto& point : points) {
        gbdt::BoostParams params = point.params;
        if (point.sample_weight == "balanced") params.sample_weights = balanced_weights();
        const gbdt::TreeEnsemble ensemble =
            gbdt::fit(train.rows, train.labels, train.n_classes, params);

        std::vector<int> preds;
        preds.reserve(validation.rows.size());
        for (const auto& row : validation.rows)
            preds.push_back(gbdt::predict_class(ensemble, row));
        const metrics::Evaluation eval =
            metrics::evaluate(preds, validation.labels, validation.n_classes);

        gbdt::GridOutcome outcome{point.index, point.params, point.sample_weight,
                                  eval.report.macro_f1, eval.report.overall_accuracy};
        if (outcomes) outcomes->push_back(outcome);
        if (!have_best || gbdt::improves(outcome.score, outcome.params, best.score,
                                         best.params)) {
            best = outcome;
            have_best = true;
        }
    }

    TabularModel model;
    model.target_name = train.target_name;
    model.encoder = train.encoder;
    model.n_classes = train.n_classes;
    model.chosen = best;
    gbdt::BoostParams params = best.params;
    if (best.sample_weight == "balanced") params.sample_weights = balanced_weights();
    model.ensemble = gbdt::fit(train.rows, train.labels, train.n_classes, params);
    return model;
}

std::vector<int> predict_classes(const TabularModel& model, const gbdt::Matrix& rows) {
    std::vector<int> preds;
    preds.reserve(rows.size());
    for (const auto& row : rows) preds.push_back(gbdt::predict_class(model.ensemble, row));
    return preds;
}

TaskDecision predict_record(const TabularModel& model, const corpus::Record& record) {
    const std::vector<double> proba =
        gbdt::predict_proba(model.ensemble, model.encoder.encode(record));
    const auto it = std::max_element(proba.begin(), proba.end());
    return {static_cast<int>(it - proba.begin()), *it};
}

void save_tabular_model(const std::filesystem::path& path, const TabularModel& model) {
    ordered_json j;
    j["format"] = "tabular-model";
    j["version"] = 1;
    j["target"] = model.target_name;
    j["n_classes"] = model.n_classes;
    j["encoder"]["target_task"] = model.encoder.target_task;
    j["encoder"]["feature_names"] = model.encoder.feature_names;
    j["encoder"]["feature_tasks"] = model.encoder.feature_tasks;
    j["encoder"]["feature_values"] = model.encoder.feature_values;
    j["chosen"]["index"] = model.chosen.index;
    j["chosen"]["sample_weight"] = model.chosen.sample_weight;
    j["chosen"]["macro_f1"] = model.chosen.score;
    j["chosen"]["accuracy"] = model.chosen.accuracy;
    j["ensemble"] = ordered_json::parse(gbdt::serialize(model.ensemble));

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out.flush()) throw IoError("short write to " + path.string());
}

TabularModel load_tabular_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }

    TabularModel model;
    try {
        if (j.at("format") != "tabular-model")
            throw ParseError(path.string() + ": not a tabular model file");
        if (j.at("version") != 1)
            throw ParseError(path.string() + ": unsupported version");
        model.target_name = j.at("target").get<std::string>();
        model.n_classes = j.at("n_classes").get<std::size_t>();
        const auto& enc = j.at("encoder");
        model.encoder.target_task = enc.at("target_task").get<int>();
        model.encoder.feature_names =
            enc.at("feature_names").get<std::vector<std::string>>();
        model.encoder.feature_tasks = enc.at("feature_tasks").get<std::vector<int>>();
        model.encoder.feature_values =
            enc.at("feature_values").get<std::vector<std::vector<std::string>>>();
        const auto& chosen = j.at("chosen");
        model.chosen.index = chosen.at("index").get<std::size_t>();
        model.chosen.sample_weight = chosen.at("sample_weight").get<std::string>();
        model.chosen.score = chosen.at("macro_f1").get<double>();
        model.chosen.accuracy = chosen.at("accuracy").get<double>();
        model.ensemble = gbdt::deserialize(j.at("ensemble").dump());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    model.chosen.params = model.ensemble.params;
    return model;
}

}  // namespace mmc::tabular
