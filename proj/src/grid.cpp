#include "mmclass/grid.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mmclass/error.hpp"
#include "mmclass/imbalance.hpp"

namespace mmc::gbdt {

namespace {

using nlohmann::ordered_json;

const std::set<std::string> kGridKeys = {
    "colsample_bytree", "gamma",    "learning_rate", "max_depth",
    "min_child_weight", "n_rounds", "subsample",     "sample_weight"};

}  // namespace

GridSpec GridSpec::tabular_default() {
    GridSpec g;
    g.colsample_bytree = {0.6, 0.8, 1.0};
    g.gamma = {0.0, 0.2, 0.4};
    g.learning_rate = {0.1, 0.2, 0.3};
    g.max_depth = {2, 4, 6, 8};
    g.min_child_weight = {1.0, 2.0, 3.0, 4.0};
    g.n_rounds = {100, 500};
    g.subsample = {0.6, 0.8, 1.0};
    g.sample_weight = {"none", "balanced"};
    return g;
}

GridSpec GridSpec::fusion_default() {
    GridSpec g;
    g.colsample_bytree = {0.6, 0.8, 1.0};
    g.gamma = {0.0, 0.2, 0.4};
    g.learning_rate = {0.1, 0.2};
    g.max_depth = {2, 4, 6};
    g.min_child_weight = {1.0, 2.0};
    g.n_rounds = {100, 200, 300};
    g.subsample = {0.6, 0.8, 1.0};
    g.sample_weight = {"none", "balanced"};
    return g;
}

std::size_t GridSpec::size() const {
    return colsample_bytree.size() * gamma.size() * learning_rate.size() *
           max_depth.size() * min_child_weight.size() * n_rounds.size() *
           subsample.size() * sample_weight.size();
}

void GridSpec::validate() const {
    if (colsample_bytree.empty() || gamma.empty() || learning_rate.empty() ||
        max_depth.empty() || min_child_weight.empty() || n_rounds.empty() ||
        subsample.empty() || sample_weight.empty())
        throw ConfigError("grid: every hyperparameter needs at least one value");
    for (const auto& w : sample_weight)
        if (w != "none" && w != "balanced")
            throw ConfigError("grid: unknown sample_weight \"" + w + "\"");
}

std::vector<GridPoint> enumerate_grid(const GridSpec& spec, const BoostParams& base) {
    spec.validate();
    std::vector<GridPoint> points;
    points.reserve(spec.size());
    BoostParams p = base;
    p.sample_weights.reset();
    for (const double cs : spec.colsample_bytree)
        for (const double ga : spec.gamma)
            for (const double lr : spec.learning_rate)
                for (const int depth : spec.max_depth)
                    for (const double mcw : spec.min_child_weight)
                        for (const int rounds : spec.n_rounds)
                            for (const double sub : spec.subsample)
                                for (const auto& weight : spec.sample_weight) {
                                    p.colsample_bytree = cs;
                                    p.gamma = ga;
                                    p.learning_rate = lr;
                                    p.max_depth = depth;
                                    p.min_child_weight = mcw;
                                    p.n_rounds = rounds;
                                    p.subsample = sub;
                                    points.push_back({points.size(), p, weight});
                                }
    return points;
}

bool improves(double score, const BoostParams& params, double best_score,
              const BoostParams& best_params) {
    if (score != best_score) return score > best_score;
    if (params.n_rounds != best_params.n_rounds)
        return params.n_rounds < best_params.n_rounds;
    return params.max_depth < best_params.max_depth;
}

std::vector<double> sample_weights_for(const std::string& policy,
                                       const std::vector<int>& labels,
                                       std::size_t n_classes) {
    if (policy == "none") return {};
    if (policy != "balanced")
        throw ConfigError("grid: unknown sample_weight policy \"" + policy + "\"");

    std::vector<std::int64_t> counts(n_classes, 0);
    for (const int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
            throw DataError("grid: label " + std::to_string(y) + " out of range");
        ++counts[static_cast<std::size_t>(y)];
    }
    // The balanced heuristic runs over the classes present in the labels;
    // absent classes get no weight because no sample needs one.
    std::vector<std::int64_t> present_counts;
    std::vector<std::size_t> present_class;
    for (std::size_t c = 0; c < n_classes; ++c)
        if (counts[c] > 0) {
            present_counts.push_back(counts[c]);
            present_class.push_back(c);
        }
    const std::vector<double> per_class = imbalance::balanced_class_weights(present_counts);
    std::vector<double> by_class(n_classes, 0.0);
    for (std::size_t i = 0; i < present_class.size(); ++i)
        by_class[present_class[i]] = per_class[i];

    std::vector<double> weights(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        weights[i] = by_class[static_cast<std::size_t>(labels[i])];
    return weights;
}

void write_grid_results_csv(const std::filesystem::path& path,
                            const std::vector<GridOutcome>& outcomes) {
    std::vector<const GridOutcome*> order;
    order.reserve(outcomes.size());
    for (const auto& o : outcomes) order.push_back(&o);
    std::sort(order.begin(), order.end(), [](const GridOutcome* a, const GridOutcome* b) {
        if (a->score != b->score) return a->score > b->score;
        if (a->params.n_rounds != b->params.n_rounds)
            return a->params.n_rounds < b->params.n_rounds;
        if (a->params.max_depth != b->params.max_depth)
            return a->params.max_depth < b->params.max_depth;
        return a->index < b->index;
    });

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "rank,index,macro_f1,accuracy,colsample_bytree,gamma,learning_rate,"
           "max_depth,min_child_weight,n_rounds,subsample,sample_weight\n";
    char line[256];
    for (std::size_t r = 0; r < order.size(); ++r) {
        const GridOutcome& o = *order[r];
        std::snprintf(line, sizeof line, "%zu,%zu,%.6f,%.6f,%g,%g,%g,%d,%g,%d,%g,%s\n",
                      r + 1, o.index, o.score, o.accuracy, o.params.colsample_bytree,
                      o.params.gamma, o.params.learning_rate, o.params.max_depth,
                      o.params.min_child_weight, o.params.n_rounds, o.params.subsample,
                      o.sample_weight.c_str());
        out << line;
    }
    if (!out.flush()) throw IoError("short write to " + path.string());
}

GridSpec load_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(path.string() + ": grid must be a JSON object");

    GridSpec spec;
    try {
        for (const auto& [key, value] : j.items()) {
            if (!kGridKeys.count(key))
                throw ParseError(path.string() + ": unknown grid key \"" + key + "\"");
            if (key == "colsample_bytree")
                spec.colsample_bytree = value.get<std::vector<double>>();
            else if (key == "gamma")
                spec.gamma = value.get<std::vector<double>>();
            else if (key == "learning_rate")
                spec.learning_rate = value.get<std::vector<double>>();
            else if (key == "max_depth")
                spec.max_depth = value.get<std::vector<int>>();
            else if (key == "min_child_weight")
                spec.min_child_weight = value.get<std::vector<double>>();
            else if (key == "n_rounds")
                spec.n_rounds = value.get<std::vector<int>>();
            else if (key == "subsample")
                spec.subsample = value.get<std::vector<double>>();
            else
                spec.sample_weight = value.get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    spec.validate();
    return spec;
}

void save_grid(const std::filesystem::path& path, const GridSpec& spec) {
    spec.validate();
    ordered_json j;
    j["colsample_bytree"] = spec.colsample_bytree;
    j["gamma"] = spec.gamma;
    j["learning_rate"] = spec.learning_rate;
    j["max_depth"] = spec.max_depth;
    j["min_child_weight"] = spec.min_child_weight;
    j["n_rounds"] = spec.n_rounds;
    j["subsample"] = spec.subsample;
    j["sample_weight"] = spec.sample_weight;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out.flush()) throw IoError("short write to " + path.string());
}

}  // namespace mmc::gbdt
