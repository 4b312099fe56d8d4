#include "mmclass/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "mmclass/error.hpp"
#include "mmclass/rng.hpp"

namespace mmc::gbdt {

namespace {

using ordered_json = nlohmann::ordered_json;

void validate_params(const BoostParams& p, std::size_t n_rows) {
    if (p.max_depth < 0) throw ConfigError("gbdt: max_depth must be >= 0");
    if (p.n_rounds < 0) throw ConfigError("gbdt: n_rounds must be >= 0");
    if (p.min_child_weight < 0.0)
        throw ConfigError("gbdt: min_child_weight must be >= 0");
    if (p.subsample <= 0.0 || p.subsample > 1.0)
        throw ConfigError("gbdt: subsample must be in (0, 1]");
    if (p.colsample_bytree <= 0.0 || p.colsample_bytree > 1.0)
        throw ConfigError("gbdt: colsample_bytree must be in (0, 1]");
    if (p.lambda < 0.0) throw ConfigError("gbdt: lambda must be >= 0");
    if (p.sample_weights) {
        if (p.sample_weights->size() != n_rows)
            throw ConfigError("gbdt: sample_weights size mismatch");
        for (const double w : *p.sample_weights)
            if (!(w >= 0.0)) throw ConfigError("gbdt: sample weights must be >= 0");
    }
}

struct TreeBuilder {
    const Matrix& rows;
    const std::vector<double>& g;
    const std::vector<double>& h;
    const std::vector<int>& cardinalities;
    const std::vector<int>& features;  // allowed this round, ascending
    const BoostParams& params;
    std::vector<double>& feature_gain;
    Tree tree;

    int build(const std::vector<std::size_t>& node_rows, int depth) {
        double total_g = 0.0, total_h = 0.0;
        for (const auto r : node_rows) {
            total_g += g[r];
            total_h += h[r];
        }

        int best_feature = -1, best_category = -1;
        double best_gain = 0.0;
        if (depth < params.max_depth) {
            const double parent_score =
                total_g * total_g / (total_h + params.lambda);
            std::vector<double> cat_g, cat_h;
            for (const int f : features) {
                cat_g.assign(static_cast<std::size_t>(cardinalities[f]), 0.0);
                cat_h.assign(static_cast<std::size_t>(cardinalities[f]), 0.0);
                for (const auto r : node_rows) {
                    const auto c = static_cast<std::size_t>(rows[r][f]);
                    cat_g[c] += g[r];
                    cat_h[c] += h[r];
                }
                for (std::size_t c = 0; c < cat_g.size(); ++c) {
                    const double hl = cat_h[c], hr = total_h - cat_h[c];
                    if (hl < params.min_child_weight || hr < params.min_child_weight)
                        continue;
                    const double gl = cat_g[c], gr = total_g - cat_g[c];
                    const double gain = 0.5 * (gl * gl / (hl + params.lambda) +
                                               gr * gr / (hr + params.lambda) -
                                               parent_score) -
                                        params.gamma;
                    if (gain > best_gain) {  // strict: first hit wins ties
                        best_gain = gain;
                        best_feature = f;
                        best_category = static_cast<int>(c);
                    }
                }
            }
        }

        if (best_feature < 0) {
            TreeNode leaf;
            leaf.value = -params.learning_rate * total_g / (total_h + params.lambda);
            tree.nodes.push_back(leaf);
            return static_cast<int>(tree.nodes.size()) - 1;
        }

        feature_gain[static_cast<std::size_t>(best_feature)] += best_gain;
        std::vector<std::size_t> left_rows, right_rows;
        for (const auto r : node_rows) {
            if (rows[r][best_feature] == best_category)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }

        TreeNode node;
        node.feature = best_feature;
        node.category = best_category;
        tree.nodes.push_back(node);
        const int index = static_cast<int>(tree.nodes.size()) - 1;
        const int left = build(left_rows, depth + 1);
        const int right = build(right_rows, depth + 1);
        tree.nodes[static_cast<std::size_t>(index)].left = left;
        tree.nodes[static_cast<std::size_t>(index)].right = right;
        return index;
    }
};

double route(const Tree& tree, const Row& row) {
    int at = 0;
    while (!tree.nodes[static_cast<std::size_t>(at)].is_leaf()) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(at)];
        at = row[static_cast<std::size_t>(node.feature)] == node.category
                 ? node.left
                 : node.right;
    }
    return tree.nodes[static_cast<std::size_t>(at)].value;
}

Row normalized(const TreeEnsemble& ensemble, const Row& row) {
    if (row.size() != ensemble.n_features)
        throw DataError("gbdt: row has " + std::to_string(row.size()) +
                        " features, model expects " +
                        std::to_string(ensemble.n_features));
    Row out = row;
    for (std::size_t f = 0; f < out.size(); ++f)
        if (out[f] < 0 || out[f] >= ensemble.cardinalities[f]) out[f] = 0;
    return out;
}

ordered_json params_to_json(const BoostParams& p) {
    ordered_json j;
    j["max_depth"] = p.max_depth;
    j["min_child_weight"] = p.min_child_weight;
    j["gamma"] = p.gamma;
    j["subsample"] = p.subsample;
    j["colsample_bytree"] = p.colsample_bytree;
    j["learning_rate"] = p.learning_rate;
    j["n_rounds"] = p.n_rounds;
    j["lambda"] = p.lambda;
    j["seed"] = p.seed;
    return j;
}

BoostParams params_from_json(const ordered_json& j) {
    BoostParams p;
    p.max_depth = j.at("max_depth").get<int>();
    p.min_child_weight = j.at("min_child_weight").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.subsample = j.at("subsample").get<double>();
    p.colsample_bytree = j.at("colsample_bytree").get<double>();
    p.learning_rate = j.at("learning_rate").get<double>();
    p.n_rounds = j.at("n_rounds").get<int>();
    p.lambda = j.at("lambda").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

}  // namespace

TreeEnsemble fit(const Matrix& rows, const std::vector<int>& labels,
                 std::size_t n_classes, const BoostParams& params) {
    if (rows.empty()) throw ConfigError("gbdt: no training rows");
    const std::size_t n_features = rows[0].size();
    if (n_features == 0) throw ConfigError("gbdt: empty feature set");
    if (labels.size() != rows.size())
        throw DataError("gbdt: labels size mismatch");
    if (n_classes < 2) throw ConfigError("gbdt: need at least two classes");
    validate_params(params, rows.size());

    std::set<int> distinct;
    for (const int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
            throw DataError("gbdt: label " + std::to_string(y) +
                            " outside [0, " + std::to_string(n_classes) + ")");
        distinct.insert(y);
    }
    if (distinct.size() < 2)
        throw DataError("gbdt: degenerate problem, all labels identical");

    TreeEnsemble ensemble;
    ensemble.params = params;
    ensemble.params.sample_weights.reset();  // runtime data, not model state
    ensemble.n_classes = n_classes;
    ensemble.n_features = n_features;
    ensemble.cardinalities.assign(n_features, 1);  // [NA] always exists
    for (const auto& row : rows) {
        if (row.size() != n_features)
            throw DataError("gbdt: ragged feature matrix");
        for (std::size_t f = 0; f < n_features; ++f) {
            if (row[f] < 0)
                throw DataError("gbdt: negative category id in training data");
            ensemble.cardinalities[f] =
                std::max(ensemble.cardinalities[f], row[f] + 1);
        }
    }
    ensemble.feature_gain.assign(n_features, 0.0);

    const std::size_t n = rows.size();
    std::vector<double> weights(n, 1.0);
    if (params.sample_weights) weights = *params.sample_weights;

    double weight_total = 0.0;
    std::vector<double> class_weight(n_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        class_weight[static_cast<std::size_t>(labels[i])] += weights[i];
        weight_total += weights[i];
    }
    if (weight_total <= 0.0) throw ConfigError("gbdt: total sample weight is zero");
    ensemble.base_scores.resize(n_classes);
    for (std::size_t k = 0; k < n_classes; ++k)
        ensemble.base_scores[k] =
            std::log(std::max(class_weight[k] / weight_total, 1e-12));

    std::vector<std::vector<double>> margins(n, ensemble.base_scores);
    std::vector<double> g(n), h(n), probs;
    Rng rng(params.seed);
    std::vector<int> all_features(n_features);
    std::iota(all_features.begin(), all_features.end(), 0);

    for (int round = 0; round < params.n_rounds; ++round) {
        std::vector<std::size_t> round_rows;
        if (params.subsample < 1.0) {
            for (std::size_t i = 0; i < n; ++i)
                if (rng.next_bernoulli(params.subsample)) round_rows.push_back(i);
            if (round_rows.empty())
                for (std::size_t i = 0; i < n; ++i) round_rows.push_back(i);
        } else {
            round_rows.resize(n);
            std::iota(round_rows.begin(), round_rows.end(), std::size_t{0});
        }

        std::vector<int> round_features = all_features;
        if (params.colsample_bytree < 1.0) {
            rng.shuffle(round_features);
            const auto keep = static_cast<std::size_t>(std::ceil(
                params.colsample_bytree * static_cast<double>(n_features)));
            round_features.resize(std::max<std::size_t>(1, keep));
            std::sort(round_features.begin(), round_features.end());
        }

        // probability snapshot shared by all class trees of this round
        std::vector<std::vector<double>> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& m = margins[i];
            const double mmax = *std::max_element(m.begin(), m.end());
            double sum = 0.0;
            p[i].resize(n_classes);
            for (std::size_t k = 0; k < n_classes; ++k) {
                p[i][k] = std::exp(m[k] - mmax);
                sum += p[i][k];
            }
            for (double& v : p[i]) v /= sum;
        }

        ensemble.rounds.emplace_back();
        for (std::size_t k = 0; k < n_classes; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                const double y = labels[i] == static_cast<int>(k) ? 1.0 : 0.0;
                g[i] = weights[i] * (p[i][k] - y);
                h[i] = weights[i] * (p[i][k] * (1.0 - p[i][k]));
            }
            TreeBuilder builder{rows,          g,
                                h,             ensemble.cardinalities,
                                round_features, params,
                                ensemble.feature_gain};
            builder.build(round_rows, 0);
            Tree tree = std::move(builder.tree);
            for (std::size_t i = 0; i < n; ++i) margins[i][k] += route(tree, rows[i]);
            ensemble.rounds.back().push_back(std::move(tree));
        }
    }
    return ensemble;
}

std::vector<double> predict_margins(const TreeEnsemble& ensemble, const Row& row) {
    const Row x = normalized(ensemble, row);
    std::vector<double> margins = ensemble.base_scores;
    for (const auto& round : ensemble.rounds)
        for (std::size_t k = 0; k < round.size(); ++k)
            margins[k] += route(round[k], x);
    return margins;
}

std::vector<double> predict_proba(const TreeEnsemble& ensemble, const Row& row) {
    std::vector<double> m = predict_margins(ensemble, row);
    const double mmax = *std::max_element(m.begin(), m.end());
    double sum = 0.0;
    for (double& v : m) {
        v = std::exp(v - mmax);
        sum += v;
    }
    for (double& v : m) v /= sum;
    return m;
}

int predict_class(const TreeEnsemble& ensemble, const Row& row) {
    const auto m = predict_margins(ensemble, row);
    return static_cast<int>(std::max_element(m.begin(), m.end()) - m.begin());
}

ImportanceReport feature_importance(const TreeEnsemble& ensemble) {
    ImportanceReport report;
    report.share.assign(ensemble.n_features, 0.0);
    const double total = std::accumulate(ensemble.feature_gain.begin(),
                                         ensemble.feature_gain.end(), 0.0);
    if (total <= 0.0) {
        report.no_splits = true;
        return report;
    }
    for (std::size_t f = 0; f < ensemble.n_features; ++f)
        report.share[f] = ensemble.feature_gain[f] / total;
    return report;
}

std::string serialize(const TreeEnsemble& ensemble) {
    ordered_json j;
    j["format"] = "gbdt-ensemble";
    j["version"] = 1;
    j["params"] = params_to_json(ensemble.params);
    j["n_classes"] = ensemble.n_classes;
    j["n_features"] = ensemble.n_features;
    j["cardinalities"] = ensemble.cardinalities;
    j["base_scores"] = ensemble.base_scores;
    j["feature_gain"] = ensemble.feature_gain;
    ordered_json rounds = ordered_json::array();
    for (const auto& round : ensemble.rounds) {
        ordered_json trees = ordered_json::array();
        for (const auto& tree : round) {
            ordered_json nodes = ordered_json::array();
            for (const auto& node : tree.nodes) {
                ordered_json n;
                if (node.is_leaf()) {
                    n["value"] = node.value;
                } else {
                    n["feature"] = node.feature;
                    n["category"] = node.category;
                    n["left"] = node.left;
                    n["right"] = node.right;
                }
                nodes.push_back(std::move(n));
            }
            trees.push_back(std::move(nodes));
        }
        rounds.push_back(std::move(trees));
    }
    j["trees"] = std::move(rounds);
    return j.dump(2) + "\n";
}

TreeEnsemble deserialize(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("gbdt: bad ensemble JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "gbdt-ensemble")
            throw ParseError("gbdt: not an ensemble file");
        if (j.at("version").get<int>() != 1)
            throw ParseError("gbdt: unsupported ensemble version");
        TreeEnsemble ensemble;
        ensemble.params = params_from_json(j.at("params"));
        ensemble.n_classes = j.at("n_classes").get<std::size_t>();
        ensemble.n_features = j.at("n_features").get<std::size_t>();
        ensemble.cardinalities = j.at("cardinalities").get<std::vector<int>>();
        ensemble.base_scores = j.at("base_scores").get<std::vector<double>>();
        ensemble.feature_gain = j.at("feature_gain").get<std::vector<double>>();
        for (const auto& round : j.at("trees")) {
            ensemble.rounds.emplace_back();
            for (const auto& tree_json : round) {
                Tree tree;
                for (const auto& n : tree_json) {
                    TreeNode node;
                    if (n.contains("value")) {
                        node.value = n.at("value").get<double>();
                    } else {
                        node.feature = n.at("feature").get<int>();
                        node.category = n.at("category").get<int>();
                        node.left = n.at("left").get<int>();
                        node.right = n.at("right").get<int>();
                    }
                    tree.nodes.push_back(node);
                }
                ensemble.rounds.back().push_back(std::move(tree));
            }
        }
        return ensemble;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("gbdt: malformed ensemble: ") + e.what());
    }
}

void save_ensemble(const std::filesystem::path& path,
                   const TreeEnsemble& ensemble) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write ensemble " + path.string());
    out << serialize(ensemble);
    if (!out) throw IoError("write failed for ensemble " + path.string());
}

TreeEnsemble load_ensemble(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read ensemble " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), {});
    return deserialize(text);
}

}  // namespace mmc::gbdt
