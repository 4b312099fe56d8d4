#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

/// Gradient-boosted decision trees over categorical features with a
/// multiclass softmax objective and second-order split gain. Features are
/// small-cardinality category ids; id 0 is the [NA] slot and unseen ids
/// route there at inference, so prediction is total.
namespace mmc::gbdt {

struct BoostParams {
    int max_depth = 6;
    double min_child_weight = 1.0;  // minimum hessian mass per child
    double gamma = 0.0;             // minimum gain to accept a split
    double subsample = 1.0;         // row fraction per round
    double colsample_bytree = 1.0;  // feature fraction per round
    double learning_rate = 0.3;
    int n_rounds = 10;
    double lambda = 1.0;  // leaf L2
    std::optional<std::vector<double>> sample_weights;
    std::uint64_t seed = 0;
};

/// feature < 0 marks a leaf. Internal nodes test row[feature] == category:
/// matching rows descend left, the rest right.
struct TreeNode {
    int feature = -1;
    int category = -1;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct TreeEnsemble {
    BoostParams params;
    std::size_t n_classes = 0;
    std::size_t n_features = 0;
    std::vector<int> cardinalities;   // categories per feature seen in training
    std::vector<double> base_scores;  // per-class log prior
    std::vector<std::vector<Tree>> rounds;  // rounds[t][class]
    std::vector<double> feature_gain;       // accumulated split gain
};

using Row = std::vector<int>;
using Matrix = std::vector<Row>;

/// Boosts n_rounds × n_classes trees. Round t computes class probabilities
/// from the current margins, derives g = p - 1{y=c} and h = p(1-p) (both
/// sample-weight multiplied), and grows one tree per class on those
/// statistics. Split gain is
///   1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma,
/// accepted only when positive; ties go to the lowest feature id, then the
/// lowest category id. Leaf value = -learning_rate * G/(H+lambda).
/// Throws DataError when labels hold fewer than two distinct classes,
/// ConfigError on an empty feature set or bad params.
TreeEnsemble fit(const Matrix& rows, const std::vector<int>& labels,
                 std::size_t n_classes, const BoostParams& params);

/// Raw per-class scores: base score plus the leaf values along the row's
/// path through every tree.
std::vector<double> predict_margins(const TreeEnsemble& ensemble, const Row& row);

/// Softmax over margins; sums to 1.
std::vector<double> predict_proba(const TreeEnsemble& ensemble, const Row& row);

/// Argmax class; ties go to the lowest class index.
int predict_class(const TreeEnsemble& ensemble, const Row& row);

struct ImportanceReport {
    std::vector<double> share;  // per-feature gain, normalized to sum 1
    bool no_splits = false;     // stump-only ensemble: shares are all zero
};

ImportanceReport feature_importance(const TreeEnsemble& ensemble);

/// Canonical JSON: stable field order, shortest round-trip numbers, so
/// equal ensembles serialize to equal strings.
std::string serialize(const TreeEnsemble& ensemble);
TreeEnsemble deserialize(const std::string& text);

void save_ensemble(const std::filesystem::path& path, const TreeEnsemble& ensemble);
TreeEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace mmc::gbdt
