#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmclass/gbdt.hpp"

/// Hyperparameter grids for the boosted-tree classifiers. A GridSpec lists
/// candidate values per hyperparameter; enumeration is the full cross
/// product in a fixed order so searches are reproducible. The same spec
/// format drives both the tabular classifiers and the fusion stage.
namespace mmc::gbdt {

struct GridSpec {
    std::vector<double> colsample_bytree{1.0};
    std::vector<double> gamma{0.0};
    std::vector<double> learning_rate{0.3};
    std::vector<int> max_depth{6};
    std::vector<double> min_child_weight{1.0};
    std::vector<int> n_rounds{10};
    std::vector<double> subsample{1.0};
    std::vector<std::string> sample_weight{"none"};

    /// Stock search space for the per-task tabular classifiers.
    static GridSpec tabular_default();
    /// Slightly scaled-down space used when tuning the fusion stage.
    static GridSpec fusion_default();

    std::size_t size() const;

    /// Throws ConfigError when any dimension is empty or a sample_weight
    /// entry is neither "none" nor "balanced".
    void validate() const;

    bool operator==(const GridSpec&) const = default;
};

struct GridPoint {
    std::size_t index = 0;  // position in enumeration order
    BoostParams params;
    std::string sample_weight = "none";
};

/// Cross product in declaration order (colsample outermost, sample_weight
/// innermost). `base` supplies the fields a grid does not tune (lambda,
/// seed); sample_weights on base are ignored.
std::vector<GridPoint> enumerate_grid(const GridSpec& spec, const BoostParams& base = {});

/// Selection order used by every grid search: higher score wins; on equal
/// score, fewer rounds, then a shallower tree. Returns true when the
/// candidate should replace the incumbent, so a full tie keeps the earlier
/// enumeration entry.
bool improves(double score, const BoostParams& params, double best_score,
              const BoostParams& best_params);

/// Per-sample weights for a grid's sample_weight policy: "none" returns an
/// empty vector (leave BoostParams::sample_weights unset), "balanced" uses
/// N / (C * N_c) over the classes present in `labels`. Throws ConfigError
/// on an unknown policy, DataError on an out-of-range label.
std::vector<double> sample_weights_for(const std::string& policy,
                                       const std::vector<int>& labels,
                                       std::size_t n_classes);

/// One scored grid point. `score` is the selection metric (validation or
/// fold-mean macro-F1); `accuracy` is the companion overall accuracy.
struct GridOutcome {
    std::size_t index = 0;
    BoostParams params;
    std::string sample_weight = "none";
    double score = 0.0;
    double accuracy = 0.0;
};

/// CSV table of a whole search, sorted best-first (score descending, then
/// the improves() tie order, then index).
void write_grid_results_csv(const std::filesystem::path& path,
                            const std::vector<GridOutcome>& outcomes);

/// JSON object with one array per hyperparameter; absent keys keep the
/// defaults above. Unknown keys throw ParseError, unreadable files IoError.
GridSpec load_grid(const std::filesystem::path& path);
void save_grid(const std::filesystem::path& path, const GridSpec& spec);

}  // namespace mmc::gbdt
