#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

/// Evaluation: confusion matrices, per-class precision/recall/F1, macro-F1,
/// overall accuracy, cross-task averages, and report rendering.
///
/// Predictions may be missing (kMissing). A missing prediction counts as a
/// false negative for the truth class and contributes no false positive to
/// any class; it still counts in the overall-accuracy denominator, so a
/// classifier that cannot score a record is charged for it. The confusion
/// matrix itself covers only the non-missing predictions.
namespace mmc::metrics {

inline constexpr int kMissing = -1;

struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::int64_t> counts;  // row-major, [truth][predicted]

    explicit ConfusionMatrix(std::size_t c = 0)
        : num_classes(c), counts(c * c, 0) {}

    std::int64_t& at(std::size_t truth, std::size_t pred) {
        return counts[truth * num_classes + pred];
    }
    std::int64_t at(std::size_t truth, std::size_t pred) const {
        return counts[truth * num_classes + pred];
    }
    std::int64_t total() const;
    std::int64_t diagonal() const;
};

struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;  // truth count, missing predictions included
};

struct TaskReport {
    std::vector<ClassScore> per_class;
    double macro_f1 = 0.0;          // unweighted mean of class F1
    double overall_accuracy = 0.0;  // diagonal / all records
    std::int64_t evaluated = 0;     // all records, missing included
    std::int64_t missing = 0;       // records without a prediction
};

struct Evaluation {
    TaskReport report;
    ConfusionMatrix matrix;
};

/// predictions[i] in [0, num_classes) or kMissing; truths[i] must be in
/// range. Throws DataError on an out-of-vocabulary class index.
Evaluation evaluate(const std::vector<int>& predictions,
                    const std::vector<int>& truths, std::size_t num_classes);

struct CrossTaskAverage {
    double macro_f1 = 0.0;
    double overall_accuracy = 0.0;
};

/// Unweighted mean across tasks regardless of per-task support.
CrossTaskAverage cross_task_average(const std::vector<TaskReport>& reports);

/// One row per class (precision/recall/F1/support) plus a summary row.
void write_task_report_csv(const std::filesystem::path& path,
                           const TaskReport& report,
                           const std::vector<std::string>& class_names);

void write_confusion_csv(const std::filesystem::path& path,
                         const ConfusionMatrix& matrix,
                         const std::vector<std::string>& class_names);

/// Row-normalized heatmap with cell counts and axis labels.
void render_confusion_png(const std::filesystem::path& path,
                          const ConfusionMatrix& matrix,
                          const std::vector<std::string>& class_names);

}  // namespace mmc::metrics
