#include "mmclass/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "mmclass/csv.hpp"
#include "mmclass/error.hpp"
#include "mmclass/png.hpp"

namespace mmc::metrics {

namespace {

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::diagonal() const {
    std::int64_t d = 0;
    for (std::size_t i = 0; i < num_classes; ++i) d += at(i, i);
    return d;
}

Evaluation evaluate(const std::vector<int>& predictions,
                    const std::vector<int>& truths, std::size_t num_classes) {
    if (predictions.size() != truths.size())
        throw DataError("evaluate: prediction/truth length mismatch");

    Evaluation ev{TaskReport{}, ConfusionMatrix(num_classes)};
    const auto c = static_cast<int>(num_classes);
    std::vector<std::int64_t> missing_fn(num_classes, 0);
    std::vector<std::int64_t> support(num_classes, 0);

    for (std::size_t i = 0; i < truths.size(); ++i) {
        const int t = truths[i];
        if (t < 0 || t >= c)
            throw DataError("evaluate: truth class " + std::to_string(t) +
                            " outside vocabulary of size " + std::to_string(c));
        ++support[t];
        const int p = predictions[i];
        if (p == kMissing) {
            ++missing_fn[t];
            ++ev.report.missing;
            continue;
        }
        if (p < 0 || p >= c)
            throw DataError("evaluate: predicted class " + std::to_string(p) +
                            " outside vocabulary of size " + std::to_string(c));
        ++ev.matrix.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }

    ev.report.evaluated = static_cast<std::int64_t>(truths.size());
    ev.report.per_class.resize(num_classes);
    double f1_sum = 0.0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        std::int64_t tp = ev.matrix.at(k, k);
        std::int64_t row = 0, col = 0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            row += ev.matrix.at(k, j);
            col += ev.matrix.at(j, k);
        }
        const std::int64_t fp = col - tp;
        const std::int64_t fn = row - tp + missing_fn[k];

        ClassScore& s = ev.report.per_class[k];
        s.support = support[k];
        s.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
        s.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
        s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);
        f1_sum += s.f1;
    }
    ev.report.macro_f1 = num_classes ? f1_sum / static_cast<double>(num_classes) : 0.0;
    ev.report.overall_accuracy =
        safe_div(static_cast<double>(ev.matrix.diagonal()),
                 static_cast<double>(ev.report.evaluated));
    return ev;
}

CrossTaskAverage cross_task_average(const std::vector<TaskReport>& reports) {
    CrossTaskAverage avg;
    if (reports.empty()) return avg;
    for (const auto& r : reports) {
        avg.macro_f1 += r.macro_f1;
        avg.overall_accuracy += r.overall_accuracy;
    }
    avg.macro_f1 /= static_cast<double>(reports.size());
    avg.overall_accuracy /= static_cast<double>(reports.size());
    return avg;
}

void write_task_report_csv(const std::filesystem::path& path,
                           const TaskReport& report,
                           const std::vector<std::string>& class_names) {
    std::vector<csv::Row> rows;
    rows.push_back({"class", "precision", "recall", "f1", "support"});
    for (std::size_t k = 0; k < report.per_class.size(); ++k) {
        const ClassScore& s = report.per_class[k];
        rows.push_back({class_names.at(k), format_double(s.precision),
                        format_double(s.recall), format_double(s.f1),
                        std::to_string(s.support)});
    }
    rows.push_back({"macro_f1", "", "", format_double(report.macro_f1), ""});
    rows.push_back({"overall_accuracy", "", "", format_double(report.overall_accuracy),
                    std::to_string(report.evaluated)});
    rows.push_back({"missing_predictions", "", "", "", std::to_string(report.missing)});
    csv::write_file(path, rows);
}

void write_confusion_csv(const std::filesystem::path& path,
                         const ConfusionMatrix& matrix,
                         const std::vector<std::string>& class_names) {
    std::vector<csv::Row> rows;
    csv::Row header = {"truth\\predicted"};
    for (const auto& name : class_names) header.push_back(name);
    rows.push_back(header);
    for (std::size_t i = 0; i < matrix.num_classes; ++i) {
        csv::Row row = {class_names.at(i)};
        for (std::size_t j = 0; j < matrix.num_classes; ++j)
            row.push_back(std::to_string(matrix.at(i, j)));
        rows.push_back(row);
    }
    csv::write_file(path, rows);
}

void render_confusion_png(const std::filesystem::path& path,
                          const ConfusionMatrix& matrix,
                          const std::vector<std::string>& class_names) {
    const int c = static_cast<int>(matrix.num_classes);
    const int cell = 64;
    int label_w = 40;
    for (const auto& name : class_names)
        label_w = std::max(label_w, png::text_width(name) + 10);
    const int label_h = 14;
    const int width = label_w + c * cell + 8;
    const int height = label_h + c * cell + 8;

    png::Image img(width, height);

    std::vector<std::int64_t> row_sums(matrix.num_classes, 0);
    for (std::size_t i = 0; i < matrix.num_classes; ++i)
        for (std::size_t j = 0; j < matrix.num_classes; ++j)
            row_sums[i] += matrix.at(i, j);

    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) {
            const auto count = matrix.at(static_cast<std::size_t>(i),
                                         static_cast<std::size_t>(j));
            const double share =
                row_sums[i] ? static_cast<double>(count) / static_cast<double>(row_sums[i])
                            : 0.0;
            // White at 0 toward a saturated blue at 1.
            const auto shade = static_cast<std::uint8_t>(255.0 - 205.0 * share);
            const int x = label_w + j * cell;
            const int y = label_h + i * cell;
            img.fill_rect(x, y, cell - 1, cell - 1, shade, shade, 255);

            const std::string text = std::to_string(count);
            const std::uint8_t ink = share > 0.6 ? 255 : 32;
            png::draw_text(img, x + (cell - png::text_width(text)) / 2,
                           y + (cell - png::kGlyphHeight) / 2, text, ink, ink, ink);
        }
    }

    for (int i = 0; i < c; ++i) {
        png::draw_text(img, 4, label_h + i * cell + (cell - png::kGlyphHeight) / 2,
                       class_names.at(static_cast<std::size_t>(i)), 0, 0, 0);
        png::draw_text(img, label_w + i * cell + 4, 4,
                       class_names.at(static_cast<std::size_t>(i)), 0, 0, 0);
    }

    png::write_png(path, img);
}

}  // namespace mmc::metrics
