#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mmclass/csv.hpp"
#include "mmclass/error.hpp"
#include "mmclass/metrics.hpp"
#include "mmclass/png.hpp"
#include "mmclass/rng.hpp"

namespace mm = mmc::metrics;

namespace {

// Independent O(N*C) counting oracle used to cross-check evaluate(). It
// never touches the confusion matrix: every statistic is recomputed from
// raw prediction/truth pairs.
struct OracleResult {
    std::vector<double> precision, recall, f1;
    double macro_f1 = 0.0, oa = 0.0;
};

OracleResult oracle(const std::vector<int>& pred, const std::vector<int>& truth,
                    int c) {
    OracleResult r;
    r.precision.resize(c);
    r.recall.resize(c);
    r.f1.resize(c);
    double correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) correct += 1;
    r.oa = pred.empty() ? 0.0 : correct / static_cast<double>(pred.size());

    double f1_sum = 0;
    for (int k = 0; k < c; ++k) {
        long tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] == k && truth[i] == k) ++tp;
            if (pred[i] == k && truth[i] != k) ++fp;
            // A missing prediction is a false negative for the truth class.
            if (truth[i] == k && pred[i] != k) ++fn;
        }
        r.precision[k] = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
        r.recall[k] = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
        const double denom = r.precision[k] + r.recall[k];
        r.f1[k] = denom > 0 ? 2 * r.precision[k] * r.recall[k] / denom : 0.0;
        f1_sum += r.f1[k];
    }
    r.macro_f1 = c ? f1_sum / c : 0.0;
    return r;
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "mmclass_metrics_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("hand case: [A,A,B] vs [A,B,B]") {
    const auto ev = mm::evaluate({0, 0, 1}, {0, 1, 1}, 2);
    CHECK(ev.report.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(ev.report.per_class[1].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(ev.report.macro_f1 == doctest::Approx(2.0 / 3.0));
    CHECK(ev.report.overall_accuracy == doctest::Approx(2.0 / 3.0));
    CHECK(ev.matrix.at(0, 0) == 1);
    CHECK(ev.matrix.at(1, 0) == 1);
    CHECK(ev.matrix.at(1, 1) == 1);
    CHECK(ev.matrix.at(0, 1) == 0);
}

TEST_CASE("perfect predictions give unit scores") {
    const std::vector<int> v = {0, 1, 2, 2, 1, 0};
    const auto ev = mm::evaluate(v, v, 3);
    CHECK(ev.report.macro_f1 == doctest::Approx(1.0));
    CHECK(ev.report.overall_accuracy == doctest::Approx(1.0));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j) CHECK(ev.matrix.at(i, j) == 0);
}

TEST_CASE("all predictions missing") {
    const auto ev = mm::evaluate({mm::kMissing, mm::kMissing, mm::kMissing},
                                 {0, 1, 0}, 2);
    CHECK(ev.report.overall_accuracy == 0.0);
    for (const auto& s : ev.report.per_class) CHECK(s.f1 == 0.0);
    CHECK(ev.report.missing == 3);
    CHECK(ev.report.evaluated == 3);
    CHECK(ev.matrix.total() == 0);
}

TEST_CASE("missing prediction is a false negative, not a false positive") {
    // One record of class 0 with no prediction; one record of class 1
    // predicted correctly.
    const auto ev = mm::evaluate({mm::kMissing, 1}, {0, 1}, 2);
    CHECK(ev.report.per_class[0].recall == 0.0);
    CHECK(ev.report.per_class[0].precision == 0.0);  // no predictions of class 0
    CHECK(ev.report.per_class[1].precision == 1.0);  // missing added no FP
    CHECK(ev.report.per_class[1].recall == 1.0);
    CHECK(ev.report.overall_accuracy == doctest::Approx(0.5));  // charged for both
}

TEST_CASE("out-of-vocabulary prediction raises") {
    CHECK_THROWS_AS(mm::evaluate({3}, {0}, 2), mmc::DataError);
    CHECK_THROWS_AS(mm::evaluate({0}, {5}, 2), mmc::DataError);
}

TEST_CASE("evaluate matches the counting oracle on random instances") {
    mmc::Rng rng(20240917);
    for (int iter = 0; iter < 1000; ++iter) {
        const int c = 2 + static_cast<int>(rng.next_below(8));  // up to 9 classes
        const int n = 1 + static_cast<int>(rng.next_below(200));
        std::vector<int> pred(n), truth(n);
        for (int i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(rng.next_below(static_cast<uint64_t>(c)));
            // ~15% missing predictions
            pred[i] = rng.next_below(100) < 15
                          ? mm::kMissing
                          : static_cast<int>(rng.next_below(static_cast<uint64_t>(c)));
        }
        const auto ev = mm::evaluate(pred, truth, static_cast<std::size_t>(c));
        const auto ref = oracle(pred, truth, c);
        CHECK(ev.report.macro_f1 == doctest::Approx(ref.macro_f1).epsilon(1e-12));
        CHECK(ev.report.overall_accuracy == doctest::Approx(ref.oa).epsilon(1e-12));
        for (int k = 0; k < c; ++k) {
            CHECK(ev.report.per_class[k].precision ==
                  doctest::Approx(ref.precision[k]).epsilon(1e-12));
            CHECK(ev.report.per_class[k].recall ==
                  doctest::Approx(ref.recall[k]).epsilon(1e-12));
            CHECK(ev.report.per_class[k].f1 ==
                  doctest::Approx(ref.f1[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("macro-F1 is invariant under class relabeling") {
    mmc::Rng rng(77);
    const int c = 4, n = 120;
    std::vector<int> pred(n), truth(n);
    for (int i = 0; i < n; ++i) {
        truth[i] = static_cast<int>(rng.next_below(c));
        pred[i] = rng.next_below(10) < 2 ? mm::kMissing
                                         : static_cast<int>(rng.next_below(c));
    }
    const auto base = mm::evaluate(pred, truth, c);

    std::vector<int> perm = {2, 0, 3, 1};
    auto relabel = [&](int v) { return v == mm::kMissing ? v : perm[v]; };
    std::vector<int> pred2(n), truth2(n);
    for (int i = 0; i < n; ++i) {
        pred2[i] = relabel(pred[i]);
        truth2[i] = relabel(truth[i]);
    }
    const auto mapped = mm::evaluate(pred2, truth2, c);
    CHECK(base.report.macro_f1 == doctest::Approx(mapped.report.macro_f1).epsilon(1e-12));
    CHECK(base.report.overall_accuracy ==
          doctest::Approx(mapped.report.overall_accuracy).epsilon(1e-12));
}

TEST_CASE("overall accuracy equals support-weighted recall") {
    mmc::Rng rng(31);
    for (int iter = 0; iter < 50; ++iter) {
        const int c = 2 + static_cast<int>(rng.next_below(6));
        const int n = 10 + static_cast<int>(rng.next_below(150));
        std::vector<int> pred(n), truth(n);
        for (int i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(rng.next_below(c));
            pred[i] = rng.next_below(10) == 0
                          ? mm::kMissing
                          : static_cast<int>(rng.next_below(c));
        }
        const auto ev = mm::evaluate(pred, truth, c);
        double weighted = 0;
        for (const auto& s : ev.report.per_class)
            weighted += static_cast<double>(s.support) * s.recall;
        weighted /= static_cast<double>(n);
        CHECK(std::fabs(weighted - ev.report.overall_accuracy) < 1e-12);
    }
}

TEST_CASE("cross-task average is an unweighted mean") {
    mm::TaskReport a, b, c, d;
    a.macro_f1 = 0.776;
    b.macro_f1 = 0.742;
    c.macro_f1 = 0.836;
    d.macro_f1 = 0.613;
    const auto avg = mm::cross_task_average({a, b, c, d});
    CHECK(std::round(avg.macro_f1 * 1000.0) / 10.0 == doctest::Approx(74.2));

    const auto single = mm::cross_task_average({c});
    CHECK(single.macro_f1 == doctest::Approx(0.836));

    const auto constant = mm::cross_task_average({b, b, b});
    CHECK(constant.macro_f1 == doctest::Approx(0.742));
}

TEST_CASE("report CSVs are deterministic and re-parse") {
    const auto dir = temp_dir();
    const auto ev = mm::evaluate({0, 0, 1, mm::kMissing}, {0, 1, 1, 0}, 2);
    const std::vector<std::string> names = {"alpha", "beta"};

    const auto p1 = dir / "report1.csv";
    const auto p2 = dir / "report2.csv";
    mm::write_task_report_csv(p1, ev.report, names);
    mm::write_task_report_csv(p2, ev.report, names);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    CHECK(!s1.empty());

    const auto rows = mmc::csv::read_file(p1);
    CHECK(rows.size() == 2 + 1 + 3);  // header + 2 classes + 3 summary rows
    CHECK(rows[0][0] == "class");
    CHECK(rows[1][0] == "alpha");

    const auto cm = dir / "confusion.csv";
    mm::write_confusion_csv(cm, ev.matrix, names);
    const auto cm_rows = mmc::csv::read_file(cm);
    CHECK(cm_rows.size() == 3);
    CHECK(cm_rows[1].size() == 3);
}

TEST_CASE("confusion heatmap renders a valid PNG") {
    const auto dir = temp_dir();
    const auto ev = mm::evaluate({0, 1, 2, 0, 1, 2, 0, 0}, {0, 1, 2, 1, 2, 0, 0, 0}, 3);
    const auto path = dir / "confusion.png";
    mm::render_confusion_png(path, ev.matrix, {"FR", "IT", "ES"});

    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    unsigned char sig[8];
    f.read(reinterpret_cast<char*>(sig), 8);
    CHECK(sig[0] == 0x89);
    CHECK(sig[1] == 'P');
    CHECK(sig[2] == 'N');
    CHECK(sig[3] == 'G');

    // Determinism: render twice, same bytes.
    const auto path2 = dir / "confusion2.png";
    mm::render_confusion_png(path2, ev.matrix, {"FR", "IT", "ES"});
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
}

TEST_CASE("csv round-trips quoted fields") {
    const auto dir = temp_dir();
    const std::vector<mmc::csv::Row> rows = {
        {"record_id", "text", "note"},
        {"r1", "a, plain \"quoted\" value", "line\nbreak"},
        {"r2", "", "[NA]"},
    };
    const auto path = dir / "roundtrip.csv";
    mmc::csv::write_file(path, rows);
    const auto back = mmc::csv::read_file(path);
    CHECK(back == rows);
}

TEST_CASE("csv parser reports unterminated quotes") {
    CHECK_THROWS_AS(mmc::csv::parse("a,\"unterminated\n"), mmc::ParseError);
}

TEST_CASE("tsv split preserves empty fields") {
    const auto fields = mmc::csv::split_tsv("a\t\tc");
    REQUIRE(fields.size() == 3);
    CHECK(fields[0] == "a");
    CHECK(fields[1] == "");
    CHECK(fields[2] == "c");
}
