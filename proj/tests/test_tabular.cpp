#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "mmclass/error.hpp"
#include "mmclass/grid.hpp"
#include "mmclass/metrics.hpp"
#include "mmclass/rng.hpp"
#include "mmclass/tabular.hpp"
#include "test_util.hpp"

using namespace mmc;

namespace {

corpus::Record make_record(std::string id, std::string museum,
                           std::vector<int> labels) {
    corpus::Record r;
    r.record_id = std::move(id);
    r.museum = std::move(museum);
    r.labels = std::move(labels);
    return r;
}

// Deterministic categorical toy: one feature whose category fixes the
// label, plus a constant distractor column.
tabular::TabularDataset categorical_toy(std::size_t n, std::size_t n_classes,
                                        std::uint64_t seed) {
    tabular::TabularDataset d;
    d.target_name = "toy";
    d.n_classes = n_classes;
    d.encoder.target_task = 0;
    d.encoder.feature_names = {"signal", "constant"};
    d.encoder.feature_tasks = {-1, -1};
    d.encoder.feature_values = {{"[NA]"}, {"[NA]"}};
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(rng.next_below(n_classes));
        d.rows.push_back({label + 1, 1});
        d.labels.push_back(label);
        d.record_ids.push_back("r" + std::to_string(i));
    }
    return d;
}

tabular::TabularDataset dataset_from(const gbdt::Matrix& rows,
                                     const std::vector<int>& labels,
                                     std::size_t n_classes,
                                     std::size_t n_features) {
    tabular::TabularDataset d;
    d.target_name = "toy";
    d.n_classes = n_classes;
    d.encoder.target_task = 0;
    for (std::size_t f = 0; f < n_features; ++f) {
        d.encoder.feature_names.push_back("f" + std::to_string(f));
        d.encoder.feature_tasks.push_back(-1);
        d.encoder.feature_values.push_back({"[NA]"});
    }
    d.rows = rows;
    d.labels = labels;
    for (std::size_t i = 0; i < rows.size(); ++i)
        d.record_ids.push_back("r" + std::to_string(i));
    return d;
}

gbdt::GridSpec singleton_grid(int depth, int rounds, double lr = 0.3) {
    gbdt::GridSpec g;
    g.colsample_bytree = {1.0};
    g.gamma = {0.0};
    g.learning_rate = {lr};
    g.max_depth = {depth};
    g.min_child_weight = {1.0};
    g.n_rounds = {rounds};
    g.subsample = {1.0};
    g.sample_weight = {"none"};
    return g;
}

}  // namespace

TEST_CASE("grid spec defaults enumerate their full cross product") {
    const auto tab = gbdt::GridSpec::tabular_default();
    CHECK_EQ(tab.size(), 3u * 3 * 3 * 4 * 4 * 2 * 3 * 2);
    const auto fus = gbdt::GridSpec::fusion_default();
    CHECK_EQ(fus.size(), 3u * 3 * 2 * 3 * 2 * 3 * 3 * 2);

    const auto points = enumerate_grid(fus);
    REQUIRE_EQ(points.size(), fus.size());
    for (std::size_t i = 0; i < points.size(); ++i) CHECK_EQ(points[i].index, i);

    // Declaration order: first point takes every leading value, the last
    // point every trailing one.
    CHECK_EQ(points.front().params.colsample_bytree, 0.6);
    CHECK_EQ(points.front().params.max_depth, 2);
    CHECK_EQ(points.front().params.n_rounds, 100);
    CHECK_EQ(points.front().sample_weight, "none");
    CHECK_EQ(points.back().params.colsample_bytree, 1.0);
    CHECK_EQ(points.back().params.max_depth, 6);
    CHECK_EQ(points.back().params.n_rounds, 300);
    CHECK_EQ(points.back().sample_weight, "balanced");

    // sample_weight is the innermost loop.
    CHECK_EQ(points[1].sample_weight, "balanced");
    CHECK_EQ(points[1].params.subsample, points[0].params.subsample);

    // Every combination is distinct.
    std::set<std::string> seen;
    for (const auto& p : points) {
        std::ostringstream key;
        key << p.params.colsample_bytree << ':' << p.params.gamma << ':'
            << p.params.learning_rate << ':' << p.params.max_depth << ':'
            << p.params.min_child_weight << ':' << p.params.n_rounds << ':'
            << p.params.subsample << ':' << p.sample_weight;
        seen.insert(key.str());
    }
    CHECK_EQ(seen.size(), points.size());
}

TEST_CASE("grid spec validation rejects empty dimensions and bad policies") {
    gbdt::GridSpec g;
    g.max_depth.clear();
    CHECK_THROWS_AS(g.validate(), ConfigError);
    CHECK_THROWS_AS(enumerate_grid(g), ConfigError);

    gbdt::GridSpec h;
    h.sample_weight = {"none", "focal"};
    CHECK_THROWS_AS(h.validate(), ConfigError);
}

TEST_CASE("grid JSON files round-trip and ship the stock spaces") {
    const auto dir = test_util::fresh_dir("grid_json");

    const auto spec = gbdt::GridSpec::fusion_default();
    gbdt::save_grid(dir / "g.json", spec);
    CHECK_EQ(gbdt::load_grid(dir / "g.json"), spec);

    CHECK_EQ(gbdt::load_grid(MMCLASS_SOURCE_DIR "/data/grids/tabular.json"),
             gbdt::GridSpec::tabular_default());
    CHECK_EQ(gbdt::load_grid(MMCLASS_SOURCE_DIR "/data/grids/fusion.json"),
             gbdt::GridSpec::fusion_default());

    // Absent keys keep defaults; unknown keys and junk are rejected.
    test_util::write_text(dir / "partial.json", "{\"max_depth\": [3, 5]}\n");
    const auto partial = gbdt::load_grid(dir / "partial.json");
    CHECK_EQ(partial.max_depth, std::vector<int>{3, 5});
    CHECK_EQ(partial.learning_rate, gbdt::GridSpec{}.learning_rate);

    test_util::write_text(dir / "unknown.json", "{\"max_dpeth\": [3]}\n");
    CHECK_THROWS_AS(gbdt::load_grid(dir / "unknown.json"), ParseError);
    test_util::write_text(dir / "array.json", "[1, 2]\n");
    CHECK_THROWS_AS(gbdt::load_grid(dir / "array.json"), ParseError);
    test_util::write_text(dir / "junk.json", "not json\n");
    CHECK_THROWS_AS(gbdt::load_grid(dir / "junk.json"), ParseError);
    CHECK_THROWS_AS(gbdt::load_grid(dir / "absent.json"), IoError);
}

TEST_CASE("grid selection prefers score, then fewer rounds, then lower depth") {
    gbdt::BoostParams a;
    a.n_rounds = 500;
    a.max_depth = 8;
    gbdt::BoostParams b;
    b.n_rounds = 100;
    b.max_depth = 2;

    CHECK(gbdt::improves(0.7, a, 0.6, b));
    CHECK_FALSE(gbdt::improves(0.6, b, 0.7, a));
    CHECK(gbdt::improves(0.6, b, 0.6, a));        // fewer rounds
    CHECK_FALSE(gbdt::improves(0.6, a, 0.6, b));  // more rounds never wins a tie
    gbdt::BoostParams c = b;
    c.max_depth = 4;
    CHECK(gbdt::improves(0.6, b, 0.6, c));  // equal rounds, lower depth
    CHECK_FALSE(gbdt::improves(0.6, b, 0.6, b));  // full tie keeps the incumbent
}

TEST_CASE("balanced sample weights cover present classes only") {
    CHECK(gbdt::sample_weights_for("none", {0, 1, 0}, 2).empty());

    // Counts 2 and 1 over two present classes of three: N/(C*N_c) with
    // N=3, C=2.
    const auto w = gbdt::sample_weights_for("balanced", {0, 0, 2}, 3);
    REQUIRE_EQ(w.size(), 3u);
    CHECK_EQ(w[0], doctest::Approx(3.0 / (2.0 * 2.0)));
    CHECK_EQ(w[1], doctest::Approx(3.0 / (2.0 * 2.0)));
    CHECK_EQ(w[2], doctest::Approx(3.0 / (2.0 * 1.0)));

    CHECK_THROWS_AS(gbdt::sample_weights_for("uniform", {0}, 2), ConfigError);
    CHECK_THROWS_AS(gbdt::sample_weights_for("balanced", {0, 5}, 2), DataError);
}

TEST_CASE("tabular encoding mirrors the documented museum example") {
    corpus::RecordSet rs;
    rs.schema = corpus::TaskSchema::default_schema();
    // material "animal fibre" = class 0; place missing.
    rs.records.push_back(make_record("a", "risd", {-1, -1, -1, 0}));
    rs.records.push_back(make_record("b", "met", {0, 1, 2, 1}));

    const auto d = tabular::build_tabular_inputs(rs, "place");
    CHECK_EQ(d.target_name, "place");
    CHECK_EQ(d.n_classes, 9u);
    CHECK_EQ(d.encoder.feature_names,
             std::vector<std::string>{"museum", "timespan", "technique", "material"});
    // Feature count equals the task count: museum replaces the target.
    CHECK_EQ(d.encoder.num_features(), rs.schema.tasks.size());

    // Record "a" is unlabeled for place, so only "b" yields a row.
    REQUIRE_EQ(d.rows.size(), 1u);
    CHECK_EQ(d.record_ids[0], "b");
    CHECK_EQ(d.labels[0], 0);

    // The example row itself goes through the shared encoder.
    const gbdt::Row row = d.encoder.encode(rs.records[0]);
    const auto& museums = d.encoder.feature_values[0];
    CHECK_EQ(museums, std::vector<std::string>{"[NA]", "met", "risd"});
    CHECK_EQ(row, gbdt::Row{2, 0, 0, 1});  // (risd, [NA], [NA], animal fibre)

    // A fully labeled record has no [NA] cell.
    const gbdt::Row full = d.encoder.encode(rs.records[1]);
    CHECK_EQ(full, gbdt::Row{1, 2, 3, 2});
    CHECK(std::none_of(full.begin(), full.end(), [](int v) { return v == 0; }));
}

TEST_CASE("tabular encoder maps unknown and absent museums to [NA]") {
    corpus::RecordSet rs;
    rs.schema = corpus::TaskSchema::default_schema();
    rs.records.push_back(make_record("a", "vam", {0, 0, 0, 0}));
    const auto d = tabular::build_tabular_inputs(rs, "material");

    CHECK_EQ(d.encoder.encode(make_record("x", "vam", {1, -1, -1, -1}))[0], 1);
    CHECK_EQ(d.encoder.encode(make_record("x", "louvre", {1, -1, -1, -1}))[0], 0);
    CHECK_EQ(d.encoder.encode(make_record("x", "", {1, -1, -1, -1}))[0], 0);
    CHECK_EQ(d.encoder.encode(make_record("x", "[NA]", {1, -1, -1, -1}))[0], 0);

    CHECK_THROWS_AS(tabular::build_tabular_inputs(rs, "century"), ConfigError);
}

TEST_CASE("tabular museum vocabulary is sorted and split-independent") {
    corpus::RecordSet rs;
    rs.schema = corpus::TaskSchema::default_schema();
    const std::vector<std::string> museums = {"zmuseum", "amuseum", "mmuseum",
                                              "amuseum", "zmuseum"};
    for (std::size_t i = 0; i < museums.size(); ++i)
        rs.records.push_back(
            make_record("r" + std::to_string(i), museums[i],
                        {static_cast<int>(i % 3), -1, -1, -1}));

    const auto d = tabular::build_tabular_inputs(rs, "place");
    CHECK_EQ(d.encoder.feature_values[0],
             std::vector<std::string>{"[NA]", "amuseum", "mmuseum", "zmuseum"});

    corpus::SplitAssignment split;
    split.by_record = {{"r0", corpus::Split::train},
                       {"r1", corpus::Split::train},
                       {"r2", corpus::Split::validation},
                       {"r3", corpus::Split::test},
                       {"r4", corpus::Split::test}};
    const auto parts = tabular::partition(d, split);
    CHECK_EQ(parts[0].rows.size(), 2u);
    CHECK_EQ(parts[1].rows.size(), 1u);
    CHECK_EQ(parts[2].rows.size(), 2u);
    for (const auto& part : parts) {
        CHECK_EQ(part.encoder.feature_values, d.encoder.feature_values);
        CHECK_EQ(part.n_classes, d.n_classes);
    }
    CHECK_EQ(parts[1].record_ids, std::vector<std::string>{"r2"});

    corpus::SplitAssignment incomplete;
    incomplete.by_record = {{"r0", corpus::Split::train}};
    CHECK_THROWS_AS(tabular::partition(d, incomplete), DataError);
}

TEST_CASE("permuting the target column never changes the feature matrix") {
    corpus::RecordSet rs;
    rs.schema = corpus::TaskSchema::default_schema();
    Rng rng(404);
    for (int i = 0; i < 40; ++i) {
        std::vector<int> labels(4);
        for (auto& l : labels) l = static_cast<int>(rng.next_below(3));
        rs.records.push_back(
            make_record("r" + std::to_string(i),
                        "m" + std::to_string(rng.next_below(5)), labels));
    }

    const auto before = tabular::build_tabular_inputs(rs, "technique");

    // Rotate the technique labels across records; every record stays
    // labeled, only the values move.
    const int last = rs.records.back().labels[2];
    for (std::size_t i = rs.records.size() - 1; i > 0; --i)
        rs.records[i].labels[2] = rs.records[i - 1].labels[2];
    rs.records[0].labels[2] = last;

    const auto after = tabular::build_tabular_inputs(rs, "technique");
    CHECK_EQ(before.rows, after.rows);
    CHECK_EQ(before.record_ids, after.record_ids);
    CHECK(before.labels != after.labels);
}

TEST_CASE("singleton grid returns that configuration trained") {
    const auto train = categorical_toy(120, 3, 7);
    const auto val = categorical_toy(60, 3, 8);

    std::vector<gbdt::GridOutcome> outcomes;
    const auto model =
        tabular::grid_search_tabular(train, val, singleton_grid(3, 25), 1, &outcomes);

    REQUIRE_EQ(outcomes.size(), 1u);
    CHECK_EQ(model.chosen.params.max_depth, 3);
    CHECK_EQ(model.chosen.params.n_rounds, 25);
    CHECK_EQ(model.chosen.sample_weight, "none");
    CHECK_EQ(model.chosen.score, doctest::Approx(1.0));
    CHECK_EQ(model.target_name, "toy");

    const auto preds = tabular::predict_classes(model, val.rows);
    for (std::size_t i = 0; i < preds.size(); ++i) CHECK_EQ(preds[i], val.labels[i]);
}

TEST_CASE("grid search needs a nonempty grid and training split") {
    const auto val = categorical_toy(30, 3, 9);
    tabular::TabularDataset empty = val;
    empty.rows.clear();
    empty.labels.clear();
    empty.record_ids.clear();
    CHECK_THROWS_AS(tabular::grid_search_tabular(empty, val, singleton_grid(2, 5)),
                    ConfigError);

    gbdt::GridSpec hollow = singleton_grid(2, 5);
    hollow.n_rounds.clear();
    CHECK_THROWS_AS(tabular::grid_search_tabular(val, val, hollow), ConfigError);
}

TEST_CASE("grid search picks the depth an interaction needs") {
    // XOR over two categorical features. The cell counts are deliberately
    // uneven: with perfectly balanced XOR every first split has zero gain
    // and no tree ever grows, so a balanced toy cannot separate the depths.
    gbdt::Matrix rows;
    std::vector<int> labels;
    const auto fill = [&](int a, int b, int y, int n) {
        for (int i = 0; i < n; ++i) {
            rows.push_back({a, b});
            labels.push_back(y);
        }
    };
    fill(1, 1, 0, 14);
    fill(1, 2, 1, 10);
    fill(2, 1, 1, 10);
    fill(2, 2, 0, 10);
    const auto train = dataset_from(rows, labels, 2, 2);
    const auto val = train;  // noiseless relation, same distribution

    gbdt::GridSpec grid = singleton_grid(1, 40);
    grid.max_depth = {1, 2};
    std::vector<gbdt::GridOutcome> outcomes;
    const auto model = tabular::grid_search_tabular(train, val, grid, 0, &outcomes);

    // Depth 1 cannot express the interaction (its best additive fit still
    // missorts a cell), depth 2 is exact, so the deeper model must win
    // even though ties would prefer the shallower one.
    CHECK_EQ(model.chosen.params.max_depth, 2);
    CHECK_EQ(model.chosen.score, doctest::Approx(1.0));
    REQUIRE_EQ(outcomes.size(), 2u);
    CHECK_LT(outcomes[0].score, outcomes[1].score);
    CHECK_LT(outcomes[0].accuracy, 1.0);
}

TEST_CASE("balanced weighting lifts the minority class on skewed data") {
    // Category 1 is 99:1 majority; category 2 leans minority but is still
    // majority-heavy, so an unweighted fit predicts class 0 everywhere.
    gbdt::Matrix rows;
    std::vector<int> labels;
    const auto fill = [&](int cat, int y, int n) {
        for (int i = 0; i < n; ++i) {
            rows.push_back({cat, 1});
            labels.push_back(y);
        }
    };
    fill(1, 0, 198);
    fill(1, 1, 2);
    fill(2, 0, 30);
    fill(2, 1, 20);
    const auto train = dataset_from(rows, labels, 2, 2);
    const auto val = train;

    const auto eval_minority = [&](const std::string& policy) {
        gbdt::GridSpec grid = singleton_grid(2, 60, 0.3);
        grid.sample_weight = {policy};
        const auto model = tabular::grid_search_tabular(train, val, grid);
        const auto preds = tabular::predict_classes(model, val.rows);
        return metrics::evaluate(preds, val.labels, 2).report.per_class[1].f1;
    };

    const double none_f1 = eval_minority("none");
    const double balanced_f1 = eval_minority("balanced");
    CHECK_EQ(none_f1, 0.0);
    CHECK_GT(balanced_f1, 0.3);

    // Offered both policies, the search takes the balanced one.
    gbdt::GridSpec grid = singleton_grid(2, 60, 0.3);
    grid.sample_weight = {"none", "balanced"};
    const auto model = tabular::grid_search_tabular(train, val, grid);
    CHECK_EQ(model.chosen.sample_weight, "balanced");
}

TEST_CASE("score ties fall to fewer rounds, then lower depth") {
    const auto train = categorical_toy(90, 3, 11);
    const auto val = categorical_toy(45, 3, 12);

    gbdt::GridSpec grid = singleton_grid(4, 30);
    grid.n_rounds = {30, 90};
    grid.max_depth = {4, 6};
    std::vector<gbdt::GridOutcome> outcomes;
    const auto model = tabular::grid_search_tabular(train, val, grid, 2, &outcomes);

    REQUIRE_EQ(outcomes.size(), 4u);
    for (const auto& o : outcomes) CHECK_EQ(o.score, doctest::Approx(1.0));
    CHECK_EQ(model.chosen.params.n_rounds, 30);
    CHECK_EQ(model.chosen.params.max_depth, 4);
}

TEST_CASE("grid results CSV is sorted best-first") {
    const auto train = categorical_toy(100, 3, 21);
    auto val = categorical_toy(50, 3, 22);
    // Corrupt a fifth of the validation labels so weak configurations
    // separate from strong ones.
    for (std::size_t i = 0; i < val.labels.size(); i += 5)
        val.labels[i] = (val.labels[i] + 1) % 3;

    gbdt::GridSpec grid = singleton_grid(3, 40);
    grid.n_rounds = {1, 40};
    grid.learning_rate = {0.01, 0.3};
    std::vector<gbdt::GridOutcome> outcomes;
    tabular::grid_search_tabular(train, val, grid, 3, &outcomes);

    const auto dir = test_util::fresh_dir("grid_csv");
    gbdt::write_grid_results_csv(dir / "results.csv", outcomes);

    std::ifstream in(dir / "results.csv");
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK_EQ(header,
             "rank,index,macro_f1,accuracy,colsample_bytree,gamma,learning_rate,"
             "max_depth,min_child_weight,n_rounds,subsample,sample_weight");
    std::vector<double> scores;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string cell;
        std::getline(fields, cell, ',');  // rank
        CHECK_EQ(std::stoul(cell), scores.size() + 1);
        std::getline(fields, cell, ',');  // index
        std::getline(fields, cell, ',');  // macro_f1
        scores.push_back(std::stod(cell));
    }
    REQUIRE_EQ(scores.size(), 4u);
    CHECK(std::is_sorted(scores.rbegin(), scores.rend()));
    CHECK_LT(scores.back(), scores.front());
}

TEST_CASE("tabular search is deterministic for a fixed seed") {
    gbdt::Matrix rows;
    std::vector<int> labels;
    Rng rng(31);
    for (int i = 0; i < 80; ++i) {
        const int y = static_cast<int>(rng.next_below(3));
        const int noisy = rng.next_double() < 0.3
                              ? static_cast<int>(rng.next_below(3)) + 1
                              : y + 1;
        rows.push_back({noisy, static_cast<int>(rng.next_below(4))});
        labels.push_back(y);
    }
    const auto train = dataset_from(rows, labels, 3, 2);
    const auto val = categorical_toy(40, 3, 32);

    gbdt::GridSpec grid = singleton_grid(3, 20);
    grid.subsample = {0.7};
    grid.colsample_bytree = {0.5};

    const auto a = tabular::grid_search_tabular(train, val, grid, 9);
    const auto b = tabular::grid_search_tabular(train, val, grid, 9);
    CHECK_EQ(gbdt::serialize(a.ensemble), gbdt::serialize(b.ensemble));
    CHECK_EQ(a.chosen.score, b.chosen.score);
}

TEST_CASE("corpus-backed search classifies held-out records by museum") {
    corpus::RecordSet rs;
    rs.schema = corpus::TaskSchema::default_schema();
    const std::vector<std::string> museums = {"paris-museum", "lyon-archive",
                                              "tours-collection"};
    Rng rng(55);
    for (int i = 0; i < 120; ++i) {
        const int cls = static_cast<int>(rng.next_below(3));
        std::vector<int> labels = {cls, -1, -1, static_cast<int>(rng.next_below(3))};
        rs.records.push_back(
            make_record("rec" + std::to_string(i), museums[cls], labels));
    }

    const auto all = tabular::build_tabular_inputs(rs, "place");
    const auto split = corpus::split_records(rs, 77);
    const auto parts = tabular::partition(all, split);

    const auto model =
        tabular::grid_search_tabular(parts[0], parts[1], singleton_grid(2, 40), 5);

    const auto preds = tabular::predict_classes(model, parts[2].rows);
    const auto eval = metrics::evaluate(preds, parts[2].labels, 9);
    CHECK_EQ(eval.report.overall_accuracy, doctest::Approx(1.0));

    // Inference covers records the dataset builder would exclude: the
    // museum still fixes the place class.
    const auto decision = tabular::predict_record(
        model, make_record("new", "lyon-archive", {-1, -1, -1, 2}));
    CHECK_EQ(decision.cls, 1);
    CHECK_GT(decision.confidence, 0.8);
}

TEST_CASE("tabular model artifacts round-trip through JSON") {
    corpus::RecordSet rs;
    rs.schema = corpus::TaskSchema::default_schema();
    Rng rng(66);
    for (int i = 0; i < 60; ++i) {
        const int cls = static_cast<int>(rng.next_below(3));
        rs.records.push_back(make_record("r" + std::to_string(i),
                                         "m" + std::to_string(cls),
                                         {-1, -1, -1, cls}));
    }
    const auto data = tabular::build_tabular_inputs(rs, "material");
    const auto model =
        tabular::grid_search_tabular(data, data, singleton_grid(2, 15), 4);

    const auto dir = test_util::fresh_dir("tabular_model");
    tabular::save_tabular_model(dir / "material.json", model);
    const auto loaded = tabular::load_tabular_model(dir / "material.json");

    CHECK_EQ(loaded.target_name, "material");
    CHECK_EQ(loaded.n_classes, model.n_classes);
    CHECK_EQ(loaded.encoder.feature_names, model.encoder.feature_names);
    CHECK_EQ(loaded.encoder.feature_values, model.encoder.feature_values);
    CHECK_EQ(loaded.chosen.sample_weight, model.chosen.sample_weight);
    CHECK_EQ(loaded.chosen.score, model.chosen.score);
    CHECK_EQ(gbdt::serialize(loaded.ensemble), gbdt::serialize(model.ensemble));

    const auto record = make_record("q", "m2", {-1, -1, -1, -1});
    const auto before = tabular::predict_record(model, record);
    const auto after = tabular::predict_record(loaded, record);
    CHECK_EQ(before.cls, after.cls);
    CHECK_EQ(before.confidence, after.confidence);
    CHECK_EQ(before.cls, 2);

    CHECK_THROWS_AS(tabular::load_tabular_model(dir / "missing.json"), IoError);
    test_util::write_text(dir / "other.json", "{\"format\": \"gbdt-ensemble\"}\n");
    CHECK_THROWS_AS(tabular::load_tabular_model(dir / "other.json"), ParseError);
    test_util::write_text(dir / "junk.json", "][\n");
    CHECK_THROWS_AS(tabular::load_tabular_model(dir / "junk.json"), ParseError);
}
