#include "mmclass/pipeline.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mmclass/csv.hpp"
#include "mmclass/error.hpp"
#include "mmclass/fusion.hpp"
#include "mmclass/gbdt.hpp"
#include "mmclass/grid.hpp"
#include "mmclass/imbalance.hpp"
#include "mmclass/metrics.hpp"
#include "mmclass/mtnet.hpp"
#include "mmclass/prov.hpp"
#include "mmclass/tabular.hpp"

namespace mmc::pipeline {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kObjectBase = "http://data.silknow.org/object/";
constexpr const char* kVocabBase = "http://data.silknow.org/vocabulary/";

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

std::string csv_text(const std::vector<csv::Row>& rows) {
    std::ostringstream out;
    for (const auto& row : rows) csv::write_row(out, row);
    return out.str();
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return base / p;
}

void check_enum(const std::string& value, const std::set<std::string>& allowed,
                const std::string& what) {
    if (!allowed.count(value)) {
        std::string options;
        for (const auto& a : allowed) options += (options.empty() ? "" : ", ") + a;
        throw ConfigError(what + " must be one of {" + options + "}, got \"" + value +
                          "\"");
    }
}

ordered_json head_json(const HeadConfig& h) {
    ordered_json j;
    j["batch_size"] = h.batch_size;
    j["dropout"] = h.dropout;
    j["gamma"] = h.gamma;
    j["imbalance"] = h.imbalance;
    j["learning_rate"] = h.learning_rate;
    j["loss"] = h.loss;
    j["max_epochs"] = h.max_epochs;
    j["patience"] = h.patience;
    j["trunk_widths"] = h.trunk_widths;
    j["weight_decay"] = h.weight_decay;
    return j;
}

HeadConfig head_from_json(const ordered_json& j, HeadConfig h,
                          const std::string& context) {
    static const std::set<std::string> keys = {
        "batch_size", "dropout",    "gamma",      "imbalance",    "learning_rate",
        "loss",       "max_epochs", "patience",   "trunk_widths", "weight_decay"};
    if (!j.is_object()) throw ParseError(context + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!keys.count(key))
            throw ParseError(context + ": unknown key \"" + key + "\"");
        try {
            if (key == "batch_size") h.batch_size = value.get<int>();
            else if (key == "dropout") h.dropout = value.get<double>();
            else if (key == "gamma") h.gamma = value.get<double>();
            else if (key == "imbalance") h.imbalance = value.get<std::string>();
            else if (key == "learning_rate") h.learning_rate = value.get<double>();
            else if (key == "loss") h.loss = value.get<std::string>();
            else if (key == "max_epochs") h.max_epochs = value.get<int>();
            else if (key == "patience") h.patience = value.get<int>();
            else if (key == "trunk_widths")
                h.trunk_widths = value.get<std::vector<std::size_t>>();
            else h.weight_decay = value.get<double>();
        } catch (const ordered_json::exception& e) {
            throw ParseError(context + "." + key + ": " + e.what());
        }
    }
    return h;
}

void validate_head(const HeadConfig& h, const std::string& context) {
    check_enum(h.loss, {"softmax", "focal"}, context + ".loss");
    check_enum(h.imbalance, {"none", "weight_rescale", "uniform_sampling"},
               context + ".imbalance");
    if (h.loss == "focal" && h.imbalance == "weight_rescale")
        throw ConfigError(context +
                          ": class weights only apply to the softmax objective; "
                          "pick one of the two strategies");
    if (h.gamma < 0.0) throw ConfigError(context + ".gamma must be >= 0");
    if (h.learning_rate <= 0.0)
        throw ConfigError(context + ".learning_rate must be positive");
    if (h.weight_decay < 0.0)
        throw ConfigError(context + ".weight_decay must be >= 0");
    if (h.batch_size <= 0) throw ConfigError(context + ".batch_size must be positive");
    if (h.max_epochs <= 0) throw ConfigError(context + ".max_epochs must be positive");
    if (h.patience < 0) throw ConfigError(context + ".patience must be >= 0");
    if (h.trunk_widths.empty())
        throw ConfigError(context + ".trunk_widths must not be empty");
    for (const std::size_t w : h.trunk_widths)
        if (w == 0) throw ConfigError(context + ".trunk_widths must be positive");
    if (!(h.dropout >= 0.0 && h.dropout < 1.0))
        throw ConfigError(context + ".dropout must be in [0, 1)");
}

std::string stamp_line(const RunConfig& config) {
    return "# config=" + config_hash(config) + " ingest=" + ingest_hash(config) +
           " seed=" + std::to_string(config.seed) + "\n";
}

void write_stamped(const std::filesystem::path& path, const RunConfig& config,
                   const std::string& body) {
    atomic_write(path, stamp_line(config) + body);
}

/// Runs fn against a temp sibling of `path`, then renames into place. For
/// writers that insist on opening the file themselves.
template <typename Fn>
void atomic_file(const std::filesystem::path& path, Fn&& fn) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    fn(tmp);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move " + tmp.string() + " into place");
    }
}

ordered_json base_meta(const RunConfig& config, const std::string& stage) {
    ordered_json meta;
    meta["stage"] = stage;
    meta["config_hash"] = config_hash(config);
    meta["ingest_hash"] = ingest_hash(config);
    meta["seed"] = config.seed;
    meta["config"] = ordered_json::parse(canonical_json(config));
    return meta;
}

void write_meta(const std::filesystem::path& path, const ordered_json& meta) {
    atomic_write(path, meta.dump(2) + "\n");
}

/// Dependency check: the artifact must exist and must have been produced
/// from the same corpus configuration.
void require_fresh(const std::filesystem::path& meta_path, const RunConfig& config,
                   const std::string& what, const std::string& hint) {
    if (!std::filesystem::exists(meta_path))
        throw ConfigError("missing " + what + " (" + meta_path.string() + "); " +
                          hint);
    ordered_json meta;
    try {
        meta = ordered_json::parse(read_bytes(meta_path));
    } catch (const ordered_json::exception& e) {
        throw ParseError(meta_path.string() + ": " + e.what());
    }
    if (!meta.contains("ingest_hash") ||
        meta["ingest_hash"].get<std::string>() != ingest_hash(config))
        throw ConfigError(what +
                          " was built from a different corpus configuration; " +
                          hint);
}

corpus::TaskSchema schema_from_meta(const ordered_json& meta) {
    corpus::TaskSchema schema;
    for (const auto& t : meta.at("schema")) {
        corpus::TaskSchema::Task task;
        task.name = t.at("name").get<std::string>();
        task.classes = t.at("classes").get<std::vector<std::string>>();
        schema.tasks.push_back(std::move(task));
    }
    return schema;
}

struct Archive {
    corpus::RecordSet records;
    corpus::SplitAssignment split;
};

Archive load_archive(const RunConfig& config, const std::string& hint) {
    const auto dir = ingest_dir(config);
    require_fresh(dir / "meta.json", config, "ingest archive", hint);
    const auto meta = ordered_json::parse(read_bytes(dir / "meta.json"));
    Archive a;
    a.records = corpus::parse_records(dir / "corpus.csv", dir / "manifest.tsv",
                                      schema_from_meta(meta));
    a.split = corpus::read_split_csv(dir / "split.csv");
    return a;
}

corpus::RecordSet subset_by_split(const corpus::RecordSet& rs,
                                  const corpus::SplitAssignment& split,
                                  corpus::Split which) {
    corpus::RecordSet out;
    out.schema = rs.schema;
    out.image_dim = rs.image_dim;
    out.text_dim = rs.text_dim;
    for (const auto& rec : rs.records)
        if (split.of(rec.record_id) == which) out.records.push_back(rec);
    return out;
}

std::string f32_bytes(const std::vector<double>& v) {
    std::string bytes;
    bytes.reserve(v.size() * sizeof(float));
    for (const double x : v) {
        const float f = static_cast<float>(x);
        bytes.append(reinterpret_cast<const char*>(&f), sizeof f);
    }
    return bytes;
}

/// Validation-split evaluation of one modality's per-record decisions.
std::vector<metrics::TaskReport> validation_reports(
    const corpus::RecordSet& rs, const corpus::SplitAssignment& split,
    const DecisionMap& decisions) {
    std::vector<metrics::TaskReport> reports;
    for (std::size_t t = 0; t < rs.schema.tasks.size(); ++t) {
        std::vector<int> preds, truths;
        for (const auto& rec : rs.records) {
            if (split.of(rec.record_id) != corpus::Split::validation) continue;
            if (rec.labels[t] < 0) continue;
            const auto it = decisions.find(rec.record_id);
            const int cls =
                it == decisions.end() ? metrics::kMissing : it->second[t].cls;
            preds.push_back(cls < 0 ? metrics::kMissing : cls);
            truths.push_back(rec.labels[t]);
        }
        reports.push_back(
            metrics::evaluate(preds, truths, rs.schema.tasks[t].classes.size())
                .report);
    }
    return reports;
}

void write_report_csvs(const std::filesystem::path& report_path,
                       const std::filesystem::path& summary_path,
                       const RunConfig& config, const corpus::TaskSchema& schema,
                       const std::vector<metrics::TaskReport>& reports) {
    std::vector<csv::Row> rows;
    rows.push_back({"task", "class", "precision", "recall", "f1", "support"});
    for (std::size_t t = 0; t < schema.tasks.size(); ++t)
        for (std::size_t c = 0; c < reports[t].per_class.size(); ++c) {
            const auto& s = reports[t].per_class[c];
            rows.push_back({schema.tasks[t].name, schema.tasks[t].classes[c],
                            fixed6(s.precision), fixed6(s.recall), fixed6(s.f1),
                            std::to_string(s.support)});
        }
    write_stamped(report_path, config, csv_text(rows));

    std::vector<csv::Row> summary;
    summary.push_back({"task", "macro_f1", "overall_accuracy", "evaluated",
                       "missing"});
    for (std::size_t t = 0; t < schema.tasks.size(); ++t)
        summary.push_back({schema.tasks[t].name, fixed6(reports[t].macro_f1),
                           fixed6(reports[t].overall_accuracy),
                           std::to_string(reports[t].evaluated),
                           std::to_string(reports[t].missing)});
    const auto avg = metrics::cross_task_average(reports);
    summary.push_back({"average", fixed6(avg.macro_f1), fixed6(avg.overall_accuracy),
                       "", ""});
    write_stamped(summary_path, config, csv_text(summary));
}

/// Balanced per-class weights over the classes present in the training
/// instances; absent classes get the neutral 1.0.
std::vector<std::vector<double>> rescale_weights(const mtnet::Dataset& train_set,
                                                 const corpus::TaskSchema& schema) {
    std::vector<std::vector<double>> weights;
    for (std::size_t t = 0; t < schema.tasks.size(); ++t) {
        const std::size_t n_classes = schema.tasks[t].classes.size();
        std::vector<std::int64_t> counts(n_classes, 0);
        for (const auto& sample : train_set)
            if (sample.labels[t] >= 0) ++counts[sample.labels[t]];
        std::vector<std::int64_t> present;
        for (const auto c : counts)
            if (c > 0) present.push_back(c);
        std::vector<double> w(n_classes, 1.0);
        if (!present.empty()) {
            const auto balanced = imbalance::balanced_class_weights(present);
            std::size_t j = 0;
            for (std::size_t c = 0; c < n_classes; ++c)
                if (counts[c] > 0) w[c] = balanced[j++];
        }
        weights.push_back(std::move(w));
    }
    return weights;
}

void inject_provenance(const std::filesystem::path& path, const RunConfig& config) {
    auto j = ordered_json::parse(read_bytes(path));
    j["provenance"] = {{"config_hash", config_hash(config)},
                       {"ingest_hash", ingest_hash(config)},
                       {"seed", config.seed}};
    atomic_write(path, j.dump(2) + "\n");
}

void write_grid_csv_stamped(const std::filesystem::path& path,
                            const RunConfig& config,
                            const std::vector<gbdt::GridOutcome>& outcomes) {
    atomic_file(path, [&](const std::filesystem::path& tmp) {
        gbdt::write_grid_results_csv(tmp, outcomes);
        const std::string body = read_bytes(tmp);
        std::ofstream out(tmp, std::ios::binary);
        out << stamp_line(config) << body;
        if (!out.flush()) throw IoError("short write to " + tmp.string());
    });
}

ordered_json chosen_json(const gbdt::GridOutcome& chosen) {
    ordered_json j;
    j["index"] = chosen.index;
    j["macro_f1"] = chosen.score;
    j["accuracy"] = chosen.accuracy;
    j["sample_weight"] = chosen.sample_weight;
    j["params"] = {{"colsample_bytree", chosen.params.colsample_bytree},
                   {"gamma", chosen.params.gamma},
                   {"learning_rate", chosen.params.learning_rate},
                   {"max_depth", chosen.params.max_depth},
                   {"min_child_weight", chosen.params.min_child_weight},
                   {"n_rounds", chosen.params.n_rounds},
                   {"subsample", chosen.params.subsample}};
    return j;
}

std::string slug(const std::string& label) {
    std::string out;
    for (const char c : label) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else if (!out.empty() && out.back() != '-')
            out += '-';
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out;
}

/// Concept URI for a predicted class: through the facet map when the facet
/// form is known there, a plain vocabulary URI otherwise.
std::string concept_uri(const std::string& label, const prov::FacetMap& facets) {
    const std::string candidate = std::string(kVocabBase) + "facet/" + slug(label);
    const auto it = facets.concepts.find(candidate);
    if (it != facets.concepts.end()) return it->second;
    return std::string(kVocabBase) + slug(label);
}

void train_head_modality(const RunConfig& config, const std::string& modality) {
    const HeadConfig& hc = modality == "image" ? config.image : config.text;
    const bool is_image = modality == "image";
    const auto archive =
        load_archive(config, "run `mmclass ingest` before training");
    const auto& rs = archive.records;
    const std::size_t dim = is_image ? rs.image_dim : rs.text_dim;
    if (dim == 0)
        throw ConfigError("the archive has no " + modality +
                          " embeddings; nothing to train");

    mtnet::Dataset train_set, validation_set;
    for (const auto& rec : rs.records) {
        const auto s = archive.split.of(rec.record_id);
        if (s == corpus::Split::test) continue;
        mtnet::Dataset& sink =
            s == corpus::Split::train ? train_set : validation_set;
        if (is_image) {
            for (const auto& e : rec.image_embeddings)
                sink.push_back({e, rec.labels});
        } else if (rec.text_embedding) {
            sink.push_back({*rec.text_embedding, rec.labels});
        }
    }
    if (train_set.empty() || validation_set.empty())
        throw ConfigError("not enough " + modality +
                          " embeddings to train (train and validation splits "
                          "must both have some)");

    mtnet::HeadTopology topo;
    topo.input_dim = dim;
    topo.trunk_widths = hc.trunk_widths;
    topo.dropout = hc.dropout;
    for (const auto& task : rs.schema.tasks)
        topo.head_widths.push_back(task.classes.size());

    auto model = mtnet::MultitaskHeadModel::init(topo, config.seed);
    mtnet::TrainConfig tc;
    tc.loss = hc.loss == "focal" ? mtnet::LossKind::focal
                                 : mtnet::LossKind::softmax_ce;
    tc.gamma = hc.gamma;
    tc.weight_decay = hc.weight_decay;
    tc.learning_rate = hc.learning_rate;
    tc.batch_size = hc.batch_size;
    tc.max_epochs = hc.max_epochs;
    tc.patience = hc.patience;
    tc.seed = config.seed;
    tc.sampler = hc.imbalance == "uniform_sampling"
                     ? imbalance::SamplerKind::uniform_class_and_task
                     : imbalance::SamplerKind::proportional_task;
    if (hc.imbalance == "weight_rescale")
        tc.class_weights = rescale_weights(train_set, rs.schema);

    const auto log = mtnet::train(model, train_set, validation_set, tc);

    DecisionMap decisions;
    for (const auto& rec : rs.records) {
        if (is_image) {
            decisions[rec.record_id] = mtnet::predict_record(model,
                                                             rec.image_embeddings);
        } else {
            std::vector<std::vector<double>> embs;
            if (rec.text_embedding) embs.push_back(*rec.text_embedding);
            decisions[rec.record_id] = mtnet::predict_record(model, embs);
        }
    }

    const auto dir = train_dir(config);
    std::filesystem::create_directories(dir);
    atomic_file(dir / (modality + "_model.ckpt"),
                [&](const std::filesystem::path& tmp) {
                    mtnet::save_checkpoint(tmp, model);
                });
    write_decisions_csv(dir / (modality + "_decisions.csv"), rs, archive.split,
                        decisions, stamp_line(config));
    write_report_csvs(dir / (modality + "_report.csv"),
                      dir / (modality + "_summary.csv"), config, rs.schema,
                      validation_reports(rs, archive.split, decisions));

    auto meta = base_meta(config, "train");
    meta["modality"] = modality;
    meta["loss"] = hc.loss;
    meta["imbalance"] = hc.imbalance;
    meta["train_instances"] = train_set.size();
    meta["validation_instances"] = validation_set.size();
    meta["best_epoch"] = log.best_epoch;
    meta["best_val_loss"] = log.best_val_loss;
    ordered_json epochs = ordered_json::array();
    for (const auto& e : log.epochs)
        epochs.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    meta["epochs"] = std::move(epochs);
    write_meta(dir / ("meta_" + modality + ".json"), meta);
}

void train_tabular_modality(const RunConfig& config) {
    const auto archive =
        load_archive(config, "run `mmclass ingest` before training");
    const auto& rs = archive.records;
    const auto grid = config.tabular_grid.empty()
                          ? gbdt::GridSpec::tabular_default()
                          : gbdt::load_grid(config.tabular_grid);

    const std::size_t n_tasks = rs.schema.tasks.size();
    std::vector<tabular::TabularModel> models(n_tasks);
    std::vector<std::vector<gbdt::GridOutcome>> outcomes(n_tasks);
    parallel_for(n_tasks, config.threads, [&](std::size_t t) {
        const auto& name = rs.schema.tasks[t].name;
        const auto data = tabular::build_tabular_inputs(rs, name);
        const auto parts = tabular::partition(data, archive.split);
        if (parts[0].rows.empty() || parts[1].rows.empty())
            throw ConfigError("task " + name +
                              " has no labeled rows in the train or validation "
                              "split; cannot tune");
        models[t] = tabular::grid_search_tabular(parts[0], parts[1], grid,
                                                 config.seed, &outcomes[t]);
    });

    DecisionMap decisions;
    for (const auto& rec : rs.records) {
        ModalityDecision md(n_tasks);
        for (std::size_t t = 0; t < n_tasks; ++t)
            md[t] = tabular::predict_record(models[t], rec);
        decisions[rec.record_id] = std::move(md);
    }

    const auto dir = train_dir(config);
    std::filesystem::create_directories(dir);
    auto meta = base_meta(config, "train");
    meta["modality"] = "tabular";
    meta["grid_points"] = grid.size();
    ordered_json per_task = ordered_json::object();
    for (std::size_t t = 0; t < n_tasks; ++t) {
        const auto& name = rs.schema.tasks[t].name;
        const auto model_path = dir / ("tabular_" + name + ".json");
        atomic_file(model_path, [&](const std::filesystem::path& tmp) {
            tabular::save_tabular_model(tmp, models[t]);
        });
        inject_provenance(model_path, config);
        write_grid_csv_stamped(dir / ("tabular_grid_" + name + ".csv"), config,
                               outcomes[t]);
        per_task[name] = chosen_json(models[t].chosen);
    }
    write_decisions_csv(dir / "tabular_decisions.csv", rs, archive.split, decisions,
                        stamp_line(config));
    write_report_csvs(dir / "tabular_report.csv", dir / "tabular_summary.csv",
                      config, rs.schema,
                      validation_reports(rs, archive.split, decisions));
    meta["chosen"] = std::move(per_task);
    write_meta(dir / "meta_tabular.json", meta);
}

}  // namespace

void RunConfig::validate() const {
    if (corpus_csv.empty()) throw ConfigError("config needs corpus_csv");
    check_enum(unmapped_labels, {"abort", "drop"}, "unmapped_labels");
    if (min_label_count < 0) throw ConfigError("min_label_count must be >= 0");
    if (min_text_chars < 0) throw ConfigError("min_text_chars must be >= 0");
    double ratio_sum = 0.0;
    for (const double r : split_ratios) {
        if (!(r > 0.0)) throw ConfigError("split_ratios must all be positive");
        ratio_sum += r;
    }
    if (std::abs(ratio_sum - 1.0) > 1e-9)
        throw ConfigError("split_ratios must sum to 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    validate_head(image, "image");
    validate_head(text, "text");
    if (agent.empty()) throw ConfigError("agent must not be empty");
    if (!prov::valid_timestamp(export_timestamp))
        throw ConfigError("export_timestamp must be UTC second precision "
                          "(YYYY-MM-DDTHH:MM:SSZ), got \"" +
                          export_timestamp + "\"");
}

RunConfig load_config(const std::filesystem::path& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_bytes(path));
    } catch (const ordered_json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(path.string() + ": config must be an object");

    static const std::set<std::string> keys = {
        "agent",       "corpus_csv",     "export_timestamp", "facet_map",
        "fusion_grid", "grouping",       "image",            "manifest",
        "min_label_count", "min_text_chars", "out_dir",      "property_map",
        "seed",        "split_ratios",   "tabular_grid",     "text",
        "threads",     "unmapped_labels"};
    RunConfig config;
    const auto base = path.parent_path();
    try {
        for (const auto& [key, value] : j.items()) {
            if (!keys.count(key))
                throw ParseError(path.string() + ": unknown key \"" + key + "\"");
            if (key == "agent") config.agent = value.get<std::string>();
            else if (key == "corpus_csv")
                config.corpus_csv = resolve(base, value.get<std::string>());
            else if (key == "export_timestamp")
                config.export_timestamp = value.get<std::string>();
            else if (key == "facet_map")
                config.facet_map = resolve(base, value.get<std::string>());
            else if (key == "fusion_grid")
                config.fusion_grid = resolve(base, value.get<std::string>());
            else if (key == "grouping")
                config.grouping = resolve(base, value.get<std::string>());
            else if (key == "image")
                config.image = head_from_json(value, HeadConfig{}, "image");
            else if (key == "manifest")
                config.manifest = resolve(base, value.get<std::string>());
            else if (key == "min_label_count")
                config.min_label_count = value.get<int>();
            else if (key == "min_text_chars")
                config.min_text_chars = value.get<int>();
            else if (key == "out_dir")
                config.out_dir = resolve(base, value.get<std::string>());
            else if (key == "property_map")
                config.property_map = resolve(base, value.get<std::string>());
            else if (key == "seed") config.seed = value.get<std::uint64_t>();
            else if (key == "split_ratios")
                config.split_ratios = value.get<std::array<double, 3>>();
            else if (key == "tabular_grid")
                config.tabular_grid = resolve(base, value.get<std::string>());
            else if (key == "text")
                config.text = head_from_json(value, default_text_head(), "text");
            else if (key == "threads") config.threads = value.get<int>();
            else config.unmapped_labels = value.get<std::string>();
        }
    } catch (const ordered_json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    config.validate();

    const std::pair<const char*, const std::filesystem::path*> inputs[] = {
        {"corpus_csv", &config.corpus_csv},   {"manifest", &config.manifest},
        {"grouping", &config.grouping},       {"tabular_grid", &config.tabular_grid},
        {"fusion_grid", &config.fusion_grid}, {"facet_map", &config.facet_map},
        {"property_map", &config.property_map}};
    for (const auto& [name, p] : inputs) {
        if (!p->empty() && !std::filesystem::exists(*p))
            throw ConfigError("config references missing " + std::string(name) +
                              ": " + p->string());
    }
    return config;
}

std::string canonical_json(const RunConfig& config) {
    ordered_json j;
    j["agent"] = config.agent;
    j["corpus_csv"] = config.corpus_csv.string();
    j["export_timestamp"] = config.export_timestamp;
    j["facet_map"] = config.facet_map.string();
    j["fusion_grid"] = config.fusion_grid.string();
    j["grouping"] = config.grouping.string();
    j["image"] = head_json(config.image);
    j["manifest"] = config.manifest.string();
    j["min_label_count"] = config.min_label_count;
    j["min_text_chars"] = config.min_text_chars;
    j["property_map"] = config.property_map.string();
    j["seed"] = config.seed;
    j["split_ratios"] = config.split_ratios;
    j["tabular_grid"] = config.tabular_grid.string();
    j["text"] = head_json(config.text);
    j["unmapped_labels"] = config.unmapped_labels;
    return j.dump();
}

std::string config_hash(const RunConfig& config) {
    return hex16(prov::fnv1a64(canonical_json(config)));
}

std::string ingest_hash(const RunConfig& config) {
    ordered_json j;
    j["corpus_csv"] = config.corpus_csv.string();
    j["grouping"] = config.grouping.string();
    j["manifest"] = config.manifest.string();
    j["min_label_count"] = config.min_label_count;
    j["min_text_chars"] = config.min_text_chars;
    j["seed"] = config.seed;
    j["split_ratios"] = config.split_ratios;
    j["unmapped_labels"] = config.unmapped_labels;
    return hex16(prov::fnv1a64(j.dump()));
}

std::filesystem::path ingest_dir(const RunConfig& config) {
    return config.out_dir / "ingest";
}
std::filesystem::path train_dir(const RunConfig& config) {
    return config.out_dir / "train";
}
std::filesystem::path fuse_dir(const RunConfig& config) {
    return config.out_dir / "fuse";
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out.flush()) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move " + tmp.string() + " into place");
    }
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
    if (threads < 1) throw ConfigError("threads must be >= 1");
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

void write_decisions_csv(const std::filesystem::path& path,
                         const corpus::RecordSet& records,
                         const corpus::SplitAssignment& split,
                         const DecisionMap& decisions, const std::string& stamp) {
    std::string comment = stamp;
    if (!comment.empty()) {
        if (comment[0] != '#') comment = "# " + comment;
        if (comment.back() != '\n') comment += '\n';
    }
    std::vector<csv::Row> rows;
    rows.push_back({"record_id", "split", "task", "class", "confidence"});
    for (const auto& rec : records.records) {
        const auto it = decisions.find(rec.record_id);
        const std::string split_label = corpus::split_name(split.of(rec.record_id));
        for (std::size_t t = 0; t < records.schema.tasks.size(); ++t) {
            TaskDecision d;
            if (it != decisions.end() && t < it->second.size()) d = it->second[t];
            rows.push_back({rec.record_id, split_label, records.schema.tasks[t].name,
                            std::to_string(d.missing() ? -1 : d.cls),
                            fixed6(d.missing() ? 0.0 : d.confidence)});
        }
    }
    atomic_write(path, comment + csv_text(rows));
}

DecisionMap read_decisions_csv(const std::filesystem::path& path,
                               const corpus::TaskSchema& schema) {
    std::string bytes = read_bytes(path);
    std::size_t start = 0;
    while (start < bytes.size() && bytes[start] == '#') {
        const std::size_t eol = bytes.find('\n', start);
        start = eol == std::string::npos ? bytes.size() : eol + 1;
    }
    const auto rows = csv::parse(bytes.substr(start));
    if (rows.empty() || rows[0] != csv::Row{"record_id", "split", "task", "class",
                                            "confidence"})
        throw ParseError("bad decisions file " + path.string());
    DecisionMap out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != 5)
            throw ParseError(path.string() + " row " + std::to_string(i + 1) +
                             ": expected 5 fields");
        const int t = schema.task_index(row[2]);
        if (t < 0)
            throw ParseError(path.string() + " row " + std::to_string(i + 1) +
                             ": unknown task " + row[2]);
        auto& md = out[row[0]];
        if (md.empty()) md.resize(schema.tasks.size());
        int cls = 0;
        double confidence = 0.0;
        try {
            cls = std::stoi(row[3]);
            confidence = std::stod(row[4]);
        } catch (const std::exception&) {
            throw ParseError(path.string() + " row " + std::to_string(i + 1) +
                             ": bad number");
        }
        if (cls >= static_cast<int>(schema.tasks[t].classes.size()))
            throw DataError(path.string() + " row " + std::to_string(i + 1) +
                            ": class " + row[3] + " outside task " + row[2]);
        md[t] = {cls < 0 ? -1 : cls, cls < 0 ? 0.0 : confidence};
    }
    return out;
}

void cmd_ingest(const RunConfig& config) {
    corpus::GroupingTable grouping;
    corpus::ParseOptions options;
    if (!config.grouping.empty()) {
        grouping = corpus::GroupingTable::load(config.grouping);
        options.grouping = &grouping;
    }
    options.unmapped = config.unmapped_labels == "drop" ? corpus::UnmappedPolicy::drop
                                                        : corpus::UnmappedPolicy::abort;
    const auto raw = corpus::parse_records(config.corpus_csv, config.manifest,
                                           corpus::TaskSchema::default_schema(),
                                           options);
    const auto rs =
        corpus::filter_corpus(raw, config.min_label_count, config.min_text_chars);
    if (rs.records.empty() && !raw.records.empty())
        throw DataError("filtering removed every record; relax min_label_count or "
                        "min_text_chars");
    const auto split = corpus::split_records(rs, config.seed, config.split_ratios);

    const auto dir = ingest_dir(config);
    std::filesystem::create_directories(dir / "embeddings");
    std::filesystem::create_directories(dir / "stats");

    std::vector<csv::Row> rows;
    csv::Row header = {"record_id", "museum", "text", "images"};
    for (const auto& task : rs.schema.tasks) header.push_back(task.name);
    rows.push_back(std::move(header));
    std::string manifest_text;
    for (const auto& rec : rs.records) {
        std::string images;
        for (std::size_t k = 0; k < rec.image_refs.size(); ++k) {
            if (k) images += ' ';
            images += rec.image_refs[k];
        }
        csv::Row row = {rec.record_id, rec.museum,
                        rec.text ? *rec.text : "[NA]",
                        images.empty() ? "[NA]" : images};
        for (std::size_t t = 0; t < rs.schema.tasks.size(); ++t)
            row.push_back(rec.labels[t] < 0
                              ? "[NA]"
                              : rs.schema.tasks[t].classes[rec.labels[t]]);
        rows.push_back(std::move(row));

        for (std::size_t k = 0; k < rec.image_embeddings.size(); ++k) {
            const std::string name =
                rec.record_id + ".img" + std::to_string(k) + ".f32";
            atomic_write(dir / "embeddings" / name,
                         f32_bytes(rec.image_embeddings[k]));
            manifest_text += rec.record_id + "\timage\tembeddings/" + name + "\t" +
                             std::to_string(rs.image_dim) + "\n";
        }
        if (rec.text_embedding) {
            const std::string name = rec.record_id + ".txt.f32";
            atomic_write(dir / "embeddings" / name, f32_bytes(*rec.text_embedding));
            manifest_text += rec.record_id + "\ttext\tembeddings/" + name + "\t" +
                             std::to_string(rs.text_dim) + "\n";
        }
    }
    atomic_write(dir / "corpus.csv", csv_text(rows));
    atomic_write(dir / "manifest.tsv", manifest_text);
    atomic_file(dir / "split.csv", [&](const std::filesystem::path& tmp) {
        corpus::write_split_csv(tmp, split);
    });

    const auto stats = corpus::compute_stats(rs, split);
    const auto tmp_stats = dir / "stats_tmp";
    std::filesystem::create_directories(tmp_stats);
    corpus::write_stats_csvs(stats, rs.schema, tmp_stats);
    for (const char* name :
         {"museums.csv", "class_counts.csv", "overlap.csv", "text_lengths.csv"}) {
        write_stamped(dir / "stats" / name, config, read_bytes(tmp_stats / name));
    }
    std::filesystem::remove_all(tmp_stats);

    auto meta = base_meta(config, "ingest");
    meta["n_records_raw"] = raw.records.size();
    meta["n_records"] = rs.records.size();
    meta["image_dim"] = rs.image_dim;
    meta["text_dim"] = rs.text_dim;
    const auto sizes = split.sizes();
    meta["split_sizes"] = {sizes[0], sizes[1], sizes[2]};
    meta["warnings"] = rs.warnings;
    ordered_json schema_json = ordered_json::array();
    for (const auto& task : rs.schema.tasks)
        schema_json.push_back({{"name", task.name}, {"classes", task.classes}});
    meta["schema"] = std::move(schema_json);
    write_meta(dir / "meta.json", meta);
}

void cmd_train(const RunConfig& config, const std::string& modality) {
    if (modality == "image" || modality == "text")
        train_head_modality(config, modality);
    else if (modality == "tabular")
        train_tabular_modality(config);
    else
        throw ConfigError("unknown modality \"" + modality +
                          "\"; expected image, text, or tabular");
}

void cmd_fuse_evaluate(const RunConfig& config) {
    const auto archive =
        load_archive(config, "run `mmclass ingest` before fusing");
    const auto& rs = archive.records;
    const auto tdir = train_dir(config);

    std::array<DecisionMap, 3> decision_maps;
    for (std::size_t m = 0; m < 3; ++m) {
        const std::string name = fusion::kModalityNames[m];
        require_fresh(tdir / ("meta_" + name + ".json"), config,
                      name + " model artifacts",
                      "run `mmclass train " + name + "` first");
        decision_maps[m] =
            read_decisions_csv(tdir / (name + "_decisions.csv"), rs.schema);
    }
    const std::array<const DecisionMap*, 3> maps = {
        &decision_maps[0], &decision_maps[1], &decision_maps[2]};

    const auto grid = config.fusion_grid.empty() ? gbdt::GridSpec::fusion_default()
                                                 : gbdt::load_grid(config.fusion_grid);
    const auto facets = config.facet_map.empty()
                            ? prov::FacetMap{}
                            : prov::FacetMap::load(config.facet_map);
    const auto properties = config.property_map.empty()
                                ? prov::PropertyMap::defaults()
                                : prov::PropertyMap::load(config.property_map);

    const auto rs_val = subset_by_split(rs, archive.split, corpus::Split::validation);
    const auto rs_test = subset_by_split(rs, archive.split, corpus::Split::test);

    static const std::vector<std::vector<int>> kSubsets = {
        {fusion::kImage},  {fusion::kText},  {fusion::kTabular},
        {fusion::kImage, fusion::kText},     {fusion::kImage, fusion::kTabular},
        {fusion::kText, fusion::kTabular},
        {fusion::kImage, fusion::kText, fusion::kTabular}};

    const std::size_t n_tasks = rs.schema.tasks.size();
    std::vector<fusion::FusionModel> models(n_tasks);
    std::vector<std::vector<gbdt::GridOutcome>> cv_outcomes(n_tasks);
    std::vector<std::array<metrics::TaskReport, 3>> single_reports(n_tasks);
    std::vector<metrics::Evaluation> fused_evals(n_tasks);
    std::vector<std::vector<fusion::AblationEntry>> ablations(n_tasks);
    parallel_for(n_tasks, config.threads, [&](std::size_t t) {
        const auto val_rows = fusion::build_fusion_rows(rs_val, maps, t);
        const auto test_rows = fusion::build_fusion_rows(rs_test, maps, t);
        models[t] = fusion::tune_and_train_fusion(val_rows, grid, config.seed,
                                                  &cv_outcomes[t]);
        const std::size_t n_classes = val_rows.n_classes;
        for (int m = 0; m < 3; ++m) {
            std::vector<int> preds;
            preds.reserve(test_rows.rows.size());
            for (const auto& row : test_rows.rows)
                preds.push_back(row[m] == 0 ? metrics::kMissing : row[m] - 1);
            single_reports[t][m] =
                metrics::evaluate(preds, test_rows.labels, n_classes).report;
        }
        std::vector<int> fused;
        fused.reserve(test_rows.rows.size());
        for (const auto& row : test_rows.rows)
            fused.push_back(fusion::predict_row(models[t], row).cls);
        fused_evals[t] = metrics::evaluate(fused, test_rows.labels, n_classes);
        ablations[t] = fusion::ablate_modalities(val_rows, test_rows, kSubsets,
                                                 grid, config.seed);
    });

    const auto dir = fuse_dir(config);
    std::filesystem::create_directories(dir);

    std::vector<csv::Row> comparison;
    comparison.push_back({"task", "image", "text", "tabular", "multimodal"});
    std::array<double, 4> column_sums = {0, 0, 0, 0};
    for (std::size_t t = 0; t < n_tasks; ++t) {
        csv::Row row = {rs.schema.tasks[t].name};
        for (int m = 0; m < 3; ++m) {
            row.push_back(fixed6(single_reports[t][m].macro_f1));
            column_sums[m] += single_reports[t][m].macro_f1;
        }
        row.push_back(fixed6(fused_evals[t].report.macro_f1));
        column_sums[3] += fused_evals[t].report.macro_f1;
        comparison.push_back(std::move(row));
    }
    csv::Row average = {"average"};
    for (const double sum : column_sums)
        average.push_back(fixed6(sum / static_cast<double>(n_tasks)));
    comparison.push_back(average);
    write_stamped(dir / "comparison.csv", config, csv_text(comparison));

    std::vector<csv::Row> ablation_rows;
    ablation_rows.push_back({"task", "modalities", "macro_f1", "accuracy"});
    for (std::size_t t = 0; t < n_tasks; ++t)
        for (const auto& entry : ablations[t]) {
            std::string label;
            for (const int m : entry.modalities)
                label += std::string(label.empty() ? "" : "+") +
                         fusion::kModalityNames[m];
            ablation_rows.push_back({rs.schema.tasks[t].name, label,
                                     fixed6(entry.test_macro_f1),
                                     fixed6(entry.test_accuracy)});
        }
    write_stamped(dir / "ablation.csv", config, csv_text(ablation_rows));

    auto meta = base_meta(config, "fuse");
    ordered_json chosen = ordered_json::object();
    for (std::size_t t = 0; t < n_tasks; ++t) {
        const auto& name = rs.schema.tasks[t].name;
        const auto model_path = dir / ("fusion_" + name + ".json");
        atomic_file(model_path, [&](const std::filesystem::path& tmp) {
            fusion::save_fusion_model(tmp, models[t]);
        });
        inject_provenance(model_path, config);
        write_grid_csv_stamped(dir / ("fusion_grid_" + name + ".csv"), config,
                               cv_outcomes[t]);
        atomic_file(dir / ("confusion_" + name + ".csv"),
                    [&](const std::filesystem::path& tmp) {
                        metrics::write_confusion_csv(tmp, fused_evals[t].matrix,
                                                     rs.schema.tasks[t].classes);
                        const std::string body = read_bytes(tmp);
                        std::ofstream out(tmp, std::ios::binary);
                        out << stamp_line(config) << body;
                        if (!out.flush())
                            throw IoError("short write to " + tmp.string());
                    });
        atomic_file(dir / ("confusion_" + name + ".png"),
                    [&](const std::filesystem::path& tmp) {
                        metrics::render_confusion_png(tmp, fused_evals[t].matrix,
                                                      rs.schema.tasks[t].classes);
                    });
        chosen[name] = chosen_json(models[t].chosen);
    }
    meta["chosen"] = std::move(chosen);

    // Turtle predictions for every record x task without a gold label.
    std::vector<prov::PredictionStatement> statements;
    for (const auto& rec : rs.records) {
        for (std::size_t t = 0; t < n_tasks; ++t) {
            if (rec.labels[t] >= 0) continue;
            gbdt::Row row(3, 0);
            for (std::size_t m = 0; m < 3; ++m) {
                const auto it = decision_maps[m].find(rec.record_id);
                if (it == decision_maps[m].end() || t >= it->second.size()) continue;
                if (it->second[t].cls >= 0) row[m] = it->second[t].cls + 1;
            }
            const auto decision = fusion::predict_row(models[t], row);
            prov::PredictionStatement s;
            s.record_id = rec.record_id;
            s.task = rs.schema.tasks[t].name;
            s.subject = std::string(kObjectBase) + rec.record_id + "/production";
            s.predicate = prov::property_for_task(properties, s.task);
            s.object =
                concept_uri(rs.schema.tasks[t].classes[decision.cls], facets);
            s.confidence = decision.confidence;
            s.timestamp = config.export_timestamp;
            s.agent = config.agent;
            if (row[fusion::kImage])
                s.used.push_back(std::string(kObjectBase) + rec.record_id + "/image");
            if (row[fusion::kText])
                s.used.push_back(std::string(kObjectBase) + rec.record_id + "/text");
            if (row[fusion::kTabular])
                s.used.push_back(std::string(kObjectBase) + rec.record_id +
                                 "/record");
            statements.push_back(std::move(s));
        }
    }
    if (!statements.empty())
        atomic_write(dir / "predictions.ttl",
                     stamp_line(config) + prov::to_turtle(statements));
    meta["ttl_statements"] = statements.size();
    write_meta(dir / "meta.json", meta);
}

}  // namespace mmc::pipeline
