#include "mmclass/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "mmclass/csv.hpp"
#include "mmclass/error.hpp"
#include "mmclass/rng.hpp"

namespace mmc::corpus {

namespace {

constexpr const char* kNaToken = "[NA]";

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::vector<double> read_vector_file(const std::filesystem::path& path,
                                     std::size_t dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read embedding file " + path.string());
    std::vector<float> raw(dim);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != dim * sizeof(float))
        throw DataError("embedding file " + path.string() + " shorter than dim " +
                        std::to_string(dim));
    char extra;
    if (in.read(&extra, 1))
        throw DataError("embedding file " + path.string() + " longer than dim " +
                        std::to_string(dim));
    return std::vector<double>(raw.begin(), raw.end());
}

struct ManifestEntry {
    std::string modality;
    std::filesystem::path path;
    std::size_t dim;
};

}  // namespace

TaskSchema TaskSchema::default_schema() {
    TaskSchema s;
    s.tasks = {
        {"place", {"FR", "IT", "GB", "ES", "IN", "CN", "IR", "JP", "TR"}},
        {"timespan", {"XIX", "XVIII", "XX", "XVII", "XVI"}},
        {"technique", {"embroidery", "velvet", "damask", "other"}},
        {"material", {"animal fibre", "vegetable fibre", "metal thread"}},
    };
    return s;
}

int TaskSchema::task_index(const std::string& name) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i].name == name) return static_cast<int>(i);
    return -1;
}

int TaskSchema::class_index(std::size_t task, const std::string& c) const {
    const auto& classes = tasks.at(task).classes;
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (classes[i] == c) return static_cast<int>(i);
    return -1;
}

void TaskSchema::validate() const {
    for (const auto& t : tasks) {
        if (t.classes.size() < 2)
            throw DataError("task " + t.name + " has fewer than 2 classes");
        std::set<std::string> seen(t.classes.begin(), t.classes.end());
        if (seen.size() != t.classes.size())
            throw DataError("task " + t.name + " has duplicate classes");
    }
}

int Record::label_count() const {
    int n = 0;
    for (const int l : labels)
        if (l >= 0) ++n;
    return n;
}

std::string fold_key(const std::string& raw) {
    std::size_t b = 0, e = raw.size();
    while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
    std::string out = raw.substr(b, e - b);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

GroupingTable GroupingTable::load(const std::filesystem::path& path) {
    GroupingTable table;
    for (const auto& row : csv::read_tsv_file(path)) {
        if (row.size() != 3)
            throw ParseError("grouping table " + path.string() +
                             ": expected 3 tab-separated fields, got " +
                             std::to_string(row.size()));
        table.by_task[row[1]][fold_key(row[0])] = row[2];
    }
    return table;
}

std::string map_group_label(const std::string& raw, const GroupingTable& table,
                            const std::string& task) {
    const auto t = table.by_task.find(task);
    if (t != table.by_task.end()) {
        const auto hit = t->second.find(fold_key(raw));
        if (hit != t->second.end()) return hit->second;
    }
    throw DataError("unmapped label \"" + raw + "\" for task " + task);
}

RecordSet parse_records(const std::filesystem::path& csv_path,
                        const std::filesystem::path& manifest_path,
                        const TaskSchema& schema, const ParseOptions& options) {
    schema.validate();
    RecordSet rs;
    rs.schema = schema;

    const auto rows = csv::read_file(csv_path);
    if (rows.empty()) throw ParseError(csv_path.string() + ": missing header row");

    const auto& header = rows[0];
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw ParseError(csv_path.string() + ": missing column " + name);
    };
    const int col_id = column("record_id");
    const int col_museum = column("museum");
    const int col_text = column("text");
    const int col_images = column("images");
    std::vector<int> col_task(schema.tasks.size());
    for (std::size_t t = 0; t < schema.tasks.size(); ++t)
        col_task[t] = column(schema.tasks[t].name);

    std::set<std::string> seen_ids;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;  // blank line
        if (row.size() != header.size())
            throw ParseError(csv_path.string() + " row " + std::to_string(r + 1) +
                             ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(row.size()));

        Record rec;
        rec.record_id = row[col_id];
        if (rec.record_id.empty())
            throw ParseError(csv_path.string() + " row " + std::to_string(r + 1) +
                             ": empty record_id");
        if (!seen_ids.insert(rec.record_id).second)
            throw DataError("duplicate record_id " + rec.record_id);

        rec.museum = row[col_museum];
        if (const auto& text = row[col_text]; text != kNaToken && !text.empty())
            rec.text = text;
        if (const auto& imgs = row[col_images]; imgs != kNaToken)
            rec.image_refs = split_ws(imgs);

        rec.labels.assign(schema.tasks.size(), -1);
        for (std::size_t t = 0; t < schema.tasks.size(); ++t) {
            const std::string& cell = row[col_task[t]];
            if (cell == kNaToken || cell.empty()) continue;
            std::string label = cell;
            if (options.grouping) {
                try {
                    label = map_group_label(cell, *options.grouping,
                                            schema.tasks[t].name);
                } catch (const DataError&) {
                    if (options.unmapped == UnmappedPolicy::abort) throw;
                    rs.warnings.push_back("row " + std::to_string(r + 1) +
                                          ": dropped unmapped label \"" + cell +
                                          "\" for task " + schema.tasks[t].name);
                    continue;
                }
            }
            const int k = schema.class_index(t, label);
            if (k < 0) {
                if (options.grouping && options.unmapped == UnmappedPolicy::drop) {
                    rs.warnings.push_back("row " + std::to_string(r + 1) +
                                          ": dropped out-of-vocabulary label \"" +
                                          label + "\" for task " +
                                          schema.tasks[t].name);
                    continue;
                }
                throw DataError("label \"" + label + "\" not in vocabulary of task " +
                                schema.tasks[t].name);
            }
            rec.labels[t] = k;
        }
        rs.records.push_back(std::move(rec));
    }

    if (!manifest_path.empty()) {
        std::map<std::string, std::vector<ManifestEntry>> manifest;
        const auto base = manifest_path.parent_path();
        for (const auto& row : csv::read_tsv_file(manifest_path)) {
            if (row.size() != 4)
                throw ParseError("manifest " + manifest_path.string() +
                                 ": expected 4 tab-separated fields, got " +
                                 std::to_string(row.size()));
            const auto& modality = row[1];
            if (modality != "image" && modality != "text")
                throw ParseError("manifest " + manifest_path.string() +
                                 ": unknown modality " + modality);
            std::size_t dim = 0;
            try {
                dim = std::stoul(row[3]);
            } catch (const std::exception&) {
                throw ParseError("manifest " + manifest_path.string() +
                                 ": bad dim " + row[3]);
            }
            if (dim == 0)
                throw ParseError("manifest " + manifest_path.string() + ": dim 0");
            manifest[row[0]].push_back({modality, base / row[2], dim});
        }

        std::set<std::string> known;
        for (auto& rec : rs.records) {
            known.insert(rec.record_id);
            const auto it = manifest.find(rec.record_id);
            if (it == manifest.end()) continue;
            for (const auto& entry : it->second) {
                auto vec = read_vector_file(entry.path, entry.dim);
                if (entry.modality == "image") {
                    if (rs.image_dim == 0) rs.image_dim = entry.dim;
                    if (entry.dim != rs.image_dim)
                        throw DataError("image embedding dim mismatch for record " +
                                        rec.record_id);
                    rec.image_embeddings.push_back(std::move(vec));
                } else {
                    if (rec.text_embedding)
                        throw DataError("multiple text embeddings for record " +
                                        rec.record_id);
                    if (rs.text_dim == 0) rs.text_dim = entry.dim;
                    if (entry.dim != rs.text_dim)
                        throw DataError("text embedding dim mismatch for record " +
                                        rec.record_id);
                    rec.text_embedding = std::move(vec);
                }
            }
        }
        for (const auto& [id, entries] : manifest) {
            if (!known.count(id))
                rs.warnings.push_back("manifest entry for unknown record " + id);
        }
        for (const auto& rec : rs.records) {
            if (rec.image_refs.size() > rec.image_embeddings.size() &&
                !manifest.empty())
                rs.warnings.push_back("record " + rec.record_id + ": " +
                                      std::to_string(rec.image_refs.size()) +
                                      " image refs but " +
                                      std::to_string(rec.image_embeddings.size()) +
                                      " embeddings");
        }
    }

    return rs;
}

std::size_t utf8_length(const std::string& s) {
    std::size_t n = 0;
    for (const char c : s)
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
    return n;
}

RecordSet filter_corpus(const RecordSet& in, int min_label_count,
                        int min_text_chars) {
    // Corpus-wide class frequencies, before any split.
    std::vector<std::vector<std::int64_t>> counts(in.schema.tasks.size());
    for (std::size_t t = 0; t < in.schema.tasks.size(); ++t)
        counts[t].assign(in.schema.tasks[t].classes.size(), 0);
    for (const auto& rec : in.records)
        for (std::size_t t = 0; t < rec.labels.size(); ++t)
            if (rec.labels[t] >= 0) ++counts[t][static_cast<std::size_t>(rec.labels[t])];

    RecordSet out;
    out.image_dim = in.image_dim;
    out.text_dim = in.text_dim;
    out.warnings = in.warnings;

    // Surviving vocabulary + old->new class index maps. Tasks that end up
    // with fewer than 2 classes are removed outright.
    std::vector<int> task_map(in.schema.tasks.size(), -1);
    std::vector<std::vector<int>> class_map(in.schema.tasks.size());
    for (std::size_t t = 0; t < in.schema.tasks.size(); ++t) {
        TaskSchema::Task kept;
        kept.name = in.schema.tasks[t].name;
        class_map[t].assign(in.schema.tasks[t].classes.size(), -1);
        for (std::size_t k = 0; k < in.schema.tasks[t].classes.size(); ++k) {
            if (counts[t][k] >= min_label_count) {
                class_map[t][k] = static_cast<int>(kept.classes.size());
                kept.classes.push_back(in.schema.tasks[t].classes[k]);
            }
        }
        if (kept.classes.size() >= 2) {
            task_map[t] = static_cast<int>(out.schema.tasks.size());
            out.schema.tasks.push_back(std::move(kept));
        } else if (!in.schema.tasks[t].classes.empty()) {
            out.warnings.push_back("task " + in.schema.tasks[t].name +
                                   " removed: fewer than 2 classes pass the rare-label filter");
        }
    }

    for (const auto& rec : in.records) {
        Record kept = rec;
        kept.labels.assign(out.schema.tasks.size(), -1);
        for (std::size_t t = 0; t < rec.labels.size(); ++t) {
            const int old_label = rec.labels[t];
            if (old_label < 0 || task_map[t] < 0) continue;
            const int new_label = class_map[t][static_cast<std::size_t>(old_label)];
            if (new_label >= 0)
                kept.labels[static_cast<std::size_t>(task_map[t])] = new_label;
        }
        if (kept.text &&
            utf8_length(*kept.text) < static_cast<std::size_t>(min_text_chars)) {
            kept.text.reset();
            kept.text_embedding.reset();
        }
        if (kept.label_count() == 0) continue;
        out.records.push_back(std::move(kept));
    }

    const bool any_text_embedding =
        std::any_of(out.records.begin(), out.records.end(),
                    [](const Record& r) { return r.text_embedding.has_value(); });
    if (!any_text_embedding) out.text_dim = 0;
    const bool any_image_embedding =
        std::any_of(out.records.begin(), out.records.end(),
                    [](const Record& r) { return !r.image_embeddings.empty(); });
    if (!any_image_embedding) out.image_dim = 0;

    return out;
}

std::string split_name(Split s) {
    switch (s) {
        case Split::train:
            return "train";
        case Split::validation:
            return "validation";
        case Split::test:
            return "test";
    }
    return "train";
}

Split SplitAssignment::of(const std::string& record_id) const {
    const auto it = by_record.find(record_id);
    if (it == by_record.end())
        throw DataError("record " + record_id + " missing from split assignment");
    return it->second;
}

std::array<std::size_t, 3> SplitAssignment::sizes() const {
    std::array<std::size_t, 3> out = {0, 0, 0};
    for (const auto& [id, s] : by_record) ++out[static_cast<std::size_t>(s)];
    return out;
}

SplitAssignment split_records(const RecordSet& records, std::uint64_t seed,
                              std::array<double, 3> ratios) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::fabs(sum - 1.0) > 1e-9)
        throw ConfigError("split ratios sum to " + std::to_string(sum) +
                          ", expected 1");

    std::vector<std::string> ids;
    ids.reserve(records.records.size());
    for (const auto& rec : records.records) ids.push_back(rec.record_id);
    std::sort(ids.begin(), ids.end());

    Rng rng(seed);
    rng.shuffle(ids);

    const auto n = static_cast<double>(ids.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * ratios[0]));
    const auto n_train_val =
        static_cast<std::size_t>(std::llround(n * (ratios[0] + ratios[1])));

    SplitAssignment split;
    split.seed = seed;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        Split s = Split::test;
        if (i < n_train)
            s = Split::train;
        else if (i < n_train_val)
            s = Split::validation;
        split.by_record[ids[i]] = s;
    }
    return split;
}

void write_split_csv(const std::filesystem::path& path,
                     const SplitAssignment& split) {
    std::vector<csv::Row> rows;
    rows.push_back({"record_id", "split", "seed"});
    for (const auto& [id, s] : split.by_record)
        rows.push_back({id, split_name(s), std::to_string(split.seed)});
    csv::write_file(path, rows);
}

SplitAssignment read_split_csv(const std::filesystem::path& path) {
    const auto rows = csv::read_file(path);
    if (rows.empty() || rows[0].size() < 3 || rows[0][0] != "record_id")
        throw ParseError("bad split file " + path.string());
    SplitAssignment split;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() < 3)
            throw ParseError("bad split row " + std::to_string(i + 1) + " in " +
                             path.string());
        Split s;
        if (row[1] == "train")
            s = Split::train;
        else if (row[1] == "validation")
            s = Split::validation;
        else if (row[1] == "test")
            s = Split::test;
        else
            throw ParseError("unknown split " + row[1] + " in " + path.string());
        split.by_record[row[0]] = s;
        split.seed = std::stoull(row[2]);
    }
    return split;
}

namespace {

CorpusStats::LengthSummary summarize(std::vector<std::int64_t> values) {
    CorpusStats::LengthSummary s;
    s.count = static_cast<std::int64_t>(values.size());
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    const auto rank = [&](double p) {
        const auto idx = static_cast<std::size_t>(
            std::ceil(p * static_cast<double>(values.size())));
        return values[std::max<std::size_t>(idx, 1) - 1];
    };
    s.min = values.front();
    s.p25 = rank(0.25);
    s.p50 = rank(0.50);
    s.p75 = rank(0.75);
    s.max = values.back();
    double total = 0;
    for (const auto v : values) total += static_cast<double>(v);
    s.mean = total / static_cast<double>(values.size());
    return s;
}

}  // namespace

CorpusStats compute_stats(const RecordSet& records, const SplitAssignment& split) {
    CorpusStats stats;
    const auto n_tasks = records.schema.tasks.size();
    stats.class_counts.resize(n_tasks);
    for (std::size_t t = 0; t < n_tasks; ++t) {
        stats.class_counts[t].resize(4);
        for (auto& per_split : stats.class_counts[t])
            per_split.resize(records.schema.tasks[t].classes.size());
    }

    std::vector<std::int64_t> chars, tokens;
    for (const auto& rec : records.records) {
        const auto s = static_cast<std::size_t>(split.of(rec.record_id));
        ++stats.n_records;
        ++stats.museum_counts[rec.museum];

        const bool img = rec.has_image();
        const bool txt = rec.has_text();
        for (const std::size_t si : {s, std::size_t{3}}) {
            auto& o = stats.overlap[si];
            ++o.total;
            if (img) ++o.with_image;
            if (txt) ++o.with_text;
            if (img && txt) ++o.both;
            if (!img && !txt) ++o.neither;
        }

        for (std::size_t t = 0; t < rec.labels.size(); ++t) {
            if (rec.labels[t] < 0) continue;
            const auto k = static_cast<std::size_t>(rec.labels[t]);
            for (const std::size_t si : {s, std::size_t{3}}) {
                auto& c = stats.class_counts[t][si][k];
                ++c.total;
                if (img) ++c.with_image;
                if (txt) ++c.with_text;
            }
        }

        if (rec.text) {
            chars.push_back(static_cast<std::int64_t>(utf8_length(*rec.text)));
            tokens.push_back(static_cast<std::int64_t>(split_ws(*rec.text).size()));
        }
    }
    stats.text_chars = summarize(std::move(chars));
    stats.text_tokens = summarize(std::move(tokens));
    return stats;
}

void write_stats_csvs(const CorpusStats& stats, const TaskSchema& schema,
                      const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    {
        std::vector<std::pair<std::string, std::int64_t>> museums(
            stats.museum_counts.begin(), stats.museum_counts.end());
        std::sort(museums.begin(), museums.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        std::vector<csv::Row> rows = {{"museum", "records"}};
        for (const auto& [name, count] : museums)
            rows.push_back({name, std::to_string(count)});
        csv::write_file(dir / "museums.csv", rows);
    }

    {
        std::vector<csv::Row> rows = {
            {"task", "split", "class", "total", "with_image", "with_text"}};
        static const char* kSplits[4] = {"train", "validation", "test", "all"};
        for (std::size_t t = 0; t < stats.class_counts.size(); ++t) {
            for (std::size_t s = 0; s < 4; ++s) {
                for (std::size_t k = 0; k < stats.class_counts[t][s].size(); ++k) {
                    const auto& c = stats.class_counts[t][s][k];
                    rows.push_back({schema.tasks[t].name, kSplits[s],
                                    schema.tasks[t].classes[k],
                                    std::to_string(c.total),
                                    std::to_string(c.with_image),
                                    std::to_string(c.with_text)});
                }
            }
        }
        csv::write_file(dir / "class_counts.csv", rows);
    }

    {
        std::vector<csv::Row> rows = {
            {"split", "total", "with_image", "with_text", "both", "neither"}};
        static const char* kSplits[4] = {"train", "validation", "test", "all"};
        for (std::size_t s = 0; s < 4; ++s) {
            const auto& o = stats.overlap[s];
            rows.push_back({kSplits[s], std::to_string(o.total),
                            std::to_string(o.with_image), std::to_string(o.with_text),
                            std::to_string(o.both), std::to_string(o.neither)});
        }
        csv::write_file(dir / "overlap.csv", rows);
    }

    {
        auto fmt = [](const CorpusStats::LengthSummary& s, const char* name) {
            std::ostringstream mean;
            mean.precision(1);
            mean << std::fixed << s.mean;
            return csv::Row{name,
                            std::to_string(s.min),
                            std::to_string(s.p25),
                            std::to_string(s.p50),
                            std::to_string(s.p75),
                            mean.str(),
                            std::to_string(s.max),
                            std::to_string(s.count)};
        };
        std::vector<csv::Row> rows = {
            {"metric", "min", "p25", "p50", "p75", "mean", "max", "count"}};
        rows.push_back(fmt(stats.text_chars, "chars"));
        rows.push_back(fmt(stats.text_tokens, "tokens"));
        csv::write_file(dir / "text_lengths.csv", rows);
    }
}

}  // namespace mmc::corpus
