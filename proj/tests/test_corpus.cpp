#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>

#include "mmclass/corpus.hpp"
#include "mmclass/error.hpp"
#include "mmclass/rng.hpp"

#include "test_util.hpp"

namespace mc = mmc::corpus;
using test_util::fresh_dir;
using test_util::read_bytes;
using test_util::write_text;
using test_util::write_vector_f32;

namespace {

const char* kHeader = "record_id,museum,text,images,place,timespan,technique,material\n";

std::string long_text(std::size_t n, char c = 'x') { return std::string(n, c); }

mc::RecordSet parse_csv_string(const std::string& body,
                               const std::filesystem::path& dir,
                               const mc::ParseOptions& opts = {}) {
    const auto csv = dir / "records.csv";
    write_text(csv, std::string(kHeader) + body);
    return mc::parse_records(csv, "", mc::TaskSchema::default_schema(), opts);
}

}  // namespace

TEST_CASE("default schema shape") {
    const auto schema = mc::TaskSchema::default_schema();
    REQUIRE(schema.tasks.size() == 4);
    CHECK(schema.tasks[0].classes.size() == 9);
    CHECK(schema.tasks[1].classes.size() == 5);
    CHECK(schema.tasks[2].classes.size() == 4);
    CHECK(schema.tasks[3].classes.size() == 3);
    CHECK_NOTHROW(schema.validate());
}

TEST_CASE("parse maps [NA] cells to missing labels and keeps metadata") {
    const auto dir = fresh_dir("corpus_parse");
    const auto rs = parse_csv_string(
        "obj1,vam,\"Furnishing fabric of woven silk\",ref1 ref2,GB,XIX,[NA],[NA]\n",
        dir);
    REQUIRE(rs.records.size() == 1);
    const auto& rec = rs.records[0];
    CHECK(rec.museum == "vam");
    CHECK(rec.text.value() == "Furnishing fabric of woven silk");
    CHECK(rec.image_refs == std::vector<std::string>{"ref1", "ref2"});
    CHECK(rec.labels[0] == 2);   // GB
    CHECK(rec.labels[1] == 0);   // XIX
    CHECK(rec.labels[2] == -1);  // technique missing
    CHECK(rec.labels[3] == -1);
    CHECK(rec.label_count() == 2);
}

TEST_CASE("header-only CSV parses to an empty record set") {
    const auto dir = fresh_dir("corpus_empty");
    const auto rs = parse_csv_string("", dir);
    CHECK(rs.records.empty());
}

TEST_CASE("record with all label cells [NA] is kept as unlabeled") {
    const auto dir = fresh_dir("corpus_unlabeled");
    const auto rs =
        parse_csv_string("obj1,met,[NA],[NA],[NA],[NA],[NA],[NA]\n", dir);
    REQUIRE(rs.records.size() == 1);
    CHECK(rs.records[0].label_count() == 0);
    CHECK_FALSE(rs.records[0].has_image());
    CHECK_FALSE(rs.records[0].has_text());
}

TEST_CASE("malformed row reports its row number") {
    const auto dir = fresh_dir("corpus_malformed");
    try {
        parse_csv_string("obj1,met,[NA],[NA],FR\n", dir);
        FAIL("expected ParseError");
    } catch (const mmc::ParseError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
}

TEST_CASE("out-of-vocabulary label names the label") {
    const auto dir = fresh_dir("corpus_badlabel");
    try {
        parse_csv_string("obj1,met,[NA],[NA],Atlantis,[NA],[NA],[NA]\n", dir);
        FAIL("expected DataError");
    } catch (const mmc::DataError& e) {
        CHECK(std::string(e.what()).find("Atlantis") != std::string::npos);
    }
}

TEST_CASE("duplicate record ids are rejected") {
    const auto dir = fresh_dir("corpus_dup");
    CHECK_THROWS_AS(parse_csv_string("a,met,[NA],[NA],FR,[NA],[NA],[NA]\n"
                                     "a,met,[NA],[NA],IT,[NA],[NA],[NA]\n",
                                     dir),
                    mmc::DataError);
}

TEST_CASE("grouping table maps raw labels case-insensitively") {
    const auto dir = fresh_dir("corpus_grouping");
    write_text(dir / "groups.tsv",
               "Damas\ttechnique\tdamask\n"
               "damask\ttechnique\tdamask\n"
               "Great Britain\tplace\tGB\n");
    const auto table = mc::GroupingTable::load(dir / "groups.tsv");

    CHECK(mc::map_group_label("Damas", table, "technique") == "damask");
    CHECK(mc::map_group_label("  DAMAS  ", table, "technique") == "damask");
    CHECK(mc::map_group_label("damask", table, "technique") == "damask");
    CHECK(mc::map_group_label("great britain", table, "place") == "GB");

    try {
        mc::map_group_label("brocade-xyz-typo", table, "technique");
        FAIL("expected DataError");
    } catch (const mmc::DataError& e) {
        CHECK(std::string(e.what()).find("brocade-xyz-typo") != std::string::npos);
    }
}

TEST_CASE("parse with grouping translates and honors the unmapped policy") {
    const auto dir = fresh_dir("corpus_grouping_parse");
    write_text(dir / "groups.tsv",
               "Damas\ttechnique\tdamask\n"
               "Great Britain\tplace\tGB\n");
    const auto table = mc::GroupingTable::load(dir / "groups.tsv");

    mc::ParseOptions abort_opts;
    abort_opts.grouping = &table;
    const auto rs = parse_csv_string(
        "obj1,vam,[NA],[NA],Great Britain,[NA],Damas,[NA]\n", dir, abort_opts);
    CHECK(rs.records[0].labels[0] == 2);  // GB
    CHECK(rs.records[0].labels[2] == 2);  // damask

    CHECK_THROWS_AS(parse_csv_string(
                        "obj2,vam,[NA],[NA],Narnia,[NA],[NA],[NA]\n", dir, abort_opts),
                    mmc::DataError);

    mc::ParseOptions drop_opts = abort_opts;
    drop_opts.unmapped = mc::UnmappedPolicy::drop;
    const auto dropped = parse_csv_string(
        "obj2,vam,[NA],[NA],Narnia,[NA],Damas,[NA]\n", dir, drop_opts);
    CHECK(dropped.records[0].labels[0] == -1);
    CHECK(dropped.records[0].labels[2] == 2);
    CHECK(!dropped.warnings.empty());
}

TEST_CASE("embedding manifest attaches vectors and warns on gaps") {
    const auto dir = fresh_dir("corpus_manifest");
    write_text(dir / "records.csv",
               std::string(kHeader) +
                   "obj1,met,[NA],r1 r2,FR,[NA],[NA],[NA]\n"
                   "obj2,met," + long_text(80) + ",[NA],IT,[NA],[NA],[NA]\n");
    write_vector_f32(dir / "v1.bin", {1.0f, 2.0f, 3.0f});
    write_vector_f32(dir / "v2.bin", {4.0f, 5.0f, 6.0f});
    write_vector_f32(dir / "t1.bin", {0.5f, -0.5f});
    write_text(dir / "manifest.tsv",
               "obj1\timage\tv1.bin\t3\n"
               "obj1\timage\tv2.bin\t3\n"
               "obj2\ttext\tt1.bin\t2\n");

    const auto rs = mc::parse_records(dir / "records.csv", dir / "manifest.tsv");
    CHECK(rs.image_dim == 3);
    CHECK(rs.text_dim == 2);
    REQUIRE(rs.records[0].image_embeddings.size() == 2);
    CHECK(rs.records[0].image_embeddings[0] == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(rs.records[1].text_embedding.value() == std::vector<double>{0.5, -0.5});

    // Missing embedding for a listed ref: record kept, warning logged.
    write_text(dir / "manifest2.tsv", "obj1\timage\tv1.bin\t3\n");
    const auto partial = mc::parse_records(dir / "records.csv", dir / "manifest2.tsv");
    CHECK(partial.records[0].image_embeddings.size() == 1);
    CHECK(std::any_of(partial.warnings.begin(), partial.warnings.end(),
                      [](const std::string& w) {
                          return w.find("obj1") != std::string::npos;
                      }));

    // Dimension mismatch across image embeddings is an error.
    write_text(dir / "manifest3.tsv",
               "obj1\timage\tv1.bin\t3\n"
               "obj1\timage\tt1.bin\t2\n");
    CHECK_THROWS_AS(mc::parse_records(dir / "records.csv", dir / "manifest3.tsv"),
                    mmc::DataError);

    // Vector file shorter than its declared dim is an error.
    write_text(dir / "manifest4.tsv", "obj1\timage\tv1.bin\t4\n");
    CHECK_THROWS_AS(mc::parse_records(dir / "records.csv", dir / "manifest4.tsv"),
                    mmc::DataError);
}

TEST_CASE("utf8 length counts code points, not bytes") {
    CHECK(mc::utf8_length("abc") == 3);
    CHECK(mc::utf8_length("") == 0);
    CHECK(mc::utf8_length("caf\xc3\xa9") == 4);          // e-acute, 2 bytes
    CHECK(mc::utf8_length("\xe2\x82\xac 5") == 3);       // euro sign, 3 bytes
}

namespace {

// A synthetic record set: `count` records labeled with class `cls` of task
// `task`, optional text length.
void add_records(mc::RecordSet& rs, const std::string& prefix, int count,
                 std::size_t task, int cls, std::size_t text_len = 0) {
    for (int i = 0; i < count; ++i) {
        mc::Record rec;
        rec.record_id = prefix + std::to_string(i);
        rec.museum = "met";
        rec.labels.assign(rs.schema.tasks.size(), -1);
        rec.labels[task] = cls;
        if (text_len > 0) rec.text = long_text(text_len);
        rs.records.push_back(std::move(rec));
    }
}

}  // namespace

TEST_CASE("rare-label filter boundary: 149 goes, 150 stays") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();
    add_records(rs, "fr", 150, 0, 0);  // FR kept
    add_records(rs, "it", 150, 0, 1);  // IT kept
    add_records(rs, "gb", 149, 0, 2);  // GB dropped

    const auto filtered = mc::filter_corpus(rs);
    const int place = filtered.schema.task_index("place");
    REQUIRE(place >= 0);
    const auto& classes = filtered.schema.tasks[static_cast<std::size_t>(place)].classes;
    CHECK(std::find(classes.begin(), classes.end(), "FR") != classes.end());
    CHECK(std::find(classes.begin(), classes.end(), "IT") != classes.end());
    CHECK(std::find(classes.begin(), classes.end(), "GB") == classes.end());

    // GB records lost their only label, so they are gone entirely.
    CHECK(filtered.records.size() == 300);

    // Labels were remapped onto the shrunken vocabulary.
    for (const auto& rec : filtered.records) {
        const int l = rec.labels[static_cast<std::size_t>(place)];
        CHECK(l >= 0);
        CHECK(l < static_cast<int>(classes.size()));
    }
}

TEST_CASE("short-text filter boundary: 59 removed, 60 kept") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();
    add_records(rs, "a", 150, 0, 0, 59);
    add_records(rs, "b", 150, 0, 1, 60);

    const auto filtered = mc::filter_corpus(rs);
    REQUIRE(filtered.records.size() == 300);
    int with_text = 0;
    for (const auto& rec : filtered.records)
        if (rec.text) ++with_text;
    CHECK(with_text == 150);
    // Text removal keeps the record and its labels.
    for (const auto& rec : filtered.records) CHECK(rec.label_count() == 1);
}

TEST_CASE("filter is idempotent and leaks no vocabulary") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();
    add_records(rs, "fr", 200, 0, 0);
    add_records(rs, "it", 151, 0, 1);
    add_records(rs, "gb", 30, 0, 2);
    add_records(rs, "embro", 170, 2, 0, 100);
    add_records(rs, "velvet", 10, 2, 1);
    add_records(rs, "damask", 155, 2, 2, 44);

    const auto once = mc::filter_corpus(rs);
    const auto twice = mc::filter_corpus(once);

    CHECK(once.records.size() == twice.records.size());
    CHECK(once.schema.tasks.size() == twice.schema.tasks.size());
    for (std::size_t t = 0; t < once.schema.tasks.size(); ++t)
        CHECK(once.schema.tasks[t].classes == twice.schema.tasks[t].classes);
    for (std::size_t i = 0; i < once.records.size(); ++i) {
        CHECK(once.records[i].record_id == twice.records[i].record_id);
        CHECK(once.records[i].labels == twice.records[i].labels);
        CHECK(once.records[i].text == twice.records[i].text);
    }

    // No record carries a label outside the filtered vocabulary.
    for (const auto& rec : once.records) {
        REQUIRE(rec.labels.size() == once.schema.tasks.size());
        for (std::size_t t = 0; t < rec.labels.size(); ++t) {
            CHECK(rec.labels[t] >= -1);
            CHECK(rec.labels[t] <
                  static_cast<int>(once.schema.tasks[t].classes.size()));
        }
    }
}

TEST_CASE("task with fewer than two surviving classes is removed") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();
    add_records(rs, "fr", 200, 0, 0);
    add_records(rs, "it", 200, 0, 1);
    add_records(rs, "embro", 200, 2, 0);  // only one technique class survives

    const auto filtered = mc::filter_corpus(rs);
    CHECK(filtered.schema.task_index("place") >= 0);
    CHECK(filtered.schema.task_index("technique") == -1);
    // The technique-only records lost their label and were dropped.
    CHECK(filtered.records.size() == 400);
}

TEST_CASE("split of 10 records is (6,2,2) and deterministic") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();
    add_records(rs, "r", 10, 0, 0);

    const auto split = mc::split_records(rs, 1234);
    const auto sizes = split.sizes();
    CHECK(sizes[0] == 6);
    CHECK(sizes[1] == 2);
    CHECK(sizes[2] == 2);

    const auto again = mc::split_records(rs, 1234);
    CHECK(split.by_record == again.by_record);

    const auto other = mc::split_records(rs, 4321);
    CHECK(split.by_record != other.by_record);

    const auto dir = fresh_dir("corpus_split");
    mc::write_split_csv(dir / "a.csv", split);
    mc::write_split_csv(dir / "b.csv", again);
    CHECK(read_bytes(dir / "a.csv") == read_bytes(dir / "b.csv"));

    const auto back = mc::read_split_csv(dir / "a.csv");
    CHECK(back.by_record == split.by_record);
    CHECK(back.seed == split.seed);
}

TEST_CASE("split partitions 1000 records disjointly and exhaustively") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();
    add_records(rs, "r", 1000, 0, 0);

    const auto split = mc::split_records(rs, 77);
    CHECK(split.by_record.size() == 1000);
    std::array<std::set<std::string>, 3> parts;
    for (const auto& [id, s] : split.by_record)
        parts[static_cast<std::size_t>(s)].insert(id);
    CHECK(parts[0].size() == 600);
    CHECK(parts[1].size() == 200);
    CHECK(parts[2].size() == 200);

    std::set<std::string> all;
    for (const auto& p : parts) all.insert(p.begin(), p.end());
    CHECK(all.size() == 1000);
    for (const auto& rec : rs.records) CHECK(all.count(rec.record_id) == 1);
}

TEST_CASE("bad split ratios are a configuration error") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();
    add_records(rs, "r", 10, 0, 0);
    CHECK_THROWS_AS(mc::split_records(rs, 1, {0.6, 0.2, 0.1}), mmc::ConfigError);
}

TEST_CASE("stats hand case: image-only, text-only, both") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();

    mc::Record a;
    a.record_id = "a";
    a.museum = "met";
    a.labels = {0, -1, -1, -1};
    a.image_refs = {"r1"};
    rs.records.push_back(a);

    mc::Record b;
    b.record_id = "b";
    b.museum = "vam";
    b.labels = {0, -1, -1, -1};
    b.text = long_text(80);
    rs.records.push_back(b);

    mc::Record c;
    c.record_id = "c";
    c.museum = "met";
    c.labels = {1, -1, -1, -1};
    c.image_refs = {"r2"};
    c.text = long_text(90);
    rs.records.push_back(c);

    const auto split = mc::split_records(rs, 9);
    const auto stats = mc::compute_stats(rs, split);

    const auto& all = stats.overlap[3];
    CHECK(all.total == 3);
    CHECK(all.with_image == 2);
    CHECK(all.with_text == 2);
    CHECK(all.both == 1);
    CHECK(all.neither == 0);
    CHECK(stats.museum_counts.at("met") == 2);
    CHECK(stats.museum_counts.at("vam") == 1);
    CHECK(stats.text_chars.min == 80);
    CHECK(stats.text_chars.max == 90);
}

TEST_CASE("stats degenerate corpus: images everywhere, no text") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();
    add_records(rs, "r", 20, 0, 0);
    for (auto& rec : rs.records) rec.image_refs = {"x"};

    const auto split = mc::split_records(rs, 5);
    const auto stats = mc::compute_stats(rs, split);
    const auto& all = stats.overlap[3];
    CHECK(all.with_image == all.total);
    CHECK(all.both == 0);
    CHECK(all.neither == 0);
    CHECK(stats.text_chars.count == 0);
}

TEST_CASE("stats conservation: class counts sum to labeled totals per split") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();
    mmc::Rng rng(13);
    for (int i = 0; i < 400; ++i) {
        mc::Record rec;
        rec.record_id = "r" + std::to_string(i);
        rec.museum = "met";
        rec.labels.assign(4, -1);
        for (std::size_t t = 0; t < 4; ++t) {
            if (rng.next_below(3) == 0) continue;  // leave some labels missing
            rec.labels[t] = static_cast<int>(
                rng.next_below(rs.schema.tasks[t].classes.size()));
        }
        if (rng.next_bernoulli(0.5)) rec.image_refs = {"x"};
        if (rng.next_bernoulli(0.4)) rec.text = long_text(100);
        rs.records.push_back(std::move(rec));
    }

    const auto split = mc::split_records(rs, 21);
    const auto stats = mc::compute_stats(rs, split);

    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t s = 0; s < 4; ++s) {
            std::int64_t total = 0, with_image = 0, with_text = 0;
            for (const auto& c : stats.class_counts[t][s]) {
                total += c.total;
                with_image += c.with_image;
                with_text += c.with_text;
            }
            // Recount directly from records.
            std::int64_t want_total = 0, want_img = 0, want_txt = 0;
            for (const auto& rec : rs.records) {
                if (rec.labels[t] < 0) continue;
                const auto rec_split =
                    static_cast<std::size_t>(split.of(rec.record_id));
                if (s != 3 && rec_split != s) continue;
                ++want_total;
                if (rec.has_image()) ++want_img;
                if (rec.has_text()) ++want_txt;
            }
            CHECK(total == want_total);
            CHECK(with_image == want_img);
            CHECK(with_text == want_txt);
        }
    }

    // Overlap identity per split.
    for (const auto& o : stats.overlap)
        CHECK(o.total == o.with_image + o.with_text - o.both + o.neither);
}

TEST_CASE("stats CSVs are deterministic") {
    mc::RecordSet rs;
    rs.schema = mc::TaskSchema::default_schema();
    add_records(rs, "r", 25, 0, 0, 70);
    const auto split = mc::split_records(rs, 3);
    const auto stats = mc::compute_stats(rs, split);

    const auto d1 = fresh_dir("corpus_stats1");
    const auto d2 = fresh_dir("corpus_stats2");
    mc::write_stats_csvs(stats, rs.schema, d1);
    mc::write_stats_csvs(stats, rs.schema, d2);
    for (const char* name :
         {"museums.csv", "class_counts.csv", "overlap.csv", "text_lengths.csv"}) {
        CHECK(read_bytes(d1 / name) == read_bytes(d2 / name));
        CHECK(!read_bytes(d1 / name).empty());
    }
}
