#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

/// Corpus ingestion: record CSV parsing, label grouping, rare-label and
/// short-text filtering, record-level splitting, and dataset statistics.
namespace mmc::corpus {

struct TaskSchema {
    struct Task {
        std::string name;
        std::vector<std::string> classes;  // vocabulary order is significant
    };
    std::vector<Task> tasks;

    /// The four stock tasks with their class vocabularies: place(9),
    /// timespan(5), technique(4), material(3).
    static TaskSchema default_schema();

    int task_index(const std::string& name) const;            // -1 if absent
    int class_index(std::size_t task, const std::string& c) const;  // -1 if absent

    /// Throws DataError unless every task has >= 2 duplicate-free classes.
    void validate() const;
};

struct Record {
    std::string record_id;
    std::string museum;  // "[NA]" preserved as its own category
    std::optional<std::string> text;
    std::vector<std::string> image_refs;
    std::vector<std::vector<double>> image_embeddings;
    std::optional<std::vector<double>> text_embedding;
    std::vector<int> labels;  // index-aligned with schema tasks; -1 = missing

    bool has_image() const {
        return !image_refs.empty() || !image_embeddings.empty();
    }
    bool has_text() const { return text.has_value() || text_embedding.has_value(); }
    int label_count() const;
};

struct RecordSet {
    TaskSchema schema;
    std::vector<Record> records;
    std::size_t image_dim = 0;  // 0 when the corpus has no image embeddings
    std::size_t text_dim = 0;
    std::vector<std::string> warnings;
};

/// Raw-label -> group-label mapping, scoped per task. Lookup keys are
/// trimmed and ASCII case-folded.
struct GroupingTable {
    std::map<std::string, std::map<std::string, std::string>> by_task;

    /// TSV rows: raw_label <TAB> task <TAB> group_label.
    static GroupingTable load(const std::filesystem::path& path);
    bool empty() const { return by_task.empty(); }
};

/// Trim whitespace and lower-case ASCII; lookup normalization for grouping.
std::string fold_key(const std::string& raw);

/// Exact-match lookup after normalization. Throws DataError naming the raw
/// string when unmapped.
std::string map_group_label(const std::string& raw, const GroupingTable& table,
                            const std::string& task);

/// What to do with a raw label that the grouping table does not know.
enum class UnmappedPolicy { abort, drop };

struct ParseOptions {
    const GroupingTable* grouping = nullptr;  // null: labels must match schema
    UnmappedPolicy unmapped = UnmappedPolicy::abort;
};

/// Read the record CSV (columns record_id, museum, text, images, then one
/// column per task; `[NA]` = missing) and, when manifest_path is non-empty,
/// attach embeddings listed there (lines record_id <TAB> modality <TAB>
/// relative_path <TAB> dim; vectors are little-endian float32).
RecordSet parse_records(const std::filesystem::path& csv_path,
                        const std::filesystem::path& manifest_path,
                        const TaskSchema& schema = TaskSchema::default_schema(),
                        const ParseOptions& options = {});

/// Corpus-wide cleanup, applied before splitting: classes rarer than
/// min_label_count disappear from the vocabulary and from records; texts
/// shorter than min_text_chars (code points) are removed along with their
/// embedding; records with zero remaining labels are dropped.
RecordSet filter_corpus(const RecordSet& in, int min_label_count = 150,
                        int min_text_chars = 60);

enum class Split { train, validation, test };

std::string split_name(Split s);

struct SplitAssignment {
    std::map<std::string, Split> by_record;
    std::uint64_t seed = 0;

    Split of(const std::string& record_id) const;
    std::array<std::size_t, 3> sizes() const;
};

/// Deterministic record-level partition: sorted ids, seeded shuffle, then
/// contiguous cuts at the rounded ratio boundaries.
SplitAssignment split_records(const RecordSet& records, std::uint64_t seed,
                              std::array<double, 3> ratios = {0.6, 0.2, 0.2});

void write_split_csv(const std::filesystem::path& path, const SplitAssignment& split);
SplitAssignment read_split_csv(const std::filesystem::path& path);

struct CorpusStats {
    struct ClassCount {
        std::int64_t total = 0;
        std::int64_t with_image = 0;
        std::int64_t with_text = 0;
    };
    struct Overlap {
        std::int64_t total = 0;
        std::int64_t with_image = 0;
        std::int64_t with_text = 0;
        std::int64_t both = 0;
        std::int64_t neither = 0;
    };
    struct LengthSummary {
        std::int64_t min = 0, p25 = 0, p50 = 0, p75 = 0, max = 0;
        double mean = 0.0;
        std::int64_t count = 0;
    };

    // class_counts[task][split][class]; split index 3 = whole corpus.
    std::vector<std::vector<std::vector<ClassCount>>> class_counts;
    std::array<Overlap, 4> overlap;  // train, validation, test, all
    std::map<std::string, std::int64_t> museum_counts;
    LengthSummary text_chars;   // over records with a text string
    LengthSummary text_tokens;  // whitespace-separated
    std::int64_t n_records = 0;
};

CorpusStats compute_stats(const RecordSet& records, const SplitAssignment& split);

/// museums.csv, class_counts.csv, overlap.csv, text_lengths.csv under dir.
void write_stats_csvs(const CorpusStats& stats, const TaskSchema& schema,
                      const std::filesystem::path& dir);

/// Code-point count of a UTF-8 string (continuation bytes excluded).
std::size_t utf8_length(const std::string& s);

}  // namespace mmc::corpus
