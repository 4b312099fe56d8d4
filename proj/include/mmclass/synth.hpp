#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

/// Seeded synthetic corpus generator. Produces a record CSV, an embedding
/// manifest, and float32 embedding files shaped like a real museum export:
/// multilingual raw labels that need the grouping table, uneven class
/// frequencies, missing labels, records with only some modalities, and a
/// spread of text lengths straddling the short-text filter.
///
/// The modalities carry complementary signal by construction: image
/// embeddings encode technique and material, text embeddings encode place
/// and timespan, and the categorical columns (museum, sibling labels) carry
/// a moderate signal for everything. A late-fusion classifier therefore has
/// something real to gain over every single modality.
namespace mmc::synth {

struct SynthSpec {
    std::size_t n_records = 1200;
    std::size_t image_dim = 24;
    std::size_t text_dim = 16;
    double image_coverage = 0.85;  // fraction of records with image embeddings
    double text_coverage = 0.85;
    double label_coverage = 0.9;   // per task, fraction of visible labels
    double raw_variant_rate = 0.5; // museum-style spelling instead of group name
    double noise = 0.45;           // per-coordinate embedding noise scale
    std::uint64_t seed = 7;

    /// Throws ConfigError on empty dimensions or rates outside [0, 1].
    void validate() const;
};

struct SynthReport {
    std::filesystem::path csv;       // <dir>/records.csv
    std::filesystem::path manifest;  // <dir>/manifest.tsv
    std::filesystem::path grouping;  // <dir>/grouping.tsv
    std::size_t n_records = 0;
    std::size_t n_image_vectors = 0;
    std::size_t n_text_vectors = 0;
};

/// Writes records.csv, manifest.tsv, grouping.tsv (covering exactly the
/// spellings the generator emits), and embeddings/*.f32 under dir (created
/// if needed). Same spec, same bytes.
SynthReport generate_corpus(const std::filesystem::path& dir, const SynthSpec& spec);

}  // namespace mmc::synth
