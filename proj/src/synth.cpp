#include "mmclass/synth.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "mmclass/corpus.hpp"
#include "mmclass/csv.hpp"
#include "mmclass/error.hpp"
#include "mmclass/rng.hpp"

namespace mmc::synth {

namespace {

// Spellings per class, first entry canonical. Everything here must resolve
// through data/maps/grouping.tsv; a test pushes a generated corpus through
// the shipped table to keep the two in sync.
const std::vector<std::vector<std::vector<const char*>>> kSpellings = {
    // place: FR IT GB ES IN CN IR JP TR
    {{"FR", "France", "Francia", "Lyon"},
     {"IT", "Italy", "Italia", "Venice"},
     {"GB", "Great Britain", "United Kingdom", "England"},
     {"ES", "Spain", "Espana", "Espagne"},
     {"IN", "India"},
     {"CN", "China"},
     {"IR", "Iran", "Persia"},
     {"JP", "Japan", "Japon"},
     {"TR", "Turkey", "Ottoman Empire"}},
    // timespan: XIX XVIII XX XVII XVI
    {{"XIX", "19th century", "1800-1899", "XIXe siecle"},
     {"XVIII", "18th century", "1700-1799"},
     {"XX", "20th century", "1900-1999"},
     {"XVII", "17th century", "1600-1699"},
     {"XVI", "16th century", "1500-1599"}},
    // technique: embroidery velvet damask other
    {{"embroidery", "Embroidery", "Broderie", "Bordado", "Ricamo"},
     {"velvet", "Velvet", "Velours", "Terciopelo", "Velluto"},
     {"damask", "Damask", "Damas", "Damasco"},
     {"other", "Brocade", "Lampas", "Satin", "Taffeta"}},
    // material: animal fibre, vegetable fibre, metal thread
    {{"animal fibre", "Silk", "Seide", "Soie", "Seda", "Wool"},
     {"vegetable fibre", "Cotton", "Linen", "Algodon", "Lino"},
     {"metal thread", "Metal thread", "Gold thread", "Silver thread",
      "Fils metalliques"}},
};

const std::array<const char*, 6> kMuseums = {"garin",   "imatex", "joconde",
                                             "met",     "risd",   "vam"};
// Preferred museum per place class; picked with probability 0.65.
const std::array<int, 9> kMuseumForPlace = {2, 1, 5, 0, 5, 3, 3, 4, 1};

const std::array<double, 9> kPlaceWeights = {1.6, 1.4, 1.2, 1.1, 1.0,
                                             1.0, 0.9, 0.9, 0.9};
const std::array<double, 5> kSpanWeights = {1.5, 1.3, 1.0, 0.8, 0.6};
const std::array<double, 4> kTechWeights = {1.3, 1.2, 1.1, 1.0};
const std::array<double, 3> kMatWeights = {1.5, 1.0, 0.8};
// Likely material per technique (embroidery -> metal thread, velvet and
// damask -> animal fibre, other -> vegetable fibre), picked w.p. 0.7.
const std::array<int, 4> kMaterialForTech = {2, 0, 0, 1};

const std::array<const char*, 24> kWords = {
    "woven",    "silk",    "panel",   "with",     "floral",  "motif",
    "border",   "fragment", "brocaded", "ground",  "pattern", "thread",
    "repeating", "design",  "dress",   "textile",  "gilt",    "lining",
    "chasuble", "ribbon",   "figured", "satin",    "leaf",    "scroll"};

template <std::size_t N>
std::size_t weighted_draw(Rng& rng, const std::array<double, N>& weights) {
    double total = 0.0;
    for (const double w : weights) total += w;
    double u = rng.next_double() * total;
    for (std::size_t i = 0; i < N; ++i) {
        u -= weights[i];
        if (u < 0.0) return i;
    }
    return N - 1;
}

std::vector<std::vector<double>> class_directions(std::size_t classes,
                                                  std::size_t dim, Rng& rng) {
    std::vector<std::vector<double>> dirs(classes, std::vector<double>(dim));
    for (auto& d : dirs) {
        double norm2 = 0.0;
        for (double& x : d) {
            x = rng.next_normal();
            norm2 += x * x;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : d) x *= inv;
    }
    return dirs;
}

void write_f32(const std::filesystem::path& path, const std::vector<double>& v) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const double x : v) {
        const float f = static_cast<float>(x);
        out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
    if (!out.flush()) throw IoError("short write to " + path.string());
}

std::string sentence(Rng& rng, std::size_t n_words) {
    std::string text;
    for (std::size_t w = 0; w < n_words; ++w) {
        if (w) text += ' ';
        text += kWords[rng.next_below(kWords.size())];
    }
    return text;
}

}  // namespace

void SynthSpec::validate() const {
    if (n_records == 0) throw ConfigError("synth: n_records must be positive");
    if (image_dim == 0 || text_dim == 0)
        throw ConfigError("synth: embedding dims must be positive");
    for (const double rate :
         {image_coverage, text_coverage, label_coverage, raw_variant_rate}) {
        if (!(rate >= 0.0 && rate <= 1.0))
            throw ConfigError("synth: coverage rates must be in [0, 1]");
    }
    if (!(noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
}

SynthReport generate_corpus(const std::filesystem::path& dir, const SynthSpec& spec) {
    spec.validate();
    std::filesystem::create_directories(dir / "embeddings");

    // Class directions come from their own stream so that record draws do
    // not shift them.
    Rng dir_rng(spec.seed ^ 0xd1ec710e5ull);
    const auto tech_dirs = class_directions(4, spec.image_dim, dir_rng);
    const auto mat_dirs = class_directions(3, spec.image_dim, dir_rng);
    const auto place_dirs = class_directions(9, spec.text_dim, dir_rng);
    const auto span_dirs = class_directions(5, spec.text_dim, dir_rng);

    Rng rng(spec.seed);
    std::vector<csv::Row> rows;
    rows.push_back({"record_id", "museum", "text", "images", "place", "timespan",
                    "technique", "material"});
    std::vector<std::string> manifest_lines;
    SynthReport report;

    for (std::size_t i = 0; i < spec.n_records; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "syn-%04zu", i);

        // Latent classes; correlated so the categorical columns carry
        // signal about their siblings.
        const std::size_t place = weighted_draw(rng, kPlaceWeights);
        const std::size_t span = rng.next_bernoulli(0.45)
                                     ? place % 5
                                     : weighted_draw(rng, kSpanWeights);
        const std::size_t tech = weighted_draw(rng, kTechWeights);
        const std::size_t mat = rng.next_bernoulli(0.7)
                                    ? static_cast<std::size_t>(kMaterialForTech[tech])
                                    : weighted_draw(rng, kMatWeights);

        std::string museum = rng.next_bernoulli(0.65)
                                 ? kMuseums[kMuseumForPlace[place]]
                                 : kMuseums[rng.next_below(kMuseums.size())];
        if (rng.next_bernoulli(0.04)) museum = "[NA]";

        // Visible labels; the latent class always exists, the catalogue
        // entry sometimes does not.
        const std::array<std::size_t, 4> latent = {place, span, tech, mat};
        std::array<bool, 4> visible;
        bool any = false;
        for (auto& v : visible) {
            v = rng.next_bernoulli(spec.label_coverage);
            any = any || v;
        }
        if (!any) visible[2] = true;

        std::array<std::string, 4> cells;
        for (std::size_t t = 0; t < 4; ++t) {
            if (!visible[t]) {
                cells[t] = "[NA]";
                continue;
            }
            const auto& spellings = kSpellings[t][latent[t]];
            const bool variant = spellings.size() > 1 &&
                                 rng.next_bernoulli(spec.raw_variant_rate);
            cells[t] = variant ? spellings[1 + rng.next_below(spellings.size() - 1)]
                               : spellings[0];
        }

        // Image embeddings: technique + material signal.
        std::vector<std::string> image_files;
        std::string image_refs;
        if (rng.next_bernoulli(spec.image_coverage)) {
            std::size_t count = 1;
            if (rng.next_bernoulli(0.2)) ++count;
            if (rng.next_bernoulli(0.05)) ++count;
            for (std::size_t k = 0; k < count; ++k) {
                std::vector<double> e(spec.image_dim);
                for (std::size_t d = 0; d < spec.image_dim; ++d)
                    e[d] = tech_dirs[tech][d] + 0.8 * mat_dirs[mat][d] +
                           spec.noise * rng.next_normal();
                const std::string name =
                    std::string(id) + ".img" + std::to_string(k) + ".f32";
                write_f32(dir / "embeddings" / name, e);
                image_files.push_back(name);
                if (k) image_refs += ' ';
                image_refs += "img/" + std::string(id) + "-" + std::to_string(k) +
                              ".jpg";
                ++report.n_image_vectors;
            }
        } else if (rng.next_bernoulli(0.05)) {
            // Catalogued photo without a computed embedding.
            image_refs = "img/" + std::string(id) + "-0.jpg";
        }

        // Text + its embedding: place + timespan signal. Lengths straddle
        // the short-text filter.
        std::string text;
        bool has_text_vec = false;
        if (rng.next_bernoulli(spec.text_coverage)) {
            const double u = rng.next_double();
            const std::size_t n_words =
                u < 0.1 ? 2 : u < 0.7 ? 10 + rng.next_below(20)
                                      : 30 + rng.next_below(30);
            text = sentence(rng, n_words);
            std::vector<double> e(spec.text_dim);
            for (std::size_t d = 0; d < spec.text_dim; ++d)
                e[d] = place_dirs[place][d] + 0.8 * span_dirs[span][d] +
                       spec.noise * rng.next_normal();
            write_f32(dir / "embeddings" / (std::string(id) + ".txt.f32"), e);
            has_text_vec = true;
            ++report.n_text_vectors;
        }

        rows.push_back({id, museum, text.empty() ? "[NA]" : text,
                        image_refs.empty() ? "[NA]" : image_refs, cells[0],
                        cells[1], cells[2], cells[3]});
        for (std::size_t k = 0; k < image_files.size(); ++k)
            manifest_lines.push_back(std::string(id) + "\timage\tembeddings/" +
                                     image_files[k] + "\t" +
                                     std::to_string(spec.image_dim));
        if (has_text_vec)
            manifest_lines.push_back(std::string(id) + "\ttext\tembeddings/" + id +
                                     ".txt.f32\t" + std::to_string(spec.text_dim));
        ++report.n_records;
    }

    report.csv = dir / "records.csv";
    report.manifest = dir / "manifest.tsv";
    report.grouping = dir / "grouping.tsv";
    csv::write_file(report.csv, rows);
    std::ofstream manifest(report.manifest, std::ios::binary);
    if (!manifest) throw IoError("cannot write " + report.manifest.string());
    for (const auto& line : manifest_lines) manifest << line << '\n';
    if (!manifest.flush()) throw IoError("short write to " + report.manifest.string());

    const auto schema = corpus::TaskSchema::default_schema();
    std::ofstream grouping(report.grouping, std::ios::binary);
    if (!grouping) throw IoError("cannot write " + report.grouping.string());
    for (std::size_t t = 0; t < kSpellings.size(); ++t)
        for (const auto& spellings : kSpellings[t])
            for (const char* spelling : spellings)
                grouping << spelling << '\t' << schema.tasks[t].name << '\t'
                         << spellings[0] << '\n';
    if (!grouping.flush()) throw IoError("short write to " + report.grouping.string());
    return report;
}

}  // namespace mmc::synth
