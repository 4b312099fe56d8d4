#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

/// PROV-O export of predictions as Turtle. Each prediction becomes a
/// reified rdf:Statement (subject = the object's production node,
/// predicate = the task's CIDOC-CRM property, object = the predicted
/// concept) carrying a confidence score, generated by a prov:Activity with
/// a timestamp, the input resources it used, and the software agent that
/// ran. Output is blank-node free: node URIs are skolemized from record
/// id, task, and timestamp, so equal inputs give byte-identical documents.
namespace mmc::prov {

struct PredictionStatement {
    std::string record_id;  // skolem naming
    std::string task;       // skolem naming
    std::string subject;    // production node of the object
    std::string predicate;  // CIDOC-CRM property URI
    std::string object;     // predicted concept URI
    double confidence = 0.0;
    std::string timestamp;           // UTC, second precision: 2021-05-12T09:30:00Z
    std::string agent;               // algorithm + model identifier
    std::vector<std::string> used;   // input resource URIs
};

/// facet URI -> concept URI. Facet links are navigation aids, too general
/// to store as values, so predictions phrased as facets are rewritten to
/// the concrete concept before export.
struct FacetMap {
    std::map<std::string, std::string> concepts;

    /// TSV rows: facet URI <TAB> concept URI. '#' comments and blank
    /// lines are skipped.
    static FacetMap load(const std::filesystem::path& path);
};

/// Facet links (URIs containing "/facet/") must be in the map; anything
/// else is already a concept and passes through unchanged. Throws
/// DataError naming the facet when it has no mapping.
std::string map_facet_to_concept(const std::string& uri, const FacetMap& map);

/// task name -> CIDOC-CRM property URI used as rdf:predicate.
struct PropertyMap {
    std::map<std::string, std::string> by_task;

    static PropertyMap load(const std::filesystem::path& path);
    /// The four stock tasks: employed material, general technique,
    /// time-span, and production place.
    static PropertyMap defaults();
};

/// Throws DataError when the task has no property.
const std::string& property_for_task(const PropertyMap& map, const std::string& task);

struct EmitOptions {
    /// Named graph the file is destined for; recorded as a header comment
    /// because plain Turtle cannot express graph membership.
    std::string graph_uri = "http://data.silknow.org/predictions";
    /// Prefix under which skolemized statement/activity/agent nodes live.
    std::string node_base = "http://data.silknow.org/";
};

std::uint64_t fnv1a64(std::string_view text);

/// True for UTC second precision, YYYY-MM-DDTHH:MM:SSZ, with sane field
/// ranges.
bool valid_timestamp(const std::string& t);

/// Skolem node URIs; exposed so tests and callers can locate a
/// prediction's subgraph without parsing.
std::string statement_uri(const PredictionStatement& s, const EmitOptions& options = {});
std::string activity_uri(const PredictionStatement& s, const EmitOptions& options = {});
std::string agent_uri(const std::string& agent, const EmitOptions& options = {});

/// Renders the full Turtle document: prefix block, then one statement and
/// one activity block per prediction in input order, then each distinct
/// agent once in first-use order. UTF-8, LF endings. Throws DataError on
/// a malformed statement (confidence outside [0,1], non-absolute or
/// unsafe URI, malformed timestamp, empty record id, task, or agent).
std::string to_turtle(const std::vector<PredictionStatement>& statements,
                      const EmitOptions& options = {});

void write_ttl(const std::filesystem::path& path,
               const std::vector<PredictionStatement>& statements,
               const EmitOptions& options = {});

}  // namespace mmc::prov
