#include "mmclass/prov.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mmclass/error.hpp"

namespace mmc::prov {

namespace {

// Prefixes emitted with every document, alphabetical. URIs under one of
// these namespaces are compacted to prefixed names where Turtle allows.
const std::array<std::pair<const char*, const char*>, 6> kPrefixes = {{
    {"crm", "http://www.cidoc-crm.org/cidoc-crm/"},
    {"prov", "http://www.w3.org/ns/prov#"},
    {"rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"},
    {"rdfs", "http://www.w3.org/2000/01/rdf-schema#"},
    {"silk", "http://data.silknow.org/ontology/"},
    {"xsd", "http://www.w3.org/2001/XMLSchema#"},
}};

bool valid_local_name(const std::string& local) {
    if (local.empty() || local.back() == '.') return false;
    const auto word = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    };
    if (!word(local[0])) return false;
    for (const char c : local)
        if (!word(c) && c != '.' && c != '-') return false;
    return true;
}

bool absolute_safe_uri(const std::string& uri) {
    const std::size_t colon = uri.find(':');
    if (colon == std::string::npos || colon == 0) return false;
    if (!std::isalpha(static_cast<unsigned char>(uri[0]))) return false;
    for (std::size_t i = 1; i < colon; ++i) {
        const char c = uri[i];
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' &&
            c != '.')
            return false;
    }
    for (const char c : uri) {
        if (static_cast<unsigned char>(c) <= 0x20) return false;
        if (c == '<' || c == '>' || c == '"' || c == '{' || c == '}' || c == '|' ||
            c == '^' || c == '`' || c == '\\')
            return false;
    }
    return true;
}

void require_uri(const std::string& uri, const char* what) {
    if (!absolute_safe_uri(uri))
        throw DataError("prov: " + std::string(what) + " is not an absolute URI: \"" +
                        uri + "\"");
}

void validate_statement(const PredictionStatement& s) {
    if (s.record_id.empty()) throw DataError("prov: statement without a record id");
    if (s.task.empty()) throw DataError("prov: statement without a task");
    if (s.agent.empty()) throw DataError("prov: statement without an agent");
    if (!(s.confidence >= 0.0 && s.confidence <= 1.0))
        throw DataError("prov: confidence " + std::to_string(s.confidence) +
                        " outside [0, 1] for record " + s.record_id);
    if (!valid_timestamp(s.timestamp))
        throw DataError("prov: timestamp \"" + s.timestamp +
                        "\" is not UTC second precision (YYYY-MM-DDTHH:MM:SSZ)");
    require_uri(s.subject, "rdf:subject");
    require_uri(s.predicate, "rdf:predicate");
    require_uri(s.object, "rdf:object");
    for (const auto& u : s.used) require_uri(u, "prov:used input");
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Prefixed name when a declared namespace matches and the remainder is a
// legal local name; otherwise the full <URI> form.
std::string term(const std::string& uri) {
    for (const auto& [prefix, ns] : kPrefixes) {
        const std::size_t len = std::string_view(ns).size();
        if (uri.size() > len && uri.compare(0, len, ns) == 0) {
            const std::string local = uri.substr(len);
            if (valid_local_name(local)) return std::string(prefix) + ":" + local;
        }
    }
    return "<" + uri + ">";
}

std::string quote(const std::string& text) {
    std::string out = "\"";
    for (const char c : text) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

std::vector<std::pair<std::string, std::string>> read_tsv(
    const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::pair<std::string, std::string>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
            line.find('\t', tab + 1) != std::string::npos)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                             what + " rows need exactly two tab-separated columns");
        rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return rows;
}

}  // namespace

FacetMap FacetMap::load(const std::filesystem::path& path) {
    FacetMap map;
    for (auto& [facet, target] : read_tsv(path, "facet map"))
        map.concepts[facet] = target;
    return map;
}

std::string map_facet_to_concept(const std::string& uri, const FacetMap& map) {
    const auto it = map.concepts.find(uri);
    if (it != map.concepts.end()) return it->second;
    if (uri.find("/facet/") != std::string::npos)
        throw DataError("prov: no concept mapping for facet " + uri);
    return uri;  // already a concrete concept
}

PropertyMap PropertyMap::load(const std::filesystem::path& path) {
    PropertyMap map;
    for (auto& [task, property] : read_tsv(path, "property map"))
        map.by_task[task] = property;
    return map;
}

PropertyMap PropertyMap::defaults() {
    PropertyMap map;
    map.by_task = {
        {"place", "http://www.cidoc-crm.org/cidoc-crm/P7_took_place_at"},
        {"timespan", "http://www.cidoc-crm.org/cidoc-crm/P4_has_time-span"},
        {"technique", "http://www.cidoc-crm.org/cidoc-crm/P32_used_general_technique"},
        {"material", "http://www.cidoc-crm.org/cidoc-crm/P126_employed"},
    };
    return map;
}

const std::string& property_for_task(const PropertyMap& map, const std::string& task) {
    const auto it = map.by_task.find(task);
    if (it == map.by_task.end())
        throw DataError("prov: no CIDOC-CRM property for task \"" + task + "\"");
    return it->second;
}

bool valid_timestamp(const std::string& t) {
    if (t.size() != 20 || t[4] != '-' || t[7] != '-' || t[10] != 'T' || t[13] != ':' ||
        t[16] != ':' || t[19] != 'Z')
        return false;
    for (const std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u, 11u, 12u, 14u, 15u,
                                17u, 18u})
        if (!std::isdigit(static_cast<unsigned char>(t[i]))) return false;
    const auto two = [&](std::size_t i) { return (t[i] - '0') * 10 + (t[i + 1] - '0'); };
    const int month = two(5), day = two(8), hour = two(11), minute = two(14),
              second = two(17);
    return month >= 1 && month <= 12 && day >= 1 && day <= 31 && hour < 24 &&
           minute < 60 && second < 60;
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 14695981039346656037ull;
    for (const char c : text) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string statement_uri(const PredictionStatement& s, const EmitOptions& options) {
    return options.node_base + "statement/" +
           hex16(fnv1a64(s.record_id + "|" + s.task + "|" + s.timestamp));
}

std::string activity_uri(const PredictionStatement& s, const EmitOptions& options) {
    return options.node_base + "activity/" +
           hex16(fnv1a64(s.record_id + "|" + s.task + "|" + s.timestamp));
}

std::string agent_uri(const std::string& agent, const EmitOptions& options) {
    return options.node_base + "agent/" + hex16(fnv1a64(agent));
}

std::string to_turtle(const std::vector<PredictionStatement>& statements,
                      const EmitOptions& options) {
    require_uri(options.graph_uri, "graph URI");
    require_uri(options.node_base, "node base URI");
    for (const auto& s : statements) validate_statement(s);

    std::ostringstream out;
    out << "# graph: " << options.graph_uri << "\n\n";
    for (const auto& [prefix, ns] : kPrefixes)
        out << "@prefix " << prefix << ": <" << ns << "> .\n";

    std::vector<std::string> agent_order;  // first-use order, distinct
    for (const auto& s : statements) {
        char confidence[16];
        std::snprintf(confidence, sizeof confidence, "%.4f", s.confidence);

        out << "\n" << term(statement_uri(s, options)) << " a rdf:Statement ;\n";
        out << "  rdf:subject " << term(s.subject) << " ;\n";
        out << "  rdf:predicate " << term(s.predicate) << " ;\n";
        out << "  rdf:object " << term(s.object) << " ;\n";
        out << "  silk:L18_has_confidence_score \"" << confidence
            << "\"^^xsd:decimal ;\n";
        out << "  prov:wasGeneratedBy " << term(activity_uri(s, options)) << " .\n";

        out << "\n" << term(activity_uri(s, options)) << " a prov:Activity ;\n";
        out << "  prov:atTime \"" << s.timestamp << "\"^^xsd:dateTime ;\n";
        if (!s.used.empty()) {
            out << "  prov:used ";
            for (std::size_t i = 0; i < s.used.size(); ++i)
                out << (i ? " , " : "") << term(s.used[i]);
            out << " ;\n";
        }
        out << "  prov:wasAssociatedWith " << term(agent_uri(s.agent, options))
            << " .\n";

        if (std::find(agent_order.begin(), agent_order.end(), s.agent) ==
            agent_order.end())
            agent_order.push_back(s.agent);
    }

    for (const auto& agent : agent_order) {
        out << "\n" << term(agent_uri(agent, options)) << " a prov:SoftwareAgent ;\n";
        out << "  rdfs:label " << quote(agent) << " .\n";
    }
    return out.str();
}

void write_ttl(const std::filesystem::path& path,
               const std::vector<PredictionStatement>& statements,
               const EmitOptions& options) {
    const std::string text = to_turtle(statements, options);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out.flush()) throw IoError("short write to " + path.string());
}

}  // namespace mmc::prov
