#pragma once

// Persistence for KnowledgeGraph: GraphML 1.0 for interchange and a JSON
// document ("gpfo-graph/1") for full-fidelity storage.
//
// GraphML layout written by to_graphml:
//   <key id="d0" for="node" attr.name="display"    attr.type="string"/>
//   <key id="d1" for="node" attr.name="provenance" attr.type="string"/>
//   <key id="d2" for="edge" attr.name="relation"   attr.type="string"/>
//   <key id="d3" for="edge" attr.name="note"       attr.type="string"/>
//   <key id="d4" for="edge" attr.name="provenance" attr.type="string"/>
// Nodes are emitted in NodeId order with ids n0..n{N-1}; edges in
// (src, dst, relation) order with ids e0..e{M-1}. Provenance values are a
// compact JSON array of [session_id, step_index] pairs.

#include <expat.h>

#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpfo/graph.hpp"

namespace gpfo {

class GraphIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed XML or JSON.
class ParseError : public GraphIoError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : GraphIoError(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Well-formed input that lacks a required element or attribute.
class SchemaError : public GraphIoError {
 public:
  using GraphIoError::GraphIoError;
};

inline constexpr std::string_view kGraphFormatTag = "gpfo-graph/1";
inline constexpr std::string_view kGraphmlNamespace = "http://graphml.graphdrawing.org/xmlns";

// Provenance <-> JSON ------------------------------------------------------

inline nlohmann::json provenance_to_json(const Provenance& p) {
  auto arr = nlohmann::json::array();
  for (const auto& s : p) arr.push_back(nlohmann::json::array({s.session_id, s.step_index}));
  return arr;
}

inline Provenance provenance_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw SchemaError("provenance must be an array");
  Provenance p;
  for (const auto& item : j) {
    if (item.is_array() && item.size() == 2 && item[0].is_string() && item[1].is_number_unsigned()) {
      p.insert(StepRef{item[0].get<std::string>(), item[1].get<std::uint32_t>()});
    } else if (item.is_object() && item.contains("session") && item.contains("step")) {
      p.insert(StepRef{item.at("session").get<std::string>(), item.at("step").get<std::uint32_t>()});
    } else {
      throw SchemaError("malformed provenance entry: " + item.dump());
    }
  }
  return p;
}

// JSON document ------------------------------------------------------------

inline nlohmann::json to_json(const KnowledgeGraph& g) {
  nlohmann::json doc;
  doc["format"] = kGraphFormatTag;
  auto nodes = nlohmann::json::array();
  for (const auto& [id, n] : g.nodes()) {
    nodes.push_back({{"id", id.key}, {"display", n.display}, {"provenance", provenance_to_json(n.provenance)}});
  }
  auto edges = nlohmann::json::array();
  for (const auto& [k, e] : g.edges()) {
    nlohmann::json je{{"source", e.src.key},
                      {"target", e.dst.key},
                      {"relation", e.relation},
                      {"provenance", provenance_to_json(e.provenance)}};
    if (!e.note.empty()) je["note"] = e.note;
    if (e.self_loop()) je["self_loop"] = true;
    edges.push_back(std::move(je));
  }
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edges);
  return doc;
}

inline KnowledgeGraph graph_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", std::string{}) != kGraphFormatTag)
    throw SchemaError("expected a \"format\": \"gpfo-graph/1\" document");
  KnowledgeGraph g;
  try {
    for (const auto& n : doc.at("nodes")) {
      g.add_node(NodeId{n.at("id").get<std::string>()}, n.at("display").get<std::string>(),
                 provenance_from_json(n.value("provenance", nlohmann::json::array())));
    }
    for (const auto& e : doc.at("edges")) {
      NodeId src{e.at("source").get<std::string>()};
      NodeId dst{e.at("target").get<std::string>()};
      if (!g.find_node(src) || !g.find_node(dst))
        throw SchemaError("edge references an absent node: " + src.key + " -> " + dst.key);
      g.add_edge(src, dst, e.at("relation").get<std::string>(), e.value("note", std::string{}),
                 provenance_from_json(e.value("provenance", nlohmann::json::array())));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaError(std::string("graph document: ") + ex.what());
  }
  return g;
}

inline KnowledgeGraph graph_from_json_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError(ex.what(), 1, ex.byte);
  }
  return graph_from_json(doc);
}

// GraphML writer -----------------------------------------------------------

namespace detail {

/// Escapes XML text. Characters XML 1.0 cannot carry are replaced by U+FFFD.
inline std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    auto c = static_cast<unsigned char>(ch);
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      case '\r': out += "&#13;"; break;
      case '\t': out += "&#9;"; break;
      case '\n': out += "&#10;"; break;
      default:
        if (c < 0x20) out += "\xEF\xBF\xBD";
        else out += ch;
    }
  }
  return out;
}

}  // namespace detail

inline std::string to_graphml(const KnowledgeGraph& g) {
  using detail::xml_escape;
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\"\n";
  out += "         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\"\n";
  out += "         xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns "
         "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n";
  out += "  <key id=\"d0\" for=\"node\" attr.name=\"display\" attr.type=\"string\"/>\n";
  out += "  <key id=\"d1\" for=\"node\" attr.name=\"provenance\" attr.type=\"string\"/>\n";
  out += "  <key id=\"d2\" for=\"edge\" attr.name=\"relation\" attr.type=\"string\"/>\n";
  out += "  <key id=\"d3\" for=\"edge\" attr.name=\"note\" attr.type=\"string\"/>\n";
  out += "  <key id=\"d4\" for=\"edge\" attr.name=\"provenance\" attr.type=\"string\"/>\n";
  out += "  <graph id=\"G\" edgedefault=\"directed\">\n";
  std::map<NodeId, std::string> xml_ids;
  std::size_t i = 0;
  for (const auto& [id, n] : g.nodes()) {
    auto xid = "n" + std::to_string(i++);
    xml_ids.emplace(id, xid);
    out += "    <node id=\"" + xid + "\">\n";
    out += "      <data key=\"d0\">" + xml_escape(n.display) + "</data>\n";
    out += "      <data key=\"d1\">" + xml_escape(provenance_to_json(n.provenance).dump()) + "</data>\n";
    out += "    </node>\n";
  }
  i = 0;
  for (const auto& [k, e] : g.edges()) {
    out += "    <edge id=\"e" + std::to_string(i++) + "\" source=\"" + xml_ids.at(e.src) +
           "\" target=\"" + xml_ids.at(e.dst) + "\">\n";
    out += "      <data key=\"d2\">" + xml_escape(e.relation) + "</data>\n";
    if (!e.note.empty()) out += "      <data key=\"d3\">" + xml_escape(e.note) + "</data>\n";
    out += "      <data key=\"d4\">" + xml_escape(provenance_to_json(e.provenance).dump()) + "</data>\n";
    out += "    </edge>\n";
  }
  out += "  </graph>\n";
  out += "</graphml>\n";
  return out;
}

// Minimal XML tree built on expat -------------------------------------------

namespace xml {

struct Element {
  std::string name;  // local name, namespace stripped
  std::string ns;
  std::map<std::string, std::string> attributes;
  std::vector<std::unique_ptr<Element>> children;
  std::string text;
  std::size_t line = 0;
  std::size_t column = 0;

  std::vector<const Element*> children_named(std::string_view n) const {
    std::vector<const Element*> out;
    for (const auto& c : children)
      if (c->name == n) out.push_back(c.get());
    return out;
  }

  const std::string* attribute(const std::string& n) const {
    auto it = attributes.find(n);
    return it == attributes.end() ? nullptr : &it->second;
  }
};

namespace detail {

struct ParseState {
  XML_Parser parser = nullptr;
  std::unique_ptr<Element> root;
  std::vector<Element*> stack;
};

inline void split_name(const char* qualified, std::string& ns, std::string& local) {
  std::string_view q(qualified);
  auto sep = q.rfind('\x1F');
  if (sep == std::string_view::npos) {
    ns.clear();
    local = std::string(q);
  } else {
    ns = std::string(q.substr(0, sep));
    local = std::string(q.substr(sep + 1));
  }
}

inline void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto* st = static_cast<ParseState*>(user);
  auto el = std::make_unique<Element>();
  split_name(name, el->ns, el->name);
  el->line = XML_GetCurrentLineNumber(st->parser);
  el->column = XML_GetCurrentColumnNumber(st->parser) + 1;
  for (std::size_t i = 0; attrs[i]; i += 2) {
    std::string ns, local;
    split_name(attrs[i], ns, local);
    // keep the xsi prefix visible so validators can tell it apart
    if (!ns.empty() && ns != std::string(kGraphmlNamespace)) local = ns + "|" + local;
    el->attributes[local] = attrs[i + 1];
  }
  auto* raw = el.get();
  if (st->stack.empty()) {
    st->root = std::move(el);
  } else {
    st->stack.back()->children.push_back(std::move(el));
  }
  st->stack.push_back(raw);
}

inline void XMLCALL on_end(void* user, const XML_Char*) {
  static_cast<ParseState*>(user)->stack.pop_back();
}

inline void XMLCALL on_text(void* user, const XML_Char* s, int len) {
  auto* st = static_cast<ParseState*>(user);
  if (!st->stack.empty()) st->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

}  // namespace detail

/// Parses a whole document; throws ParseError with the expat position.
inline std::unique_ptr<Element> parse(std::string_view doc) {
  detail::ParseState st;
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreateNS("UTF-8", '\x1F'), &XML_ParserFree);
  st.parser = parser.get();
  XML_SetUserData(st.parser, &st);
  XML_SetElementHandler(st.parser, detail::on_start, detail::on_end);
  XML_SetCharacterDataHandler(st.parser, detail::on_text);
  if (XML_Parse(st.parser, doc.data(), static_cast<int>(doc.size()), XML_TRUE) == XML_STATUS_ERROR) {
    throw ParseError(XML_ErrorString(XML_GetErrorCode(st.parser)),
                     XML_GetCurrentLineNumber(st.parser), XML_GetCurrentColumnNumber(st.parser) + 1);
  }
  if (!st.root) throw ParseError("empty document", 1, 1);
  return std::move(st.root);
}

}  // namespace xml

// GraphML reader -----------------------------------------------------------

inline KnowledgeGraph from_graphml(std::string_view doc) {
  auto root = xml::parse(doc);
  if (root->name != "graphml") throw SchemaError("root element is <" + root->name + ">, expected <graphml>");

  struct KeyDecl {
    std::string domain;
    std::string name;
  };
  std::map<std::string, KeyDecl> keys;
  for (const auto* k : root->children_named("key")) {
    const auto* id = k->attribute("id");
    if (!id) throw SchemaError("<key> without id at line " + std::to_string(k->line));
    keys[*id] = KeyDecl{k->attribute("for") ? *k->attribute("for") : "all",
                        k->attribute("attr.name") ? *k->attribute("attr.name") : *id};
  }
  auto graphs = root->children_named("graph");
  if (graphs.empty()) throw SchemaError("no <graph> element");
  const auto& graph = *graphs.front();

  auto data_of = [&](const xml::Element& el, std::string_view domain) {
    std::map<std::string, std::string> values;
    for (const auto* d : el.children_named("data")) {
      const auto* key = d->attribute("key");
      if (!key) throw SchemaError("<data> without key at line " + std::to_string(d->line));
      auto it = keys.find(*key);
      if (it == keys.end()) throw SchemaError("<data> references undeclared key '" + *key + "'");
      if (it->second.domain != domain && it->second.domain != "all")
        throw SchemaError("key '" + *key + "' is declared for " + it->second.domain);
      values[it->second.name] = d->text;
    }
    return values;
  };
  auto provenance_of = [](const std::map<std::string, std::string>& values) {
    auto it = values.find("provenance");
    if (it == values.end() || it->second.empty()) return Provenance{};
    try {
      return provenance_from_json(nlohmann::json::parse(it->second));
    } catch (const nlohmann::json::exception& ex) {
      throw SchemaError(std::string("provenance value: ") + ex.what());
    }
  };

  KnowledgeGraph g;
  std::map<std::string, NodeId> by_xml_id;
  for (const auto* n : graph.children_named("node")) {
    const auto* xid = n->attribute("id");
    if (!xid) throw SchemaError("<node> without id at line " + std::to_string(n->line));
    auto values = data_of(*n, "node");
    auto display = values.find("display");
    if (display == values.end())
      throw SchemaError("node '" + *xid + "' lacks the required display attribute");
    auto id = NodeId::from_label(display->second);
    if (!by_xml_id.emplace(*xid, id).second) throw SchemaError("duplicate node id '" + *xid + "'");
    g.add_node(id, display->second, provenance_of(values));
  }
  for (const auto* e : graph.children_named("edge")) {
    const auto* src = e->attribute("source");
    const auto* dst = e->attribute("target");
    if (!src || !dst) throw SchemaError("<edge> without source/target at line " + std::to_string(e->line));
    auto s = by_xml_id.find(*src);
    auto d = by_xml_id.find(*dst);
    if (s == by_xml_id.end() || d == by_xml_id.end())
      throw SchemaError("edge at line " + std::to_string(e->line) + " references an absent node");
    auto values = data_of(*e, "edge");
    auto rel = values.find("relation");
    if (rel == values.end() || text::canonical_relation(rel->second).empty())
      throw SchemaError("edge at line " + std::to_string(e->line) + " lacks the required relation attribute");
    auto note = values.count("note") ? values.at("note") : std::string{};
    g.add_edge(s->second, d->second, rel->second, note, provenance_of(values));
  }
  return g;
}

/// Structural GraphML 1.0 checks: namespace, key declarations and their
/// domains and types, unique NMTOKEN ids, edge endpoints and data key
/// references. Returns the list of violations (empty when valid).
inline std::vector<std::string> validate_graphml(std::string_view doc) {
  std::vector<std::string> problems;
  std::unique_ptr<xml::Element> root;
  try {
    root = xml::parse(doc);
  } catch (const ParseError& ex) {
    return {ex.what()};
  }
  auto is_nmtoken = [](const std::string& s) {
    if (s.empty()) return false;
    for (unsigned char c : s) {
      if (c >= 0x80) continue;
      if (!(std::isalnum(c) || c == '.' || c == '-' || c == '_' || c == ':')) return false;
    }
    return true;
  };
  if (root->name != "graphml") problems.push_back("root element must be graphml");
  if (root->ns != kGraphmlNamespace) problems.push_back("root element is not in the GraphML namespace");
  static const std::set<std::string> domains{"graph", "node", "edge", "hyperedge", "port", "endpoint", "all"};
  static const std::set<std::string> types{"boolean", "int", "long", "float", "double", "string"};
  static const std::set<std::string> top_level{"desc", "key", "data", "graph"};
  std::map<std::string, std::string> key_domain;
  bool seen_graph = false;
  for (const auto& child : root->children) {
    if (child->ns != kGraphmlNamespace) problems.push_back("element <" + child->name + "> outside the GraphML namespace");
    if (!top_level.count(child->name)) problems.push_back("unexpected <" + child->name + "> under <graphml>");
    if (child->name == "graph") seen_graph = true;
    if (child->name == "key") {
      if (seen_graph) problems.push_back("<key> must precede <graph>");
      const auto* id = child->attribute("id");
      if (!id || !is_nmtoken(*id)) {
        problems.push_back("<key> id missing or not an NMTOKEN");
        continue;
      }
      std::string domain = child->attribute("for") ? *child->attribute("for") : "all";
      if (!domains.count(domain)) problems.push_back("key '" + *id + "' has invalid for='" + domain + "'");
      if (const auto* t = child->attribute("attr.type"); t && !types.count(*t))
        problems.push_back("key '" + *id + "' has invalid attr.type '" + *t + "'");
      if (!key_domain.emplace(*id, domain).second) problems.push_back("duplicate key id '" + *id + "'");
    }
  }
  auto graphs = root->children_named("graph");
  if (graphs.empty()) problems.push_back("no <graph> element");
  for (const auto* graph : graphs) {
    const auto* ed = graph->attribute("edgedefault");
    if (!ed || (*ed != "directed" && *ed != "undirected"))
      problems.push_back("<graph> edgedefault must be directed or undirected");
    std::set<std::string> node_ids, edge_ids;
    auto check_data = [&](const xml::Element& el, const std::string& domain) {
      for (const auto* d : el.children_named("data")) {
        const auto* key = d->attribute("key");
        if (!key) {
          problems.push_back("<data> without key");
          continue;
        }
        auto it = key_domain.find(*key);
        if (it == key_domain.end()) problems.push_back("<data> references undeclared key '" + *key + "'");
        else if (it->second != domain && it->second != "all")
          problems.push_back("<data key='" + *key + "'> used on a " + domain);
      }
    };
    bool seen_edge = false;
    for (const auto& child : graph->children) {
      if (child->name == "node") {
        if (seen_edge) problems.push_back("<node> after <edge>");  // allowed by the XSD choice, kept for ordering
        const auto* id = child->attribute("id");
        if (!id || !is_nmtoken(*id)) problems.push_back("<node> id missing or not an NMTOKEN");
        else if (!node_ids.insert(*id).second) problems.push_back("duplicate node id '" + *id + "'");
        check_data(*child, "node");
      } else if (child->name == "edge") {
        seen_edge = true;
        if (const auto* id = child->attribute("id"); id && !edge_ids.insert(*id).second)
          problems.push_back("duplicate edge id '" + *id + "'");
        check_data(*child, "edge");
      } else if (child->name != "data" && child->name != "desc" && child->name != "hyperedge") {
        problems.push_back("unexpected <" + child->name + "> under <graph>");
      }
    }
    for (const auto* e : graph->children_named("edge")) {
      const auto* s = e->attribute("source");
      const auto* t = e->attribute("target");
      if (!s || !node_ids.count(*s)) problems.push_back("edge source does not name a node");
      if (!t || !node_ids.count(*t)) problems.push_back("edge target does not name a node");
    }
  }
  return problems;
}

}  // namespace gpfo
