#pragma once
// Dataset ingestion and serialization. One JSON document per line:
//   {"doc_id", "sentences": [[token,...],...],
//    "entities": [{"id","type","mentions":[{"sent","start","end"}]}],
//    "records": [{"event_type","args":{role: entity_id}}]}
// Mention surfaces are derived from token spans at load time.

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "redee/document.hpp"
#include "redee/errors.hpp"
#include "redee/ontology.hpp"

namespace redee {

struct AnnotatedDoc {
  Document doc;
  std::vector<Entity> entities;
  std::vector<EventRecord> records;

  const Entity* find_entity(const std::string& id) const {
    for (const auto& e : entities)
      if (e.id == id) return &e;
    return nullptr;
  }
};

struct Dataset {
  std::string split;
  std::vector<AnnotatedDoc> docs;
  const EventOntology* ontology = nullptr;

  std::size_t size() const { return docs.size(); }
};

namespace detail {

inline AnnotatedDoc parse_annotated_doc(const nlohmann::json& j, const EventOntology& onto,
                                        const DocumentLimits& limits, const std::string& joiner,
                                        const std::string& where) {
  AnnotatedDoc ad;
  ad.doc.doc_id = j.at("doc_id").get<std::string>();
  ad.doc.sentences = j.at("sentences").get<std::vector<std::vector<std::string>>>();
  apply_limits(ad.doc, limits);

  std::set<std::string> entity_ids;
  std::set<std::string> kept_ids;
  if (j.contains("entities")) {
    for (const auto& je : j.at("entities")) {
      Entity e;
      e.id = je.at("id").get<std::string>();
      e.type = je.at("type").get<std::string>();
      if (!entity_ids.insert(e.id).second)
        throw DataError(where + ": duplicate entity id '" + e.id + "' in doc " + ad.doc.doc_id);
      if (std::find(onto.entity_types.begin(), onto.entity_types.end(), e.type) == onto.entity_types.end())
        throw DataError(where + ": unknown entity type '" + e.type + "' in doc " + ad.doc.doc_id);
      for (const auto& jm : je.at("mentions")) {
        EntityMention m;
        m.sentence = jm.at("sent").get<int>();
        m.begin = jm.at("start").get<int>();
        m.end = jm.at("end").get<int>();
        if (m.sentence < 0 || m.begin < 0 || m.begin >= m.end)
          throw DataError(where + ": malformed mention span in doc " + ad.doc.doc_id);
        if (m.sentence >= static_cast<int>(ad.doc.sentences.size()) ||
            m.end > static_cast<int>(ad.doc.sentences[static_cast<std::size_t>(m.sentence)].size())) {
          if (ad.doc.truncated) continue;  // span fell off the truncated tail
          throw DataError(where + ": mention out of range in doc " + ad.doc.doc_id);
        }
        m.surface = normalize_surface(
            span_surface(ad.doc.sentences[static_cast<std::size_t>(m.sentence)], m.begin, m.end, joiner));
        e.mentions.push_back(std::move(m));
      }
      if (e.mentions.empty()) {
        if (ad.doc.truncated) continue;  // entity truncated away entirely
        throw DataError(where + ": entity '" + e.id + "' has no mentions in doc " + ad.doc.doc_id);
      }
      kept_ids.insert(e.id);
      ad.entities.push_back(std::move(e));
    }
  }
  if (j.contains("records")) {
    for (const auto& jr : j.at("records")) {
      EventRecord r;
      r.event_type = jr.at("event_type").get<std::string>();
      const EventTypeDef* et = onto.find_event_type(r.event_type);
      if (!et) throw DataError(where + ": unknown event type '" + r.event_type + "' in doc " + ad.doc.doc_id);
      for (const auto& [role, id] : jr.at("args").items()) {
        if (std::find(et->roles.begin(), et->roles.end(), role) == et->roles.end())
          throw DataError(where + ": role '" + role + "' does not belong to event type " + r.event_type +
                          " in doc " + ad.doc.doc_id);
        const std::string ident = id.get<std::string>();
        if (!entity_ids.count(ident))
          throw DataError(where + ": record cites unknown entity '" + ident + "' in doc " + ad.doc.doc_id);
        if (!kept_ids.count(ident)) continue;  // argument lost to truncation
        r.args[role] = ident;
      }
      ad.records.push_back(std::move(r));
    }
  }
  return ad;
}

}  // namespace detail

inline Dataset ingest_dataset(const std::string& path, const EventOntology& onto,
                              const DocumentLimits& limits = {}, const std::string& joiner = "",
                              const std::string& split = "") {
  std::ifstream in(path);
  if (!in) throw ParseError("dataset: cannot open " + path);
  Dataset ds;
  ds.split = split;
  ds.ontology = &onto;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(where + ": " + ex.what());
    }
    try {
      ds.docs.push_back(detail::parse_annotated_doc(j, onto, limits, joiner, where));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(where + ": " + ex.what());
    }
  }
  return ds;
}

inline nlohmann::json annotated_doc_to_json(const AnnotatedDoc& ad) {
  nlohmann::json j;
  j["doc_id"] = ad.doc.doc_id;
  j["sentences"] = ad.doc.sentences;
  j["entities"] = nlohmann::json::array();
  for (const auto& e : ad.entities) {
    nlohmann::json je;
    je["id"] = e.id;
    je["type"] = e.type;
    je["mentions"] = nlohmann::json::array();
    for (const auto& m : e.mentions)
      je["mentions"].push_back({{"sent", m.sentence}, {"start", m.begin}, {"end", m.end}});
    j["entities"].push_back(std::move(je));
  }
  j["records"] = nlohmann::json::array();
  for (const auto& r : ad.records) {
    nlohmann::json jr;
    jr["event_type"] = r.event_type;
    jr["args"] = r.args;
    j["records"].push_back(std::move(jr));
  }
  return j;
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("dataset: cannot open " + path + " for writing");
  for (const auto& ad : ds.docs) out << annotated_doc_to_json(ad).dump() << '\n';
}

}  // namespace redee
