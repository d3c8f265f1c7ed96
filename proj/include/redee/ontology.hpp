#pragma once
// Event ontology: event types with ordered role lists, the entity type
// vocabulary, and the relation schema derived from role pre-order. All types
// here are immutable after construction and safe to share across threads.

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "redee/errors.hpp"

namespace redee {

struct EventTypeDef {
  std::string name;
  std::vector<std::string> roles;  // pre-order; defines relation direction and decoding order
  std::map<std::string, std::vector<std::string>> role_entity_types;
};

struct EventOntology {
  int schema_version = 1;
  std::vector<std::string> entity_types;
  std::vector<EventTypeDef> event_types;

  const EventTypeDef* find_event_type(const std::string& name) const {
    for (const auto& et : event_types)
      if (et.name == name) return &et;
    return nullptr;
  }

  int event_type_index(const std::string& name) const {
    for (std::size_t i = 0; i < event_types.size(); ++i)
      if (event_types[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

// Violations are data, not failures: empty list iff the ontology is well
// formed. Each violation names the offending event type or role.
inline std::vector<std::string> validate_ontology(const EventOntology& onto) {
  std::vector<std::string> out;
  std::set<std::string> seen_types;
  for (const auto& et : onto.event_types) {
    if (!seen_types.insert(et.name).second)
      out.push_back("duplicate event type name: " + et.name);
    if (et.roles.empty()) out.push_back("event type " + et.name + " has no roles");
    std::set<std::string> seen_roles;
    for (const auto& r : et.roles)
      if (!seen_roles.insert(r).second)
        out.push_back("event type " + et.name + " has duplicate role: " + r);
    for (const auto& [role, types] : et.role_entity_types) {
      if (seen_roles.find(role) == seen_roles.end())
        out.push_back("event type " + et.name + " constrains unknown role: " + role);
      for (const auto& ty : types)
        if (std::find(onto.entity_types.begin(), onto.entity_types.end(), ty) == onto.entity_types.end())
          out.push_back("event type " + et.name + " role " + role + " allows unknown entity type: " + ty);
    }
  }
  return out;
}

struct RelationSchema {
  std::vector<std::string> relation_types;     // "<HeadRole>2<TailRole>", encounter order
  std::map<std::string, int> head_cluster;     // relation type -> cluster in [0, H)
  std::vector<std::string> cluster_head_roles; // cluster -> head role name
  std::map<std::string, std::string> head_role_of;  // relation type -> head role

  int num_clusters() const { return static_cast<int>(cluster_head_roles.size()); }

  int relation_index(const std::string& name) const {
    for (std::size_t i = 0; i < relation_types.size(); ++i)
      if (relation_types[i] == name) return static_cast<int>(i);
    return -1;
  }
};

// For each event type with roles (r1..rn) in pre-order, one relation type
// "ri2rj" per i<j. Names shared across event types collapse to one entry;
// clusters group relation types by head role.
inline RelationSchema derive_relation_schema(const EventOntology& onto) {
  RelationSchema schema;
  std::set<std::string> seen;
  std::map<std::string, int> cluster_of_head;
  for (const auto& et : onto.event_types) {
    const auto& roles = et.roles;
    for (std::size_t i = 0; i < roles.size(); ++i)
      for (std::size_t j = i + 1; j < roles.size(); ++j) {
        std::string name = roles[i] + "2" + roles[j];
        if (!seen.insert(name).second) continue;
        schema.relation_types.push_back(name);
        schema.head_role_of[name] = roles[i];
        auto it = cluster_of_head.find(roles[i]);
        if (it == cluster_of_head.end()) {
          it = cluster_of_head.emplace(roles[i], static_cast<int>(schema.cluster_head_roles.size())).first;
          schema.cluster_head_roles.push_back(roles[i]);
        }
        schema.head_cluster[name] = it->second;
      }
  }
  return schema;
}

inline nlohmann::json ontology_to_json(const EventOntology& onto) {
  nlohmann::json j;
  j["schema_version"] = onto.schema_version;
  j["entity_types"] = onto.entity_types;
  j["event_types"] = nlohmann::json::array();
  for (const auto& et : onto.event_types) {
    nlohmann::json e;
    e["name"] = et.name;
    e["roles"] = et.roles;
    e["role_entity_types"] = et.role_entity_types;
    j["event_types"].push_back(std::move(e));
  }
  return j;
}

inline EventOntology ontology_from_json(const nlohmann::json& j) {
  EventOntology onto;
  try {
    onto.schema_version = j.at("schema_version").get<int>();
    onto.entity_types = j.at("entity_types").get<std::vector<std::string>>();
    for (const auto& e : j.at("event_types")) {
      EventTypeDef et;
      et.name = e.at("name").get<std::string>();
      et.roles = e.at("roles").get<std::vector<std::string>>();
      if (e.contains("role_entity_types"))
        et.role_entity_types = e.at("role_entity_types").get<std::map<std::string, std::vector<std::string>>>();
      onto.event_types.push_back(std::move(et));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("ontology: ") + ex.what());
  }
  return onto;
}

inline EventOntology load_ontology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("ontology: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path + ": " + ex.what());
  }
  return ontology_from_json(j);
}

inline void save_ontology(const EventOntology& onto, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("ontology: cannot open " + path + " for writing");
  out << ontology_to_json(onto).dump(2) << '\n';
}

}  // namespace redee
