#pragma once
// Gold supervision derived from event records: BIOSE tag sequences, relation
// triples over filled role pairs, per-type trigger flags, and the role-ordered
// path trees the record decoder trains against.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "redee/dataset.hpp"
#include "redee/document.hpp"
#include "redee/ontology.hpp"

namespace redee {

// Tag layout: O = 0, then B/I/E/S per entity type in ontology order.
struct TagVocab {
  std::vector<std::string> names;
  std::map<std::string, int> type_index;

  explicit TagVocab(const EventOntology& onto) {
    names.push_back("O");
    for (const auto& ty : onto.entity_types) {
      type_index[ty] = static_cast<int>(type_index.size());
      names.push_back("B-" + ty);
      names.push_back("I-" + ty);
      names.push_back("E-" + ty);
      names.push_back("S-" + ty);
    }
  }

  int size() const { return static_cast<int>(names.size()); }
  int o() const { return 0; }
  int b(const std::string& ty) const { return 1 + 4 * type_index.at(ty); }
  int i(const std::string& ty) const { return 2 + 4 * type_index.at(ty); }
  int e(const std::string& ty) const { return 3 + 4 * type_index.at(ty); }
  int s(const std::string& ty) const { return 4 + 4 * type_index.at(ty); }
};

struct TaggedMention {
  EntityMention mention;
  std::string entity_id;
  std::string type;

  bool operator<(const TaggedMention& o) const {
    if (!(mention == o.mention)) return mention < o.mention;
    return std::tie(entity_id, type) < std::tie(o.entity_id, o.type);
  }
  bool operator==(const TaggedMention& o) const {
    return mention == o.mention && entity_id == o.entity_id && type == o.type;
  }
};

// Flattens entity mentions to document order and resolves overlaps within a
// sentence: longer span wins, ties to the earlier start.
inline std::vector<TaggedMention> resolve_mentions(const std::vector<Entity>& entities) {
  std::vector<TaggedMention> all;
  for (const auto& e : entities)
    for (const auto& m : e.mentions) all.push_back({m, e.id, e.type});
  std::stable_sort(all.begin(), all.end(), [](const TaggedMention& a, const TaggedMention& b) {
    int la = a.mention.end - a.mention.begin, lb = b.mention.end - b.mention.begin;
    if (a.mention.sentence != b.mention.sentence) return a.mention.sentence < b.mention.sentence;
    if (la != lb) return la > lb;
    return a.mention.begin < b.mention.begin;
  });
  std::vector<TaggedMention> kept;
  for (const auto& tm : all) {
    bool clash = false;
    for (const auto& k : kept) {
      if (k.mention.sentence != tm.mention.sentence) continue;
      if (tm.mention.begin < k.mention.end && k.mention.begin < tm.mention.end) {
        clash = true;
        break;
      }
    }
    if (!clash) kept.push_back(tm);
  }
  std::sort(kept.begin(), kept.end(), [](const TaggedMention& a, const TaggedMention& b) {
    return std::tie(a.mention.sentence, a.mention.begin) < std::tie(b.mention.sentence, b.mention.begin);
  });
  return kept;
}

inline std::vector<std::vector<int>> derive_bioes_tags(const Document& doc,
                                                       const std::vector<TaggedMention>& mentions,
                                                       const TagVocab& vocab) {
  std::vector<std::vector<int>> tags;
  tags.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) tags.emplace_back(s.size(), vocab.o());
  for (const auto& tm : mentions) {
    auto& row = tags[static_cast<std::size_t>(tm.mention.sentence)];
    const int len = tm.mention.end - tm.mention.begin;
    if (len == 1) {
      row[static_cast<std::size_t>(tm.mention.begin)] = vocab.s(tm.type);
    } else {
      row[static_cast<std::size_t>(tm.mention.begin)] = vocab.b(tm.type);
      for (int i = tm.mention.begin + 1; i < tm.mention.end - 1; ++i)
        row[static_cast<std::size_t>(i)] = vocab.i(tm.type);
      row[static_cast<std::size_t>(tm.mention.end - 1)] = vocab.e(tm.type);
    }
  }
  return tags;
}

struct DecodedSpan {
  int sentence = 0;
  int begin = 0;
  int end = 0;
  std::string type;
};

// Strict decode: S, or B I* E of one type. Malformed runs are dropped.
inline std::vector<DecodedSpan> decode_bioes(const std::vector<std::vector<int>>& tags, const TagVocab& vocab) {
  std::vector<DecodedSpan> out;
  auto kind = [](int tag) { return tag == 0 ? 'O' : "BIES"[(tag - 1) % 4]; };
  auto type_of = [&](int tag) { return (tag - 1) / 4; };
  std::vector<std::string> type_names;
  for (const auto& [ty, idx] : vocab.type_index) {
    if (static_cast<int>(type_names.size()) <= idx) type_names.resize(static_cast<std::size_t>(idx) + 1);
    type_names[static_cast<std::size_t>(idx)] = ty;
  }
  for (std::size_t s = 0; s < tags.size(); ++s) {
    const auto& row = tags[s];
    std::size_t i = 0;
    while (i < row.size()) {
      int tag = row[i];
      if (kind(tag) == 'S') {
        out.push_back({static_cast<int>(s), static_cast<int>(i), static_cast<int>(i) + 1,
                       type_names[static_cast<std::size_t>(type_of(tag))]});
        ++i;
      } else if (kind(tag) == 'B') {
        const int ty = type_of(tag);
        std::size_t j = i + 1;
        while (j < row.size() && kind(row[j]) == 'I' && type_of(row[j]) == ty) ++j;
        if (j < row.size() && kind(row[j]) == 'E' && type_of(row[j]) == ty) {
          out.push_back({static_cast<int>(s), static_cast<int>(i), static_cast<int>(j) + 1,
                         type_names[static_cast<std::size_t>(ty)]});
          i = j + 1;
        } else {
          ++i;
        }
      } else {
        ++i;
      }
    }
  }
  return out;
}

// One triple per filled role pair (ri, rj), i<j in pre-order; duplicates
// across records collapse; head may equal tail.
inline std::set<RelationTriple> derive_gold_relations(const std::vector<EventRecord>& records,
                                                      const EventOntology& onto, const RelationSchema& schema) {
  std::set<RelationTriple> out;
  for (const auto& r : records) {
    const EventTypeDef* et = onto.find_event_type(r.event_type);
    if (!et) throw DataError("derive_gold_relations: unknown event type " + r.event_type);
    const auto& roles = et->roles;
    for (std::size_t i = 0; i < roles.size(); ++i) {
      auto hi = r.args.find(roles[i]);
      if (hi == r.args.end()) continue;
      for (std::size_t j = i + 1; j < roles.size(); ++j) {
        auto tj = r.args.find(roles[j]);
        if (tj == r.args.end()) continue;
        std::string rel = roles[i] + "2" + roles[j];
        if (schema.relation_index(rel) < 0)
          throw DataError("derive_gold_relations: relation not in schema: " + rel);
        out.insert({hi->second, tj->second, rel});
      }
    }
  }
  return out;
}

// Single-label view for the pair classifier: the same entity pair can carry
// several relations across records; the lexicographically smallest name wins.
inline std::map<std::pair<std::string, std::string>, std::string> single_label_pairs(
    const std::set<RelationTriple>& triples) {
  std::map<std::pair<std::string, std::string>, std::string> out;
  for (const auto& t : triples) {
    auto key = std::make_pair(t.head, t.tail);
    auto it = out.find(key);
    if (it == out.end() || t.relation < it->second) out[key] = t.relation;
  }
  return out;
}

// Role-ordered prefix tree over a single event type's records. Edge label ""
// is the NONE step for a missing role; leaves biject with distinct records.
struct EdagTree {
  struct Node {
    std::map<std::string, int> children;  // edge label -> node index
  };
  std::vector<Node> nodes{Node{}};

  int child(int node, const std::string& edge) {
    auto it = nodes[static_cast<std::size_t>(node)].children.find(edge);
    if (it != nodes[static_cast<std::size_t>(node)].children.end()) return it->second;
    nodes.push_back(Node{});  // may reallocate; re-index below
    int idx = static_cast<int>(nodes.size()) - 1;
    nodes[static_cast<std::size_t>(node)].children.emplace(edge, idx);
    return idx;
  }

  int leaf_count() const {
    int n = 0;
    for (const auto& nd : nodes)
      if (nd.children.empty()) ++n;
    return n;
  }

  // Root-to-leaf edge label sequences, in deterministic (map) order.
  std::vector<std::vector<std::string>> paths() const {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> cur;
    walk(0, cur, out);
    return out;
  }

 private:
  void walk(int node, std::vector<std::string>& cur, std::vector<std::vector<std::string>>& out) const {
    const auto& c = nodes[static_cast<std::size_t>(node)].children;
    if (c.empty()) {
      out.push_back(cur);
      return;
    }
    for (const auto& [edge, next] : c) {
      cur.push_back(edge);
      walk(next, cur, out);
      cur.pop_back();
    }
  }
};

inline std::map<std::string, EdagTree> derive_edag_paths(const std::vector<EventRecord>& records,
                                                         const EventOntology& onto) {
  std::map<std::string, EdagTree> out;
  std::set<EventRecord> distinct(records.begin(), records.end());
  for (const auto& r : distinct) {
    const EventTypeDef* et = onto.find_event_type(r.event_type);
    if (!et) throw DataError("derive_edag_paths: unknown event type " + r.event_type);
    EdagTree& tree = out[r.event_type];
    int node = 0;
    for (const auto& role : et->roles) {
      auto it = r.args.find(role);
      node = tree.child(node, it == r.args.end() ? std::string() : it->second);
    }
  }
  return out;
}

inline std::vector<EventRecord> records_from_paths(const EdagTree& tree, const std::string& event_type,
                                                   const std::vector<std::string>& roles) {
  std::vector<EventRecord> out;
  for (const auto& path : tree.paths()) {
    EventRecord r;
    r.event_type = event_type;
    for (std::size_t k = 0; k < path.size() && k < roles.size(); ++k)
      if (!path[k].empty()) r.args[roles[k]] = path[k];
    out.push_back(std::move(r));
  }
  return out;
}

struct GoldLabels {
  std::vector<std::vector<int>> tags;  // per sentence, TagVocab ids
  std::vector<TaggedMention> mentions; // overlap-resolved, document order
  std::set<RelationTriple> triples;
  std::vector<int> event_type_flags;   // per ontology event type, 0/1
  std::map<std::string, EdagTree> edag;
};

inline GoldLabels derive_gold_labels(const AnnotatedDoc& ad, const EventOntology& onto,
                                     const RelationSchema& schema, const TagVocab& vocab) {
  GoldLabels g;
  g.mentions = resolve_mentions(ad.entities);
  g.tags = derive_bioes_tags(ad.doc, g.mentions, vocab);
  g.triples = derive_gold_relations(ad.records, onto, schema);
  g.event_type_flags.assign(onto.event_types.size(), 0);
  for (const auto& r : ad.records) {
    int idx = onto.event_type_index(r.event_type);
    if (idx >= 0) g.event_type_flags[static_cast<std::size_t>(idx)] = 1;
  }
  g.edag = derive_edag_paths(ad.records, onto);
  return g;
}

}  // namespace redee
