#pragma once
// The binary dependency tensor over entity/sentence nodes that gates
// relation-augmented attention. Channels: NA, Co-reference, Co-existence,
// then one Co-relation channel per head-role cluster.
//
// Rules, per ordered node pair (i,j), i != j:
//   Co-reference: both nodes carry the same entity id (symmetric).
//   Co-existence: an entity node and a sentence it appears in (symmetric).
//   Co-relation[cluster(r)]: for a triple (h,t,r), set at (node-of-h,
//     node-of-t) only (directional unless mirrored).
//   NA: set exactly where no other channel is set; the diagonal and
//     sentence-sentence pairs are always NA.

#include <atomic>
#include <sstream>
#include <string>
#include <vector>

#include "redee/document.hpp"
#include "redee/gold.hpp"
#include "redee/ontology.hpp"
#include "redee/tensor.hpp"

namespace redee {

struct DepNode {
  bool is_sentence = false;
  int sentence_index = -1;        // sentence nodes
  std::string entity_id;          // entity nodes ("" matches nothing)
  std::vector<int> sentences;     // sentences the entity appears in

  static DepNode sentence(int index) {
    DepNode n;
    n.is_sentence = true;
    n.sentence_index = index;
    return n;
  }
  static DepNode entity(std::string id, std::vector<int> sents) {
    DepNode n;
    n.entity_id = std::move(id);
    n.sentences = std::move(sents);
    return n;
  }
};

// Mention nodes in document order followed by sentence nodes in position
// order; index lookups for both.
struct NodeIndex {
  std::vector<DepNode> nodes;
  int num_mentions = 0;
  int num_sentences = 0;

  static NodeIndex for_document(const std::vector<TaggedMention>& mentions, int sentence_count) {
    NodeIndex ni;
    ni.num_mentions = static_cast<int>(mentions.size());
    ni.num_sentences = sentence_count;
    for (const auto& tm : mentions)
      ni.nodes.push_back(DepNode::entity(tm.entity_id, {tm.mention.sentence}));
    for (int s = 0; s < sentence_count; ++s) ni.nodes.push_back(DepNode::sentence(s));
    return ni;
  }

  int mention_node(int mention_index) const { return mention_index; }
  int sentence_node(int sentence_index) const { return num_mentions + sentence_index; }
  int size() const { return static_cast<int>(nodes.size()); }
};

struct DependencyTensor {
  int n = 0;
  std::vector<std::string> channel_names;  // NA, Co-reference, Co-existence, Co-relation[...]
  std::vector<Tensor> channels;            // each (n,n), entries in {0,1}

  static constexpr int kNa = 0;
  static constexpr int kCoref = 1;
  static constexpr int kCoexist = 2;
  static constexpr int kRelBase = 3;

  int channel_count() const { return static_cast<int>(channels.size()); }

  static std::atomic<long>& build_counter() {
    static std::atomic<long> counter{0};
    return counter;
  }

  // Sparse (channel, i, j) listing for fixtures and debugging.
  std::string dump_sparse() const {
    std::ostringstream os;
    for (int c = 0; c < channel_count(); ++c)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (channels[static_cast<std::size_t>(c)].at(i, j) != 0.0)
            os << channel_names[static_cast<std::size_t>(c)] << '\t' << i << '\t' << j << '\n';
    return os.str();
  }
};

inline DependencyTensor build_dependency_tensor(const std::vector<DepNode>& nodes,
                                                const std::vector<RelationTriple>& triples,
                                                const RelationSchema& schema, bool mirror_corelation = false) {
  DependencyTensor t;
  t.n = static_cast<int>(nodes.size());
  const int h = schema.num_clusters();
  t.channel_names = {"NA", "Co-reference", "Co-existence"};
  for (int c = 0; c < h; ++c)
    t.channel_names.push_back("Co-relation[" + schema.cluster_head_roles[static_cast<std::size_t>(c)] + "]");
  t.channels.assign(static_cast<std::size_t>(3 + h), Tensor({t.n, t.n}));
  DependencyTensor::build_counter().fetch_add(1, std::memory_order_relaxed);

  auto& na = t.channels[DependencyTensor::kNa];
  auto& coref = t.channels[DependencyTensor::kCoref];
  auto& coexist = t.channels[DependencyTensor::kCoexist];

  for (int i = 0; i < t.n; ++i)
    for (int j = 0; j < t.n; ++j) {
      if (i == j) continue;
      const DepNode& a = nodes[static_cast<std::size_t>(i)];
      const DepNode& b = nodes[static_cast<std::size_t>(j)];
      if (!a.is_sentence && !b.is_sentence) {
        if (!a.entity_id.empty() && a.entity_id == b.entity_id) coref.at(i, j) = 1.0;
      } else if (a.is_sentence != b.is_sentence) {
        const DepNode& ent = a.is_sentence ? b : a;
        const DepNode& sent = a.is_sentence ? a : b;
        for (int s : ent.sentences)
          if (s == sent.sentence_index) {
            coexist.at(i, j) = 1.0;
            break;
          }
      }
    }

  for (const auto& tr : triples) {
    auto it = schema.head_cluster.find(tr.relation);
    if (it == schema.head_cluster.end())
      throw DataError("dependency tensor: relation not in schema: " + tr.relation);
    Tensor& ch = t.channels[static_cast<std::size_t>(DependencyTensor::kRelBase + it->second)];
    for (int i = 0; i < t.n; ++i) {
      const DepNode& a = nodes[static_cast<std::size_t>(i)];
      if (a.is_sentence || a.entity_id != tr.head) continue;
      for (int j = 0; j < t.n; ++j) {
        if (i == j) continue;
        const DepNode& b = nodes[static_cast<std::size_t>(j)];
        if (b.is_sentence || b.entity_id != tr.tail) continue;
        ch.at(i, j) = 1.0;
        if (mirror_corelation) ch.at(j, i) = 1.0;
      }
    }
  }

  for (int i = 0; i < t.n; ++i)
    for (int j = 0; j < t.n; ++j) {
      if (i == j) {
        na.at(i, j) = 1.0;
        continue;
      }
      double any = 0.0;
      for (int c = 1; c < t.channel_count(); ++c) any += t.channels[static_cast<std::size_t>(c)].at(i, j);
      na.at(i, j) = any == 0.0 ? 1.0 : 0.0;
    }
  return t;
}

// Mention-level tensor for a document: entity-level triples broadcast to all
// (head-mention, tail-mention) pairs. Triples citing entities absent from the
// node list are an error here (they come from validated data).
inline DependencyTensor build_document_tensor(const NodeIndex& ni, const std::vector<RelationTriple>& triples,
                                              const RelationSchema& schema, bool mirror_corelation = false) {
  for (const auto& tr : triples) {
    bool head_ok = false, tail_ok = false;
    for (int i = 0; i < ni.num_mentions; ++i) {
      if (ni.nodes[static_cast<std::size_t>(i)].entity_id == tr.head) head_ok = true;
      if (ni.nodes[static_cast<std::size_t>(i)].entity_id == tr.tail) tail_ok = true;
    }
    if (!head_ok || !tail_ok)
      throw DataError("dependency tensor: triple cites entity without mention nodes: " + tr.head + "->" + tr.tail);
  }
  return build_dependency_tensor(ni.nodes, triples, schema, mirror_corelation);
}

}  // namespace redee
