#pragma once
// The four pipeline stages wired end to end: entity extraction and
// representation, document relation extraction, relation-augmented entity and
// sentence encoding, and event record generation, plus the multi-task
// training loop and full inference chain.

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "redee/crf.hpp"
#include "redee/dependency.hpp"
#include "redee/gold.hpp"
#include "redee/model.hpp"
#include "redee/raat.hpp"
#include "redee/tape.hpp"

namespace redee {

// Mentions grouped per entity. At training time ids are gold entity ids; at
// inference an entity is keyed by its normalized surface string.
struct EntityGroup {
  std::string id;
  std::string type;
  std::string surface;
  std::vector<int> mention_nodes;  // node indices == mention indices
  std::vector<int> sentences;
};

inline std::vector<EntityGroup> group_gold_entities(const std::vector<TaggedMention>& mentions,
                                                    const std::vector<Entity>& entities) {
  std::map<std::string, const Entity*> by_id;
  for (const auto& e : entities) by_id[e.id] = &e;
  std::vector<EntityGroup> groups;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    const auto& tm = mentions[i];
    auto it = index.find(tm.entity_id);
    if (it == index.end()) {
      EntityGroup g;
      g.id = tm.entity_id;
      g.type = tm.type;
      g.surface = normalize_surface(tm.mention.surface);
      index.emplace(tm.entity_id, groups.size());
      groups.push_back(std::move(g));
      it = index.find(tm.entity_id);
    }
    groups[it->second].mention_nodes.push_back(static_cast<int>(i));
    groups[it->second].sentences.push_back(tm.mention.sentence);
  }
  (void)by_id;
  return groups;
}

// Inference-side grouping: identity by exact normalized surface; the type is
// the majority vote over mentions, ties to the smaller name.
inline std::vector<EntityGroup> group_predicted_entities(const std::vector<TaggedMention>& mentions) {
  std::vector<EntityGroup> groups;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::map<std::string, int>> votes;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    const auto& tm = mentions[i];
    std::string key = normalize_surface(tm.mention.surface);
    auto it = index.find(key);
    if (it == index.end()) {
      EntityGroup g;
      g.id = key;
      g.surface = key;
      index.emplace(key, groups.size());
      groups.push_back(std::move(g));
      it = index.find(key);
    }
    groups[it->second].mention_nodes.push_back(static_cast<int>(i));
    groups[it->second].sentences.push_back(tm.mention.sentence);
    ++votes[key][tm.type];
  }
  for (auto& g : groups) {
    int best = -1;
    for (const auto& [ty, n] : votes[g.id])
      if (n > best) {
        best = n;
        g.type = ty;
      }
  }
  return groups;
}

struct EerResult {
  std::vector<TaggedMention> mentions;   // pooled mention set (gold or decoded)
  std::vector<EntityGroup> entities;
  VarPtr nodes;                          // (t+j, d), mention rows then sentence rows
  int num_mentions = 0;
  int num_sentences = 0;
  VarPtr loss_ne;                        // set when gold tags were supplied
};

// Token encoder + CRF per sentence; mention/sentence rows via span max-pool.
// With gold labels the CRF loss is accumulated and gold mentions drive the
// pooling; otherwise mentions come from the Viterbi decode.
inline EerResult eer_forward(Tape& t, PipelineModel& m, const AnnotatedDoc& ad, const GoldLabels* gold,
                             std::mt19937_64* rng = nullptr) {
  EerResult out;
  const auto& sentences = ad.doc.sentences;
  out.num_sentences = static_cast<int>(sentences.size());
  std::vector<VarPtr> encoded;  // per sentence (len,d)
  std::vector<VarPtr> losses;
  std::vector<std::vector<int>> pred_tags;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    std::vector<int> ids;
    for (const auto& tok : sentences[s]) ids.push_back(token_id(tok, m.cfg.vocab_size));
    if (ids.empty()) ids.push_back(token_id("", m.cfg.vocab_size));
    VarPtr h = encode(t, m.params, "base", m.cfg.base_layers, t.embedding(m.params, "embed/table", ids),
                      m.cfg.heads, m.cfg.dropout, rng);
    encoded.push_back(h);
    VarPtr emissions = linear(t, h, t.param(m.params, "crf/emit_w"), t.param(m.params, "crf/emit_b"));
    if (gold) {
      std::vector<int> tags = gold->tags[s];
      tags.resize(ids.size(), 0);  // padded empty-sentence guard
      losses.push_back(t.crf_nll(emissions, tags, t.param(m.params, "crf/trans")));
    } else {
      pred_tags.push_back(crf_viterbi(emissions->value, m.params.value("crf/trans")));
    }
  }
  if (gold) {
    out.loss_ne = losses.empty() ? t.scalar(0.0) : t.add_scalars(losses);
    out.mentions = gold->mentions;
    out.entities = group_gold_entities(out.mentions, ad.entities);
  } else {
    auto spans = decode_bioes(pred_tags, m.tags);
    for (const auto& sp : spans) {
      TaggedMention tm;
      tm.mention.sentence = sp.sentence;
      tm.mention.begin = sp.begin;
      tm.mention.end = sp.end;
      tm.mention.surface =
          normalize_surface(span_surface(sentences[static_cast<std::size_t>(sp.sentence)], sp.begin, sp.end));
      tm.type = sp.type;
      tm.entity_id = tm.mention.surface;
      out.mentions.push_back(std::move(tm));
    }
    out.entities = group_predicted_entities(out.mentions);
  }
  out.num_mentions = static_cast<int>(out.mentions.size());

  std::vector<VarPtr> rows;
  for (const auto& tm : out.mentions) {
    std::vector<int> span;
    for (int i = tm.mention.begin; i < tm.mention.end; ++i) span.push_back(i);
    rows.push_back(t.max_over_rows(encoded[static_cast<std::size_t>(tm.mention.sentence)], span));
  }
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    std::vector<int> all(static_cast<std::size_t>(encoded[s]->value.dim(0)));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    rows.push_back(t.max_over_rows(encoded[s], all));
  }
  out.nodes = t.concat_rows(rows);
  return out;
}

struct DreResult {
  VarPtr loss;
  std::vector<RelationTriple> predicted;
};

// Pair classifier over entity embeddings (per-dimension max over that
// entity's encoded mention rows). All ordered pairs including self-pairs;
// training subsamples NA pairs to neg_ratio per positive.
inline DreResult dre_forward(Tape& t, PipelineModel& m, const EerResult& eer,
                             const std::set<RelationTriple>* gold_triples, bool want_predictions,
                             std::mt19937_64* rng) {
  DreResult out;
  out.loss = t.scalar(0.0);
  const auto& groups = eer.entities;
  if (groups.empty()) return out;

  VarPtr h = encode(t, m.params, "dre", m.cfg.dre_layers, eer.nodes, m.cfg.heads);
  std::vector<VarPtr> embs;
  for (const auto& g : groups) embs.push_back(t.flatten(t.max_over_rows(h, g.mention_nodes)));

  const int n = static_cast<int>(groups.size());
  std::vector<VarPtr> logits;
  logits.reserve(static_cast<std::size_t>(n) * n);
  VarPtr w = t.param(m.params, "dre/wr");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      logits.push_back(t.biaffine(w, embs[static_cast<std::size_t>(i)], embs[static_cast<std::size_t>(j)]));

  if (gold_triples) {
    // training pairs: every ordered pair with i != j, plus the self-pairs
    // that actually carry a same-entity relation
    auto labels = single_label_pairs(*gold_triples);
    std::vector<int> target(static_cast<std::size_t>(n) * n, 0);
    std::vector<std::size_t> positives, negatives;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        std::size_t flat = static_cast<std::size_t>(i) * n + j;
        auto it = labels.find({groups[static_cast<std::size_t>(i)].id, groups[static_cast<std::size_t>(j)].id});
        if (it != labels.end()) {
          target[flat] = m.schema.relation_index(it->second) + 1;
          positives.push_back(flat);
        } else if (i != j) {
          negatives.push_back(flat);
        }
      }
    std::size_t keep = static_cast<std::size_t>(m.tcfg.neg_ratio * static_cast<double>(positives.size()));
    if (rng && negatives.size() > keep) {
      std::shuffle(negatives.begin(), negatives.end(), *rng);
      negatives.resize(keep);
    }
    std::vector<VarPtr> losses;
    for (std::size_t flat : positives)
      losses.push_back(t.cross_entropy_with_logits(logits[flat], target[flat]));
    for (std::size_t flat : negatives) losses.push_back(t.cross_entropy_with_logits(logits[flat], 0));
    if (!losses.empty()) out.loss = t.add_scalars(losses);
  }

  if (want_predictions) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Tensor& lv = logits[static_cast<std::size_t>(i) * n + j]->value;
        int best = 0;
        for (int c = 1; c < lv.dim(0); ++c)
          if (lv.at(c) > lv.at(best)) best = c;
        if (best > 0)
          out.predicted.push_back({groups[static_cast<std::size_t>(i)].id,
                                   groups[static_cast<std::size_t>(j)].id,
                                   m.schema.relation_types[static_cast<std::size_t>(best - 1)]});
      }
  }
  return out;
}

// Relation-augmented (or, ablated, vanilla) encoding of the node matrix.
inline VarPtr ese_forward(Tape& t, PipelineModel& m, const EerResult& eer,
                          const std::vector<RelationTriple>& triples, std::mt19937_64* rng = nullptr) {
  if (m.tcfg.disable_raat1)
    return encode(t, m.params, "raat1", m.cfg.raat_layers, eer.nodes, m.cfg.heads, m.cfg.dropout, rng);
  // drop triples whose endpoints lost every mention (overlap resolution)
  std::set<std::string> present;
  for (const auto& g : eer.entities) present.insert(g.id);
  std::vector<RelationTriple> usable;
  for (const auto& tr : triples)
    if (present.count(tr.head) && present.count(tr.tail)) usable.push_back(tr);
  NodeIndex ni = NodeIndex::for_document(eer.mentions, eer.num_sentences);
  DependencyTensor dt = build_document_tensor(ni, usable, m.schema, m.cfg.mirror_corelation);
  return raat_encode(t, m.params, "raat1", m.cfg.raat_layers, eer.nodes, dt.channels, m.cfg.heads, m.cfg.dropout,
                     rng);
}

struct EventTypeResult {
  VarPtr loss;
  std::vector<int> triggered;        // ontology indices with probability > 0.5
  std::vector<double> probabilities;
};

inline EventTypeResult event_type_classify(Tape& t, PipelineModel& m, const VarPtr& enriched, int num_mentions,
                                           int num_sentences, const std::vector<int>* gold_flags) {
  EventTypeResult out;
  std::vector<int> sent_rows;
  for (int s = 0; s < num_sentences; ++s) sent_rows.push_back(num_mentions + s);
  VarPtr pooled = t.flatten(t.max_over_rows(enriched, sent_rows));
  VarPtr logits = t.add(t.rowdot(t.param(m.params, "etype/w"), pooled), t.param(m.params, "etype/b"));
  if (gold_flags) {
    std::vector<double> targets(gold_flags->begin(), gold_flags->end());
    out.loss = t.bce_with_logits(logits, targets);
  } else {
    out.loss = t.scalar(0.0);
  }
  for (int i = 0; i < m.num_event_types(); ++i) {
    double p = 1.0 / (1.0 + std::exp(-logits->value.at(i)));
    out.probabilities.push_back(p);
    if (p > 0.5) out.triggered.push_back(i);  // strictly greater
  }
  return out;
}

// ---------------------------------------------------------------------------
// Event record generation

// Path expansion over role steps with an injectable step scorer. The scorer
// sees the event-role index, the choices so far ("" = NONE), and the fixed
// candidate ids, and returns one logit per candidate plus one for NONE
// (last). Candidates above 0.5 probability branch; NONE is the fallback when
// nothing clears the bar. Paths are pruned to max_paths by cumulative
// log-sigmoid score, ties keeping earlier insertion order.
using StepScorer = std::function<std::vector<double>(int role_index, const std::vector<std::string>& memory_ids,
                                                     const std::vector<std::string>& candidate_ids)>;

inline double log_sigmoid(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::fabs(x))); }

inline std::vector<std::vector<std::string>> edag_expand_paths(int n_roles,
                                                               const std::vector<std::string>& candidate_ids,
                                                               const StepScorer& scorer, int max_paths) {
  struct Path {
    std::vector<std::string> choices;
    double score = 0.0;
  };
  std::vector<Path> paths{Path{}};
  for (int k = 0; k < n_roles; ++k) {
    std::vector<Path> next;
    for (const auto& p : paths) {
      std::vector<double> logits = scorer(k, p.choices, candidate_ids);
      if (logits.size() != candidate_ids.size() + 1)
        throw std::logic_error("edag: scorer returned wrong arity");
      std::vector<std::pair<std::string, double>> chosen;
      for (std::size_t i = 0; i < candidate_ids.size(); ++i)
        if (logits[i] > 0.0) chosen.emplace_back(candidate_ids[i], logits[i]);
      if (logits.back() > 0.0) chosen.emplace_back("", logits.back());
      if (chosen.empty()) chosen.emplace_back("", logits.back());  // NONE fallback
      for (const auto& [id, lg] : chosen) {
        Path np = p;
        np.choices.push_back(id);
        np.score += log_sigmoid(lg);
        next.push_back(std::move(np));
      }
    }
    std::stable_sort(next.begin(), next.end(), [](const Path& a, const Path& b) { return a.score > b.score; });
    if (static_cast<int>(next.size()) > max_paths) next.resize(static_cast<std::size_t>(max_paths));
    paths = std::move(next);
  }
  std::vector<std::vector<std::string>> out;
  for (auto& p : paths) out.push_back(std::move(p.choices));
  return out;
}

// Gold-tree scorer: +10 on the children of the current prefix node, -10
// elsewhere. Reproduces exactly the gold records through the expansion
// mechanics above.
inline StepScorer oracle_scorer(const EdagTree& tree) {
  return [&tree](int, const std::vector<std::string>& memory_ids,
                 const std::vector<std::string>& candidate_ids) {
    int node = 0;
    for (const auto& choice : memory_ids) {
      const auto& c = tree.nodes[static_cast<std::size_t>(node)].children;
      auto it = c.find(choice);
      node = it == c.end() ? -1 : it->second;
      if (node < 0) break;
    }
    std::vector<double> logits(candidate_ids.size() + 1, -10.0);
    if (node >= 0) {
      const auto& c = tree.nodes[static_cast<std::size_t>(node)].children;
      for (std::size_t i = 0; i < candidate_ids.size(); ++i)
        if (c.count(candidate_ids[i])) logits[i] = 10.0;
      if (c.count("")) logits.back() = 10.0;
    }
    return logits;
  };
}

// Shared per-document context for decoder steps.
struct ErgContext {
  Tape& t;
  PipelineModel& m;
  std::string event_type;
  std::vector<std::string> roles;
  std::vector<std::string> cand_ids;
  std::vector<VarPtr> cand_base;                 // (1,d) per candidate entity
  std::vector<std::vector<int>> cand_sentences;  // sentences per candidate
  std::vector<VarPtr> sent_rows;                 // (1,d) per sentence
  std::vector<int> sent_indices;                 // original sentence positions
  std::vector<RelationTriple> triples;
  std::mt19937_64* rng = nullptr;
};

struct ErgMemoryItem {
  std::string id;  // "" = NONE
  VarPtr row;      // role-augmented input row
};

namespace detail {

inline VarPtr erg_candidate_block(ErgContext& ctx, int slot) {
  Tape& t = ctx.t;
  std::vector<VarPtr> rows = ctx.cand_base;
  rows.push_back(t.param(ctx.m.params, "role/none"));
  VarPtr block = t.concat_rows(rows);
  VarPtr role_vec = t.flatten(t.embedding(ctx.m.params, "role/table", {slot}));
  return t.add_row_bias(block, role_vec);
}

// One decoder iteration: re-encode [sentences | memory | candidates+NONE]
// over a freshly built dependency tensor and score every candidate row with
// the per-role head. Returns the logits and the role-augmented candidate rows
// (NONE last) for memory hand-off.
inline std::pair<VarPtr, std::vector<VarPtr>> erg_step(ErgContext& ctx, int role_index,
                                                       const std::vector<ErgMemoryItem>& memory) {
  Tape& t = ctx.t;
  PipelineModel& m = ctx.m;
  const int slot = m.role_slot(ctx.event_type, ctx.roles[static_cast<std::size_t>(role_index)]);
  VarPtr cand_block = erg_candidate_block(ctx, slot);
  const int n_cand = cand_block->value.dim(0);  // includes NONE

  std::vector<VarPtr> parts;
  for (const auto& r : ctx.sent_rows) parts.push_back(r);
  for (const auto& it : memory) parts.push_back(it.row);
  parts.push_back(cand_block);
  VarPtr input = t.concat_rows(parts);

  const int j = static_cast<int>(ctx.sent_rows.size());
  const int mem = static_cast<int>(memory.size());

  VarPtr encoded;
  if (m.tcfg.disable_raat2) {
    encoded = encode(t, m.params, "raat2", m.cfg.raat_layers, input, m.cfg.heads, m.cfg.dropout, ctx.rng);
  } else {
    std::vector<DepNode> nodes;
    for (int s : ctx.sent_indices) nodes.push_back(DepNode::sentence(s));
    std::set<std::string> present;
    auto sentences_of = [&](const std::string& id) -> std::vector<int> {
      for (std::size_t i = 0; i < ctx.cand_ids.size(); ++i)
        if (ctx.cand_ids[i] == id) return ctx.cand_sentences[i];
      return {};
    };
    for (const auto& it : memory) {
      nodes.push_back(DepNode::entity(it.id, sentences_of(it.id)));
      if (!it.id.empty()) present.insert(it.id);
    }
    for (std::size_t i = 0; i < ctx.cand_ids.size(); ++i) {
      nodes.push_back(DepNode::entity(ctx.cand_ids[i], ctx.cand_sentences[i]));
      present.insert(ctx.cand_ids[i]);
    }
    nodes.push_back(DepNode::entity("", {}));  // NONE row
    std::vector<RelationTriple> usable;
    for (const auto& tr : ctx.triples)
      if (present.count(tr.head) && present.count(tr.tail)) usable.push_back(tr);
    DependencyTensor dt = build_dependency_tensor(nodes, usable, m.schema, m.cfg.mirror_corelation);
    encoded = raat_encode(t, m.params, "raat2", m.cfg.raat_layers, input, dt.channels, m.cfg.heads,
                          m.cfg.dropout, ctx.rng);
  }

  std::vector<int> cand_rows(static_cast<std::size_t>(n_cand));
  for (int i = 0; i < n_cand; ++i) cand_rows[static_cast<std::size_t>(i)] = j + mem + i;
  VarPtr cand_out = t.select_rows(encoded, cand_rows);
  VarPtr head_w = t.flatten(t.embedding(m.params, "arg/w", {slot}));
  VarPtr head_b = t.flatten(t.embedding(m.params, "arg/b", {slot}));
  VarPtr logits = t.add_scalar_bc(t.rowdot(cand_out, head_w), head_b);

  std::vector<VarPtr> aug_rows;
  for (int i = 0; i < n_cand; ++i) aug_rows.push_back(t.row(cand_block, i));
  return {logits, aug_rows};
}

inline void erg_walk_gold(ErgContext& ctx, const EdagTree& tree, int tree_node, int role_index,
                          std::vector<ErgMemoryItem>& memory, std::vector<VarPtr>& losses) {
  if (role_index >= static_cast<int>(ctx.roles.size())) return;
  auto [logits, aug_rows] = erg_step(ctx, role_index, memory);
  const auto& children = tree.nodes[static_cast<std::size_t>(tree_node)].children;
  std::vector<double> targets(ctx.cand_ids.size() + 1, 0.0);
  for (std::size_t i = 0; i < ctx.cand_ids.size(); ++i)
    if (children.count(ctx.cand_ids[i])) targets[i] = 1.0;
  if (children.count("")) targets.back() = 1.0;
  losses.push_back(ctx.t.bce_with_logits(logits, targets));
  for (const auto& [edge, next] : children) {
    std::size_t row_idx = ctx.cand_ids.size();  // NONE by default
    if (!edge.empty())
      for (std::size_t i = 0; i < ctx.cand_ids.size(); ++i)
        if (ctx.cand_ids[i] == edge) {
          row_idx = i;
          break;
        }
    memory.push_back({edge, aug_rows[row_idx]});
    erg_walk_gold(ctx, tree, next, role_index + 1, memory, losses);
    memory.pop_back();
  }
}

}  // namespace detail

// Builds the decoder context from the enriched node matrix.
inline ErgContext make_erg_context(Tape& t, PipelineModel& m, const VarPtr& enriched, const EerResult& eer,
                                   const std::vector<RelationTriple>& triples, const std::string& event_type,
                                   std::mt19937_64* rng = nullptr) {
  ErgContext ctx{t, m};
  ctx.event_type = event_type;
  ctx.roles = m.onto.find_event_type(event_type)->roles;
  for (const auto& g : eer.entities) {
    ctx.cand_ids.push_back(g.id);
    ctx.cand_base.push_back(t.max_over_rows(enriched, g.mention_nodes));
    std::vector<int> sents = g.sentences;
    std::sort(sents.begin(), sents.end());
    sents.erase(std::unique(sents.begin(), sents.end()), sents.end());
    ctx.cand_sentences.push_back(std::move(sents));
  }
  for (int s = 0; s < eer.num_sentences; ++s) {
    ctx.sent_rows.push_back(t.row(enriched, eer.num_mentions + s));
    ctx.sent_indices.push_back(s);
  }
  ctx.triples = triples;
  ctx.rng = rng;
  return ctx;
}

// Teacher-forced decoder loss over the gold path tree.
inline VarPtr edag_training_loss(ErgContext& ctx, const EdagTree& gold_tree) {
  std::vector<VarPtr> losses;
  std::vector<ErgMemoryItem> memory;
  detail::erg_walk_gold(ctx, gold_tree, 0, 0, memory, losses);
  return losses.empty() ? ctx.t.scalar(0.0) : ctx.t.add_scalars(losses);
}

// Inference decode via path expansion with the neural step scorer. Memory
// rows are rebuilt from the path ids, so shared prefixes score identically.
inline std::vector<EventRecord> edag_decode(ErgContext& ctx, int max_paths) {
  StepScorer scorer = [&ctx](int role_index, const std::vector<std::string>& memory_ids,
                             const std::vector<std::string>& candidate_ids) {
    std::vector<ErgMemoryItem> memory;
    for (std::size_t k = 0; k < memory_ids.size(); ++k) {
      const int slot = ctx.m.role_slot(ctx.event_type, ctx.roles[k]);
      VarPtr base;
      if (memory_ids[k].empty()) {
        base = ctx.t.param(ctx.m.params, "role/none");
      } else {
        for (std::size_t i = 0; i < ctx.cand_ids.size(); ++i)
          if (ctx.cand_ids[i] == memory_ids[k]) {
            base = ctx.cand_base[i];
            break;
          }
      }
      VarPtr role_vec = ctx.t.flatten(ctx.t.embedding(ctx.m.params, "role/table", {slot}));
      memory.push_back({memory_ids[k], ctx.t.add_row_bias(base, role_vec)});
    }
    auto [logits, rows] = detail::erg_step(ctx, role_index, memory);
    (void)rows;
    std::vector<double> out(logits->value.data.begin(), logits->value.data.end());
    (void)candidate_ids;
    return out;
  };
  auto paths = edag_expand_paths(static_cast<int>(ctx.roles.size()), ctx.cand_ids, scorer, max_paths);
  std::set<EventRecord> records;
  for (const auto& path : paths) {
    EventRecord r;
    r.event_type = ctx.event_type;
    for (std::size_t k = 0; k < path.size(); ++k)
      if (!path[k].empty()) r.args[ctx.roles[k]] = path[k];
    if (!r.args.empty()) records.insert(std::move(r));
  }
  return {records.begin(), records.end()};
}

// lambda1*L_ne + lambda2*L_dre + lambda3*L_pred + lambda4*L_a
inline double combined_loss(double l_ne, double l_dre, double l_pred, double l_a, const TrainingConfig& c) {
  return c.lambda1 * l_ne + c.lambda2 * l_dre + c.lambda3 * l_pred + c.lambda4 * l_a;
}

inline VarPtr combined_loss(Tape& t, const VarPtr& l_ne, const VarPtr& l_dre, const VarPtr& l_pred,
                            const VarPtr& l_a, const TrainingConfig& c) {
  return t.add_scalars({t.scale(l_ne, c.lambda1), t.scale(l_dre, c.lambda2), t.scale(l_pred, c.lambda3),
                        t.scale(l_a, c.lambda4)});
}

struct DocLosses {
  double l_ne = 0, l_dre = 0, l_pred = 0, l_a = 0, combined = 0;
};

// One teacher-forced training forward/backward for a document. Gradients are
// accumulated into the store; the caller decides when to step.
inline DocLosses train_document(PipelineModel& m, const AnnotatedDoc& ad, const GoldLabels& gold,
                                std::mt19937_64& rng) {
  Tape t;
  std::mt19937_64* drop_rng = m.cfg.dropout > 0.0 ? &rng : nullptr;
  EerResult eer = eer_forward(t, m, ad, &gold, drop_rng);
  bool want_pred = !m.tcfg.teacher_forcing;
  DreResult dre = dre_forward(t, m, eer, &gold.triples, want_pred, &rng);
  std::vector<RelationTriple> ese_triples;
  if (m.tcfg.teacher_forcing) ese_triples.assign(gold.triples.begin(), gold.triples.end());
  else ese_triples = dre.predicted;
  VarPtr enriched = ese_forward(t, m, eer, ese_triples, drop_rng);
  EventTypeResult et = event_type_classify(t, m, enriched, eer.num_mentions, eer.num_sentences,
                                           &gold.event_type_flags);
  std::vector<VarPtr> arg_losses;
  for (const auto& [etype, tree] : gold.edag) {
    ErgContext ctx = make_erg_context(t, m, enriched, eer, ese_triples, etype, drop_rng);
    arg_losses.push_back(edag_training_loss(ctx, tree));
  }
  VarPtr l_a = arg_losses.empty() ? t.scalar(0.0) : t.add_scalars(arg_losses);
  VarPtr total = combined_loss(t, eer.loss_ne, dre.loss, et.loss, l_a, m.tcfg);
  DocLosses out;
  out.l_ne = eer.loss_ne->value.at(0);
  out.l_dre = dre.loss->value.at(0);
  out.l_pred = et.loss->value.at(0);
  out.l_a = l_a->value.at(0);
  out.combined = total->value.at(0);
  if (!std::isfinite(out.combined)) throw std::runtime_error("non-finite combined loss");
  t.backward(total);
  return out;
}

// Full inference chain: predicted tags -> surface-grouped entities ->
// predicted triples -> enriched nodes -> thresholded event types -> capped
// path decoding. Argument values in returned records are entity surfaces.
inline std::vector<EventRecord> predict(PipelineModel& m, const AnnotatedDoc& ad) {
  if (ad.doc.sentences.empty()) return {};
  Tape t;
  EerResult eer = eer_forward(t, m, ad, nullptr);
  DreResult dre = dre_forward(t, m, eer, nullptr, /*want_predictions=*/true, nullptr);
  VarPtr enriched = ese_forward(t, m, eer, dre.predicted);
  EventTypeResult et = event_type_classify(t, m, enriched, eer.num_mentions, eer.num_sentences, nullptr);
  std::vector<EventRecord> records;
  for (int idx : et.triggered) {
    ErgContext ctx = make_erg_context(t, m, enriched, eer, dre.predicted,
                                      m.onto.event_types[static_cast<std::size_t>(idx)].name);
    for (auto& r : edag_decode(ctx, m.tcfg.max_paths)) records.push_back(std::move(r));
  }
  return records;
}

}  // namespace redee
