#pragma once
// Seeded synthetic corpus generator. Documents are built from slot-filled
// template sentences: each record gets an anchor token shared by all of its
// sentences, a per-type trigger token, and role keyword tokens in front of
// argument surfaces. Arguments are spread over a target number of distinct
// sentences so across-sentence and multi-event regimes are both exercised.

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "redee/dataset.hpp"
#include "redee/errors.hpp"
#include "redee/gold.hpp"
#include "redee/ontology.hpp"

namespace redee {

struct SynthConfig {
  int num_docs = 100;
  int vocab_size = 400;
  std::map<int, double> events_per_doc = {{1, 0.7}, {2, 0.2}, {3, 0.1}};
  double scatter_level = 2.5;        // target mean distinct sentences per record
  double shared_argument_prob = 0.5; // chance a later record reuses an earlier argument
  double fill_prob = 0.9;            // chance each role is filled
  double self_share_prob = 0.1;      // chance a role reuses an earlier role's entity in-record
  double multi_token_prob = 0.2;     // chance an entity surface spans two tokens
  std::uint64_t seed = 1;
  DocumentLimits limits;
};

inline void validate_synth_config(const SynthConfig& cfg, const EventOntology& onto) {
  double sum = 0.0;
  for (const auto& [k, p] : cfg.events_per_doc) {
    if (k < 1) throw ConfigError("synth: events_per_doc keys must be >= 1");
    if (p < 0.0 || p > 1.0) throw ConfigError("synth: events_per_doc probabilities must be in [0,1]");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("synth: events_per_doc probabilities must sum to 1");
  if (cfg.num_docs < 0) throw ConfigError("synth: num_docs must be >= 0");
  if (cfg.vocab_size < 10) throw ConfigError("synth: vocab_size must be >= 10");
  if (cfg.scatter_level < 1.0) throw ConfigError("synth: scatter_level must be >= 1");
  if (cfg.scatter_level > cfg.limits.max_sentences)
    throw ConfigError("synth: scatter_level exceeds max_sentences");
  std::size_t min_roles = SIZE_MAX;
  for (const auto& et : onto.event_types) min_roles = std::min(min_roles, et.roles.size());
  if (onto.event_types.empty() || min_roles == 0) throw ConfigError("synth: ontology has no usable event types");
  if (cfg.scatter_level > static_cast<double>(min_roles))
    throw ConfigError("synth: scatter_level exceeds the smallest event type's role count");
}

struct SynthManifest {
  int num_docs = 0;
  int num_records = 0;
  double mean_events_per_doc = 0.0;
  double mean_scatter = 0.0;          // distinct sentences per record, own placements
  double multi_event_fraction = 0.0;
  double shared_argument_fraction = 0.0;  // of multi-event docs
};

// Two event types over three entity kinds; roles constrain entity types so
// shared and self-shared arguments are always constructible.
inline EventOntology default_synth_ontology() {
  EventOntology onto;
  onto.entity_types = {"ORG", "SHARE", "DATE"};
  EventTypeDef pledge;
  pledge.name = "Pledge";
  pledge.roles = {"Pledger", "PledgedShares", "Pledgee", "StartDate", "EndDate"};
  pledge.role_entity_types = {{"Pledger", {"ORG"}},
                              {"PledgedShares", {"SHARE"}},
                              {"Pledgee", {"ORG"}},
                              {"StartDate", {"DATE"}},
                              {"EndDate", {"DATE"}}};
  EventTypeDef acquire;
  acquire.name = "Acquire";
  acquire.roles = {"Buyer", "Target", "Amount", "Date"};
  acquire.role_entity_types = {
      {"Buyer", {"ORG"}}, {"Target", {"ORG"}}, {"Amount", {"SHARE"}}, {"Date", {"DATE"}}};
  onto.event_types = {pledge, acquire};
  return onto;
}

namespace detail {

struct SynthSentence {
  std::vector<std::string> tokens;
  // entity index -> [begin,end) spans in this sentence
  std::vector<std::pair<int, std::pair<int, int>>> placements;
};

inline std::string surface_prefix(const std::string& entity_type) {
  std::string p;
  for (char c : entity_type) p += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return p.size() > 4 ? p.substr(0, 4) : p;
}

}  // namespace detail

inline Dataset generate_synthetic_corpus(const SynthConfig& cfg, const EventOntology& onto,
                                         const std::string& split = "train",
                                         SynthManifest* manifest_out = nullptr) {
  validate_synth_config(cfg, onto);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Dataset ds;
  ds.split = split;
  ds.ontology = &onto;
  SynthManifest mf;
  mf.num_docs = cfg.num_docs;
  int multi_docs = 0, shared_docs = 0;
  long scatter_sum = 0;

  for (int di = 0; di < cfg.num_docs; ++di) {
    AnnotatedDoc ad;
    {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "synth-%s-%05d", split.c_str(), di);
      ad.doc.doc_id = buf;
    }

    // record count
    double u = unit(rng);
    int k = cfg.events_per_doc.rbegin()->first;
    double acc = 0.0;
    for (const auto& [n, p] : cfg.events_per_doc) {
      acc += p;
      if (u < acc) {
        k = n;
        break;
      }
    }

    struct PendingEntity {
      std::string id;
      std::string type;
      std::vector<std::string> surface_tokens;
    };
    std::vector<PendingEntity> entities;
    std::set<std::string> used_surfaces;
    auto new_entity = [&](const std::string& type) -> int {
      std::uniform_int_distribution<int> num(0, cfg.vocab_size - 1);
      std::vector<std::string> toks;
      for (int attempt = 0; attempt < 64; ++attempt) {
        toks.clear();
        std::string stem = detail::surface_prefix(type) + std::to_string(num(rng));
        if (unit(rng) < cfg.multi_token_prob) toks = {detail::surface_prefix(type) + "x", stem};
        else toks = {stem};
        std::string joined;
        for (const auto& t : toks) joined += t;
        if (used_surfaces.insert(joined).second) break;
      }
      entities.push_back({"e" + std::to_string(entities.size()), type, toks});
      return static_cast<int>(entities.size()) - 1;
    };

    std::vector<detail::SynthSentence> sentences;
    bool doc_shared = false;

    struct Placement {
      int entity = 0;
      std::string role;
    };

    for (int ri = 0; ri < k; ++ri) {
      std::uniform_int_distribution<std::size_t> pick_type(0, onto.event_types.size() - 1);
      const EventTypeDef& et = onto.event_types[pick_type(rng)];
      EventRecord rec;
      rec.event_type = et.name;

      // choose filled roles; always keep at least one
      std::vector<std::string> filled;
      for (const auto& role : et.roles)
        if (unit(rng) < cfg.fill_prob) filled.push_back(role);
      if (filled.empty()) filled.push_back(et.roles[0]);

      auto allowed = [&](const std::string& role) -> const std::vector<std::string>& {
        static const std::vector<std::string> empty;
        auto it = et.role_entity_types.find(role);
        return it == et.role_entity_types.end() ? empty : it->second;
      };
      auto type_ok = [&](const std::string& role, const std::string& ty) {
        const auto& al = allowed(role);
        return al.empty() || std::find(al.begin(), al.end(), ty) != al.end();
      };
      auto pick_allowed_type = [&](const std::string& role) -> std::string {
        const auto& al = allowed(role);
        if (al.empty()) return onto.entity_types[0];
        std::uniform_int_distribution<std::size_t> pk(0, al.size() - 1);
        return al[pk(rng)];
      };

      // cross-record sharing: reuse one earlier argument when possible
      int share_role_idx = -1;
      if (ri > 0 && unit(rng) < cfg.shared_argument_prob) {
        auto compatible = [&](const std::string& role) {
          for (const auto& pe : entities)
            if (type_ok(role, pe.type)) return true;
          return false;
        };
        for (std::size_t fi = 0; fi < filled.size(); ++fi)
          if (compatible(filled[fi])) {
            share_role_idx = static_cast<int>(fi);
            break;
          }
        if (share_role_idx < 0) {
          // no filled role fits an existing entity; fill one that does
          for (const auto& role : et.roles)
            if (std::find(filled.begin(), filled.end(), role) == filled.end() && compatible(role)) {
              filled.push_back(role);
              share_role_idx = static_cast<int>(filled.size()) - 1;
              break;
            }
        }
      }

      std::vector<Placement> placements;
      for (std::size_t fi = 0; fi < filled.size(); ++fi) {
        const std::string& role = filled[fi];
        int ent = -1;
        if (static_cast<int>(fi) == share_role_idx) {
          std::vector<int> cands;
          for (std::size_t ei = 0; ei < entities.size(); ++ei)
            if (type_ok(role, entities[ei].type)) cands.push_back(static_cast<int>(ei));
          if (!cands.empty()) {
            std::uniform_int_distribution<std::size_t> pk(0, cands.size() - 1);
            ent = cands[pk(rng)];
            doc_shared = true;
          }
        }
        if (ent < 0 && !placements.empty() && unit(rng) < cfg.self_share_prob) {
          for (const auto& pl : placements)
            if (type_ok(role, entities[static_cast<std::size_t>(pl.entity)].type) &&
                rec.args.find(role) == rec.args.end()) {
              ent = pl.entity;
              break;
            }
        }
        if (ent < 0) ent = new_entity(pick_allowed_type(role));
        placements.push_back({ent, role});
        rec.args[role] = entities[static_cast<std::size_t>(ent)].id;
      }

      // distinct-sentence target for this record
      int lo = static_cast<int>(std::floor(cfg.scatter_level));
      int target = lo + (unit(rng) < cfg.scatter_level - lo ? 1 : 0);
      target = std::max(1, std::min<int>(target, static_cast<int>(placements.size())));
      scatter_sum += target;

      // round-robin roles into `target` sentence groups
      std::vector<std::vector<Placement>> groups(static_cast<std::size_t>(target));
      for (std::size_t pi = 0; pi < placements.size(); ++pi)
        groups[pi % static_cast<std::size_t>(target)].push_back(placements[pi]);

      // anchors come from a small recycled pool so their embeddings train
      // well; identity only matters within one document
      std::string anchor = "ref" + std::to_string((di % 13) + 3 * ri);
      std::uniform_int_distribution<int> filler(0, cfg.vocab_size - 1);
      for (const auto& group : groups) {
        detail::SynthSentence s;
        s.tokens.push_back(anchor);
        s.tokens.push_back("evt" + et.name);
        for (const auto& pl : group) {
          s.tokens.push_back("kw" + pl.role);
          int begin = static_cast<int>(s.tokens.size());
          for (const auto& t : entities[static_cast<std::size_t>(pl.entity)].surface_tokens)
            s.tokens.push_back(t);
          s.placements.push_back({pl.entity, {begin, static_cast<int>(s.tokens.size())}});
        }
        int n_fill = 1 + static_cast<int>(filler(rng)) % 2;
        for (int f = 0; f < n_fill; ++f) s.tokens.push_back("w" + std::to_string(filler(rng)));
        sentences.push_back(std::move(s));
      }
      ad.records.push_back(std::move(rec));
    }

    // an argument-free distractor sentence now and then
    if (unit(rng) < 0.5) {
      detail::SynthSentence s;
      std::uniform_int_distribution<int> filler(0, cfg.vocab_size - 1);
      s.tokens.push_back("refz" + std::to_string(di % 7));
      for (int f = 0; f < 3; ++f) s.tokens.push_back("w" + std::to_string(filler(rng)));
      sentences.push_back(std::move(s));
    }

    std::shuffle(sentences.begin(), sentences.end(), rng);
    if (static_cast<int>(sentences.size()) > cfg.limits.max_sentences)
      sentences.resize(static_cast<std::size_t>(cfg.limits.max_sentences));

    std::vector<Entity> out_entities(entities.size());
    for (std::size_t ei = 0; ei < entities.size(); ++ei) {
      out_entities[ei].id = entities[ei].id;
      out_entities[ei].type = entities[ei].type;
    }
    for (std::size_t si = 0; si < sentences.size(); ++si) {
      ad.doc.sentences.push_back(sentences[si].tokens);
      for (const auto& [ent, span] : sentences[si].placements) {
        EntityMention m;
        m.sentence = static_cast<int>(si);
        m.begin = span.first;
        m.end = span.second;
        std::string surf;
        for (int tki = m.begin; tki < m.end; ++tki)
          surf += sentences[si].tokens[static_cast<std::size_t>(tki)];
        m.surface = normalize_surface(surf);
        out_entities[static_cast<std::size_t>(ent)].mentions.push_back(m);
      }
    }
    for (auto& e : out_entities)
      if (!e.mentions.empty()) ad.entities.push_back(std::move(e));

    mf.num_records += static_cast<int>(ad.records.size());
    if (ad.records.size() > 1) {
      ++multi_docs;
      if (doc_shared) ++shared_docs;
    }
    ds.docs.push_back(std::move(ad));
  }

  if (mf.num_docs > 0) mf.mean_events_per_doc = static_cast<double>(mf.num_records) / mf.num_docs;
  if (mf.num_records > 0) mf.mean_scatter = static_cast<double>(scatter_sum) / mf.num_records;
  if (mf.num_docs > 0) mf.multi_event_fraction = static_cast<double>(multi_docs) / mf.num_docs;
  if (multi_docs > 0) mf.shared_argument_fraction = static_cast<double>(shared_docs) / multi_docs;
  if (manifest_out) *manifest_out = mf;
  return ds;
}

}  // namespace redee
