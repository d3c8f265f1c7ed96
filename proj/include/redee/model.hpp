#pragma once
// Model container: dimensions, the full parameter set for the four pipeline
// stages, and the token/role/tag vocabularies everything indexes into.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "redee/errors.hpp"
#include "redee/gold.hpp"
#include "redee/nn.hpp"
#include "redee/ontology.hpp"
#include "redee/param_store.hpp"
#include "redee/raat.hpp"

namespace redee {

struct ModelConfig {
  int d = 64;            // hidden width
  int ff = 128;          // feed-forward width
  int heads = 4;
  int base_layers = 2;   // token encoder
  int dre_layers = 2;    // relation encoder
  int raat_layers = 4;   // both relation-augmented encoders
  int vocab_size = 8192; // hashed token ids
  double dropout = 0.0;
  bool mirror_corelation = false;
  DocumentLimits limits;
};

struct TrainingConfig {
  double lambda1 = 0.05;  // sequence labeling
  double lambda2 = 1.0;   // relation prediction
  double lambda3 = 0.05;  // event type classification
  double lambda4 = 0.95;  // record decoding
  double lr = 5e-5;
  int batch_size = 8;
  int epochs = 20;
  std::uint64_t seed = 1;
  bool teacher_forcing = true;  // off: the entity/sentence encoder consumes predicted triples
  double neg_ratio = 3.0;       // NA pairs sampled per positive pair
  int max_paths = 8;            // decoding fan-out cap
  bool disable_raat1 = false;
  bool disable_raat2 = false;
};

inline void validate_training_config(const TrainingConfig& c) {
  if (c.lambda1 < 0 || c.lambda2 < 0 || c.lambda3 < 0 || c.lambda4 < 0)
    throw ConfigError("training: loss weights must be non-negative");
  if (c.lr <= 0) throw ConfigError("training: lr must be positive");
  if (c.batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
  if (c.epochs < 0) throw ConfigError("training: epochs must be >= 0");
  if (c.neg_ratio < 0) throw ConfigError("training: neg_ratio must be >= 0");
  if (c.max_paths < 1) throw ConfigError("training: max_paths must be >= 1");
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline int token_id(const std::string& token, int vocab_size) {
  return static_cast<int>(fnv1a(token) % static_cast<std::uint64_t>(vocab_size));
}

class PipelineModel {
 public:
  ModelConfig cfg;
  TrainingConfig tcfg;
  EventOntology onto;
  RelationSchema schema;
  TagVocab tags;
  ParamStore params;

  PipelineModel(ModelConfig mc, TrainingConfig tc, EventOntology ontology)
      : cfg(mc), tcfg(tc), onto(std::move(ontology)), schema(derive_relation_schema(onto)), tags(onto) {
    validate_training_config(tc);
    auto violations = validate_ontology(onto);
    if (!violations.empty()) throw ConfigError("model: invalid ontology: " + violations.front());
    for (const auto& et : onto.event_types)
      for (const auto& role : et.roles) {
        role_slot_index_[{et.name, role}] = static_cast<int>(role_slots_.size());
        role_slots_.emplace_back(et.name, role);
      }
    init_params();
  }

  int role_slot(const std::string& event_type, const std::string& role) const {
    return role_slot_index_.at({event_type, role});
  }
  int num_role_slots() const { return static_cast<int>(role_slots_.size()); }
  int num_relation_classes() const { return static_cast<int>(schema.relation_types.size()) + 1; }  // 0 = NA
  int num_event_types() const { return static_cast<int>(onto.event_types.size()); }
  int dep_channels() const { return 3 + schema.num_clusters(); }

  // Shape-relevant configuration only; checkpoints refuse to load across a
  // mismatch unless forced.
  std::uint64_t config_hash() const {
    nlohmann::json j;
    j["d"] = cfg.d;
    j["ff"] = cfg.ff;
    j["heads"] = cfg.heads;
    j["base_layers"] = cfg.base_layers;
    j["dre_layers"] = cfg.dre_layers;
    j["raat_layers"] = cfg.raat_layers;
    j["vocab_size"] = cfg.vocab_size;
    j["mirror_corelation"] = cfg.mirror_corelation;
    j["disable_raat1"] = tcfg.disable_raat1;
    j["disable_raat2"] = tcfg.disable_raat2;
    j["ontology"] = ontology_to_json(onto);
    return fnv1a(j.dump());
  }

 private:
  void init_params() {
    std::mt19937_64 rng(tcfg.seed);
    const int d = cfg.d, ff = cfg.ff;
    params.add("embed/table", Tensor::uniform({cfg.vocab_size, d}, rng));
    init_encoder(params, "base", cfg.base_layers, d, ff, rng);
    params.add("crf/emit_w", Tensor::uniform({d, tags.size()}, rng));
    params.add("crf/emit_b", Tensor::zeros({tags.size()}));
    params.add("crf/trans", Tensor::zeros({tags.size() + 2, tags.size() + 2}));
    init_encoder(params, "dre", cfg.dre_layers, d, ff, rng);
    params.add("dre/wr", Tensor::uniform({num_relation_classes(), d, d}, rng));
    if (tcfg.disable_raat1) init_encoder(params, "raat1", cfg.raat_layers, d, ff, rng);
    else init_raat_encoder(params, "raat1", cfg.raat_layers, d, ff, dep_channels(), rng);
    params.add("etype/w", Tensor::uniform({num_event_types(), d}, rng));
    params.add("etype/b", Tensor::zeros({num_event_types()}));
    if (tcfg.disable_raat2) init_encoder(params, "raat2", cfg.raat_layers, d, ff, rng);
    else init_raat_encoder(params, "raat2", cfg.raat_layers, d, ff, dep_channels(), rng);
    params.add("role/table", Tensor::uniform({num_role_slots(), d}, rng));
    params.add("role/none", Tensor::uniform({1, d}, rng));
    params.add("arg/w", Tensor::uniform({num_role_slots(), d}, rng));
    params.add("arg/b", Tensor::zeros({num_role_slots(), 1}));
  }

  std::vector<std::pair<std::string, std::string>> role_slots_;
  std::map<std::pair<std::string, std::string>, int> role_slot_index_;
};

}  // namespace redee
