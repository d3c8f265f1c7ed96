#pragma once
// Serializable run configuration: one JSON document carrying the global seed,
// paths, model dimensions, training settings, and generator settings. The
// effective config is embedded in every run directory.

#include <fstream>
#include <string>

#include <json.hpp>

#include "redee/errors.hpp"
#include "redee/model.hpp"
#include "redee/synth.hpp"

namespace redee {

struct RunConfig {
  int config_version = 1;
  std::uint64_t seed = 1;
  std::string ontology_path;  // empty: built-in synthetic ontology
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string tokenization = "char";  // surface joiner: char "" / whitespace " "
  ModelConfig model;
  TrainingConfig training;
  SynthConfig synth;

  std::string joiner() const { return tokenization == "whitespace" ? " " : ""; }

  // the one seed that drives everything unless sub-seeds are set explicitly
  void propagate_seed() {
    training.seed = seed;
    synth.seed = seed;
  }
};

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["config_version"] = c.config_version;
  j["seed"] = c.seed;
  j["ontology_path"] = c.ontology_path;
  j["train_path"] = c.train_path;
  j["dev_path"] = c.dev_path;
  j["test_path"] = c.test_path;
  j["tokenization"] = c.tokenization;
  j["model"] = {{"d", c.model.d},
                {"ff", c.model.ff},
                {"heads", c.model.heads},
                {"base_layers", c.model.base_layers},
                {"dre_layers", c.model.dre_layers},
                {"raat_layers", c.model.raat_layers},
                {"vocab_size", c.model.vocab_size},
                {"dropout", c.model.dropout},
                {"mirror_corelation", c.model.mirror_corelation},
                {"max_sentences", c.model.limits.max_sentences},
                {"max_sentence_len", c.model.limits.max_sentence_len}};
  j["training"] = {{"lambda1", c.training.lambda1},
                   {"lambda2", c.training.lambda2},
                   {"lambda3", c.training.lambda3},
                   {"lambda4", c.training.lambda4},
                   {"lr", c.training.lr},
                   {"batch_size", c.training.batch_size},
                   {"epochs", c.training.epochs},
                   {"teacher_forcing", c.training.teacher_forcing},
                   {"neg_ratio", c.training.neg_ratio},
                   {"max_paths", c.training.max_paths},
                   {"disable_raat1", c.training.disable_raat1},
                   {"disable_raat2", c.training.disable_raat2}};
  nlohmann::json events = nlohmann::json::object();
  for (const auto& [k, p] : c.synth.events_per_doc) events[std::to_string(k)] = p;
  j["synth"] = {{"num_docs", c.synth.num_docs},
                {"vocab_size", c.synth.vocab_size},
                {"events_per_doc", events},
                {"scatter_level", c.synth.scatter_level},
                {"shared_argument_prob", c.synth.shared_argument_prob},
                {"fill_prob", c.synth.fill_prob},
                {"self_share_prob", c.synth.self_share_prob},
                {"multi_token_prob", c.synth.multi_token_prob}};
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("config_version")) c.config_version = j.at("config_version").get<int>();
    if (c.config_version != 1) throw ConfigError("config: unsupported config_version");
    auto opt = [&](const char* key, auto& slot) {
      if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    opt("seed", c.seed);
    opt("ontology_path", c.ontology_path);
    opt("train_path", c.train_path);
    opt("dev_path", c.dev_path);
    opt("test_path", c.test_path);
    opt("tokenization", c.tokenization);
    if (j.contains("model")) {
      const auto& m = j.at("model");
      auto mopt = [&](const char* key, auto& slot) {
        if (m.contains(key)) slot = m.at(key).get<std::decay_t<decltype(slot)>>();
      };
      mopt("d", c.model.d);
      mopt("ff", c.model.ff);
      mopt("heads", c.model.heads);
      mopt("base_layers", c.model.base_layers);
      mopt("dre_layers", c.model.dre_layers);
      mopt("raat_layers", c.model.raat_layers);
      mopt("vocab_size", c.model.vocab_size);
      mopt("dropout", c.model.dropout);
      mopt("mirror_corelation", c.model.mirror_corelation);
      mopt("max_sentences", c.model.limits.max_sentences);
      mopt("max_sentence_len", c.model.limits.max_sentence_len);
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      auto topt = [&](const char* key, auto& slot) {
        if (t.contains(key)) slot = t.at(key).get<std::decay_t<decltype(slot)>>();
      };
      topt("lambda1", c.training.lambda1);
      topt("lambda2", c.training.lambda2);
      topt("lambda3", c.training.lambda3);
      topt("lambda4", c.training.lambda4);
      topt("lr", c.training.lr);
      topt("batch_size", c.training.batch_size);
      topt("epochs", c.training.epochs);
      topt("teacher_forcing", c.training.teacher_forcing);
      topt("neg_ratio", c.training.neg_ratio);
      topt("max_paths", c.training.max_paths);
      topt("disable_raat1", c.training.disable_raat1);
      topt("disable_raat2", c.training.disable_raat2);
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      auto sopt = [&](const char* key, auto& slot) {
        if (s.contains(key)) slot = s.at(key).get<std::decay_t<decltype(slot)>>();
      };
      sopt("num_docs", c.synth.num_docs);
      sopt("vocab_size", c.synth.vocab_size);
      sopt("scatter_level", c.synth.scatter_level);
      sopt("shared_argument_prob", c.synth.shared_argument_prob);
      sopt("fill_prob", c.synth.fill_prob);
      sopt("self_share_prob", c.synth.self_share_prob);
      sopt("multi_token_prob", c.synth.multi_token_prob);
      if (s.contains("events_per_doc")) {
        c.synth.events_per_doc.clear();
        for (const auto& [k, p] : s.at("events_per_doc").items())
          c.synth.events_per_doc[std::stoi(k)] = p.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
  return run_config_from_json(j);
}

}  // namespace redee
