// Batch command surface: corpus generation, statistics, training, evaluation,
// prediction, ablation comparison, and the gradient diagnostic. Every run is
// reproducible from its embedded config and seed.
//
// Exit codes: 0 success, 1 data error, 2 config error, 3 numeric error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "redee/ablation.hpp"
#include "redee/grad_check.hpp"
#include "redee/run_config.hpp"
#include "redee/stats.hpp"
#include "redee/synth.hpp"
#include "redee/trainer.hpp"

namespace fs = std::filesystem;
using namespace redee;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool print_config = false;
  bool force = false;
};

RunConfig effective_config(const GlobalArgs& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg = load_run_config(g.config_path);
  if (g.seed_set) cfg.seed = g.seed;
  cfg.propagate_seed();
  return cfg;
}

EventOntology load_or_default_ontology(const RunConfig& cfg) {
  if (cfg.ontology_path.empty()) return default_synth_ontology();
  EventOntology onto = load_ontology(cfg.ontology_path);
  auto violations = validate_ontology(onto);
  if (!violations.empty()) throw DataError("ontology: " + violations.front());
  return onto;
}

// Run directory named by timestamp and seed unless --out pins it.
fs::path make_run_dir(const GlobalArgs& g, const RunConfig& cfg, const std::string& command) {
  fs::path dir;
  if (!g.out.empty()) {
    dir = g.out;
  } else {
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::localtime(&now));
    dir = fs::path("runs") / (std::string(stamp) + "-" + command + "-seed" + std::to_string(cfg.seed));
  }
  fs::create_directories(dir);
  return dir;
}

void write_effective_config(const RunConfig& cfg, const fs::path& dir) {
  std::ofstream out(dir / "config.json");
  out << run_config_to_json(cfg).dump(2) << '\n';
}

Dataset load_split(const std::string& path, const EventOntology& onto, const RunConfig& cfg,
                   const std::string& split) {
  return ingest_dataset(path, onto, cfg.model.limits, cfg.joiner(), split);
}

int cmd_gen_data(const GlobalArgs& g) {
  RunConfig cfg = effective_config(g);
  EventOntology onto = load_or_default_ontology(cfg);
  fs::path dir = make_run_dir(g, cfg, "gen-data");
  write_effective_config(cfg, dir);

  nlohmann::json manifest;
  manifest["seed"] = cfg.seed;
  const int dev_docs = std::max(1, cfg.synth.num_docs / 5);
  struct Split {
    const char* name;
    int docs;
    std::uint64_t seed_offset;
  };
  for (const Split& sp : {Split{"train", cfg.synth.num_docs, 0}, Split{"dev", dev_docs, 1},
                          Split{"test", dev_docs, 2}}) {
    SynthConfig scfg = cfg.synth;
    scfg.num_docs = sp.docs;
    scfg.seed = cfg.seed + sp.seed_offset;
    SynthManifest mf;
    Dataset ds = generate_synthetic_corpus(scfg, onto, sp.name, &mf);
    write_dataset(ds, (dir / (std::string(sp.name) + ".jsonl")).string());
    manifest[sp.name] = {{"docs", mf.num_docs},
                         {"records", mf.num_records},
                         {"mean_events_per_doc", mf.mean_events_per_doc},
                         {"mean_scatter", mf.mean_scatter},
                         {"multi_event_fraction", mf.multi_event_fraction},
                         {"shared_argument_fraction", mf.shared_argument_fraction}};
  }
  std::ofstream mout(dir / "manifest.json");
  mout << manifest.dump(2) << '\n';
  std::cout << "wrote train/dev/test + manifest under " << dir.string() << "\n";
  return 0;
}

int cmd_stats(const GlobalArgs& g, const std::vector<std::string>& data_paths) {
  RunConfig cfg = effective_config(g);
  EventOntology onto = load_or_default_ontology(cfg);
  RelationSchema schema = derive_relation_schema(onto);
  std::vector<std::string> paths = data_paths;
  if (paths.empty()) {
    for (const auto& p : {cfg.train_path, cfg.dev_path, cfg.test_path})
      if (!p.empty()) paths.push_back(p);
  }
  if (paths.empty()) throw ConfigError("stats: no dataset paths given");
  std::vector<Dataset> datasets;
  datasets.reserve(paths.size());
  for (const auto& p : paths) {
    std::string split = fs::path(p).stem().string();
    datasets.push_back(load_split(p, onto, cfg, split));
  }
  std::vector<const Dataset*> views;
  for (const auto& d : datasets) views.push_back(&d);
  RelationStats st = relation_statistics(views, onto, schema);
  if (g.out.empty()) {
    write_relation_stats_tsv(st, std::cout);
  } else {
    fs::create_directories(fs::path(g.out));
    std::ofstream out(fs::path(g.out) / "stats.tsv");
    write_relation_stats_tsv(st, out);
    std::cout << "wrote " << (fs::path(g.out) / "stats.tsv").string() << "\n";
  }
  return 0;
}

int cmd_train(const GlobalArgs& g, const std::string& ablate) {
  RunConfig cfg = effective_config(g);
  if (ablate == "raat1") cfg.training.disable_raat1 = true;
  else if (ablate == "raat2") cfg.training.disable_raat2 = true;
  else if (ablate == "both") cfg.training.disable_raat1 = cfg.training.disable_raat2 = true;
  else if (!ablate.empty()) throw ConfigError("train: unknown --ablate value " + ablate);
  if (cfg.train_path.empty()) throw ConfigError("train: train_path not set");
  EventOntology onto = load_or_default_ontology(cfg);
  fs::path dir = make_run_dir(g, cfg, "train");
  write_effective_config(cfg, dir);

  Dataset train_set = load_split(cfg.train_path, onto, cfg, "train");
  Dataset dev_set;
  bool has_dev = !cfg.dev_path.empty();
  if (has_dev) dev_set = load_split(cfg.dev_path, onto, cfg, "dev");

  TrainResult res = train(train_set, has_dev ? &dev_set : nullptr, onto, cfg.model, cfg.training);
  res.model->params.save((dir / "checkpoint.bin").string(), res.model->config_hash());
  std::ofstream mlog(dir / "metrics.tsv");
  write_metric_log_tsv(res.log, mlog);
  std::cout << "trained " << res.log.size() << " epochs, best epoch " << res.best_epoch
            << "; artifacts under " << dir.string() << "\n";
  return 0;
}

std::shared_ptr<PipelineModel> load_model(const RunConfig& cfg, const EventOntology& onto,
                                          const std::string& checkpoint, bool force) {
  auto model = std::make_shared<PipelineModel>(cfg.model, cfg.training, onto);
  model->params = ParamStore::load(checkpoint, model->config_hash(), force);
  return model;
}

int cmd_eval(const GlobalArgs& g, const std::string& checkpoint, bool analysis) {
  RunConfig cfg = effective_config(g);
  if (cfg.test_path.empty()) throw ConfigError("eval: test_path not set");
  EventOntology onto = load_or_default_ontology(cfg);
  fs::path dir = make_run_dir(g, cfg, "eval");
  write_effective_config(cfg, dir);
  auto model = load_model(cfg, onto, checkpoint, g.force);
  Dataset test_set = load_split(cfg.test_path, onto, cfg, "test");
  auto preds = predict_dataset(*model, test_set);
  EvalReport rep = evaluate_predictions(preds, test_set);
  std::ofstream rout(dir / "report.tsv");
  write_report_tsv(rep, rout);
  if (analysis) {
    ScatterQuartiles q = scatter_quartiles(preds, test_set);
    std::ofstream qout(dir / "quartiles.tsv");
    write_quartiles_tsv(q, qout);
    SingleMultiSplit sm = single_multi_split(preds, test_set);
    std::ofstream smout(dir / "single_multi.tsv");
    write_single_multi_tsv(sm, rep, smout);
  }
  std::cout << "micro P=" << rep.micro.p << " R=" << rep.micro.r << " F1=" << rep.micro.f1
            << "; report under " << dir.string() << "\n";
  return 0;
}

int cmd_predict(const GlobalArgs& g, const std::string& checkpoint, const std::string& data) {
  RunConfig cfg = effective_config(g);
  std::string path = data.empty() ? cfg.test_path : data;
  if (path.empty()) throw ConfigError("predict: no input data path");
  EventOntology onto = load_or_default_ontology(cfg);
  fs::path dir = make_run_dir(g, cfg, "predict");
  write_effective_config(cfg, dir);
  auto model = load_model(cfg, onto, checkpoint, g.force);
  Dataset ds = load_split(path, onto, cfg, "predict");
  std::ofstream out(dir / "predictions.jsonl");
  for (const auto& ad : ds.docs) {
    nlohmann::json j;
    j["doc_id"] = ad.doc.doc_id;
    j["records"] = nlohmann::json::array();
    for (const auto& r : predict(*model, ad)) {
      nlohmann::json jr;
      jr["event_type"] = r.event_type;
      jr["args"] = r.args;  // argument values are normalized surfaces
      j["records"].push_back(std::move(jr));
    }
    out << j.dump() << '\n';
  }
  std::cout << "wrote " << (dir / "predictions.jsonl").string() << "\n";
  return 0;
}

int cmd_ablate(const GlobalArgs& g) {
  RunConfig cfg = effective_config(g);
  if (cfg.train_path.empty() || cfg.test_path.empty())
    throw ConfigError("ablate: train_path and test_path must be set");
  EventOntology onto = load_or_default_ontology(cfg);
  fs::path dir = make_run_dir(g, cfg, "ablate");
  write_effective_config(cfg, dir);
  Dataset train_set = load_split(cfg.train_path, onto, cfg, "train");
  Dataset test_set = load_split(cfg.test_path, onto, cfg, "test");
  Dataset dev_set;
  bool has_dev = !cfg.dev_path.empty();
  if (has_dev) dev_set = load_split(cfg.dev_path, onto, cfg, "dev");
  auto rows =
      ablation_compare(train_set, has_dev ? &dev_set : nullptr, test_set, onto, cfg.model, cfg.training);
  std::ofstream out(dir / "ablation.tsv");
  write_ablation_tsv(rows, out);
  write_ablation_tsv(rows, std::cout);
  return 0;
}

// Finite-difference sweep over the differentiable ops at small dimensions.
int cmd_gradcheck(double tolerance) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  auto run = [&](const std::string& name, ParamStore& ps,
                 const std::function<VarPtr(Tape&, ParamStore&)>& fwd) {
    auto eval = [&](bool accumulate) {
      Tape t;
      VarPtr loss = fwd(t, ps);
      double v = loss->value.at(0);
      if (accumulate) t.backward(loss);
      return v;
    };
    GradCheckReport rep = grad_check(ps, eval);
    worst = std::max(worst, rep.max_err);
    std::cout << name << ": max rel err " << rep.max_err << "\n";
  };

  {
    ParamStore ps;
    std::mt19937_64 init(1);
    init_transformer_block(ps, "blk", 6, 8, init);
    ps.add("x", Tensor::uniform({5, 6}, rng, -1, 1));
    run("transformer_block", ps, [](Tape& t, ParamStore& p) {
      auto y = transformer_block(t, p, "blk", t.param(p, "x"), 2);
      std::mt19937_64 wseed(9);
      Tensor w = Tensor::uniform(y->value.shape, wseed, -1, 1);
      return t.sum_all(t.mul_mask(y, w));
    });
  }
  {
    ParamStore ps;
    ps.add("em", Tensor::uniform({4, 3}, rng, -1, 1));
    ps.add("tr", Tensor::uniform({5, 5}, rng, -1, 1));
    run("crf_nll", ps, [](Tape& t, ParamStore& p) {
      return t.crf_nll(t.param(p, "em"), {0, 2, 1, 2}, t.param(p, "tr"));
    });
  }
  {
    ParamStore ps;
    ps.add("w", Tensor::uniform({3, 5, 5}, rng, -1, 1));
    ps.add("ei", Tensor::uniform({5}, rng, -1, 1));
    ps.add("ej", Tensor::uniform({5}, rng, -1, 1));
    run("biaffine", ps, [](Tape& t, ParamStore& p) {
      return t.cross_entropy_with_logits(t.biaffine(t.param(p, "w"), t.param(p, "ei"), t.param(p, "ej")), 1);
    });
  }
  {
    ParamStore ps;
    std::mt19937_64 init(2);
    init_raat_block(ps, "r/l0", 4, 6, 3, init);
    for (int c = 0; c < 3; ++c) ps.value("r/l0/bias").at(c) = 0.05 * (c + 1);
    ps.add("x", Tensor::uniform({5, 4}, rng, -1, 1));
    std::vector<Tensor> masks(3, Tensor({5, 5}));
    std::uniform_int_distribution<int> coin(0, 2);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        if (i == j) masks[0].at(i, j) = 1;
        else masks[static_cast<std::size_t>(coin(rng))].at(i, j) = 1;
      }
    run("raat_block", ps, [masks](Tape& t, ParamStore& p) {
      auto y = raat_encode(t, p, "r", 1, t.param(p, "x"), masks, 2);
      std::mt19937_64 wseed(11);
      Tensor w = Tensor::uniform(y->value.shape, wseed, -1, 1);
      return t.sum_all(t.mul_mask(y, w));
    });
  }

  std::cout << "overall max rel err " << worst << " (tolerance " << tolerance << ")\n";
  if (worst > tolerance) {
    std::cerr << "gradcheck: tolerance exceeded\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relation-augmented document-level event extraction"};

  GlobalArgs g;
  app.add_option("--config", g.config_path, "run configuration JSON");
  auto* seed_opt = app.add_option("--seed", g.seed, "global seed (overrides config)");
  app.add_option("--out", g.out, "output directory (default: runs/<timestamp>-<cmd>-seed<seed>)");
  app.add_flag("--print-config", g.print_config, "print the effective config and exit");
  app.add_flag("--force", g.force, "load checkpoints across config-hash mismatches");

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic train/dev/test corpus");
  std::vector<std::string> stats_paths;
  auto* stats = app.add_subcommand("stats", "relation statistics TSV per split");
  stats->add_option("data", stats_paths, "dataset files (default: paths from config)");
  std::string ablate_flag;
  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--ablate", ablate_flag, "disable raat1, raat2, or both")
      ->check(CLI::IsMember({"raat1", "raat2", "both"}));
  std::string eval_ckpt;
  bool eval_analysis = false;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  ev->add_flag("--analysis", eval_analysis, "also emit scatter-quartile and single/multi reports");
  std::string pred_ckpt, pred_data;
  auto* pr = app.add_subcommand("predict", "write per-document record predictions");
  pr->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
  pr->add_option("--data", pred_data, "input dataset (default: test_path from config)");
  auto* ab = app.add_subcommand("ablate", "train and compare the four ablation variants");
  double grad_tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  gc->add_option("--tolerance", grad_tol, "max relative error accepted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  g.seed_set = seed_opt->count() > 0;
  try {
    if (g.print_config) {
      std::cout << run_config_to_json(effective_config(g)).dump(2) << "\n";
      return 0;
    }
    if (gen->parsed()) return cmd_gen_data(g);
    if (stats->parsed()) return cmd_stats(g, stats_paths);
    if (tr->parsed()) return cmd_train(g, ablate_flag);
    if (ev->parsed()) return cmd_eval(g, eval_ckpt, eval_analysis);
    if (pr->parsed()) return cmd_predict(g, pred_ckpt, pred_data);
    if (ab->parsed()) return cmd_ablate(g);
    if (gc->parsed()) return cmd_gradcheck(grad_tol);
    std::cerr << "error: a subcommand is required (see --help)\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
