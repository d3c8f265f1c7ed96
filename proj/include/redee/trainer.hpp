#pragma once
// Multi-task training: per document, all four stage losses are combined and
// backpropagated under teacher forcing; Adam steps once per batch. The best
// epoch is selected by dev micro-F1 (the last epoch when no dev set is
// given). Deterministic for a fixed seed.

#include <iomanip>
#include <memory>
#include <sstream>

#include "redee/metrics.hpp"
#include "redee/pipeline.hpp"

namespace redee {

struct EpochLog {
  int epoch = 0;
  double l_ne = 0, l_dre = 0, l_pred = 0, l_a = 0;
  double dev_p = 0, dev_r = 0, dev_f1 = 0;
};

struct TrainResult {
  std::shared_ptr<PipelineModel> model;  // parameters restored to the best epoch
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

inline std::vector<std::vector<EventRecord>> predict_dataset(PipelineModel& m, const Dataset& ds) {
  std::vector<std::vector<EventRecord>> out;
  out.reserve(ds.docs.size());
  for (const auto& ad : ds.docs) out.push_back(predict(m, ad));
  return out;
}

inline TrainResult train(const Dataset& train_set, const Dataset* dev_set, const EventOntology& onto,
                         const ModelConfig& mc, const TrainingConfig& tc) {
  if (train_set.docs.empty()) throw DataError("train: empty training set");
  TrainResult result;
  result.model = std::make_shared<PipelineModel>(mc, tc, onto);
  PipelineModel& m = *result.model;

  std::vector<GoldLabels> golds;
  golds.reserve(train_set.docs.size());
  for (const auto& ad : train_set.docs) golds.push_back(derive_gold_labels(ad, m.onto, m.schema, m.tags));

  ParamStore best_params = m.params;
  double best_f1 = -1.0;
  const int n = static_cast<int>(train_set.docs.size());

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::mt19937_64 rng(tc.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch));
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog log;
    log.epoch = epoch;
    int in_batch = 0;
    for (int pos = 0; pos < n; ++pos) {
      int di = order[static_cast<std::size_t>(pos)];
      DocLosses dl;
      try {
        dl = train_document(m, train_set.docs[static_cast<std::size_t>(di)],
                            golds[static_cast<std::size_t>(di)], rng);
      } catch (const std::exception& e) {
        throw std::runtime_error("train: epoch " + std::to_string(epoch) + ", doc '" +
                                 train_set.docs[static_cast<std::size_t>(di)].doc.doc_id + "': " + e.what());
      }
      log.l_ne += dl.l_ne;
      log.l_dre += dl.l_dre;
      log.l_pred += dl.l_pred;
      log.l_a += dl.l_a;
      if (++in_batch == tc.batch_size) {
        m.params.adam_step(tc.lr);
        in_batch = 0;
      }
    }
    if (in_batch > 0) m.params.adam_step(tc.lr);
    log.l_ne /= n;
    log.l_dre /= n;
    log.l_pred /= n;
    log.l_a /= n;

    if (dev_set && !dev_set->docs.empty()) {
      EvalReport rep = evaluate_predictions(predict_dataset(m, *dev_set), *dev_set);
      log.dev_p = rep.micro.p;
      log.dev_r = rep.micro.r;
      log.dev_f1 = rep.micro.f1;
      if (rep.micro.f1 > best_f1) {
        best_f1 = rep.micro.f1;
        best_params = m.params;
        result.best_epoch = epoch;
      }
    } else {
      best_params = m.params;
      result.best_epoch = epoch;
    }
    result.log.push_back(log);
  }
  m.params = best_params;
  return result;
}

inline void write_metric_log_tsv(const std::vector<EpochLog>& log, std::ostream& out) {
  out << "epoch\tl_ne\tl_dre\tl_pred\tl_a\tdev_p\tdev_r\tdev_f1\n";
  for (const auto& row : log)
    out << row.epoch << '\t' << row.l_ne << '\t' << row.l_dre << '\t' << row.l_pred << '\t' << row.l_a << '\t'
        << row.dev_p << '\t' << row.dev_r << '\t' << row.dev_f1 << '\n';
}

}  // namespace redee
