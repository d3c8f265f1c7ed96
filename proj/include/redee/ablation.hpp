#pragma once
// Ablation comparison: trains the full model and the three reduced variants
// under one seed and reports P/R/F1 deltas against the full model.

#include <array>
#include <iomanip>

#include "redee/trainer.hpp"

namespace redee {

struct AblationRow {
  std::string variant;
  double p = 0, r = 0, f1 = 0;     // absolute scores
  double dp = 0, dr = 0, df1 = 0;  // deltas vs the full model
};

inline std::vector<AblationRow> ablation_compare(const Dataset& train_set, const Dataset* dev_set,
                                                 const Dataset& eval_set, const EventOntology& onto,
                                                 const ModelConfig& mc, const TrainingConfig& tc) {
  struct Variant {
    const char* name;
    bool no1, no2;
  };
  const std::array<Variant, 4> variants{{{"full", false, false},
                                         {"-RAAT-1", true, false},
                                         {"-RAAT-2", false, true},
                                         {"-RAAT-1&2", true, true}}};
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    TrainingConfig cfg = tc;
    cfg.disable_raat1 = v.no1;
    cfg.disable_raat2 = v.no2;
    TrainResult res = train(train_set, dev_set, onto, mc, cfg);
    EvalReport rep = evaluate_predictions(predict_dataset(*res.model, eval_set), eval_set);
    AblationRow row;
    row.variant = v.name;
    row.p = rep.micro.p;
    row.r = rep.micro.r;
    row.f1 = rep.micro.f1;
    rows.push_back(row);
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    rows[i].dp = rows[i].p - rows[0].p;
    rows[i].dr = rows[i].r - rows[0].r;
    rows[i].df1 = rows[i].f1 - rows[0].f1;
  }
  return rows;
}

// Four rows: the full model in absolute terms, ablated variants as signed
// deltas against it.
inline void write_ablation_tsv(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "variant\tprecision\trecall\tf1\n";
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i == 0) {
      out << r.variant << '\t' << r.p << '\t' << r.r << '\t' << r.f1 << '\n';
    } else {
      out << r.variant << '\t' << std::showpos << r.dp << '\t' << r.dr << '\t' << r.df1 << std::noshowpos
          << '\n';
    }
  }
}

}  // namespace redee
