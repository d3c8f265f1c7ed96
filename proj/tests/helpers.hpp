#pragma once
// Shared test utilities: randomized tensors, scalarization of op outputs for
// gradient checks, and small brute-force oracles.

#include <random>
#include <vector>

#include "redee/gold.hpp"
#include "redee/ontology.hpp"
#include "redee/tape.hpp"
#include "redee/tensor.hpp"

namespace testutil {

inline redee::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0,
                                   double hi = 1.0) {
  return redee::Tensor::uniform(std::move(shape), rng, lo, hi);
}

// Fixed random projection to a scalar so every output coordinate affects the
// loss being gradient-checked.
inline redee::VarPtr scalarize(redee::Tape& t, const redee::VarPtr& out, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  redee::Tensor w = redee::Tensor::uniform(out->value.shape, rng, -1.0, 1.0);
  return t.sum_all(t.mul_mask(out, w));
}

// Brute-force linear-chain CRF score for one tag sequence under the
// (K+2)x(K+2) BOS/EOS transition layout.
inline double crf_path_score(const redee::Tensor& emissions, const redee::Tensor& trans,
                             const std::vector<int>& tags) {
  const int n = emissions.dim(0), k = emissions.dim(1);
  const int bos = k, eos = k + 1;
  double s = trans.at(bos, tags[0]) + emissions.at(0, tags[0]);
  for (int t = 1; t < n; ++t) s += trans.at(tags[t - 1], tags[t]) + emissions.at(t, tags[t]);
  s += trans.at(tags[n - 1], eos);
  return s;
}

// All K^n tag sequences of length n.
inline std::vector<std::vector<int>> all_tag_sequences(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(n), 0);
  while (true) {
    out.push_back(cur);
    int pos = n - 1;
    while (pos >= 0 && ++cur[static_cast<std::size_t>(pos)] == k) {
      cur[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return out;
}

inline redee::EventOntology pledge_ontology() {
  redee::EventOntology onto;
  onto.entity_types = {"ORG", "SHARE", "DATE"};
  redee::EventTypeDef et;
  et.name = "Pledge";
  et.roles = {"Pledger", "PledgedShares", "Pledgee", "StartDate", "EndDate"};
  et.role_entity_types = {{"Pledger", {"ORG"}},
                          {"PledgedShares", {"SHARE"}},
                          {"Pledgee", {"ORG"}},
                          {"StartDate", {"DATE"}},
                          {"EndDate", {"DATE"}}};
  onto.event_types = {et};
  return onto;
}

}  // namespace testutil
