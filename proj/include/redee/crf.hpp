#pragma once
// Viterbi decoding for the linear-chain CRF. The NLL counterpart lives on the
// tape (Tape::crf_nll); this is inference-only and allocation-light.

#include <stdexcept>
#include <vector>

#include "redee/tensor.hpp"

namespace redee {

// Argmax tag sequence. Transitions are (K+2)x(K+2) with BOS=K, EOS=K+1.
// Ties break toward the lower tag index.
inline std::vector<int> crf_viterbi(const Tensor& emissions, const Tensor& trans) {
  if (emissions.ndim() != 2) throw std::invalid_argument("crf_viterbi: emissions must be 2-D");
  const int n = emissions.dim(0), k = emissions.dim(1);
  if (n < 1) throw std::invalid_argument("crf_viterbi: empty sequence");
  if (trans.ndim() != 2 || trans.dim(0) != k + 2 || trans.dim(1) != k + 2)
    throw std::invalid_argument("crf_viterbi: transitions must be (K+2)x(K+2)");
  const int bos = k, eos = k + 1;

  std::vector<double> score(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) score[static_cast<std::size_t>(j)] = trans.at(bos, j) + emissions.at(0, j);

  std::vector<int> back(static_cast<std::size_t>((n > 1 ? n - 1 : 0) * k));
  std::vector<double> next(static_cast<std::size_t>(k));
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      double best = score[0] + trans.at(0, j);
      int best_i = 0;
      for (int i = 1; i < k; ++i) {
        double s = score[static_cast<std::size_t>(i)] + trans.at(i, j);
        if (s > best) {
          best = s;
          best_i = i;
        }
      }
      next[static_cast<std::size_t>(j)] = best + emissions.at(t, j);
      back[static_cast<std::size_t>((t - 1) * k + j)] = best_i;
    }
    score.swap(next);
  }

  int last = 0;
  double best_final = score[0] + trans.at(0, eos);
  for (int j = 1; j < k; ++j) {
    double s = score[static_cast<std::size_t>(j)] + trans.at(j, eos);
    if (s > best_final) {
      best_final = s;
      last = j;
    }
  }

  std::vector<int> path(static_cast<std::size_t>(n));
  path[static_cast<std::size_t>(n - 1)] = last;
  for (int t = n - 2; t >= 0; --t)
    path[static_cast<std::size_t>(t)] = back[static_cast<std::size_t>(t * k + path[static_cast<std::size_t>(t + 1)])];
  return path;
}

}  // namespace redee
