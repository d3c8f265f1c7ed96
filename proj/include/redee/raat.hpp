#pragma once
// Relation-augmented attention: a transformer block whose attention scores
// receive per-channel bilinear bias terms gated by the binary dependency
// tensor. The relation score matrix is computed once at full width and added
// to every head of the standard scaled-dot path.

#include <string>
#include <vector>

#include "redee/dependency.hpp"
#include "redee/nn.hpp"
#include "redee/tape.hpp"

namespace redee {

inline bool all_zero(const Tensor& t) {
  for (double v : t.data)
    if (v != 0.0) return false;
  return true;
}

// S_a = sum_i (X W_rq M[i] (X W_rk)^T ⊙ T[i]) / sqrt(d) + sum_i bias_i T[i].
// Per-channel bias lands only where that channel is active.
inline VarPtr raat_scores(Tape& t, ParamStore& ps, const std::string& prefix, const VarPtr& x,
                          const std::vector<Tensor>& masks) {
  const int d = x->value.dim(1);
  VarPtr qr = t.matmul(x, t.param(ps, prefix + "/wrq"));
  VarPtr kr = t.matmul(x, t.param(ps, prefix + "/wrk"));
  VarPtr acc;
  for (std::size_t c = 0; c < masks.size(); ++c) {
    if (all_zero(masks[c])) continue;  // inactive channel contributes nothing
    VarPtr m = t.param(ps, prefix + "/m" + std::to_string(c));
    VarPtr term = t.mul_mask(t.matmul_nt(t.matmul(qr, m), kr), masks[c]);
    acc = acc ? t.add(acc, term) : term;
  }
  const int n = x->value.dim(0);
  if (!acc) acc = t.constant(Tensor({n, n}));  // every channel empty
  VarPtr sa = t.scale(acc, 1.0 / std::sqrt(static_cast<double>(d)));
  return t.add(sa, t.weighted_sum_masks(t.param(ps, prefix + "/bias"), masks));
}

inline VarPtr raat_attention(Tape& t, ParamStore& ps, const std::string& prefix, const VarPtr& x,
                             const std::vector<Tensor>& masks, int heads, const Tensor* pad_mask = nullptr) {
  if (masks.empty()) throw std::invalid_argument("raat_attention: no dependency channels");
  if (static_cast<int>(masks.size()) != ps.value(prefix + "/bias").dim(0))
    throw std::invalid_argument("raat_attention: channel count does not match parameters");
  VarPtr sa = raat_scores(t, ps, prefix, x, masks);
  return attention(t, x, t.param(ps, prefix + "/wq"), t.param(ps, prefix + "/wk"), t.param(ps, prefix + "/wv"),
                   heads, sa, pad_mask);
}

inline void init_raat_block(ParamStore& ps, const std::string& prefix, int d, int ff, int channels,
                            std::mt19937_64& rng) {
  ps.add(prefix + "/wrq", Tensor::uniform({d, d}, rng));
  ps.add(prefix + "/wrk", Tensor::uniform({d, d}, rng));
  for (int c = 0; c < channels; ++c) ps.add(prefix + "/m" + std::to_string(c), Tensor::uniform({d, d}, rng));
  ps.add(prefix + "/bias", Tensor::zeros({channels}));
  ps.add(prefix + "/wq", Tensor::uniform({d, d}, rng));
  ps.add(prefix + "/wk", Tensor::uniform({d, d}, rng));
  ps.add(prefix + "/wv", Tensor::uniform({d, d}, rng));
  ps.add(prefix + "/ln1_g", Tensor::full({d}, 1.0));
  ps.add(prefix + "/ln1_b", Tensor::zeros({d}));
  ps.add(prefix + "/ff_w1", Tensor::uniform({d, ff}, rng));
  ps.add(prefix + "/ff_b1", Tensor::zeros({ff}));
  ps.add(prefix + "/ff_w2", Tensor::uniform({ff, d}, rng));
  ps.add(prefix + "/ff_b2", Tensor::zeros({d}));
  ps.add(prefix + "/ln2_g", Tensor::full({d}, 1.0));
  ps.add(prefix + "/ln2_b", Tensor::zeros({d}));
}

inline VarPtr raat_block(Tape& t, ParamStore& ps, const std::string& prefix, const VarPtr& x,
                         const std::vector<Tensor>& masks, int heads, double dropout = 0.0,
                         std::mt19937_64* rng = nullptr) {
  VarPtr attn = raat_attention(t, ps, prefix, x, masks, heads);
  if (dropout > 0.0 && rng) attn = t.dropout(attn, dropout, *rng);
  VarPtr x1 = t.layer_norm(t.add(x, attn), t.param(ps, prefix + "/ln1_g"), t.param(ps, prefix + "/ln1_b"));
  VarPtr h = t.relu(linear(t, x1, t.param(ps, prefix + "/ff_w1"), t.param(ps, prefix + "/ff_b1")));
  VarPtr ffo = linear(t, h, t.param(ps, prefix + "/ff_w2"), t.param(ps, prefix + "/ff_b2"));
  if (dropout > 0.0 && rng) ffo = t.dropout(ffo, dropout, *rng);
  return t.layer_norm(t.add(x1, ffo), t.param(ps, prefix + "/ln2_g"), t.param(ps, prefix + "/ln2_b"));
}

inline void init_raat_encoder(ParamStore& ps, const std::string& prefix, int layers, int d, int ff, int channels,
                              std::mt19937_64& rng) {
  for (int l = 0; l < layers; ++l)
    init_raat_block(ps, prefix + "/l" + std::to_string(l), d, ff, channels, rng);
}

// Identical blocks stacked; zero layers is the identity. One parameter set
// serves any node count.
inline VarPtr raat_encode(Tape& t, ParamStore& ps, const std::string& prefix, int layers, const VarPtr& x,
                          const std::vector<Tensor>& masks, int heads, double dropout = 0.0,
                          std::mt19937_64* rng = nullptr) {
  VarPtr h = x;
  for (int l = 0; l < layers; ++l)
    h = raat_block(t, ps, prefix + "/l" + std::to_string(l), h, masks, heads, dropout, rng);
  return h;
}

}  // namespace redee
