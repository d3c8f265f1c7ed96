#pragma once
// Transformer building blocks on the tape: linear, multi-head scaled-dot
// attention, and post-norm encoder blocks. An optional additive score matrix
// hook lets relation-augmented variants reuse the same attention core.

#include <random>
#include <string>

#include "redee/tape.hpp"

namespace redee {

inline VarPtr linear(Tape& t, const VarPtr& x, const VarPtr& w, const VarPtr& b) {
  return t.add_row_bias(t.matmul(x, w), b);
}

// Multi-head attention without output projection. extra_score, when present,
// is a full-width (n,n) matrix added to every head's scores; mask is an
// additive pre-softmax constant (e.g. -1e9 on padded positions).
inline VarPtr attention(Tape& t, const VarPtr& x, const VarPtr& wq, const VarPtr& wk, const VarPtr& wv, int heads,
                        const VarPtr& extra_score = nullptr, const Tensor* mask = nullptr) {
  const int d = x->value.dim(1);
  if (heads < 1 || d % heads != 0) throw std::invalid_argument("attention: heads must divide width");
  const int dh = d / heads;
  VarPtr q = t.matmul(x, wq);
  VarPtr k = t.matmul(x, wk);
  VarPtr v = t.matmul(x, wv);
  std::vector<VarPtr> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    VarPtr qh = t.slice_cols(q, h * dh, (h + 1) * dh);
    VarPtr kh = t.slice_cols(k, h * dh, (h + 1) * dh);
    VarPtr vh = t.slice_cols(v, h * dh, (h + 1) * dh);
    VarPtr s = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    if (extra_score) s = t.add(s, extra_score);
    if (mask) s = t.add_const(s, *mask);
    outs.push_back(t.matmul(t.softmax_rows(s), vh));
  }
  return heads == 1 ? outs[0] : t.concat_cols(outs);
}

inline void init_transformer_block(ParamStore& ps, const std::string& prefix, int d, int ff, std::mt19937_64& rng) {
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

// Self-attention + feed-forward, residual and layer norm around each sublayer.
inline VarPtr transformer_block(Tape& t, ParamStore& ps, const std::string& prefix, const VarPtr& x, int heads,
                                double dropout = 0.0, std::mt19937_64* rng = nullptr) {
  VarPtr attn = attention(t, x, t.param(ps, prefix + "/wq"), t.param(ps, prefix + "/wk"),
                          t.param(ps, prefix + "/wv"), heads);
  if (dropout > 0.0 && rng) attn = t.dropout(attn, dropout, *rng);
  VarPtr x1 = t.layer_norm(t.add(x, attn), t.param(ps, prefix + "/ln1_g"), t.param(ps, prefix + "/ln1_b"));
  VarPtr h = t.relu(linear(t, x1, t.param(ps, prefix + "/ff_w1"), t.param(ps, prefix + "/ff_b1")));
  VarPtr ffo = linear(t, h, t.param(ps, prefix + "/ff_w2"), t.param(ps, prefix + "/ff_b2"));
  if (dropout > 0.0 && rng) ffo = t.dropout(ffo, dropout, *rng);
  return t.layer_norm(t.add(x1, ffo), t.param(ps, prefix + "/ln2_g"), t.param(ps, prefix + "/ln2_b"));
}

inline void init_encoder(ParamStore& ps, const std::string& prefix, int layers, int d, int ff, std::mt19937_64& rng) {
  for (int l = 0; l < layers; ++l) init_transformer_block(ps, prefix + "/l" + std::to_string(l), d, ff, rng);
}

inline VarPtr encode(Tape& t, ParamStore& ps, const std::string& prefix, int layers, const VarPtr& x, int heads,
                     double dropout = 0.0, std::mt19937_64* rng = nullptr) {
  VarPtr h = x;
  for (int l = 0; l < layers; ++l)
    h = transformer_block(t, ps, prefix + "/l" + std::to_string(l), h, heads, dropout, rng);
  return h;
}

}  // namespace redee
