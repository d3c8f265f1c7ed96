#pragma once
// Reverse-mode tape over the fixed op set the models need. Each op records a
// closure that pulls the output gradient into its parents; backward() walks
// the tape once in reverse creation order. 64-bit floats throughout; any
// non-finite op output is a hard error.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "redee/param_store.hpp"
#include "redee/tensor.hpp"

namespace redee {

struct TapeNode {
  Tensor value;
  Tensor grad;
  std::function<void()> backprop;  // empty for leaves
};

using VarPtr = std::shared_ptr<TapeNode>;

class Tape {
 public:
  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  VarPtr constant(Tensor v) { return make(std::move(v), {}); }
  VarPtr scalar(double v) { return constant(Tensor::scalar(v)); }

  // Parameter leaf tied to a store slot; gradients are flushed back into the
  // store when backward() runs. Repeated lookups share one leaf per tape.
  VarPtr param(ParamStore& ps, const std::string& name) {
    auto key = cache_key(ps, name);
    auto it = param_cache_.find(key);
    if (it != param_cache_.end()) return it->second;
    VarPtr leaf = make(ps.value(name), {});
    param_cache_.emplace(key, leaf);
    flushes_.push_back([leaf, &ps, name]() {
      Tensor& g = ps.grad(name);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += leaf->grad.data[i];
    });
    return leaf;
  }

  // Row gather straight out of a store table; avoids copying the full table
  // into the tape. Gradient rows are scatter-added on flush.
  VarPtr embedding(ParamStore& ps, const std::string& name, const std::vector<int>& ids) {
    const Tensor& table = ps.value(name);
    if (table.ndim() != 2) throw std::invalid_argument("embedding: table must be 2-D");
    const int d = table.dim(1);
    Tensor out({static_cast<int>(ids.size()), d});
    for (std::size_t r = 0; r < ids.size(); ++r) {
      int id = ids[r];
      if (id < 0 || id >= table.dim(0)) throw std::out_of_range("embedding: id out of range");
      std::copy_n(&table.data[static_cast<std::size_t>(id) * d], d, &out.data[r * d]);
    }
    VarPtr node = make(std::move(out), {});
    flushes_.push_back([node, &ps, name, ids]() {
      Tensor& g = ps.grad(name);
      const int dd = g.dim(1);
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (int c = 0; c < dd; ++c)
          g.data[static_cast<std::size_t>(ids[r]) * dd + c] += node->grad.data[r * dd + c];
    });
    return node;
  }

  VarPtr add(const VarPtr& a, const VarPtr& b) {
    require_same_shape(a, b, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
    VarPtr n = make(std::move(out), {a, b});
    n->backprop = [n_raw = n.get(), a, b]() {
      for (std::size_t i = 0; i < n_raw->grad.data.size(); ++i) {
        a->grad.data[i] += n_raw->grad.data[i];
        b->grad.data[i] += n_raw->grad.data[i];
      }
    };
    return n;
  }

  VarPtr scale(const VarPtr& a, double s) {
    Tensor out = a->value;
    for (double& v : out.data) v *= s;
    VarPtr n = make(std::move(out), {a});
    n->backprop = [n_raw = n.get(), a, s]() {
      for (std::size_t i = 0; i < n_raw->grad.data.size(); ++i) a->grad.data[i] += s * n_raw->grad.data[i];
    };
    return n;
  }

  VarPtr mul(const VarPtr& a, const VarPtr& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
    VarPtr n = make(std::move(out), {a, b});
    n->backprop = [n_raw = n.get(), a, b]() {
      for (std::size_t i = 0; i < n_raw->grad.data.size(); ++i) {
        a->grad.data[i] += b->value.data[i] * n_raw->grad.data[i];
        b->grad.data[i] += a->value.data[i] * n_raw->grad.data[i];
      }
    };
    return n;
  }

  VarPtr mul_mask(const VarPtr& a, const Tensor& mask) {
    if (!a->value.same_shape(mask)) throw std::invalid_argument("mul_mask: shape mismatch");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
    VarPtr n = make(std::move(out), {a});
    n->backprop = [n_raw = n.get(), a, mask]() {
      for (std::size_t i = 0; i < n_raw->grad.data.size(); ++i)
        a->grad.data[i] += mask.data[i] * n_raw->grad.data[i];
    };
    return n;
  }

  VarPtr add_const(const VarPtr& a, const Tensor& c) {
    if (!a->value.same_shape(c)) throw std::invalid_argument("add_const: shape mismatch");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += c.data[i];
    VarPtr n = make(std::move(out), {a});
    n->backprop = [n_raw = n.get(), a]() {
      for (std::size_t i = 0; i < n_raw->grad.data.size(); ++i) a->grad.data[i] += n_raw->grad.data[i];
    };
    return n;
  }

  // (n,d) + (d) broadcast over rows.
  VarPtr add_row_bias(const VarPtr& a, const VarPtr& bias) {
    if (a->value.ndim() != 2 || bias->value.ndim() != 1 || a->value.dim(1) != bias->value.dim(0))
      throw std::invalid_argument("add_row_bias: shape mismatch");
    const int rows = a->value.dim(0), cols = a->value.dim(1);
    Tensor out = a->value;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) out.at(i, j) += bias->value.at(j);
    VarPtr n = make(std::move(out), {a, bias});
    n->backprop = [n_raw = n.get(), a, bias, rows, cols]() {
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
          double g = n_raw->grad.at(i, j);
          a->grad.at(i, j) += g;
          bias->grad.at(j) += g;
        }
    };
    return n;
  }

  VarPtr matmul(const VarPtr& a, const VarPtr& b) {
    if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.dim(1) != b->value.dim(0))
      throw std::invalid_argument("matmul: shape mismatch " + a->value.shape_str() + " x " + b->value.shape_str());
    const int n = a->value.dim(0), k = a->value.dim(1), m = b->value.dim(1);
    Tensor out({n, m});
    {
      const double* pa = a->value.data.data();
      const double* pb = b->value.data.data();
      double* po = out.data.data();
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < k; ++p) {
          const double av = pa[i * k + p];
          if (av == 0.0) continue;
          const double* brow = pb + p * m;
          double* orow = po + i * m;
          for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    VarPtr node = make(std::move(out), {a, b});
    node->backprop = [nd = node.get(), a, b, n, k, m]() {
      // dA = dC B^T ; dB = A^T dC
      const double* g = nd->grad.data.data();
      const double* pa = a->value.data.data();
      const double* pb = b->value.data.data();
      double* ga = a->grad.data.data();
      double* gb = b->grad.data.data();
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < k; ++p) {
          const double* brow = pb + p * m;
          const double* grow = g + i * m;
          double acc = 0.0;
          for (int j = 0; j < m; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
          const double av = pa[i * k + p];
          if (av == 0.0) continue;
          double* gbrow = gb + p * m;
          for (int j = 0; j < m; ++j) gbrow[j] += av * grow[j];
        }
    };
    return node;
  }

  // a * b^T : (n,k) x (m,k) -> (n,m)
  VarPtr matmul_nt(const VarPtr& a, const VarPtr& b) {
    if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.dim(1) != b->value.dim(1))
      throw std::invalid_argument("matmul_nt: shape mismatch");
    const int n = a->value.dim(0), k = a->value.dim(1), m = b->value.dim(0);
    Tensor out({n, m});
    {
      const double* pa = a->value.data.data();
      const double* pb = b->value.data.data();
      double* po = out.data.data();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
          const double* arow = pa + i * k;
          const double* brow = pb + j * k;
          double s = 0.0;
          for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
          po[i * m + j] = s;
        }
    }
    VarPtr node = make(std::move(out), {a, b});
    node->backprop = [nd = node.get(), a, b, n, k, m]() {
      const double* g = nd->grad.data.data();
      const double* pa = a->value.data.data();
      const double* pb = b->value.data.data();
      double* ga = a->grad.data.data();
      double* gb = b->grad.data.data();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
          const double gij = g[i * m + j];
          if (gij == 0.0) continue;
          const double* arow = pa + i * k;
          const double* brow = pb + j * k;
          double* garow = ga + i * k;
          double* gbrow = gb + j * k;
          for (int p = 0; p < k; ++p) {
            garow[p] += gij * brow[p];
            gbrow[p] += gij * arow[p];
          }
        }
    };
    return node;
  }

  VarPtr slice_cols(const VarPtr& a, int c0, int c1) {
    if (a->value.ndim() != 2 || c0 < 0 || c1 > a->value.dim(1) || c0 >= c1)
      throw std::invalid_argument("slice_cols: bad range");
    const int rows = a->value.dim(0), w = c1 - c0;
    Tensor out({rows, w});
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < w; ++j) out.at(i, j) = a->value.at(i, c0 + j);
    VarPtr n = make(std::move(out), {a});
    n->backprop = [nd = n.get(), a, rows, w, c0]() {
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < w; ++j) a->grad.at(i, c0 + j) += nd->grad.at(i, j);
    };
    return n;
  }

  VarPtr concat_cols(const std::vector<VarPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const int rows = parts[0]->value.dim(0);
    int total = 0;
    for (const auto& p : parts) {
      if (p->value.ndim() != 2 || p->value.dim(0) != rows)
        throw std::invalid_argument("concat_cols: row mismatch");
      total += p->value.dim(1);
    }
    Tensor out({rows, total});
    int off = 0;
    for (const auto& p : parts) {
      const int w = p->value.dim(1);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < w; ++j) out.at(i, off + j) = p->value.at(i, j);
      off += w;
    }
    VarPtr n = make(std::move(out), parts);
    n->backprop = [nd = n.get(), parts, rows]() {
      int off2 = 0;
      for (const auto& p : parts) {
        const int w = p->value.dim(1);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < w; ++j) p->grad.at(i, j) += nd->grad.at(i, off2 + j);
        off2 += w;
      }
    };
    return n;
  }

  VarPtr concat_rows(const std::vector<VarPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    const int cols = parts[0]->value.cols();
    int total = 0;
    for (const auto& p : parts) {
      if (p->value.ndim() != 2 || p->value.dim(1) != cols)
        throw std::invalid_argument("concat_rows: column mismatch");
      total += p->value.dim(0);
    }
    Tensor out({total, cols});
    int off = 0;
    for (const auto& p : parts) {
      std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off) * cols);
      off += p->value.dim(0);
    }
    VarPtr n = make(std::move(out), parts);
    n->backprop = [nd = n.get(), parts, cols]() {
      int off2 = 0;
      for (const auto& p : parts) {
        const int r = p->value.dim(0);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < cols; ++j) p->grad.at(i, j) += nd->grad.at(off2 + i, j);
        off2 += r;
      }
    };
    return n;
  }

  VarPtr select_rows(const VarPtr& a, const std::vector<int>& rows) {
    if (a->value.ndim() != 2) throw std::invalid_argument("select_rows: need 2-D");
    const int d = a->value.dim(1);
    Tensor out({static_cast<int>(rows.size()), d});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] < 0 || rows[r] >= a->value.dim(0)) throw std::out_of_range("select_rows: index");
      for (int j = 0; j < d; ++j) out.at(static_cast<int>(r), j) = a->value.at(rows[r], j);
    }
    VarPtr n = make(std::move(out), {a});
    n->backprop = [nd = n.get(), a, rows, d]() {
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (int j = 0; j < d; ++j) a->grad.at(rows[r], j) += nd->grad.at(static_cast<int>(r), j);
    };
    return n;
  }

  VarPtr row(const VarPtr& a, int i) { return select_rows(a, {i}); }

  VarPtr flatten(const VarPtr& a) {
    Tensor out({static_cast<int>(a->value.numel())}, a->value.data);
    VarPtr n = make(std::move(out), {a});
    n->backprop = [nd = n.get(), a]() {
      for (std::size_t i = 0; i < nd->grad.data.size(); ++i) a->grad.data[i] += nd->grad.data[i];
    };
    return n;
  }

  // Per-dimension max over a row subset -> (1,d). Ties go to the earliest row.
  VarPtr max_over_rows(const VarPtr& a, const std::vector<int>& rows) {
    if (rows.empty()) throw std::invalid_argument("max_over_rows: empty span");
    if (a->value.ndim() != 2) throw std::invalid_argument("max_over_rows: need 2-D");
    const int d = a->value.dim(1);
    Tensor out({1, d});
    std::vector<int> winner(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      int best = rows[0];
      double bv = a->value.at(rows[0], j);
      for (std::size_t r = 1; r < rows.size(); ++r) {
        double v = a->value.at(rows[r], j);
        if (v > bv) {
          bv = v;
          best = rows[r];
        }
      }
      out.at(0, j) = bv;
      winner[static_cast<std::size_t>(j)] = best;
    }
    VarPtr n = make(std::move(out), {a});
    n->backprop = [nd = n.get(), a, winner, d]() {
      for (int j = 0; j < d; ++j) a->grad.at(winner[static_cast<std::size_t>(j)], j) += nd->grad.at(0, j);
    };
    return n;
  }

  VarPtr relu(const VarPtr& a) {
    Tensor out = a->value;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    VarPtr n = make(std::move(out), {a});
    n->backprop = [nd = n.get(), a]() {
      for (std::size_t i = 0; i < nd->grad.data.size(); ++i)
        if (a->value.data[i] > 0.0) a->grad.data[i] += nd->grad.data[i];
    };
    return n;
  }

  // Row-wise layer normalization with affine gain/bias.
  VarPtr layer_norm(const VarPtr& a, const VarPtr& gain, const VarPtr& bias, double eps = 1e-5) {
    if (a->value.ndim() != 2) throw std::invalid_argument("layer_norm: need 2-D");
    const int rows = a->value.dim(0), d = a->value.dim(1);
    if (gain->value.ndim() != 1 || gain->value.dim(0) != d || bias->value.ndim() != 1 || bias->value.dim(0) != d)
      throw std::invalid_argument("layer_norm: affine shape mismatch");
    Tensor out({rows, d});
    Tensor xhat({rows, d});
    std::vector<double> inv_sigma(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) {
      double mu = 0.0;
      for (int j = 0; j < d; ++j) mu += a->value.at(i, j);
      mu /= d;
      double var = 0.0;
      for (int j = 0; j < d; ++j) {
        double c = a->value.at(i, j) - mu;
        var += c * c;
      }
      var /= d;
      double is = 1.0 / std::sqrt(var + eps);
      inv_sigma[static_cast<std::size_t>(i)] = is;
      for (int j = 0; j < d; ++j) {
        double xh = (a->value.at(i, j) - mu) * is;
        xhat.at(i, j) = xh;
        out.at(i, j) = xh * gain->value.at(j) + bias->value.at(j);
      }
    }
    VarPtr n = make(std::move(out), {a, gain, bias});
    n->backprop = [nd = n.get(), a, gain, bias, xhat, inv_sigma, rows, d]() {
      for (int i = 0; i < rows; ++i) {
        double mean_h = 0.0, mean_hx = 0.0;
        for (int j = 0; j < d; ++j) {
          double h = nd->grad.at(i, j) * gain->value.at(j);
          mean_h += h;
          mean_hx += h * xhat.at(i, j);
        }
        mean_h /= d;
        mean_hx /= d;
        for (int j = 0; j < d; ++j) {
          double h = nd->grad.at(i, j) * gain->value.at(j);
          a->grad.at(i, j) += inv_sigma[static_cast<std::size_t>(i)] * (h - mean_h - xhat.at(i, j) * mean_hx);
          gain->grad.at(j) += nd->grad.at(i, j) * xhat.at(i, j);
          bias->grad.at(j) += nd->grad.at(i, j);
        }
      }
    };
    return n;
  }

  VarPtr softmax_rows(const VarPtr& a) {
    if (a->value.ndim() != 2) throw std::invalid_argument("softmax_rows: need 2-D");
    const int rows = a->value.dim(0), d = a->value.dim(1);
    Tensor out({rows, d});
    for (int i = 0; i < rows; ++i) {
      double m = a->value.at(i, 0);
      for (int j = 1; j < d; ++j) m = std::max(m, a->value.at(i, j));
      double s = 0.0;
      for (int j = 0; j < d; ++j) {
        double e = std::exp(a->value.at(i, j) - m);
        out.at(i, j) = e;
        s += e;
      }
      for (int j = 0; j < d; ++j) out.at(i, j) /= s;
    }
    VarPtr n = make(std::move(out), {a});
    n->backprop = [nd = n.get(), a, rows, d]() {
      for (int i = 0; i < rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += nd->grad.at(i, j) * nd->value.at(i, j);
        for (int j = 0; j < d; ++j)
          a->grad.at(i, j) += nd->value.at(i, j) * (nd->grad.at(i, j) - dot);
      }
    };
    return n;
  }

  // Sum_i bias[i] * mask[i] over channel masks -> (n,n) score offsets.
  VarPtr weighted_sum_masks(const VarPtr& bias, const std::vector<Tensor>& masks) {
    if (bias->value.ndim() != 1 || static_cast<std::size_t>(bias->value.dim(0)) != masks.size())
      throw std::invalid_argument("weighted_sum_masks: channel count mismatch");
    if (masks.empty()) throw std::invalid_argument("weighted_sum_masks: empty");
    Tensor out(masks[0].shape);
    for (std::size_t c = 0; c < masks.size(); ++c) {
      double b = bias->value.at(static_cast<int>(c));
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b * masks[c].data[i];
    }
    VarPtr n = make(std::move(out), {bias});
    n->backprop = [nd = n.get(), bias, masks]() {
      for (std::size_t c = 0; c < masks.size(); ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < masks[c].data.size(); ++i) acc += nd->grad.data[i] * masks[c].data[i];
        bias->grad.at(static_cast<int>(c)) += acc;
      }
    };
    return n;
  }

  // logits[k] = e_i^T W[k] e_j with W of shape (c,d,d); e_i, e_j are (1,d).
  VarPtr biaffine(const VarPtr& w, const VarPtr& ei, const VarPtr& ej) {
    if (w->value.ndim() != 3) throw std::invalid_argument("biaffine: W must be (c,d,d)");
    const int c = w->value.dim(0), d = w->value.dim(1);
    if (w->value.dim(2) != d || ei->value.numel() != d || ej->value.numel() != d)
      throw std::invalid_argument("biaffine: shape mismatch");
    Tensor out({c});
    {
      const double* pw = w->value.data.data();
      const double* pi = ei->value.data.data();
      const double* pj = ej->value.data.data();
      for (int k = 0; k < c; ++k) {
        const double* wk = pw + static_cast<std::size_t>(k) * d * d;
        double s = 0.0;
        for (int p = 0; p < d; ++p) {
          const double eip = pi[p];
          if (eip == 0.0) continue;
          const double* wrow = wk + p * d;
          double row = 0.0;
          for (int q = 0; q < d; ++q) row += wrow[q] * pj[q];
          s += eip * row;
        }
        out.at(k) = s;
      }
    }
    VarPtr n = make(std::move(out), {w, ei, ej});
    n->backprop = [nd = n.get(), w, ei, ej, c, d]() {
      const double* pw = w->value.data.data();
      const double* pi = ei->value.data.data();
      const double* pj = ej->value.data.data();
      double* gw = w->grad.data.data();
      double* gi = ei->grad.data.data();
      double* gj = ej->grad.data.data();
      for (int k = 0; k < c; ++k) {
        const double g = nd->grad.at(k);
        if (g == 0.0) continue;
        const double* wk = pw + static_cast<std::size_t>(k) * d * d;
        double* gwk = gw + static_cast<std::size_t>(k) * d * d;
        for (int p = 0; p < d; ++p) {
          const double eip = pi[p];
          const double geip = g * eip;
          const double* wrow = wk + p * d;
          double* gwrow = gwk + p * d;
          double acc = 0.0;
          for (int q = 0; q < d; ++q) {
            const double ejq = pj[q];
            gwrow[q] += geip * ejq;
            acc += wrow[q] * ejq;
            gj[q] += wrow[q] * geip;
          }
          gi[p] += g * acc;
        }
      }
    };
    return n;
  }

  // Per-row dot with a vector: (n,d) x (d) -> (n).
  VarPtr rowdot(const VarPtr& a, const VarPtr& v) {
    if (a->value.ndim() != 2 || v->value.ndim() != 1 || a->value.dim(1) != v->value.dim(0))
      throw std::invalid_argument("rowdot: shape mismatch");
    const int rows = a->value.dim(0), d = a->value.dim(1);
    Tensor out({rows});
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += a->value.at(i, j) * v->value.at(j);
      out.at(i) = s;
    }
    VarPtr n = make(std::move(out), {a, v});
    n->backprop = [nd = n.get(), a, v, rows, d]() {
      for (int i = 0; i < rows; ++i) {
        const double g = nd->grad.at(i);
        if (g == 0.0) continue;
        for (int j = 0; j < d; ++j) {
          a->grad.at(i, j) += g * v->value.at(j);
          v->grad.at(j) += g * a->value.at(i, j);
        }
      }
    };
    return n;
  }

  // Scalar broadcast over a 1-D vector.
  VarPtr add_scalar_bc(const VarPtr& a, const VarPtr& s) {
    if (a->value.ndim() != 1 || s->value.numel() != 1)
      throw std::invalid_argument("add_scalar_bc: shape mismatch");
    Tensor out = a->value;
    for (double& v : out.data) v += s->value.data[0];
    VarPtr n = make(std::move(out), {a, s});
    n->backprop = [nd = n.get(), a, s]() {
      for (std::size_t i = 0; i < nd->grad.data.size(); ++i) {
        a->grad.data[i] += nd->grad.data[i];
        s->grad.data[0] += nd->grad.data[i];
      }
    };
    return n;
  }

  // -log softmax(logits)[target] for 1-D logits.
  VarPtr cross_entropy_with_logits(const VarPtr& logits, int target) {
    if (logits->value.ndim() != 1) throw std::invalid_argument("cross_entropy: need 1-D logits");
    const int c = logits->value.dim(0);
    if (target < 0 || target >= c) throw std::out_of_range("cross_entropy: target");
    double lz = logsumexp(logits->value.data);
    VarPtr n = make(Tensor::scalar(lz - logits->value.at(target)), {logits});
    n->backprop = [nd = n.get(), logits, target, lz, c]() {
      const double g = nd->grad.data[0];
      for (int k = 0; k < c; ++k) {
        double p = std::exp(logits->value.at(k) - lz);
        logits->grad.at(k) += g * (p - (k == target ? 1.0 : 0.0));
      }
    };
    return n;
  }

  // Summed binary cross-entropy over 1-D logits against 0/1 targets.
  VarPtr bce_with_logits(const VarPtr& logits, const std::vector<double>& targets) {
    if (logits->value.ndim() != 1 || static_cast<std::size_t>(logits->value.dim(0)) != targets.size())
      throw std::invalid_argument("bce_with_logits: shape mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      double x = logits->value.data[i], y = targets[i];
      loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::fabs(x)));
    }
    VarPtr n = make(Tensor::scalar(loss), {logits});
    n->backprop = [nd = n.get(), logits, targets]() {
      const double g = nd->grad.data[0];
      for (std::size_t i = 0; i < targets.size(); ++i) {
        double x = logits->value.data[i];
        double sig = 1.0 / (1.0 + std::exp(-x));
        logits->grad.data[i] += g * (sig - targets[i]);
      }
    };
    return n;
  }

  VarPtr sum_all(const VarPtr& a) {
    double s = 0.0;
    for (double v : a->value.data) s += v;
    VarPtr n = make(Tensor::scalar(s), {a});
    n->backprop = [nd = n.get(), a]() {
      for (double& g : a->grad.data) g += nd->grad.data[0];
    };
    return n;
  }

  VarPtr add_scalars(const std::vector<VarPtr>& xs) {
    if (xs.empty()) throw std::invalid_argument("add_scalars: empty");
    double s = 0.0;
    for (const auto& x : xs) {
      if (x->value.numel() != 1) throw std::invalid_argument("add_scalars: non-scalar term");
      s += x->value.data[0];
    }
    VarPtr n = make(Tensor::scalar(s), xs);
    n->backprop = [nd = n.get(), xs]() {
      for (const auto& x : xs) x->grad.data[0] += nd->grad.data[0];
    };
    return n;
  }

  // Inverted dropout; inert at rate 0. Deterministic under the caller's rng.
  VarPtr dropout(const VarPtr& a, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return a;
    if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
    Tensor mask(a->value.shape);
    std::bernoulli_distribution keep(1.0 - rate);
    const double s = 1.0 / (1.0 - rate);
    for (double& v : mask.data) v = keep(rng) ? s : 0.0;
    return mul_mask(a, mask);
  }

  // Linear-chain CRF negative log-likelihood via the forward algorithm in log
  // space. Transitions are (K+2)x(K+2) with BOS=K, EOS=K+1. Gradients for
  // emissions and transitions come from forward-backward marginals.
  VarPtr crf_nll(const VarPtr& emissions, const std::vector<int>& tags, const VarPtr& trans) {
    if (emissions->value.ndim() != 2) throw std::invalid_argument("crf_nll: emissions must be 2-D");
    const int n = emissions->value.dim(0), k = emissions->value.dim(1);
    if (n < 1) throw std::invalid_argument("crf_nll: empty sequence");
    if (static_cast<int>(tags.size()) != n) throw std::invalid_argument("crf_nll: tag length mismatch");
    if (trans->value.ndim() != 2 || trans->value.dim(0) != k + 2 || trans->value.dim(1) != k + 2)
      throw std::invalid_argument("crf_nll: transitions must be (K+2)x(K+2)");
    for (int t : tags)
      if (t < 0 || t >= k) throw std::out_of_range("crf_nll: tag index");
    const int bos = k, eos = k + 1;
    const Tensor& em = emissions->value;
    const Tensor& tr = trans->value;

    double gold = tr.at(bos, tags[0]) + em.at(0, tags[0]);
    for (int t = 1; t < n; ++t) gold += tr.at(tags[t - 1], tags[t]) + em.at(t, tags[t]);
    gold += tr.at(tags[n - 1], eos);

    Tensor alpha({n, k});
    for (int j = 0; j < k; ++j) alpha.at(0, j) = tr.at(bos, j) + em.at(0, j);
    std::vector<double> buf(static_cast<std::size_t>(k));
    for (int t = 1; t < n; ++t)
      for (int j = 0; j < k; ++j) {
        for (int i = 0; i < k; ++i) buf[static_cast<std::size_t>(i)] = alpha.at(t - 1, i) + tr.at(i, j);
        alpha.at(t, j) = logsumexp(buf) + em.at(t, j);
      }
    for (int j = 0; j < k; ++j) buf[static_cast<std::size_t>(j)] = alpha.at(n - 1, j) + tr.at(j, eos);
    const double log_z = logsumexp(buf);

    VarPtr node = make(Tensor::scalar(log_z - gold), {emissions, trans});
    node->backprop = [nd = node.get(), emissions, trans, tags, alpha, log_z, n, k, bos, eos]() {
      const double gscale = nd->grad.data[0];
      const Tensor& em2 = emissions->value;
      const Tensor& tr2 = trans->value;
      Tensor beta({n, k});
      for (int j = 0; j < k; ++j) beta.at(n - 1, j) = tr2.at(j, eos);
      std::vector<double> buf2(static_cast<std::size_t>(k));
      for (int t = n - 2; t >= 0; --t)
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j)
            buf2[static_cast<std::size_t>(j)] = tr2.at(i, j) + em2.at(t + 1, j) + beta.at(t + 1, j);
          beta.at(t, i) = logsumexp(buf2);
        }
      // unary marginals -> emission grads
      for (int t = 0; t < n; ++t)
        for (int j = 0; j < k; ++j) {
          double p = std::exp(alpha.at(t, j) + beta.at(t, j) - log_z);
          emissions->grad.at(t, j) += gscale * (p - (tags[static_cast<std::size_t>(t)] == j ? 1.0 : 0.0));
        }
      // pairwise marginals -> transition grads
      for (int j = 0; j < k; ++j) {
        double p0 = std::exp(alpha.at(0, j) + beta.at(0, j) - log_z);
        trans->grad.at(bos, j) += gscale * (p0 - (tags[0] == j ? 1.0 : 0.0));
        double pn = std::exp(alpha.at(n - 1, j) + tr2.at(j, eos) - log_z);
        trans->grad.at(j, eos) += gscale * (pn - (tags[static_cast<std::size_t>(n - 1)] == j ? 1.0 : 0.0));
      }
      for (int t = 0; t + 1 < n; ++t)
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            double p = std::exp(alpha.at(t, i) + tr2.at(i, j) + em2.at(t + 1, j) + beta.at(t + 1, j) - log_z);
            double gold_pair =
                (tags[static_cast<std::size_t>(t)] == i && tags[static_cast<std::size_t>(t + 1)] == j) ? 1.0 : 0.0;
            trans->grad.at(i, j) += gscale * (p - gold_pair);
          }
    };
    return node;
  }

  // Seeds d(loss)/d(loss)=1, sweeps the tape once, then flushes parameter
  // gradients into their stores. One backward per tape.
  void backward(const VarPtr& loss) {
    if (loss->value.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (swept_) throw std::logic_error("backward: tape already swept");
    swept_ = true;
    loss->grad.data[0] = 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it)
      if ((*it)->backprop) (*it)->backprop();
    for (auto& f : flushes_) f();
  }

  std::size_t node_count() const { return order_.size(); }

 private:
  VarPtr make(Tensor value, const std::vector<VarPtr>& parents) {
    (void)parents;  // lifetime is held via backprop captures and order_
    if (check_finite_ && !value.all_finite())
      throw std::runtime_error("tape: non-finite value produced by op");
    auto n = std::make_shared<TapeNode>();
    n->grad = Tensor::zeros(value.shape);
    n->value = std::move(value);
    order_.push_back(n);
    return n;
  }

  static void require_same_shape(const VarPtr& a, const VarPtr& b, const char* what) {
    if (!a->value.same_shape(b->value))
      throw std::invalid_argument(std::string(what) + ": shape mismatch " + a->value.shape_str() + " vs " +
                                  b->value.shape_str());
  }

  static std::string cache_key(const ParamStore& ps, const std::string& name) {
    std::ostringstream os;
    os << static_cast<const void*>(&ps) << '/' << name;
    return os.str();
  }

  bool check_finite_;
  bool swept_ = false;
  std::vector<VarPtr> order_;
  std::vector<std::function<void()>> flushes_;
  std::unordered_map<std::string, VarPtr> param_cache_;
};

}  // namespace redee
