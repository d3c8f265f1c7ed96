#pragma once
// Named parameter container: each parameter owns a same-shaped gradient
// accumulator plus Adam first/second moments. Single writer; forward passes
// over frozen values are safe to share.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "redee/tensor.hpp"

namespace redee {

class ParamStore {
 public:
  struct Slot {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
  };

  void add(const std::string& name, Tensor init) {
    if (slots_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    Slot s;
    s.grad = Tensor::zeros(init.shape);
    s.m = Tensor::zeros(init.shape);
    s.v = Tensor::zeros(init.shape);
    s.value = std::move(init);
    slots_.emplace(name, std::move(s));
  }

  bool has(const std::string& name) const { return slots_.count(name) != 0; }

  Tensor& value(const std::string& name) { return slot(name).value; }
  const Tensor& value(const std::string& name) const { return slot(name).value; }
  Tensor& grad(const std::string& name) { return slot(name).grad; }
  const Tensor& grad(const std::string& name) const { return slot(name).grad; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(slots_.size());
    for (const auto& [k, _] : slots_) out.push_back(k);
    return out;
  }

  std::size_t size() const { return slots_.size(); }
  std::int64_t step() const { return step_; }

  void zero_grads() {
    for (auto& [_, s] : slots_) std::fill(s.grad.data.begin(), s.grad.data.end(), 0.0);
  }

  double grad_norm(const std::string& prefix = "") const {
    double acc = 0.0;
    for (const auto& [k, s] : slots_) {
      if (!prefix.empty() && k.rfind(prefix, 0) != 0) continue;
      for (double g : s.grad.data) acc += g * g;
    }
    return std::sqrt(acc);
  }

  // Adam with bias correction. Gradients are zeroed after the update.
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    for (auto& [name, s] : slots_) {
      for (double g : s.grad.data)
        if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient in parameter '" + name + "'");
    }
    ++step_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (auto& [_, s] : slots_) {
      for (std::size_t i = 0; i < s.value.data.size(); ++i) {
        double g = s.grad.data[i];
        s.m.data[i] = beta1 * s.m.data[i] + (1.0 - beta1) * g;
        s.v.data[i] = beta2 * s.v.data[i] + (1.0 - beta2) * g * g;
        double mhat = s.m.data[i] / c1;
        double vhat = s.v.data[i] / c2;
        s.value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      std::fill(s.grad.data.begin(), s.grad.data.end(), 0.0);
    }
  }

  // Versioned binary checkpoint: parameter name -> (shape, little-endian
  // 64-bit float payload), plus the config hash of the run that produced it.
  void save(const std::string& path, std::uint64_t config_hash) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, 8);
    write_u32(out, kVersion);
    write_u64(out, config_hash);
    write_u64(out, static_cast<std::uint64_t>(step_));
    write_u32(out, static_cast<std::uint32_t>(slots_.size()));
    for (const auto& [name, s] : slots_) {
      write_u32(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_u32(out, static_cast<std::uint32_t>(s.value.shape.size()));
      for (int e : s.value.shape) write_u64(out, static_cast<std::uint64_t>(e));
      out.write(reinterpret_cast<const char*>(s.value.data.data()),
                static_cast<std::streamsize>(s.value.data.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
  }

  static ParamStore load(const std::string& path, std::uint64_t expected_hash, bool force = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
      throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint32_t version = read_u32(in);
    if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version");
    std::uint64_t hash = read_u64(in);
    if (hash != expected_hash && !force)
      throw std::runtime_error("checkpoint: config hash mismatch (use force to override)");
    ParamStore ps;
    ps.step_ = static_cast<std::int64_t>(read_u64(in));
    std::uint32_t count = read_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
      std::uint32_t len = read_u32(in);
      std::string name(len, '\0');
      in.read(name.data(), len);
      std::uint32_t ndim = read_u32(in);
      std::vector<int> shape(ndim);
      for (auto& e : shape) e = static_cast<int>(read_u64(in));
      Tensor t(shape);
      in.read(reinterpret_cast<char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
      if (!in) throw std::runtime_error("checkpoint: truncated payload in " + path);
      ps.add(name, std::move(t));
    }
    return ps;
  }

 private:
  static constexpr const char kMagic[9] = "REDEECKP";
  static constexpr std::uint32_t kVersion = 1;

  Slot& slot(const std::string& name) {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
    return it->second;
  }
  const Slot& slot(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
    return it->second;
  }

  static void write_u32(std::ostream& o, std::uint32_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static void write_u64(std::ostream& o, std::uint64_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static std::uint32_t read_u32(std::istream& i) {
    std::uint32_t v = 0;
    i.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static std::uint64_t read_u64(std::istream& i) {
    std::uint64_t v = 0;
    i.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }

  std::map<std::string, Slot> slots_;  // ordered: keeps checkpoints byte-stable
  std::int64_t step_ = 0;
};

}  // namespace redee
