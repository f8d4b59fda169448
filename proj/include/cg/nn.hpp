#pragma once

#include <string>
#include <vector>

#include "cg/autograd.hpp"
#include "cg/rng.hpp"

namespace cg {

// Named parameter registry. Creation order is the serialization order, so
// checkpoints are layout-stable for a fixed architecture.
struct ParamStore {
  std::vector<std::pair<std::string, Var>> items;

  Var add(const std::string& name, Tensor init) {
    for (const auto& [n, v] : items)
      check(n != name, "duplicate parameter name: " + name);
    Var v = leaf(std::move(init), true);
    items.push_back({name, v});
    return v;
  }

  Var find(const std::string& name) const {
    for (const auto& [n, v] : items)
      if (n == name) return v;
    throw Error("unknown parameter: " + name);
  }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& [name, v] : items) n += v->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& [name, v] : items)
      if (v->grad.shape == v->value.shape) v->grad.fill(0.0);
  }
};

inline Tensor he_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double stddev = std::sqrt(2.0 / fan_in);
  for (auto& v : t.data) v = rng.normal(0, stddev);
  return t;
}

inline Tensor xavier_init(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.data) v = rng.uniform(-a, a);
  return t;
}

struct Conv2dLayer {
  Var w, b;
  int stride = 1, pad = 1;

  Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad); }
};

inline Conv2dLayer make_conv(ParamStore& ps, const std::string& name, int cin, int cout,
                             int k, int stride, Rng& rng) {
  Conv2dLayer l;
  l.stride = stride;
  l.pad = k / 2;
  l.w = ps.add(name + ".w", he_init({cout, cin, k, k}, cin * k * k, rng));
  l.b = ps.add(name + ".b", Tensor({cout}));
  return l;
}

struct NormLayer {
  Var gamma, beta;
  Var operator()(const Var& x) const { return instance_norm(x, gamma, beta); }
};

inline NormLayer make_norm(ParamStore& ps, const std::string& name, int c) {
  NormLayer l;
  l.gamma = ps.add(name + ".g", Tensor::full({c}, 1.0));
  l.beta = ps.add(name + ".b", Tensor({c}));
  return l;
}

struct LinearLayer {
  Var w, b;
  Var operator()(const Var& x) const { return linear(w, x, b); }
};

inline LinearLayer make_linear(ParamStore& ps, const std::string& name, int in, int out,
                               Rng& rng) {
  LinearLayer l;
  l.w = ps.add(name + ".w", xavier_init({out, in}, in, out, rng));
  l.b = ps.add(name + ".b", Tensor({out}));
  return l;
}

}  // namespace cg
