#include "cg/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "cg/kernels.hpp"

namespace cg {

namespace {

std::atomic<int64_t> g_order{1};
thread_local bool g_grad_enabled = true;

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->order = g_order.fetch_add(1, std::memory_order_relaxed);
  bool needs = false;
  if (g_grad_enabled)
    for (const auto& p : parents)
      if (p && p->requires_grad) needs = true;
  if (needs) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGrad::NoGrad() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGrad::~NoGrad() { g_grad_enabled = prev; }

Var leaf(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  n->order = 0;
  return n;
}

Var constant(Tensor v) { return leaf(std::move(v), false); }
Var constant(double v) { return leaf(Tensor::scalar(v), false); }

void backward(const Var& root) {
  check(root->value.size() == 1, "backward: root must be scalar");
  if (!root->requires_grad) return;

  // collect reachable subgraph
  std::vector<Node*> nodes;
  std::unordered_set<Node*> seen;
  std::vector<Var> stack{root};
  seen.insert(root.get());
  while (!stack.empty()) {
    Var n = stack.back();
    stack.pop_back();
    nodes.push_back(n.get());
    for (const auto& p : n->parents)
      if (p && p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const Node* a, const Node* b) { return a->order > b->order; });

  root->g();
  root->grad.data[0] += 1.0;
  for (Node* n : nodes)
    if (n->backprop) n->backprop(*n);
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
  check(a->value.same_shape(b->value), "add: shape mismatch " +
            a->value.shape_str() + " vs " + b->value.shape_str());
  Tensor out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    const int64_t n = self.value.size();
    if (a->requires_grad) kernels::axpy(n, 1.0, self.grad.data.data(), a->g().data.data());
    if (b->requires_grad) kernels::axpy(n, 1.0, self.grad.data.data(), b->g().data.data());
  });
}

Var sub(const Var& a, const Var& b) {
  check(a->value.same_shape(b->value), "sub: shape mismatch");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    const int64_t n = self.value.size();
    if (a->requires_grad) kernels::axpy(n, 1.0, self.grad.data.data(), a->g().data.data());
    if (b->requires_grad) kernels::axpy(n, -1.0, self.grad.data.data(), b->g().data.data());
  });
}

Var mul(const Var& a, const Var& b) {
  check(a->value.same_shape(b->value), "mul: shape mismatch");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    const int64_t n = self.value.size();
    if (a->requires_grad) {
      auto& ga = a->g();
      for (int64_t i = 0; i < n; ++i) ga[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      auto& gb = b->g();
      for (int64_t i = 0; i < n; ++i) gb[i] += self.grad[i] * a->value[i];
    }
  });
}

Var affine(const Var& a, double scale, double shift) {
  Tensor out = a->value;
  for (auto& x : out.data) x = scale * x + shift;
  return make_node(std::move(out), {a}, [a, scale](Node& self) {
    kernels::axpy(self.value.size(), scale, self.grad.data.data(), a->g().data.data());
  });
}

Var relu(const Var& a) {
  Tensor out = a->value;
  for (auto& x : out.data) x = x > 0 ? x : 0.0;
  return make_node(std::move(out), {a}, [a](Node& self) {
    auto& ga = a->g();
    for (int64_t i = 0; i < self.value.size(); ++i)
      if (a->value[i] > 0) ga[i] += self.grad[i];
  });
}

Var tanh_act(const Var& a) {
  Tensor out = a->value;
  for (auto& x : out.data) x = std::tanh(x);
  return make_node(std::move(out), {a}, [a](Node& self) {
    auto& ga = a->g();
    for (int64_t i = 0; i < self.value.size(); ++i) {
      const double y = self.value[i];
      ga[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (auto& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  return make_node(std::move(out), {a}, [a](Node& self) {
    auto& ga = a->g();
    for (int64_t i = 0; i < self.value.size(); ++i) {
      const double y = self.value[i];
      ga[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Var reshape(const Var& a, std::vector<int> shape) {
  check(Tensor::numel(shape) == a->value.size(), "reshape: element count mismatch");
  Tensor out(std::move(shape), a->value.data);
  return make_node(std::move(out), {a}, [a](Node& self) {
    kernels::axpy(self.value.size(), 1.0, self.grad.data.data(), a->g().data.data());
  });
}

Var transpose2d(const Var& a) {
  check(a->value.ndim() == 2, "transpose2d: expects 2-D tensor");
  const int R = a->value.shape[0], C = a->value.shape[1];
  Tensor out({C, R});
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) out.at2(j, i) = a->value.at2(i, j);
  return make_node(std::move(out), {a}, [a, R, C](Node& self) {
    auto& ga = a->g();
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j) ga.at2(i, j) += self.grad.at2(j, i);
  });
}

Var concat0(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat0: empty input");
  std::vector<int> shape = parts[0]->value.shape;
  int64_t rest = parts[0]->value.size() / std::max(1, shape[0]);
  int total0 = 0;
  for (const auto& p : parts) {
    check(p->value.size() / std::max(1, p->value.shape[0]) == rest,
          "concat0: trailing dims mismatch");
    total0 += p->value.shape[0];
  }
  shape[0] = total0;
  Tensor out(shape);
  int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + off);
    off += p->value.size();
  }
  return make_node(std::move(out), parts, [parts](Node& self) {
    int64_t off = 0;
    for (const auto& p : parts) {
      if (p->requires_grad)
        kernels::axpy(p->value.size(), 1.0, self.grad.data.data() + off,
                      p->g().data.data());
      off += p->value.size();
    }
  });
}

Var slice0(const Var& a, int begin, int end) {
  check(begin >= 0 && end <= a->value.shape[0] && begin < end, "slice0: bad range");
  std::vector<int> shape = a->value.shape;
  const int64_t rest = a->value.size() / shape[0];
  shape[0] = end - begin;
  Tensor out(shape);
  std::copy(a->value.data.begin() + begin * rest, a->value.data.begin() + end * rest,
            out.data.begin());
  return make_node(std::move(out), {a}, [a, begin, rest](Node& self) {
    kernels::axpy(self.value.size(), 1.0, self.grad.data.data(),
                  a->g().data.data() + begin * rest);
  });
}

Var row(const Var& a, int r) {
  check(a->value.ndim() == 2, "row: expects 2-D tensor");
  return reshape(slice0(a, r, r + 1), {a->value.shape[1]});
}

// ---------------------------------------------------------------- reductions

Var sum_all(const Var& a) {
  double s = 0;
  for (double v : a->value.data) s += v;
  return make_node(Tensor::scalar(s), {a}, [a](Node& self) {
    const double g = self.grad[0];
    auto& ga = a->g();
    for (auto& x : ga.data) x += g;
  });
}

Var mean_all(const Var& a) { return affine(sum_all(a), 1.0 / a->value.size(), 0.0); }

Var dot(const Var& a, const Var& b) {
  check(a->value.size() == b->value.size(), "dot: size mismatch");
  double s = 0;
  for (int64_t i = 0; i < a->value.size(); ++i) s += a->value[i] * b->value[i];
  return make_node(Tensor::scalar(s), {a, b}, [a, b](Node& self) {
    const double g = self.grad[0];
    if (a->requires_grad)
      kernels::axpy(a->value.size(), g, b->value.data.data(), a->g().data.data());
    if (b->requires_grad)
      kernels::axpy(b->value.size(), g, a->value.data.data(), b->g().data.data());
  });
}

Var pick(const Var& a, int index) {
  check(index >= 0 && index < a->value.size(), "pick: index out of range");
  return make_node(Tensor::scalar(a->value[index]), {a}, [a, index](Node& self) {
    a->g()[index] += self.grad[0];
  });
}

Var logsumexp(const Var& a) {
  double m = a->value[0];
  for (double v : a->value.data) m = std::max(m, v);
  double s = 0;
  for (double v : a->value.data) s += std::exp(v - m);
  const double out = m + std::log(s);
  return make_node(Tensor::scalar(out), {a}, [a](Node& self) {
    const double g = self.grad[0];
    const double lse = self.value[0];
    auto& ga = a->g();
    for (int64_t i = 0; i < a->value.size(); ++i)
      ga[i] += g * std::exp(a->value[i] - lse);
  });
}

Var l2_normalize(const Var& a, double eps) {
  double sq = 0;
  for (double v : a->value.data) sq += v * v;
  const double norm = std::max(std::sqrt(sq), eps);
  Tensor out = a->value;
  for (auto& x : out.data) x /= norm;
  return make_node(std::move(out), {a}, [a, norm](Node& self) {
    // dx = (g - y (g.y)) / ||x||
    double gy = 0;
    for (int64_t i = 0; i < self.value.size(); ++i) gy += self.grad[i] * self.value[i];
    auto& ga = a->g();
    for (int64_t i = 0; i < self.value.size(); ++i)
      ga[i] += (self.grad[i] - self.value[i] * gy) / norm;
  });
}

// ------------------------------------------------------------- linear algebra

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  check(a->value.ndim() == 2 && b->value.ndim() == 2, "matmul: expects 2-D tensors");
  const int M = trans_a ? a->value.shape[1] : a->value.shape[0];
  const int Ka = trans_a ? a->value.shape[0] : a->value.shape[1];
  const int Kb = trans_b ? b->value.shape[1] : b->value.shape[0];
  const int N = trans_b ? b->value.shape[0] : b->value.shape[1];
  check(Ka == Kb, "matmul: inner dims mismatch");
  const int K = Ka;

  Tensor out({M, N});
  kernels::matmul(a->value.data.data(), b->value.data.data(), out.data.data(), M, N,
                  K, trans_a, trans_b, false);
  return make_node(std::move(out), {a, b}, [a, b, M, N, K, trans_a, trans_b](Node& self) {
    const double* gc = self.grad.data.data();
    if (a->requires_grad) {
      double* ga = a->g().data.data();
      if (!trans_a && !trans_b)
        kernels::matmul(gc, b->value.data.data(), ga, M, K, N, false, true, true);
      else if (!trans_a && trans_b)
        kernels::matmul(gc, b->value.data.data(), ga, M, K, N, false, false, true);
      else if (trans_a && !trans_b)
        kernels::matmul(b->value.data.data(), gc, ga, K, M, N, false, true, true);
      else
        kernels::matmul(b->value.data.data(), gc, ga, K, M, N, true, true, true);
    }
    if (b->requires_grad) {
      double* gb = b->g().data.data();
      if (!trans_a && !trans_b)
        kernels::matmul(a->value.data.data(), gc, gb, K, N, M, true, false, true);
      else if (!trans_a && trans_b)
        kernels::matmul(gc, a->value.data.data(), gb, N, K, M, true, false, true);
      else if (trans_a && !trans_b)
        kernels::matmul(a->value.data.data(), gc, gb, K, N, M, false, false, true);
      else
        kernels::matmul(gc, a->value.data.data(), gb, N, K, M, true, true, true);
    }
  });
}

Var linear(const Var& w, const Var& x, const Var& b) {
  check(w->value.ndim() == 2 && x->value.ndim() == 1, "linear: W must be 2-D, x 1-D");
  const int M = w->value.shape[0];
  const int K = w->value.shape[1];
  check(K == x->value.shape[0], "linear: dim mismatch");
  Tensor out({M});
  for (int m = 0; m < M; ++m) {
    const double* wr = w->value.data.data() + static_cast<int64_t>(m) * K;
    double s = b ? b->value[m] : 0.0;
    for (int k = 0; k < K; ++k) s += wr[k] * x->value[k];
    out[m] = s;
  }
  std::vector<Var> parents = b ? std::vector<Var>{w, x, b} : std::vector<Var>{w, x};
  return make_node(std::move(out), std::move(parents), [w, x, b, M, K](Node& self) {
    const double* g = self.grad.data.data();
    if (w->requires_grad) {
      auto& gw = w->g();
      for (int m = 0; m < M; ++m)
        kernels::serial::axpy(K, g[m], x->value.data.data(),
                              gw.data.data() + static_cast<int64_t>(m) * K);
    }
    if (x->requires_grad) {
      auto& gx = x->g();
      for (int m = 0; m < M; ++m)
        kernels::serial::axpy(K, g[m], w->value.data.data() + static_cast<int64_t>(m) * K,
                              gx.data.data());
    }
    if (b && b->requires_grad) kernels::serial::axpy(M, 1.0, g, b->g().data.data());
  });
}

Var rowwise_dot(const Var& w, const Var& f) {
  check(w->value.same_shape(f->value) && w->value.ndim() == 2, "rowwise_dot: shape mismatch");
  const int N = w->value.shape[0], C = w->value.shape[1];
  Tensor out({N});
  for (int n = 0; n < N; ++n) {
    double s = 0;
    for (int c = 0; c < C; ++c) s += w->value.at2(n, c) * f->value.at2(n, c);
    out[n] = s;
  }
  return make_node(std::move(out), {w, f}, [w, f, N, C](Node& self) {
    for (int n = 0; n < N; ++n) {
      const double g = self.grad[n];
      if (w->requires_grad)
        kernels::serial::axpy(C, g, f->value.data.data() + static_cast<int64_t>(n) * C,
                              w->g().data.data() + static_cast<int64_t>(n) * C);
      if (f->requires_grad)
        kernels::serial::axpy(C, g, w->value.data.data() + static_cast<int64_t>(n) * C,
                              f->g().data.data() + static_cast<int64_t>(n) * C);
    }
  });
}

// ------------------------------------------------------------------- conv

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  check(x->value.ndim() == 3 && w->value.ndim() == 4, "conv2d: bad input ranks");
  const int Cin = x->value.shape[0], H = x->value.shape[1], W = x->value.shape[2];
  const int Cout = w->value.shape[0], kh = w->value.shape[2], kw = w->value.shape[3];
  check(w->value.shape[1] == Cin, "conv2d: channel mismatch");
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  check(Ho > 0 && Wo > 0, "conv2d: output would be empty");

  const int CK = Cin * kh * kw;
  const int64_t plane = static_cast<int64_t>(Ho) * Wo;
  auto col = std::make_shared<Tensor>(std::vector<int>{CK, Ho * Wo});
  kernels::im2col(x->value.data.data(), Cin, H, W, kh, kw, stride, pad,
                  col->data.data(), Ho, Wo);

  Tensor out({Cout, Ho, Wo});
  kernels::matmul(w->value.data.data(), col->data.data(), out.data.data(), Cout,
                  Ho * Wo, CK, false, false, false);
  if (b) {
    check(b->value.size() == Cout, "conv2d: bias size mismatch");
    for (int c = 0; c < Cout; ++c) {
      double* o = out.data.data() + c * plane;
      const double bv = b->value[c];
      for (int64_t i = 0; i < plane; ++i) o[i] += bv;
    }
  }

  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(std::move(out), std::move(parents),
                   [x, w, b, col, Cin, H, W, Cout, kh, kw, stride, pad, Ho, Wo,
                    CK, plane](Node& self) {
    const double* gout = self.grad.data.data();
    if (b && b->requires_grad) {
      auto& gb = b->g();
      for (int c = 0; c < Cout; ++c) {
        double s = 0;
        const double* g = gout + c * plane;
        for (int64_t i = 0; i < plane; ++i) s += g[i];
        gb[c] += s;
      }
    }
    if (w->requires_grad) {
      // dW (Cout,CK) += gout (Cout,HW) * col^T (HW,CK)
      kernels::matmul(gout, col->data.data(), w->g().data.data(), Cout, CK,
                      Ho * Wo, false, true, true);
    }
    if (x->requires_grad) {
      // dcol (CK,HW) = W^T (CK,Cout) * gout (Cout,HW)
      Tensor dcol({CK, Ho * Wo});
      kernels::matmul(w->value.data.data(), gout, dcol.data.data(), CK, Ho * Wo,
                      Cout, true, false, false);
      kernels::col2im(dcol.data.data(), Cin, H, W, kh, kw, stride, pad,
                      x->g().data.data(), Ho, Wo);
    }
  });
}

Var upsample_nearest2(const Var& x, int h_out, int w_out) {
  check(x->value.ndim() == 3, "upsample: expects (C,H,W)");
  const int C = x->value.shape[0], H = x->value.shape[1], W = x->value.shape[2];
  Tensor out({C, h_out, w_out});
  for (int c = 0; c < C; ++c)
    for (int h = 0; h < h_out; ++h) {
      const int hs = std::min(h / 2, H - 1);
      for (int w = 0; w < w_out; ++w)
        out.at3(c, h, w) = x->value.at3(c, hs, std::min(w / 2, W - 1));
    }
  return make_node(std::move(out), {x}, [x, C, H, W, h_out, w_out](Node& self) {
    auto& gx = x->g();
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < h_out; ++h) {
        const int hs = std::min(h / 2, H - 1);
        for (int w = 0; w < w_out; ++w)
          gx.at3(c, hs, std::min(w / 2, W - 1)) += self.grad.at3(c, h, w);
      }
  });
}

Var softmax_rows(const Var& a) {
  check(a->value.ndim() == 2, "softmax_rows: expects 2-D tensor");
  const int R = a->value.shape[0], L = a->value.shape[1];
  Tensor out({R, L});
  for (int r = 0; r < R; ++r) {
    const double* in = a->value.data.data() + static_cast<int64_t>(r) * L;
    double* o = out.data.data() + static_cast<int64_t>(r) * L;
    double m = in[0];
    for (int i = 1; i < L; ++i) m = std::max(m, in[i]);
    double s = 0;
    for (int i = 0; i < L; ++i) {
      o[i] = std::exp(in[i] - m);
      s += o[i];
    }
    for (int i = 0; i < L; ++i) o[i] /= s;
  }
  return make_node(std::move(out), {a}, [a, R, L](Node& self) {
    auto& ga = a->g();
    for (int r = 0; r < R; ++r) {
      const double* y = self.value.data.data() + static_cast<int64_t>(r) * L;
      const double* g = self.grad.data.data() + static_cast<int64_t>(r) * L;
      double* d = ga.data.data() + static_cast<int64_t>(r) * L;
      double gy = 0;
      for (int i = 0; i < L; ++i) gy += g[i] * y[i];
      for (int i = 0; i < L; ++i) d[i] += y[i] * (g[i] - gy);
    }
  });
}

Var channel_dot(const Var& m, const Var& l) {
  check(m->value.ndim() == 3 && l->value.ndim() == 1, "channel_dot: bad ranks");
  const int C = m->value.shape[0], H = m->value.shape[1], W = m->value.shape[2];
  check(l->value.shape[0] == C, "channel_dot: channel mismatch");
  const int64_t plane = static_cast<int64_t>(H) * W;
  Tensor out({1, H, W});
  for (int c = 0; c < C; ++c) {
    const double lv = l->value[c];
    const double* src = m->value.data.data() + c * plane;
    for (int64_t i = 0; i < plane; ++i) out[i] += lv * src[i];
  }
  return make_node(std::move(out), {m, l}, [m, l, C, plane](Node& self) {
    const double* g = self.grad.data.data();
    if (m->requires_grad) {
      auto& gm = m->g();
      for (int c = 0; c < C; ++c)
        kernels::serial::axpy(plane, l->value[c], g, gm.data.data() + c * plane);
    }
    if (l->requires_grad) {
      auto& gl = l->g();
      for (int c = 0; c < C; ++c) {
        const double* src = m->value.data.data() + c * plane;
        double s = 0;
        for (int64_t i = 0; i < plane; ++i) s += g[i] * src[i];
        gl[c] += s;
      }
    }
  });
}

Var spatial_mul(const Var& m, const Var& r) {
  check(m->value.ndim() == 3 && r->value.ndim() == 3 && r->value.shape[0] == 1,
        "spatial_mul: bad ranks");
  const int C = m->value.shape[0];
  const int64_t plane = static_cast<int64_t>(m->value.shape[1]) * m->value.shape[2];
  check(r->value.size() == plane, "spatial_mul: spatial mismatch");
  Tensor out = m->value;
  for (int c = 0; c < C; ++c) {
    double* o = out.data.data() + c * plane;
    for (int64_t i = 0; i < plane; ++i) o[i] *= r->value[i];
  }
  return make_node(std::move(out), {m, r}, [m, r, C, plane](Node& self) {
    if (m->requires_grad) {
      auto& gm = m->g();
      for (int c = 0; c < C; ++c) {
        const double* g = self.grad.data.data() + c * plane;
        double* d = gm.data.data() + c * plane;
        for (int64_t i = 0; i < plane; ++i) d[i] += g[i] * r->value[i];
      }
    }
    if (r->requires_grad) {
      auto& gr = r->g();
      for (int c = 0; c < C; ++c) {
        const double* g = self.grad.data.data() + c * plane;
        const double* mv = m->value.data.data() + c * plane;
        for (int64_t i = 0; i < plane; ++i) gr[i] += g[i] * mv[i];
      }
    }
  });
}

Var channel_mul(const Var& m, const Var& gate) {
  check(m->value.ndim() == 3 && gate->value.ndim() == 1, "channel_mul: bad ranks");
  const int C = m->value.shape[0];
  check(gate->value.shape[0] == C, "channel_mul: channel mismatch");
  const int64_t plane = static_cast<int64_t>(m->value.shape[1]) * m->value.shape[2];
  Tensor out = m->value;
  for (int c = 0; c < C; ++c) {
    double* o = out.data.data() + c * plane;
    const double gv = gate->value[c];
    for (int64_t i = 0; i < plane; ++i) o[i] *= gv;
  }
  return make_node(std::move(out), {m, gate}, [m, gate, C, plane](Node& self) {
    if (m->requires_grad) {
      auto& gm = m->g();
      for (int c = 0; c < C; ++c)
        kernels::serial::axpy(plane, gate->value[c], self.grad.data.data() + c * plane,
                              gm.data.data() + c * plane);
    }
    if (gate->requires_grad) {
      auto& gg = gate->g();
      for (int c = 0; c < C; ++c) {
        const double* g = self.grad.data.data() + c * plane;
        const double* mv = m->value.data.data() + c * plane;
        double s = 0;
        for (int64_t i = 0; i < plane; ++i) s += g[i] * mv[i];
        gg[c] += s;
      }
    }
  });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  check(x->value.ndim() == 3 && gamma->value.ndim() == 1 && beta->value.ndim() == 1,
        "instance_norm: bad ranks");
  const int C = x->value.shape[0];
  check(gamma->value.shape[0] == C && beta->value.shape[0] == C,
        "instance_norm: channel mismatch");
  const int64_t plane = static_cast<int64_t>(x->value.shape[1]) * x->value.shape[2];

  auto xhat = std::make_shared<Tensor>(x->value.shape);
  auto inv_sigma = std::make_shared<std::vector<double>>(C);
  Tensor out(x->value.shape);
  for (int c = 0; c < C; ++c) {
    const double* src = x->value.data.data() + c * plane;
    double mu = 0;
    for (int64_t i = 0; i < plane; ++i) mu += src[i];
    mu /= plane;
    double var = 0;
    for (int64_t i = 0; i < plane; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= plane;
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[c] = inv;
    double* xh = xhat->data.data() + c * plane;
    double* o = out.data.data() + c * plane;
    const double g = gamma->value[c], b = beta->value[c];
    for (int64_t i = 0; i < plane; ++i) {
      xh[i] = (src[i] - mu) * inv;
      o[i] = g * xh[i] + b;
    }
  }
  return make_node(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, xhat, inv_sigma, C, plane](Node& self) {
    for (int c = 0; c < C; ++c) {
      const double* g = self.grad.data.data() + c * plane;
      const double* xh = xhat->data.data() + c * plane;
      if (gamma->requires_grad) {
        double s = 0;
        for (int64_t i = 0; i < plane; ++i) s += g[i] * xh[i];
        gamma->g()[c] += s;
      }
      if (beta->requires_grad) {
        double s = 0;
        for (int64_t i = 0; i < plane; ++i) s += g[i];
        beta->g()[c] += s;
      }
      if (x->requires_grad) {
        const double gam = gamma->value[c];
        double mean_g = 0, mean_gx = 0;
        for (int64_t i = 0; i < plane; ++i) {
          mean_g += g[i];
          mean_gx += g[i] * xh[i];
        }
        mean_g /= plane;
        mean_gx /= plane;
        double* dst = x->g().data.data() + c * plane;
        const double k = gam * (*inv_sigma)[c];
        for (int64_t i = 0; i < plane; ++i)
          dst[i] += k * (g[i] - mean_g - xh[i] * mean_gx);
      }
    }
  });
}

Var embed_lookup(const Var& table, const std::vector<int>& ids) {
  check(table->value.ndim() == 2, "embed_lookup: table must be 2-D");
  const int V = table->value.shape[0], D = table->value.shape[1];
  const int T = static_cast<int>(ids.size());
  Tensor out({T, D});
  for (int t = 0; t < T; ++t) {
    check(ids[t] >= 0 && ids[t] < V, "embed_lookup: id out of range");
    std::copy_n(table->value.data.data() + static_cast<int64_t>(ids[t]) * D, D,
                out.data.data() + static_cast<int64_t>(t) * D);
  }
  return make_node(std::move(out), {table}, [table, ids, D](Node& self) {
    auto& gt = table->g();
    for (size_t t = 0; t < ids.size(); ++t)
      kernels::serial::axpy(D, 1.0, self.grad.data.data() + static_cast<int64_t>(t) * D,
                            gt.data.data() + static_cast<int64_t>(ids[t]) * D);
  });
}

// ------------------------------------------------------------- fused losses

Var focal_loss_sum(const Var& logits, const std::vector<uint8_t>& positive,
                   double alpha, double gamma) {
  const int64_t n = logits->value.size();
  check(static_cast<int64_t>(positive.size()) == n, "focal_loss: mask size mismatch");
  double total = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double z = logits->value[i];
    const double log_sig = -softplus(-z);
    const double log_1m = -softplus(z);
    const double c = 1.0 / (1.0 + std::exp(-z));
    if (positive[i])
      total += -alpha * std::pow(1.0 - c, gamma) * log_sig;
    else
      total += -(1.0 - alpha) * std::pow(c, gamma) * log_1m;
  }
  return make_node(Tensor::scalar(total), {logits},
                   [logits, positive, alpha, gamma, n](Node& self) {
    const double g = self.grad[0];
    auto& gl = logits->g();
    for (int64_t i = 0; i < n; ++i) {
      const double z = logits->value[i];
      const double c = 1.0 / (1.0 + std::exp(-z));
      double dz;
      if (positive[i]) {
        const double log_sig = -softplus(-z);
        dz = alpha * std::pow(1.0 - c, gamma) * (gamma * c * log_sig - (1.0 - c));
      } else {
        const double log_1m = -softplus(z);
        dz = (1.0 - alpha) * std::pow(c, gamma) * (c - gamma * (1.0 - c) * log_1m);
      }
      gl[i] += g * dz;
    }
  });
}

namespace {

struct GiouGrad {
  double giou;
  double d[4];  // w.r.t. px1, py1, px2, py2 (gt fixed)
};

GiouGrad giou_with_grad(double px1, double py1, double px2, double py2,
                        double gx1, double gy1, double gx2, double gy2) {
  const double pw = px2 - px1, ph = py2 - py1;
  const double ap = pw * ph;
  const double ag = (gx2 - gx1) * (gy2 - gy1);

  const double iw = std::min(px2, gx2) - std::max(px1, gx1);
  const double ih = std::min(py2, gy2) - std::max(py1, gy1);
  const bool overlap = iw > 0 && ih > 0;
  const double inter = overlap ? iw * ih : 0.0;
  const double uni = ap + ag - inter;

  const double ex1 = std::min(px1, gx1), ey1 = std::min(py1, gy1);
  const double ex2 = std::max(px2, gx2), ey2 = std::max(py2, gy2);
  const double ew = ex2 - ex1, eh = ey2 - ey1;
  const double ae = ew * eh;

  GiouGrad r;
  r.giou = inter / uni - (ae - uni) / ae;

  const double d_ap[4] = {-ph, -pw, ph, pw};
  double d_i[4] = {0, 0, 0, 0};
  if (overlap) {
    if (px1 > gx1) d_i[0] = -ih;
    if (py1 > gy1) d_i[1] = -iw;
    if (px2 < gx2) d_i[2] = ih;
    if (py2 < gy2) d_i[3] = iw;
  }
  double d_ae[4] = {0, 0, 0, 0};
  if (px1 < gx1) d_ae[0] = -eh;
  if (py1 < gy1) d_ae[1] = -ew;
  if (px2 > gx2) d_ae[2] = eh;
  if (py2 > gy2) d_ae[3] = ew;

  for (int i = 0; i < 4; ++i) {
    const double d_u = d_ap[i] - d_i[i];
    const double d_iou = (d_i[i] * uni - inter * d_u) / (uni * uni);
    r.d[i] = d_iou + (d_u * ae - uni * d_ae[i]) / (ae * ae);
  }
  return r;
}

}  // namespace

Var giou_loss_sum(const Var& reg_raw, const BoxRegressionTargets& t) {
  check(reg_raw->value.ndim() == 3 && reg_raw->value.shape[0] == 4,
        "giou_loss: reg map must be (4,H,W)");
  const int64_t plane =
      static_cast<int64_t>(reg_raw->value.shape[1]) * reg_raw->value.shape[2];
  double total = 0;
  for (size_t p = 0; p < t.positions.size(); ++p) {
    const int64_t pos = t.positions[p];
    const double dl = std::exp(reg_raw->value[0 * plane + pos]) * t.stride;
    const double dt = std::exp(reg_raw->value[1 * plane + pos]) * t.stride;
    const double dr = std::exp(reg_raw->value[2 * plane + pos]) * t.stride;
    const double db = std::exp(reg_raw->value[3 * plane + pos]) * t.stride;
    const auto gg = giou_with_grad(t.center_x[p] - dl, t.center_y[p] - dt,
                                   t.center_x[p] + dr, t.center_y[p] + db,
                                   t.gt[0], t.gt[1], t.gt[2], t.gt[3]);
    total += 1.0 - gg.giou;
  }
  return make_node(Tensor::scalar(total), {reg_raw}, [reg_raw, t, plane](Node& self) {
    const double g = self.grad[0];
    auto& gr = reg_raw->g();
    for (size_t p = 0; p < t.positions.size(); ++p) {
      const int64_t pos = t.positions[p];
      const double dl = std::exp(reg_raw->value[0 * plane + pos]) * t.stride;
      const double dt = std::exp(reg_raw->value[1 * plane + pos]) * t.stride;
      const double dr = std::exp(reg_raw->value[2 * plane + pos]) * t.stride;
      const double db = std::exp(reg_raw->value[3 * plane + pos]) * t.stride;
      const auto gg = giou_with_grad(t.center_x[p] - dl, t.center_y[p] - dt,
                                     t.center_x[p] + dr, t.center_y[p] + db,
                                     t.gt[0], t.gt[1], t.gt[2], t.gt[3]);
      // d(1-giou)/draw = -dgiou/dcorner * dcorner/ddist * ddist/draw
      gr[0 * plane + pos] += g * gg.d[0] * dl;   // px1 = cx - dl
      gr[1 * plane + pos] += g * gg.d[1] * dt;   // py1 = cy - dt
      gr[2 * plane + pos] += g * -gg.d[2] * dr;  // px2 = cx + dr
      gr[3 * plane + pos] += g * -gg.d[3] * db;  // py2 = cy + db
    }
  });
}

}  // namespace cg
