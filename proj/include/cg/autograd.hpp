#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cg/tensor.hpp"

namespace cg {

// Reverse-mode tape. Each op returns a new node holding its value and a
// closure that scatters the node's gradient into its parents. Graphs are
// rebuilt every step; leaves (parameters) persist across steps.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on demand, same shape as value
  bool requires_grad = false;
  int64_t order = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  Tensor& g() {
    if (grad.shape != value.shape) grad = Tensor(value.shape);
    return grad;
  }
};

using Var = std::shared_ptr<Node>;

bool grad_enabled();

// Disables closure construction inside the scope (pure forward evaluation).
struct NoGrad {
  NoGrad();
  ~NoGrad();
  bool prev;
};

Var leaf(Tensor v, bool requires_grad = true);
Var constant(Tensor v);
Var constant(double v);

// Backpropagate from a scalar root (seeds d(root)/d(root) = 1).
void backward(const Var& root);

// ---- elementwise / shape ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var affine(const Var& a, double scale, double shift);  // scale*a + shift
Var relu(const Var& a);
Var tanh_act(const Var& a);
Var sigmoid(const Var& a);
Var reshape(const Var& a, std::vector<int> shape);
Var transpose2d(const Var& a);
Var concat0(const std::vector<Var>& parts);
Var slice0(const Var& a, int begin, int end);  // along dim 0
Var row(const Var& a, int r);                  // row of a 2-D tensor -> 1-D

// ---- reductions / vector ops ----
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var dot(const Var& a, const Var& b);
Var pick(const Var& a, int index);  // scalar a[index]
Var logsumexp(const Var& a);        // over all entries
Var l2_normalize(const Var& a, double eps = 1e-12);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
// W: (M,K), x: (K), optional bias (M)
Var linear(const Var& w, const Var& x, const Var& b = nullptr);
// out[n] = sum_c w[n,c] * f[n,c]  (per-row scoring)
Var rowwise_dot(const Var& w, const Var& f);

// ---- conv / spatial ----
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample_nearest2(const Var& x, int h_out, int w_out);
// softmax over the last dimension of a 2-D tensor, rows independent
Var softmax_rows(const Var& a);
// m: (C,H,W), l: (C) -> (1,H,W) per-location inner product
Var channel_dot(const Var& m, const Var& l);
// m: (C,H,W), r: (1,H,W) -> broadcast multiply over channels
Var spatial_mul(const Var& m, const Var& r);
// m: (C,H,W), gate: (C) -> broadcast multiply over locations
Var channel_mul(const Var& m, const Var& gate);
// per-channel standardization over the spatial extent, then scale and shift
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var embed_lookup(const Var& table, const std::vector<int>& ids);  // (T,D)

// ---- fused detection losses ----
// Sigmoid focal terms summed over every location of a (1,H,W) or (H,W)
// logit map; positives marked in the mask.
Var focal_loss_sum(const Var& logits, const std::vector<uint8_t>& positive,
                   double alpha, double gamma);

struct BoxRegressionTargets {
  std::vector<int> positions;   // flat h*W+w indices of positive locations
  std::vector<double> center_x;  // location centers, same order
  std::vector<double> center_y;
  double stride = 1.0;
  std::array<double, 4> gt = {0, 0, 0, 0};  // x1,y1,x2,y2
};

// Sum over positives of (1 - GIoU(decoded box, gt)). reg_raw is (4,H,W) of
// unconstrained values; distances are exp(raw)*stride.
Var giou_loss_sum(const Var& reg_raw, const BoxRegressionTargets& targets);

}  // namespace cg
