#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <span>
#include <vector>

#include "gnnx/rng.hpp"

namespace gnnx::ad {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

// A leaf value: parameters and differentiable inputs. Gradients accumulate
// into `grad` when a Tape backward pass reaches the leaf.
struct Tensor {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Matrix v, bool rg = false)
      : value(std::move(v)), requires_grad(rg) {
    if (requires_grad) grad = Matrix::Zero(value.rows(), value.cols());
  }

  void zero_grad() {
    if (requires_grad) grad.setZero();
  }
};

class Tape;
struct detail_access;

// Lightweight handle to a node recorded on a Tape. Valid until the tape's
// backward() clears the recording.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  friend struct detail_access;
  Var(Tape* t, int id, std::uint64_t gen) : tape_(t), id_(id), gen_(gen) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
  std::uint64_t gen_ = 0;
};

// Records primitive operations of one forward pass; backward() propagates
// gradients in reverse order and then clears the recording. A Tape is
// single-threaded; independent computations use independent tapes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor& t);
  Var constant(Matrix v);
  Var constant_scalar(double v);

  // Propagates d(loss)/d(leaf) into every reachable Tensor::grad, then
  // clears the tape. `loss` must be 1x1. Calling backward twice on the same
  // recording is an error.
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  friend struct detail_access;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Tensor* sink = nullptr;                // set for leaves
    std::function<void(Tape&)> backprop;   // pulls this node's grad to parents
  };

  int emit(Matrix value, bool requires_grad, std::function<void(Tape&)> backprop);
  Node& node(const Var& v);
  const Node& node(const Var& v) const;
  Matrix& grad_of(int id);

  std::vector<Node> nodes_;
  std::uint64_t generation_ = 0;

  // op implementations need node access
  friend Var matmul(const Var&, const Var&);
  friend Var matmul(const SparseMatrix&, const Var&);
  friend Var transpose(const Var&);
  friend Var add(const Var&, const Var&);
  friend Var sub(const Var&, const Var&);
  friend Var add_scalar(const Var&, double);
  friend Var scalar_mul(const Var&, double);
  friend Var hadamard(const Var&, const Var&);
  friend Var relu(const Var&);
  friend Var leaky_relu(const Var&, double);
  friend Var sigmoid(const Var&);
  friend Var exp(const Var&);
  friend Var log(const Var&);
  friend Var sum(const Var&);
  friend Var mean(const Var&);
  friend Var rowsum(const Var&);
  friend Var softmax_rows(const Var&);
  friend Var row_normalize(const Var&);
  friend Var rsqrt_safe(const Var&);
  friend Var scale_cols(const Var&, const Var&);
  friend Var add_row_broadcast(const Var&, const Var&);
  friend Var select_row(const Var&, int);
  friend Var gather_rows(const Var&, const std::vector<int>&);
  friend Var gather_entries(const Var&, const std::vector<std::pair<int, int>>&);
  friend Var segment_normalize(const Var&, const std::vector<int>&, int);
  friend Var weighted_gather_sum(const Var&, const Var&, const std::vector<int>&,
                                 const std::vector<int>&);
};

// ---- primitive operations ----
Var matmul(const Var& a, const Var& b);
Var matmul(const SparseMatrix& a, const Var& b);  // constant sparse left factor
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var add_scalar(const Var& a, double c);
Var scalar_mul(const Var& a, double c);
Var hadamard(const Var& a, const Var& b);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sum(const Var& a);               // -> 1x1
Var mean(const Var& a);              // -> 1x1
Var rowsum(const Var& a);            // m x n -> m x 1
Var softmax_rows(const Var& a);      // rows sum to 1
Var row_normalize(const Var& a);     // divide each row by its sum (+eps)
Var rsqrt_safe(const Var& a);        // x > eps ? x^-1/2 : 0
Var scale_cols(const Var& x, const Var& r);          // x: m x d, r: 1 x d
Var add_row_broadcast(const Var& x, const Var& b);   // x: m x d, b: 1 x d
Var select_row(const Var& x, int row);               // -> 1 x d
// edge-list ops: idx/src/dst index rows of the dense operand
Var gather_rows(const Var& x, const std::vector<int>& idx);  // -> E x d
Var gather_entries(const Var& a, const std::vector<std::pair<int, int>>& at);  // -> E x 1
// y_e = x_e / (sum of x over e's segment + eps); x: E x 1
Var segment_normalize(const Var& x, const std::vector<int>& segment, int num_segments);
// out[dst[e]] += alpha_e * h[src[e]];  alpha: E x 1, h: m x d -> m x d
Var weighted_gather_sum(const Var& alpha, const Var& h, const std::vector<int>& src,
                        const std::vector<int>& dst);

// ---- Adam ----
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

AdamState make_adam(std::span<Tensor* const> params, double lr);
// Standard bias-corrected Adam update; zeroes gradients afterwards.
void adam_step(AdamState& state, std::span<Tensor* const> params);

// Compares analytic gradients of a scalar-valued function against central
// differences at `samples_per_param` random coordinates of each parameter.
// Returns the maximum relative error.
double finite_diff_check(const std::function<Var(Tape&)>& f,
                         std::span<Tensor* const> params, double step,
                         int samples_per_param, Rng& rng);

}  // namespace gnnx::ad
