#include "gnnx/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace gnnx::ad {

namespace {

constexpr double kEps = 1e-12;

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

const Matrix& Var::value() const {
  if (!tape_) throw std::runtime_error("Var: empty handle");
  return tape_->node(*this).value;
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1)
    throw std::invalid_argument("Var::scalar: not a 1x1 value");
  return v(0, 0);
}

int Tape::emit(Matrix value, bool requires_grad, std::function<void(Tape&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.backprop = std::move(backprop);
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tape::Node& Tape::node(const Var& v) {
  if (v.gen_ != generation_ || v.id_ < 0 || v.id_ >= static_cast<int>(nodes_.size()))
    throw std::runtime_error("Tape: stale Var (tape already cleared)");
  return nodes_[static_cast<std::size_t>(v.id_)];
}

const Tape::Node& Tape::node(const Var& v) const {
  return const_cast<Tape*>(this)->node(v);
}

Matrix& Tape::grad_of(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

Var Tape::leaf(Tensor& t) {
  Tensor* sink = &t;
  int id = emit(t.value, t.requires_grad, nullptr);
  nodes_.back().sink = sink;
  return Var(this, id, generation_);
}

Var Tape::constant(Matrix v) {
  return Var(this, emit(std::move(v), false, nullptr), generation_);
}

Var Tape::constant_scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

void Tape::backward(const Var& loss) {
  Node& l = node(loss);  // throws on a stale handle (double backward)
  if (l.value.rows() != 1 || l.value.cols() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  if (!l.requires_grad) {
    // nothing depends on a parameter; clear and return
    nodes_.clear();
    ++generation_;
    return;
  }
  l.grad(0, 0) = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad) continue;
    if (n.backprop) n.backprop(*this);
    if (n.sink && n.sink->requires_grad) n.sink->grad += n.grad;
  }
  nodes_.clear();
  ++generation_;
}

// ---- op helpers ----

#define GNNX_NODE(t, id) (t).nodes_[static_cast<std::size_t>(id)]

struct detail_access {
  static Var make(Tape& t, int id) { return Var(&t, id, t.generation_); }
  static int id(const Var& v) { return v.id_; }
  static Tape::Node& node_at(Tape& t, int id) { return GNNX_NODE(t, id); }
  static int emit(Tape& t, Matrix value, bool rg, std::function<void(Tape&)> bp) {
    return t.emit(std::move(value), rg, std::move(bp));
  }
};

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw std::runtime_error("op on empty Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  if (&t != &tape_of(b)) throw std::invalid_argument("operands on different tapes");
  return t;
}

Var unary(const Var& a, Matrix value,
          std::function<void(Matrix& da, const Matrix& g, const Matrix& av,
                             const Matrix& yv)>
              pull) {
  Tape& t = tape_of(a);
  int ia = detail_access::id(a);
  bool rg = detail_access::node_at(t, ia).requires_grad;
  int id = detail_access::emit(t, std::move(value), rg, nullptr);
  if (rg) {
    detail_access::node_at(t, id).backprop = [ia, id, pull = std::move(pull)](Tape& tp) {
      auto& out = detail_access::node_at(tp, id);
      auto& in = detail_access::node_at(tp, ia);
      pull(in.grad, out.grad, in.value, out.value);
    };
  }
  return detail_access::make(t, id);
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims differ");
  int ia = detail_access::id(a), ib = detail_access::id(b);
  bool rg = GNNX_NODE(t, ia).requires_grad || GNNX_NODE(t, ib).requires_grad;
  Matrix y = a.value() * b.value();
  int id = detail_access::emit(t, std::move(y), rg, nullptr);
  if (rg) {
    GNNX_NODE(t, id).backprop = [ia, ib, id](Tape& tp) {
      auto& out = GNNX_NODE(tp, id);
      auto& na = GNNX_NODE(tp, ia);
      auto& nb = GNNX_NODE(tp, ib);
      if (na.requires_grad) na.grad.noalias() += out.grad * nb.value.transpose();
      if (nb.requires_grad) nb.grad.noalias() += na.value.transpose() * out.grad;
    };
  }
  return detail_access::make(t, id);
}

Var matmul(const SparseMatrix& a, const Var& b) {
  Tape& t = tape_of(b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims differ");
  int ib = detail_access::id(b);
  bool rg = GNNX_NODE(t, ib).requires_grad;
  Matrix y = a * b.value();
  int id = detail_access::emit(t, std::move(y), rg, nullptr);
  if (rg) {
    SparseMatrix at = a.transpose();
    GNNX_NODE(t, id).backprop = [ib, id, at = std::move(at)](Tape& tp) {
      auto& out = GNNX_NODE(tp, id);
      auto& nb = GNNX_NODE(tp, ib);
      nb.grad += at * out.grad;
    };
  }
  return detail_access::make(t, id);
}

Var transpose(const Var& a) {
  return unary(a, a.value().transpose(),
               [](Matrix& da, const Matrix& g, const Matrix&, const Matrix&) {
                 da += g.transpose();
               });
}

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  check_same_shape(a, b, "add");
  int ia = detail_access::id(a), ib = detail_access::id(b);
  bool rg = GNNX_NODE(t, ia).requires_grad || GNNX_NODE(t, ib).requires_grad;
  int id = detail_access::emit(t, a.value() + b.value(), rg, nullptr);
  if (rg) {
    GNNX_NODE(t, id).backprop = [ia, ib, id](Tape& tp) {
      auto& out = GNNX_NODE(tp, id);
      if (GNNX_NODE(tp, ia).requires_grad) GNNX_NODE(tp, ia).grad += out.grad;
      if (GNNX_NODE(tp, ib).requires_grad) GNNX_NODE(tp, ib).grad += out.grad;
    };
  }
  return detail_access::make(t, id);
}

Var sub(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  check_same_shape(a, b, "sub");
  int ia = detail_access::id(a), ib = detail_access::id(b);
  bool rg = GNNX_NODE(t, ia).requires_grad || GNNX_NODE(t, ib).requires_grad;
  int id = detail_access::emit(t, a.value() - b.value(), rg, nullptr);
  if (rg) {
    GNNX_NODE(t, id).backprop = [ia, ib, id](Tape& tp) {
      auto& out = GNNX_NODE(tp, id);
      if (GNNX_NODE(tp, ia).requires_grad) GNNX_NODE(tp, ia).grad += out.grad;
      if (GNNX_NODE(tp, ib).requires_grad) GNNX_NODE(tp, ib).grad -= out.grad;
    };
  }
  return detail_access::make(t, id);
}

Var add_scalar(const Var& a, double c) {
  return unary(a, a.value().array() + c,
               [](Matrix& da, const Matrix& g, const Matrix&, const Matrix&) {
                 da += g;
               });
}

Var scalar_mul(const Var& a, double c) {
  return unary(a, a.value() * c,
               [c](Matrix& da, const Matrix& g, const Matrix&, const Matrix&) {
                 da += c * g;
               });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  check_same_shape(a, b, "hadamard");
  int ia = detail_access::id(a), ib = detail_access::id(b);
  bool rg = GNNX_NODE(t, ia).requires_grad || GNNX_NODE(t, ib).requires_grad;
  int id = detail_access::emit(t, a.value().cwiseProduct(b.value()), rg, nullptr);
  if (rg) {
    GNNX_NODE(t, id).backprop = [ia, ib, id](Tape& tp) {
      auto& out = GNNX_NODE(tp, id);
      auto& na = GNNX_NODE(tp, ia);
      auto& nb = GNNX_NODE(tp, ib);
      if (na.requires_grad) na.grad += out.grad.cwiseProduct(nb.value);
      if (nb.requires_grad) nb.grad += out.grad.cwiseProduct(na.value);
    };
  }
  return detail_access::make(t, id);
}

Var relu(const Var& a) {
  return unary(a, a.value().cwiseMax(0.0),
               [](Matrix& da, const Matrix& g, const Matrix& av, const Matrix&) {
                 da.array() += g.array() * (av.array() > 0.0).cast<double>();
               });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix y = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return unary(a, std::move(y),
               [slope](Matrix& da, const Matrix& g, const Matrix& av, const Matrix&) {
                 da.array() += g.array() * av.unaryExpr([slope](double x) {
                                              return x > 0.0 ? 1.0 : slope;
                                            }).array();
               });
}

Var sigmoid(const Var& a) {
  Matrix y = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return unary(a, std::move(y),
               [](Matrix& da, const Matrix& g, const Matrix&, const Matrix& yv) {
                 da.array() += g.array() * yv.array() * (1.0 - yv.array());
               });
}

Var exp(const Var& a) {
  return unary(a, a.value().array().exp(),
               [](Matrix& da, const Matrix& g, const Matrix&, const Matrix& yv) {
                 da.array() += g.array() * yv.array();
               });
}

Var log(const Var& a) {
  return unary(a, a.value().array().log(),
               [](Matrix& da, const Matrix& g, const Matrix& av, const Matrix&) {
                 da.array() += g.array() / av.array();
               });
}

Var sum(const Var& a) {
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  return unary(a, std::move(y),
               [](Matrix& da, const Matrix& g, const Matrix&, const Matrix&) {
                 da.array() += g(0, 0);
               });
}

Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.rows() * a.cols());
  Matrix y(1, 1);
  y(0, 0) = a.value().sum() * inv;
  return unary(a, std::move(y),
               [inv](Matrix& da, const Matrix& g, const Matrix&, const Matrix&) {
                 da.array() += g(0, 0) * inv;
               });
}

Var rowsum(const Var& a) {
  Matrix y = a.value().rowwise().sum();
  return unary(a, std::move(y),
               [](Matrix& da, const Matrix& g, const Matrix&, const Matrix&) {
                 da.colwise() += g.col(0);
               });
}

Var softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double mx = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - mx).exp();
    y.row(i) /= y.row(i).sum();
  }
  return unary(a, std::move(y),
               [](Matrix& da, const Matrix& g, const Matrix&, const Matrix& yv) {
                 Eigen::VectorXd dot = (g.cwiseProduct(yv)).rowwise().sum();
                 da += yv.cwiseProduct(g - dot.replicate(1, g.cols()));
               });
}

Var row_normalize(const Var& a) {
  Eigen::VectorXd s = a.value().rowwise().sum().array() + kEps;
  Matrix y = a.value().array().colwise() / s.array();
  return unary(a, std::move(y),
               [s = std::move(s)](Matrix& da, const Matrix& g, const Matrix&,
                                  const Matrix& yv) {
                 Eigen::VectorXd dot = (g.cwiseProduct(yv)).rowwise().sum();
                 da.array() +=
                     (g - dot.replicate(1, g.cols())).array().colwise() / s.array();
               });
}

Var rsqrt_safe(const Var& a) {
  Matrix y = a.value().unaryExpr(
      [](double x) { return x > kEps ? 1.0 / std::sqrt(x) : 0.0; });
  return unary(a, std::move(y),
               [](Matrix& da, const Matrix& g, const Matrix& av, const Matrix&) {
                 da += g.cwiseProduct(av.unaryExpr([](double x) {
                   return x > kEps ? -0.5 * std::pow(x, -1.5) : 0.0;
                 }));
               });
}

Var scale_cols(const Var& x, const Var& r) {
  Tape& t = tape_of(x, r);
  if (r.rows() != 1 || r.cols() != x.cols())
    throw std::invalid_argument("scale_cols: r must be 1 x cols(x)");
  int ix = detail_access::id(x), ir = detail_access::id(r);
  bool rg = GNNX_NODE(t, ix).requires_grad || GNNX_NODE(t, ir).requires_grad;
  Matrix y = x.value().array().rowwise() * r.value().row(0).array();
  int id = detail_access::emit(t, std::move(y), rg, nullptr);
  if (rg) {
    GNNX_NODE(t, id).backprop = [ix, ir, id](Tape& tp) {
      auto& out = GNNX_NODE(tp, id);
      auto& nx = GNNX_NODE(tp, ix);
      auto& nr = GNNX_NODE(tp, ir);
      if (nx.requires_grad)
        nx.grad.array() += out.grad.array().rowwise() * nr.value.row(0).array();
      if (nr.requires_grad)
        nr.grad.row(0) += (out.grad.cwiseProduct(nx.value)).colwise().sum();
    };
  }
  return detail_access::make(t, id);
}

Var add_row_broadcast(const Var& x, const Var& b) {
  Tape& t = tape_of(x, b);
  if (b.rows() != 1 || b.cols() != x.cols())
    throw std::invalid_argument("add_row_broadcast: b must be 1 x cols(x)");
  int ix = detail_access::id(x), ib = detail_access::id(b);
  bool rg = GNNX_NODE(t, ix).requires_grad || GNNX_NODE(t, ib).requires_grad;
  Matrix y = x.value().rowwise() + b.value().row(0);
  int id = detail_access::emit(t, std::move(y), rg, nullptr);
  if (rg) {
    GNNX_NODE(t, id).backprop = [ix, ib, id](Tape& tp) {
      auto& out = GNNX_NODE(tp, id);
      if (GNNX_NODE(tp, ix).requires_grad) GNNX_NODE(tp, ix).grad += out.grad;
      if (GNNX_NODE(tp, ib).requires_grad)
        GNNX_NODE(tp, ib).grad.row(0) += out.grad.colwise().sum();
    };
  }
  return detail_access::make(t, id);
}

Var select_row(const Var& x, int row) {
  if (row < 0 || row >= x.rows()) throw std::invalid_argument("select_row: out of range");
  return unary(x, x.value().row(row),
               [row](Matrix& da, const Matrix& g, const Matrix&, const Matrix&) {
                 da.row(row) += g.row(0);
               });
}

Var gather_rows(const Var& x, const std::vector<int>& idx) {
  Matrix y(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t e = 0; e < idx.size(); ++e) y.row(static_cast<Eigen::Index>(e)) = x.value().row(idx[e]);
  return unary(x, std::move(y),
               [idx](Matrix& da, const Matrix& g, const Matrix&, const Matrix&) {
                 for (std::size_t e = 0; e < idx.size(); ++e)
                   da.row(idx[e]) += g.row(static_cast<Eigen::Index>(e));
               });
}

Var gather_entries(const Var& a, const std::vector<std::pair<int, int>>& at) {
  Matrix y(static_cast<Eigen::Index>(at.size()), 1);
  for (std::size_t e = 0; e < at.size(); ++e) y(static_cast<Eigen::Index>(e), 0) = a.value()(at[e].first, at[e].second);
  return unary(a, std::move(y),
               [at](Matrix& da, const Matrix& g, const Matrix&, const Matrix&) {
                 for (std::size_t e = 0; e < at.size(); ++e)
                   da(at[e].first, at[e].second) += g(static_cast<Eigen::Index>(e), 0);
               });
}

Var segment_normalize(const Var& x, const std::vector<int>& segment, int num_segments) {
  if (x.cols() != 1 || x.rows() != static_cast<Eigen::Index>(segment.size()))
    throw std::invalid_argument("segment_normalize: x must be E x 1 matching segment ids");
  Eigen::VectorXd s = Eigen::VectorXd::Constant(num_segments, kEps);
  for (std::size_t e = 0; e < segment.size(); ++e) s(segment[e]) += x.value()(static_cast<Eigen::Index>(e), 0);
  Matrix y(x.rows(), 1);
  for (std::size_t e = 0; e < segment.size(); ++e)
    y(static_cast<Eigen::Index>(e), 0) = x.value()(static_cast<Eigen::Index>(e), 0) / s(segment[e]);
  return unary(x, std::move(y),
               [segment, s = std::move(s)](Matrix& da, const Matrix& g, const Matrix&,
                                           const Matrix& yv) {
                 Eigen::VectorXd dot = Eigen::VectorXd::Zero(s.size());
                 for (std::size_t e = 0; e < segment.size(); ++e)
                   dot(segment[e]) += g(static_cast<Eigen::Index>(e), 0) * yv(static_cast<Eigen::Index>(e), 0);
                 for (std::size_t e = 0; e < segment.size(); ++e)
                   da(static_cast<Eigen::Index>(e), 0) +=
                       (g(static_cast<Eigen::Index>(e), 0) - dot(segment[e])) / s(segment[e]);
               });
}

Var weighted_gather_sum(const Var& alpha, const Var& h, const std::vector<int>& src,
                        const std::vector<int>& dst) {
  Tape& t = tape_of(alpha, h);
  if (alpha.cols() != 1 || alpha.rows() != static_cast<Eigen::Index>(src.size()) ||
      src.size() != dst.size())
    throw std::invalid_argument("weighted_gather_sum: bad edge list shapes");
  int ia = detail_access::id(alpha), ih = detail_access::id(h);
  bool rg = GNNX_NODE(t, ia).requires_grad || GNNX_NODE(t, ih).requires_grad;
  Matrix y = Matrix::Zero(h.rows(), h.cols());
  for (std::size_t e = 0; e < src.size(); ++e)
    y.row(dst[e]) += alpha.value()(static_cast<Eigen::Index>(e), 0) * h.value().row(src[e]);
  int id = detail_access::emit(t, std::move(y), rg, nullptr);
  if (rg) {
    GNNX_NODE(t, id).backprop = [ia, ih, id, src, dst](Tape& tp) {
      auto& out = GNNX_NODE(tp, id);
      auto& na = GNNX_NODE(tp, ia);
      auto& nh = GNNX_NODE(tp, ih);
      for (std::size_t e = 0; e < src.size(); ++e) {
        const Eigen::Index ee = static_cast<Eigen::Index>(e);
        if (na.requires_grad)
          na.grad(ee, 0) += out.grad.row(dst[e]).dot(nh.value.row(src[e]));
        if (nh.requires_grad)
          nh.grad.row(src[e]) += na.value(ee, 0) * out.grad.row(dst[e]);
      }
    };
  }
  return detail_access::make(t, id);
}

// ---- Adam ----

AdamState make_adam(std::span<Tensor* const> params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const Tensor* p : params) {
    s.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    s.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  return s;
}

void adam_step(AdamState& state, std::span<Tensor* const> params) {
  if (params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter count changed");
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (!p.requires_grad || p.grad.size() != p.value.size())
      throw std::invalid_argument("adam_step: parameter has no gradient");
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * p.grad;
    state.v[i] = state.beta2 * state.v[i].array() +
                 (1.0 - state.beta2) * p.grad.array().square();
    const Matrix mhat = state.m[i] / bc1;
    const Matrix vhat = state.v[i] / bc2;
    p.value.array() -= state.lr * mhat.array() / (vhat.array().sqrt() + state.eps);
    p.grad.setZero();
  }
}

// ---- finite differences ----

double finite_diff_check(const std::function<Var(Tape&)>& f,
                         std::span<Tensor* const> params, double step,
                         int samples_per_param, Rng& rng) {
  for (Tensor* p : params) p->zero_grad();
  std::vector<Matrix> analytic;
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
  }
  for (Tensor* p : params) analytic.push_back(p->grad);

  auto eval = [&]() {
    Tape tape;
    return f(tape).scalar();
  };

  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const int total = static_cast<int>(p.value.size());
    if (total == 0) continue;
    for (int s = 0; s < samples_per_param; ++s) {
      const int k = rng.uniform_int(total);
      double* cell = p.value.data() + k;
      const double saved = *cell;
      *cell = saved + step;
      const double up = eval();
      *cell = saved - step;
      const double down = eval();
      *cell = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i](k);
      // the 1e-8 floor keeps derivatives far below the resolution of the
      // central difference (~step^2) from registering as spurious error
      const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-8);
      if (rel > max_rel) max_rel = rel;
    }
  }
  for (Tensor* p : params) p->zero_grad();
  return max_rel;
}

}  // namespace gnnx::ad
