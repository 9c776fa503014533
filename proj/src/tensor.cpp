#include "jam/tensor.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <sstream>

namespace jam {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << '[' << m.rows() << ", " << m.cols() << ']';
  return os.str();
}

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

void require_same(const Matrix& a, const Matrix& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), op,
          "shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw std::invalid_argument("vars belong to different graphs");
  return a.graph();
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

// ---------------------------------------------------------------------------

int ParameterStore::add(std::string name, Matrix value) {
  if (find(name) >= 0) throw std::invalid_argument("duplicate parameter " + name);
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return static_cast<int>(params_.size()) - 1;
}

int ParameterStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

Index ParameterStore::scalar_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Gradients zero_gradients(const ParameterStore& store) {
  Gradients g;
  g.reserve(static_cast<std::size_t>(store.size()));
  for (const auto& p : store.all()) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return g;
}

const Matrix& Var::value() const { return graph_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("scalar(): value is " + shape_str(v));
  return v(0, 0);
}

// ---------------------------------------------------------------------------

Graph::Graph(const ParameterStore* params) : params_(params) {
  nodes_.reserve(512);
  if (params_) param_nodes_.assign(static_cast<std::size_t>(params_->size()), -1);
}

Var Graph::record(Matrix value, const char* op, std::vector<int> inputs, BackwardFn backward) {
  const int id = static_cast<int>(nodes_.size());
  if (!value.allFinite()) throw NonFiniteError(id, op);
  bool rg = false;
  for (int in : inputs) rg = rg || nodes_[static_cast<std::size_t>(in)].requires_grad;
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.requires_grad = rg;
  if (rg) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, id);
}

Var Graph::constant(Matrix value) { return record(std::move(value), "constant", {}, nullptr); }

Var Graph::constant(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var Graph::param(int id) {
  if (!params_ || id < 0 || id >= params_->size()) throw std::out_of_range("unknown parameter id");
  int& slot = param_nodes_[static_cast<std::size_t>(id)];
  if (slot >= 0) return Var(this, slot);
  const int node = static_cast<int>(nodes_.size());
  Node n;
  n.value = (*params_)[id].value;
  n.op = "param";
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  slot = node;
  return Var(this, node);
}

Var Graph::param(const std::string& name) {
  const int id = params_ ? params_->find(name) : -1;
  if (id < 0) throw std::out_of_range("unknown parameter " + name);
  return param(id);
}

void Graph::add_grad(int id, const Matrix& delta) { add_grad_expr(id, delta); }

void Graph::backward(Var output) {
  if (&output.graph() != this) throw std::invalid_argument("output belongs to another graph");
  const Matrix& out = value(output.id());
  if (out.size() != 1) throw ShapeError("backward: output is not scalar " + shape_str(out));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  auto& root = nodes_[static_cast<std::size_t>(output.id())];
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (int id = output.id(); id >= 0; --id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && n.grad.size() != 0) n.backward(*this, id);
  }
}

Matrix Graph::param_grad(int id) const {
  const auto& p = (*params_)[id];
  const int node = param_nodes_[static_cast<std::size_t>(id)];
  if (node < 0 || nodes_[static_cast<std::size_t>(node)].grad.size() == 0) {
    return Matrix::Zero(p.value.rows(), p.value.cols());
  }
  return nodes_[static_cast<std::size_t>(node)].grad;
}

void Graph::accumulate(Gradients& out) const {
  for (std::size_t i = 0; i < param_nodes_.size(); ++i) {
    const int node = param_nodes_[i];
    if (node < 0) continue;
    const Matrix& g = nodes_[static_cast<std::size_t>(node)].grad;
    if (g.size() != 0) out[i] += g;
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require(a.cols() == b.rows(), "matmul",
          "inner dims " + shape_str(a.value()) + " x " + shape_str(b.value()));
  const int ia = a.id(), ib = b.id();
  return g.record(a.value() * b.value(), "matmul", {ia, ib}, [ia, ib](Graph& gr, int self) {
    const Matrix& go = gr.grad(self);
    if (gr.requires_grad(ia)) gr.add_grad_expr(ia, go * gr.value(ib).transpose());
    if (gr.requires_grad(ib)) gr.add_grad_expr(ib, gr.value(ia).transpose() * go);
  });
}

Var affine(Var x, Var w, Var b) {
  Graph& g = same_graph(x, w);
  require(x.cols() == w.rows(), "affine",
          "inner dims " + shape_str(x.value()) + " x " + shape_str(w.value()));
  require(b.rows() == 1 && b.cols() == w.cols(), "affine", "bias " + shape_str(b.value()));
  Matrix out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  const int ix = x.id(), iw = w.id(), ib = b.id();
  return g.record(std::move(out), "affine", {ix, iw, ib}, [ix, iw, ib](Graph& gr, int self) {
    const Matrix& go = gr.grad(self);
    if (gr.requires_grad(ix)) gr.add_grad_expr(ix, go * gr.value(iw).transpose());
    if (gr.requires_grad(iw)) gr.add_grad_expr(iw, gr.value(ix).transpose() * go);
    if (gr.requires_grad(ib)) gr.add_grad_expr(ib, go.colwise().sum());
  });
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same(a.value(), b.value(), "add");
  const int ia = a.id(), ib = b.id();
  return g.record(a.value() + b.value(), "add", {ia, ib}, [ia, ib](Graph& gr, int self) {
    gr.add_grad(ia, gr.grad(self));
    gr.add_grad(ib, gr.grad(self));
  });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same(a.value(), b.value(), "sub");
  const int ia = a.id(), ib = b.id();
  return g.record(a.value() - b.value(), "sub", {ia, ib}, [ia, ib](Graph& gr, int self) {
    gr.add_grad(ia, gr.grad(self));
    gr.add_grad_expr(ib, -gr.grad(self));
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same(a.value(), b.value(), "mul");
  const int ia = a.id(), ib = b.id();
  return g.record(a.value().cwiseProduct(b.value()), "mul", {ia, ib}, [ia, ib](Graph& gr, int self) {
    const Matrix& go = gr.grad(self);
    if (gr.requires_grad(ia)) gr.add_grad_expr(ia, go.cwiseProduct(gr.value(ib)));
    if (gr.requires_grad(ib)) gr.add_grad_expr(ib, go.cwiseProduct(gr.value(ia)));
  });
}

Var div(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same(a.value(), b.value(), "div");
  const int ia = a.id(), ib = b.id();
  return g.record(a.value().cwiseQuotient(b.value()), "div", {ia, ib}, [ia, ib](Graph& gr, int self) {
    const Matrix& go = gr.grad(self);
    const Matrix& bv = gr.value(ib);
    if (gr.requires_grad(ia)) gr.add_grad_expr(ia, go.cwiseQuotient(bv));
    if (gr.requires_grad(ib)) {
      gr.add_grad_expr(ib, -(go.array() * gr.value(self).array() / bv.array()).matrix());
    }
  });
}

Var add_row(Var a, Var r) {
  Graph& g = same_graph(a, r);
  require(r.rows() == 1 && r.cols() == a.cols(), "add_row",
          shape_str(a.value()) + " + " + shape_str(r.value()));
  Matrix out = a.value();
  out.rowwise() += r.value().row(0);
  const int ia = a.id(), ir = r.id();
  return g.record(std::move(out), "add_row", {ia, ir}, [ia, ir](Graph& gr, int self) {
    gr.add_grad(ia, gr.grad(self));
    if (gr.requires_grad(ir)) gr.add_grad_expr(ir, gr.grad(self).colwise().sum());
  });
}

Var scale(Var a, double s) {
  const int ia = a.id();
  return a.graph().record(a.value() * s, "scale", {ia}, [ia, s](Graph& gr, int self) {
    gr.add_grad_expr(ia, gr.grad(self) * s);
  });
}

Var square(Var a) {
  const int ia = a.id();
  return a.graph().record(a.value().array().square().matrix(), "square", {ia},
                          [ia](Graph& gr, int self) {
                            gr.add_grad_expr(ia, (2.0 * gr.grad(self).array() * gr.value(ia).array()).matrix());
                          });
}

Var neg(Var a) { return scale(a, -1.0); }

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
  const int ia = a.id();
  return a.graph().record(std::move(out), "gelu", {ia}, [ia](Graph& gr, int self) {
    const Matrix d = gr.value(ia).unaryExpr([](double v) {
      return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
    });
    gr.add_grad_expr(ia, gr.grad(self).cwiseProduct(d));
  });
}

Var tanh(Var a) {
  const int ia = a.id();
  return a.graph().record(a.value().array().tanh().matrix(), "tanh", {ia}, [ia](Graph& gr, int self) {
    const auto& y = gr.value(self).array();
    gr.add_grad_expr(ia, (gr.grad(self).array() * (1.0 - y.square())).matrix());
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  const int ia = a.id();
  return a.graph().record(std::move(out), "sigmoid", {ia}, [ia](Graph& gr, int self) {
    const auto& y = gr.value(self).array();
    gr.add_grad_expr(ia, (gr.grad(self).array() * y * (1.0 - y)).matrix());
  });
}

Var exp(Var a) {
  const int ia = a.id();
  return a.graph().record(a.value().array().exp().matrix(), "exp", {ia}, [ia](Graph& gr, int self) {
    gr.add_grad_expr(ia, gr.grad(self).cwiseProduct(gr.value(self)));
  });
}

Var log(Var a) {
  const int ia = a.id();
  return a.graph().record(a.value().array().log().matrix(), "log", {ia}, [ia](Graph& gr, int self) {
    gr.add_grad_expr(ia, gr.grad(self).cwiseQuotient(gr.value(ia)));
  });
}

Var exp_clamped(Var a, double lo, double hi) {
  Matrix out = a.value().array().exp().min(hi).max(lo).matrix();
  const int ia = a.id();
  return a.graph().record(std::move(out), "exp_clamped", {ia}, [ia, lo, hi](Graph& gr, int self) {
    const Matrix& y = gr.value(self);
    Matrix d = gr.grad(self).cwiseProduct(y);
    for (Index i = 0; i < d.size(); ++i) {
      if (y.data()[i] <= lo || y.data()[i] >= hi) d.data()[i] = 0.0;
    }
    gr.add_grad_expr(ia, d);
  });
}

// ---------------------------------------------------------------------------
// Normalization

Var softmax_rows(Var a, const Mask& mask) {
  const Matrix& x = a.value();
  const bool masked = mask.size() != 0;
  if (masked) {
    require(mask.rows() == x.rows() && mask.cols() == x.cols(), "softmax_rows", "mask shape");
  }
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < x.cols(); ++c) {
      if (!masked || mask(r, c)) mx = std::max(mx, x(r, c));
    }
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (Index c = 0; c < x.cols(); ++c) {
      if (!masked || mask(r, c)) {
        out(r, c) = std::exp(x(r, c) - mx);
        z += out(r, c);
      }
    }
    out.row(r) /= z;
  }
  const int ia = a.id();
  return a.graph().record(std::move(out), "softmax", {ia}, [ia](Graph& gr, int self) {
    const Matrix& y = gr.value(self);
    const Matrix& go = gr.grad(self);
    const Eigen::VectorXd dot = go.cwiseProduct(y).rowwise().sum();
    Matrix d = y.cwiseProduct(go);
    d -= (y.array().colwise() * dot.array()).matrix();
    gr.add_grad_expr(ia, d);
  });
}

Var log_softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    const double lse = mx + std::log((x.row(r).array() - mx).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  const int ia = a.id();
  return a.graph().record(std::move(out), "log_softmax", {ia}, [ia](Graph& gr, int self) {
    const Matrix& go = gr.grad(self);
    const Matrix p = gr.value(self).array().exp().matrix();
    const Eigen::VectorXd gs = go.rowwise().sum();
    Matrix d = go;
    d -= (p.array().colwise() * gs.array()).matrix();
    gr.add_grad_expr(ia, d);
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Graph& g = same_graph(x, gain);
  const Matrix& xv = x.value();
  const Index n = xv.cols();
  require(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n, "layer_norm",
          "gain/bias shape");
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return g.record(std::move(out), "layer_norm", {ix, ig, ib},
                  [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& gr, int self) {
                    const Matrix& go = gr.grad(self);
                    if (gr.requires_grad(ig)) gr.add_grad_expr(ig, go.cwiseProduct(xhat).colwise().sum());
                    if (gr.requires_grad(ib)) gr.add_grad_expr(ib, go.colwise().sum());
                    if (!gr.requires_grad(ix)) return;
                    const auto gain_row = gr.value(ig).row(0).array();
                    const Index n = xhat.cols();
                    Matrix dx(xhat.rows(), n);
                    for (Index r = 0; r < xhat.rows(); ++r) {
                      const Eigen::ArrayXd dxhat = (go.row(r).array() * gain_row).transpose();
                      const Eigen::ArrayXd xh = xhat.row(r).transpose().array();
                      const double m1 = dxhat.mean();
                      const double m2 = (dxhat * xh).mean();
                      dx.row(r) = (inv_std(r) * (dxhat - m1 - xh * m2)).transpose();
                    }
                    gr.add_grad_expr(ix, dx);
                  });
}

// ---------------------------------------------------------------------------
// Attention

Var attention(Var q, Var k, Var v, const Mask& mask, int heads) {
  Graph& g = same_graph(q, k);
  const Index d = q.cols();
  require(heads > 0 && d % heads == 0, "attention", "feature dim not divisible by heads");
  require(k.cols() == d && v.cols() == d && k.rows() == v.rows(), "attention",
          "q/k/v shapes " + shape_str(q.value()) + shape_str(k.value()) + shape_str(v.value()));
  const Index nq = q.rows(), nk = k.rows();
  const bool masked = mask.size() != 0;
  if (masked) require(mask.rows() == nq && mask.cols() == nk, "attention", "mask shape");
  const Index dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  Matrix out(nq, d);
  bool warned = false;
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.value().middleCols(h * dh, dh);
    const auto kh = k.value().middleCols(h * dh, dh);
    const auto vh = v.value().middleCols(h * dh, dh);
    Matrix s = (qh * kh.transpose()) * inv_scale;
    Matrix p = Matrix::Zero(nq, nk);
    for (Index r = 0; r < nq; ++r) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Index c = 0; c < nk; ++c) {
        if (!masked || mask(r, c)) mx = std::max(mx, s(r, c));
      }
      if (!std::isfinite(mx)) {
        if (!warned && h == 0) {
          spdlog::debug("attention: query {} has every key masked; using zero context", r);
          warned = true;
        }
        continue;
      }
      double z = 0.0;
      for (Index c = 0; c < nk; ++c) {
        if (!masked || mask(r, c)) {
          p(r, c) = std::exp(s(r, c) - mx);
          z += p(r, c);
        }
      }
      p.row(r) /= z;
    }
    out.middleCols(h * dh, dh).noalias() = p * vh;
    probs[static_cast<std::size_t>(h)] = std::move(p);
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return g.record(std::move(out), "attention", {iq, ik, iv},
                  [iq, ik, iv, heads, dh, inv_scale, probs = std::move(probs)](Graph& gr, int self) {
                    const Matrix& go = gr.grad(self);
                    const Matrix& qv = gr.value(iq);
                    const Matrix& kv = gr.value(ik);
                    const Matrix& vv = gr.value(iv);
                    Matrix dq = Matrix::Zero(qv.rows(), qv.cols());
                    Matrix dk = Matrix::Zero(kv.rows(), kv.cols());
                    Matrix dv = Matrix::Zero(vv.rows(), vv.cols());
                    for (int h = 0; h < heads; ++h) {
                      const Matrix& p = probs[static_cast<std::size_t>(h)];
                      const auto goh = go.middleCols(h * dh, dh);
                      dv.middleCols(h * dh, dh).noalias() += p.transpose() * goh;
                      Matrix dp = goh * vv.middleCols(h * dh, dh).transpose();
                      const Eigen::VectorXd dot = dp.cwiseProduct(p).rowwise().sum();
                      Matrix ds = p.cwiseProduct(dp);
                      ds -= (p.array().colwise() * dot.array()).matrix();
                      ds *= inv_scale;
                      dq.middleCols(h * dh, dh).noalias() += ds * kv.middleCols(h * dh, dh);
                      dk.middleCols(h * dh, dh).noalias() += ds.transpose() * qv.middleCols(h * dh, dh);
                    }
                    gr.add_grad_expr(iq, dq);
                    gr.add_grad_expr(ik, dk);
                    gr.add_grad_expr(iv, dv);
                  });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(Var a) {
  const int ia = a.id();
  const Index r = a.rows(), c = a.cols();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph().record(std::move(out), "sum", {ia}, [ia, r, c](Graph& gr, int self) {
    gr.add_grad_expr(ia, Matrix::Constant(r, c, gr.grad(self)(0, 0)));
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean_rows(Var a) {
  const int ia = a.id();
  const Index n = a.rows();
  require(n > 0, "mean_rows", "empty input");
  return a.graph().record(a.value().colwise().mean(), "mean_rows", {ia}, [ia, n](Graph& gr, int self) {
    const Matrix& go = gr.grad(self);
    gr.add_grad_expr(ia, go.replicate(n, 1) / static_cast<double>(n));
  });
}

Var segment_max(Var a, Index seg, const std::vector<bool>& row_valid) {
  const Matrix& x = a.value();
  require(seg > 0 && x.rows() % seg == 0, "segment_max", "rows not a multiple of segment length");
  const bool use_valid = !row_valid.empty();
  require(!use_valid || static_cast<Index>(row_valid.size()) == x.rows(), "segment_max", "validity length");
  const Index n = x.rows() / seg;
  Matrix out = Matrix::Zero(n, x.cols());
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> arg =
      Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(n, x.cols(), -1);
  for (Index s = 0; s < n; ++s) {
    for (Index r = s * seg; r < (s + 1) * seg; ++r) {
      if (use_valid && !row_valid[static_cast<std::size_t>(r)]) continue;
      for (Index c = 0; c < x.cols(); ++c) {
        if (arg(s, c) < 0 || x(r, c) > out(s, c)) {
          out(s, c) = x(r, c);
          arg(s, c) = r;
        }
      }
    }
  }
  const int ia = a.id();
  const Index rows = x.rows(), cols = x.cols();
  return a.graph().record(std::move(out), "segment_max", {ia},
                          [ia, rows, cols, arg = std::move(arg)](Graph& gr, int self) {
                            const Matrix& go = gr.grad(self);
                            Matrix d = Matrix::Zero(rows, cols);
                            for (Index s = 0; s < arg.rows(); ++s) {
                              for (Index c = 0; c < cols; ++c) {
                                if (arg(s, c) >= 0) d(arg(s, c), c) += go(s, c);
                              }
                            }
                            gr.add_grad_expr(ia, d);
                          });
}

Var segment_mean(Var a, Index seg) {
  const Matrix& x = a.value();
  require(seg > 0 && x.rows() % seg == 0, "segment_mean", "rows not a multiple of segment length");
  const Index n = x.rows() / seg;
  Matrix out(n, x.cols());
  for (Index s = 0; s < n; ++s) out.row(s) = x.middleRows(s * seg, seg).colwise().mean();
  const int ia = a.id();
  return a.graph().record(std::move(out), "segment_mean", {ia}, [ia, seg](Graph& gr, int self) {
    const Matrix& go = gr.grad(self);
    Matrix d(go.rows() * seg, go.cols());
    for (Index s = 0; s < go.rows(); ++s) {
      d.middleRows(s * seg, seg) = go.row(s).replicate(seg, 1) / static_cast<double>(seg);
    }
    gr.add_grad_expr(ia, d);
  });
}

// ---------------------------------------------------------------------------
// Structural

Var slice_rows(Var a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows", "range out of bounds");
  const int ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return a.graph().record(a.value().middleRows(start, count), "slice_rows", {ia},
                          [ia, start, count, r, c](Graph& gr, int self) {
                            Matrix d = Matrix::Zero(r, c);
                            d.middleRows(start, count) = gr.grad(self);
                            gr.add_grad_expr(ia, d);
                          });
}

Var slice_cols(Var a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols", "range out of bounds");
  const int ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return a.graph().record(a.value().middleCols(start, count), "slice_cols", {ia},
                          [ia, start, count, r, c](Graph& gr, int self) {
                            Matrix d = Matrix::Zero(r, c);
                            d.middleCols(start, count) = gr.grad(self);
                            gr.add_grad_expr(ia, d);
                          });
}

Var row(Var a, Index r) { return slice_rows(a, r, 1); }

Var pick(Var a, Index r, Index c) { return slice_cols(slice_rows(a, r, 1), c, 1); }

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  Graph& g = parts.front().graph();
  const Index cols = parts.front().cols();
  Index rows = 0;
  std::vector<int> ids;
  std::vector<Index> offsets;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows", "column mismatch");
    offsets.push_back(rows);
    rows += p.rows();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) out.middleRows(offsets[i], parts[i].rows()) = parts[i].value();
  return g.record(std::move(out), "concat_rows", ids, [ids, offsets](Graph& gr, int self) {
    const Matrix& go = gr.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (gr.requires_grad(ids[i])) gr.add_grad_expr(ids[i], go.middleRows(offsets[i], gr.value(ids[i]).rows()));
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  Graph& g = parts.front().graph();
  const Index rows = parts.front().rows();
  Index cols = 0;
  std::vector<int> ids;
  std::vector<Index> offsets;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols", "row mismatch");
    offsets.push_back(cols);
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) out.middleCols(offsets[i], parts[i].cols()) = parts[i].value();
  return g.record(std::move(out), "concat_cols", ids, [ids, offsets](Graph& gr, int self) {
    const Matrix& go = gr.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (gr.requires_grad(ids[i])) gr.add_grad_expr(ids[i], go.middleCols(offsets[i], gr.value(ids[i]).cols()));
    }
  });
}

Var reshape(Var a, Index rows, Index cols) {
  require(rows * cols == a.value().size(), "reshape", "element count changes");
  const int ia = a.id();
  const Index r0 = a.rows(), c0 = a.cols();
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return a.graph().record(std::move(out), "reshape", {ia}, [ia, r0, c0](Graph& gr, int self) {
    gr.add_grad_expr(ia, Eigen::Map<const Matrix>(gr.grad(self).data(), r0, c0));
  });
}

Var gather_rows(Var table, const std::vector<int>& indices) {
  const Matrix& t = table.value();
  Matrix out(static_cast<Index>(indices.size()), t.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < t.rows(), "gather_rows", "index out of range");
    out.row(static_cast<Index>(i)) = t.row(indices[i]);
  }
  const int it = table.id();
  const Index r = t.rows(), c = t.cols();
  return table.graph().record(std::move(out), "gather_rows", {it}, [it, indices, r, c](Graph& gr, int self) {
    const Matrix& go = gr.grad(self);
    Matrix d = Matrix::Zero(r, c);
    for (std::size_t i = 0; i < indices.size(); ++i) d.row(indices[i]) += go.row(static_cast<Index>(i));
    gr.add_grad_expr(it, d);
  });
}

Var broadcast_rows(Var r, Index n) {
  require(r.rows() == 1, "broadcast_rows", "input must be a single row");
  const int ir = r.id();
  return r.graph().record(r.value().replicate(n, 1), "broadcast_rows", {ir}, [ir](Graph& gr, int self) {
    gr.add_grad_expr(ir, gr.grad(self).colwise().sum());
  });
}

}  // namespace jam
