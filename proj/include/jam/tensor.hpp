#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace jam {

/// Dense row-major storage used for every value flowing through a Graph.
/// Rank-2 is enough for the model: token sets are (count x features).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// A tensor value. Shape is always (rows, cols).
using Tensor = Matrix;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when an op produces a NaN or infinity.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(int node, const std::string& op)
      : std::runtime_error("non-finite value at node " + std::to_string(node) + " (" + op + ")"),
        node_id(node) {}
  int node_id;
};

/// Named trainable tensor.
struct Parameter {
  std::string name;
  Matrix value;
};

/// Ordered collection of parameters. Order is creation order and is what
/// checkpoints and gradient vectors are aligned with.
class ParameterStore {
 public:
  int add(std::string name, Matrix value);
  int find(const std::string& name) const;  // -1 if absent

  Parameter& operator[](int id) { return params_[static_cast<std::size_t>(id)]; }
  const Parameter& operator[](int id) const { return params_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(params_.size()); }
  Index scalar_count() const;

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

 private:
  std::vector<Parameter> params_;
};

/// One gradient matrix per parameter, aligned with a ParameterStore.
using Gradients = std::vector<Matrix>;

Gradients zero_gradients(const ParameterStore& store);

class Graph;

/// Handle to a node recorded on a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
  int id() const { return id_; }
  Graph& graph() const { return *graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Define-by-run tape for reverse-mode differentiation. A Graph is built by
/// calling ops on Vars, evaluated eagerly, and differentiated with backward().
/// Single-threaded; build one Graph per data item for parallel work.
class Graph {
 public:
  explicit Graph(const ParameterStore* params = nullptr);

  Var constant(Matrix value);
  Var constant(double value);
  Var param(int id);
  Var param(const std::string& name);

  /// Reverse pass from a 1x1 output. Gradients accumulate by summation.
  void backward(Var output);

  /// Gradient of the last backward() w.r.t. a parameter; zeros if the
  /// parameter never entered the graph.
  Matrix param_grad(int id) const;
  /// Adds every parameter gradient into `out` (aligned with the store).
  void accumulate(Gradients& out) const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const ParameterStore* params() const { return params_; }

  // -- op plumbing ---------------------------------------------------------
  using BackwardFn = std::function<void(Graph&, int self)>;
  Var record(Matrix value, const char* op, std::vector<int> inputs, BackwardFn backward);
  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// grad[id] += delta (allocating on first touch).
  void add_grad(int id, const Matrix& delta);
  template <typename Expr>
  void add_grad_expr(int id, const Expr& delta) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    const char* op = "";
    bool requires_grad = false;
  };
  const ParameterStore* params_;
  std::vector<Node> nodes_;
  std::vector<int> param_nodes_;  // parameter id -> node id, -1 when unused
};

// ---------------------------------------------------------------------------
// Differentiable ops. All ops validate shapes and throw ShapeError.

Var matmul(Var a, Var b);
/// x * W + b, with b broadcast over rows (b is 1 x out).
Var affine(Var x, Var w, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
/// a + row, with a 1 x cols row broadcast to every row of a.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var square(Var a);
Var neg(Var a);

Var gelu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
/// exp(a) clamped into [lo, hi]; zero gradient where the clamp is active.
Var exp_clamped(Var a, double lo, double hi);

/// Row-wise softmax. Masked entries (mask false) get probability 0; a row
/// with no unmasked entry becomes all zeros.
Var softmax_rows(Var a, const Mask& mask = Mask());
Var log_softmax_rows(Var a);
/// Row-wise layer normalization with learned gain/bias (both 1 x cols).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

/// Scaled dot-product attention core. q is (nq x d), k and v are (nk x d).
/// mask is (nq x nk), true = may attend; an empty mask means no masking.
/// Heads split the feature axis evenly. Queries with every key masked get a
/// zero context row.
Var attention(Var q, Var k, Var v, const Mask& mask, int heads);

Var sum(Var a);
Var mean(Var a);
/// Mean over rows: (n x c) -> (1 x c).
Var mean_rows(Var a);
/// Max over consecutive row blocks of length seg: (n*seg x c) -> (n x c).
/// Rows with row_valid false are ignored; a block with no valid row yields 0.
Var segment_max(Var a, Index seg, const std::vector<bool>& row_valid = {});
/// Mean over consecutive row blocks of length seg.
Var segment_mean(Var a, Index seg);

Var slice_rows(Var a, Index start, Index count);
Var slice_cols(Var a, Index start, Index count);
Var row(Var a, Index r);
Var pick(Var a, Index r, Index c);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
/// Row-major reinterpretation with the same element count.
Var reshape(Var a, Index rows, Index cols);
/// Rows of `table` selected by index (repeats allowed).
Var gather_rows(Var table, const std::vector<int>& indices);
/// Repeats a 1 x c row n times.
Var broadcast_rows(Var row, Index n);

}  // namespace jam
