#include "jam/gradcheck.hpp"
#include "jam/nn.hpp"
#include "jam/tensor.hpp"
#include "golden.hpp"

#include <doctest.h>

#include <cmath>

using namespace jam;
using jam::test::max_abs_diff;
using jam::test::numeric_gradient;
using jam::test::random_matrix;

namespace {

using OpFn = std::function<Var(Graph&, const std::vector<Var>&)>;

// Checks reverse-mode gradients of sum(W .* op(inputs)) against central
// differences, input by input.
void check_op(const std::string& name, const std::vector<Matrix>& inputs, const OpFn& op, double tol = 1e-6) {
  CAPTURE(name);
  ParameterStore store;
  for (std::size_t i = 0; i < inputs.size(); ++i) store.add("in" + std::to_string(i), inputs[i]);
  Matrix weights;
  {
    Graph g(&store);
    std::vector<Var> xs;
    for (int i = 0; i < store.size(); ++i) xs.push_back(g.param(i));
    Rng rng(7);
    const Var out = op(g, xs);
    weights = random_matrix(rng, out.rows(), out.cols());
  }
  auto loss_of = [&](const ParameterStore& s) {
    Graph g(&s);
    std::vector<Var> xs;
    for (int i = 0; i < s.size(); ++i) xs.push_back(g.param(i));
    return sum(mul(op(g, xs), g.constant(weights))).scalar();
  };
  Graph g(&store);
  std::vector<Var> xs;
  for (int i = 0; i < store.size(); ++i) xs.push_back(g.param(i));
  const Var loss = sum(mul(op(g, xs), g.constant(weights)));
  g.backward(loss);
  for (int i = 0; i < store.size(); ++i) {
    CAPTURE(i);
    const Matrix analytic = g.param_grad(i);
    ParameterStore probe = store;
    const Matrix numeric = numeric_gradient(
        [&](const Matrix& x) {
          probe[i].value = x;
          return loss_of(probe);
        },
        store[i].value);
    CHECK(max_abs_diff(analytic, numeric) < tol * std::max(1.0, numeric.cwiseAbs().maxCoeff()));
  }
}

}  // namespace

TEST_CASE("elementwise and linear ops match finite differences") {
  Rng rng(1);
  const Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 3, 4), w = random_matrix(rng, 4, 5);
  const Matrix bias = random_matrix(rng, 1, 5), row4 = random_matrix(rng, 1, 4);
  const Matrix pos = random_matrix(rng, 3, 4, 0.5, 2.0);
  check_op("matmul", {a, w}, [](Graph&, const auto& x) { return matmul(x[0], x[1]); });
  check_op("affine", {a, w, bias}, [](Graph&, const auto& x) { return affine(x[0], x[1], x[2]); });
  check_op("add", {a, b}, [](Graph&, const auto& x) { return add(x[0], x[1]); });
  check_op("sub", {a, b}, [](Graph&, const auto& x) { return sub(x[0], x[1]); });
  check_op("mul", {a, b}, [](Graph&, const auto& x) { return mul(x[0], x[1]); });
  check_op("div", {a, pos}, [](Graph&, const auto& x) { return div(x[0], x[1]); });
  check_op("add_row", {a, row4}, [](Graph&, const auto& x) { return add_row(x[0], x[1]); });
  check_op("scale", {a}, [](Graph&, const auto& x) { return scale(x[0], -2.5); });
  check_op("square", {a}, [](Graph&, const auto& x) { return square(x[0]); });
  check_op("neg", {a}, [](Graph&, const auto& x) { return neg(x[0]); });
  check_op("gelu", {a}, [](Graph&, const auto& x) { return gelu(x[0]); });
  check_op("tanh", {a}, [](Graph&, const auto& x) { return jam::tanh(x[0]); });
  check_op("sigmoid", {a}, [](Graph&, const auto& x) { return sigmoid(x[0]); });
  check_op("exp", {a}, [](Graph&, const auto& x) { return jam::exp(x[0]); });
  check_op("log", {pos}, [](Graph&, const auto& x) { return jam::log(x[0]); });
  check_op("exp_clamped", {a}, [](Graph&, const auto& x) { return exp_clamped(x[0], 1e-3, 1e3); });
}

TEST_CASE("reductions, normalization and indexing ops match finite differences") {
  Rng rng(2);
  const Matrix a = random_matrix(rng, 6, 4), gain = random_matrix(rng, 1, 4, 0.5, 1.5), bias = random_matrix(rng, 1, 4);
  Mask mask = Mask::Constant(6, 4, true);
  mask(0, 1) = mask(2, 3) = mask(5, 0) = false;
  check_op("softmax_rows", {a}, [&](Graph&, const auto& x) { return softmax_rows(x[0], mask); });
  check_op("log_softmax_rows", {a}, [](Graph&, const auto& x) { return log_softmax_rows(x[0]); });
  check_op("layer_norm", {a, gain, bias}, [](Graph&, const auto& x) { return layer_norm(x[0], x[1], x[2]); });
  check_op("sum", {a}, [](Graph&, const auto& x) { return sum(x[0]); });
  check_op("mean", {a}, [](Graph&, const auto& x) { return mean(x[0]); });
  check_op("mean_rows", {a}, [](Graph&, const auto& x) { return mean_rows(x[0]); });
  check_op("segment_max", {a}, [](Graph&, const auto& x) { return segment_max(x[0], 3); });
  check_op("segment_max_masked", {a},
           [](Graph&, const auto& x) { return segment_max(x[0], 3, {true, false, true, false, false, false}); });
  check_op("segment_mean", {a}, [](Graph&, const auto& x) { return segment_mean(x[0], 2); });
  check_op("slice_rows", {a}, [](Graph&, const auto& x) { return slice_rows(x[0], 1, 3); });
  check_op("slice_cols", {a}, [](Graph&, const auto& x) { return slice_cols(x[0], 1, 2); });
  check_op("row", {a}, [](Graph&, const auto& x) { return row(x[0], 4); });
  check_op("pick", {a}, [](Graph&, const auto& x) { return pick(x[0], 2, 3); });
  check_op("concat_rows", {a, gain}, [](Graph&, const auto& x) { return concat_rows({x[0], x[1], x[0]}); });
  check_op("concat_cols", {a, a}, [](Graph&, const auto& x) { return concat_cols({x[0], x[1]}); });
  check_op("reshape", {a}, [](Graph&, const auto& x) { return reshape(x[0], 3, 8); });
  check_op("gather_rows", {a}, [](Graph&, const auto& x) { return gather_rows(x[0], {5, 0, 5, 2}); });
  check_op("broadcast_rows", {gain}, [](Graph&, const auto& x) { return broadcast_rows(x[0], 3); });
}

TEST_CASE("attention gradients with masks and heads") {
  Rng rng(3);
  const Matrix q = random_matrix(rng, 3, 4), k = random_matrix(rng, 5, 4), v = random_matrix(rng, 5, 4);
  Mask mask = Mask::Constant(3, 5, true);
  mask(0, 0) = mask(1, 4) = false;
  mask.row(2).setConstant(false);  // fully masked query
  check_op("attention", {q, k, v}, [&](Graph&, const auto& x) { return attention(x[0], x[1], x[2], mask, 2); });
}

TEST_CASE("attention values match a straight-line evaluation") {
  Rng rng(4);
  const int heads = 2;
  const Matrix q = random_matrix(rng, 3, 4), k = random_matrix(rng, 5, 4), v = random_matrix(rng, 5, 4);
  Mask mask = Mask::Constant(3, 5, true);
  mask(1, 2) = false;
  mask.row(2).setConstant(false);
  Graph g;
  const Matrix got = attention(g.constant(q), g.constant(k), g.constant(v), mask, heads).value();

  Matrix want = Matrix::Zero(3, 4);
  const int dh = 2;
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < 3; ++i) {
      std::vector<double> s(5, 0.0);
      double top = -1e300;
      bool any = false;
      for (int j = 0; j < 5; ++j) {
        if (!mask(i, j)) continue;
        for (int c = 0; c < dh; ++c) s[j] += q(i, h * dh + c) * k(j, h * dh + c);
        s[j] /= std::sqrt(double(dh));
        top = std::max(top, s[j]);
        any = true;
      }
      if (!any) continue;
      double z = 0.0;
      for (int j = 0; j < 5; ++j) z += mask(i, j) ? std::exp(s[j] - top) : 0.0;
      for (int j = 0; j < 5; ++j) {
        if (!mask(i, j)) continue;
        const double p = std::exp(s[j] - top) / z;
        for (int c = 0; c < dh; ++c) want(i, h * dh + c) += p * v(j, h * dh + c);
      }
    }
  }
  CHECK(max_abs_diff(got, want) < 1e-12);
  CHECK(got.row(2).isZero(0.0));
}

TEST_CASE("softmax rows are distributions and masked entries vanish") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = random_matrix(rng, 4, 6, -30.0, 30.0);
    Mask mask(4, 6);
    for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.bernoulli(0.7);
    mask(0, 0) = true;
    Graph g;
    const Matrix p = softmax_rows(g.constant(a), mask).value();
    for (Index r = 0; r < 4; ++r) {
      const double total = p.row(r).sum();
      if (mask.row(r).any()) {
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      } else {
        CHECK(total == 0.0);
      }
      for (Index c = 0; c < 6; ++c) {
        CHECK(p(r, c) >= 0.0);
        if (!mask(r, c)) CHECK(p(r, c) == 0.0);
      }
    }
  }
}

TEST_CASE("gelu uses the exact erf form") {
  Graph g;
  Matrix x(1, 4);
  x << -2.0, -0.5, 0.0, 1.5;
  const Matrix y = gelu(g.constant(x)).value();
  for (Index i = 0; i < 4; ++i) {
    const double v = x(0, i);
    CHECK(y(0, i) == doctest::Approx(v * 0.5 * std::erfc(-v / std::sqrt(2.0))).epsilon(1e-14));
  }
}

TEST_CASE("gradients accumulate over reused nodes") {
  ParameterStore store;
  Matrix x0(1, 1);
  x0 << 3.0;
  const int id = store.add("x", x0);
  Graph g(&store);
  const Var x = g.param(id);
  g.backward(add(mul(x, x), scale(x, 2.0)));  // x^2 + 2x
  CHECK(g.param_grad(id)(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("shape mismatches throw ShapeError") {
  Graph g;
  const Var a = g.constant(Matrix::Zero(2, 3));
  const Var b = g.constant(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(reshape(a, 4, 2), ShapeError);
  CHECK_THROWS_AS(slice_rows(a, 1, 2), ShapeError);
  CHECK_THROWS_AS(attention(a, a, a, Mask(), 2), ShapeError);
}

TEST_CASE("non-finite intermediates report the node") {
  Graph g;
  Matrix m(1, 2);
  m << 1.0, -1.0;
  const Var a = g.constant(m);
  try {
    (void)jam::log(a);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(e.node_id == a.id() + 1);
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
}

TEST_CASE("lstm step and attention block pass the gradient checker") {
  Rng rng(11);
  ParameterStore store;
  const auto lstm = nn::LstmWeights::create(store, "lstm", 3, 4, rng);
  const auto block = nn::AttentionBlock::create(store, "block", 4, 2, rng);
  const int input = store.add("input", random_matrix(rng, 5, 3));
  const Matrix readout = random_matrix(rng, 5, 4);
  auto build = [&](Graph& g) {
    nn::LstmState s{g.constant(Matrix::Zero(5, 4)), g.constant(Matrix::Zero(5, 4))};
    s = nn::lstm_step(g, lstm, g.param(input), s);
    s = nn::lstm_step(g, lstm, g.param(input), s);
    const Var y = block(g, s.hidden, s.hidden, Mask());
    return sum(mul(y, g.constant(readout)));
  };
  const auto report = check_gradients(store, build, 3);
  CHECK(report.finite);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("gradient checker flags a wrong gradient") {
  ParameterStore store;
  const int id = store.add("x", Matrix::Constant(2, 2, 0.7));
  // Custom op whose backward is off by a factor of two.
  auto build = [&](Graph& g) {
    const Var x = g.param(id);
    const int ix = x.id();
    const Var y = g.record(x.value().array().square().matrix(), "bad_square", {ix}, [ix](Graph& gr, int self) {
      gr.add_grad(ix, (gr.grad(self).array() * gr.value(ix).array() * 4.0).matrix());
    });
    return sum(y);
  };
  const auto report = check_gradients(store, build, 1);
  CHECK(report.max_rel_error > 0.3);
  CHECK(report.worst_param == "x");
}

TEST_CASE("three-layer MLP matches a plain evaluation and its frozen output") {
  Rng rng(21);
  ParameterStore store;
  const Matrix x = random_matrix(rng, 4, 5);
  std::vector<int> w, b;
  const Index dims[] = {5, 8, 6, 3};
  for (int l = 0; l < 3; ++l) {
    w.push_back(store.add("w" + std::to_string(l), random_matrix(rng, dims[l], dims[l + 1])));
    b.push_back(store.add("b" + std::to_string(l), random_matrix(rng, 1, dims[l + 1])));
  }
  Graph g(&store);
  Var h = g.constant(x);
  for (int l = 0; l < 3; ++l) {
    h = affine(h, g.param(w[static_cast<std::size_t>(l)]), g.param(b[static_cast<std::size_t>(l)]));
    if (l < 2) h = tanh(h);
  }
  Matrix ref = x;
  for (int l = 0; l < 3; ++l) {
    ref = (ref * store[w[static_cast<std::size_t>(l)]].value).rowwise() +
          store[b[static_cast<std::size_t>(l)]].value.row(0);
    if (l < 2) ref = ref.array().tanh().matrix();
  }
  CHECK(max_abs_diff(h.value(), ref) < 1e-14);
  jam::test::check_golden("mlp3", h.value());
}

TEST_CASE("one-unit LSTM step follows the gate equations") {
  ParameterStore store;
  nn::LstmWeights w;
  w.units = 1;
  w.input = store.add("wx", Matrix::Ones(1, 4));
  w.hidden = store.add("wh", Matrix::Ones(1, 4));
  w.bias = store.add("b", Matrix::Zero(1, 4));
  Graph g(&store);
  const auto s1 = nn::lstm_step(g, w, g.constant(Matrix::Ones(1, 1)), {g.constant(Matrix::Zero(1, 1)), g.constant(Matrix::Zero(1, 1))});
  // Every gate sees 1: i = f = o = sigmoid(1), candidate = tanh(1), previous cell 0.
  const double sig = 1.0 / (1.0 + std::exp(-1.0));
  const double c1 = sig * std::tanh(1.0);
  CHECK(s1.cell.scalar() == doctest::Approx(c1).epsilon(1e-15));
  CHECK(s1.hidden.scalar() == doctest::Approx(sig * std::tanh(c1)).epsilon(1e-15));
  // Second step: gates see 1 + h1.
  const auto s2 = nn::lstm_step(g, w, g.constant(Matrix::Ones(1, 1)), s1);
  const double z = 1.0 + sig * std::tanh(c1);
  const double sz = 1.0 / (1.0 + std::exp(-z));
  const double c2 = sz * c1 + sz * std::tanh(z);
  CHECK(s2.cell.scalar() == doctest::Approx(c2).epsilon(1e-15));
  CHECK(s2.hidden.scalar() == doctest::Approx(sz * std::tanh(c2)).epsilon(1e-15));
}

TEST_CASE("gradients through five chained LSTM steps") {
  Rng rng(22);
  ParameterStore store;
  const auto lstm = nn::LstmWeights::create(store, "lstm", 3, 4, rng);
  std::vector<int> inputs;
  for (int t = 0; t < 5; ++t) inputs.push_back(store.add("x" + std::to_string(t), random_matrix(rng, 2, 3)));
  const Matrix readout = random_matrix(rng, 2, 4);
  auto build = [&](Graph& g) {
    nn::LstmState s{g.constant(Matrix::Zero(2, 4)), g.constant(Matrix::Zero(2, 4))};
    for (const int x : inputs) s = nn::lstm_step(g, lstm, g.param(x), s);
    return sum(mul(s.hidden, g.constant(readout)));
  };
  const auto report = check_gradients(store, build, 5);
  CHECK(report.finite);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("linear regression passes the gradient checker") {
  Rng rng(23);
  ParameterStore store;
  const int w = store.add("w", random_matrix(rng, 3, 1));
  const int b = store.add("b", random_matrix(rng, 1, 1));
  const Matrix x = random_matrix(rng, 20, 3);
  const Matrix y = random_matrix(rng, 20, 1);
  auto build = [&](Graph& g) { return mean(square(sub(affine(g.constant(x), g.param(w), g.param(b)), g.constant(y)))); };
  const auto report = check_gradients(store, build, 1);
  CHECK(report.max_rel_error < 1e-6);
  // The analytic gradient of the mean squared error.
  Graph g(&store);
  g.backward(build(g));
  const Matrix r = (x * store[w].value).array() + store[b].value(0, 0) - y.array();
  CHECK(max_abs_diff(g.param_grad(w), 2.0 / 20.0 * x.transpose() * r) < 1e-14);
  CHECK(std::abs(g.param_grad(b)(0, 0) - 2.0 / 20.0 * r.sum()) < 1e-14);
}
