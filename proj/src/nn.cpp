#include "jam/nn.hpp"

#include <cmath>

namespace jam::nn {

Matrix xavier_uniform(Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

Linear Linear::create(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng,
                      bool with_bias) {
  Linear l;
  l.weight = store.add(name + ".weight", xavier_uniform(in, out, rng));
  if (with_bias) l.bias = store.add(name + ".bias", Matrix::Zero(1, out));
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  return bias < 0 ? matmul(x, g.param(weight)) : affine(x, g.param(weight), g.param(bias));
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, Index dim) {
  LayerNorm n;
  n.gain = store.add(name + ".gain", Matrix::Ones(1, dim));
  n.bias = store.add(name + ".bias", Matrix::Zero(1, dim));
  return n;
}

Var LayerNorm::operator()(Graph& g, Var x) const { return layer_norm(x, g.param(gain), g.param(bias)); }

Mlp Mlp::create(ParameterStore& store, const std::string& name, Index in, Index hidden, Index out, Rng& rng) {
  return Mlp{Linear::create(store, name + ".0", in, hidden, rng), Linear::create(store, name + ".1", hidden, out, rng)};
}

Var Mlp::operator()(Graph& g, Var x) const { return second(g, gelu(first(g, x))); }

AttentionWeights AttentionWeights::create(ParameterStore& store, const std::string& name, Index dim, int heads,
                                          Rng& rng) {
  if (heads <= 0 || dim % heads != 0) throw ShapeError("attention: dim not divisible by heads");
  AttentionWeights w;
  w.query = Linear::create(store, name + ".q", dim, dim, rng);
  w.key = Linear::create(store, name + ".k", dim, dim, rng, false);
  w.value = Linear::create(store, name + ".v", dim, dim, rng);
  w.output = Linear::create(store, name + ".o", dim, dim, rng);
  w.heads = heads;
  return w;
}

Var multi_head_attention(Graph& g, const AttentionWeights& w, Var q, Var k, Var v, const Mask& mask) {
  const Var context = attention(w.query(g, q), w.key(g, k), w.value(g, v), mask, w.heads);
  return w.output(g, context);
}

AttentionBlock AttentionBlock::create(ParameterStore& store, const std::string& name, Index dim, int heads, Rng& rng) {
  AttentionBlock b;
  b.attn = AttentionWeights::create(store, name + ".attn", dim, heads, rng);
  b.norm1 = LayerNorm::create(store, name + ".norm1", dim);
  b.ffn = Mlp::create(store, name + ".ffn", dim, 2 * dim, dim, rng);
  b.norm2 = LayerNorm::create(store, name + ".norm2", dim);
  return b;
}

Var AttentionBlock::operator()(Graph& g, Var x, Var ctx, const Mask& mask) const {
  const Var attended = multi_head_attention(g, attn, x, ctx, ctx, mask);
  const Var h = norm1(g, add(x, attended));
  return norm2(g, add(h, ffn(g, h)));
}

LstmWeights LstmWeights::create(ParameterStore& store, const std::string& name, Index in, Index units, Rng& rng) {
  LstmWeights w;
  w.input = store.add(name + ".input", xavier_uniform(in, 4 * units, rng));
  w.hidden = store.add(name + ".hidden", xavier_uniform(units, 4 * units, rng));
  w.bias = store.add(name + ".bias", Matrix::Zero(1, 4 * units));
  w.units = units;
  return w;
}

LstmState lstm_step(Graph& g, const LstmWeights& w, Var x, const LstmState& state) {
  const Index n = w.units;
  if (state.hidden.cols() != n || state.cell.cols() != n || state.hidden.rows() != x.rows()) {
    throw ShapeError("lstm_step: state shape does not match weights/input");
  }
  const Var gates = add(affine(x, g.param(w.input), g.param(w.bias)), matmul(state.hidden, g.param(w.hidden)));
  const Var in_gate = sigmoid(slice_cols(gates, 0, n));
  const Var forget_gate = sigmoid(slice_cols(gates, n, n));
  const Var candidate = tanh(slice_cols(gates, 2 * n, n));
  const Var out_gate = sigmoid(slice_cols(gates, 3 * n, n));
  const Var cell = add(mul(forget_gate, state.cell), mul(in_gate, candidate));
  return LstmState{mul(out_gate, tanh(cell)), cell};
}

}  // namespace jam::nn
