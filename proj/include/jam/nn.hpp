#pragma once

#include "jam/random.hpp"
#include "jam/tensor.hpp"

#include <string>

namespace jam::nn {

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(Index fan_in, Index fan_out, Rng& rng);

struct Linear {
  int weight = -1;
  int bias = -1;  // -1: no bias

  static Linear create(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng,
                       bool with_bias = true);
  Var operator()(Graph& g, Var x) const;
};

struct LayerNorm {
  int gain = -1;
  int bias = -1;

  static LayerNorm create(ParameterStore& store, const std::string& name, Index dim);
  Var operator()(Graph& g, Var x) const;
};

/// Linear -> GELU -> Linear.
struct Mlp {
  Linear first;
  Linear second;

  static Mlp create(ParameterStore& store, const std::string& name, Index in, Index hidden, Index out, Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

/// The key projection has no bias.
struct AttentionWeights {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  int heads = 1;

  static AttentionWeights create(ParameterStore& store, const std::string& name, Index dim, int heads, Rng& rng);
};

/// Projects q/k/v, runs per-head scaled dot-product attention and applies the
/// output projection. `mask` is (queries x keys); empty means attend to all.
Var multi_head_attention(Graph& g, const AttentionWeights& w, Var q, Var k, Var v, const Mask& mask);

/// Post-norm transformer block: x = LN(x + MHA(x, ctx)); x = LN(x + FFN(x)).
/// With ctx == x it is a self-attention encoder layer.
struct AttentionBlock {
  AttentionWeights attn;
  LayerNorm norm1;
  Mlp ffn;
  LayerNorm norm2;

  static AttentionBlock create(ParameterStore& store, const std::string& name, Index dim, int heads, Rng& rng);
  Var operator()(Graph& g, Var x, Var ctx, const Mask& mask) const;
};

struct LstmWeights {
  int input = -1;   // in x 4H
  int hidden = -1;  // H x 4H
  int bias = -1;    // 1 x 4H
  Index units = 0;

  static LstmWeights create(ParameterStore& store, const std::string& name, Index in, Index units, Rng& rng);
};

struct LstmState {
  Var hidden;
  Var cell;
};

/// One LSTM step for a batch of rows. Gate order: input, forget, candidate,
/// output.
LstmState lstm_step(Graph& g, const LstmWeights& w, Var x, const LstmState& state);

}  // namespace jam::nn
