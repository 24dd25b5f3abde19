#pragma once

#include <span>
#include <utility>
#include <vector>

#include "orderplan/data.hpp"
#include "orderplan/model.hpp"
#include "orderplan/tensor.hpp"

namespace orderplan {

// LSTM weights bound to one tape.
struct LstmVars {
  Var W_g, U_g, b_g, W_x, U_x, b_x;

  LstmVars(Tape& t, LstmParams& p)
      : W_g(t.param(p.W_g)), U_g(t.param(p.U_g)), b_g(t.param(p.b_g)),
        W_x(t.param(p.W_x)), U_x(t.param(p.U_x)), b_x(t.param(p.b_x)) {}

  std::size_t hidden_dim() const { return U_x.value().rows(); }
  std::size_t input_dim() const { return W_x.value().cols(); }
};

struct LstmState {
  Var h;
  Var cell;
};

// One LSTM step:
//   [g_in; g_forget; g_out] = sigmoid(W_g x + U_g h_prev + b_g)
//   x~   = tanh(W_x x + U_x h_prev + b_x)
//   cell = g_in * x~ + g_forget * cell_prev
//   h    = g_out * tanh(cell)
inline LstmState lstm_cell(Var x, Var h_prev, Var cell_prev, const LstmVars& w) {
  const std::size_t dh = w.hidden_dim();
  if (x.value().rank() != 1 || x.value().size() != w.input_dim())
    throw DimensionError("lstm_cell: input " + x.value().shape_string() + " does not match input dim " +
                         std::to_string(w.input_dim()));
  if (h_prev.value().size() != dh || cell_prev.value().size() != dh)
    throw DimensionError("lstm_cell: state does not match hidden dim " + std::to_string(dh));
  Var gates = sigmoid(add(matvec(w.W_g, x), matvec(w.U_g, h_prev), w.b_g));
  Var g_in = slice(gates, 0, dh);
  Var g_forget = slice(gates, dh, dh);
  Var g_out = slice(gates, 2 * dh, dh);
  Var candidate = tanh(add(matvec(w.W_x, x), matvec(w.U_x, h_prev), w.b_x));
  Var cell = add(mul(g_in, candidate), mul(g_forget, cell_prev));
  Var h = mul(g_out, tanh(cell));
  return {h, cell};
}

struct EncodedTable {
  Var H;  // [C x d_h]
  Var F;  // [C x d_f]
  std::vector<std::size_t> field_ids;

  std::size_t size() const { return field_ids.size(); }
};

// Left-to-right pass over the linearized table; position i reads
// x_i = [field embedding; word embedding] starting from zero state.
inline EncodedTable encode_table(Tape& tape, const InfoboxTable& table, ModelParams& params) {
  if (table.size() == 0) throw InvalidInput("encode_table: empty table");
  LstmVars w(tape, params.encoder);
  const std::size_t dh = w.hidden_dim();
  Var h = tape.constant(Tensor::vector(dh));
  Var cell = tape.constant(Tensor::vector(dh));
  std::vector<Var> hs, fs;
  hs.reserve(table.size());
  fs.reserve(table.size());
  EncodedTable enc;
  for (const TablePosition& pos : table.positions) {
    Var f = embedding_lookup(tape, params.field_embedding, pos.field_id);
    Var c = embedding_lookup(tape, params.word_embedding, pos.word_id);
    auto next = lstm_cell(concat({f, c}), h, cell, w);
    h = next.h;
    cell = next.cell;
    hs.push_back(h);
    fs.push_back(f);
    enc.field_ids.push_back(pos.field_id);
  }
  enc.H = stack_rows(hs);
  enc.F = stack_rows(fs);
  return enc;
}

}  // namespace orderplan
