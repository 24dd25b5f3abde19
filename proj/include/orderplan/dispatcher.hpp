#pragma once

// Order planning: content-based attention, link-based attention over the
// field transition matrix, the self-adaptive gate and their hybrid.

#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "orderplan/data.hpp"
#include "orderplan/encoder.hpp"
#include "orderplan/model.hpp"
#include "orderplan/tensor.hpp"

namespace orderplan {

// Snapshot of one decoding step, for traces and export.
struct AttentionState {
  std::vector<double> alpha_content;
  std::vector<double> alpha_link;
  std::optional<double> z;  // absent in fixed-gate mode or without a gate
  double z_tilde = 0.0;
  std::vector<double> alpha_hybrid;
};

inline std::vector<double> to_vector(Var v) {
  auto d = v.value().data();
  return {d.begin(), d.end()};
}

// alpha_i proportional to exp{ f_i^T (W_f y + b_f) * h_i^T (W_c y + b_c) }.
inline Var content_attention(Var y_prev, const EncodedTable& enc, Var W_f, Var b_f, Var W_c, Var b_c) {
  if (enc.size() == 0) throw InvalidInput("content_attention: no content positions");
  Var field_scores = matvec(enc.F, add(matvec(W_f, y_prev), b_f));
  Var content_scores = matvec(enc.H, add(matvec(W_c, y_prev), b_c));
  return stable_softmax(mul(field_scores, content_scores));
}

// Link scores restricted to one table: block[a][b] = L[field_ids[a], field_ids[b]].
inline Var link_block(Var link, std::span<const std::size_t> field_ids) { return gather_block(link, field_ids); }

// alpha_i proportional to exp{ sum_j alpha_prev[j] * L[f_j, f_i] }, given the
// table's gathered link block.
inline Var link_attention_from_block(Var alpha_prev, Var block) {
  if (alpha_prev.value().size() != block.value().rows())
    throw DimensionError("link_attention: previous attention has " + std::to_string(alpha_prev.value().size()) +
                         " entries for " + std::to_string(block.value().rows()) + " positions");
  return stable_softmax(vecmat(alpha_prev, block));
}

inline Var link_attention(Var alpha_prev, std::span<const std::size_t> field_ids, Var link) {
  return link_attention_from_block(alpha_prev, link_block(link, field_ids));
}

struct GateOutput {
  Var z;
  Var z_tilde;
};

// z = sigmoid(w^T [h'_{t-1}; e_field; y_prev]),  z~ = 0.2 z + 0.5.
inline GateOutput adaptive_gate(Var h_dec_prev, Var e_field, Var y_prev, Var w) {
  Var z = sigmoid(dot(w, concat({h_dec_prev, e_field, y_prev})));
  return {z, affine(z, 0.2, 0.5)};
}

// Sum of field embeddings weighted by the current link attention.
inline Var weighted_field_embedding(Var alpha_link, const EncodedTable& enc) { return vecmat(alpha_link, enc.F); }

inline Var hybrid_attention(Var alpha_content, Var alpha_link, Var z_tilde) {
  return add(scale_by(alpha_content, z_tilde), scale_by(alpha_link, affine(z_tilde, -1.0, 1.0)));
}

// Entries (a, b) of the link matrix that can receive gradient: the field pair
// co-occurs in at least one table.
inline std::set<std::pair<std::size_t, std::size_t>> effective_link_entries(std::span<const InfoboxTable> tables) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (const auto& t : tables) {
    std::set<std::size_t> fields;
    for (const auto& p : t.positions) fields.insert(p.field_id);
    for (std::size_t a : fields)
      for (std::size_t b : fields) out.emplace(a, b);
  }
  return out;
}

inline std::size_t effective_link_parameters(std::span<const InfoboxTable> tables) {
  return effective_link_entries(tables).size();
}

}  // namespace orderplan
