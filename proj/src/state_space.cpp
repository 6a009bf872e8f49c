#include "cedst/state_space.hpp"

#include <stdexcept>

namespace cedst {

std::vector<bool> SlotMemory::copy_continuation_mask() const {
  std::vector<bool> mask(rows.size(), false);
  for (size_t i = 0; i < rows.size(); ++i)
    mask[i] = rows[i].kind == RowKind::Copy || rows[i].kind == RowKind::Stop;
  return mask;
}

SlotMemory build_memory(Tape& ts, int slot, Var H_u,
                        const std::vector<std::string>& utterance,
                        const std::vector<Var>& value_cols, const SlotSpec& spec,
                        Var stop_col) {
  if (H_u && static_cast<size_t>(H_u->value.cols()) != utterance.size())
    throw std::invalid_argument("build_memory: utterance/hidden length mismatch");
  if (value_cols.size() != spec.values.size() + spec.specials.size())
    throw std::invalid_argument("build_memory: value column count mismatch");

  SlotMemory m;
  m.slot = slot;
  m.n_copy = H_u ? static_cast<int>(utterance.size()) : 0;
  m.n_generate = static_cast<int>(spec.values.size());
  m.n_special = static_cast<int>(spec.specials.size());

  std::vector<Var> cols;
  cols.reserve(m.n_copy + value_cols.size() + 1);
  if (H_u) {
    for (size_t t = 0; t < utterance.size(); ++t)
      m.rows.push_back({RowKind::Copy, static_cast<int>(t), utterance[t]});
    cols.push_back(H_u);
  }
  for (size_t v = 0; v < spec.values.size(); ++v) {
    m.rows.push_back({RowKind::Generate, static_cast<int>(v), spec.values[v]});
    cols.push_back(value_cols[v]);
  }
  for (size_t v = 0; v < spec.specials.size(); ++v) {
    m.rows.push_back({RowKind::Special, static_cast<int>(v), spec.specials[v]});
    cols.push_back(value_cols[spec.values.size() + v]);
  }
  m.rows.push_back({RowKind::Stop, 0, ""});
  cols.push_back(stop_col);
  m.M = ts.hconcat(cols);
  return m;
}

Var score_memory(Tape& ts, const SlotMemory& m, Var state) {
  if (m.M->value.rows() != state->value.rows())
    throw std::invalid_argument("score_memory: dimension mismatch");
  return ts.matmul(ts.transpose(m.M), state);
}

}  // namespace cedst
