#pragma once

#include "cedst/data_model.hpp"
#include "cedst/tape.hpp"

#include <string>
#include <vector>

namespace cedst {

enum class RowKind { Copy, Generate, Special, Stop };

struct MemoryRow {
  RowKind kind = RowKind::Stop;
  int index = -1;       // utterance position (copy) or value/special id
  std::string surface;  // token or value string, empty for stop
};

// Per (turn, slot) short-term memory: copy rows first, then generate
// rows, then special rows, then exactly one stop row.
struct SlotMemory {
  int slot = -1;
  std::vector<MemoryRow> rows;
  Var M = nullptr;  // d_rnn x R, column per row
  int n_copy = 0;
  int n_generate = 0;
  int n_special = 0;

  int row_count() const { return static_cast<int>(rows.size()); }
  int stop_row() const { return row_count() - 1; }
  int generate_row(int value_id) const { return n_copy + value_id; }
  int special_row(int special_id) const { return n_copy + n_generate + special_id; }
  // Mask selecting copy rows plus the stop row (copy-continuation steps).
  std::vector<bool> copy_continuation_mask() const;
};

// H_u supplies the copy block (one column per utterance position); pass
// nullptr to omit copy rows (copy ablation).
SlotMemory build_memory(Tape& ts, int slot, Var H_u,
                        const std::vector<std::string>& utterance,
                        const std::vector<Var>& value_cols, const SlotSpec& spec,
                        Var stop_col);

// Raw scores M^T s, one per row; normalization happens in the decoder.
Var score_memory(Tape& ts, const SlotMemory& m, Var state);

}  // namespace cedst
