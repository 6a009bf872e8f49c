#pragma once

#include "cedst/tape.hpp"

#include <string>
#include <vector>

namespace cedst {

struct LstmCell {
  Parameter* Wx = nullptr;  // 4h x in
  Parameter* Wh = nullptr;  // 4h x h
  Parameter* b = nullptr;   // 4h x 1
  int hidden = 0;

  LstmCell() = default;
  LstmCell(ParamRegistry& reg, const std::string& prefix, int input, int hidden);
  // One recurrence step; returns (h, c).
  std::pair<Var, Var> step(Tape& ts, Var x, Var h_prev, Var c_prev) const;
};

// Bidirectional LSTM whose concatenated states are projected back to
// d_rnn, so hidden rows and value rows live in one space.
struct BiLstmEncoder {
  LstmCell fwd, bwd;
  Parameter* proj_W = nullptr;  // d_rnn x 2*d_rnn
  Parameter* proj_b = nullptr;
  int d_rnn = 0;

  BiLstmEncoder() = default;
  BiLstmEncoder(ParamRegistry& reg, const std::string& prefix, int input, int d_rnn);
  // One d_rnn column per input position.
  std::vector<Var> run(Tape& ts, const std::vector<Var>& xs) const;
};

struct SelfAttention {
  Parameter* w = nullptr;  // 1 x d_rnn
  Parameter* b = nullptr;  // 1 x 1

  SelfAttention() = default;
  SelfAttention(ParamRegistry& reg, const std::string& prefix, int d_rnn);
  // H is d_rnn x n; returns (p, c) with p the n x 1 attention weights.
  std::pair<Var, Var> context(Tape& ts, Var H) const;
};

struct EncoderAblations {
  bool multi_encoder = true;
  bool self_attention = true;
  bool shared_lstm = true;
};

// Private-per-slot + shared BiLSTMs with gated mixing and self-attention.
// One instance each for utterance, system actions, and ontology values.
class MultiEncoder {
 public:
  MultiEncoder(ParamRegistry& reg, const std::string& prefix, int n_slots, int d_emb,
               int d_rnn);

  struct Output {
    Var H = nullptr;  // d_rnn x n
    Var c = nullptr;  // d_rnn x 1
  };

  // Shared-path hidden states, reusable across slots of one turn.
  std::vector<Var> run_shared(Tape& ts, const std::vector<Var>& embedded) const;
  Output encode(Tape& ts, int slot, const std::vector<Var>& embedded,
                const EncoderAblations& abl,
                const std::vector<Var>* shared_cols = nullptr) const;

  Var gate(Tape& ts, int slot) const;  // logistic of the raw per-slot scalar
  double gate_value(int slot) const;
  Parameter& raw_gate(int slot) { return *gate_raw_[slot]; }

 private:
  std::vector<BiLstmEncoder> private_;
  BiLstmEncoder shared_;
  std::vector<SelfAttention> att_private_;
  SelfAttention att_shared_;
  std::vector<Parameter*> gate_raw_;
};

// Eq-style action-utterance interaction: attention of action contexts
// against the utterance context. Empty action sets give the zero vector.
Var interact_actions(Tape& ts, const std::vector<Var>& action_contexts, Var c_u, int d_rnn);

}  // namespace cedst
