#pragma once

#include "cedst/encoder.hpp"
#include "cedst/state_space.hpp"

#include <string>
#include <vector>

namespace cedst {

struct DecoderAblations {
  bool multi_decoder = true;
  bool shared_lstm = true;
};

// Per-slot private + shared LSTM decoders with gated state mixing,
// attention over utterance hidden states and action contexts.
class MultiDecoder {
 public:
  MultiDecoder(ParamRegistry& reg, const std::string& prefix, int n_slots, int d_emb,
               int d_rnn);

  struct State {
    Var h_p = nullptr, c_p = nullptr;  // private cell
    Var h_g = nullptr, c_g = nullptr;  // shared cell
    Var s = nullptr;                   // gated mix, used for scoring
  };

  // Both cells start from s0 (typically the action interaction vector).
  State init(Tape& ts, Var s0) const;
  State step(Tape& ts, const State& prev, Var y_emb, Var a_prev, int slot,
             const DecoderAblations& abl) const;

  // Keys K are [H_u columns; action context columns]; query is the
  // projected previous output embedding.
  Var attend(Tape& ts, Var K, Var y_emb) const;

  Var gate(Tape& ts, int slot) const;
  double gate_value(int slot) const;
  Parameter& raw_gate(int slot) { return *gate_raw_[slot]; }

 private:
  std::vector<LstmCell> private_;
  LstmCell shared_;
  std::vector<Parameter*> gate_raw_;
  Parameter* in_W = nullptr;  // (d_emb + d_rnn) -> d_rnn cell input
  Parameter* in_b = nullptr;
  Parameter* q_W = nullptr;  // d_emb -> d_rnn attention query
  int d_rnn_ = 0;
};

// Maximal runs of consecutive utterance positions, one span per run.
struct TokenSpan {
  int first = 0;
  int last = 0;  // inclusive
};
std::vector<TokenSpan> segment_copied(const std::vector<int>& positions);
std::string span_surface(const TokenSpan& span, const std::vector<std::string>& utterance);

}  // namespace cedst
