#include "cedst/decoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace cedst {

MultiDecoder::MultiDecoder(ParamRegistry& reg, const std::string& prefix, int n_slots,
                           int d_emb, int d_rnn)
    : shared_(reg, prefix + ".shared", d_rnn, d_rnn), d_rnn_(d_rnn) {
  for (int s = 0; s < n_slots; ++s) {
    private_.emplace_back(reg, prefix + ".private" + std::to_string(s), d_rnn, d_rnn);
    gate_raw_.push_back(&reg.create(prefix + ".gate" + std::to_string(s), 1, 1));
  }
  in_W = &reg.create(prefix + ".in_W", d_rnn, d_emb + d_rnn);
  in_b = &reg.create(prefix + ".in_b", d_rnn, 1);
  q_W = &reg.create(prefix + ".q_W", d_rnn, d_emb);
}

MultiDecoder::State MultiDecoder::init(Tape& ts, Var s0) const {
  State st;
  Var zero = ts.constant(Mat::Zero(d_rnn_, 1));
  st.h_p = s0;
  st.c_p = zero;
  st.h_g = s0;
  st.c_g = zero;
  st.s = s0;
  return st;
}

MultiDecoder::State MultiDecoder::step(Tape& ts, const State& prev, Var y_emb, Var a_prev,
                                       int slot, const DecoderAblations& abl) const {
  Var x = ts.tanh(
      ts.add(ts.matmul(ts.param(*in_W), ts.vconcat({y_emb, a_prev})), ts.param(*in_b)));
  State st;
  if (!abl.multi_decoder) {
    // Shared decoder only.
    std::tie(st.h_g, st.c_g) = shared_.step(ts, x, prev.h_g, prev.c_g);
    st.h_p = prev.h_p;
    st.c_p = prev.c_p;
    st.s = st.h_g;
    return st;
  }
  std::tie(st.h_p, st.c_p) = private_[slot].step(ts, x, prev.h_p, prev.c_p);
  if (!abl.shared_lstm) {
    st.h_g = prev.h_g;
    st.c_g = prev.c_g;
    st.s = st.h_p;
    return st;
  }
  std::tie(st.h_g, st.c_g) = shared_.step(ts, x, prev.h_g, prev.c_g);
  Var gamma = gate(ts, slot);
  Var gamma_c = ts.sub(ts.constant(Mat::Ones(1, 1)), gamma);
  st.s = ts.add(ts.smul(gamma, st.h_p), ts.smul(gamma_c, st.h_g));
  return st;
}

Var MultiDecoder::attend(Tape& ts, Var K, Var y_emb) const {
  Var q = ts.matmul(ts.param(*q_W), y_emb);     // d_rnn x 1
  Var scores = ts.matmul(ts.transpose(K), q);   // (n+l) x 1
  Var p = ts.softmax(scores);
  return ts.matmul(K, p);
}

Var MultiDecoder::gate(Tape& ts, int slot) const {
  return ts.logistic(ts.param(*gate_raw_[slot]));
}

double MultiDecoder::gate_value(int slot) const {
  return 1.0 / (1.0 + std::exp(-gate_raw_[slot]->value(0, 0)));
}

std::vector<TokenSpan> segment_copied(const std::vector<int>& positions) {
  std::vector<TokenSpan> spans;
  for (int p : positions) {
    if (!spans.empty() && p == spans.back().last + 1)
      spans.back().last = p;
    else
      spans.push_back({p, p});
  }
  return spans;
}

std::string span_surface(const TokenSpan& span, const std::vector<std::string>& utterance) {
  std::string out;
  for (int t = span.first; t <= span.last; ++t) {
    if (t != span.first) out += ' ';
    out += utterance[t];
  }
  return out;
}

}  // namespace cedst
