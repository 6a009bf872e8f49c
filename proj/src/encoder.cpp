#include "cedst/encoder.hpp"

namespace cedst {

LstmCell::LstmCell(ParamRegistry& reg, const std::string& prefix, int input, int h)
    : hidden(h) {
  Wx = &reg.create(prefix + ".Wx", 4 * h, input);
  Wh = &reg.create(prefix + ".Wh", 4 * h, h);
  b = &reg.create(prefix + ".b", 4 * h, 1);
}

std::pair<Var, Var> LstmCell::step(Tape& ts, Var x, Var h_prev, Var c_prev) const {
  Var gates = ts.add(ts.add(ts.matmul(ts.param(*Wx), x), ts.matmul(ts.param(*Wh), h_prev)),
                     ts.param(*b));
  Var i = ts.logistic(ts.slice_rows(gates, 0, hidden));
  Var f = ts.logistic(ts.slice_rows(gates, hidden, hidden));
  Var o = ts.logistic(ts.slice_rows(gates, 2 * hidden, hidden));
  Var g = ts.tanh(ts.slice_rows(gates, 3 * hidden, hidden));
  Var c = ts.add(ts.cmult(f, c_prev), ts.cmult(i, g));
  Var h = ts.cmult(o, ts.tanh(c));
  return {h, c};
}

BiLstmEncoder::BiLstmEncoder(ParamRegistry& reg, const std::string& prefix, int input,
                             int d)
    : fwd(reg, prefix + ".fwd", input, d),
      bwd(reg, prefix + ".bwd", input, d),
      d_rnn(d) {
  proj_W = &reg.create(prefix + ".proj_W", d, 2 * d);
  proj_b = &reg.create(prefix + ".proj_b", d, 1);
}

std::vector<Var> BiLstmEncoder::run(Tape& ts, const std::vector<Var>& xs) const {
  const int n = static_cast<int>(xs.size());
  Var zero = ts.constant(Mat::Zero(d_rnn, 1));
  std::vector<Var> hf(n), hb(n);
  Var h = zero, c = zero;
  for (int t = 0; t < n; ++t) {
    std::tie(h, c) = fwd.step(ts, xs[t], h, c);
    hf[t] = h;
  }
  h = zero;
  c = zero;
  for (int t = n - 1; t >= 0; --t) {
    std::tie(h, c) = bwd.step(ts, xs[t], h, c);
    hb[t] = h;
  }
  std::vector<Var> out(n);
  Var W = ts.param(*proj_W);
  Var b = ts.param(*proj_b);
  for (int t = 0; t < n; ++t)
    out[t] = ts.tanh(ts.add(ts.matmul(W, ts.vconcat({hf[t], hb[t]})), b));
  return out;
}

SelfAttention::SelfAttention(ParamRegistry& reg, const std::string& prefix, int d_rnn) {
  w = &reg.create(prefix + ".w", 1, d_rnn);
  b = &reg.create(prefix + ".b", 1, 1);
}

std::pair<Var, Var> SelfAttention::context(Tape& ts, Var H) const {
  const int n = static_cast<int>(H->value.cols());
  // z_i = w H_i + b, one scalar per column.
  Var z = ts.transpose(ts.matmul(ts.param(*w), H));  // n x 1
  Var ones = ts.constant(Mat::Ones(n, 1));
  z = ts.add(z, ts.smul(ts.param(*b), ones));
  Var p = ts.softmax(z);
  Var c = ts.matmul(H, p);
  return {p, c};
}

MultiEncoder::MultiEncoder(ParamRegistry& reg, const std::string& prefix, int n_slots,
                           int d_emb, int d_rnn)
    : shared_(reg, prefix + ".shared", d_emb, d_rnn),
      att_shared_(reg, prefix + ".att_shared", d_rnn) {
  for (int s = 0; s < n_slots; ++s) {
    private_.emplace_back(reg, prefix + ".private" + std::to_string(s), d_emb, d_rnn);
    att_private_.emplace_back(reg, prefix + ".att_private" + std::to_string(s), d_rnn);
    gate_raw_.push_back(&reg.create(prefix + ".gate" + std::to_string(s), 1, 1));
  }
}

std::vector<Var> MultiEncoder::run_shared(Tape& ts, const std::vector<Var>& embedded) const {
  return shared_.run(ts, embedded);
}

Var MultiEncoder::gate(Tape& ts, int slot) const {
  return ts.logistic(ts.param(*gate_raw_[slot]));
}

double MultiEncoder::gate_value(int slot) const {
  return 1.0 / (1.0 + std::exp(-gate_raw_[slot]->value(0, 0)));
}

MultiEncoder::Output MultiEncoder::encode(Tape& ts, int slot,
                                          const std::vector<Var>& embedded,
                                          const EncoderAblations& abl,
                                          const std::vector<Var>* shared_cols) const {
  if (embedded.empty()) throw std::invalid_argument("encode: empty token sequence");
  Output out;
  if (!abl.multi_encoder) {
    // Single BiLSTM replaces the private/shared pair.
    std::vector<Var> hs = shared_cols ? *shared_cols : shared_.run(ts, embedded);
    out.H = ts.hconcat(hs);
    out.c = abl.self_attention ? att_shared_.context(ts, out.H).second : hs.back();
    return out;
  }
  std::vector<Var> hp = private_[slot].run(ts, embedded);
  if (!abl.shared_lstm) {
    out.H = ts.hconcat(hp);
    out.c = abl.self_attention ? att_private_[slot].context(ts, out.H).second : hp.back();
    return out;
  }
  std::vector<Var> hg = shared_cols ? *shared_cols : shared_.run(ts, embedded);
  Var beta = gate(ts, slot);
  Var one = ts.constant(Mat::Ones(1, 1));
  Var beta_c = ts.sub(one, beta);
  Var Hs = ts.hconcat(hp);
  Var Hg = ts.hconcat(hg);
  out.H = ts.add(ts.smul(beta, Hs), ts.smul(beta_c, Hg));
  if (abl.self_attention) {
    Var cs = att_private_[slot].context(ts, out.H).second;
    Var cg = att_shared_.context(ts, out.H).second;
    out.c = ts.add(ts.smul(beta, cs), ts.smul(beta_c, cg));
  } else {
    out.c = ts.slice_rows(ts.transpose(out.H), static_cast<int>(embedded.size()) - 1, 1);
    out.c = ts.transpose(out.c);
  }
  return out;
}

Var interact_actions(Tape& ts, const std::vector<Var>& action_contexts, Var c_u, int d_rnn) {
  if (action_contexts.empty()) return ts.constant(Mat::Zero(d_rnn, 1));
  Var Ca = ts.hconcat(action_contexts);          // d x l
  Var scores = ts.matmul(ts.transpose(Ca), c_u);  // l x 1
  Var p = ts.softmax(scores);
  return ts.matmul(Ca, p);
}

}  // namespace cedst
