#include "cedst/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace cedst {

void validate_ablations(const AblationFlags& f) {
  if (!f.multi_encoder && !f.shared_lstm)
    throw std::invalid_argument(
        "ablation: multi_encoder=off and shared_lstm=off leave no encoder");
  if (!f.multi_decoder && !f.shared_lstm)
    throw std::invalid_argument(
        "ablation: multi_decoder=off and shared_lstm=off leave no decoder");
}

CedstModel::CedstModel(const Ontology& ontology, const Vocabulary* vocab,
                       const EmbeddingTable* table, ModelConfig config)
    : ontology_(ontology), vocab_(vocab), table_(table), config_(std::move(config)) {
  validate_ablations(config_.ablations);
  if (table_->dim != config_.d_emb)
    throw std::invalid_argument("model: embedding table dim does not match d_emb");
  const int n_slots = static_cast<int>(ontology_.slots.size());
  enc_utt_ = std::make_unique<MultiEncoder>(reg_, "enc_utt", n_slots, config_.d_emb,
                                            config_.d_rnn);
  if (!config_.tie_encoders) {
    enc_act_ = std::make_unique<MultiEncoder>(reg_, "enc_act", n_slots, config_.d_emb,
                                              config_.d_rnn);
    enc_val_ = std::make_unique<MultiEncoder>(reg_, "enc_val", n_slots, config_.d_emb,
                                              config_.d_rnn);
  }
  dec_ = std::make_unique<MultiDecoder>(reg_, "dec", n_slots, config_.d_emb, config_.d_rnn);
  for (int s = 0; s < n_slots; ++s)
    stop_rows_.push_back(&reg_.create("stop" + std::to_string(s), config_.d_rnn, 1));
}

void CedstModel::set_ablations(const AblationFlags& flags) {
  validate_ablations(flags);
  config_.ablations = flags;
}

Var CedstModel::embed_token(Tape& ts, const std::string& token) const {
  return ts.constant(table_->rows.row(vocab_->index(token)).transpose());
}

Var CedstModel::maybe_dropout(Tape& ts, Var x, std::mt19937_64* rng, double keep) const {
  if (!rng || keep >= 1.0) return x;
  Mat mask(x->value.rows(), x->value.cols());
  for (int j = 0; j < mask.cols(); ++j)
    for (int i = 0; i < mask.rows(); ++i)
      mask(i, j) = ((*rng)() % 10000 < static_cast<std::uint64_t>(keep * 10000))
                       ? 1.0 / keep
                       : 0.0;
  return ts.cmult(x, ts.constant(std::move(mask)));
}

std::vector<Var> CedstModel::embed_tokens(Tape& ts, const std::vector<std::string>& tokens,
                                          std::mt19937_64* rng, double keep) const {
  std::vector<Var> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(maybe_dropout(ts, embed_token(ts, t), rng, keep));
  return out;
}

CedstModel::TurnForward CedstModel::forward_turn(Tape& ts, const Turn& turn, bool training,
                                                 std::mt19937_64* dropout_rng,
                                                 double dropout_keep) {
  if (turn.user_utterance.empty())
    throw std::invalid_argument("forward_turn: empty user utterance");
  std::mt19937_64* rng = training ? dropout_rng : nullptr;
  const EncoderAblations enc_abl{config_.ablations.multi_encoder,
                                 config_.ablations.self_attention,
                                 config_.ablations.shared_lstm};
  MultiEncoder& enc_utt = *enc_utt_;
  MultiEncoder& enc_act = config_.tie_encoders ? *enc_utt_ : *enc_act_;
  MultiEncoder& enc_val = config_.tie_encoders ? *enc_utt_ : *enc_val_;

  TurnForward fwd;
  fwd.utterance = turn.user_utterance;
  const int n_slots = static_cast<int>(ontology_.slots.size());

  std::vector<Var> utt_emb = embed_tokens(ts, turn.user_utterance, rng, dropout_keep);
  std::vector<Var> utt_shared;
  if (config_.ablations.shared_lstm || !config_.ablations.multi_encoder)
    utt_shared = enc_utt.run_shared(ts, utt_emb);

  // System action token sequences are shared across slots; cache their
  // embeddings and shared-path hidden states once per turn.
  std::vector<std::vector<Var>> act_emb;
  std::vector<std::vector<Var>> act_shared;
  for (const auto& a : turn.system_actions) {
    auto tokens = a.tokens();
    if (tokens.empty()) continue;
    act_emb.push_back(embed_tokens(ts, tokens, rng, dropout_keep));
    if (config_.ablations.shared_lstm || !config_.ablations.multi_encoder)
      act_shared.push_back(enc_act.run_shared(ts, act_emb.back()));
    else
      act_shared.emplace_back();
  }

  for (int s = 0; s < n_slots; ++s) {
    const SlotSpec& spec = ontology_.slots[s];
    SlotForward sf;

    MultiEncoder::Output utt_out = enc_utt.encode(
        ts, s, utt_emb, enc_abl, utt_shared.empty() ? nullptr : &utt_shared);
    sf.H_u = maybe_dropout(ts, utt_out.H, rng, dropout_keep);
    sf.c_u = maybe_dropout(ts, utt_out.c, rng, dropout_keep);

    std::vector<Var> action_contexts;
    for (size_t ai = 0; ai < act_emb.size(); ++ai) {
      MultiEncoder::Output aout = enc_act.encode(
          ts, s, act_emb[ai], enc_abl, act_shared[ai].empty() ? nullptr : &act_shared[ai]);
      action_contexts.push_back(maybe_dropout(ts, aout.c, rng, dropout_keep));
    }
    sf.c_n = interact_actions(ts, action_contexts, sf.c_u, config_.d_rnn);

    std::vector<Var> value_cols;
    auto encode_value = [&](const std::string& value) {
      auto tokens = tokenize(value);
      if (tokens.empty()) tokens.push_back(value);
      std::vector<Var> emb = embed_tokens(ts, tokens, rng, dropout_keep);
      MultiEncoder::Output vout = enc_val.encode(ts, s, emb, enc_abl);
      value_cols.push_back(maybe_dropout(ts, vout.c, rng, dropout_keep));
    };
    for (const auto& v : spec.values) encode_value(v);
    for (const auto& v : spec.specials) encode_value(v);

    sf.memory = build_memory(ts, s, config_.ablations.copy ? sf.H_u : nullptr,
                             turn.user_utterance, value_cols, spec,
                             ts.param(*stop_rows_[s]));

    if (action_contexts.empty())
      sf.K = sf.H_u;
    else {
      std::vector<Var> keys{sf.H_u};
      keys.insert(keys.end(), action_contexts.begin(), action_contexts.end());
      sf.K = ts.hconcat(keys);
    }
    fwd.slots.push_back(std::move(sf));
  }
  return fwd;
}

MultiDecoder::State CedstModel::first_step(Tape& ts, const SlotForward& sf, int slot) const {
  const DecoderAblations dec_abl{config_.ablations.multi_decoder,
                                 config_.ablations.shared_lstm};
  Var s0 = config_.decoder_init == DecoderInit::ActionInteraction
               ? sf.c_n
               : ts.constant(Mat::Zero(config_.d_rnn, 1));
  Var go = embed_token(ts, "<go>");
  Var a0 = dec_->attend(ts, sf.K, go);
  return dec_->step(ts, dec_->init(ts, s0), go, a0, slot, dec_abl);
}

namespace {

int argmax_tiebreak_low(const Eigen::VectorXd& v, const std::vector<bool>& mask = {}) {
  int best = -1;
  for (int i = 0; i < v.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (best < 0 || v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

SlotPrediction CedstModel::decode_single(Tape& ts, const TurnForward& fwd, int slot) {
  const SlotSpec& spec = ontology_.slots[slot];
  if (spec.kind != SlotKind::Single)
    throw std::invalid_argument("decode_single: slot is not single-kind");
  const SlotForward& sf = fwd.slots[slot];
  const DecoderAblations dec_abl{config_.ablations.multi_decoder,
                                 config_.ablations.shared_lstm};

  SlotPrediction pred;
  pred.slot = slot;
  MultiDecoder::State st = first_step(ts, sf, slot);
  Var p1 = ts.softmax(score_memory(ts, sf.memory, st.s));
  pred.steps.push_back({DecodeDistribution::Mode::Softmax, p1->value.col(0)});

  int row = argmax_tiebreak_low(p1->value.col(0));
  const MemoryRow& chosen = sf.memory.rows[row];
  if (chosen.kind == RowKind::Generate) {
    pred.outcomes.push_back({SlotOutcome::Kind::Value, chosen.index, chosen.surface, {}});
    return pred;
  }
  if (chosen.kind != RowKind::Copy) {
    // Special row, or the degenerate stop-at-step-1 case (maps to none).
    const int id = chosen.kind == RowKind::Special ? chosen.index : 0;
    const std::string surface = chosen.kind == RowKind::Special ? chosen.surface : "none";
    pred.outcomes.push_back({SlotOutcome::Kind::Special, id, surface, {}});
    return pred;
  }

  // Copy mode: continue over copy rows until the stop row wins.
  std::vector<int> positions{chosen.index};
  const std::vector<bool> mask = sf.memory.copy_continuation_mask();
  while (static_cast<int>(positions.size()) < config_.max_copy_len) {
    Var y = embed_token(ts, fwd.utterance[positions.back()]);
    Var a = dec_->attend(ts, sf.K, y);
    st = dec_->step(ts, st, y, a, slot, dec_abl);
    Var p = ts.softmax(score_memory(ts, sf.memory, st.s), mask);
    pred.steps.push_back({DecodeDistribution::Mode::Softmax, p->value.col(0)});
    int next = argmax_tiebreak_low(p->value.col(0), mask);
    if (sf.memory.rows[next].kind == RowKind::Stop) break;
    positions.push_back(sf.memory.rows[next].index);
  }
  SlotOutcome out;
  out.kind = SlotOutcome::Kind::Copied;
  out.positions = positions;
  for (size_t i = 0; i < positions.size(); ++i) {
    if (i) out.surface += ' ';
    out.surface += fwd.utterance[positions[i]];
  }
  pred.outcomes.push_back(std::move(out));
  return pred;
}

SlotPrediction CedstModel::decode_multi(Tape& ts, const TurnForward& fwd, int slot) {
  const SlotSpec& spec = ontology_.slots[slot];
  if (spec.kind != SlotKind::Multi)
    throw std::invalid_argument("decode_multi: slot is not multi-kind");
  const SlotForward& sf = fwd.slots[slot];

  SlotPrediction pred;
  pred.slot = slot;
  MultiDecoder::State st = first_step(ts, sf, slot);
  Var p = ts.logistic(score_memory(ts, sf.memory, st.s));
  pred.steps.push_back({DecodeDistribution::Mode::Sigmoid, p->value.col(0)});

  std::vector<int> copy_positions;
  for (int i = 0; i < sf.memory.row_count(); ++i) {
    if (!(p->value(i, 0) > 0.5)) continue;  // strict threshold
    const MemoryRow& row = sf.memory.rows[i];
    switch (row.kind) {
      case RowKind::Generate:
        pred.outcomes.push_back({SlotOutcome::Kind::Value, row.index, row.surface, {}});
        break;
      case RowKind::Special:
        pred.outcomes.push_back({SlotOutcome::Kind::Special, row.index, row.surface, {}});
        break;
      case RowKind::Copy:
        copy_positions.push_back(row.index);
        break;
      case RowKind::Stop:
        break;
    }
  }
  std::sort(copy_positions.begin(), copy_positions.end());
  for (const TokenSpan& span : segment_copied(copy_positions)) {
    SlotOutcome out;
    out.kind = SlotOutcome::Kind::Copied;
    out.surface = span_surface(span, fwd.utterance);
    for (int t = span.first; t <= span.last; ++t) out.positions.push_back(t);
    pred.outcomes.push_back(std::move(out));
  }
  if (pred.outcomes.empty())
    pred.outcomes.push_back({SlotOutcome::Kind::Special, 0, "none", {}});
  return pred;
}

Var CedstModel::loss_single(Tape& ts, const TurnForward& fwd, int slot,
                            const SingleTarget& target, TargetPolicy policy) {
  const SlotForward& sf = fwd.slots[slot];
  const DecoderAblations dec_abl{config_.ablations.multi_decoder,
                                 config_.ablations.shared_lstm};

  std::vector<int> final_rows = target.final_rows;
  std::vector<std::vector<int>> copy_paths = target.copy_paths;
  if (policy == TargetPolicy::PreferGenerate && !final_rows.empty()) copy_paths.clear();
  if (policy == TargetPolicy::PreferCopy && !copy_paths.empty()) final_rows.clear();
  if (final_rows.empty() && copy_paths.empty())
    throw std::invalid_argument("loss_single: empty target set");

  MultiDecoder::State s1 = first_step(ts, sf, slot);
  Var p1 = ts.softmax(score_memory(ts, sf.memory, s1.s));

  Var total = nullptr;
  auto accumulate = [&](Var term) { total = total ? ts.add(total, term) : term; };
  for (int r : final_rows) accumulate(ts.pick(p1, r));

  const std::vector<bool> mask = sf.memory.copy_continuation_mask();
  for (const auto& path : copy_paths) {
    Var prob = ts.pick(p1, path[0]);
    MultiDecoder::State st = s1;
    for (size_t t = 1; t < path.size(); ++t) {
      const MemoryRow& prev = sf.memory.rows[path[t - 1]];
      Var y = embed_token(ts, fwd.utterance[prev.index]);
      Var a = dec_->attend(ts, sf.K, y);
      st = dec_->step(ts, st, y, a, slot, dec_abl);
      Var p = ts.softmax(score_memory(ts, sf.memory, st.s), mask);
      prob = ts.cmult(prob, ts.pick(p, path[t]));
    }
    accumulate(prob);
  }
  return ts.scale(ts.log_eps(total), -1.0);
}

Var CedstModel::loss_multi(Tape& ts, const TurnForward& fwd, int slot, const Mat& targets01) {
  const SlotForward& sf = fwd.slots[slot];
  MultiDecoder::State s1 = first_step(ts, sf, slot);
  Var scores = score_memory(ts, sf.memory, s1.s);
  if (targets01.rows() != scores->value.rows())
    throw std::invalid_argument("loss_multi: target vector length mismatch");
  return ts.bce_with_logits(scores, targets01);
}

}  // namespace cedst
