#include "cedst/training.hpp"

#include "cedst/evaluation.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace cedst {

using json = nlohmann::ordered_json;

ModelConfig TrainConfig::model_config(int table_dim) const {
  ModelConfig mc;
  mc.d_emb = table_dim;
  mc.d_rnn = d_rnn;
  mc.tie_encoders = tie_encoders;
  mc.decoder_init = decoder_init;
  mc.max_copy_len = max_copy_len;
  mc.ablations = ablations;
  return mc;
}

std::vector<int> find_value_positions(const std::vector<std::string>& value_tokens,
                                      const std::vector<std::string>& utterance) {
  std::vector<int> starts;
  if (value_tokens.empty() || value_tokens.size() > utterance.size()) return starts;
  for (size_t at = 0; at + value_tokens.size() <= utterance.size(); ++at) {
    bool match = true;
    for (size_t k = 0; k < value_tokens.size(); ++k)
      if (utterance[at + k] != value_tokens[k]) {
        match = false;
        break;
      }
    if (match) starts.push_back(static_cast<int>(at));
  }
  return starts;
}

CedstModel::SingleTarget build_single_target(const Turn& turn, const SlotSpec& spec,
                                             const SlotMemory& memory, std::ostream* warn) {
  CedstModel::SingleTarget target;
  auto it = turn.gold.turn_goal.find(spec.name);
  const std::string gold = it == turn.gold.turn_goal.end() ? "none" : it->second;

  for (size_t i = 0; i < spec.specials.size(); ++i)
    if (spec.specials[i] == gold) {
      target.final_rows.push_back(memory.special_row(static_cast<int>(i)));
      return target;
    }
  for (size_t i = 0; i < spec.values.size(); ++i)
    if (spec.values[i] == gold)
      target.final_rows.push_back(memory.generate_row(static_cast<int>(i)));

  if (memory.n_copy > 0) {
    const auto value_tokens = tokenize(gold);
    for (int start : find_value_positions(value_tokens, turn.user_utterance)) {
      std::vector<int> path;
      for (size_t k = 0; k < value_tokens.size(); ++k)
        path.push_back(start + static_cast<int>(k));  // copy rows come first
      path.push_back(memory.stop_row());
      target.copy_paths.push_back(std::move(path));
    }
  }

  if (target.final_rows.empty() && target.copy_paths.empty()) {
    // Gold is neither generatable nor findable; fall back to "none".
    if (warn)
      *warn << "warning: slot '" << spec.name << "' gold value '" << gold
            << "' unreachable, training toward none\n";
    target.final_rows.push_back(memory.special_row(0));
    target.trainable = false;
  }
  return target;
}

Mat build_multi_target(const Turn& turn, const SlotSpec& spec, const SlotMemory& memory) {
  Mat t = Mat::Zero(memory.row_count(), 1);
  if (turn.gold.requests.empty()) {
    t(memory.special_row(0), 0) = 1.0;  // "none"
    return t;
  }
  for (const auto& r : turn.gold.requests) {
    for (size_t i = 0; i < spec.values.size(); ++i)
      if (spec.values[i] == r) t(memory.generate_row(static_cast<int>(i)), 0) = 1.0;
    if (memory.n_copy > 0)
      for (int start : find_value_positions(tokenize(r), turn.user_utterance))
        for (size_t k = 0; k < tokenize(r).size(); ++k) t(start + static_cast<int>(k), 0) = 1.0;
  }
  return t;
}

AdamOptimizer::AdamOptimizer(ParamRegistry& reg, double lr, double beta1, double beta2,
                             double eps)
    : reg_(reg), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Parameter* p : reg_.all()) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamOptimizer::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  const auto& params = reg_.all();
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    const Mat m_hat = m_[i] / bc1;
    const Mat v_hat = v_[i] / bc2;
    p.value.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
}

void apply_ablation(const AblationFlags& flags, CedstModel& model) {
  model.set_ablations(flags);
}

namespace {

double turn_loss(CedstModel& model, Tape& ts, const Turn& turn, const TrainConfig& cfg,
                 std::mt19937_64* dropout_rng, bool backward, std::ostream* warn) {
  auto fwd = model.forward_turn(ts, turn, backward, dropout_rng, cfg.dropout_keep);
  const Ontology& ont = model.ontology();
  Var total = nullptr;
  int n_terms = 0;
  for (size_t s = 0; s < ont.slots.size(); ++s) {
    Var l;
    if (ont.slots[s].kind == SlotKind::Single) {
      auto target = build_single_target(turn, ont.slots[s], fwd.slots[s].memory, warn);
      l = model.loss_single(ts, fwd, static_cast<int>(s), target, cfg.target_policy);
    } else {
      Mat t01 = build_multi_target(turn, ont.slots[s], fwd.slots[s].memory);
      l = model.loss_multi(ts, fwd, static_cast<int>(s), t01);
    }
    total = total ? ts.add(total, l) : l;
    ++n_terms;
  }
  Var loss = ts.scale(total, 1.0 / n_terms);
  if (backward) ts.backward(loss);
  return loss->value(0, 0);
}

}  // namespace

TrainResult train(CedstModel& model, const Corpus& corpus, const TrainConfig& cfg,
                  std::ostream* log) {
  validate_ablations(cfg.ablations);
  std::mt19937_64 init_rng(cfg.seed);
  model.params().init_xavier(init_rng);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  AdamOptimizer adam(model.params(), cfg.learning_rate);

  const auto& train_split = corpus.split("train");
  const bool has_dev = !corpus.split("dev").empty();
  const std::string dev_split = has_dev ? "dev" : "train";
  const Mat embeddings_before = model.table().rows;

  TrainResult result;
  std::vector<Mat> best_params;
  int batch_fill = 0;
  model.params().zero_grads();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    int n_turns = 0;
    for (const auto& d : train_split) {
      for (const auto& turn : d.turns) {
        Tape ts;
        const double loss = turn_loss(model, ts, turn, cfg, &dropout_rng, true, log);
        if (!std::isfinite(loss)) {
          std::ostringstream oss;
          oss << "non-finite loss at epoch " << epoch << ", dialogue '" << d.id << "'";
          throw std::runtime_error(oss.str());
        }
        epoch_loss += loss;
        ++n_turns;
        if (++batch_fill >= cfg.batch_size) {
          adam.step();
          model.params().zero_grads();
          batch_fill = 0;
        }
      }
    }
    if (batch_fill > 0) {
      adam.step();
      model.params().zero_grads();
      batch_fill = 0;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = n_turns ? epoch_loss / n_turns : 0.0;
    stats.dev_joint_goal = evaluate(model, corpus, dev_split).joint_goal_acc;
    result.history.push_back(stats);
    if (log)
      *log << "epoch " << epoch << " loss " << stats.train_loss << " dev-joint "
           << stats.dev_joint_goal << "\n";

    if (result.best_epoch < 0 || stats.dev_joint_goal > result.best_dev_joint_goal) {
      result.best_epoch = epoch;
      result.best_dev_joint_goal = stats.dev_joint_goal;
      best_params.clear();
      for (Parameter* p : model.params().all()) best_params.push_back(p->value);
    }
  }

  // Restore the best-dev checkpoint.
  if (!best_params.empty()) {
    const auto& params = model.params().all();
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  }
  if (model.table().rows != embeddings_before)
    throw std::logic_error("embedding matrix changed during training");
  return result;
}

namespace {

json config_to_json(const TrainConfig& c) {
  json j;
  j["d_emb"] = c.d_emb;
  j["d_rnn"] = c.d_rnn;
  j["learning_rate"] = c.learning_rate;
  j["dropout_keep"] = c.dropout_keep;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["embedding_seed"] = c.embedding_seed;
  j["embeddings_path"] = c.embeddings_path;
  j["ngram_dim"] = c.ngram_dim;
  j["target_policy"] = c.target_policy == TargetPolicy::Marginalize      ? "marginalize"
                       : c.target_policy == TargetPolicy::PreferGenerate ? "prefer_generate"
                                                                         : "prefer_copy";
  j["tie_encoders"] = c.tie_encoders;
  j["decoder_init"] = c.decoder_init == DecoderInit::ActionInteraction ? "c_n" : "zeros";
  j["max_copy_len"] = c.max_copy_len;
  j["ablations"] = {{"multi_encoder", c.ablations.multi_encoder},
                    {"multi_decoder", c.ablations.multi_decoder},
                    {"copy", c.ablations.copy},
                    {"self_attention", c.ablations.self_attention},
                    {"shared_lstm", c.ablations.shared_lstm}};
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.d_emb = j.at("d_emb").get<int>();
  c.d_rnn = j.at("d_rnn").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.dropout_keep = j.at("dropout_keep").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.embedding_seed = j.at("embedding_seed").get<std::uint64_t>();
  c.embeddings_path = j.at("embeddings_path").get<std::string>();
  c.ngram_dim = j.at("ngram_dim").get<int>();
  const std::string policy = j.at("target_policy").get<std::string>();
  c.target_policy = policy == "marginalize"      ? TargetPolicy::Marginalize
                    : policy == "prefer_generate" ? TargetPolicy::PreferGenerate
                                                  : TargetPolicy::PreferCopy;
  c.tie_encoders = j.at("tie_encoders").get<bool>();
  c.decoder_init = j.at("decoder_init").get<std::string>() == "zeros"
                       ? DecoderInit::Zeros
                       : DecoderInit::ActionInteraction;
  c.max_copy_len = j.at("max_copy_len").get<int>();
  const auto& ja = j.at("ablations");
  c.ablations.multi_encoder = ja.at("multi_encoder").get<bool>();
  c.ablations.multi_decoder = ja.at("multi_decoder").get<bool>();
  c.ablations.copy = ja.at("copy").get<bool>();
  c.ablations.self_attention = ja.at("self_attention").get<bool>();
  c.ablations.shared_lstm = ja.at("shared_lstm").get<bool>();
  return c;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

std::string checkpoint_to_json(const CedstModel& model, const TrainConfig& config) {
  json j;
  j["version"] = 1;
  j["config"] = config_to_json(config);
  j["vocab_hash"] = model.vocab().hash();
  j["tensors"] = json::object();
  CedstModel& m = const_cast<CedstModel&>(model);
  for (Parameter* p : m.params().all()) {
    json jt;
    jt["rows"] = p->value.rows();
    jt["cols"] = p->value.cols();
    std::vector<double> data;
    data.reserve(p->value.size());
    for (int c = 0; c < p->value.cols(); ++c)
      for (int r = 0; r < p->value.rows(); ++r) data.push_back(p->value(r, c));
    jt["data"] = std::move(data);
    j["tensors"][p->name] = std::move(jt);
  }
  return j.dump() + "\n";
}

void save_checkpoint(const CedstModel& model, const TrainConfig& config,
                     const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << checkpoint_to_json(model, config);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("checkpoint parse error in " + path.string() + ": " + e.what());
  }
  Checkpoint ckpt;
  ckpt.version = j.at("version").get<int>();
  if (ckpt.version != 1)
    throw ParseError("unsupported checkpoint version " + std::to_string(ckpt.version));
  ckpt.config = config_from_json(j.at("config"));
  ckpt.vocab_hash = j.at("vocab_hash").get<std::uint64_t>();
  for (const auto& [name, jt] : j.at("tensors").items()) {
    Mat m(jt.at("rows").get<int>(), jt.at("cols").get<int>());
    const auto& data = jt.at("data");
    int k = 0;
    for (int c = 0; c < m.cols(); ++c)
      for (int r = 0; r < m.rows(); ++r) m(r, c) = data.at(k++).get<double>();
    ckpt.tensors.emplace_back(name, std::move(m));
  }
  return ckpt;
}

void load_checkpoint_into(CedstModel& model, const Checkpoint& ckpt) {
  if (model.vocab().hash() != ckpt.vocab_hash)
    throw SchemaError("checkpoint refused: vocabulary hash mismatch");
  for (const auto& [name, value] : ckpt.tensors) {
    Parameter* p = model.params().find(name);
    if (!p) throw SchemaError("checkpoint refused: unknown tensor '" + name + "'");
    if (p->value.rows() != value.rows() || p->value.cols() != value.cols())
      throw SchemaError("checkpoint refused: shape mismatch for '" + name + "'");
    p->value = value;
  }
}

}  // namespace cedst
