#pragma once

#include "cedst/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cedst {

struct TrainConfig {
  int d_emb = 48;
  int d_rnn = 64;
  double learning_rate = 0.001;
  double dropout_keep = 0.8;
  int epochs = 50;
  int batch_size = 1;  // turns per gradient step; all slots of a turn share a batch
  std::uint64_t seed = 1;
  std::uint64_t embedding_seed = 42;
  std::string embeddings_path;  // empty: seeded-random fixed embeddings
  int ngram_dim = 100;
  TargetPolicy target_policy = TargetPolicy::Marginalize;
  AblationFlags ablations;
  bool tie_encoders = false;
  DecoderInit decoder_init = DecoderInit::ActionInteraction;
  int max_copy_len = 5;

  ModelConfig model_config(int table_dim) const;
};

// Valid supervision rows for one (turn, slot) given the built memory.
// trainable=false marks the none-fallback for unreachable gold values.
CedstModel::SingleTarget build_single_target(const Turn& turn, const SlotSpec& spec,
                                             const SlotMemory& memory,
                                             std::ostream* warn = nullptr);
Mat build_multi_target(const Turn& turn, const SlotSpec& spec, const SlotMemory& memory);

// Token-subsequence occurrences of `value` in `utterance`.
std::vector<int> find_value_positions(const std::vector<std::string>& value_tokens,
                                      const std::vector<std::string>& utterance);

class AdamOptimizer {
 public:
  AdamOptimizer(ParamRegistry& reg, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step();

 private:
  ParamRegistry& reg_;
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Mat> m_, v_;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_joint_goal = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_dev_joint_goal = 0.0;
};

// Seeded Xavier init, Adam with fixed learning rate, dropout on
// embeddings and encoder outputs, best-dev checkpoint retained in the
// model. Deterministic for a fixed seed (single-threaded).
TrainResult train(CedstModel& model, const Corpus& corpus, const TrainConfig& config,
                  std::ostream* log = nullptr);

void apply_ablation(const AblationFlags& flags, CedstModel& model);

struct Checkpoint {
  int version = 1;
  TrainConfig config;
  std::uint64_t vocab_hash = 0;
  std::vector<std::pair<std::string, Mat>> tensors;
};

std::string train_config_to_json(const TrainConfig& config);
std::string checkpoint_to_json(const CedstModel& model, const TrainConfig& config);
void save_checkpoint(const CedstModel& model, const TrainConfig& config,
                     const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);
// Copies tensors into the model; refuses on vocabulary-hash mismatch.
void load_checkpoint_into(CedstModel& model, const Checkpoint& ckpt);

}  // namespace cedst
