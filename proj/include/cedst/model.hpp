#pragma once

#include "cedst/corpus.hpp"
#include "cedst/decoder.hpp"
#include "cedst/embeddings.hpp"
#include "cedst/encoder.hpp"
#include "cedst/state_space.hpp"

#include <memory>
#include <random>

namespace cedst {

struct AblationFlags {
  bool multi_encoder = true;
  bool multi_decoder = true;
  bool copy = true;
  bool self_attention = true;
  bool shared_lstm = true;
};

// Throws on contradictory combinations (nothing left to run).
void validate_ablations(const AblationFlags& flags);

enum class DecoderInit { Zeros, ActionInteraction };

struct ModelConfig {
  int d_emb = 48;
  int d_rnn = 64;
  bool tie_encoders = false;
  DecoderInit decoder_init = DecoderInit::ActionInteraction;
  int max_copy_len = 5;
  AblationFlags ablations;
};

struct DecodeDistribution {
  enum class Mode { Softmax, Sigmoid };
  Mode mode = Mode::Softmax;
  Eigen::VectorXd probs;  // over memory rows
};

struct SlotOutcome {
  enum class Kind { Value, Special, Copied };
  Kind kind = Kind::Special;
  int id = -1;                 // value or special id
  std::string surface;         // predicted value string
  std::vector<int> positions;  // utterance positions for Copied
};

struct SlotPrediction {
  int slot = -1;
  std::vector<SlotOutcome> outcomes;  // exactly one for single-kind slots
  std::vector<DecodeDistribution> steps;
};

enum class TargetPolicy { Marginalize, PreferGenerate, PreferCopy };

class CedstModel {
 public:
  CedstModel(const Ontology& ontology, const Vocabulary* vocab,
             const EmbeddingTable* table, ModelConfig config);

  ParamRegistry& params() { return reg_; }
  const ModelConfig& config() const { return config_; }
  const Ontology& ontology() const { return ontology_; }
  void set_ablations(const AblationFlags& flags);

  struct SlotForward {
    SlotMemory memory;
    Var H_u = nullptr;  // d_rnn x n
    Var K = nullptr;    // d_rnn x (n + l) attention keys
    Var c_u = nullptr;
    Var c_n = nullptr;  // action interaction vector
  };
  struct TurnForward {
    std::vector<SlotForward> slots;
    std::vector<std::string> utterance;
  };

  // Encodes utterance, actions, and candidate values and assembles the
  // per-slot memories. Dropout (inverted, on embeddings and encoder
  // outputs) is active only when training with a non-null rng.
  TurnForward forward_turn(Tape& ts, const Turn& turn, bool training = false,
                           std::mt19937_64* dropout_rng = nullptr,
                           double dropout_keep = 1.0);

  SlotPrediction decode_single(Tape& ts, const TurnForward& fwd, int slot);
  SlotPrediction decode_multi(Tape& ts, const TurnForward& fwd, int slot);

  struct SingleTarget {
    std::vector<int> final_rows;               // generate/special rows valid at step 1
    std::vector<std::vector<int>> copy_paths;  // row sequences ending with the stop row
    bool trainable = true;
  };
  Var loss_single(Tape& ts, const TurnForward& fwd, int slot, const SingleTarget& target,
                  TargetPolicy policy);
  Var loss_multi(Tape& ts, const TurnForward& fwd, int slot, const Mat& targets01);

  MultiEncoder& utterance_encoder() { return *enc_utt_; }
  MultiEncoder& action_encoder() { return *enc_act_; }
  MultiEncoder& value_encoder() { return *enc_val_; }
  MultiDecoder& decoder() { return *dec_; }
  Parameter& stop_vector(int slot) { return *stop_rows_[slot]; }
  const Vocabulary& vocab() const { return *vocab_; }
  const EmbeddingTable& table() const { return *table_; }

 private:
  Var embed_token(Tape& ts, const std::string& token) const;
  std::vector<Var> embed_tokens(Tape& ts, const std::vector<std::string>& tokens,
                                std::mt19937_64* dropout_rng, double keep) const;
  Var maybe_dropout(Tape& ts, Var x, std::mt19937_64* rng, double keep) const;
  MultiDecoder::State first_step(Tape& ts, const SlotForward& sf, int slot) const;

  Ontology ontology_;
  const Vocabulary* vocab_;
  const EmbeddingTable* table_;
  ModelConfig config_;
  ParamRegistry reg_;
  std::unique_ptr<MultiEncoder> enc_utt_;
  std::unique_ptr<MultiEncoder> enc_act_;  // may alias enc_utt_ when tied
  std::unique_ptr<MultiEncoder> enc_val_;
  std::unique_ptr<MultiDecoder> dec_;
  std::vector<Parameter*> stop_rows_;
};

}  // namespace cedst
