#pragma once

#include "cedst/model.hpp"

#include <map>
#include <string>

namespace cedst {

struct UnkStats {
  int unk_all = 0;      // predicted values absent from the visible ontology
  int unk_correct = 0;  // of those, matching a gold unknown value

  double precision() const { return unk_all == 0 ? 0.0 : double(unk_correct) / unk_all; }
};

struct Metrics {
  double joint_goal_acc = 0.0;
  double turn_request_acc = 0.0;
  double turn_goal_acc = 0.0;
  int turns = 0;
  std::map<std::string, double> per_slot;  // turn-level joint value accuracy
  // Accuracy on turns whose gold turn value for the slot is unknown;
  // -1 when no such turns exist.
  std::map<std::string, double> per_slot_unknown;
  UnkStats unk;
};

// Turn-level prediction, exposed for tests and the unknown-value counts.
struct TurnPrediction {
  std::map<std::string, std::string> turn_goal;  // "none" omitted
  std::set<std::string> requests;
};
TurnPrediction predict_turn(CedstModel& model, const Turn& turn);

// Per-dialogue state reset, per-turn prediction, joint-goal accumulation,
// exact canonical match against gold.
Metrics evaluate(CedstModel& model, const Corpus& corpus, const std::string& split,
                 std::uint64_t expected_vocab_hash = 0);

std::string metrics_to_json(const Metrics& m);

}  // namespace cedst
