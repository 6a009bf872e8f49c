#include "cedst/evaluation.hpp"

#include <json.hpp>

namespace cedst {

using json = nlohmann::ordered_json;

TurnPrediction predict_turn(CedstModel& model, const Turn& turn) {
  Tape ts;
  auto fwd = model.forward_turn(ts, turn);
  TurnPrediction pred;
  const Ontology& ont = model.ontology();
  for (size_t s = 0; s < ont.slots.size(); ++s) {
    if (ont.slots[s].kind == SlotKind::Single) {
      auto sp = model.decode_single(ts, fwd, static_cast<int>(s));
      const SlotOutcome& out = sp.outcomes.front();
      if (out.kind == SlotOutcome::Kind::Special && out.surface == "none") continue;
      pred.turn_goal[ont.slots[s].name] = out.surface;
    } else {
      auto sp = model.decode_multi(ts, fwd, static_cast<int>(s));
      for (const auto& out : sp.outcomes) {
        if (out.kind == SlotOutcome::Kind::Special) continue;  // none row
        pred.requests.insert(canonicalize(out.surface));
      }
    }
  }
  return pred;
}

namespace {

bool goals_match(const std::map<std::string, std::string>& a,
                 const std::map<std::string, std::string>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [slot, value] : a) {
    auto it = b.find(slot);
    if (it == b.end() || !canonical_match(value, it->second)) return false;
  }
  return true;
}

}  // namespace

Metrics evaluate(CedstModel& model, const Corpus& corpus, const std::string& split,
                 std::uint64_t expected_vocab_hash) {
  if (expected_vocab_hash != 0 && model.vocab().hash() != expected_vocab_hash)
    throw SchemaError("evaluate refused: vocabulary hash mismatch");
  const Ontology& ont = model.ontology();
  Metrics m;
  std::map<std::string, int> slot_hits, slot_total;
  std::map<std::string, int> unk_hits, unk_total;
  int joint_hits = 0, request_hits = 0, goal_hits = 0;

  for (const auto& d : corpus.split(split)) {
    DialogueState pred_state, gold_state;
    for (const auto& turn : d.turns) {
      TurnPrediction pred = predict_turn(model, turn);
      pred_state = accumulate_joint_goal(pred_state, pred.turn_goal, ont);
      gold_state = accumulate_joint_goal(gold_state, turn.gold.turn_goal, ont);
      ++m.turns;

      if (goals_match(pred_state.joint_goal, gold_state.joint_goal)) ++joint_hits;
      if (goals_match(pred.turn_goal, turn.gold.turn_goal)) ++goal_hits;

      std::set<std::string> gold_requests;
      for (const auto& r : turn.gold.requests) gold_requests.insert(canonicalize(r));
      if (pred.requests == gold_requests) ++request_hits;

      for (const auto& slot : ont.slots) {
        if (slot.kind != SlotKind::Single) continue;
        auto gp = gold_state.joint_goal.find(slot.name);
        auto pp = pred_state.joint_goal.find(slot.name);
        const bool hit = (gp == gold_state.joint_goal.end())
                             ? pp == pred_state.joint_goal.end()
                             : (pp != pred_state.joint_goal.end() &&
                                canonical_match(pp->second, gp->second));
        ++slot_total[slot.name];
        if (hit) ++slot_hits[slot.name];

        // Unknown-value accuracy is turn-level: gold turn value present
        // and absent from the visible ontology.
        auto gt = turn.gold.turn_goal.find(slot.name);
        if (gt != turn.gold.turn_goal.end() &&
            corpus.is_unknown_value(slot.name, gt->second)) {
          ++unk_total[slot.name];
          auto pt = pred.turn_goal.find(slot.name);
          if (pt != pred.turn_goal.end() && canonical_match(pt->second, gt->second))
            ++unk_hits[slot.name];
        }

        // Figure-4 style counts over predicted turn values.
        auto pt = pred.turn_goal.find(slot.name);
        if (pt != pred.turn_goal.end() &&
            corpus.is_unknown_value(slot.name, canonicalize(pt->second))) {
          ++m.unk.unk_all;
          if (gt != turn.gold.turn_goal.end() &&
              corpus.is_unknown_value(slot.name, gt->second) &&
              canonical_match(pt->second, gt->second))
            ++m.unk.unk_correct;
        }
      }
    }
  }

  if (m.turns > 0) {
    m.joint_goal_acc = static_cast<double>(joint_hits) / m.turns;
    m.turn_request_acc = static_cast<double>(request_hits) / m.turns;
    m.turn_goal_acc = static_cast<double>(goal_hits) / m.turns;
  }
  for (const auto& [slot, total] : slot_total)
    m.per_slot[slot] = total ? static_cast<double>(slot_hits[slot]) / total : 0.0;
  for (const auto& slot_spec : ont.slots) {
    if (slot_spec.kind != SlotKind::Single) continue;
    auto it = unk_total.find(slot_spec.name);
    m.per_slot_unknown[slot_spec.name] =
        it == unk_total.end() || it->second == 0
            ? -1.0
            : static_cast<double>(unk_hits[slot_spec.name]) / it->second;
  }
  return m;
}

std::string metrics_to_json(const Metrics& m) {
  json j;
  j["joint_goal"] = m.joint_goal_acc;
  j["turn_request"] = m.turn_request_acc;
  j["turn_goal"] = m.turn_goal_acc;
  j["turns"] = m.turns;
  j["per_slot"] = json::object();
  for (const auto& [slot, acc] : m.per_slot) j["per_slot"][slot] = acc;
  j["per_slot_unknown"] = json::object();
  for (const auto& [slot, acc] : m.per_slot_unknown)
    if (acc >= 0.0) j["per_slot_unknown"][slot] = acc;
  j["unk"] = {{"all", m.unk.unk_all}, {"correct", m.unk.unk_correct}};
  return j.dump(2) + "\n";
}

}  // namespace cedst
