#include "cedst/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace cedst {

std::string canonicalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // leading whitespace dropped
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

bool canonical_match(const std::string& predicted, const std::string& gold) {
  return canonicalize(predicted) == canonicalize(gold);
}

std::vector<std::string> tokenize(std::string_view raw) {
  std::string spaced;
  spaced.reserve(raw.size());
  for (char ch : raw) {
    unsigned char u = static_cast<unsigned char>(ch);
    if (std::ispunct(u) && ch != '\'' && ch != '-') {
      spaced.push_back(' ');
      spaced.push_back(ch);
      spaced.push_back(' ');
    } else {
      spaced.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  std::vector<std::string> tokens;
  std::istringstream iss(spaced);
  std::string tok;
  while (iss >> tok) tokens.push_back(tok);
  return tokens;
}

bool SlotSpec::has_value(const std::string& v) const {
  return std::find(values.begin(), values.end(), v) != values.end();
}

bool SlotSpec::is_special(const std::string& v) const {
  return std::find(specials.begin(), specials.end(), v) != specials.end();
}

std::vector<std::string> SystemAction::tokens() const {
  std::vector<std::string> out = tokenize(act);
  if (slot) {
    auto t = tokenize(*slot);
    out.insert(out.end(), t.begin(), t.end());
  }
  if (value) {
    auto t = tokenize(*value);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

int Ontology::slot_index(const std::string& name) const {
  for (size_t i = 0; i < slots.size(); ++i)
    if (slots[i].name == name) return static_cast<int>(i);
  return -1;
}

const SlotSpec* Ontology::find(const std::string& name) const {
  int i = slot_index(name);
  return i < 0 ? nullptr : &slots[i];
}

DialogueState accumulate_joint_goal(const DialogueState& prev,
                                    const std::map<std::string, std::string>& turn_goal,
                                    const Ontology& ontology) {
  DialogueState next = prev;
  for (const auto& [slot, value] : turn_goal) {
    const SlotSpec* spec = ontology.find(slot);
    if (!spec) throw SchemaError("unknown slot in turn goal: " + slot);
    if (canonicalize(value) == "none")
      next.joint_goal.erase(slot);
    else
      next.joint_goal[slot] = value;
  }
  return next;
}

std::vector<std::string> validate_ontology(const Ontology& o) {
  std::vector<std::string> violations;
  if (o.slots.empty()) violations.push_back("ontology: slot list is empty");
  std::set<std::string> seen_names;
  for (const auto& slot : o.slots) {
    if (slot.name.empty()) violations.push_back("slot: empty name");
    if (!seen_names.insert(slot.name).second)
      violations.push_back("slot '" + slot.name + "': duplicate slot name");
    std::set<std::string> canon;
    for (const auto& v : slot.values) {
      if (!canon.insert(canonicalize(v)).second)
        violations.push_back("slot '" + slot.name + "': duplicate value '" + v + "'");
      if (slot.is_special(canonicalize(v)))
        violations.push_back("slot '" + slot.name + "': value '" + v +
                             "' collides with a special");
    }
    if (slot.kind == SlotKind::Single) {
      if (slot.specials != std::vector<std::string>{"none", "dontcare"})
        violations.push_back("slot '" + slot.name +
                             "': single-kind specials must be [none, dontcare]");
    } else {
      if (slot.specials != std::vector<std::string>{"none"})
        violations.push_back("slot '" + slot.name + "': multi-kind specials must be [none]");
    }
  }
  return violations;
}

}  // namespace cedst
