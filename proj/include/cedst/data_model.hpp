#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cedst {

// Raised when data references a slot or value the ontology does not define.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SlotKind { Single, Multi };

struct SlotSpec {
  std::string name;
  SlotKind kind = SlotKind::Single;
  std::vector<std::string> values;    // canonical candidate values
  std::vector<std::string> specials;  // "none" (+ "dontcare" for single)

  bool has_value(const std::string& v) const;
  bool is_special(const std::string& v) const;
  bool operator==(const SlotSpec&) const = default;
};

struct Ontology {
  std::vector<SlotSpec> slots;

  int slot_index(const std::string& name) const;  // -1 if absent
  const SlotSpec* find(const std::string& name) const;
};

struct SystemAction {
  std::string act;
  std::optional<std::string> slot;
  std::optional<std::string> value;

  // Serialized as "act [slot] [value]" tokens.
  std::vector<std::string> tokens() const;
  bool operator==(const SystemAction&) const = default;
};

struct TurnLabel {
  std::map<std::string, std::string> turn_goal;  // single-kind slots only
  std::set<std::string> requests;
  bool operator==(const TurnLabel&) const = default;
};

struct Turn {
  std::vector<SystemAction> system_actions;
  std::vector<std::string> user_utterance;  // canonical tokens, non-empty
  TurnLabel gold;
  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
  bool operator==(const Dialogue&) const = default;
};

// Accumulated joint goal; "none" entries are represented by absence.
struct DialogueState {
  std::map<std::string, std::string> joint_goal;

  bool operator==(const DialogueState&) const = default;
};

// Lowercase, trim, collapse internal whitespace.
std::string canonicalize(std::string_view s);

// Exact match under canonicalization. Rephrasings are distinct surfaces.
bool canonical_match(const std::string& predicted, const std::string& gold);

// Lowercase, detach punctuation, split on whitespace.
std::vector<std::string> tokenize(std::string_view raw);

// Carry-over/replacement rule: slots absent from turn_goal keep their
// previous value; present slots are replaced; an explicit "none" retracts.
DialogueState accumulate_joint_goal(const DialogueState& prev,
                                    const std::map<std::string, std::string>& turn_goal,
                                    const Ontology& ontology);

// Returns one human-readable violation per broken invariant; empty == valid.
std::vector<std::string> validate_ontology(const Ontology& o);

}  // namespace cedst
