#include "cedst/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace cedst {

using json = nlohmann::ordered_json;

const std::vector<Dialogue>& Corpus::split(const std::string& name) const {
  static const std::vector<Dialogue> empty;
  auto it = splits.find(name);
  return it == splits.end() ? empty : it->second;
}

bool Corpus::is_unknown_value(const std::string& slot, const std::string& value) const {
  const SlotSpec* spec = ontology.find(slot);
  if (!spec) return true;
  return !spec->has_value(value) && !spec->is_special(value);
}

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

SlotSpec slot_from_json(const json& j) {
  SlotSpec s;
  s.name = j.at("name").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "single")
    s.kind = SlotKind::Single;
  else if (kind == "multi")
    s.kind = SlotKind::Multi;
  else
    throw ParseError("slot '" + s.name + "': unknown kind '" + kind + "'");
  for (const auto& v : j.at("values")) s.values.push_back(canonicalize(v.get<std::string>()));
  for (const auto& v : j.at("specials")) s.specials.push_back(canonicalize(v.get<std::string>()));
  return s;
}

Turn turn_from_json(const json& j, const Ontology& ontology, const std::string& dialogue_id) {
  Turn t;
  for (const auto& ja : j.value("system_actions", json::array())) {
    SystemAction a;
    a.act = canonicalize(ja.at("act").get<std::string>());
    if (ja.contains("slot") && !ja["slot"].is_null())
      a.slot = canonicalize(ja["slot"].get<std::string>());
    if (ja.contains("value") && !ja["value"].is_null()) {
      if (!a.slot)
        throw ParseError("dialogue '" + dialogue_id + "': action value without slot");
      a.value = canonicalize(ja["value"].get<std::string>());
    }
    t.system_actions.push_back(std::move(a));
  }
  t.user_utterance = tokenize(j.at("user_utterance").get<std::string>());
  if (t.user_utterance.empty())
    throw ParseError("dialogue '" + dialogue_id + "': empty user utterance");
  const json turn_goal = j.value("turn_goal", json::object());
  for (const auto& [slot, value] : turn_goal.items()) {
    const std::string name = canonicalize(slot);
    const SlotSpec* spec = ontology.find(name);
    if (!spec || spec->kind != SlotKind::Single)
      throw SchemaError("dialogue '" + dialogue_id + "': unknown single slot '" + name +
                        "' in turn goal");
    t.gold.turn_goal[name] = canonicalize(value.get<std::string>());
  }
  for (const auto& r : j.value("requests", json::array()))
    t.gold.requests.insert(canonicalize(r.get<std::string>()));
  return t;
}

json turn_to_json(const Turn& t) {
  json j;
  j["system_actions"] = json::array();
  for (const auto& a : t.system_actions) {
    json ja;
    ja["act"] = a.act;
    if (a.slot) ja["slot"] = *a.slot;
    if (a.value) ja["value"] = *a.value;
    j["system_actions"].push_back(std::move(ja));
  }
  j["user_utterance"] = join(t.user_utterance);
  j["turn_goal"] = json::object();
  for (const auto& [slot, value] : t.gold.turn_goal) j["turn_goal"][slot] = value;
  j["requests"] = json::array();
  for (const auto& r : t.gold.requests) j["requests"].push_back(r);
  return j;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

Corpus load_woz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("parse error in " + path.string() + ": " + e.what());
  }
  Corpus c;
  c.provenance = Provenance::WozJson;
  try {
    for (const auto& js : j.at("ontology").at("slots"))
      c.ontology.slots.push_back(slot_from_json(js));
    auto violations = validate_ontology(c.ontology);
    if (!violations.empty())
      throw SchemaError(path.string() + ": invalid ontology: " + violations.front());
    for (const auto& [split_name, jd] : j.at("splits").items()) {
      std::vector<Dialogue> dialogues;
      for (const auto& jdia : jd) {
        Dialogue d;
        d.id = jdia.at("id").get<std::string>();
        for (const auto& jt : jdia.at("turns"))
          d.turns.push_back(turn_from_json(jt, c.ontology, d.id));
        if (d.turns.empty()) throw ParseError("dialogue '" + d.id + "': no turns");
        dialogues.push_back(std::move(d));
      }
      c.splits[split_name] = std::move(dialogues);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("schema error in " + path.string() + ": " + e.what());
  }
  if (c.split("train").empty()) throw ParseError(path.string() + ": train split empty");
  if (c.split("test").empty()) throw ParseError(path.string() + ": test split empty");
  return c;
}

std::string corpus_to_json(const Corpus& c) {
  json j;
  j["ontology"]["slots"] = json::array();
  for (const auto& s : c.ontology.slots) {
    json js;
    js["name"] = s.name;
    js["kind"] = s.kind == SlotKind::Single ? "single" : "multi";
    js["values"] = s.values;
    js["specials"] = s.specials;
    j["ontology"]["slots"].push_back(std::move(js));
  }
  j["splits"] = json::object();
  for (const auto& [split_name, dialogues] : c.splits) {
    json jd = json::array();
    for (const auto& d : dialogues) {
      json jdia;
      jdia["id"] = d.id;
      jdia["turns"] = json::array();
      for (const auto& t : d.turns) jdia["turns"].push_back(turn_to_json(t));
      jd.push_back(std::move(jdia));
    }
    j["splits"][split_name] = std::move(jd);
  }
  return j.dump(2) + "\n";
}

void save_corpus_json(const Corpus& c, const std::filesystem::path& path) {
  atomic_write(path, corpus_to_json(c));
}

namespace {

// Positional slot names for bAbI task-5 api_call arguments.
const std::vector<std::string> kBabiSlots = {"food", "location", "number", "price"};

std::vector<Dialogue> load_babi_file(const std::filesystem::path& path,
                                     const std::string& id_prefix) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Dialogue> dialogues;
  std::vector<std::pair<std::string, std::string>> lines;  // (user, system)
  int expected = 1;
  int line_no = 0;
  int n_skipped = 0;

  auto flush = [&] {
    if (lines.empty()) return;
    Dialogue d;
    d.id = id_prefix + "-" + std::to_string(dialogues.size() + n_skipped + 1);
    bool has_api_call = false;
    for (const auto& [user, system] : lines) {
      Turn t;
      t.user_utterance = tokenize(user);
      if (t.user_utterance.empty()) t.user_utterance.push_back("<silence>");
      // Split on whitespace only: tokenize() would break "api_call" apart.
      std::istringstream sys(system);
      std::vector<std::string> sys_tokens;
      std::string st;
      while (sys >> st) sys_tokens.push_back(canonicalize(st));
      if (!sys_tokens.empty() && sys_tokens[0] == "api_call") {
        has_api_call = true;
        for (size_t i = 1; i < sys_tokens.size() && i <= kBabiSlots.size(); ++i)
          t.gold.turn_goal[kBabiSlots[i - 1]] = sys_tokens[i];
      }
      d.turns.push_back(std::move(t));
    }
    // Attach each system response as the next turn's system action.
    for (size_t i = 1; i < d.turns.size(); ++i) {
      SystemAction a;
      a.act = lines[i - 1].second;
      if (!a.tokens().empty()) d.turns[i].system_actions.push_back(std::move(a));
    }
    if (has_api_call) {
      dialogues.push_back(std::move(d));
    } else {
      ++n_skipped;
      std::cerr << "warning: " << d.id << " has no api_call, skipped\n";
    }
    lines.clear();
  };

  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.empty()) {
      flush();
      expected = 1;
      continue;
    }
    std::istringstream iss(raw);
    int n;
    if (!(iss >> n))
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": missing line number");
    if (n == 1 && expected != 1) {
      flush();
      expected = 1;
    }
    if (n != expected)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": line number out of sequence");
    ++expected;
    std::string rest;
    std::getline(iss, rest);
    if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
    const auto tab = rest.find('\t');
    if (tab == std::string::npos) continue;  // knowledge-base fact line
    lines.emplace_back(rest.substr(0, tab), rest.substr(tab + 1));
  }
  flush();
  return dialogues;
}

}  // namespace

Corpus load_babi_task5(const std::filesystem::path& train,
                       const std::optional<std::filesystem::path>& dev,
                       const std::optional<std::filesystem::path>& test) {
  Corpus c;
  c.provenance = Provenance::BabiTask5;
  c.splits["train"] = load_babi_file(train, "babi-train");
  if (dev) c.splits["dev"] = load_babi_file(*dev, "babi-dev");
  if (test) c.splits["test"] = load_babi_file(*test, "babi-test");
  if (c.splits["train"].empty()) throw ParseError(train.string() + ": train split empty");

  // Ontology values come from the train split only; dev/test values that
  // never occur in train stay unknown.
  std::map<std::string, std::vector<std::string>> values;
  for (const auto& d : c.splits["train"])
    for (const auto& t : d.turns)
      for (const auto& [slot, value] : t.gold.turn_goal) {
        auto& vs = values[slot];
        if (std::find(vs.begin(), vs.end(), value) == vs.end()) vs.push_back(value);
      }
  for (const auto& name : kBabiSlots) {
    if (!values.count(name)) continue;
    SlotSpec s;
    s.name = name;
    s.kind = SlotKind::Single;
    s.values = values[name];
    std::sort(s.values.begin(), s.values.end());
    s.specials = {"none", "dontcare"};
    c.ontology.slots.push_back(std::move(s));
  }
  return c;
}

std::pair<Corpus, MaskReport> mask_unknown_values(const Corpus& c, double ratio,
                                                  std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("mask ratio must be in (0,1)");
  if (c.masked) throw std::invalid_argument("corpus is already masked");

  Corpus out = c;
  out.masked = MaskedInfo{c.provenance, ratio, seed};
  out.provenance = Provenance::Masked;
  MaskReport report;
  report.requested_ratio = ratio;
  report.seed = seed;

  std::mt19937_64 rng(seed);
  std::size_t total_values = 0;
  std::size_t total_masked = 0;
  for (auto& slot : out.ontology.slots) {
    if (slot.kind != SlotKind::Single) continue;
    if (slot.values.size() < 2) {
      report.skipped_slots.push_back(slot.name);
      continue;
    }
    total_values += slot.values.size();
    const std::size_t k =
        static_cast<std::size_t>(std::floor(ratio * static_cast<double>(slot.values.size())));
    std::vector<std::size_t> idx(slot.values.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng() % (idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    std::set<std::size_t> chosen(idx.begin(), idx.begin() + k);
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < slot.values.size(); ++i) {
      if (chosen.count(i))
        report.masked_values[slot.name].insert(slot.values[i]);
      else
        kept.push_back(slot.values[i]);
    }
    slot.values = std::move(kept);
    total_masked += k;
  }
  report.achieved_ratio =
      total_values == 0 ? 0.0
                        : static_cast<double>(total_masked) / static_cast<double>(total_values);

  // Masked annotations disappear from the train split only.
  auto train_it = out.splits.find("train");
  if (train_it != out.splits.end()) {
    for (auto& d : train_it->second)
      for (auto& t : d.turns) {
        for (auto it = t.gold.turn_goal.begin(); it != t.gold.turn_goal.end();) {
          auto mv = report.masked_values.find(it->first);
          if (mv != report.masked_values.end() && mv->second.count(it->second))
            it = t.gold.turn_goal.erase(it);
          else
            ++it;
        }
      }
  }
  return {std::move(out), std::move(report)};
}

std::string mask_report_to_json(const MaskReport& r) {
  json j;
  j["requested_ratio"] = r.requested_ratio;
  j["achieved_ratio"] = r.achieved_ratio;
  j["seed"] = r.seed;
  j["masked_values"] = json::object();
  for (const auto& [slot, values] : r.masked_values)
    j["masked_values"][slot] = std::vector<std::string>(values.begin(), values.end());
  j["skipped_slots"] = r.skipped_slots;
  return j.dump(2) + "\n";
}

namespace {

const std::vector<std::string> kSyllables = {
    "ba", "de", "ki", "lo", "mu", "na", "pe", "ri", "su", "ta", "ve", "zo",
    "fa", "ge", "hi", "jo", "ku", "la", "me", "ni", "po", "ru", "se", "ti"};

std::string synth_word(int slot, int index) {
  const int n = static_cast<int>(kSyllables.size());
  std::string w = kSyllables[(slot * 7 + 5) % n] + kSyllables[index % n];
  if (index >= n) w += kSyllables[(index / n + slot) % n];
  return w;
}

struct SynthSlot {
  std::string name;
  std::string suffix;  // second token for multi-word values, empty = none
  std::vector<std::string> known;
  std::vector<std::string> oov;
};

}  // namespace

SynthResult generate_synthetic(const SynthConfig& cfg) {
  if (cfg.n_train < 1 || cfg.n_dev < 1 || cfg.n_test < 1 || cfg.values_per_slot < 1)
    throw std::invalid_argument("synth: all counts must be >= 1");
  if (cfg.oov_test_fraction < 0 || cfg.oov_test_fraction > 1 || cfg.paraphrase_noise < 0 ||
      cfg.paraphrase_noise > 1)
    throw std::invalid_argument("synth: fractions must be in [0,1]");

  std::vector<SynthSlot> slots = {{"food", "house", {}, {}},
                                  {"area", "side", {}, {}},
                                  {"price", "", {}, {}}};
  const std::vector<std::string> requestables = {"address", "phone", "postcode"};

  for (int s = 0; s < static_cast<int>(slots.size()); ++s) {
    const bool oov_applies =
        cfg.oov_test_fraction > 0 && (!cfg.oov_slot || *cfg.oov_slot == slots[s].name);
    for (int i = 0; i < cfg.values_per_slot; ++i) {
      std::string v = synth_word(s, i);
      if (!slots[s].suffix.empty() && i % 4 == 3) v += " " + slots[s].suffix;
      slots[s].known.push_back(v);
    }
    if (oov_applies) {
      const int n_oov = std::max(
          1, static_cast<int>(std::lround(cfg.oov_test_fraction * cfg.values_per_slot)));
      for (int i = 0; i < n_oov; ++i) {
        std::string v = synth_word(s, cfg.values_per_slot + i);
        if (!slots[s].suffix.empty() && i % 3 == 1) v += " " + slots[s].suffix;
        slots[s].oov.push_back(v);
      }
    }
  }

  SynthResult result;
  Corpus& c = result.corpus;
  c.provenance = Provenance::Synthetic;
  for (const auto& s : slots) {
    SlotSpec spec;
    spec.name = s.name;
    spec.kind = SlotKind::Single;
    spec.values = s.known;
    spec.specials = {"none", "dontcare"};
    c.ontology.slots.push_back(std::move(spec));
    if (!s.oov.empty())
      result.oov_values[s.name] = std::set<std::string>(s.oov.begin(), s.oov.end());
  }
  SlotSpec req;
  req.name = "request";
  req.kind = SlotKind::Multi;
  req.values = requestables;
  req.specials = {"none"};
  c.ontology.slots.push_back(std::move(req));

  std::mt19937_64 rng(cfg.seed);
  auto chance = [&](double p) { return (rng() % 10000) < static_cast<std::uint64_t>(p * 10000); };
  auto pick = [&](std::size_t n) { return static_cast<int>(rng() % n); };

  auto inform_phrase = [&](int s, const std::string& value, bool alt) {
    switch (s) {
      case 0:
        return alt ? "looking for some " + value + " food please"
                   : "i want to eat " + value + " food";
      case 1:
        return alt ? "somewhere around the " + value + " area"
                   : "in the " + value + " part of town";
      default:
        return alt ? "priced " + value + " if possible" : "with " + value + " pricing";
    }
  };
  auto dontcare_phrase = [&](int s) {
    switch (s) {
      case 0:
        return std::string("any kind of food is fine");
      case 1:
        return std::string("any area is fine");
      default:
        return std::string("price does not matter");
    }
  };
  auto request_phrase = [&](const std::string& r, bool alt) {
    if (r == "phone") return alt ? std::string("give me the phone number")
                                 : std::string("what is the phone number");
    return (alt ? "can i have the " : "what is the ") + r;
  };

  auto make_split = [&](const std::string& split_name, int count, bool is_train) {
    std::vector<Dialogue> dialogues;
    for (int di = 0; di < count; ++di) {
      Dialogue d;
      d.id = "synth-" + split_name + "-" + std::to_string(di + 1);
      const int n_turns = 1 + pick(3);
      std::set<int> informed;
      for (int ti = 0; ti < n_turns; ++ti) {
        Turn t;
        std::vector<int> inform_now;
        if (ti == 0) {
          inform_now.push_back(pick(slots.size()));
          if (chance(0.5)) {
            int other = pick(slots.size());
            if (other != inform_now[0]) inform_now.push_back(other);
          }
        } else if (chance(0.3) && !informed.empty()) {
          auto it = informed.begin();
          std::advance(it, pick(informed.size()));
          inform_now.push_back(*it);
        } else {
          std::vector<int> fresh;
          for (int s = 0; s < static_cast<int>(slots.size()); ++s)
            if (!informed.count(s)) fresh.push_back(s);
          if (!fresh.empty()) inform_now.push_back(fresh[pick(fresh.size())]);
        }
        std::sort(inform_now.begin(), inform_now.end());
        inform_now.erase(std::unique(inform_now.begin(), inform_now.end()), inform_now.end());

        if (ti > 0 && !inform_now.empty() && chance(0.6)) {
          SystemAction a;
          a.act = "request";
          a.slot = slots[inform_now[0]].name;
          t.system_actions.push_back(std::move(a));
        }

        std::vector<std::string> phrases;
        if (chance(cfg.paraphrase_noise)) phrases.push_back("hello there");
        for (int s : inform_now) {
          informed.insert(s);
          if (chance(0.08)) {
            t.gold.turn_goal[slots[s].name] = "dontcare";
            phrases.push_back(dontcare_phrase(s));
          } else {
            const bool use_oov = !is_train && !slots[s].oov.empty() &&
                                 chance(cfg.oov_test_fraction);
            const auto& pool = use_oov ? slots[s].oov : slots[s].known;
            const std::string value = pool[pick(pool.size())];
            t.gold.turn_goal[slots[s].name] = value;
            phrases.push_back(inform_phrase(s, value, chance(cfg.paraphrase_noise)));
          }
        }
        const bool request_turn = (ti == n_turns - 1) ? chance(0.5) : chance(0.15);
        if (request_turn) {
          int n_req = 1 + pick(2);
          for (int ri = 0; ri < n_req; ++ri) {
            const std::string& r = requestables[pick(requestables.size())];
            if (t.gold.requests.insert(r).second)
              phrases.push_back(request_phrase(r, chance(cfg.paraphrase_noise)));
          }
        }
        if (phrases.empty()) phrases.push_back("thank you");
        std::string raw;
        for (const auto& p : phrases) {
          if (!raw.empty()) raw += " ";
          raw += p;
        }
        t.user_utterance = tokenize(raw);
        d.turns.push_back(std::move(t));
      }
      dialogues.push_back(std::move(d));
    }
    c.splits[split_name] = std::move(dialogues);
  };

  make_split("train", cfg.n_train, true);
  make_split("dev", cfg.n_dev, false);
  make_split("test", cfg.n_test, false);

  std::set<std::string> vocab;
  for (const auto& [name, dialogues] : c.splits)
    for (const auto& d : dialogues)
      for (const auto& t : d.turns) {
        vocab.insert(t.user_utterance.begin(), t.user_utterance.end());
        for (const auto& a : t.system_actions) {
          auto toks = a.tokens();
          vocab.insert(toks.begin(), toks.end());
        }
      }
  if (static_cast<int>(vocab.size()) > cfg.vocab_size)
    throw std::invalid_argument("synth: vocab_size " + std::to_string(cfg.vocab_size) +
                                " too small to host " + std::to_string(vocab.size()) +
                                " tokens");
  return result;
}

}  // namespace cedst
