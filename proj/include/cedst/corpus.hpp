#pragma once

#include "cedst/data_model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cedst {

enum class Provenance { WozJson, BabiTask5, Synthetic, Masked };

struct MaskedInfo {
  Provenance parent = Provenance::WozJson;
  double ratio = 0.0;
  std::uint64_t seed = 0;
};

struct Corpus {
  Ontology ontology;
  std::map<std::string, std::vector<Dialogue>> splits;  // train/dev/test
  Provenance provenance = Provenance::WozJson;
  std::optional<MaskedInfo> masked;

  const std::vector<Dialogue>& split(const std::string& name) const;
  // A label value is unknown when it is neither a candidate value nor a
  // special of its slot.
  bool is_unknown_value(const std::string& slot, const std::string& value) const;
};

struct MaskReport {
  std::map<std::string, std::set<std::string>> masked_values;
  double requested_ratio = 0.0;
  double achieved_ratio = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> skipped_slots;  // fewer than 2 values
};

struct SynthConfig {
  int n_train = 100;
  int n_dev = 20;
  int n_test = 20;
  int vocab_size = 300;
  int values_per_slot = 8;
  double oov_test_fraction = 0.0;
  // When set, oov_test_fraction applies to this slot only.
  std::optional<std::string> oov_slot;
  double paraphrase_noise = 0.2;
  std::uint64_t seed = 1;
};

struct SynthResult {
  Corpus corpus;
  // Values that occur only in dev/test and are absent from the ontology.
  std::map<std::string, std::set<std::string>> oov_values;
};

// Corpus JSON, the schema written by save_corpus_json.
Corpus load_woz(const std::filesystem::path& path);
void save_corpus_json(const Corpus& c, const std::filesystem::path& path);
std::string corpus_to_json(const Corpus& c);

// bAbI dialog task 5 text files; api_call arguments become the state.
// Dev/test paths are optional extra splits (e.g. the OOV test file).
Corpus load_babi_task5(const std::filesystem::path& train,
                       const std::optional<std::filesystem::path>& dev = {},
                       const std::optional<std::filesystem::path>& test = {});

std::pair<Corpus, MaskReport> mask_unknown_values(const Corpus& c, double ratio,
                                                  std::uint64_t seed);
std::string mask_report_to_json(const MaskReport& r);

SynthResult generate_synthetic(const SynthConfig& cfg);

}  // namespace cedst
