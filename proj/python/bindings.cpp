#include "cedst/corpus.hpp"
#include "cedst/evaluation.hpp"
#include "cedst/training.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

namespace py = pybind11;
using namespace cedst;

namespace {

// Owns everything the model points at, so python can move it around freely.
struct Model {
  std::unique_ptr<Vocabulary> vocab;
  std::unique_ptr<EmbeddingTable> table;
  std::unique_ptr<CedstModel> model;
  TrainConfig cfg;
};

std::shared_ptr<Model> make_model(const Corpus& corpus, const TrainConfig& cfg) {
  auto m = std::make_shared<Model>();
  m->cfg = cfg;
  m->vocab = std::make_unique<Vocabulary>(Vocabulary::build(corpus));
  if (!cfg.embeddings_path.empty())
    m->table = std::make_unique<EmbeddingTable>(EmbeddingTable::load_pretrained(
        cfg.embeddings_path, *m->vocab, cfg.ngram_dim, cfg.embedding_seed));
  else
    m->table = std::make_unique<EmbeddingTable>(
        EmbeddingTable::seeded_random(*m->vocab, cfg.d_emb, cfg.embedding_seed));
  m->cfg.d_emb = m->table->dim;
  m->model = std::make_unique<CedstModel>(corpus.ontology, m->vocab.get(), m->table.get(),
                                          m->cfg.model_config(m->table->dim));
  return m;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["joint_goal_acc"] = m.joint_goal_acc;
  d["turn_request_acc"] = m.turn_request_acc;
  d["turn_goal_acc"] = m.turn_goal_acc;
  d["turns"] = m.turns;
  d["per_slot"] = m.per_slot;
  py::dict unknown;
  for (const auto& [slot, acc] : m.per_slot_unknown)
    if (acc >= 0) unknown[py::str(slot)] = acc;
  d["per_slot_unknown"] = unknown;
  d["unk_all"] = m.unk.unk_all;
  d["unk_correct"] = m.unk.unk_correct;
  d["unk_precision"] = m.unk.precision();
  return d;
}

}  // namespace

PYBIND11_MODULE(_cedst, mod) {
  mod.doc() = "copy-enhanced dialogue state tracker";

  py::register_exception<ParseError>(mod, "ParseError");
  py::register_exception<SchemaError>(mod, "SchemaError");

  py::class_<AblationFlags>(mod, "AblationFlags")
      .def(py::init<>())
      .def_readwrite("multi_encoder", &AblationFlags::multi_encoder)
      .def_readwrite("multi_decoder", &AblationFlags::multi_decoder)
      .def_readwrite("copy", &AblationFlags::copy)
      .def_readwrite("self_attention", &AblationFlags::self_attention)
      .def_readwrite("shared_lstm", &AblationFlags::shared_lstm);

  py::class_<TrainConfig>(mod, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("d_emb", &TrainConfig::d_emb)
      .def_readwrite("d_rnn", &TrainConfig::d_rnn)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("dropout_keep", &TrainConfig::dropout_keep)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("embedding_seed", &TrainConfig::embedding_seed)
      .def_readwrite("embeddings_path", &TrainConfig::embeddings_path)
      .def_readwrite("tie_encoders", &TrainConfig::tie_encoders)
      .def_readwrite("max_copy_len", &TrainConfig::max_copy_len)
      .def_readwrite("ablations", &TrainConfig::ablations);

  py::class_<SynthConfig>(mod, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_train", &SynthConfig::n_train)
      .def_readwrite("n_dev", &SynthConfig::n_dev)
      .def_readwrite("n_test", &SynthConfig::n_test)
      .def_readwrite("vocab_size", &SynthConfig::vocab_size)
      .def_readwrite("values_per_slot", &SynthConfig::values_per_slot)
      .def_readwrite("oov_test_fraction", &SynthConfig::oov_test_fraction)
      .def_readwrite("oov_slot", &SynthConfig::oov_slot)
      .def_readwrite("paraphrase_noise", &SynthConfig::paraphrase_noise)
      .def_readwrite("seed", &SynthConfig::seed);

  py::class_<Corpus>(mod, "Corpus")
      .def("split_size",
           [](const Corpus& c, const std::string& name) { return c.split(name).size(); })
      .def("slots",
           [](const Corpus& c) {
             std::vector<std::string> names;
             for (const auto& s : c.ontology.slots) names.push_back(s.name);
             return names;
           })
      .def("to_json", &corpus_to_json);

  py::class_<Model, std::shared_ptr<Model>>(mod, "Model");

  mod.def("load_corpus", &load_woz, py::arg("path"));
  mod.def("save_corpus", &save_corpus_json, py::arg("corpus"), py::arg("path"));

  mod.def(
      "generate_synthetic",
      [](const SynthConfig& cfg) {
        SynthResult r = generate_synthetic(cfg);
        return py::make_tuple(std::move(r.corpus), r.oov_values);
      },
      py::arg("config"), "Returns (corpus, {slot: set of held-out values}).");

  mod.def(
      "mask_unknown_values",
      [](const Corpus& c, double ratio, std::uint64_t seed) {
        auto [masked, report] = mask_unknown_values(c, ratio, seed);
        return py::make_tuple(std::move(masked), mask_report_to_json(report));
      },
      py::arg("corpus"), py::arg("ratio"), py::arg("seed") = 1,
      "Returns (masked corpus, mask report JSON string).");

  mod.def(
      "train",
      [](const Corpus& corpus, const TrainConfig& cfg) {
        auto m = make_model(corpus, cfg);
        TrainResult r = train(*m->model, corpus, m->cfg);
        py::list history;
        for (const auto& e : r.history) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["train_loss"] = e.train_loss;
          d["dev_joint_goal"] = e.dev_joint_goal;
          history.append(d);
        }
        return py::make_tuple(m, history);
      },
      py::arg("corpus"), py::arg("config"),
      "Trains a model; returns (model, per-epoch history).");

  mod.def(
      "evaluate",
      [](Model& m, const Corpus& corpus, const std::string& split) {
        return metrics_dict(evaluate(*m.model, corpus, split, m.vocab->hash()));
      },
      py::arg("model"), py::arg("corpus"), py::arg("split") = "test");

  mod.def(
      "save_checkpoint",
      [](const Model& m, const std::filesystem::path& path) {
        save_checkpoint(*m.model, m.cfg, path);
      },
      py::arg("model"), py::arg("path"));

  mod.def(
      "load_checkpoint",
      [](const std::filesystem::path& path, const Corpus& corpus) {
        Checkpoint ckpt = read_checkpoint(path);
        auto m = make_model(corpus, ckpt.config);
        if (m->vocab->hash() != ckpt.vocab_hash)
          throw SchemaError("corpus vocabulary does not match the checkpoint");
        load_checkpoint_into(*m->model, ckpt);
        return m;
      },
      py::arg("path"), py::arg("corpus"),
      "Rebuilds a model from a checkpoint; the corpus must match its vocabulary.");
}
