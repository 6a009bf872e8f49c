#include "cedst/corpus.hpp"
#include "cedst/evaluation.hpp"
#include "cedst/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

using namespace cedst;
using json = nlohmann::ordered_json;

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

// Flag value wins over config file; CEDST_SEED is the last resort.
void apply_env_seed(CLI::Option* seed_opt, std::uint64_t& seed) {
  if (seed_opt->count() > 0) return;
  if (const char* env = std::getenv("CEDST_SEED")) seed = std::strtoull(env, nullptr, 10);
}

struct TrainFlags {
  std::string corpus_path;
  std::string checkpoint_out = "checkpoint.json";
  std::string history_out = "history.json";
  TrainConfig cfg;
  std::string target_policy = "marginalize";
  std::string decoder_init = "c_n";
};

void add_train_config_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--corpus", f.corpus_path, "corpus JSON file")->required();
  cmd->add_option("--checkpoint", f.checkpoint_out, "checkpoint output path");
  cmd->add_option("--history", f.history_out, "epoch metrics history output path");
  cmd->add_option("--d_emb", f.cfg.d_emb);
  cmd->add_option("--d_rnn", f.cfg.d_rnn);
  cmd->add_option("--learning_rate", f.cfg.learning_rate);
  cmd->add_option("--dropout_keep", f.cfg.dropout_keep);
  cmd->add_option("--epochs", f.cfg.epochs);
  cmd->add_option("--batch_size", f.cfg.batch_size);
  cmd->add_option("--embedding_seed", f.cfg.embedding_seed);
  cmd->add_option("--embeddings", f.cfg.embeddings_path, "pretrained word-vector file");
  cmd->add_option("--ngram_dim", f.cfg.ngram_dim);
  cmd->add_option("--target_policy", f.target_policy)
      ->check(CLI::IsMember({"marginalize", "prefer_generate", "prefer_copy"}));
  cmd->add_option("--decoder_init", f.decoder_init)->check(CLI::IsMember({"c_n", "zeros"}));
  cmd->add_option("--max_copy_len", f.cfg.max_copy_len);
  cmd->add_option("--tie_encoders", f.cfg.tie_encoders);
  cmd->add_option("--multi_encoder", f.cfg.ablations.multi_encoder);
  cmd->add_option("--multi_decoder", f.cfg.ablations.multi_decoder);
  cmd->add_option("--copy", f.cfg.ablations.copy);
  cmd->add_option("--self_attention", f.cfg.ablations.self_attention);
  cmd->add_option("--shared_lstm", f.cfg.ablations.shared_lstm);
}

EmbeddingTable make_table(const TrainConfig& cfg, const Vocabulary& vocab) {
  if (!cfg.embeddings_path.empty())
    return EmbeddingTable::load_pretrained(cfg.embeddings_path, vocab, cfg.ngram_dim,
                                           cfg.embedding_seed);
  return EmbeddingTable::seeded_random(vocab, cfg.d_emb, cfg.embedding_seed);
}

int run_train(TrainFlags& f) {
  f.cfg.target_policy = f.target_policy == "marginalize"      ? TargetPolicy::Marginalize
                        : f.target_policy == "prefer_generate" ? TargetPolicy::PreferGenerate
                                                               : TargetPolicy::PreferCopy;
  f.cfg.decoder_init =
      f.decoder_init == "zeros" ? DecoderInit::Zeros : DecoderInit::ActionInteraction;

  Corpus corpus = load_woz(f.corpus_path);
  Vocabulary vocab = Vocabulary::build(corpus);
  EmbeddingTable table = make_table(f.cfg, vocab);
  f.cfg.d_emb = table.dim;
  CedstModel model(corpus.ontology, &vocab, &table, f.cfg.model_config(table.dim));

  TrainResult result = train(model, corpus, f.cfg, &std::cerr);
  save_checkpoint(model, f.cfg, f.checkpoint_out);

  json hist = json::array();
  for (const auto& e : result.history)
    hist.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"dev_joint_goal", e.dev_joint_goal}});
  json j;
  j["best_epoch"] = result.best_epoch;
  j["best_dev_joint_goal"] = result.best_dev_joint_goal;
  j["epochs"] = std::move(hist);
  atomic_write(f.history_out, j.dump(2) + "\n");
  std::cerr << "checkpoint written to " << f.checkpoint_out << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& corpus_path,
             const std::string& split, const std::string& output) {
  Checkpoint ckpt = read_checkpoint(checkpoint_path);
  Corpus corpus = load_woz(corpus_path);
  Vocabulary vocab = Vocabulary::build(corpus);
  if (vocab.hash() != ckpt.vocab_hash) {
    std::cerr << "error: corpus vocabulary does not match the checkpoint "
                 "(hash mismatch); was the checkpoint trained on this corpus?\n";
    return 1;
  }
  EmbeddingTable table = make_table(ckpt.config, vocab);
  CedstModel model(corpus.ontology, &vocab, &table, ckpt.config.model_config(table.dim));
  load_checkpoint_into(model, ckpt);

  Metrics m = evaluate(model, corpus, split, ckpt.vocab_hash);
  const std::string out = metrics_to_json(m);
  std::cout << out;
  if (!output.empty()) atomic_write(output, out);
  return 0;
}

int run_mask(const std::string& corpus_path, double ratio, std::uint64_t seed,
             const std::string& output) {
  Corpus corpus = load_woz(corpus_path);
  auto [masked, report] = mask_unknown_values(corpus, ratio, seed);
  save_corpus_json(masked, output);
  atomic_write(output + ".mask.json", mask_report_to_json(report));
  std::cerr << "masked corpus written to " << output << "\n";
  return 0;
}

int run_synth(const SynthConfig& cfg, const std::string& output) {
  SynthResult result = generate_synthetic(cfg);
  save_corpus_json(result.corpus, output);
  json j = json::object();
  for (const auto& [slot, values] : result.oov_values)
    j[slot] = std::vector<std::string>(values.begin(), values.end());
  atomic_write(output + ".oov.json", j.dump(2) + "\n");
  std::cerr << "synthetic corpus written to " << output << "\n";
  return 0;
}

int run_inspect(const std::string& checkpoint_path) {
  Checkpoint ckpt = read_checkpoint(checkpoint_path);
  std::cout << "config:\n" << train_config_to_json(ckpt.config);
  std::cout << "vocab_hash: " << ckpt.vocab_hash << "\n";
  std::cout << "tensors:\n";
  for (const auto& [name, m] : ckpt.tensors) {
    std::cout << "  " << name << "  " << m.rows() << "x" << m.cols();
    if (name.find(".gate") != std::string::npos)
      std::cout << "  gate=" << 1.0 / (1.0 + std::exp(-m(0, 0)));
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CEDST dialogue state tracker"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value config file; flags override");

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  add_train_config_flags(train_cmd, train_flags);
  auto* train_seed = train_cmd->add_option("--seed", train_flags.cfg.seed);

  std::string eval_checkpoint, eval_corpus, eval_split = "test", eval_output;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus split");
  eval_cmd->add_option("--checkpoint", eval_checkpoint)->required();
  eval_cmd->add_option("--corpus", eval_corpus)->required();
  eval_cmd->add_option("--split", eval_split);
  eval_cmd->add_option("--output", eval_output, "metrics JSON output path");

  std::string mask_corpus, mask_output = "masked.json";
  double mask_ratio = 0.2;
  std::uint64_t mask_seed = 1;
  auto* mask_cmd = app.add_subcommand("mask", "construct an unknown-value dataset");
  mask_cmd->add_option("--corpus", mask_corpus)->required();
  mask_cmd->add_option("--ratio", mask_ratio, "mask ratio, e.g. 0.2|0.4|0.6");
  auto* mask_seed_opt = mask_cmd->add_option("--seed", mask_seed);
  mask_cmd->add_option("--output", mask_output);

  SynthConfig synth_cfg;
  std::string synth_output = "synthetic.json", synth_oov_slot;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
  synth_cmd->add_option("--n_train", synth_cfg.n_train);
  synth_cmd->add_option("--n_dev", synth_cfg.n_dev);
  synth_cmd->add_option("--n_test", synth_cfg.n_test);
  synth_cmd->add_option("--vocab_size", synth_cfg.vocab_size);
  synth_cmd->add_option("--values_per_slot", synth_cfg.values_per_slot);
  synth_cmd->add_option("--oov_test_fraction", synth_cfg.oov_test_fraction);
  synth_cmd->add_option("--oov_slot", synth_oov_slot);
  synth_cmd->add_option("--paraphrase_noise", synth_cfg.paraphrase_noise);
  auto* synth_seed_opt = synth_cmd->add_option("--seed", synth_cfg.seed);
  synth_cmd->add_option("--output", synth_output);

  std::string inspect_checkpoint;
  auto* inspect_cmd = app.add_subcommand("inspect", "print checkpoint config and shapes");
  inspect_cmd->add_option("--checkpoint", inspect_checkpoint)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // prints usage; non-zero on error
  }

  try {
    if (*train_cmd) {
      apply_env_seed(train_seed, train_flags.cfg.seed);
      return run_train(train_flags);
    }
    if (*eval_cmd) return run_eval(eval_checkpoint, eval_corpus, eval_split, eval_output);
    if (*mask_cmd) {
      apply_env_seed(mask_seed_opt, mask_seed);
      return run_mask(mask_corpus, mask_ratio, mask_seed, mask_output);
    }
    if (*synth_cmd) {
      apply_env_seed(synth_seed_opt, synth_cfg.seed);
      if (!synth_oov_slot.empty()) synth_cfg.oov_slot = synth_oov_slot;
      return run_synth(synth_cfg, synth_output);
    }
    if (*inspect_cmd) return run_inspect(inspect_checkpoint);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
