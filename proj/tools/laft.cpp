#include "laft/checkpoint.hpp"
#include "laft/config.hpp"
#include "laft/corpus.hpp"
#include "laft/datagen.hpp"
#include "laft/experiments.hpp"
#include "laft/frontend.hpp"
#include "laft/model.hpp"
#include "laft/training.hpp"
#include "laft/word2vec.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace laft;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_file;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<Index> window;
  bool no_window = false;
  std::optional<Index> beam;
  std::optional<Index> max_len;
  std::string out;
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Preset, then the config file, then flags; `base` replaces the preset when
/// a checkpoint supplies one.
RunConfig effective_config(const Common& c, std::optional<RunConfig> base = std::nullopt) {
  json overlay = c.config_file.empty() ? json::object() : read_json_file(c.config_file);
  RunConfig cfg;
  if (base) {
    cfg = *base;
    if (!c.preset.empty()) throw UsageError("--preset cannot be combined with a checkpoint");
  } else {
    std::string preset = c.preset;
    if (preset.empty()) preset = overlay.value("preset", std::string("desk"));
    cfg = preset_config(preset);
  }
  overlay.erase("preset");
  cfg = apply_json(cfg, overlay);
  if (c.seed) cfg.seed = *c.seed;
  if (c.epochs) cfg.train.epochs = *c.epochs;
  if (c.window) cfg.model.decoder.window = *c.window;
  if (c.no_window) cfg.model.decoder.window_enabled = false;
  if (c.beam) cfg.decode.beam = *c.beam;
  if (c.max_len) cfg.decode.max_len = *c.max_len;
  cfg.train.validate();
  return cfg;
}

void add_common(CLI::App* sub, Common& c, bool training) {
  sub->add_option("--config", c.config_file, "JSON config overlay")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Random seed");
  if (training) {
    sub->add_option("--preset", c.preset, "Hyperparameter preset")->check(CLI::IsMember({"paper", "desk"}));
    sub->add_option("--epochs", c.epochs, "Training epochs");
    sub->add_option("--window-size", c.window, "Local region size s");
    sub->add_flag("--no-window", c.no_window, "Disable the local window (global variant)");
  }
}

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  fs::create_directories(out);
  return out;
}

void echo_config(const fs::path& dir, const RunConfig& cfg, const json& invocation) {
  write_json_file(dir / "config.json", to_json(cfg));
  write_json_file(dir / "invocation.json", invocation);
}

json nan_to_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json metric_json(const MetricReport& r) {
  return {{"bleu1", r.bleu[0]}, {"bleu2", r.bleu[1]}, {"bleu3", r.bleu[2]},
          {"bleu4", r.bleu[3]}, {"rouge_l", r.rouge_l}, {"cider_d", nan_to_null(r.cider_d)}};
}

/// Matches the model's input path to what the corpus carries.
void adopt_corpus_kind(RunConfig& cfg, const Corpus& corpus) {
  cfg.model.input = corpus.kind;
  if (corpus.kind == FeatureKind::embedded && !corpus.clips.empty() &&
      corpus.clips.front().features.cols() != cfg.model.decoder.dim)
    throw ConfigError("corpus features have width " + std::to_string(corpus.clips.front().features.cols()) +
                      " but the decoder dimension is " + std::to_string(cfg.model.decoder.dim));
  if (corpus.kind == FeatureKind::logmel && !corpus.clips.empty())
    cfg.model.encoder.n_mels = corpus.clips.front().features.cols();
}

std::function<void(const EpochMetrics&)> metrics_writer(std::ofstream& log) {
  return [&log](const EpochMetrics& e) {
    log << json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"eval_loss", e.eval_loss}}.dump() << '\n';
    log.flush();
    std::cerr << "epoch " << e.epoch << "  train_loss " << e.train_loss << "  eval_loss " << e.eval_loss << '\n';
  };
}

void load_embedding_dir(CaptionModel& model, const fs::path& dir) {
  const Vocab source = Vocab::load(dir / "vocab.txt");
  const RowMatrix table = read_features(dir / "embeddings.afm").cast<double>();
  const Index copied = model.load_embeddings(source, table);
  std::cerr << "loaded " << copied << " pretrained embedding rows\n";
}

// ------------------------------------------------------------------ commands

int cmd_synth(const Common& c, const std::string& spec_file, const std::string& pair, bool wav) {
  CorpusSpec spec;
  if (!spec_file.empty()) {
    spec = corpus_spec_from_json(read_json_file(spec_file));
  } else {
    const auto [a, b] = standard_pairs(c.seed.value_or(0));
    if (pair == "A") spec = a;
    else if (pair == "B") spec = b;
    else throw UsageError("give --spec or --pair A|B");
  }
  if (c.seed && !spec_file.empty()) spec.seed = *c.seed;
  const fs::path out = prepare_out_dir(c.out);
  Corpus corpus = generate_corpus(spec);
  if (wav) {
    constexpr int kRate = 16000;
    LogMelConfig lm;
    lm.n_mels = spec.bands;
    lm.win = 1024;
    lm.hop = 512;
    fs::create_directories(out / "wav");
    for (Clip& clip : corpus.clips) {
      const auto samples = render_tones(clip, spec, kRate, lm.win, lm.hop);
      write_wav(out / "wav" / (clip.id + ".wav"), samples, kRate);
      const WavData back = read_wav(out / "wav" / (clip.id + ".wav"));
      clip.features = logmel(back.samples, back.sample_rate, lm).frames.cast<float>().cast<double>();
    }
  }
  save_corpus(out, corpus);
  json j = to_json(spec);
  write_json_file(out / "spec.json", j);
  std::cout << json{{"corpus", out.string()},
                    {"clips", corpus.clips.size()},
                    {"checksum", std::to_string(corpus_checksum(corpus))}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_embeddings(const Common& c, const std::vector<std::string>& corpora) {
  RunConfig cfg = effective_config(c);
  if (corpora.empty()) throw UsageError("--corpus is required");
  const fs::path out = prepare_out_dir(c.out);
  std::vector<std::string> captions;
  for (const auto& dir : corpora) {
    const Corpus corpus = load_corpus(dir);
    for (auto& cap : corpus.captions(Split::train)) captions.push_back(std::move(cap));
  }
  const Vocab vocab = Vocab::build(captions);
  std::vector<std::vector<TokenId>> sentences;
  for (const auto& cap : captions) sentences.push_back(vocab.encode(cap));
  cfg.word2vec.seed = cfg.seed;
  const Word2VecResult result = train_word2vec(sentences, vocab.size(), cfg.word2vec);
  vocab.save(out / "vocab.txt");
  write_features(out / "embeddings.afm", result.input_vectors.cast<float>());
  std::ofstream log(out / "metrics.jsonl");
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    log << json{{"epoch", e + 1}, {"loss", result.epoch_loss[e]}}.dump() << '\n';
  echo_config(out, cfg, {{"command", "train-embeddings"}, {"corpus", corpora}});
  std::cout << json{{"vocab_size", vocab.size()}, {"dim", cfg.word2vec.dim}}.dump() << '\n';
  return 0;
}

int cmd_train(const Common& c, const std::string& corpus_dir, const std::string& embeddings) {
  if (corpus_dir.empty()) throw UsageError("--corpus is required");
  RunConfig cfg = effective_config(c);
  const Corpus corpus = load_corpus(corpus_dir);
  adopt_corpus_kind(cfg, corpus);
  const fs::path out = prepare_out_dir(c.out);
  echo_config(out, cfg, {{"command", "train"}, {"corpus", corpus_dir}, {"embeddings", embeddings}});

  CaptionModel model(cfg.model, Vocab::build(corpus.captions(Split::train)), cfg.seed);
  if (!embeddings.empty()) load_embedding_dir(model, embeddings);
  Adam optimizer(model.parameters(), {cfg.train.lr});
  std::ofstream log(out / "metrics.jsonl");
  const TrainResult r = train(model, corpus, cfg.train, cfg.seed, metrics_writer(log), &optimizer);
  save_checkpoint(out / "model.laft", model, cfg, &optimizer);
  std::cout << json{{"checkpoint", (out / "model.laft").string()}, {"best_epoch", r.best_epoch}, {"steps", r.steps}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_finetune(const Common& c, const std::string& checkpoint, const std::string& corpus_dir) {
  if (checkpoint.empty() || corpus_dir.empty()) throw UsageError("--checkpoint and --corpus are required");
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  RunConfig cfg = effective_config(c, ck.config);
  const Corpus corpus = load_corpus(corpus_dir);
  adopt_corpus_kind(cfg, corpus);
  const fs::path out = prepare_out_dir(c.out);
  echo_config(out, cfg, {{"command", "finetune"}, {"checkpoint", checkpoint}, {"corpus", corpus_dir}});

  CaptionModel& model = ck.model;
  prepare_finetune(model, corpus, cfg.model);
  Adam optimizer(model.parameters(), {cfg.train.lr});
  std::ofstream log(out / "metrics.jsonl");
  const TrainResult r = train(model, corpus, cfg.train, cfg.seed, metrics_writer(log), &optimizer);
  save_checkpoint(out / "model.laft", model, cfg, &optimizer);
  std::cout << json{{"checkpoint", (out / "model.laft").string()},
                    {"vocab_size", model.vocab().size()},
                    {"best_epoch", r.best_epoch}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_caption(const Common& c, const std::string& checkpoint, const std::string& corpus_dir,
                const std::string& split, bool greedy) {
  if (checkpoint.empty() || corpus_dir.empty()) throw UsageError("--checkpoint and --corpus are required");
  if (c.out.empty()) throw UsageError("--out is required");
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const RunConfig cfg = effective_config(c, ck.config);
  const Corpus corpus = load_corpus(corpus_dir);
  if (corpus.kind != cfg.model.input) throw ConfigError("corpus feature kind does not match the checkpoint");
  if (cfg.decode.beam < 1) throw UsageError("--beam must be at least 1");
  if (cfg.decode.max_len < 1 || cfg.decode.max_len >= cfg.model.decoder.max_tokens)
    throw UsageError("--max-len must be in 1.." + std::to_string(cfg.model.decoder.max_tokens - 1));
  const auto clips = corpus.select(split_from_string(split));
  const auto records = caption_clips(ck.model, clips, greedy ? 0 : cfg.decode.beam, cfg.decode.max_len);
  if (const auto parent = fs::path(c.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(c.out);
  if (!out) throw std::runtime_error("cannot write " + c.out);
  for (const auto& r : records) {
    out << json{{"clip_id", r.clip_id}, {"caption", r.caption}, {"log_prob", r.log_prob}}.dump() << '\n';
    if (!r.finished) std::cerr << "warning: caption for " << r.clip_id << " reached max_len without <eos>\n";
  }
  return 0;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

Words words_of(const std::string& text) {
  try {
    return tokenize(text);
  } catch (const std::invalid_argument&) {
    return {};
  }
}

/// Text of a candidate record: "candidate" or "caption".
std::string candidate_text(const json& r) {
  if (r.contains("candidate")) return r.at("candidate").get<std::string>();
  if (r.contains("caption")) return r.at("caption").get<std::string>();
  throw std::runtime_error("record for " + r.value("clip_id", std::string("?")) + " has no candidate or caption");
}

/// References of a record: "references", "captions" or a single "caption".
std::vector<std::string> reference_texts(const json& r) {
  for (const char* key : {"references", "captions"})
    if (r.contains(key)) return r.at(key).get<std::vector<std::string>>();
  if (r.contains("caption")) return {r.at("caption").get<std::string>()};
  throw std::runtime_error("record for " + r.value("clip_id", std::string("?")) + " has no references");
}

int cmd_evaluate(const Common& c, const std::string& pairs_file, const std::string& candidates,
                 const std::string& references) {
  std::vector<EvalPair> pairs;
  if (!pairs_file.empty()) {
    for (const json& r : read_jsonl(pairs_file)) {
      EvalPair p{words_of(candidate_text(r)), {}};
      for (const auto& ref : reference_texts(r)) p.references.push_back(words_of(ref));
      pairs.push_back(std::move(p));
    }
  } else {
    if (candidates.empty() || references.empty()) throw UsageError("give --pairs, or --candidates and --references");
    std::map<std::string, std::vector<std::string>> refs;
    if (fs::is_directory(references)) {
      for (const Clip& clip : load_corpus(references).clips) refs[clip.id] = clip.captions;
    } else {
      for (const json& r : read_jsonl(references)) refs[r.at("clip_id").get<std::string>()] = reference_texts(r);
    }
    for (const json& r : read_jsonl(candidates)) {
      const std::string id = r.at("clip_id").get<std::string>();
      const auto it = refs.find(id);
      if (it == refs.end()) throw std::runtime_error("no references for clip " + id);
      EvalPair p{words_of(candidate_text(r)), {}};
      for (const auto& ref : it->second) p.references.push_back(words_of(ref));
      pairs.push_back(std::move(p));
    }
  }
  if (pairs.empty()) throw std::runtime_error("nothing to evaluate");
  const json report = metric_json(evaluate_all(pairs));
  if (c.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    write_json_file(c.out, report);
  }
  return 0;
}

int cmd_gradcheck(const Common& c, Index max_probes) {
  const GradCheckReport r = model_gradcheck(c.seed.value_or(0), max_probes);
  json entries = json::array();
  for (const auto& e : r.entries) {
    std::printf("%-34s probes %3lld  rel %.3e  %s\n", e.name.c_str(), static_cast<long long>(e.probes), e.rel_error,
                e.passed ? "ok" : "FAIL");
    entries.push_back({{"name", e.name}, {"probes", e.probes}, {"rel_error", e.rel_error}, {"passed", e.passed}});
  }
  std::printf("%s\n", r.passed() ? "PASS" : "FAIL");
  if (!c.out.empty()) write_json_file(c.out, {{"passed", r.passed()}, {"entries", entries}});
  return r.passed() ? 0 : 2;
}

int cmd_ablate(const Common& c, const std::string& corpus_a, const std::string& corpus_b, int n_seeds,
               int pretrain_epochs, bool scratch) {
  RunConfig cfg = effective_config(c);
  if (n_seeds < 1) throw UsageError("--seeds must be at least 1");
  const auto pair = standard_pairs(cfg.seed);
  const Corpus a = corpus_a.empty() ? generate_corpus(pair.first) : load_corpus(corpus_a);
  const Corpus b = corpus_b.empty() ? generate_corpus(pair.second) : load_corpus(corpus_b);
  adopt_corpus_kind(cfg, a);
  const fs::path out = prepare_out_dir(c.out);

  TransferSettings settings;
  settings.config = cfg;
  settings.finetune_epochs = cfg.train.epochs;
  settings.pretrain_epochs = pretrain_epochs;
  echo_config(out, cfg,
              {{"command", "ablate"},
               {"corpus_a", corpus_a.empty() ? "standard A" : corpus_a},
               {"corpus_b", corpus_b.empty() ? "standard B" : corpus_b},
               {"seeds", n_seeds},
               {"pretrain_epochs", pretrain_epochs},
               {"finetune_epochs", settings.finetune_epochs},
               {"scratch", scratch}});

  const auto log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  std::ofstream rows(out / "ablation.jsonl");
  std::map<std::string, std::vector<double>> cider, epoch1;
  std::printf("%-8s %6s %9s %9s %9s\n", "variant", "seed", "cider_d", "bleu4", "ft_ep1");
  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    for (const bool local : {true, false}) {
      const TransferRun run = run_transfer(a, b, settings, local, seed, log);
      const double ep1 = run.finetune.history.empty() ? NAN : run.finetune.history.front().eval_loss;
      cider[run.variant].push_back(run.metrics.cider_d);
      epoch1[run.variant].push_back(ep1);
      json row = metric_json(run.metrics);
      row["variant"] = run.variant;
      row["seed"] = seed;
      row["finetune_epoch1_eval_loss"] = nan_to_null(ep1);
      rows << row.dump() << '\n';
      rows.flush();
      std::printf("%-8s %6llu %9.4f %9.4f %9.4f\n", run.variant.c_str(), static_cast<unsigned long long>(seed),
                  run.metrics.cider_d, run.metrics.bleu[3], ep1);
      std::fflush(stdout);
    }
    if (scratch) {
      const TrainResult r = run_scratch(a, b, settings, 1, seed, log);
      epoch1["scratch"].push_back(r.history.front().eval_loss);
      rows << json{{"variant", "scratch"}, {"seed", seed}, {"epoch1_eval_loss", r.history.front().eval_loss}}.dump()
           << '\n';
      std::printf("%-8s %6llu %9s %9s %9.4f\n", "scratch", static_cast<unsigned long long>(seed), "-", "-",
                  r.history.front().eval_loss);
    }
  }
  json summary{{"variant", "median"}};
  for (const char* v : {"local", "global"}) {
    summary[std::string(v) + "_cider_d"] = median(cider[v]);
    summary[std::string(v) + "_finetune_epoch1_eval_loss"] = median(epoch1[v]);
  }
  if (scratch) summary["scratch_epoch1_eval_loss"] = median(epoch1["scratch"]);
  rows << summary.dump() << '\n';
  std::printf("%-8s %6s %9.4f (local)  %9.4f (global)\n", "median", "-", median(cider["local"]),
              median(cider["global"]));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LocalAFT audio captioning"};
  app.require_subcommand(1);

  Common common;
  std::string spec_file, pair, corpus, embeddings, checkpoint, split = "eval", pairs, candidates, references;
  std::string corpus_a, corpus_b;
  std::vector<std::string> corpora;
  bool wav = false, greedy = false, scratch = false;
  Index max_probes = 16;
  int seeds = 5, pretrain_epochs = 5;

  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic corpus");
  synth->add_option("--spec", spec_file, "Corpus spec JSON")->check(CLI::ExistingFile);
  synth->add_option("--pair", pair, "Standard pair member")->check(CLI::IsMember({"A", "B"}));
  synth->add_flag("--wav", wav, "Render tones to WAV and compute features through the frontend");
  synth->add_option("--seed", common.seed, "Random seed");
  synth->add_option("--out", common.out, "Output directory")->required();

  auto* emb = app.add_subcommand("train-embeddings", "Skip-gram word2vec on corpus captions");
  add_common(emb, common, false);
  emb->add_option("--corpus", corpora, "Corpus directory (repeatable)")->required();
  emb->add_option("--out", common.out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a captioning model");
  add_common(tr, common, true);
  tr->add_option("--corpus", corpus, "Corpus directory")->required();
  tr->add_option("--embeddings", embeddings, "Directory from train-embeddings");
  tr->add_option("--out", common.out, "Output directory")->required();

  auto* ft = app.add_subcommand("finetune", "Fine-tune a checkpoint on another corpus");
  add_common(ft, common, true);
  ft->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ft->add_option("--corpus", corpus, "Corpus directory")->required();
  ft->add_option("--out", common.out, "Output directory")->required();

  auto* cap = app.add_subcommand("caption", "Caption the clips of a corpus split");
  add_common(cap, common, false);
  cap->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  cap->add_option("--corpus", corpus, "Corpus directory")->required();
  cap->add_option("--split", split, "train, val or eval")->check(CLI::IsMember({"train", "val", "eval"}));
  cap->add_option("--beam", common.beam, "Beam width");
  cap->add_option("--max-len", common.max_len, "Maximum generated tokens");
  cap->add_flag("--greedy", greedy, "Greedy decoding");
  cap->add_option("--out", common.out, "Output JSON-lines file")->required();

  auto* ev = app.add_subcommand("evaluate", "Score captions with BLEU, ROUGE-L and CIDEr-D");
  ev->add_option("--pairs", pairs, "JSON-lines {clip_id, candidate, references}");
  ev->add_option("--candidates", candidates, "JSON-lines {clip_id, caption}");
  ev->add_option("--references", references, "JSON-lines with references, or a corpus directory");
  ev->add_option("--out", common.out, "Output JSON file (default: stdout)");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every parameter class");
  gc->add_option("--seed", common.seed, "Random seed");
  gc->add_option("--max-probes", max_probes, "Entries probed per tensor");
  gc->add_option("--out", common.out, "Report JSON file");

  auto* ab = app.add_subcommand("ablate", "Local vs global window over several seeds");
  add_common(ab, common, true);
  ab->add_option("--corpus-a", corpus_a, "Pretraining corpus (default: standard A)");
  ab->add_option("--corpus-b", corpus_b, "Fine-tuning corpus (default: standard B)");
  ab->add_option("--seeds", seeds, "Number of seeds");
  ab->add_option("--pretrain-epochs", pretrain_epochs, "Epochs on corpus A");
  ab->add_option("--beam", common.beam, "Beam width");
  ab->add_flag("--scratch", scratch, "Also report from-scratch epoch-1 eval loss on B");
  ab->add_option("--out", common.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(common, spec_file, pair, wav);
    if (*emb) return cmd_embeddings(common, corpora);
    if (*tr) return cmd_train(common, corpus, embeddings);
    if (*ft) return cmd_finetune(common, checkpoint, corpus);
    if (*cap) return cmd_caption(common, checkpoint, corpus, split, greedy);
    if (*ev) return cmd_evaluate(common, pairs, candidates, references);
    if (*gc) return cmd_gradcheck(common, max_probes);
    if (*ab) return cmd_ablate(common, corpus_a, corpus_b, seeds, pretrain_epochs, scratch);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
