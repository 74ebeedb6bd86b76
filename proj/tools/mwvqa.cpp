// Copyright 2026 The mwvqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: synthetic data, vocabulary, pretraining,
// finetuning, evaluation, scoring and the gradient suite.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mwvqa/checkpoint.hpp"
#include "mwvqa/config.hpp"
#include "mwvqa/dataset.hpp"
#include "mwvqa/errors.hpp"
#include "mwvqa/metrics.hpp"
#include "mwvqa/pipeline.hpp"
#include "mwvqa/synthetic.hpp"
#include "mwvqa/text_tokenizer.hpp"
#include "mwvqa/verification.hpp"

namespace fs = std::filesystem;
using namespace mwvqa;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig config = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  for (const std::string& kv : g.overrides) apply_override(config, kv);
  if (g.seed) config.seed = *g.seed;
  validate(config);
  return config;
}

fs::path out_dir(const GlobalOptions& g) {
  const fs::path dir(g.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// One "step<TAB>value" file per trace, flushed after every line.
class TraceFiles {
 public:
  void open(const std::string& trace, const fs::path& path) {
    auto file = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file) throw IoError("cannot write " + path.string());
    files_[trace] = std::move(file);
  }

  void write(const std::string& trace, std::size_t step, double value) {
    std::ofstream& out = *files_.at(trace);
    out << pipeline::format_trace_line(step, value);
    out.flush();
    if (!out) throw IoError("failed writing the " + trace + " trace");
  }

 private:
  std::map<std::string, std::unique_ptr<std::ofstream>> files_;
};

pipeline::ModelBundle load_bundle(const RunConfig& config) {
  if (config.checkpoint.empty()) throw ConfigError("config key 'checkpoint' is not set");
  return pipeline::ModelBundle::from_checkpoint(load_checkpoint(config.checkpoint));
}

std::optional<metrics::Taxonomy> load_taxonomy(const RunConfig& config) {
  if (config.taxonomy.empty()) {
    std::cerr << "note: no taxonomy configured, WUPS columns omitted\n";
    return std::nullopt;
  }
  if (!fs::exists(config.taxonomy)) {
    std::cerr << "note: taxonomy " << config.taxonomy << " not found, WUPS columns omitted\n";
    return std::nullopt;
  }
  return metrics::Taxonomy::load(config.taxonomy);
}

int cmd_gen_synth(const GlobalOptions& g, std::size_t n, std::size_t test_n) {
  const RunConfig config = resolve_config(g);
  SyntheticSpec spec;
  spec.n = n;
  spec.test_n = test_n;
  spec.image_size = config.image_size;
  spec.patch = config.patch_size;
  spec.seed = config.seed;
  const fs::path dir = out_dir(g);
  gen_synthetic(dir, spec);
  std::cout << "wrote " << n << " training and " << test_n << " test examples to "
            << dir.string() << "\n";
  return 0;
}

int cmd_build_vocab(const GlobalOptions& g) {
  const RunConfig config = resolve_config(g);
  if (config.dataset.empty()) throw ConfigError("config key 'dataset' is not set");
  const Dataset ds = load_dataset(config.dataset);
  std::vector<std::string> corpus;
  for (const QAPair& ex : ds.examples) {
    corpus.push_back(ex.question);
    corpus.push_back(ex.answer);
  }
  const text::Vocab vocab = text::build_vocab(corpus, config.text_vocab_size);
  const fs::path path = out_dir(g) / "vocab.txt";
  vocab.save(path);
  std::cout << "wrote " << vocab.size() << " tokens to " << path.string() << "\n";
  return 0;
}

int cmd_pretrain(const GlobalOptions& g) {
  const RunConfig config = resolve_config(g);
  const fs::path dir = out_dir(g);
  TraceFiles traces;
  traces.open("vqkd", dir / "vqkd_loss.tsv");
  traces.open("mdm", dir / "mdm_loss.tsv");
  pipeline::TrainObserver observer;
  observer.on_step = [&](std::string_view trace, std::size_t step, double loss) {
    traces.write(std::string(trace), step, loss);
  };
  const pipeline::PretrainResult result = pipeline::pretrain(config, observer);
  save_checkpoint(result.bundle.to_checkpoint(), dir / "pretrain.ckpt");
  if (!result.mdm_losses.empty()) {
    std::printf("mdm loss %.6f -> %.6f over %zu steps\n", result.mdm_losses.front(),
                result.mdm_losses.back(), result.mdm_losses.size());
  }
  std::cout << "wrote " << (dir / "pretrain.ckpt").string() << "\n";
  return 0;
}

int cmd_finetune(const GlobalOptions& g) {
  const RunConfig config = resolve_config(g);
  pipeline::ModelBundle bundle = load_bundle(config);
  const fs::path dir = out_dir(g);
  TraceFiles traces;
  traces.open("finetune", dir / "finetune_loss.tsv");
  traces.open("accuracy", dir / "train_accuracy.tsv");
  pipeline::TrainObserver observer;
  observer.on_step = [&](std::string_view trace, std::size_t step, double loss) {
    traces.write(std::string(trace), step, loss);
  };
  observer.on_epoch = [&](std::size_t epoch, double acc) {
    traces.write("accuracy", epoch, acc);
  };
  const pipeline::FinetuneResult result = pipeline::finetune(config, std::move(bundle), observer);
  save_checkpoint(result.bundle.to_checkpoint(), dir / "finetune.ckpt");
  if (!result.train_accuracy.empty()) {
    std::printf("train accuracy after %zu epochs: %.4f\n", result.train_accuracy.size(),
                result.train_accuracy.back());
  }
  std::cout << "wrote " << (dir / "finetune.ckpt").string() << "\n";
  return 0;
}

int cmd_evaluate(const GlobalOptions& g, bool oracle) {
  const RunConfig config = resolve_config(g);
  const pipeline::ModelBundle bundle = load_bundle(config);
  const pipeline::DataSplits splits = pipeline::resolve_splits(config);
  const std::optional<metrics::Taxonomy> taxonomy = load_taxonomy(config);
  const pipeline::Evaluation eval =
      pipeline::evaluate(bundle, splits.test, taxonomy ? &*taxonomy : nullptr, oracle);
  const fs::path dir = out_dir(g);
  write_text(dir / "metrics.json", pipeline::metrics_json(eval));
  write_text(dir / "predictions.jsonl", pipeline::predictions_jsonl(eval));
  std::cout << pipeline::format_table(eval);
  return 0;
}

int cmd_score(const GlobalOptions& g, const std::string& predictions_path,
              const std::string& gold_path) {
  const RunConfig config = resolve_config(g);
  const Dataset gold = gold_path.empty() ? pipeline::resolve_splits(config).test
                                         : load_dataset(gold_path);
  const auto predictions =
      pipeline::parse_predictions(read_text(predictions_path), predictions_path);
  const std::optional<metrics::Taxonomy> taxonomy = load_taxonomy(config);
  const pipeline::Evaluation eval =
      pipeline::score_predictions(predictions, gold, taxonomy ? &*taxonomy : nullptr);
  write_text(out_dir(g) / "score.json", pipeline::metrics_json(eval));
  std::cout << pipeline::format_table(eval);
  return 0;
}

int cmd_grad_check(std::size_t seeds, std::uint64_t first_seed) {
  verification::SuiteOptions options;
  options.seeds = seeds;
  options.first_seed = first_seed;
  std::map<std::string, std::pair<double, bool>> summary;
  std::vector<std::string> order;
  verification::run_gradient_suite(options, [&](const verification::CaseResult& r) {
    auto [it, inserted] = summary.try_emplace(r.name, 0.0, true);
    if (inserted) order.push_back(r.name);
    it->second.first = std::max(it->second.first, r.report.worst);
    it->second.second = it->second.second && r.report.pass;
    if (!r.report.pass) {
      std::printf("FAIL %-18s seed %llu worst rel err %.3e\n", r.name.c_str(),
                  static_cast<unsigned long long>(r.seed), r.report.worst);
    }
  });
  bool all = true;
  for (const std::string& name : order) {
    const auto& [worst, pass] = summary[name];
    std::printf("%s %-18s %zu seeds, worst rel err %.3e\n", pass ? "pass" : "FAIL",
                name.c_str(), seeds, worst);
    all = all && pass;
  }
  std::printf("%s: %zu cases, tolerance %.0e\n", all ? "all passed" : "FAILED", order.size(),
              options.tol);
  return all ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiway transformer VQA pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "key=value config file");
  app.add_option("--seed", g.seed, "override the config seed");
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--set", g.overrides, "override a config key, key=value")->take_all();

  std::size_t synth_n = 32;
  std::size_t synth_test_n = 16;
  auto* gen = app.add_subcommand("gen-synth", "write a synthetic dataset");
  gen->add_option("--n", synth_n, "training examples")->capture_default_str();
  gen->add_option("--test-n", synth_test_n, "held-out examples")->capture_default_str();

  auto* vocab = app.add_subcommand("build-vocab", "build the text vocabulary from the dataset");
  auto* pre = app.add_subcommand("pretrain", "visual tokenizer and masked data modeling");
  auto* fine = app.add_subcommand("finetune", "train the answer head on QA pairs");

  bool oracle = false;
  auto* eval = app.add_subcommand("evaluate", "score the model on the test split");
  eval->add_flag("--oracle", oracle, "predict the gold answers");

  std::string predictions_path, gold_path;
  auto* score = app.add_subcommand("score", "score a predictions file against gold answers");
  score->add_option("--predictions", predictions_path, "JSONL with id and prediction")
      ->required();
  score->add_option("--gold", gold_path, "gold JSONL (default: the configured test split)");

  std::size_t seeds = 20;
  std::uint64_t first_seed = 0;
  auto* grad = app.add_subcommand("grad-check", "run the finite-difference gradient suite");
  grad->add_option("--seeds", seeds, "seeds per case")->capture_default_str();
  grad->add_option("--first-seed", first_seed, "first seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*gen) return cmd_gen_synth(g, synth_n, synth_test_n);
    if (*vocab) return cmd_build_vocab(g);
    if (*pre) return cmd_pretrain(g);
    if (*fine) return cmd_finetune(g);
    if (*eval) return cmd_evaluate(g, oracle);
    if (*score) return cmd_score(g, predictions_path, gold_path);
    if (*grad) return cmd_grad_check(seeds, first_seed);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitValidation;
}
