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

#include "mwvqa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "mwvqa/errors.hpp"
#include "mwvqa/masking.hpp"
#include "mwvqa/ops.hpp"
#include "mwvqa/optimizer.hpp"
#include "mwvqa/ppm.hpp"

namespace mwvqa::pipeline {
namespace {

constexpr std::uint64_t kPretrainStage = 0;
constexpr std::uint64_t kFinetuneStage = 1;

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  return order;
}

std::vector<Tensor> tensors_of(const NamedTensors& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

double checked_loss(const Tensor& loss, std::string_view trace, std::size_t step) {
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw NumericError("non-finite " + std::string(trace) + " loss at step " +
                       std::to_string(step));
  }
  return value;
}

void report_step(const TrainObserver& observer, std::string_view trace, std::size_t step,
                 double loss) {
  if (observer.on_step) observer.on_step(trace, step, loss);
}

// Distinct image files in first-use order, and the index of each example's
// image among them.
struct ImageTable {
  std::vector<Tensor> unique;
  std::vector<std::size_t> of_example;
};

ImageTable dedupe_images(const Dataset& dataset, const std::vector<Tensor>& images) {
  ImageTable table;
  std::map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
    const std::string key = dataset.image_file(dataset.examples[i]).lexically_normal().string();
    auto [it, inserted] = seen.try_emplace(key, table.unique.size());
    if (inserted) table.unique.push_back(images[i]);
    table.of_example.push_back(it->second);
  }
  return table;
}

// Question and answer text of consecutive examples, cut into sequences of at
// most max_len ids.
std::vector<text::TokenSeq> pack_text(const std::vector<text::TokenSeq>& pieces,
                                      std::size_t max_len) {
  std::vector<text::TokenSeq> out;
  text::TokenSeq current;
  for (const text::TokenSeq& piece : pieces) {
    for (std::size_t id : piece.ids) {
      current.ids.push_back(id);
      if (current.ids.size() == max_len) {
        out.push_back(std::move(current));
        current = {};
      }
    }
  }
  if (!current.ids.empty()) out.push_back(std::move(current));
  return out;
}

std::string format_metric(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

nlohmann::ordered_json report_json(const metrics::MetricsReport& r) {
  nlohmann::ordered_json j;
  j["n_examples"] = r.n_examples;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["wups_0.0"] = r.wups_0 ? nlohmann::ordered_json(*r.wups_0) : nlohmann::ordered_json();
  j["wups_0.9"] = r.wups_9 ? nlohmann::ordered_json(*r.wups_9) : nlohmann::ordered_json();
  return j;
}

}  // namespace

Rng stage_rng(std::uint64_t seed, std::uint64_t stage) {
  return Rng(seed ^ (stage * 0x9E3779B97F4A7C15ull));
}

ModelBundle ModelBundle::initialize(const RunConfig& config, text::Vocab vocab,
                                    std::vector<std::string> answers, Rng& rng) {
  validate(config);
  if (answers.empty()) throw DatasetError("answer vocabulary is empty");
  if (!std::is_sorted(answers.begin(), answers.end()) ||
      std::adjacent_find(answers.begin(), answers.end()) != answers.end()) {
    throw ContractError("answer vocabulary must be sorted and distinct");
  }
  ModelBundle b;
  b.config = config;
  b.vocab = std::move(vocab);
  b.answers = std::move(answers);
  b.tokenizer = vision::VqkdTokenizer::create(tokenizer_config(config), rng);
  b.model = multiway::MultiwayModel::create(
      model_config(config, b.vocab.size(), b.answers.size()), rng);
  b.rng_state = rng.state();
  return b;
}

NamedTensors ModelBundle::parameters() const {
  NamedTensors out = tokenizer.parameters();
  NamedTensors mw = model.parameters();
  out.insert(out.end(), mw.begin(), mw.end());
  return out;
}

Checkpoint ModelBundle::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.config_text = to_text(config);
  ckpt.rng_state = rng_state;
  ckpt.vocab_text = vocab.to_text();
  ckpt.answers = answers;
  ckpt.tensors = parameters();
  return ckpt;
}

ModelBundle ModelBundle::from_checkpoint(const Checkpoint& ckpt) {
  const RunConfig config = parse_config(ckpt.config_text, "checkpoint config");
  Rng scratch(0);
  ModelBundle b = initialize(config, text::Vocab::parse(ckpt.vocab_text, "checkpoint vocabulary"),
                             ckpt.answers, scratch);
  Rng probe;
  try {
    probe.set_state(ckpt.rng_state);
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint RNG state: ") + e.what());
  }
  b.rng_state = ckpt.rng_state;

  const NamedTensors expected = b.parameters();
  if (ckpt.tensors.size() != expected.size()) {
    throw CheckpointShapeError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                               " tensors, the configured model has " +
                               std::to_string(expected.size()));
  }
  for (const auto& [name, param] : expected) {
    const Tensor* stored = ckpt.find(name);
    if (!stored) throw CheckpointShapeError("checkpoint lacks tensor '" + name + "'");
    if (stored->shape() != param.shape()) {
      throw CheckpointShapeError("tensor '" + name + "' is " + shape_string(stored->shape()) +
                                 " in the checkpoint but " + shape_string(param.shape()) +
                                 " under its config");
    }
  }
  for (const auto& [name, param] : expected) {
    Tensor target = param;
    const auto src = ckpt.find(name)->data();
    std::copy(src.begin(), src.end(), target.mutable_data().begin());
  }
  return b;
}

std::optional<std::size_t> ModelBundle::answer_id(std::string_view answer) const {
  auto it = std::lower_bound(answers.begin(), answers.end(), answer);
  if (it == answers.end() || *it != answer) return std::nullopt;
  return static_cast<std::size_t>(it - answers.begin());
}

DataSplits resolve_splits(const RunConfig& config) {
  if (config.dataset.empty()) throw ConfigError("config key 'dataset' is not set");
  Dataset all = load_dataset(config.dataset);
  if (!config.test_dataset.empty()) {
    return {std::move(all), load_dataset(config.test_dataset)};
  }
  DatasetSplit split = split_dataset(all, config.seed);
  return {std::move(split.train), std::move(split.test)};
}

std::vector<Tensor> load_images(const Dataset& dataset, const RunConfig& config) {
  if (config.channels != 3) {
    throw ConfigError("PPM images have 3 channels but config key 'channels' is " +
                      std::to_string(config.channels));
  }
  std::map<std::string, Tensor> cache;
  std::vector<Tensor> out;
  out.reserve(dataset.examples.size());
  for (const QAPair& ex : dataset.examples) {
    const std::filesystem::path file = dataset.image_file(ex).lexically_normal();
    auto it = cache.find(file.string());
    if (it == cache.end()) {
      it = cache.emplace(file.string(),
                         load_image_ppm(file, config.image_size, config.image_size))
               .first;
    }
    out.push_back(it->second);
  }
  return out;
}

text::TokenSeq encode_question(std::string_view question, const text::Vocab& vocab,
                               std::size_t max_len) {
  text::TokenSeq seq = text::encode(question, vocab);
  if (seq.ids.size() > max_len) seq.ids.resize(max_len);
  return seq;
}

std::vector<std::size_t> option_ids(const QAPair& pair, const ModelBundle& bundle) {
  if (pair.options.empty()) {
    std::vector<std::size_t> all(bundle.answers.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  std::vector<std::size_t> ids;
  for (const std::string& opt : pair.options) {
    const auto id = bundle.answer_id(opt);
    if (!id) {
      throw DatasetError("option '" + opt + "' of example " + pair.id +
                         " is absent from the answer vocabulary");
    }
    ids.push_back(*id);
  }
  return ids;
}

PretrainResult pretrain(const RunConfig& config, const TrainObserver& observer) {
  validate(config);
  if (config.vocab.empty()) throw ConfigError("config key 'vocab' is not set");
  const DataSplits splits = resolve_splits(config);
  const Dataset& train = splits.train;
  if (train.examples.empty()) throw DatasetError("training split is empty");
  text::Vocab vocab = text::Vocab::load(config.vocab);
  const ImageTable images = dedupe_images(train, load_images(train, config));

  Rng rng = stage_rng(config.seed, kPretrainStage);
  PretrainResult result;
  result.bundle = ModelBundle::initialize(config, std::move(vocab), train.answer_vocab, rng);
  ModelBundle& bundle = result.bundle;
  const std::size_t n = train.examples.size();
  const std::size_t batch_size = config.batch_size;

  // Visual tokenizer.
  const vision::VqkdConfig tok_cfg = tokenizer_config(config);
  const vision::SyntheticTeacher teacher = vision::SyntheticTeacher::create(
      tok_cfg.patch_dim(), tok_cfg.teacher_dim, rng.next_u64());
  std::vector<Tensor> teacher_features;
  for (const Tensor& image : images.unique) {
    teacher_features.push_back(teacher.features(vision::patchify(image, config.patch_size)));
  }
  {
    Adam opt(tensors_of(bundle.tokenizer.parameters()),
             {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
    const ForwardContext ctx{true, 0.0, &rng};
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      const std::vector<std::size_t> order = shuffled(n, rng);
      for (std::size_t start = 0; start < n; start += batch_size) {
        vision::VqkdBatch batch;
        for (std::size_t k = start; k < std::min(n, start + batch_size); ++k) {
          const std::size_t img = images.of_example[order[k]];
          batch.images.push_back(images.unique[img]);
          batch.teacher_features.push_back(teacher_features[img]);
        }
        ++step;
        opt.zero_grad();
        const vision::VqkdTerms terms =
            vision::vqkd_objective(batch, bundle.tokenizer.encoder, bundle.tokenizer.codebook,
                                   bundle.tokenizer.decoder, config.patch_size, nullptr, ctx);
        const double loss = checked_loss(terms.loss, "vqkd", step);
        terms.loss.backward();
        opt.step();
        result.vqkd_losses.push_back(loss);
        report_step(observer, "vqkd", step, loss);
      }
    }
  }

  // Masked data modeling.
  std::vector<vision::VisualTokenSeq> codes;
  for (const Tensor& image : images.unique) codes.push_back(bundle.tokenizer.tokenize(image));
  std::vector<text::TokenSeq> questions, qa_text;
  for (const QAPair& ex : train.examples) {
    questions.push_back(encode_question(ex.question, bundle.vocab, config.max_text_len));
    qa_text.push_back(text::encode(ex.question + " " + ex.answer, bundle.vocab));
  }
  const std::size_t grid = config.image_size / config.patch_size;
  const std::size_t min_block = config.effective_min_block();
  auto masked_image = [&](std::size_t img, multiway::MdmExample& ex) {
    ex.image = images.unique[img];
    ex.patch_mask = masking::mask_blockwise(grid, grid, config.patch_mask_ratio, min_block,
                                            rng.next_u64());
    ex.visual_targets = codes[img];
  };
  {
    Adam opt(tensors_of(bundle.model.parameters()),
             {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
    const ForwardContext ctx{true, config.dropout, &rng};
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      const std::vector<std::size_t> order = shuffled(n, rng);
      for (std::size_t start = 0; start < n; start += batch_size) {
        multiway::MdmBatch batch;
        std::vector<text::TokenSeq> pieces;
        for (std::size_t k = start; k < std::min(n, start + batch_size); ++k) {
          const std::size_t i = order[k];
          const std::size_t img = images.of_example[i];
          multiway::MdmExample paired;
          masked_image(img, paired);
          paired.text = questions[i];
          paired.text_mask = masking::mask_text(questions[i].ids.size(),
                                                config.paired_text_mask_ratio, rng.next_u64());
          batch.examples.push_back(std::move(paired));
          multiway::MdmExample image_only;
          masked_image(img, image_only);
          batch.examples.push_back(std::move(image_only));
          pieces.push_back(qa_text[i]);
        }
        for (text::TokenSeq& seq : pack_text(pieces, config.max_text_len)) {
          multiway::MdmExample text_only;
          text_only.text_mask =
              masking::mask_text(seq.ids.size(), config.text_mask_ratio, rng.next_u64());
          if (text_only.text_mask.positions.empty()) continue;
          text_only.text = std::move(seq);
          batch.examples.push_back(std::move(text_only));
        }
        ++step;
        opt.zero_grad();
        const Tensor loss_t = multiway::mdm_loss(batch, bundle.model, ctx);
        const double loss = checked_loss(loss_t, "mdm", step);
        loss_t.backward();
        opt.step();
        result.mdm_losses.push_back(loss);
        report_step(observer, "mdm", step, loss);
      }
    }
  }
  bundle.rng_state = rng.state();
  return result;
}

double train_accuracy(const ModelBundle& bundle, const Dataset& dataset,
                      const std::vector<Tensor>& images) {
  if (dataset.examples.empty()) throw ContractError("train_accuracy: empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
    const QAPair& ex = dataset.examples[i];
    const text::TokenSeq q =
        encode_question(ex.question, bundle.vocab, bundle.config.max_text_len);
    const std::vector<std::size_t> opts = option_ids(ex, bundle);
    const multiway::AnswerChoice choice =
        multiway::answer_select(&images[i], q, opts, bundle.model);
    if (bundle.answers[choice.answer] == ex.answer) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.examples.size());
}

FinetuneResult finetune(const RunConfig& config_in, ModelBundle bundle,
                        const TrainObserver& observer) {
  RunConfig config = config_in;
  adopt_architecture(config, bundle.config);
  validate(config);
  const DataSplits splits = resolve_splits(config);
  const Dataset& train = splits.train;
  if (train.examples.empty()) throw DatasetError("training split is empty");
  const std::vector<Tensor> images = load_images(train, config);

  std::vector<text::TokenSeq> questions;
  std::vector<std::vector<std::size_t>> options;
  std::vector<std::size_t> targets;
  for (const QAPair& ex : train.examples) {
    const auto gold = bundle.answer_id(ex.answer);
    if (!gold) {
      throw DatasetError("answer '" + ex.answer + "' of example " + ex.id +
                         " is absent from the answer vocabulary");
    }
    options.push_back(option_ids(ex, bundle));
    const auto pos = std::find(options.back().begin(), options.back().end(), *gold);
    if (pos == options.back().end()) {
      throw DatasetError("answer '" + ex.answer + "' of example " + ex.id +
                         " is not among its options");
    }
    targets.push_back(static_cast<std::size_t>(pos - options.back().begin()));
    questions.push_back(encode_question(ex.question, bundle.vocab, config.max_text_len));
  }
  bundle.config = config;

  FinetuneResult result;
  Rng rng = stage_rng(config.seed, kFinetuneStage);
  const std::vector<Tensor> all_params = tensors_of(bundle.model.parameters());
  std::vector<Tensor> trained = all_params;
  if (config.freeze_encoder) {
    NamedTensors head;
    bundle.model.answer_head.collect("answer_head", head);
    trained = tensors_of(head);
  }
  Adam opt(trained, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  const ForwardContext ctx{true, config.dropout, &rng};
  const std::size_t n = train.examples.size();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled(n, rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      Tensor total;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const Tensor logits = multiway::answer_logits(&images[i], questions[i], bundle.model, ctx);
        const Tensor loss = multiway::answer_loss(logits, options[i], targets[i]);
        total = total.defined() ? add(total, loss) : loss;
      }
      const Tensor loss_t = scale(total, 1.0 / static_cast<double>(end - start));
      ++step;
      for (Tensor p : all_params) p.zero_grad();
      const double loss = checked_loss(loss_t, "finetune", step);
      loss_t.backward();
      opt.step();
      result.losses.push_back(loss);
      report_step(observer, "finetune", step, loss);
    }
    const double acc = train_accuracy(bundle, train, images);
    result.train_accuracy.push_back(acc);
    if (observer.on_epoch) observer.on_epoch(epoch + 1, acc);
  }
  bundle.rng_state = rng.state();
  result.bundle = std::move(bundle);
  return result;
}

Evaluation score_predictions(const std::vector<std::pair<std::string, std::string>>& predictions,
                             const Dataset& gold, const metrics::Taxonomy* taxonomy) {
  if (gold.examples.empty()) throw ContractError("evaluation set is empty");
  std::map<std::string, std::string> by_id;
  for (const auto& [id, pred] : predictions) {
    if (!by_id.emplace(id, pred).second) {
      throw DatasetError("duplicate prediction for id " + id);
    }
  }
  Evaluation eval;
  std::set<std::string> used;
  bool all_typed = true;
  for (const QAPair& ex : gold.examples) {
    auto it = by_id.find(ex.id);
    if (it == by_id.end()) throw DatasetError("no prediction for id " + ex.id);
    used.insert(ex.id);
    Prediction p;
    p.id = ex.id;
    p.prediction = it->second;
    p.gold = ex.answer;
    p.type = ex.type;
    p.scores = metrics::score_example(p.prediction, p.gold, taxonomy);
    all_typed = all_typed && ex.type.has_value();
    eval.predictions.push_back(std::move(p));
  }
  if (used.size() != by_id.size()) {
    for (const auto& [id, pred] : by_id) {
      if (!used.count(id)) throw DatasetError("prediction for unknown id " + id);
    }
  }
  std::vector<metrics::ExampleScores> all;
  for (const Prediction& p : eval.predictions) all.push_back(p.scores);
  eval.overall = metrics::aggregate(all);
  if (all_typed) {
    for (QuestionType type : {QuestionType::Object, QuestionType::Number, QuestionType::Color,
                              QuestionType::Location}) {
      std::vector<metrics::ExampleScores> group;
      for (const Prediction& p : eval.predictions) {
        if (p.type == type) group.push_back(p.scores);
      }
      if (!group.empty()) eval.by_type.emplace_back(type, metrics::aggregate(group));
    }
  }
  return eval;
}

Evaluation evaluate(const ModelBundle& bundle, const Dataset& dataset,
                    const metrics::Taxonomy* taxonomy, bool oracle) {
  if (dataset.examples.empty()) throw ContractError("evaluation set is empty");
  std::vector<std::pair<std::string, std::string>> predictions;
  if (oracle) {
    for (const QAPair& ex : dataset.examples) predictions.emplace_back(ex.id, ex.answer);
  } else {
    const std::vector<Tensor> images = load_images(dataset, bundle.config);
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
      const QAPair& ex = dataset.examples[i];
      const text::TokenSeq q =
          encode_question(ex.question, bundle.vocab, bundle.config.max_text_len);
      const multiway::AnswerChoice choice =
          multiway::answer_select(&images[i], q, option_ids(ex, bundle), bundle.model);
      predictions.emplace_back(ex.id, bundle.answers[choice.answer]);
    }
  }
  return score_predictions(predictions, dataset, taxonomy);
}

std::string format_table(const Evaluation& eval) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %6s %9s %9s %9s %9s %9s %9s\n", "split", "n",
                "accuracy", "precision", "recall", "f1", "wups_0.0", "wups_0.9");
  out += line;
  auto row = [&](const std::string& name, const metrics::MetricsReport& r) {
    std::snprintf(line, sizeof(line), "%-10s %6zu %9.4f %9.4f %9.4f %9.4f %9s %9s\n",
                  name.c_str(), r.n_examples, r.accuracy, r.precision, r.recall, r.f1,
                  format_metric(r.wups_0).c_str(), format_metric(r.wups_9).c_str());
    out += line;
  };
  row("overall", eval.overall);
  for (const auto& [type, report] : eval.by_type) row(std::string(to_string(type)), report);
  return out;
}

std::string metrics_json(const Evaluation& eval) {
  nlohmann::ordered_json j;
  j["overall"] = report_json(eval.overall);
  nlohmann::ordered_json types = nlohmann::ordered_json::object();
  for (const auto& [type, report] : eval.by_type) {
    types[std::string(to_string(type))] = report_json(report);
  }
  j["by_type"] = types;
  return j.dump(2) + "\n";
}

std::string predictions_jsonl(const Evaluation& eval) {
  std::string out;
  for (const Prediction& p : eval.predictions) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["prediction"] = p.prediction;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_predictions(std::string_view text,
                                                                   const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DatasetError(where + "expected a JSON object");
    auto id = j.find("id");
    if (id == j.end()) throw DatasetError(where + "missing field \"id\"");
    std::string id_text;
    if (id->is_string()) {
      id_text = id->get<std::string>();
    } else if (id->is_number_integer()) {
      id_text = id->dump();
    } else {
      throw DatasetError(where + "field \"id\" must be a string or an integer");
    }
    auto pred = j.find("prediction");
    if (pred == j.end()) throw DatasetError(where + "missing field \"prediction\"");
    if (!pred->is_string()) throw DatasetError(where + "field \"prediction\" must be a string");
    out.emplace_back(std::move(id_text), pred->get<std::string>());
  }
  return out;
}

std::string format_trace_line(std::size_t step, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%zu\t%.17g\n", step, value);
  return buf;
}

}  // namespace mwvqa::pipeline
