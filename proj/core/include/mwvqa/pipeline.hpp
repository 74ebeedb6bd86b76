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

#ifndef MWVQA_PIPELINE_HPP_
#define MWVQA_PIPELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mwvqa/checkpoint.hpp"
#include "mwvqa/config.hpp"
#include "mwvqa/dataset.hpp"
#include "mwvqa/metrics.hpp"
#include "mwvqa/multiway.hpp"
#include "mwvqa/rng.hpp"
#include "mwvqa/text_tokenizer.hpp"
#include "mwvqa/vision_tokenizer.hpp"

namespace mwvqa::pipeline {

// Independent RNG stream per stage; stage 0 is Rng(seed) itself.
Rng stage_rng(std::uint64_t seed, std::uint64_t stage);

// Everything a checkpoint holds, in live form.
struct ModelBundle {
  RunConfig config;
  text::Vocab vocab;
  std::vector<std::string> answers;  // sorted; index = answer id
  vision::VqkdTokenizer tokenizer;
  multiway::MultiwayModel model;
  std::string rng_state;

  // Draws tokenizer then encoder parameters from `rng`.
  static ModelBundle initialize(const RunConfig& config, text::Vocab vocab,
                                std::vector<std::string> answers, Rng& rng);

  NamedTensors parameters() const;
  Checkpoint to_checkpoint() const;
  // Rebuilds the model from the stored config and checks every tensor
  // against it. Throws CheckpointShapeError on any mismatch.
  static ModelBundle from_checkpoint(const Checkpoint& checkpoint);

  std::optional<std::size_t> answer_id(std::string_view answer) const;
};

// Train and test data: the explicit test_dataset when configured, otherwise
// a seeded 8:2 split of dataset.
struct DataSplits {
  Dataset train;
  Dataset test;
};
DataSplits resolve_splits(const RunConfig& config);

// One decoded image per example, in example order.
std::vector<Tensor> load_images(const Dataset& dataset, const RunConfig& config);

// Question ids truncated to max_text_len.
text::TokenSeq encode_question(std::string_view question, const text::Vocab& vocab,
                               std::size_t max_len);

// Answer ids allowed for an example: its option list, or every answer.
// Throws DatasetError when an option is missing from the vocabulary.
std::vector<std::size_t> option_ids(const QAPair& pair, const ModelBundle& bundle);

struct TrainObserver {
  // trace is "vqkd", "mdm" or "finetune"; steps count from 1.
  std::function<void(std::string_view trace, std::size_t step, double loss)> on_step;
  // Finetuning only: train accuracy after each epoch, epochs count from 1.
  std::function<void(std::size_t epoch, double accuracy)> on_epoch;
};

struct PretrainResult {
  ModelBundle bundle;
  std::vector<double> vqkd_losses;
  std::vector<double> mdm_losses;
};

// VQ-KD tokenizer training against the synthetic teacher, then masked data
// modeling over paired, image-only and packed text-only sequences. Each
// stage runs config.epochs passes over the training split.
PretrainResult pretrain(const RunConfig& config, const TrainObserver& observer = {});

struct FinetuneResult {
  ModelBundle bundle;
  std::vector<double> losses;
  std::vector<double> train_accuracy;  // one entry per epoch
};

// Cross-entropy over each example's options on the answer head. Training
// keys come from `config`; shape keys from the bundle. With freeze_encoder
// only the answer head moves.
FinetuneResult finetune(const RunConfig& config, ModelBundle bundle,
                        const TrainObserver& observer = {});

// Fraction of examples whose selected answer equals the gold answer.
double train_accuracy(const ModelBundle& bundle, const Dataset& dataset,
                      const std::vector<Tensor>& images);

struct Prediction {
  std::string id;
  std::string prediction;
  std::string gold;
  std::optional<QuestionType> type;
  metrics::ExampleScores scores;
};

struct Evaluation {
  metrics::MetricsReport overall;
  // Present only when every example carries a type; in Object, Number,
  // Color, Location order, skipping types with no examples.
  std::vector<std::pair<QuestionType, metrics::MetricsReport>> by_type;
  std::vector<Prediction> predictions;
};

// Scores (id, prediction) pairs against the gold examples. Every gold id
// needs exactly one prediction. Throws ContractError for an empty set.
Evaluation score_predictions(const std::vector<std::pair<std::string, std::string>>& predictions,
                             const Dataset& gold, const metrics::Taxonomy* taxonomy);

// answer_select on every example; with oracle set, predictions are the gold
// answers.
Evaluation evaluate(const ModelBundle& bundle, const Dataset& dataset,
                    const metrics::Taxonomy* taxonomy, bool oracle = false);

// Fixed-width table, four decimals. WUPS columns read "-" when absent.
std::string format_table(const Evaluation& evaluation);
// Same fields as the table at full precision; absent WUPS values are null.
std::string metrics_json(const Evaluation& evaluation);
// One {"id", "prediction"} object per line.
std::string predictions_jsonl(const Evaluation& evaluation);
std::vector<std::pair<std::string, std::string>> parse_predictions(std::string_view text,
                                                                   const std::string& source);

// "step<TAB>loss" with 17 significant digits.
std::string format_trace_line(std::size_t step, double value);

}  // namespace mwvqa::pipeline

#endif  // MWVQA_PIPELINE_HPP_
