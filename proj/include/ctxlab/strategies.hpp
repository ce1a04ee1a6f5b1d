#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ctxlab/composition.hpp"
#include "ctxlab/metrics.hpp"
#include "ctxlab/model.hpp"
#include "ctxlab/rng.hpp"
#include "ctxlab/toy_corpus.hpp"

namespace ctxlab {

enum class StrategyKind {
  Baseline,
  Weighting,
  AnnotationFinetune,
  CoWordDropout,
  DivideAndRule,
  MetricSelection,
};

std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::Baseline;
  double lambda = 0.0;                 // Weighting
  double p = 0.0;                      // CoWordDropout
  std::size_t k = 0;                   // MetricSelection
  std::size_t finetune_epochs = 1;     // AnnotationFinetune, MetricSelection
  MetricKind metric = MetricKind::MaxPCXMI;
  std::size_t max_context = 3;         // context sizes expanded for training

  void validate() const;
};

std::string strategy_config_to_json(const StrategyConfig& config);
StrategyConfig strategy_config_from_json(std::string_view text);

// Replaces each current-source token with [MASK] with probability p.
ContextualExample coword_dropout(const ContextualExample& example, double p, Rng& rng);

// Moves the first floor(n/2) tokens of each current sentence into a new final
// context sentence. Annotated indices follow their tokens; indices that move
// into the context are dropped, and so is an annotation left without any.
ContextualExample divide_and_rule(const ContextualExample& example);

// Highest metric value first, ties by smaller id; returns min(k, n) examples
// in that order. Scores are matched to examples by id.
Corpus select_top_k(const std::vector<ExampleScore>& scores, std::size_t k,
                    const Corpus& corpus, MetricKind metric = MetricKind::MaxPCXMI);

// Copies with every annotation removed.
Corpus strip_annotations(const Corpus& corpus);

// Every example at its largest available context size, capped at max_context.
Corpus max_context_variants(const Corpus& corpus, std::size_t max_context = 3);

// Fine-tuning runs at the constant base learning rate, so e epochs in one
// call equal e single-epoch calls chained through the same state.
TrainStats finetune(Model& model, const Vocabulary& vocab, const Corpus& variants,
                    std::size_t epochs);

TrainStats finetune_on_annotated(Model& model, const Vocabulary& vocab, const Corpus& corpus,
                                 std::size_t epochs, std::size_t max_context = 3);

struct StrategyResult {
  Model model;
  std::size_t updates = 0;
  std::vector<std::int64_t> selected_ids;  // MetricSelection only
  std::vector<ExampleScore> scores;        // MetricSelection only, corpus order
};

// Baseline context-aware training on all context-size variants of corpus.
StrategyResult train_baseline(const Corpus& corpus, const Vocabulary& vocab,
                              const ModelConfig& config, std::size_t max_context = 3);

// Score, select and fine-tune on top of an already trained base model. The
// corpus is stripped of annotations before anything else sees it.
StrategyResult select_and_finetune(const Model& base, const Corpus& corpus,
                                   const Vocabulary& vocab, const StrategyConfig& strategy,
                                   std::size_t jobs = 1);

// The four-step pipeline: train on context-aware data, score, select top k,
// fine-tune on the maximum-context variants of the selection.
StrategyResult run_metric_selection(const Corpus& corpus, const Vocabulary& vocab,
                                    const ModelConfig& config, const StrategyConfig& strategy,
                                    std::size_t jobs = 1);

StrategyResult apply_strategy(const Corpus& corpus, const Vocabulary& vocab,
                              const ModelConfig& config, const StrategyConfig& strategy,
                              std::size_t jobs = 1);

// One JSON object per scored example: id, pcxmi, max_pcxmi, selected.
std::string provenance_jsonl(const StrategyResult& result);

}  // namespace ctxlab
