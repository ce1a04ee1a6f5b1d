#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ctxlab/metrics.hpp"
#include "ctxlab/model.hpp"
#include "ctxlab/strategies.hpp"
#include "ctxlab/toy_corpus.hpp"

namespace ctxlab {

// Held-out sets share the training lexicon but never its id range.
struct EvalSizes {
  std::size_t per_kind = 500;  // annotated examples per contextual kind
  std::size_t bleu = 500;      // plain examples
};

struct SweepConfig {
  PhenomenonKind kind = PhenomenonKind::Gender;
  std::vector<double> densities{0.0, 0.02, 0.05, 0.10};
  std::size_t total = 5000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::uint64_t data_seed = 7;
  // Examples in the enriched pool; 0 sizes it for the largest density.
  std::size_t enriched_pool = 0;
  std::size_t max_context = 3;
  ModelConfig model;
  EvalSizes eval;
  std::size_t beam_width = 1;
  std::size_t jobs = 1;

  void validate() const;
};

std::string sweep_config_to_json(const SweepConfig& config);
SweepConfig sweep_config_from_json(std::string_view text);

struct MethodsConfig {
  // Formality and Auxiliary are easier to learn than Gender; at 150 each they
  // saturate the baseline and leave nothing for a strategy to improve.
  std::map<PhenomenonKind, std::size_t> counts{{PhenomenonKind::Gender, 150},
                                               {PhenomenonKind::Formality, 25},
                                               {PhenomenonKind::Auxiliary, 25},
                                               {PhenomenonKind::None, 4800}};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::uint64_t data_seed = 7;
  std::size_t max_context = 3;
  ModelConfig model;
  EvalSizes eval;
  std::size_t beam_width = 1;
  std::size_t jobs = 1;
  std::vector<double> lambdas{2.0, 5.0, 10.0};
  std::vector<double> dropout_ps{0.1, 0.2, 0.3};
  std::vector<std::size_t> finetune_epochs{1, 2, 5};
  bool divide_and_rule = true;
  bool annotation_finetune = true;
  std::vector<MetricKind> metrics{MetricKind::MaxPCXMI};
  std::size_t k = 0;  // 0: number of annotated training examples

  void validate() const;
};

std::string methods_config_to_json(const MethodsConfig& config);
MethodsConfig methods_config_from_json(std::string_view text);

struct ReportRow {
  std::string strategy;       // e.g. "Baseline", "Weighting lambda=5"
  std::string kind_enriched;  // enriched phenomenon, or "mix"
  double density = 0.0;
  std::uint64_t seed = 0;
  AccuracyTable accuracy;     // contextual kinds
  double bleu = 0.0;
  double contrastive = 0.0;
  std::size_t updates = 0;
  std::string error;          // non-empty when the cell failed

  double accuracy_of(PhenomenonKind kind) const;
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;

  // Orders rows by (strategy, density, seed).
  void normalize();
  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single seed
};

MeanStd mean_std(const std::vector<double>& values);

struct CellSummary {
  std::string strategy;
  std::string kind_enriched;
  double density = 0.0;
  std::size_t seeds = 0;
  std::map<PhenomenonKind, MeanStd> accuracy;
  MeanStd bleu;
  MeanStd contrastive;
  double updates = 0.0;
};

// Seed aggregation over rows without errors, one summary per
// (strategy, density) in normalized order.
std::vector<CellSummary> aggregate(const ExperimentReport& report);

// Mean differences from the Baseline cell; the Baseline row is all zeros.
struct DeltaRow {
  std::string strategy;
  std::map<PhenomenonKind, double> accuracy;
  double mean_accuracy = 0.0;  // over contextual kinds
  double bleu = 0.0;
  double contrastive = 0.0;
  double updates = 0.0;
};

std::vector<DeltaRow> deltas_vs_baseline(const ExperimentReport& report);

// Evaluation of one trained model on the held-out sets.
struct EvalSets {
  Corpus contextual;
  Corpus plain;
  std::vector<ContrastivePair> contrastive;
};

EvalSets make_eval_sets(const Lexicon& lexicon, const EvalSizes& sizes, std::uint64_t seed,
                        std::size_t max_context);
void evaluate_into(ReportRow& row, const Model& model, const Vocabulary& vocab,
                   const EvalSets& sets, std::size_t beam_width);

ExperimentReport run_density_sweep(const SweepConfig& config);
// The training corpus shared by every seed of a comparison; the lexicon is
// build_lexicon({}, config.data_seed).
Corpus methods_corpus(const MethodsConfig& config, const Lexicon& lexicon);
ExperimentReport run_method_comparison(const MethodsConfig& config);

enum class ReportFormat { Csv, Json, Svg };
ReportFormat parse_report_format(std::string_view name);

std::string report_to_csv(const ExperimentReport& report);
ExperimentReport report_from_csv(std::string_view text);
std::string report_to_json(const ExperimentReport& report);
std::string report_to_svg(const ExperimentReport& report);
void emit_report(const ExperimentReport& report, ReportFormat format, const std::string& path);

}  // namespace ctxlab
