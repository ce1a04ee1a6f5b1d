#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctxlab/composition.hpp"
#include "ctxlab/model.hpp"
#include "ctxlab/toy_corpus.hpp"

namespace ctxlab {

enum class MetricKind { PCXMI, MaxPCXMI };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric(std::string_view name);

struct ExampleScore {
  std::int64_t id = 0;
  double pcxmi = 0.0;
  double max_pcxmi = 0.0;
  std::vector<double> token_ratios;  // one per current-sentence target token

  double value(MetricKind kind) const {
    return kind == MetricKind::PCXMI ? pcxmi : max_pcxmi;
  }
};

// Per-token log q(y_j | y_<j, x, C) - log q(y_j | y_<j, x) over the current
// target sentence. The contextual term is teacher-forced on the reference
// target context; the context-free term uses the zero-context encoding.
// Reads only the sentence fields, never the annotation.
template <class Real>
std::vector<double> token_log_ratios(const ModelState<Real>& model, const Vocabulary& vocab,
                                     const ContextualExample& example);

// Aggregates token ratios into an ExampleScore; an empty ratio list is a
// domain error because its maximum is undefined.
ExampleScore make_score(std::int64_t id, std::vector<double> ratios);

template <class Real>
ExampleScore score_example(const ModelState<Real>& model, const Vocabulary& vocab,
                           const ContextualExample& example);

template <class Real>
double pcxmi(const ModelState<Real>& model, const Vocabulary& vocab,
             const ContextualExample& example);

template <class Real>
double max_pcxmi(const ModelState<Real>& model, const Vocabulary& vocab,
                 const ContextualExample& example);

// One score per example, in corpus order. jobs > 1 scores in parallel.
template <class Real>
std::vector<ExampleScore> score_corpus(const ModelState<Real>& model, const Vocabulary& vocab,
                                       const Corpus& corpus, std::size_t jobs = 1);

// --- BLEU ----------------------------------------------------------------------

struct BleuStats {
  double score = 0.0;
  std::array<double, 4> precisions{};
  double brevity_penalty = 1.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

// Corpus BLEU with n-gram orders 1..4, brevity penalty and exponential
// smoothing of zero-match orders (the sacreBLEU default).
BleuStats corpus_bleu_stats(const std::vector<Sentence>& hypotheses,
                            const std::vector<Sentence>& references);
double corpus_bleu(const std::vector<Sentence>& hypotheses,
                   const std::vector<Sentence>& references);

// --- generative and contrastive evaluation -----------------------------------

// Whole-token, case-sensitive match of the expected word.
bool matches_expected(const Sentence& translation, const std::string& expected_word);

// Decodes with the example's full context and returns the current sentence.
template <class Real>
Sentence translate_current(const ModelState<Real>& model, const Vocabulary& vocab,
                           const ContextualExample& example, std::size_t beam_width);

struct KindAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const {
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  }
  friend bool operator==(const KindAccuracy&, const KindAccuracy&) = default;
};

using AccuracyTable = std::map<PhenomenonKind, KindAccuracy>;

template <class Real>
AccuracyTable phenomenon_accuracy(const ModelState<Real>& model, const Vocabulary& vocab,
                                  const Corpus& eval_corpus, std::size_t beam_width,
                                  std::size_t jobs = 1);

template <class Real>
double bleu_on(const ModelState<Real>& model, const Vocabulary& vocab, const Corpus& corpus,
               std::size_t beam_width, std::size_t jobs = 1);

struct ContrastivePair {
  ContextualExample example;  // reference translation in example.tgt
  Sentence contrastive_tgt;   // differs only at annotated indices
};

// One pair per annotated example: the expected word is swapped for a
// uniformly drawn wrong alternative of the same phenomenon.
std::vector<ContrastivePair> make_contrastive_pairs(const Corpus& corpus,
                                                    const Lexicon& lexicon,
                                                    std::uint64_t seed);

void validate_pair(const ContrastivePair& pair);

// Correct iff the reference outscores the contrastive variant strictly.
bool contrastive_correct(double reference_logprob, double contrastive_logprob);

template <class Real>
double contrastive_accuracy(const ModelState<Real>& model, const Vocabulary& vocab,
                            const std::vector<ContrastivePair>& pairs, std::size_t jobs = 1);

// --- reports -------------------------------------------------------------------

struct MetricReport {
  std::string strategy;
  std::uint64_t seed = 0;
  double density = 0.0;
  std::string dataset;
  AccuracyTable accuracy;
  double bleu = 0.0;
  double contrastive = 0.0;
};

std::string metric_report_to_json(const MetricReport& report);
// Header plus one row per phenomenon kind:
// strategy,seed,density,kind,accuracy,n,bleu,contrastive
std::string metric_report_to_csv(const MetricReport& report, bool header = true);

}  // namespace ctxlab
