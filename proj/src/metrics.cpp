#include "ctxlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "ctxlab/error.hpp"
#include "ctxlab/parallel.hpp"

namespace ctxlab {

std::string_view to_string(MetricKind kind) {
  return kind == MetricKind::PCXMI ? "PCXMI" : "MaxPCXMI";
}

MetricKind parse_metric(std::string_view name) {
  if (name == "PCXMI") return MetricKind::PCXMI;
  if (name == "MaxPCXMI") return MetricKind::MaxPCXMI;
  fail(ErrorKind::Config, "unknown metric '" + std::string(name) + "'");
}

namespace {

// Copy of the sentence fields only; scoring never sees annotations.
ContextualExample sentences_only(const ContextualExample& ex) {
  ContextualExample bare;
  bare.id = ex.id;
  bare.src = ex.src;
  bare.tgt = ex.tgt;
  bare.src_ctx = ex.src_ctx;
  bare.tgt_ctx = ex.tgt_ctx;
  return bare;
}

}  // namespace

template <class Real>
std::vector<double> token_log_ratios(const ModelState<Real>& model, const Vocabulary& vocab,
                                     const ContextualExample& example) {
  const ContextualExample bare = sentences_only(example);
  const EncodedExample with_ctx = encode(bare, vocab);
  const EncodedExample without = encode(with_context_size(bare, 0), vocab);
  const LogProbMatrix lc = forward_logprobs(model, with_ctx.src_ids, with_ctx.tgt_ids);
  const LogProbMatrix lf = forward_logprobs(model, without.src_ids, without.tgt_ids);
  const std::size_t len = example.tgt.size();
  std::vector<double> ratios(len);
  for (std::size_t j = 0; j < len; ++j) {
    const std::size_t tc = with_ctx.current_start + j;
    const std::size_t tf = without.current_start + j;
    ratios[j] = lc.at(tc - 1, static_cast<std::size_t>(with_ctx.tgt_ids[tc])) -
                lf.at(tf - 1, static_cast<std::size_t>(without.tgt_ids[tf]));
  }
  return ratios;
}

ExampleScore make_score(std::int64_t id, std::vector<double> ratios) {
  if (ratios.empty()) fail(ErrorKind::Domain, "example has an empty current sentence");
  ExampleScore s;
  s.id = id;
  s.pcxmi = 0.0;
  for (double r : ratios) s.pcxmi += r;
  s.max_pcxmi = *std::max_element(ratios.begin(), ratios.end());
  s.token_ratios = std::move(ratios);
  return s;
}

template <class Real>
ExampleScore score_example(const ModelState<Real>& model, const Vocabulary& vocab,
                           const ContextualExample& example) {
  return make_score(example.id, token_log_ratios(model, vocab, example));
}

template <class Real>
double pcxmi(const ModelState<Real>& model, const Vocabulary& vocab,
             const ContextualExample& example) {
  double sum = 0.0;
  for (double r : token_log_ratios(model, vocab, example)) sum += r;
  return sum;
}

template <class Real>
double max_pcxmi(const ModelState<Real>& model, const Vocabulary& vocab,
                 const ContextualExample& example) {
  return score_example(model, vocab, example).max_pcxmi;
}

template <class Real>
std::vector<ExampleScore> score_corpus(const ModelState<Real>& model, const Vocabulary& vocab,
                                       const Corpus& corpus, std::size_t jobs) {
  std::vector<ExampleScore> out(corpus.size());
  parallel_for(corpus.size(), jobs,
               [&](std::size_t i) { out[i] = score_example(model, vocab, corpus[i]); });
  return out;
}

// --- BLEU ----------------------------------------------------------------------

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++counts[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                      s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

// sacreBLEU's stand-in for log(0).
double safe_log(double x) { return x == 0.0 ? -9999999999.0 : std::log(x); }

}  // namespace

BleuStats corpus_bleu_stats(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  if (hyps.size() != refs.size() || hyps.empty()) {
    fail(ErrorKind::Shape, "BLEU needs equally many (>0) hypotheses and references");
  }
  constexpr std::size_t kOrder = 4;
  std::array<std::size_t, kOrder> correct{}, total{};
  BleuStats stats;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    stats.hyp_len += hyps[i].size();
    stats.ref_len += refs[i].size();
    for (std::size_t n = 1; n <= kOrder; ++n) {
      const NgramCounts h = count_ngrams(hyps[i], n);
      const NgramCounts r = count_ngrams(refs[i], n);
      for (const auto& [gram, c] : h) {
        const auto it = r.find(gram);
        if (it != r.end()) correct[n - 1] += std::min(c, it->second);
      }
      if (hyps[i].size() >= n) total[n - 1] += hyps[i].size() - n + 1;
    }
  }
  if (stats.hyp_len == 0) {
    stats.brevity_penalty = 0.0;
    return stats;
  }
  double smooth = 1.0;
  for (std::size_t n = 0; n < kOrder; ++n) {
    if (total[n] == 0) break;
    if (correct[n] == 0) {
      smooth *= 2.0;
      stats.precisions[n] = 100.0 / (smooth * static_cast<double>(total[n]));
    } else {
      stats.precisions[n] =
          100.0 * static_cast<double>(correct[n]) / static_cast<double>(total[n]);
    }
  }
  if (stats.hyp_len < stats.ref_len) {
    stats.brevity_penalty = std::exp(1.0 - static_cast<double>(stats.ref_len) /
                                               static_cast<double>(stats.hyp_len));
  }
  double log_sum = 0.0;
  for (double p : stats.precisions) log_sum += safe_log(p);
  stats.score = stats.brevity_penalty * std::exp(log_sum / static_cast<double>(kOrder));
  return stats;
}

double corpus_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  return corpus_bleu_stats(hyps, refs).score;
}

// --- generative and contrastive evaluation -----------------------------------

bool matches_expected(const Sentence& translation, const std::string& expected_word) {
  return std::find(translation.begin(), translation.end(), expected_word) != translation.end();
}

template <class Real>
Sentence translate_current(const ModelState<Real>& model, const Vocabulary& vocab,
                           const ContextualExample& example, std::size_t beam_width) {
  const EncodedExample enc = encode(sentences_only(example), vocab);
  const std::vector<TokenId> out = decode(model, enc.src_ids, beam_width);
  return vocab.decode(split_on_separator(out));
}

template <class Real>
AccuracyTable phenomenon_accuracy(const ModelState<Real>& model, const Vocabulary& vocab,
                                  const Corpus& eval, std::size_t beam_width, std::size_t jobs) {
  for (const ContextualExample& ex : eval) {
    if (!ex.annotation) {
      fail(ErrorKind::Input, "evaluation example " + std::to_string(ex.id) + " is unannotated");
    }
  }
  std::vector<char> hit(eval.size(), 0);
  parallel_for(eval.size(), jobs, [&](std::size_t i) {
    hit[i] = matches_expected(translate_current(model, vocab, eval[i], beam_width),
                              eval[i].annotation->expected_word);
  });
  AccuracyTable table;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    KindAccuracy& k = table[eval[i].annotation->kind];
    ++k.total;
    k.correct += hit[i] ? 1 : 0;
  }
  return table;
}

template <class Real>
double bleu_on(const ModelState<Real>& model, const Vocabulary& vocab, const Corpus& corpus,
               std::size_t beam_width, std::size_t jobs) {
  std::vector<Sentence> hyps(corpus.size()), refs(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) {
    hyps[i] = translate_current(model, vocab, corpus[i], beam_width);
    refs[i] = corpus[i].tgt;
  });
  return corpus_bleu(hyps, refs);
}

std::vector<ContrastivePair> make_contrastive_pairs(const Corpus& corpus, const Lexicon& lex,
                                                    std::uint64_t seed) {
  Rng rng(derive_seed(seed, "contrastive"));
  std::vector<ContrastivePair> pairs;
  for (const ContextualExample& ex : corpus) {
    if (!ex.annotation) continue;
    const Annotation& a = *ex.annotation;
    std::vector<std::string> alternatives;
    switch (a.kind) {
      case PhenomenonKind::Gender:
        for (const std::string& p : lex.pronouns()) alternatives.push_back(p);
        break;
      case PhenomenonKind::Formality:
        alternatives = {lex.formal_you, lex.informal_you};
        break;
      case PhenomenonKind::Auxiliary:
        for (const std::string& v : lex.ellipsis_verbs) alternatives.push_back(target_form(v));
        break;
      case PhenomenonKind::None:
        break;
    }
    std::erase(alternatives, a.expected_word);
    if (alternatives.empty()) continue;
    ContrastivePair pair{ex, ex.tgt};
    const std::string& wrong = rng.pick(alternatives);
    for (std::size_t idx : a.target_indices) pair.contrastive_tgt[idx] = wrong;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void validate_pair(const ContrastivePair& pair) {
  const ContextualExample& ex = pair.example;
  if (!ex.annotation) fail(ErrorKind::Input, "contrastive pair without annotation");
  if (pair.contrastive_tgt.size() != ex.tgt.size()) {
    fail(ErrorKind::Input, "contrastive target differs in length");
  }
  const auto& idx = ex.annotation->target_indices;
  bool differs = false;
  for (std::size_t j = 0; j < ex.tgt.size(); ++j) {
    if (pair.contrastive_tgt[j] == ex.tgt[j]) continue;
    if (std::find(idx.begin(), idx.end(), j) == idx.end()) {
      fail(ErrorKind::Input, "contrastive target differs outside annotated tokens");
    }
    differs = true;
  }
  if (!differs) fail(ErrorKind::Input, "contrastive target equals the reference");
}

bool contrastive_correct(double reference_logprob, double contrastive_logprob) {
  return reference_logprob > contrastive_logprob;
}

template <class Real>
double contrastive_accuracy(const ModelState<Real>& model, const Vocabulary& vocab,
                            const std::vector<ContrastivePair>& pairs, std::size_t jobs) {
  if (pairs.empty()) fail(ErrorKind::Input, "no contrastive pairs");
  for (const ContrastivePair& p : pairs) validate_pair(p);
  std::vector<char> hit(pairs.size(), 0);
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    ContextualExample ref = sentences_only(pairs[i].example);
    ContextualExample alt = ref;
    alt.tgt = pairs[i].contrastive_tgt;
    const EncodedExample er = encode(ref, vocab);
    const EncodedExample ea = encode(alt, vocab);
    hit[i] = contrastive_correct(sequence_logprob(model, er.src_ids, er.tgt_ids, er.current_start),
                                 sequence_logprob(model, ea.src_ids, ea.tgt_ids, ea.current_start));
  });
  const auto correct = std::count(hit.begin(), hit.end(), 1);
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// --- reports -------------------------------------------------------------------

std::string metric_report_to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["strategy"] = r.strategy;
  j["seed"] = r.seed;
  j["density"] = r.density;
  j["dataset"] = r.dataset;
  nlohmann::ordered_json acc = nlohmann::ordered_json::object();
  for (const auto& [kind, a] : r.accuracy) {
    acc[std::string(to_string(kind))] = {
        {"accuracy", a.accuracy()}, {"correct", a.correct}, {"n", a.total}};
  }
  j["accuracy"] = std::move(acc);
  j["bleu"] = r.bleu;
  j["contrastive"] = r.contrastive;
  return j.dump(2) + "\n";
}

std::string metric_report_to_csv(const MetricReport& r, bool header) {
  std::ostringstream out;
  out.precision(17);
  if (header) out << "strategy,seed,density,kind,accuracy,n,bleu,contrastive\n";
  for (const auto& [kind, a] : r.accuracy) {
    out << r.strategy << ',' << r.seed << ',' << r.density << ',' << to_string(kind) << ','
        << a.accuracy() << ',' << a.total << ',' << r.bleu << ',' << r.contrastive << '\n';
  }
  return out.str();
}

#define CTXLAB_INSTANTIATE(Real)                                                          \
  template std::vector<double> token_log_ratios(const ModelState<Real>&, const Vocabulary&, \
                                                const ContextualExample&);                  \
  template ExampleScore score_example(const ModelState<Real>&, const Vocabulary&,         \
                                      const ContextualExample&);                          \
  template double pcxmi(const ModelState<Real>&, const Vocabulary&, const ContextualExample&); \
  template double max_pcxmi(const ModelState<Real>&, const Vocabulary&,                   \
                            const ContextualExample&);                                    \
  template std::vector<ExampleScore> score_corpus(const ModelState<Real>&, const Vocabulary&, \
                                                  const Corpus&, std::size_t);            \
  template Sentence translate_current(const ModelState<Real>&, const Vocabulary&,         \
                                      const ContextualExample&, std::size_t);             \
  template AccuracyTable phenomenon_accuracy(const ModelState<Real>&, const Vocabulary&,  \
                                             const Corpus&, std::size_t, std::size_t);    \
  template double bleu_on(const ModelState<Real>&, const Vocabulary&, const Corpus&,      \
                          std::size_t, std::size_t);                                      \
  template double contrastive_accuracy(const ModelState<Real>&, const Vocabulary&,        \
                                       const std::vector<ContrastivePair>&, std::size_t);

CTXLAB_INSTANTIATE(float)
CTXLAB_INSTANTIATE(double)
#undef CTXLAB_INSTANTIATE

}  // namespace ctxlab
