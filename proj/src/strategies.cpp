#include "ctxlab/strategies.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <span>

#include "json.hpp"

#include "ctxlab/error.hpp"

namespace ctxlab {

namespace {

constexpr std::array<std::pair<StrategyKind, std::string_view>, 6> kStrategyNames{{
    {StrategyKind::Baseline, "Baseline"},
    {StrategyKind::Weighting, "Weighting"},
    {StrategyKind::AnnotationFinetune, "AnnotationFinetune"},
    {StrategyKind::CoWordDropout, "CoWordDropout"},
    {StrategyKind::DivideAndRule, "DivideAndRule"},
    {StrategyKind::MetricSelection, "MetricSelection"},
}};

}  // namespace

std::string_view to_string(StrategyKind kind) {
  for (const auto& [k, name] : kStrategyNames) {
    if (k == kind) return name;
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames) {
    if (n == name) return k;
  }
  fail(ErrorKind::Config, "unknown strategy '" + std::string(name) + "'");
}

void StrategyConfig::validate() const {
  if (!(lambda >= 0.0)) fail(ErrorKind::Config, "lambda must be >= 0");
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::Config, "p must lie in [0, 1]");
  if (kind == StrategyKind::MetricSelection && k == 0) {
    fail(ErrorKind::Config, "MetricSelection needs k >= 1");
  }
}

std::string strategy_config_to_json(const StrategyConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(c.kind));
  j["lambda"] = c.lambda;
  j["p"] = c.p;
  j["k"] = c.k;
  j["finetune_epochs"] = c.finetune_epochs;
  j["metric"] = std::string(to_string(c.metric));
  j["max_context"] = c.max_context;
  return j.dump(2) + "\n";
}

StrategyConfig strategy_config_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("strategy config: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind")) fail(ErrorKind::Config, "strategy config needs 'kind'");
  StrategyConfig c;
  try {
    c.kind = parse_strategy(j.at("kind").get<std::string>());
    auto require = [&](const char* key) {
      if (!j.contains(key)) {
        fail(ErrorKind::Config, std::string(to_string(c.kind)) + " needs '" + key + "'");
      }
    };
    switch (c.kind) {
      case StrategyKind::Weighting: require("lambda"); break;
      case StrategyKind::CoWordDropout: require("p"); break;
      case StrategyKind::MetricSelection: require("k"); break;
      default: break;
    }
    c.lambda = j.value("lambda", c.lambda);
    c.p = j.value("p", c.p);
    c.k = j.value("k", c.k);
    c.finetune_epochs = j.value("finetune_epochs", c.finetune_epochs);
    c.max_context = j.value("max_context", c.max_context);
    if (j.contains("metric")) c.metric = parse_metric(j.at("metric").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("strategy config: ") + e.what());
  }
  c.validate();
  return c;
}

ContextualExample coword_dropout(const ContextualExample& example, double p, Rng& rng) {
  ContextualExample out = example;
  for (std::string& w : out.src) {
    if (rng.bernoulli(p)) w = kMaskToken;
  }
  return out;
}

ContextualExample divide_and_rule(const ContextualExample& example) {
  if (example.src.size() < 2 || example.tgt.size() < 2) return example;
  const auto ns = static_cast<std::ptrdiff_t>(example.src.size() / 2);
  const auto nt = static_cast<std::ptrdiff_t>(example.tgt.size() / 2);
  ContextualExample out;
  out.id = example.id;
  out.src_ctx = example.src_ctx;
  out.tgt_ctx = example.tgt_ctx;
  out.src_ctx.emplace_back(example.src.begin(), example.src.begin() + ns);
  out.tgt_ctx.emplace_back(example.tgt.begin(), example.tgt.begin() + nt);
  out.src.assign(example.src.begin() + ns, example.src.end());
  out.tgt.assign(example.tgt.begin() + nt, example.tgt.end());
  if (example.annotation) {
    Annotation a = *example.annotation;
    a.target_indices.clear();
    for (std::size_t idx : example.annotation->target_indices) {
      if (idx >= static_cast<std::size_t>(nt)) a.target_indices.push_back(idx - static_cast<std::size_t>(nt));
    }
    a.antecedent_distance += 1;
    if (!a.target_indices.empty()) out.annotation = std::move(a);
  }
  return out;
}

Corpus select_top_k(const std::vector<ExampleScore>& scores, std::size_t k, const Corpus& corpus,
                    MetricKind metric) {
  std::map<std::int64_t, const ContextualExample*> by_id;
  for (const ContextualExample& ex : corpus) by_id.emplace(ex.id, &ex);
  std::vector<const ExampleScore*> ranked;
  ranked.reserve(scores.size());
  for (const ExampleScore& s : scores) {
    if (!by_id.count(s.id)) fail(ErrorKind::Input, "score for unknown id " + std::to_string(s.id));
    ranked.push_back(&s);
  }
  std::sort(ranked.begin(), ranked.end(), [metric](const ExampleScore* a, const ExampleScore* b) {
    const double va = a->value(metric), vb = b->value(metric);
    if (va != vb) return va > vb;
    return a->id < b->id;
  });
  Corpus out;
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) out.push_back(*by_id.at(ranked[i]->id));
  return out;
}

Corpus strip_annotations(const Corpus& corpus) {
  Corpus out = corpus;
  for (ContextualExample& ex : out) ex.annotation.reset();
  return out;
}

Corpus max_context_variants(const Corpus& corpus, std::size_t max_context) {
  Corpus out;
  out.reserve(corpus.size());
  for (const ContextualExample& ex : corpus) {
    out.push_back(with_context_size(ex, std::min(ex.context_size(), max_context)));
  }
  return out;
}

TrainStats finetune(Model& model, const Vocabulary& vocab, const Corpus& variants,
                    std::size_t epochs) {
  if (epochs == 0) return {};
  const bool decay = model.config.lr_decay;
  model.config.lr_decay = false;
  TrainStats stats;
  try {
    stats = train(model, vocab, std::span<const ContextualExample>(variants), {}, epochs);
  } catch (...) {
    model.config.lr_decay = decay;
    throw;
  }
  model.config.lr_decay = decay;
  return stats;
}

TrainStats finetune_on_annotated(Model& model, const Vocabulary& vocab, const Corpus& corpus,
                                 std::size_t epochs, std::size_t max_context) {
  Corpus annotated;
  for (const ContextualExample& ex : corpus) {
    if (ex.annotation) annotated.push_back(ex);
  }
  if (annotated.empty()) fail(ErrorKind::Input, "corpus has no annotated examples");
  return finetune(model, vocab, max_context_variants(annotated, max_context), epochs);
}

namespace {

StrategyResult train_with(const Corpus& corpus, const Vocabulary& vocab, ModelConfig config,
                          std::size_t max_context, const ExampleTransform& transform) {
  config.vocab_size = vocab.size();
  const Corpus variants = expand_context_sizes(corpus, max_context);
  StrategyResult r{init_model<float>(config), 0, {}, {}};
  r.updates = train(r.model, vocab, std::span<const ContextualExample>(variants), transform).updates;
  return r;
}

}  // namespace

StrategyResult train_baseline(const Corpus& corpus, const Vocabulary& vocab,
                              const ModelConfig& config, std::size_t max_context) {
  return train_with(corpus, vocab, config, max_context, {});
}

StrategyResult select_and_finetune(const Model& base, const Corpus& corpus,
                                   const Vocabulary& vocab, const StrategyConfig& strategy,
                                   std::size_t jobs) {
  // Everything below works on sentences only.
  const Corpus sentences = strip_annotations(corpus);
  StrategyResult r{base, 0, {}, score_corpus(base, vocab, sentences, jobs)};
  const Corpus selected = select_top_k(r.scores, strategy.k, sentences, strategy.metric);
  for (const ContextualExample& ex : selected) r.selected_ids.push_back(ex.id);
  r.updates = finetune(r.model, vocab, max_context_variants(selected, strategy.max_context),
                       strategy.finetune_epochs)
                  .updates;
  return r;
}

StrategyResult run_metric_selection(const Corpus& corpus, const Vocabulary& vocab,
                                    const ModelConfig& config, const StrategyConfig& strategy,
                                    std::size_t jobs) {
  strategy.validate();
  const Corpus sentences = strip_annotations(corpus);
  StrategyResult base = train_baseline(sentences, vocab, config, strategy.max_context);
  StrategyResult r = select_and_finetune(base.model, sentences, vocab, strategy, jobs);
  r.updates += base.updates;
  return r;
}

StrategyResult apply_strategy(const Corpus& corpus, const Vocabulary& vocab,
                              const ModelConfig& config, const StrategyConfig& strategy,
                              std::size_t jobs) {
  strategy.validate();
  if (config.weighting && strategy.kind != StrategyKind::Weighting) {
    fail(ErrorKind::Config, "model config enables weighting for strategy " +
                                std::string(to_string(strategy.kind)));
  }
  switch (strategy.kind) {
    case StrategyKind::Baseline:
      return train_baseline(corpus, vocab, config, strategy.max_context);
    case StrategyKind::Weighting: {
      ModelConfig weighted = config;
      weighted.weighting = true;
      weighted.lambda = strategy.lambda;
      return train_baseline(corpus, vocab, weighted, strategy.max_context);
    }
    case StrategyKind::CoWordDropout: {
      const double p = strategy.p;
      return train_with(corpus, vocab, config, strategy.max_context,
                        [p](const ContextualExample& ex, Rng& rng) {
                          return coword_dropout(ex, p, rng);
                        });
    }
    case StrategyKind::DivideAndRule:
      return train_with(corpus, vocab, config, strategy.max_context,
                        [](const ContextualExample& ex, Rng&) { return divide_and_rule(ex); });
    case StrategyKind::AnnotationFinetune: {
      StrategyResult r = train_baseline(corpus, vocab, config, strategy.max_context);
      r.updates += finetune_on_annotated(r.model, vocab, corpus, strategy.finetune_epochs,
                                         strategy.max_context)
                       .updates;
      return r;
    }
    case StrategyKind::MetricSelection:
      return run_metric_selection(corpus, vocab, config, strategy, jobs);
  }
  fail(ErrorKind::Config, "unhandled strategy");
}

std::string provenance_jsonl(const StrategyResult& result) {
  const std::set<std::int64_t> chosen(result.selected_ids.begin(), result.selected_ids.end());
  std::string out;
  for (const ExampleScore& s : result.scores) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["pcxmi"] = s.pcxmi;
    j["max_pcxmi"] = s.max_pcxmi;
    j["selected"] = chosen.count(s.id) > 0;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace ctxlab
