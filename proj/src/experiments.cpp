#include "ctxlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "ctxlab/composition.hpp"
#include "ctxlab/error.hpp"
#include "ctxlab/io.hpp"
#include "ctxlab/parallel.hpp"

namespace ctxlab {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::int64_t kContextualEvalOffset = 10'000'000;
constexpr std::int64_t kPlainEvalOffset = 20'000'000;

nlohmann::json parse_config(std::string_view text, const char* what) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object()) fail(ErrorKind::Config, std::string(what) + " must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string(what) + ": " + e.what());
  }
}

ModelConfig model_from(const nlohmann::json& j) {
  return j.contains("model") ? model_config_from_json(j.at("model").dump()) : ModelConfig{};
}

ojson model_to(const ModelConfig& c) { return ojson::parse(model_config_to_json(c)); }

void read_eval(const nlohmann::json& j, EvalSizes& e) {
  if (!j.contains("eval")) return;
  const auto& ev = j.at("eval");
  e.per_kind = ev.value("per_kind", e.per_kind);
  e.bleu = ev.value("bleu", e.bleu);
}

std::string clean_message(std::string msg) {
  for (char& c : msg) {
    if (c == ',' ) c = ';';
    if (c == '\n' || c == '\r') c = ' ';
    if (c == '"') c = '\'';
  }
  return msg.empty() ? "error" : msg;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string label(std::string_view base, std::string_view param, double value) {
  std::ostringstream out;
  out << base << ' ' << param << '=' << value;
  return out.str();
}

void check_disjoint(const Corpus& train, const EvalSets& eval) {
  std::set<std::int64_t> ids;
  for (const ContextualExample& ex : train) ids.insert(ex.id);
  for (const Corpus* c : {&eval.contextual, &eval.plain}) {
    for (const ContextualExample& ex : *c) {
      if (ids.count(ex.id)) {
        fail(ErrorKind::Input, "held-out id " + std::to_string(ex.id) + " also in training");
      }
    }
  }
}

}  // namespace

// --- configs -------------------------------------------------------------------

void SweepConfig::validate() const {
  if (seeds.empty()) fail(ErrorKind::Config, "sweep needs at least one seed");
  if (densities.empty()) fail(ErrorKind::Config, "sweep needs at least one density");
  if (kind == PhenomenonKind::None) fail(ErrorKind::Config, "sweep kind must be contextual");
  for (std::size_t i = 0; i < densities.size(); ++i) {
    if (!(densities[i] >= 0.0 && densities[i] <= 1.0)) {
      fail(ErrorKind::Config, "densities must lie in [0, 1]");
    }
    if (i > 0 && !(densities[i] > densities[i - 1])) {
      fail(ErrorKind::Config, "densities must be strictly ascending");
    }
  }
  if (total == 0) fail(ErrorKind::Config, "sweep total must be positive");
}

std::string sweep_config_to_json(const SweepConfig& c) {
  ojson j;
  j["kind"] = std::string(to_string(c.kind));
  j["densities"] = c.densities;
  j["total"] = c.total;
  j["seeds"] = c.seeds;
  j["data_seed"] = c.data_seed;
  j["enriched_pool"] = c.enriched_pool;
  j["max_context"] = c.max_context;
  j["model"] = model_to(c.model);
  j["eval"] = {{"per_kind", c.eval.per_kind}, {"bleu", c.eval.bleu}};
  j["beam_width"] = c.beam_width;
  j["jobs"] = c.jobs;
  return j.dump(2) + "\n";
}

SweepConfig sweep_config_from_json(std::string_view text) {
  const nlohmann::json j = parse_config(text, "sweep config");
  SweepConfig c;
  try {
    if (j.contains("kind")) c.kind = parse_kind(j.at("kind").get<std::string>());
    c.densities = j.value("densities", c.densities);
    c.total = j.value("total", c.total);
    c.seeds = j.value("seeds", c.seeds);
    c.data_seed = j.value("data_seed", c.data_seed);
    c.enriched_pool = j.value("enriched_pool", c.enriched_pool);
    c.max_context = j.value("max_context", c.max_context);
    c.model = model_from(j);
    read_eval(j, c.eval);
    c.beam_width = j.value("beam_width", c.beam_width);
    c.jobs = j.value("jobs", c.jobs);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("sweep config: ") + e.what());
  }
  c.validate();
  return c;
}

void MethodsConfig::validate() const {
  if (seeds.empty()) fail(ErrorKind::Config, "comparison needs at least one seed");
  std::size_t annotated = 0;
  for (const auto& [kind, n] : counts) {
    if (kind != PhenomenonKind::None) annotated += n;
  }
  if (annotated == 0) fail(ErrorKind::Config, "comparison corpus needs annotated examples");
  for (double l : lambdas) {
    if (!(l >= 0.0)) fail(ErrorKind::Config, "lambda must be >= 0");
  }
  for (double p : dropout_ps) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::Config, "p must lie in [0, 1]");
  }
}

std::string methods_config_to_json(const MethodsConfig& c) {
  ojson j;
  ojson counts = ojson::object();
  for (const auto& [kind, n] : c.counts) counts[std::string(to_string(kind))] = n;
  j["counts"] = std::move(counts);
  j["seeds"] = c.seeds;
  j["data_seed"] = c.data_seed;
  j["max_context"] = c.max_context;
  j["model"] = model_to(c.model);
  j["eval"] = {{"per_kind", c.eval.per_kind}, {"bleu", c.eval.bleu}};
  j["beam_width"] = c.beam_width;
  j["jobs"] = c.jobs;
  j["lambdas"] = c.lambdas;
  j["dropout_ps"] = c.dropout_ps;
  j["finetune_epochs"] = c.finetune_epochs;
  j["divide_and_rule"] = c.divide_and_rule;
  j["annotation_finetune"] = c.annotation_finetune;
  std::vector<std::string> metrics;
  for (MetricKind m : c.metrics) metrics.emplace_back(to_string(m));
  j["metrics"] = metrics;
  j["k"] = c.k;
  return j.dump(2) + "\n";
}

MethodsConfig methods_config_from_json(std::string_view text) {
  const nlohmann::json j = parse_config(text, "methods config");
  MethodsConfig c;
  try {
    if (j.contains("counts")) {
      c.counts.clear();
      for (const auto& [name, n] : j.at("counts").items()) {
        c.counts[parse_kind(name)] = n.get<std::size_t>();
      }
    }
    c.seeds = j.value("seeds", c.seeds);
    c.data_seed = j.value("data_seed", c.data_seed);
    c.max_context = j.value("max_context", c.max_context);
    c.model = model_from(j);
    read_eval(j, c.eval);
    c.beam_width = j.value("beam_width", c.beam_width);
    c.jobs = j.value("jobs", c.jobs);
    c.lambdas = j.value("lambdas", c.lambdas);
    c.dropout_ps = j.value("dropout_ps", c.dropout_ps);
    c.finetune_epochs = j.value("finetune_epochs", c.finetune_epochs);
    c.divide_and_rule = j.value("divide_and_rule", c.divide_and_rule);
    c.annotation_finetune = j.value("annotation_finetune", c.annotation_finetune);
    if (j.contains("metrics")) {
      c.metrics.clear();
      for (const auto& m : j.at("metrics")) c.metrics.push_back(parse_metric(m.get<std::string>()));
    }
    c.k = j.value("k", c.k);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("methods config: ") + e.what());
  }
  c.validate();
  return c;
}

// --- rows and aggregation -----------------------------------------------------------

double ReportRow::accuracy_of(PhenomenonKind kind) const {
  const auto it = accuracy.find(kind);
  return it == accuracy.end() ? 0.0 : it->second.accuracy();
}

void ExperimentReport::normalize() {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.strategy, a.density, a.seed) < std::tie(b.strategy, b.density, b.seed);
  });
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd r;
  if (values.empty()) return r;
  const double n = static_cast<double>(values.size());
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

std::vector<CellSummary> aggregate(const ExperimentReport& report) {
  ExperimentReport sorted = report;
  sorted.normalize();
  std::vector<CellSummary> out;
  std::size_t i = 0;
  while (i < sorted.rows.size()) {
    std::size_t j = i;
    while (j < sorted.rows.size() && sorted.rows[j].strategy == sorted.rows[i].strategy &&
           sorted.rows[j].density == sorted.rows[i].density) {
      ++j;
    }
    CellSummary cell;
    cell.strategy = sorted.rows[i].strategy;
    cell.kind_enriched = sorted.rows[i].kind_enriched;
    cell.density = sorted.rows[i].density;
    std::map<PhenomenonKind, std::vector<double>> acc;
    std::vector<double> bleu, contrastive, updates;
    for (std::size_t r = i; r < j; ++r) {
      const ReportRow& row = sorted.rows[r];
      if (!row.error.empty()) continue;
      for (const auto& [kind, a] : row.accuracy) acc[kind].push_back(a.accuracy());
      bleu.push_back(row.bleu);
      contrastive.push_back(row.contrastive);
      updates.push_back(static_cast<double>(row.updates));
    }
    cell.seeds = bleu.size();
    for (const auto& [kind, v] : acc) cell.accuracy[kind] = mean_std(v);
    cell.bleu = mean_std(bleu);
    cell.contrastive = mean_std(contrastive);
    cell.updates = mean_std(updates).mean;
    out.push_back(std::move(cell));
    i = j;
  }
  return out;
}

namespace {

double mean_contextual(const std::map<PhenomenonKind, MeanStd>& acc) {
  if (acc.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [kind, m] : acc) sum += m.mean;
  return sum / static_cast<double>(acc.size());
}

}  // namespace

std::vector<DeltaRow> deltas_vs_baseline(const ExperimentReport& report) {
  const std::vector<CellSummary> cells = aggregate(report);
  const auto base = std::find_if(cells.begin(), cells.end(),
                                 [](const CellSummary& c) { return c.strategy == "Baseline"; });
  if (base == cells.end()) fail(ErrorKind::Input, "report has no Baseline cell");
  std::vector<DeltaRow> out;
  for (const CellSummary& c : cells) {
    DeltaRow d;
    d.strategy = c.strategy;
    for (const auto& [kind, m] : c.accuracy) {
      const auto b = base->accuracy.find(kind);
      d.accuracy[kind] = m.mean - (b == base->accuracy.end() ? 0.0 : b->second.mean);
    }
    d.mean_accuracy = mean_contextual(c.accuracy) - mean_contextual(base->accuracy);
    d.bleu = c.bleu.mean - base->bleu.mean;
    d.contrastive = c.contrastive.mean - base->contrastive.mean;
    d.updates = c.updates - base->updates;
    out.push_back(std::move(d));
  }
  return out;
}

// --- evaluation -------------------------------------------------------------------------

EvalSets make_eval_sets(const Lexicon& lexicon, const EvalSizes& sizes, std::uint64_t seed,
                        std::size_t max_context) {
  EvalSets sets;
  CorpusSpec contextual;
  for (PhenomenonKind kind : kContextualKinds) contextual.counts[kind] = sizes.per_kind;
  contextual.max_context = max_context;
  contextual.seed = derive_seed(seed, "eval-contextual");
  contextual.id_offset = kContextualEvalOffset;
  sets.contextual = generate_corpus(contextual, lexicon);
  CorpusSpec plain;
  plain.counts[PhenomenonKind::None] = sizes.bleu;
  plain.max_context = max_context;
  plain.seed = derive_seed(seed, "eval-plain");
  plain.id_offset = kPlainEvalOffset;
  sets.plain = generate_corpus(plain, lexicon);
  sets.contrastive =
      make_contrastive_pairs(sets.contextual, lexicon, derive_seed(seed, "eval-contrastive"));
  return sets;
}

void evaluate_into(ReportRow& row, const Model& model, const Vocabulary& vocab,
                   const EvalSets& sets, std::size_t beam_width) {
  if (!sets.contextual.empty()) {
    row.accuracy = phenomenon_accuracy(model, vocab, sets.contextual, beam_width);
  }
  if (!sets.plain.empty()) row.bleu = bleu_on(model, vocab, sets.plain, beam_width);
  if (!sets.contrastive.empty()) {
    row.contrastive = contrastive_accuracy(model, vocab, sets.contrastive);
  }
}

// --- density sweep -------------------------------------------------------------------

ExperimentReport run_density_sweep(const SweepConfig& config) {
  config.validate();
  const Lexicon lexicon = build_lexicon(LexiconConfig{}, config.data_seed);
  const Vocabulary vocab = build_vocabulary(lexicon);
  const std::string enriched(to_string(config.kind));
  const std::string plain(to_string(PhenomenonKind::None));

  auto count_for = [&](double d) {
    return static_cast<std::size_t>(std::llround(d * static_cast<double>(config.total)));
  };
  CorpusSpec spec;
  spec.counts[config.kind] =
      config.enriched_pool ? config.enriched_pool : count_for(config.densities.back());
  spec.counts[PhenomenonKind::None] = config.total;
  spec.max_context = config.max_context;
  spec.seed = derive_seed(config.data_seed, "sweep-pools");
  const Corpus all = generate_corpus(spec, lexicon);
  const PoolMap pools{{enriched, filter_kind(all, config.kind)},
                      {plain, filter_kind(all, PhenomenonKind::None)}};
  const EvalSets eval = make_eval_sets(lexicon, config.eval, config.data_seed, config.max_context);

  struct Cell {
    double density;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double d : config.densities) {
    for (std::uint64_t s : config.seeds) cells.push_back({d, s});
  }
  std::vector<ReportRow> rows(cells.size());
  parallel_for(cells.size(), config.jobs, [&](std::size_t i) {
    ReportRow& row = rows[i];
    row.strategy = "Baseline";
    row.kind_enriched = enriched;
    row.density = cells[i].density;
    row.seed = cells[i].seed;
    try {
      const std::size_t n = count_for(cells[i].density);
      CompositionSpec comp;
      comp.seed = derive_seed(config.data_seed, "sweep-compose", cells[i].seed);
      comp.parts = {{enriched, n}, {plain, config.total - n}};
      const Corpus train_corpus = compose(pools, comp);
      check_disjoint(train_corpus, eval);
      ModelConfig mc = config.model;
      mc.seed = cells[i].seed;
      StrategyResult r = train_baseline(train_corpus, vocab, mc, config.max_context);
      row.updates = r.updates;
      evaluate_into(row, r.model, vocab, eval, config.beam_width);
    } catch (const std::exception& e) {
      row.accuracy.clear();
      row.error = clean_message(e.what());
    }
  });
  ExperimentReport report{std::move(rows)};
  report.normalize();
  return report;
}

// --- method comparison ---------------------------------------------------------------

Corpus methods_corpus(const MethodsConfig& config, const Lexicon& lexicon) {
  CorpusSpec spec;
  spec.counts = config.counts;
  spec.max_context = config.max_context;
  spec.seed = derive_seed(config.data_seed, "methods-corpus");
  return generate_corpus(spec, lexicon);
}

ExperimentReport run_method_comparison(const MethodsConfig& config) {
  config.validate();
  const Lexicon lexicon = build_lexicon(LexiconConfig{}, config.data_seed);
  const Vocabulary vocab = build_vocabulary(lexicon);
  const Corpus corpus = methods_corpus(config, lexicon);
  const EvalSets eval = make_eval_sets(lexicon, config.eval, config.data_seed, config.max_context);
  check_disjoint(corpus, eval);

  std::size_t annotated = 0;
  for (const ContextualExample& ex : corpus) annotated += ex.annotation ? 1 : 0;
  const double density = static_cast<double>(annotated) / static_cast<double>(corpus.size());
  std::vector<std::size_t> epochs = config.finetune_epochs;
  std::sort(epochs.begin(), epochs.end());
  epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());

  std::vector<std::string> labels{"Baseline"};
  for (double l : config.lambdas) labels.push_back(label("Weighting", "lambda", l));
  for (double p : config.dropout_ps) labels.push_back(label("CoWord", "p", p));
  if (config.divide_and_rule) labels.push_back("DivideAndRule");
  for (std::size_t e : epochs) {
    if (config.annotation_finetune) labels.push_back(label("AnnotationFinetune", "e", static_cast<double>(e)));
  }
  for (MetricKind m : config.metrics) {
    for (std::size_t e : epochs) labels.push_back(label(to_string(m), "e", static_cast<double>(e)));
  }

  std::vector<std::vector<ReportRow>> per_seed(config.seeds.size());
  parallel_for(config.seeds.size(), config.jobs, [&](std::size_t si) {
    const std::uint64_t seed = config.seeds[si];
    std::vector<ReportRow>& rows = per_seed[si];
    auto emit = [&](const std::string& name, const Model& model, std::size_t updates) {
      ReportRow row;
      row.strategy = name;
      row.kind_enriched = "mix";
      row.density = density;
      row.seed = seed;
      row.updates = updates;
      evaluate_into(row, model, vocab, eval, config.beam_width);
      rows.push_back(std::move(row));
    };
    try {
      ModelConfig mc = config.model;
      mc.seed = seed;
      StrategyConfig sc;
      sc.max_context = config.max_context;
      const StrategyResult base = train_baseline(corpus, vocab, mc, config.max_context);
      emit("Baseline", base.model, base.updates);
      for (double l : config.lambdas) {
        sc.kind = StrategyKind::Weighting;
        sc.lambda = l;
        const StrategyResult r = apply_strategy(corpus, vocab, mc, sc);
        emit(label("Weighting", "lambda", l), r.model, r.updates);
      }
      for (double p : config.dropout_ps) {
        sc = StrategyConfig{};
        sc.kind = StrategyKind::CoWordDropout;
        sc.p = p;
        sc.max_context = config.max_context;
        const StrategyResult r = apply_strategy(corpus, vocab, mc, sc);
        emit(label("CoWord", "p", p), r.model, r.updates);
      }
      if (config.divide_and_rule) {
        sc = StrategyConfig{};
        sc.kind = StrategyKind::DivideAndRule;
        sc.max_context = config.max_context;
        const StrategyResult r = apply_strategy(corpus, vocab, mc, sc);
        emit("DivideAndRule", r.model, r.updates);
      }
      // Fine-tuned variants chain from the shared base: e=2 continues e=1.
      auto chain = [&](const std::string& name, const Corpus& variants) {
        Model m = base.model;
        std::size_t done = 0, updates = base.updates;
        for (std::size_t e : epochs) {
          updates += finetune(m, vocab, variants, e - done).updates;
          done = e;
          emit(label(name, "e", static_cast<double>(e)), m, updates);
        }
      };
      if (config.annotation_finetune && !epochs.empty()) {
        Corpus annotated_only;
        for (const ContextualExample& ex : corpus) {
          if (ex.annotation) annotated_only.push_back(ex);
        }
        chain("AnnotationFinetune", max_context_variants(annotated_only, config.max_context));
      }
      // The base model never used annotations (weighting is off), so it
      // doubles as the selection pipeline's first step.
      const Corpus sentences = strip_annotations(corpus);
      const std::size_t k = config.k ? config.k : annotated;
      for (MetricKind metric : config.metrics) {
        const std::vector<ExampleScore> scores = score_corpus(base.model, vocab, sentences);
        const Corpus selected = select_top_k(scores, k, sentences, metric);
        chain(std::string(to_string(metric)), max_context_variants(selected, config.max_context));
      }
    } catch (const std::exception& e) {
      std::set<std::string> done;
      for (const ReportRow& r : rows) done.insert(r.strategy);
      for (const std::string& name : labels) {
        if (done.count(name)) continue;
        ReportRow row;
        row.strategy = name;
        row.kind_enriched = "mix";
        row.density = density;
        row.seed = seed;
        row.error = clean_message(e.what());
        rows.push_back(std::move(row));
      }
    }
  });
  ExperimentReport report;
  for (auto& rows : per_seed) {
    for (ReportRow& r : rows) report.rows.push_back(std::move(r));
  }
  report.normalize();
  return report;
}

// --- report emission -------------------------------------------------------------------

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  if (name == "svg") return ReportFormat::Svg;
  fail(ErrorKind::Config, "unknown report format '" + std::string(name) + "'");
}

namespace {

constexpr const char* kCsvHeader =
    "strategy,kind_enriched,density,seed,Gender_correct,Gender_n,Formality_correct,Formality_n,"
    "Auxiliary_correct,Auxiliary_n,bleu,contrastive,updates,error";

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out(1);
  for (char c : line) {
    if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

template <class T>
T parse_number(const std::string& field, const char* what) {
  std::istringstream in(field);
  T value{};
  in >> value;
  if (!in || !in.eof()) fail(ErrorKind::Input, std::string("bad ") + what + " '" + field + "'");
  return value;
}

}  // namespace

std::string report_to_csv(const ExperimentReport& report) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const ReportRow& r : report.rows) {
    out += r.strategy + ',' + r.kind_enriched + ',' + format_double(r.density) + ',' +
           std::to_string(r.seed);
    for (PhenomenonKind kind : kContextualKinds) {
      const auto it = r.accuracy.find(kind);
      if (it == r.accuracy.end()) {
        out += ",,";
      } else {
        out += ',' + std::to_string(it->second.correct) + ',' + std::to_string(it->second.total);
      }
    }
    out += ',' + format_double(r.bleu) + ',' + format_double(r.contrastive) + ',' +
           std::to_string(r.updates) + ',' + r.error + '\n';
  }
  return out;
}

ExperimentReport report_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) fail(ErrorKind::Input, "unexpected report header");
  ExperimentReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 14) fail(ErrorKind::Input, "report row has " + std::to_string(f.size()) + " fields");
    ReportRow r;
    r.strategy = f[0];
    r.kind_enriched = f[1];
    r.density = parse_number<double>(f[2], "density");
    r.seed = parse_number<std::uint64_t>(f[3], "seed");
    for (std::size_t k = 0; k < kContextualKinds.size(); ++k) {
      const std::string& correct = f[4 + 2 * k];
      const std::string& total = f[5 + 2 * k];
      if (correct.empty() && total.empty()) continue;
      r.accuracy[kContextualKinds[k]] = {parse_number<std::size_t>(correct, "count"),
                                         parse_number<std::size_t>(total, "count")};
    }
    r.bleu = parse_number<double>(f[10], "bleu");
    r.contrastive = parse_number<double>(f[11], "contrastive");
    r.updates = parse_number<std::size_t>(f[12], "updates");
    r.error = f[13];
    report.rows.push_back(std::move(r));
  }
  return report;
}

std::string report_to_json(const ExperimentReport& report) {
  ojson rows = ojson::array();
  for (const ReportRow& r : report.rows) {
    ojson j;
    j["strategy"] = r.strategy;
    j["kind_enriched"] = r.kind_enriched;
    j["density"] = r.density;
    j["seed"] = r.seed;
    ojson acc = ojson::object();
    for (const auto& [kind, a] : r.accuracy) {
      acc[std::string(to_string(kind))] = {
          {"accuracy", a.accuracy()}, {"correct", a.correct}, {"n", a.total}};
    }
    j["accuracy"] = std::move(acc);
    j["bleu"] = r.bleu;
    j["contrastive"] = r.contrastive;
    j["updates"] = r.updates;
    if (!r.error.empty()) j["error"] = r.error;
    rows.push_back(std::move(j));
  }
  ojson summary = ojson::array();
  for (const CellSummary& c : aggregate(report)) {
    ojson j;
    j["strategy"] = c.strategy;
    j["kind_enriched"] = c.kind_enriched;
    j["density"] = c.density;
    j["seeds"] = c.seeds;
    ojson acc = ojson::object();
    for (const auto& [kind, m] : c.accuracy) {
      acc[std::string(to_string(kind))] = {{"mean", m.mean}, {"stddev", m.stddev}};
    }
    j["accuracy"] = std::move(acc);
    j["bleu"] = {{"mean", c.bleu.mean}, {"stddev", c.bleu.stddev}};
    j["contrastive"] = {{"mean", c.contrastive.mean}, {"stddev", c.contrastive.stddev}};
    j["updates"] = c.updates;
    summary.push_back(std::move(j));
  }
  ojson out;
  out["rows"] = std::move(rows);
  out["summary"] = std::move(summary);
  return out.dump(2) + "\n";
}

// --- SVG ---------------------------------------------------------------------------------

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 64, kRight = 24, kTop = 32, kBottom = 56;
constexpr std::array<const char*, 3> kColors{"#1f77b4", "#d62728", "#2ca02c"};

struct Axis {
  double lo = 0.0, hi = 1.0;
  double map(double v, double a, double b) const {
    return hi == lo ? (a + b) / 2 : a + (v - lo) / (hi - lo) * (b - a);
  }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

void draw_axes(std::ostringstream& s, const Axis& x, const Axis& y, const std::string& xlabel,
               const std::string& ylabel) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  s << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x.lo + (x.hi - x.lo) * t / 4.0;
    const double yv = y.lo + (y.hi - y.lo) * t / 4.0;
    const double px = x.map(xv, x0, x1), py = y.map(yv, y0, y1);
    s << "<text x=\"" << fmt("%.2f", px) << "\" y=\"" << y0 + 18
      << "\" text-anchor=\"middle\">" << fmt("%.3g", xv) << "</text>\n";
    s << "<text x=\"" << x0 - 8 << "\" y=\"" << fmt("%.2f", py + 4)
      << "\" text-anchor=\"end\">" << fmt("%.3g", yv) << "</text>\n";
  }
  s << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 14
    << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  s << "<text x=\"16\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (y0 + y1) / 2 << ")\">" << ylabel << "</text>\n";
}

}  // namespace

std::string report_to_svg(const ExperimentReport& report) {
  const std::vector<CellSummary> cells = aggregate(report);
  std::set<std::string> strategies;
  for (const CellSummary& c : cells) strategies.insert(c.strategy);
  const bool density_lines = strategies.size() <= 1 && cells.size() > 1;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  if (density_lines) {
    Axis x{cells.front().density, cells.back().density};
    Axis y{0.0, 1.0};
    draw_axes(s, x, y, "density", "accuracy");
    for (std::size_t k = 0; k < kContextualKinds.size(); ++k) {
      const PhenomenonKind kind = kContextualKinds[k];
      std::string points;
      for (const CellSummary& c : cells) {
        const auto it = c.accuracy.find(kind);
        if (it == c.accuracy.end()) continue;
        const double px = x.map(c.density, x0, x1), py = y.map(it->second.mean, y0, y1);
        points += fmt("%.2f", px) + "," + fmt("%.2f", py) + " ";
        s << "<circle cx=\"" << fmt("%.2f", px) << "\" cy=\"" << fmt("%.2f", py)
          << "\" r=\"3\" fill=\"" << kColors[k] << "\"/>\n";
      }
      if (!points.empty()) {
        points.pop_back();
        s << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << kColors[k]
          << "\"/>\n";
      }
      s << "<text x=\"" << x1 - 90 << "\" y=\"" << y1 + 14 * static_cast<double>(k + 1)
        << "\" fill=\"" << kColors[k] << "\">" << to_string(kind) << "</text>\n";
    }
  } else {
    Axis x{0.0, 100.0}, y{0.0, 1.0};
    if (!cells.empty()) {
      x.lo = x.hi = cells.front().bleu.mean;
      for (const CellSummary& c : cells) {
        x.lo = std::min(x.lo, c.bleu.mean);
        x.hi = std::max(x.hi, c.bleu.mean);
      }
      x.lo = std::floor(x.lo - 1.0);
      x.hi = std::ceil(x.hi + 1.0);
    }
    draw_axes(s, x, y, "BLEU", "mean contextual accuracy");
    for (const CellSummary& c : cells) {
      const double px = x.map(c.bleu.mean, x0, x1);
      const double py = y.map(mean_contextual(c.accuracy), y0, y1);
      s << "<circle cx=\"" << fmt("%.2f", px) << "\" cy=\"" << fmt("%.2f", py)
        << "\" r=\"3\" fill=\"" << kColors[0] << "\"/>\n";
      s << "<text x=\"" << fmt("%.2f", px + 5) << "\" y=\"" << fmt("%.2f", py - 5) << "\">"
        << c.strategy << "</text>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

void emit_report(const ExperimentReport& report, ReportFormat format, const std::string& path) {
  switch (format) {
    case ReportFormat::Csv: io::write_file(path, report_to_csv(report)); return;
    case ReportFormat::Json: io::write_file(path, report_to_json(report)); return;
    case ReportFormat::Svg: io::write_file(path, report_to_svg(report)); return;
  }
}

}  // namespace ctxlab
