// Command-line front end for corpus generation, training, scoring and the
// two experiment shapes. Every command is deterministic given its inputs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ctxlab/composition.hpp"
#include "ctxlab/error.hpp"
#include "ctxlab/experiments.hpp"
#include "ctxlab/io.hpp"
#include "ctxlab/kernels.hpp"
#include "ctxlab/metrics.hpp"
#include "ctxlab/model.hpp"
#include "ctxlab/strategies.hpp"
#include "ctxlab/toy_corpus.hpp"

namespace fs = std::filesystem;
using namespace ctxlab;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, path + ": " + e.what());
  }
}

std::string ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory " + dir + ": " + ec.message());
  return dir;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// --- gen -------------------------------------------------------------------------

struct GenOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void run_gen(const GenOptions& o) {
  CorpusSpec spec;
  spec.counts = {{PhenomenonKind::Gender, 100}, {PhenomenonKind::Formality, 100},
                 {PhenomenonKind::Auxiliary, 100}, {PhenomenonKind::None, 700}};
  LexiconConfig lc;
  std::uint64_t lexicon_seed = 7;
  if (!o.config.empty()) {
    const nlohmann::json j = read_json(o.config);
    try {
      if (j.contains("counts")) {
        spec.counts.clear();
        for (const auto& [name, n] : j.at("counts").items()) {
          spec.counts[parse_kind(name)] = n.get<std::size_t>();
        }
      }
      spec.max_context = j.value("max_context", spec.max_context);
      spec.seed = j.value("seed", spec.seed);
      spec.id_offset = j.value("id_offset", spec.id_offset);
      if (j.value("distance", std::string("uniform")) == "fixed") {
        spec.distance.mode = DistancePolicy::Mode::Fixed;
        spec.distance.fixed = j.value("fixed_distance", std::size_t{1});
      }
      lexicon_seed = j.value("lexicon_seed", lexicon_seed);
      if (j.contains("lexicon")) {
        const auto& l = j.at("lexicon");
        lc.nouns = l.value("nouns", lc.nouns);
        lc.intransitive_verbs = l.value("intransitive_verbs", lc.intransitive_verbs);
        lc.ellipsis_verbs = l.value("ellipsis_verbs", lc.ellipsis_verbs);
        lc.adjectives = l.value("adjectives", lc.adjectives);
        lc.names = l.value("names", lc.names);
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Config, std::string("gen config: ") + e.what());
    }
  }
  if (o.seed) spec.seed = *o.seed;
  const Lexicon lex = build_lexicon(lc, lexicon_seed);
  const Corpus corpus = generate_corpus(spec, lex);
  ensure_dir(o.out);
  save_lexicon(join(o.out, "lexicon.json"), lex);
  save_corpus(join(o.out, "corpus.jsonl"), corpus);
}

// --- compose -------------------------------------------------------------------------

struct ComposeOptions {
  std::string config;
  std::vector<std::string> pools;  // name=path
  std::optional<std::uint64_t> seed;
  std::string out;
};

void run_compose(const ComposeOptions& o) {
  CompositionSpec spec = composition_spec_from_json(io::read_file(o.config));
  if (o.seed) spec.seed = *o.seed;
  PoolMap pools;
  for (const std::string& p : o.pools) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, "pool must be name=path, got " + p);
    pools[p.substr(0, eq)] = load_corpus(p.substr(eq + 1));
  }
  save_corpus(o.out, compose(pools, spec));
}

// --- train / finetune ----------------------------------------------------------------------

struct TrainOptions {
  std::string corpus, lexicon, model_config, strategy;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void run_train(const TrainOptions& o) {
  const Lexicon lex = load_lexicon(o.lexicon);
  const Vocabulary vocab = build_vocabulary(lex);
  const Corpus corpus = load_corpus(o.corpus);
  ModelConfig mc;
  if (!o.model_config.empty()) mc = model_config_from_json(io::read_file(o.model_config));
  if (o.seed) mc.seed = *o.seed;
  mc.vocab_size = vocab.size();
  StrategyConfig sc;
  if (!o.strategy.empty()) sc = strategy_config_from_json(io::read_file(o.strategy));
  const StrategyResult r = apply_strategy(corpus, vocab, mc, sc);
  save_checkpoint(o.out, r.model, vocab);
  if (sc.kind == StrategyKind::MetricSelection) {
    io::write_file(o.out + ".provenance.jsonl", provenance_jsonl(r));
  }
}

struct FinetuneOptions {
  std::string checkpoint, corpus;
  std::size_t epochs = 1;
  std::size_t max_context = 3;
  bool annotated_only = false;
  std::string out;
};

void run_finetune(const FinetuneOptions& o) {
  Checkpoint<float> ck = load_checkpoint(o.checkpoint);
  const Corpus corpus = load_corpus(o.corpus);
  if (o.annotated_only) {
    finetune_on_annotated(ck.model, ck.vocab, corpus, o.epochs, o.max_context);
  } else {
    finetune(ck.model, ck.vocab, max_context_variants(corpus, o.max_context), o.epochs);
  }
  save_checkpoint(o.out, ck.model, ck.vocab);
}

// --- eval ---------------------------------------------------------------------------------

struct EvalOptions {
  std::string checkpoint, lexicon, corpus, strategy = "unnamed";
  std::uint64_t seed = 7;
  std::size_t per_kind = 200, bleu = 200, beam = 1, max_context = 3;
  std::string out, forward_out;
};

void run_eval(const EvalOptions& o) {
  const Checkpoint<float> ck = load_checkpoint(o.checkpoint);
  const Lexicon lex = load_lexicon(o.lexicon);
  EvalSets sets = make_eval_sets(lex, EvalSizes{o.per_kind, o.bleu}, o.seed, o.max_context);
  if (!o.corpus.empty()) {
    const Corpus given = load_corpus(o.corpus);
    sets.contextual.clear();
    sets.plain.clear();
    for (const ContextualExample& ex : given) {
      (ex.annotation ? sets.contextual : sets.plain).push_back(ex);
    }
    sets.contrastive = make_contrastive_pairs(sets.contextual, lex, derive_seed(o.seed, "eval-contrastive"));
  }
  ReportRow row;
  evaluate_into(row, ck.model, ck.vocab, sets, o.beam);
  MetricReport report;
  report.strategy = o.strategy;
  report.seed = ck.model.config.seed;
  report.dataset = o.corpus.empty() ? "generated" : o.corpus;
  report.accuracy = row.accuracy;
  report.bleu = row.bleu;
  report.contrastive = row.contrastive;
  io::write_file(o.out, metric_report_to_json(report));
  io::write_file(o.out + ".csv", metric_report_to_csv(report));
  if (!o.forward_out.empty()) {
    std::string lines;
    for (const Corpus* c : {&sets.contextual, &sets.plain}) {
      for (const ContextualExample& ex : *c) {
        const EncodedExample enc = encode(ex, ck.vocab);
        const LogProbMatrix lp = forward_logprobs(ck.model, enc.src_ids, enc.tgt_ids);
        lines += std::to_string(ex.id);
        for (std::size_t j = 0; j + 1 < enc.tgt_ids.size(); ++j) {
          lines += ' ' + fmt17(lp.at(j, static_cast<std::size_t>(enc.tgt_ids[j + 1])));
        }
        lines += '\n';
      }
    }
    io::write_file(o.forward_out, lines);
  }
}

// --- score / select ---------------------------------------------------------------------------

struct ScoreOptions {
  std::string checkpoint, corpus, out;
};

void run_score(const ScoreOptions& o) {
  const Checkpoint<float> ck = load_checkpoint(o.checkpoint);
  const Corpus corpus = strip_annotations(load_corpus(o.corpus));
  std::string lines;
  for (const ExampleScore& s : score_corpus(ck.model, ck.vocab, corpus)) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["pcxmi"] = s.pcxmi;
    j["max_pcxmi"] = s.max_pcxmi;
    j["token_ratios"] = s.token_ratios;
    lines += j.dump() + '\n';
  }
  io::write_file(o.out, lines);
}

std::vector<ExampleScore> read_scores(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::vector<ExampleScore> scores;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      ExampleScore s;
      s.id = j.at("id").get<std::int64_t>();
      s.pcxmi = j.at("pcxmi").get<double>();
      s.max_pcxmi = j.at("max_pcxmi").get<double>();
      s.token_ratios = j.value("token_ratios", std::vector<double>{});
      scores.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Input, path + ": " + e.what());
    }
  }
  return scores;
}

struct SelectOptions {
  std::string scores, corpus, metric = "MaxPCXMI", out;
  std::size_t k = 1;
};

void run_select(const SelectOptions& o) {
  const Corpus corpus = strip_annotations(load_corpus(o.corpus));
  save_corpus(o.out, select_top_k(read_scores(o.scores), o.k, corpus, parse_metric(o.metric)));
}

// --- sweep / compare / report ---------------------------------------------------------------

struct ExperimentOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
};

void write_reports(const ExperimentReport& report, const std::string& dir, const std::string& stem) {
  ensure_dir(dir);
  emit_report(report, ReportFormat::Csv, join(dir, stem + ".csv"));
  emit_report(report, ReportFormat::Json, join(dir, stem + ".json"));
  emit_report(report, ReportFormat::Svg, join(dir, stem + ".svg"));
}

void run_sweep(const ExperimentOptions& o) {
  SweepConfig c;
  if (!o.config.empty()) c = sweep_config_from_json(io::read_file(o.config));
  if (o.seed) c.data_seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  write_reports(run_density_sweep(c), o.out, "sweep");
}

void run_compare(const ExperimentOptions& o) {
  MethodsConfig c;
  if (!o.config.empty()) c = methods_config_from_json(io::read_file(o.config));
  if (o.seed) c.data_seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  const ExperimentReport report = run_method_comparison(c);
  write_reports(report, o.out, "compare");
  std::string csv = "strategy,Gender,Formality,Auxiliary,mean_accuracy,bleu,contrastive,updates\n";
  for (const DeltaRow& d : deltas_vs_baseline(report)) {
    csv += d.strategy;
    for (PhenomenonKind kind : kContextualKinds) {
      const auto it = d.accuracy.find(kind);
      csv += ',' + fmt17(it == d.accuracy.end() ? 0.0 : it->second);
    }
    csv += ',' + fmt17(d.mean_accuracy) + ',' + fmt17(d.bleu) + ',' + fmt17(d.contrastive) + ',' +
           fmt17(d.updates) + '\n';
  }
  io::write_file(join(o.out, "deltas.csv"), csv);
}

struct ReportOptions {
  std::string in, format = "svg", out;
};

void run_report(const ReportOptions& o) {
  emit_report(report_from_csv(io::read_file(o.in)), parse_report_format(o.format), o.out);
}

void print_error(std::string_view kind, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctxlab: context-utilization experiments on synthetic parallel corpora"};
  app.require_subcommand(1);
  std::string kernels = "auto";
  app.add_option("--kernels", kernels, "compute kernels: scalar, avx2 or auto")
      ->check(CLI::IsMember({"scalar", "avx2", "auto"}));

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "generate a lexicon and a corpus");
  g->add_option("--config", gen.config, "corpus JSON config");
  g->add_option("--seed", gen.seed, "corpus seed");
  g->add_option("--out", gen.out, "output directory")->required();

  ComposeOptions comp;
  auto* c = app.add_subcommand("compose", "mix pools into a training corpus");
  c->add_option("--config", comp.config, "composition JSON")->required();
  c->add_option("--pool", comp.pools, "pool as name=path.jsonl")->required();
  c->add_option("--seed", comp.seed, "composition seed");
  c->add_option("--out", comp.out, "output corpus")->required();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "train a model with a strategy");
  t->add_option("--corpus", tr.corpus)->required();
  t->add_option("--lexicon", tr.lexicon)->required();
  t->add_option("--config", tr.model_config, "model JSON config");
  t->add_option("--strategy", tr.strategy, "strategy JSON config");
  t->add_option("--seed", tr.seed, "model seed");
  t->add_option("--out", tr.out, "checkpoint path")->required();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "accuracy, BLEU and contrastive accuracy");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--lexicon", ev.lexicon)->required();
  e->add_option("--corpus", ev.corpus, "evaluation corpus instead of generated sets");
  e->add_option("--seed", ev.seed, "seed for generated evaluation sets");
  e->add_option("--per-kind", ev.per_kind);
  e->add_option("--bleu-size", ev.bleu);
  e->add_option("--beam", ev.beam);
  e->add_option("--strategy", ev.strategy, "label stored in the report");
  e->add_option("--forward-out", ev.forward_out, "per-token reference log-probabilities");
  e->add_option("--out", ev.out, "report JSON path")->required();

  ScoreOptions sc;
  auto* s = app.add_subcommand("score", "PCXMI and MaxPCXMI per example");
  s->add_option("--checkpoint", sc.checkpoint)->required();
  s->add_option("--corpus", sc.corpus)->required();
  s->add_option("--out", sc.out, "scores JSONL")->required();

  SelectOptions se;
  auto* sl = app.add_subcommand("select", "top-k examples by score");
  sl->add_option("--scores", se.scores)->required();
  sl->add_option("--corpus", se.corpus)->required();
  sl->add_option("--k", se.k)->required()->check(CLI::PositiveNumber);
  sl->add_option("--metric", se.metric)->check(CLI::IsMember({"PCXMI", "MaxPCXMI"}));
  sl->add_option("--out", se.out)->required();

  FinetuneOptions ft;
  auto* f = app.add_subcommand("finetune", "continue training on maximum-context variants");
  f->add_option("--checkpoint", ft.checkpoint)->required();
  f->add_option("--corpus", ft.corpus)->required();
  f->add_option("--epochs", ft.epochs);
  f->add_option("--max-context", ft.max_context);
  f->add_flag("--annotated-only", ft.annotated_only);
  f->add_option("--out", ft.out)->required();

  ExperimentOptions sw;
  auto* w = app.add_subcommand("sweep", "density sweep");
  w->add_option("--config", sw.config);
  w->add_option("--seed", sw.seed, "data seed");
  w->add_option("--jobs", sw.jobs);
  w->add_option("--out", sw.out, "output directory")->required();

  ExperimentOptions cm;
  auto* m = app.add_subcommand("compare", "method comparison");
  m->add_option("--config", cm.config);
  m->add_option("--seed", cm.seed, "data seed");
  m->add_option("--jobs", cm.jobs);
  m->add_option("--out", cm.out, "output directory")->required();

  ReportOptions rp;
  auto* r = app.add_subcommand("report", "re-render a CSV report");
  r->add_option("--in", rp.in)->required();
  r->add_option("--format", rp.format)->check(CLI::IsMember({"csv", "json", "svg"}));
  r->add_option("--out", rp.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    print_error("usage_error", err.what());
    return 64;
  }

  try {
    if (!kernels::select(kernels)) fail(ErrorKind::Config, "kernels '" + kernels + "' unavailable");
    if (*g) run_gen(gen);
    if (*c) run_compose(comp);
    if (*t) run_train(tr);
    if (*e) run_eval(ev);
    if (*s) run_score(sc);
    if (*sl) run_select(se);
    if (*f) run_finetune(ft);
    if (*w) run_sweep(sw);
    if (*m) run_compare(cm);
    if (*r) run_report(rp);
  } catch (const Error& err) {
    print_error(to_string(err.kind()), err.what());
    return 2;
  } catch (const std::exception& err) {
    print_error("internal_error", err.what());
    return 1;
  }
  return 0;
}
