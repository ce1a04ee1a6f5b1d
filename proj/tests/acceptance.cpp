// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Criteria 1-4 train the desk-scale experiments and dominate the runtime; their
// per-seed rows are written next to the binary's working directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "ctxlab/composition.hpp"
#include "ctxlab/experiments.hpp"
#include "ctxlab/io.hpp"
#include "ctxlab/metrics.hpp"
#include "ctxlab/model.hpp"
#include "ctxlab/rng.hpp"
#include "ctxlab/strategies.hpp"
#include "ctxlab/toy_corpus.hpp"

using namespace ctxlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int number, const std::string& name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = check();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", number, name.c_str(),
              out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << std::fixed << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// density -> kind -> seed-averaged accuracy
using DensityTable = std::map<double, std::map<PhenomenonKind, double>>;

DensityTable sweep_table(const ExperimentReport& report) {
  DensityTable table;
  for (const CellSummary& cell : aggregate(report)) {
    for (const auto& [kind, ms] : cell.accuracy) table[cell.density][kind] = ms.mean;
  }
  return table;
}

struct SweepRun {
  ExperimentReport report;
  double seconds = 0.0;
};

const SweepRun& sweep() {
  static const SweepRun run = [] {
    SweepConfig config;  // desk-scale defaults
    const auto start = std::chrono::steady_clock::now();
    SweepRun r;
    r.report = run_density_sweep(config);
    r.seconds = seconds_since(start);
    emit_report(r.report, ReportFormat::Csv, "acceptance_sweep.csv");
    return r;
  }();
  return run;
}

Outcome sweep_errors(const ExperimentReport& report) {
  for (const ReportRow& row : report.rows) {
    if (!row.error.empty()) return {false, "cell failed: " + row.error};
  }
  return {true, ""};
}

Outcome sparsity_effect() {
  const SweepRun& run = sweep();
  if (Outcome e = sweep_errors(run.report); !e.pass) return e;
  const DensityTable table = sweep_table(run.report);
  std::string curve;
  bool monotone = true;
  double prev = -1.0;
  for (const auto& [d, acc] : table) {
    const double g = acc.at(PhenomenonKind::Gender);
    monotone = monotone && g >= prev;
    prev = g;
    curve += fmt(d, 2) + ":" + fmt(g) + " ";
  }
  const double at0 = table.begin()->second.at(PhenomenonKind::Gender);
  const double top = table.rbegin()->second.at(PhenomenonKind::Gender);
  const bool pass = table.size() == 4 && monotone && at0 <= 0.45 && top >= 0.75 &&
                    run.seconds <= 20 * 60;
  return {pass, "Gender " + curve + "runtime " + fmt(run.seconds / 60, 1) + " min"};
}

Outcome no_transfer() {
  const SweepRun& run = sweep();
  if (Outcome e = sweep_errors(run.report); !e.pass) return e;
  const DensityTable table = sweep_table(run.report);
  const auto& low = table.begin()->second;
  const auto& high = table.rbegin()->second;
  bool pass = true;
  std::string detail;
  for (PhenomenonKind k : {PhenomenonKind::Formality, PhenomenonKind::Auxiliary}) {
    const double diff = high.at(k) - low.at(k);
    pass = pass && std::abs(diff) <= 0.05;
    detail += std::string(to_string(k)) + " " + fmt(low.at(k)) + " -> " + fmt(high.at(k)) + " ";
  }
  return {pass, detail};
}

MethodsConfig methods_config() {
  MethodsConfig config;
  config.seeds = {1, 2, 3};
  config.lambdas = {5.0};
  config.dropout_ps = {};
  config.divide_and_rule = false;
  config.annotation_finetune = false;
  config.finetune_epochs = {5};
  return config;
}

const ExperimentReport& comparison() {
  static const ExperimentReport report = [] {
    ExperimentReport r = run_method_comparison(methods_config());
    emit_report(r, ReportFormat::Csv, "acceptance_compare.csv");
    return r;
  }();
  return report;
}

const DeltaRow& delta_of(const std::vector<DeltaRow>& deltas, const std::string& name) {
  for (const DeltaRow& d : deltas) {
    if (d.strategy == name) return d;
  }
  throw std::runtime_error("no row for " + name);
}

Outcome weighting_tradeoff() {
  if (Outcome e = sweep_errors(comparison()); !e.pass) return e;
  const DeltaRow& d = delta_of(deltas_vs_baseline(comparison()), "Weighting lambda=5");
  const bool pass = d.mean_accuracy >= 0.05 && d.bleu >= -2.0;
  return {pass, "accuracy +" + fmt(d.mean_accuracy) + " (Gender +" +
                    fmt(d.accuracy.at(PhenomenonKind::Gender)) + "), BLEU " + fmt(d.bleu, 2)};
}

Outcome metric_pipeline() {
  if (Outcome e = sweep_errors(comparison()); !e.pass) return e;
  const MethodsConfig config = methods_config();
  const Lexicon lexicon = build_lexicon(LexiconConfig{}, config.data_seed);
  const Vocabulary vocab = build_vocabulary(lexicon);
  const Corpus corpus = methods_corpus(config, lexicon);
  std::set<std::int64_t> annotated;
  for (const ContextualExample& ex : corpus) {
    if (ex.annotation) annotated.insert(ex.id);
  }

  // Annotations moved onto other examples: any selection that read them
  // would change.
  Corpus scrambled = corpus;
  Rng rng(derive_seed(config.data_seed, "acceptance-scramble"));
  for (std::size_t i = scrambled.size(); i > 1; --i) {
    std::swap(scrambled[i - 1].annotation, scrambled[rng.index(i)].annotation);
  }

  StrategyConfig sc;
  sc.kind = StrategyKind::MetricSelection;
  sc.metric = MetricKind::MaxPCXMI;
  sc.k = annotated.size();
  sc.finetune_epochs = 5;
  sc.max_context = config.max_context;

  double precision_sum = 0.0;
  bool blind = true;
  std::string per_seed;
  for (std::uint64_t seed : config.seeds) {
    ModelConfig mc = config.model;
    mc.seed = seed;
    const StrategyResult base = train_baseline(corpus, vocab, mc, config.max_context);
    const StrategyResult picked = select_and_finetune(base.model, corpus, vocab, sc);
    std::size_t hits = 0;
    for (std::int64_t id : picked.selected_ids) hits += annotated.count(id);
    const double precision = static_cast<double>(hits) / static_cast<double>(sc.k);
    precision_sum += precision;
    per_seed += fmt(precision) + " ";
    if (seed == config.seeds.front()) {
      const StrategyResult other = select_and_finetune(base.model, scrambled, vocab, sc);
      const StrategyResult none = select_and_finetune(base.model, strip_annotations(corpus), vocab, sc);
      blind = other.selected_ids == picked.selected_ids && none.selected_ids == picked.selected_ids &&
              other.model.params == picked.model.params && none.model.params == picked.model.params;
    }
  }
  const double precision = precision_sum / static_cast<double>(config.seeds.size());
  const DeltaRow& d = delta_of(deltas_vs_baseline(comparison()), "MaxPCXMI e=5");
  const bool pass = precision >= 0.6 && d.mean_accuracy >= 0.03 && blind;
  return {pass, "precision " + fmt(precision) + " (" + per_seed + "), k=" + std::to_string(sc.k) +
                    ", accuracy +" + fmt(d.mean_accuracy) + ", BLEU " + fmt(d.bleu, 2) +
                    ", annotation-blind " + (blind ? "yes" : "no")};
}

EncodedExample hand_example(std::vector<TokenId> src, std::vector<TokenId> tgt, std::size_t weighted,
                            double weight) {
  EncodedExample e;
  e.src_ids = std::move(src);
  e.tgt_ids = std::move(tgt);
  e.weights.assign(e.tgt_ids.size() - 1, 1.0);
  e.weights[weighted - 1] = weight;
  return e;
}

Outcome gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  ModelConfig c;
  c.vocab_size = 14;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  c.heads = 2;
  c.max_positions = 8;
  c.max_segments = 4;
  c.max_len = 24;
  c.seed = 17;
  const ModelState<double> m = init_model<double>(c);
  const std::vector<EncodedExample> batch{
      hand_example({5, 6, kSep, 7, 8, 9}, {kBos, 10, kSep, 11, 12, 13, kEos}, 4, 6.0),
      hand_example({8, 7, 9}, {kBos, 12, 11, 13, kEos}, 2, 1.0),
  };
  const std::span<const EncodedExample> span(batch);
  std::vector<double> grad, scratch;
  loss_and_gradient(m, span, grad);
  Rng rng(2024);
  ModelState<double> probe = m;
  constexpr std::size_t kCoords = 200;
  double worst = 0.0;
  for (std::size_t n = 0; n < kCoords; ++n) {
    const std::size_t i = rng.index(m.params.size());
    const double h = 1e-5;
    probe.params[i] = m.params[i] + h;
    const double up = loss_and_gradient(probe, span, scratch);
    probe.params[i] = m.params[i] - h;
    const double down = loss_and_gradient(probe, span, scratch);
    probe.params[i] = m.params[i];
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(numeric - grad[i]) /
                                std::max({std::abs(numeric), std::abs(grad[i]), 1e-6}));
  }
  const double secs = seconds_since(start);
  return {worst < 1e-3 && secs <= 60.0,
          std::to_string(kCoords) + " coordinates, width 8, worst relative error " + fmt(worst * 1e6, 2) +
              "e-6"};
}

Outcome metric_identities() {
  const Lexicon lexicon = build_lexicon(LexiconConfig{}, 7);
  const Vocabulary vocab = build_vocabulary(lexicon);
  CorpusSpec spec;
  spec.counts = {{PhenomenonKind::Gender, 250},
                 {PhenomenonKind::Formality, 250},
                 {PhenomenonKind::Auxiliary, 250},
                 {PhenomenonKind::None, 250}};
  spec.seed = 31;
  const Corpus corpus = generate_corpus(spec, lexicon);

  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.epochs = 2;
  Model model = init_model<float>(mc);
  const Corpus variants = expand_context_sizes(corpus, 3);
  train(model, vocab, std::span<const ContextualExample>(variants));

  std::size_t zero_ctx = 0, zero_ok = 0, single = 0, single_ok = 0, max_ok = 0;
  const std::vector<ExampleScore> scores = score_corpus(model, vocab, corpus);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const ExampleScore& s = scores[i];
    const double mean = s.pcxmi / static_cast<double>(s.token_ratios.size());
    max_ok += s.max_pcxmi >= mean ? 1 : 0;

    const ContextualExample bare = with_context_size(corpus[i], 0);
    ++zero_ctx;
    zero_ok += pcxmi(model, vocab, bare) == 0.0 ? 1 : 0;

    ContextualExample one = corpus[i];
    one.src.resize(1);
    one.tgt.resize(1);
    one.annotation.reset();
    ++single;
    single_ok += max_pcxmi(model, vocab, one) == pcxmi(model, vocab, one) ? 1 : 0;
  }
  const bool pass = zero_ok == zero_ctx && single_ok == single && max_ok == corpus.size();
  return {pass, "zero-context " + std::to_string(zero_ok) + "/" + std::to_string(zero_ctx) +
                    ", single-token " + std::to_string(single_ok) + "/" + std::to_string(single) +
                    ", max>=mean " + std::to_string(max_ok) + "/" + std::to_string(corpus.size())};
}

Sentence tokens(const std::string& text) {
  std::istringstream in(text);
  Sentence out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

Outcome bleu_goldens() {
  const std::vector<Sentence> same{tokens("a b c d"), tokens("e f g h i")};
  const double identical = corpus_bleu(same, same);
  const double short_hyp = corpus_bleu({tokens("a b c d")}, {tokens("a b c d e")});

  const Lexicon lexicon = build_lexicon(LexiconConfig{}, 7);
  CorpusSpec spec;
  spec.counts = {{PhenomenonKind::None, 50}};
  spec.seed = 12;
  const Corpus refs_corpus = generate_corpus(spec, lexicon);
  std::vector<Sentence> hyps, refs;
  Rng rng(5);
  for (const ContextualExample& ex : refs_corpus) {
    refs.push_back(ex.tgt);
    Sentence h = ex.tgt;
    if (rng.bernoulli(0.5)) h.pop_back();
    if (rng.bernoulli(0.5)) h[rng.index(h.size())] = "t_noise";
    hyps.push_back(h);
  }
  const double ordered = corpus_bleu(hyps, refs);
  std::vector<std::size_t> perm(hyps.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  std::vector<Sentence> ph, pr;
  for (std::size_t i : perm) {
    ph.push_back(hyps[i]);
    pr.push_back(refs[i]);
  }
  const double permuted = corpus_bleu(ph, pr);
  const bool pass = std::abs(identical - 100.0) < 1e-9 && std::abs(short_hyp - 77.88) <= 0.01 &&
                    ordered == permuted;
  return {pass, "identical " + fmt(identical, 6) + ", short hypothesis " + fmt(short_hyp, 4) +
                    ", 50-pair " + fmt(ordered, 4) + " vs permuted " + fmt(permuted, 4)};
}

Outcome degeneracies() {
  const Lexicon lexicon = build_lexicon(LexiconConfig{}, 7);
  const Vocabulary vocab = build_vocabulary(lexicon);
  CorpusSpec spec;
  spec.counts = {{PhenomenonKind::Gender, 60}, {PhenomenonKind::Formality, 40}, {PhenomenonKind::None, 100}};
  spec.seed = 8;
  const Corpus corpus = generate_corpus(spec, lexicon);
  ModelConfig mc;
  mc.seed = 4;
  mc.epochs = 2;

  const Model base = apply_strategy(corpus, vocab, mc, {}).model;
  StrategyConfig w;
  w.kind = StrategyKind::Weighting;
  w.lambda = 0.0;
  const bool lambda0 = apply_strategy(corpus, vocab, mc, w).model.params == base.params;
  StrategyConfig p;
  p.kind = StrategyKind::CoWordDropout;
  p.p = 0.0;
  const bool p0 = apply_strategy(corpus, vocab, mc, p).model.params == base.params;

  Corpus singles = corpus;
  for (ContextualExample& ex : singles) {
    ex.src.resize(1);
    ex.tgt.resize(1);
    ex.annotation.reset();
  }
  StrategyConfig dr;
  dr.kind = StrategyKind::DivideAndRule;
  const bool dr1 =
      apply_strategy(singles, vocab, mc, dr).model.params == apply_strategy(singles, vocab, mc, {}).model.params;
  auto yes = [](bool b) { return std::string(b ? "identical" : "differs"); };
  return {lambda0 && p0 && dr1, "lambda=0 " + yes(lambda0) + ", p=0 " + yes(p0) + ", 1-token D&R " + yes(dr1)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CTXLAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> run_cli_pipeline(const fs::path& d) {
  fs::remove_all(d);
  fs::create_directories(d);
  const std::string p = d.string() + "/";
  const std::string model = R"({"embed_dim": 16, "hidden_dim": 32, "epochs": 2})";
  io::write_file(p + "gen.json", R"({"counts": {"Gender": 40, "Auxiliary": 20, "None": 60}})");
  io::write_file(p + "compose.json", R"({"seed": 2, "parts": [{"pool": "all", "count": 100}]})");
  io::write_file(p + "model.json", model);
  io::write_file(p + "ms.json", R"({"kind": "MetricSelection", "k": 20})");
  io::write_file(p + "sweep.json", R"({"densities": [0, 0.1], "total": 60, "seeds": [1],
      "eval": {"per_kind": 10, "bleu": 10}, "model": )" + model + "}");
  io::write_file(p + "methods.json", R"({"counts": {"Gender": 10, "None": 40}, "seeds": [1],
      "lambdas": [5], "dropout_ps": [0.2], "finetune_epochs": [1],
      "eval": {"per_kind": 10, "bleu": 10}, "model": )" + model + "}");
  const std::string data = " --corpus " + p + "c.jsonl --lexicon " + p + "g/lexicon.json";
  const std::vector<std::string> commands{
      "gen --config " + p + "gen.json --seed 9 --out " + p + "g",
      "compose --config " + p + "compose.json --pool all=" + p + "g/corpus.jsonl --out " + p + "c.jsonl",
      "train" + data + " --config " + p + "model.json --seed 3 --out " + p + "m.ckpt",
      "train" + data + " --config " + p + "model.json --strategy " + p + "ms.json --out " + p + "ms.ckpt",
      "eval --checkpoint " + p + "m.ckpt --lexicon " + p + "g/lexicon.json --per-kind 10 --bleu-size 10" +
          " --forward-out " + p + "forward.txt --out " + p + "eval.json",
      "score --checkpoint " + p + "m.ckpt --corpus " + p + "c.jsonl --out " + p + "scores.jsonl",
      "select --scores " + p + "scores.jsonl --corpus " + p + "c.jsonl --k 20 --out " + p + "sel.jsonl",
      "finetune --checkpoint " + p + "m.ckpt --corpus " + p + "sel.jsonl --epochs 2 --out " + p + "ft.ckpt",
      "sweep --config " + p + "sweep.json --out " + p + "sweep",
      "compare --config " + p + "methods.json --out " + p + "compare",
      "report --in " + p + "compare/compare.csv --format json --out " + p + "report.json",
  };
  for (const std::string& c : commands) {
    if (run_cli(c) != 0) throw std::runtime_error("command failed: ctxlab " + c);
  }
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(d)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), d).string()] = io::read_file(e.path().string());
  }
  return files;
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "ctxlab_acceptance";
  const auto a = run_cli_pipeline(root / "a");
  const auto b = run_cli_pipeline(root / "b");
  std::size_t same = 0;
  std::string diffs;
  for (const auto& [name, text] : a) {
    const auto it = b.find(name);
    if (it != b.end() && it->second == text) {
      ++same;
    } else {
      diffs += " " + name;
    }
  }
  const bool forward = a.count("forward.txt") && a.at("forward.txt").size() > 0;
  fs::remove_all(root);
  const bool pass = diffs.empty() && a.size() == b.size() && forward && a.size() >= 15;
  return {pass, std::to_string(same) + "/" + std::to_string(a.size()) + " files byte-identical" +
                    (diffs.empty() ? "" : ", differing:" + diffs)};
}

}  // namespace

int main() {
  // Fast criteria first so their lines appear before the long training runs.
  report(5, "gradient check", gradient_check);
  report(6, "metric identities", metric_identities);
  report(7, "BLEU golden values", bleu_goldens);
  report(8, "degeneracy identities", degeneracies);
  report(9, "CLI determinism", cli_determinism);
  report(1, "sparsity effect", sparsity_effect);
  report(2, "no cross-phenomenon transfer", no_transfer);
  report(3, "weighting trade-off", weighting_tradeoff);
  report(4, "MaxPCXMI pipeline", metric_pipeline);
  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
