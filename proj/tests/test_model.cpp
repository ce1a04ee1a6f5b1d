#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctxlab/composition.hpp"
#include "ctxlab/error.hpp"
#include "ctxlab/kernels.hpp"
#include "ctxlab/model.hpp"

using namespace ctxlab;

namespace {

const Lexicon& lexicon() {
  static const Lexicon lex = build_lexicon({}, 7);
  return lex;
}

const Vocabulary& vocab() {
  static const Vocabulary v = build_vocabulary(lexicon());
  return v;
}

ModelConfig tiny_config(std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  c.heads = 2;
  c.max_positions = 8;
  c.max_segments = 4;
  c.max_len = 24;
  return c;
}

EncodedExample hand_example(std::vector<TokenId> src, std::vector<TokenId> tgt,
                            std::size_t weighted_position = 0, double weight = 1.0) {
  EncodedExample e;
  e.src_ids = std::move(src);
  e.tgt_ids = std::move(tgt);
  e.weights.assign(e.tgt_ids.size() - 1, 1.0);
  if (weighted_position) e.weights[weighted_position - 1] = weight;
  return e;
}

Corpus corpus_of(std::map<PhenomenonKind, std::size_t> counts, std::uint64_t seed) {
  CorpusSpec spec;
  spec.counts = std::move(counts);
  spec.seed = seed;
  return generate_corpus(spec, lexicon());
}

Model trained_plain_model() {
  static const Model model = [] {
    ModelConfig c;
    c.vocab_size = vocab().size();
    c.epochs = 30;
    Model m = init_model<float>(c);
    const Corpus variants = expand_context_sizes(
        corpus_of({{PhenomenonKind::None, 200}, {PhenomenonKind::Gender, 60}}, 21), 3);
    train(m, vocab(), std::span<const ContextualExample>(variants));
    return m;
  }();
  return model;
}

}  // namespace

TEST_CASE("init is seeded and validated") {
  ModelConfig c = tiny_config(20);
  const Model a = init_model<float>(c), b = init_model<float>(c);
  CHECK(a.params == b.params);
  CHECK(a.params.size() == a.layout.total);
  c.seed = 2;
  CHECK(init_model<float>(c).params != a.params);
  c.vocab_size = 0;
  CHECK_THROWS_AS(init_model<float>(c), Error);
  c = tiny_config(20);
  c.heads = 3;  // 8 is not divisible by 3
  CHECK_THROWS_AS(init_model<float>(c), Error);
}

TEST_CASE("default model is small") {
  ModelConfig c;
  c.vocab_size = vocab().size();
  CHECK(ParamLayout(c).total < 50000);
}

TEST_CASE("forward log-probabilities are normalized rows") {
  const Model m = init_model<float>(tiny_config(20));
  const std::vector<TokenId> src{5, 6, kSep, 7, 8};
  const std::vector<TokenId> tgt{kBos, 9, kSep, 10, 11, kEos};
  const LogProbMatrix lp = forward_logprobs(m, src, tgt);
  CHECK(lp.rows == tgt.size() - 1);
  CHECK(lp.cols == 20);
  for (std::size_t r = 0; r < lp.rows; ++r) {
    double sum = 0.0;
    for (double x : lp.row(r)) sum += std::exp(x);
    CHECK(std::abs(std::log(sum)) < 1e-6);
  }
  CHECK(forward_logprobs(m, src, tgt).data == lp.data);
}

TEST_CASE("inputs outside the model's range are rejected") {
  const Model m = init_model<float>(tiny_config(20));
  const std::vector<TokenId> src{5, 99};
  const std::vector<TokenId> tgt{kBos, 5, kEos};
  CHECK_THROWS_AS(forward_logprobs(m, src, tgt), Error);
  const std::vector<TokenId> too_long(40, 5);
  CHECK_THROWS_AS(forward_logprobs(m, too_long, tgt), Error);
}

TEST_CASE("token weights") {
  CHECK(token_weight(true, 5.0) == 6.0);
  CHECK(token_weight(false, 10.0) == 1.0);
  CHECK(token_weight(true, 0.0) == 1.0);
  CHECK_THROWS_AS(token_weight(true, -1.0), Error);
}

TEST_CASE("weighted NLL by substitution") {
  LogProbMatrix uniform;
  uniform.rows = 3;
  uniform.cols = 10;
  uniform.data.assign(30, -std::log(10.0));
  const std::vector<TokenId> tgt{kBos, 5, 6, kEos};
  const std::vector<double> ones(3, 1.0);
  CHECK(weighted_nll(uniform, tgt, ones) == doctest::Approx(3.0 * std::log(10.0)));
  CHECK(weighted_nll(uniform, tgt, ones) == nll(uniform, tgt));

  LogProbMatrix single;
  single.rows = 1;
  single.cols = 3;
  single.data = {-5.0, -0.2, -5.0};
  const std::vector<TokenId> two{kBos, 1};
  const std::vector<double> six{6.0};
  CHECK(weighted_nll(single, two, six) == doctest::Approx(1.2));
  const std::vector<double> wrong(2, 1.0);
  CHECK_THROWS_AS(weighted_nll(single, two, wrong), Error);
}

TEST_CASE("analytic gradients match central differences") {
  ModelConfig c = tiny_config(14);
  c.seed = 3;
  const ModelState<double> m = init_model<double>(c);
  const std::vector<EncodedExample> batch{
      hand_example({5, 6, kSep, 7, 8, 9}, {kBos, 10, kSep, 11, 12, 13, kEos}, 4, 6.0),
      hand_example({8, 7}, {kBos, 12, 11, kEos}),
      hand_example({9, kSep, 5, kSep, 6, 6}, {kBos, 13, kSep, 10, kSep, 11, 11, kEos}, 6, 3.0),
  };
  const std::span<const EncodedExample> span(batch);
  std::vector<double> grad;
  loss_and_gradient(m, span, grad);
  REQUIRE(grad.size() == m.params.size());

  Rng rng(99);
  ModelState<double> probe = m;
  std::vector<double> scratch;
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t n = 0; n < 150; ++n) {
    const std::size_t i = rng.index(m.params.size());
    const double h = 1e-5;
    probe.params[i] = m.params[i] + h;
    const double up = loss_and_gradient(probe, span, scratch);
    probe.params[i] = m.params[i] - h;
    const double down = loss_and_gradient(probe, span, scratch);
    probe.params[i] = m.params[i];
    const double numeric = (up - down) / (2 * h);
    const double rel =
        std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, rel);
    ++checked;
  }
  CHECK(checked >= 100);
  CHECK(worst < 1e-3);
}

TEST_CASE("float and double models agree") {
  const Model f = init_model<float>(tiny_config(20));
  const ModelState<double> d = convert_model<double>(f);
  const std::vector<TokenId> src{5, 6, kSep, 7};
  const std::vector<TokenId> tgt{kBos, 9, kSep, 10, kEos};
  const LogProbMatrix a = forward_logprobs(f, src, tgt), b = forward_logprobs(d, src, tgt);
  for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-4));
}

TEST_CASE("one small step lowers the batch loss") {
  ModelConfig c = tiny_config(20);
  c.learning_rate = 1e-3;
  Model m = init_model<float>(c);
  const std::vector<EncodedExample> batch{hand_example({5, 6, 7}, {kBos, 8, 9, 10, kEos})};
  std::vector<float> grad;
  const double before = loss_and_gradient(m, std::span<const EncodedExample>(batch), grad);
  train_step(m, std::span<const EncodedExample>(batch));
  const double after = loss_and_gradient(m, std::span<const EncodedExample>(batch), grad);
  CHECK(after < before);
  CHECK(m.step == 1);
}

TEST_CASE("plain corpus is learned to high teacher-forced accuracy") {
  const Model m = trained_plain_model();
  const Corpus plain = corpus_of({{PhenomenonKind::None, 200}}, 21);
  std::size_t hits = 0, total = 0;
  for (const auto& ex : plain) {
    const EncodedExample e = encode(ex, vocab());
    const LogProbMatrix lp = forward_logprobs(m, e.src_ids, e.tgt_ids);
    for (std::size_t r = 0; r < lp.rows; ++r) {
      const auto row = lp.row(r);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      hits += best == e.tgt_ids[r + 1];
      ++total;
    }
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("context reaches the current-sentence predictions") {
  const Model m = trained_plain_model();
  Rng rng(4);
  ContextualExample ex = generate_example(lexicon(), PhenomenonKind::Gender, 1, 3, rng);
  const EncodedExample a = encode(ex, vocab());
  // Swap the cue noun for one of another gender.
  const Gender g = *lexicon().gender_of(ex.src_ctx[0][1]);
  const auto other = std::find_if(lexicon().nouns.begin(), lexicon().nouns.end(),
                                  [g](const Noun& n) { return n.gender != g; });
  ex.src_ctx[0][1] = other->form;
  ex.tgt_ctx[0][1] = target_form(other->form);
  const EncodedExample b = encode(ex, vocab());
  const LogProbMatrix la = forward_logprobs(m, a.src_ids, a.tgt_ids);
  const LogProbMatrix lb = forward_logprobs(m, b.src_ids, b.tgt_ids);
  const std::size_t row = a.current_start - 1;  // predicts the pronoun
  double diff = 0.0;
  for (std::size_t k = 0; k < la.cols; ++k) diff += std::abs(la.at(row, k) - lb.at(row, k));
  CHECK(diff > 1e-3);
}

TEST_CASE("zero lambda equals disabled weighting bit for bit") {
  const Corpus c = expand_context_sizes(corpus_of({{PhenomenonKind::Gender, 20}, {PhenomenonKind::None, 20}}, 2), 3);
  ModelConfig cfg = tiny_config(vocab().size());
  cfg.epochs = 2;
  Model a = init_model<float>(cfg);
  train(a, vocab(), std::span<const ContextualExample>(c));
  cfg.weighting = true;
  cfg.lambda = 0.0;
  Model b = init_model<float>(cfg);
  train(b, vocab(), std::span<const ContextualExample>(c));
  CHECK(a.params == b.params);
  cfg.lambda = 5.0;
  Model w = init_model<float>(cfg);
  train(w, vocab(), std::span<const ContextualExample>(c));
  CHECK(w.params != a.params);
}

TEST_CASE("training is deterministic and chains without decay") {
  const Corpus c = expand_context_sizes(corpus_of({{PhenomenonKind::None, 30}}, 8), 3);
  ModelConfig cfg = tiny_config(vocab().size());
  cfg.lr_decay = false;
  Model once = init_model<float>(cfg), chained = init_model<float>(cfg);
  train(once, vocab(), std::span<const ContextualExample>(c), {}, 2);
  train(chained, vocab(), std::span<const ContextualExample>(c), {}, 1);
  train(chained, vocab(), std::span<const ContextualExample>(c), {}, 1);
  CHECK(once.params == chained.params);
  CHECK(once.moment2 == chained.moment2);
  CHECK(once.epoch == 2);
  Model again = init_model<float>(cfg);
  train(again, vocab(), std::span<const ContextualExample>(c), {}, 2);
  CHECK(again.params == once.params);
}

TEST_CASE("empty training data is an input error") {
  Model m = init_model<float>(tiny_config(vocab().size()));
  CHECK_THROWS_AS(train(m, vocab(), std::span<const ContextualExample>()), Error);
}

TEST_CASE("kernel tables give matching training runs") {
  const Corpus c = expand_context_sizes(corpus_of({{PhenomenonKind::None, 20}}, 8), 3);
  ModelConfig cfg;
  cfg.vocab_size = vocab().size();
  cfg.epochs = 1;
  std::vector<std::vector<float>> results;
  for (const kernels::KernelTable* t : kernels::available_tables()) {
    REQUIRE(kernels::select(t->name));
    Model m = init_model<float>(cfg);
    train(m, vocab(), std::span<const ContextualExample>(c));
    results.push_back(m.params);
  }
  kernels::select("auto");
  for (std::size_t r = 1; r < results.size(); ++r) {
    double worst = 0.0;
    for (std::size_t i = 0; i < results[0].size(); ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(results[r][i] - results[0][i])));
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("decoding contracts") {
  const Model m = trained_plain_model();
  const Corpus c = corpus_of({{PhenomenonKind::Gender, 5}, {PhenomenonKind::None, 5}}, 77);
  for (const auto& ex : c) {
    const EncodedExample e = encode(ex, vocab());
    const Hypothesis greedy = decode_scored(m, e.src_ids, 1);
    // Greedy equals stepwise argmax under teacher forcing on its own output.
    std::vector<TokenId> prefix{kBos};
    prefix.insert(prefix.end(), greedy.ids.begin(), greedy.ids.end());
    if (greedy.finished) prefix.push_back(kEos);
    const LogProbMatrix lp = forward_logprobs(m, e.src_ids, prefix);
    for (std::size_t r = 0; r < lp.rows; ++r) {
      const auto row = lp.row(r);
      CHECK(std::max_element(row.begin(), row.end()) - row.begin() == prefix[r + 1]);
    }
    CHECK(greedy.logprob == doctest::Approx(sequence_logprob(m, e.src_ids, prefix, 1)));
    for (std::size_t beam : {2u, 4u}) {
      const Hypothesis h = decode_scored(m, e.src_ids, beam);
      CHECK(h.logprob >= greedy.logprob - 1e-9);
      CHECK(h.ids.size() <= m.config.max_len - 1);
    }
    CHECK(decode(m, e.src_ids, 1) == greedy.ids);
  }
  ModelConfig short_cfg = tiny_config(vocab().size());
  short_cfg.max_len = 5;
  const Model untrained = init_model<float>(short_cfg);
  const std::vector<TokenId> src{10, 11};
  CHECK(decode(untrained, src, 3).size() <= 4);
}

TEST_CASE("separator splitting") {
  CHECK(split_on_separator(std::vector<TokenId>{7, kSep, 8, 9}) == std::vector<TokenId>{8, 9});
  CHECK(split_on_separator(std::vector<TokenId>{7, 8}) == std::vector<TokenId>{7, 8});
  CHECK(split_on_separator(std::vector<TokenId>{kSep, kSep, 9}) == std::vector<TokenId>{9});
}

TEST_CASE("sequence log-probability") {
  const Model m = init_model<float>(tiny_config(20));
  const std::vector<TokenId> src{5, 6, 7};
  const std::vector<TokenId> tgt{kBos, 8, 9, 10, kEos};
  const LogProbMatrix lp = forward_logprobs(m, src, tgt);
  CHECK(sequence_logprob(m, src, tgt, 1) == doctest::Approx(-nll(lp, tgt)));
  CHECK(sequence_logprob(m, src, tgt, 4) == doctest::Approx(lp.at(3, kEos)));
  double previous = 0.0;
  for (std::size_t from = 4; from >= 1; --from) {
    const double v = sequence_logprob(m, src, tgt, from);
    CHECK(v <= previous);
    previous = v;
  }
  CHECK_THROWS_AS(sequence_logprob(m, src, tgt, 5), Error);
}

TEST_CASE("checkpoints round-trip exactly") {
  ModelConfig cfg = tiny_config(vocab().size());
  Model m = init_model<float>(cfg);
  const Corpus c = expand_context_sizes(corpus_of({{PhenomenonKind::None, 10}}, 1), 3);
  train(m, vocab(), std::span<const ContextualExample>(c), {}, 1);
  const Checkpoint<float> back = checkpoint_from_json<float>(checkpoint_to_json(m, vocab()));
  CHECK(back.model.params == m.params);
  CHECK(back.model.moment1 == m.moment1);
  CHECK(back.model.moment2 == m.moment2);
  CHECK(back.model.step == m.step);
  CHECK(back.vocab == vocab());
  CHECK(checkpoint_to_json(back.model, back.vocab) == checkpoint_to_json(m, vocab()));

  const ModelState<double> d = convert_model<double>(m);
  CHECK(checkpoint_from_json<double>(checkpoint_to_json(d, vocab())).model.params == d.params);
  CHECK_THROWS_AS(checkpoint_from_json<float>("{\"format\":\"other\"}"), Error);
}
