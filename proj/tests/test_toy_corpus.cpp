#include "doctest.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "ctxlab/error.hpp"
#include "ctxlab/io.hpp"
#include "ctxlab/toy_corpus.hpp"

using namespace ctxlab;

namespace {

const Lexicon& default_lexicon() {
  static const Lexicon lex = build_lexicon({}, 7);
  return lex;
}

Corpus sample_corpus(std::uint64_t seed = 3) {
  CorpusSpec spec;
  spec.counts = {{PhenomenonKind::None, 100},
                 {PhenomenonKind::Gender, 10},
                 {PhenomenonKind::Formality, 10},
                 {PhenomenonKind::Auxiliary, 10}};
  spec.seed = seed;
  return generate_corpus(spec, default_lexicon());
}

bool contains(const Sentence& s, std::string_view w) {
  return std::find(s.begin(), s.end(), w) != s.end();
}

}  // namespace

TEST_CASE("default lexicon matches the pinned golden file") {
  const std::string golden = io::read_file(std::string(CTXLAB_GOLDEN_DIR) + "/lexicon_default.json");
  CHECK(lexicon_to_json(default_lexicon()) == golden);
  CHECK(lexicon_from_json(golden) == default_lexicon());
}

TEST_CASE("lexicon shape and uniqueness") {
  const Lexicon& lex = default_lexicon();
  CHECK(lex.nouns.size() == 30);
  std::set<Gender> genders;
  for (const Noun& n : lex.nouns) genders.insert(n.gender);
  CHECK(genders.size() == 3);

  const auto forms = lex.source_forms();
  const std::set<std::string> unique(forms.begin(), forms.end());
  CHECK(unique.size() == forms.size());
  for (const std::string& f : forms) CHECK(f.front() != '[');
  CHECK(build_lexicon({}, 7) == lex);
  CHECK_FALSE(build_lexicon({}, 8) == lex);
}

TEST_CASE("lexicon size preconditions") {
  LexiconConfig c;
  c.nouns = 0;
  CHECK_THROWS_AS(build_lexicon(c, 1), Error);
  c = {};
  c.names = 1;  // the ellipsis rule needs two distinct names
  CHECK_THROWS_AS(build_lexicon(c, 1), Error);
}

TEST_CASE("target forms") {
  CHECK(target_form("swim") == "t_swim");
  CHECK(target_form(".") == ".");
}

TEST_CASE("gender example follows the antecedent noun") {
  const Lexicon& lex = default_lexicon();
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    const ContextualExample ex = generate_example(lex, PhenomenonKind::Gender, 1 + s % 3, 3, rng);
    validate(ex);
    REQUIRE(ex.annotation);
    const Sentence& cue = ex.src_ctx.front();
    CHECK(cue[0] == "the");
    const auto g = lex.gender_of(cue[1]);
    REQUIRE(g);
    CHECK(ex.tgt[0] == lex.pronoun(*g));
    CHECK(ex.annotation->expected_word == lex.pronoun(*g));
    CHECK(ex.src[0] == "it");
    // No noun appears in the current sentence, so context is necessary.
    for (const std::string& w : ex.src) CHECK_FALSE(lex.gender_of(w).has_value());
    CHECK(ex.src_ctx.size() == ex.annotation->antecedent_distance);
  }
}

TEST_CASE("formality example follows the marker") {
  const Lexicon& lex = default_lexicon();
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    const ContextualExample ex = generate_example(lex, PhenomenonKind::Formality, 1, 3, rng);
    const bool formal = ex.src_ctx.front()[1] == lex.formal_marker;
    CHECK(ex.annotation->expected_word == (formal ? "vu" : "tu"));
    CHECK(ex.tgt[0] == ex.annotation->expected_word);
  }
}

TEST_CASE("auxiliary example recovers the verb from the cue") {
  const Lexicon& lex = default_lexicon();
  Rng rng(9);
  const ContextualExample ex = generate_example(lex, PhenomenonKind::Auxiliary, 2, 3, rng);
  REQUIRE(ex.src_ctx.size() == 2);
  const Sentence& cue = ex.src_ctx.front();
  CHECK(cue[1] == "can");
  const std::string verb = target_form(cue[2]);
  CHECK(ex.annotation->expected_word == verb);
  CHECK(ex.tgt[ex.annotation->target_indices[0]] == verb);
  CHECK(ex.src == Sentence{ex.src[0], "can", "too", "."});
  CHECK(ex.src[0] != cue[0]);
  // Filler between cue and current is a plain sentence.
  CHECK(ex.src_ctx[1][0] == "the");
  CHECK_FALSE(contains(ex.src_ctx[1], "here"));
}

TEST_CASE("distance outside the context range is rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(generate_example(default_lexicon(), PhenomenonKind::Gender, 0, 3, rng), Error);
  CHECK_THROWS_AS(generate_example(default_lexicon(), PhenomenonKind::Gender, 4, 3, rng), Error);
}

TEST_CASE("corpus counts, annotation invariants and ids") {
  const Corpus corpus = sample_corpus();
  CHECK(corpus.size() == 130);
  CHECK(filter_kind(corpus, PhenomenonKind::Gender).size() == 10);
  CHECK(filter_kind(corpus, PhenomenonKind::Formality).size() == 10);
  CHECK(filter_kind(corpus, PhenomenonKind::None).size() == 100);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const ContextualExample& ex = corpus[i];
    CHECK(ex.id == static_cast<std::int64_t>(i));
    CHECK(ex.src_ctx.size() == ex.tgt_ctx.size());
    CHECK(ex.context_size() <= 3);
    if (ex.annotation) {
      for (std::size_t idx : ex.annotation->target_indices) {
        CHECK(ex.tgt[idx] == ex.annotation->expected_word);
      }
      CHECK(ex.annotation->antecedent_distance <= ex.context_size());
    } else {
      CHECK(ex.tgt.size() == ex.src.size());
    }
  }
  CorpusSpec none_spec;
  none_spec.counts = {{PhenomenonKind::Gender, 0}, {PhenomenonKind::None, 5}};
  for (const auto& ex : generate_corpus(none_spec, default_lexicon())) CHECK_FALSE(ex.annotation);
}

TEST_CASE("id offset shifts the id range") {
  CorpusSpec spec;
  spec.counts = {{PhenomenonKind::None, 5}};
  spec.id_offset = 1000;
  const Corpus c = generate_corpus(spec, default_lexicon());
  CHECK(c.front().id == 1000);
  CHECK(c.back().id == 1004);
}

TEST_CASE("fixed distance policy") {
  CorpusSpec spec;
  spec.counts = {{PhenomenonKind::Gender, 30}};
  spec.distance.mode = DistancePolicy::Mode::Fixed;
  spec.distance.fixed = 2;
  for (const auto& ex : generate_corpus(spec, default_lexicon())) {
    CHECK(ex.annotation->antecedent_distance == 2);
  }
  spec.distance.fixed = 4;
  CHECK_THROWS_AS(generate_corpus(spec, default_lexicon()), Error);
}

TEST_CASE("JSONL serialization is deterministic and round-trips") {
  std::ostringstream a, b;
  write_jsonl(a, sample_corpus());
  write_jsonl(b, sample_corpus());
  CHECK(a.str() == b.str());
  std::istringstream in(a.str());
  CHECK(read_jsonl(in) == sample_corpus());

  std::ostringstream c;
  write_jsonl(c, sample_corpus(4));
  CHECK(c.str() != a.str());
}

TEST_CASE("malformed inputs raise typed errors") {
  CHECK_THROWS_AS(from_json_line("{not json"), Error);
  ContextualExample bad;
  bad.src = {"it", "is", "x", "."};
  bad.tgt = {"pron_m", "t_is", "t_x", "."};
  bad.src_ctx = {{"the", "n", "is", "here", "."}};
  bad.annotation = Annotation{PhenomenonKind::Gender, "pron_f", {0}, 1};
  CHECK_THROWS_AS(validate(bad), Error);
}
