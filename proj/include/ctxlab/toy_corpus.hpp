#pragma once

// Synthetic document-level parallel data. The source language is a small
// ASCII toy language; every content word w translates to "t_" + w, except
// for three context-dependent decisions (pronoun gender, second-person
// formality and the verb of an elided verb phrase) whose cue sits in an
// earlier sentence.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxlab/rng.hpp"

namespace ctxlab {

using Sentence = std::vector<std::string>;

enum class Gender { M, F, N };
enum class PhenomenonKind { Gender, Formality, Auxiliary, None };

inline constexpr std::array<PhenomenonKind, 3> kContextualKinds{
    PhenomenonKind::Gender, PhenomenonKind::Formality,
    PhenomenonKind::Auxiliary};
inline constexpr std::array<PhenomenonKind, 4> kAllKinds{
    PhenomenonKind::Gender, PhenomenonKind::Formality,
    PhenomenonKind::Auxiliary, PhenomenonKind::None};

std::string_view to_string(PhenomenonKind kind);
PhenomenonKind parse_kind(std::string_view name);
std::string_view to_string(Gender g);
Gender parse_gender(std::string_view name);

// Fixed function words of the toy source language.
namespace words {
inline constexpr std::string_view kThe = "the";
inline constexpr std::string_view kIs = "is";
inline constexpr std::string_view kHere = "here";
inline constexpr std::string_view kIt = "it";
inline constexpr std::string_view kHello = "hello";
inline constexpr std::string_view kYou = "you";
inline constexpr std::string_view kAre = "are";
inline constexpr std::string_view kCan = "can";
inline constexpr std::string_view kToo = "too";
inline constexpr std::string_view kStop = ".";
inline constexpr std::array<std::string_view, 10> kFunctionWords{
    kThe, kIs, kHere, kIt, kHello, kYou, kAre, kCan, kToo, kStop};
}  // namespace words

// Word-by-word target counterpart of a source word.
std::string target_form(std::string_view source_word);

struct LexiconConfig {
  std::size_t nouns = 30;
  std::size_t intransitive_verbs = 10;
  std::size_t ellipsis_verbs = 10;
  std::size_t adjectives = 10;
  std::size_t names = 10;
};

struct Noun {
  std::string form;
  Gender gender;

  friend bool operator==(const Noun&, const Noun&) = default;
};

struct Lexicon {
  std::vector<Noun> nouns;
  std::vector<std::string> intransitive_verbs;
  std::vector<std::string> ellipsis_verbs;
  std::vector<std::string> adjectives;
  std::vector<std::string> names;
  std::string formal_marker = "sir";
  std::string informal_marker = "mate";
  std::string pron_m = "pron_m";
  std::string pron_f = "pron_f";
  std::string pron_n = "pron_n";
  std::string formal_you = "vu";
  std::string informal_you = "tu";

  const std::string& pronoun(Gender g) const;
  std::array<std::string, 3> pronouns() const { return {pron_m, pron_f, pron_n}; }
  std::optional<Gender> gender_of(std::string_view noun) const;

  // Every surface form that can occur in a source or target sentence,
  // without reserved tokens and without duplicates, in a fixed order.
  std::vector<std::string> source_forms() const;
  std::vector<std::string> target_forms() const;

  friend bool operator==(const Lexicon&, const Lexicon&) = default;
};

Lexicon build_lexicon(const LexiconConfig& config, std::uint64_t seed);

struct Annotation {
  PhenomenonKind kind = PhenomenonKind::None;
  std::string expected_word;
  std::vector<std::size_t> target_indices;
  std::size_t antecedent_distance = 1;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct ContextualExample {
  std::int64_t id = 0;
  Sentence src;
  Sentence tgt;
  std::vector<Sentence> src_ctx;  // oldest first
  std::vector<Sentence> tgt_ctx;
  std::optional<Annotation> annotation;

  std::size_t context_size() const { return src_ctx.size(); }
  PhenomenonKind kind() const {
    return annotation ? annotation->kind : PhenomenonKind::None;
  }

  friend bool operator==(const ContextualExample&,
                         const ContextualExample&) = default;
};

using Corpus = std::vector<ContextualExample>;

// Throws Error(Input) if an example violates the structural invariants.
void validate(const ContextualExample& example);

struct DistancePolicy {
  enum class Mode { Uniform, Fixed };
  Mode mode = Mode::Uniform;
  std::size_t fixed = 1;
};

struct CorpusSpec {
  std::map<PhenomenonKind, std::size_t> counts;
  std::size_t max_context = 3;
  DistancePolicy distance;
  std::uint64_t seed = 0;
  // First id of the generated corpus; held-out sets use disjoint ranges.
  std::int64_t id_offset = 0;
};

ContextualExample generate_example(const Lexicon& lexicon, PhenomenonKind kind,
                                   std::size_t antecedent_distance,
                                   std::size_t max_context, Rng& rng);

Corpus generate_corpus(const CorpusSpec& spec, const Lexicon& lexicon);

// Examples of one kind, in corpus order.
Corpus filter_kind(const Corpus& corpus, PhenomenonKind kind);

// --- serialization ---------------------------------------------------------

std::string to_json_line(const ContextualExample& example);
ContextualExample from_json_line(std::string_view line);

void write_jsonl(std::ostream& out, const Corpus& corpus);
Corpus read_jsonl(std::istream& in);
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

std::string lexicon_to_json(const Lexicon& lexicon);
Lexicon lexicon_from_json(std::string_view text);
void save_lexicon(const std::string& path, const Lexicon& lexicon);
Lexicon load_lexicon(const std::string& path);

}  // namespace ctxlab
