#include "ctxlab/toy_corpus.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ctxlab/error.hpp"
#include "ctxlab/io.hpp"

namespace ctxlab {

using ojson = nlohmann::ordered_json;

std::string_view to_string(PhenomenonKind kind) {
  switch (kind) {
    case PhenomenonKind::Gender: return "Gender";
    case PhenomenonKind::Formality: return "Formality";
    case PhenomenonKind::Auxiliary: return "Auxiliary";
    case PhenomenonKind::None: return "None";
  }
  return "None";
}

PhenomenonKind parse_kind(std::string_view name) {
  for (PhenomenonKind k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorKind::Input, "unknown phenomenon kind '" + std::string(name) + "'");
}

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::M: return "M";
    case Gender::F: return "F";
    case Gender::N: return "N";
  }
  return "N";
}

Gender parse_gender(std::string_view name) {
  if (name == "M") return Gender::M;
  if (name == "F") return Gender::F;
  if (name == "N") return Gender::N;
  fail(ErrorKind::Input, "unknown gender '" + std::string(name) + "'");
}

std::string target_form(std::string_view source_word) {
  if (source_word == words::kStop) return std::string(words::kStop);
  return "t_" + std::string(source_word);
}

const std::string& Lexicon::pronoun(Gender g) const {
  switch (g) {
    case Gender::M: return pron_m;
    case Gender::F: return pron_f;
    case Gender::N: return pron_n;
  }
  return pron_n;
}

std::optional<Gender> Lexicon::gender_of(std::string_view noun) const {
  for (const Noun& n : nouns) {
    if (n.form == noun) return n.gender;
  }
  return std::nullopt;
}

std::vector<std::string> Lexicon::source_forms() const {
  std::vector<std::string> out;
  for (std::string_view w : words::kFunctionWords) out.emplace_back(w);
  for (const Noun& n : nouns) out.push_back(n.form);
  for (const auto* list : {&intransitive_verbs, &ellipsis_verbs, &adjectives, &names}) {
    out.insert(out.end(), list->begin(), list->end());
  }
  out.push_back(formal_marker);
  out.push_back(informal_marker);
  return out;
}

std::vector<std::string> Lexicon::target_forms() const {
  std::vector<std::string> out;
  // "it" and "you" never translate word by word.
  for (const std::string& w : source_forms()) {
    if (w == words::kIt || w == words::kYou) continue;
    out.push_back(target_form(w));
  }
  for (const std::string* w : {&pron_m, &pron_f, &pron_n, &formal_you, &informal_you}) {
    out.push_back(*w);
  }
  return out;
}

namespace {

constexpr std::string_view kOnsets = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::string_view kCodas = "klmnrs";

std::string random_word(Rng& rng) {
  std::string w;
  const std::size_t syllables = 2 + rng.index(2);
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kOnsets[rng.index(kOnsets.size())];
    w += kVowels[rng.index(kVowels.size())];
  }
  if (rng.bernoulli(0.5)) w += kCodas[rng.index(kCodas.size())];
  return w;
}

class WordFactory {
 public:
  explicit WordFactory(std::uint64_t seed) : rng_(seed) {
    for (std::string_view w : words::kFunctionWords) taken_.emplace(w);
    taken_.insert({"sir", "mate", "vu", "tu", "pron_m", "pron_f", "pron_n"});
  }

  std::vector<std::string> take(std::size_t n) {
    std::vector<std::string> out;
    while (out.size() < n) {
      std::string w = random_word(rng_);
      if (taken_.insert(w).second) out.push_back(std::move(w));
    }
    return out;
  }

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
  std::set<std::string> taken_;
};

Sentence plain_sentence(const Lexicon& lex, Rng& rng) {
  return {std::string(words::kThe), rng.pick(lex.nouns).form,
          rng.pick(lex.intransitive_verbs), std::string(words::kStop)};
}

Sentence word_by_word(const Sentence& src) {
  Sentence out;
  out.reserve(src.size());
  for (const std::string& w : src) out.push_back(target_form(w));
  return out;
}

void push_context(ContextualExample& ex, Sentence src) {
  ex.tgt_ctx.push_back(word_by_word(src));
  ex.src_ctx.push_back(std::move(src));
}

}  // namespace

Lexicon build_lexicon(const LexiconConfig& config, std::uint64_t seed) {
  if (config.nouns < 3) {
    fail(ErrorKind::Config, "lexicon needs at least 3 nouns, got " +
                                std::to_string(config.nouns));
  }
  if (config.adjectives == 0 || config.intransitive_verbs == 0 ||
      config.ellipsis_verbs == 0 || config.names < 2) {
    fail(ErrorKind::Config,
         "lexicon needs at least one adjective, intransitive verb and "
         "ellipsis verb, and two names");
  }
  WordFactory factory(derive_seed(seed, "lexicon"));
  Lexicon lex;
  for (std::string& form : factory.take(config.nouns)) {
    lex.nouns.push_back({std::move(form), Gender::M});
  }
  lex.intransitive_verbs = factory.take(config.intransitive_verbs);
  lex.ellipsis_verbs = factory.take(config.ellipsis_verbs);
  lex.adjectives = factory.take(config.adjectives);
  lex.names = factory.take(config.names);
  Rng gender_rng(derive_seed(seed, "gender"));
  for (Noun& n : lex.nouns) n.gender = static_cast<Gender>(gender_rng.index(3));
  return lex;
}

void validate(const ContextualExample& ex) {
  if (ex.src_ctx.size() != ex.tgt_ctx.size()) {
    fail(ErrorKind::Input, "example " + std::to_string(ex.id) +
                               ": source and target context sizes differ");
  }
  if (!ex.annotation) return;
  const Annotation& a = *ex.annotation;
  if (a.kind == PhenomenonKind::None) {
    fail(ErrorKind::Input, "example " + std::to_string(ex.id) +
                               ": annotation with kind None");
  }
  for (std::size_t idx : a.target_indices) {
    if (idx >= ex.tgt.size() || ex.tgt[idx] != a.expected_word) {
      fail(ErrorKind::Input, "example " + std::to_string(ex.id) +
                                 ": annotated index does not hold the expected word");
    }
  }
  if (a.antecedent_distance < 1 || a.antecedent_distance > ex.src_ctx.size()) {
    fail(ErrorKind::Input, "example " + std::to_string(ex.id) +
                               ": antecedent distance outside the available context");
  }
}

ContextualExample generate_example(const Lexicon& lex, PhenomenonKind kind,
                                   std::size_t distance, std::size_t max_context,
                                   Rng& rng) {
  ContextualExample ex;
  if (kind == PhenomenonKind::None) {
    const std::size_t c = rng.index(max_context + 1);
    for (std::size_t i = 0; i < c; ++i) push_context(ex, plain_sentence(lex, rng));
    ex.src = plain_sentence(lex, rng);
    ex.tgt = word_by_word(ex.src);
    return ex;
  }
  if (distance < 1 || distance > max_context) {
    fail(ErrorKind::Range, "antecedent distance " + std::to_string(distance) +
                               " outside 1.." + std::to_string(max_context));
  }

  Annotation ann;
  ann.kind = kind;
  ann.antecedent_distance = distance;
  const std::string stop(words::kStop);
  switch (kind) {
    case PhenomenonKind::Gender: {
      const Noun& noun = rng.pick(lex.nouns);
      push_context(ex, {std::string(words::kThe), noun.form,
                        std::string(words::kIs), std::string(words::kHere), stop});
      const std::string& adj = rng.pick(lex.adjectives);
      ex.src = {std::string(words::kIt), std::string(words::kIs), adj, stop};
      ex.tgt = {lex.pronoun(noun.gender), target_form(words::kIs),
                target_form(adj), stop};
      ann.expected_word = lex.pronoun(noun.gender);
      ann.target_indices = {0};
      break;
    }
    case PhenomenonKind::Formality: {
      const bool formal = rng.bernoulli(0.5);
      push_context(ex, {std::string(words::kHello),
                        formal ? lex.formal_marker : lex.informal_marker, stop});
      const std::string& adj = rng.pick(lex.adjectives);
      const std::string& you = formal ? lex.formal_you : lex.informal_you;
      ex.src = {std::string(words::kYou), std::string(words::kAre), adj, stop};
      ex.tgt = {you, target_form(words::kAre), target_form(adj), stop};
      ann.expected_word = you;
      ann.target_indices = {0};
      break;
    }
    case PhenomenonKind::Auxiliary: {
      const std::size_t first = rng.index(lex.names.size());
      std::size_t second = rng.index(lex.names.size() - 1);
      if (second >= first) ++second;
      const std::string& verb = rng.pick(lex.ellipsis_verbs);
      push_context(ex, {lex.names[first], std::string(words::kCan), verb, stop});
      const std::string& name2 = lex.names[second];
      ex.src = {name2, std::string(words::kCan), std::string(words::kToo), stop};
      ex.tgt = {target_form(name2), target_form(words::kCan), target_form(verb),
                target_form(words::kToo), stop};
      ann.expected_word = target_form(verb);
      ann.target_indices = {2};
      break;
    }
    case PhenomenonKind::None:
      break;
  }
  for (std::size_t i = 1; i < distance; ++i) push_context(ex, plain_sentence(lex, rng));
  ex.annotation = std::move(ann);
  return ex;
}

Corpus generate_corpus(const CorpusSpec& spec, const Lexicon& lexicon) {
  if (spec.distance.mode == DistancePolicy::Mode::Fixed &&
      (spec.distance.fixed < 1 || spec.distance.fixed > spec.max_context)) {
    fail(ErrorKind::Config, "fixed antecedent distance exceeds max context size");
  }
  Corpus corpus;
  for (PhenomenonKind kind : kAllKinds) {
    const auto it = spec.counts.find(kind);
    if (it == spec.counts.end()) continue;
    if (kind != PhenomenonKind::None && it->second > 0 && spec.max_context == 0) {
      fail(ErrorKind::Config, "contextual phenomena require max context >= 1");
    }
    Rng rng(derive_seed(spec.seed, to_string(kind)));
    for (std::size_t i = 0; i < it->second; ++i) {
      std::size_t distance = 1;
      if (kind != PhenomenonKind::None) {
        distance = spec.distance.mode == DistancePolicy::Mode::Fixed
                       ? spec.distance.fixed
                       : 1 + rng.index(spec.max_context);
      }
      corpus.push_back(generate_example(lexicon, kind, distance, spec.max_context, rng));
    }
  }
  Rng order(derive_seed(spec.seed, "corpus-order"));
  order.shuffle(corpus);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    corpus[i].id = spec.id_offset + static_cast<std::int64_t>(i);
  }
  return corpus;
}

Corpus filter_kind(const Corpus& corpus, PhenomenonKind kind) {
  Corpus out;
  std::copy_if(corpus.begin(), corpus.end(), std::back_inserter(out),
               [kind](const ContextualExample& e) { return e.kind() == kind; });
  return out;
}

// --- serialization ---------------------------------------------------------

std::string to_json_line(const ContextualExample& ex) {
  ojson j;
  j["id"] = ex.id;
  j["src"] = ex.src;
  j["tgt"] = ex.tgt;
  j["src_ctx"] = ex.src_ctx;
  j["tgt_ctx"] = ex.tgt_ctx;
  if (ex.annotation) {
    ojson a;
    a["kind"] = std::string(to_string(ex.annotation->kind));
    a["expected_word"] = ex.annotation->expected_word;
    a["target_indices"] = ex.annotation->target_indices;
    a["antecedent_distance"] = ex.annotation->antecedent_distance;
    j["annotation"] = std::move(a);
  } else {
    j["annotation"] = nullptr;
  }
  return j.dump();
}

ContextualExample from_json_line(std::string_view line) {
  ContextualExample ex;
  try {
    const ojson j = ojson::parse(line);
    ex.id = j.at("id").get<std::int64_t>();
    ex.src = j.at("src").get<Sentence>();
    ex.tgt = j.at("tgt").get<Sentence>();
    ex.src_ctx = j.at("src_ctx").get<std::vector<Sentence>>();
    ex.tgt_ctx = j.at("tgt_ctx").get<std::vector<Sentence>>();
    const ojson& a = j.at("annotation");
    if (!a.is_null()) {
      Annotation ann;
      ann.kind = parse_kind(a.at("kind").get<std::string>());
      ann.expected_word = a.at("expected_word").get<std::string>();
      ann.target_indices = a.at("target_indices").get<std::vector<std::size_t>>();
      ann.antecedent_distance = a.at("antecedent_distance").get<std::size_t>();
      ex.annotation = std::move(ann);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Input, std::string("malformed corpus line: ") + e.what());
  }
  validate(ex);
  return ex;
}

void write_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const ContextualExample& ex : corpus) out << to_json_line(ex) << '\n';
}

Corpus read_jsonl(std::istream& in) {
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    corpus.push_back(from_json_line(line));
  }
  return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ostringstream out;
  write_jsonl(out, corpus);
  io::write_file(path, out.str());
}

Corpus load_corpus(const std::string& path) {
  std::istringstream in(io::read_file(path));
  return read_jsonl(in);
}

std::string lexicon_to_json(const Lexicon& lex) {
  ojson j;
  ojson nouns = ojson::array();
  for (const Noun& n : lex.nouns) {
    nouns.push_back({{"form", n.form}, {"gender", std::string(to_string(n.gender))}});
  }
  j["nouns"] = std::move(nouns);
  j["intransitive_verbs"] = lex.intransitive_verbs;
  j["ellipsis_verbs"] = lex.ellipsis_verbs;
  j["adjectives"] = lex.adjectives;
  j["names"] = lex.names;
  j["formality_markers"] = {lex.formal_marker, lex.informal_marker};
  j["pronouns"] = {{"M", lex.pron_m}, {"F", lex.pron_f}, {"N", lex.pron_n}};
  j["second_person"] = {{"formal", lex.formal_you}, {"informal", lex.informal_you}};
  return j.dump(2) + "\n";
}

Lexicon lexicon_from_json(std::string_view text) {
  Lexicon lex;
  try {
    const ojson j = ojson::parse(text);
    for (const ojson& n : j.at("nouns")) {
      lex.nouns.push_back({n.at("form").get<std::string>(),
                           parse_gender(n.at("gender").get<std::string>())});
    }
    lex.intransitive_verbs = j.at("intransitive_verbs").get<std::vector<std::string>>();
    lex.ellipsis_verbs = j.at("ellipsis_verbs").get<std::vector<std::string>>();
    lex.adjectives = j.at("adjectives").get<std::vector<std::string>>();
    lex.names = j.at("names").get<std::vector<std::string>>();
    const auto markers = j.at("formality_markers").get<std::vector<std::string>>();
    if (markers.size() != 2) fail(ErrorKind::Input, "expected exactly two formality markers");
    lex.formal_marker = markers[0];
    lex.informal_marker = markers[1];
    const ojson& p = j.at("pronouns");
    lex.pron_m = p.at("M").get<std::string>();
    lex.pron_f = p.at("F").get<std::string>();
    lex.pron_n = p.at("N").get<std::string>();
    const ojson& y = j.at("second_person");
    lex.formal_you = y.at("formal").get<std::string>();
    lex.informal_you = y.at("informal").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Input, std::string("malformed lexicon: ") + e.what());
  }
  return lex;
}

void save_lexicon(const std::string& path, const Lexicon& lexicon) {
  io::write_file(path, lexicon_to_json(lexicon));
}

Lexicon load_lexicon(const std::string& path) {
  return lexicon_from_json(io::read_file(path));
}

}  // namespace ctxlab
