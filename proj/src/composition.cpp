#include "ctxlab/composition.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

#include "ctxlab/error.hpp"
#include "ctxlab/model.hpp"

namespace ctxlab {

namespace {
constexpr std::array<std::string_view, kReservedCount> kReserved{
    "[PAD]", "[BOS]", "[EOS]", "[SEP]", "[MASK]"};
}

Vocabulary::Vocabulary() {
  for (std::string_view t : kReserved) {
    index_.emplace(std::string(t), static_cast<TokenId>(tokens_.size()));
    tokens_.emplace_back(t);
  }
}

Vocabulary::Vocabulary(const std::vector<std::string>& forms) : Vocabulary() {
  for (const std::string& f : forms) {
    if (index_.contains(f)) continue;
    index_.emplace(f, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(f);
  }
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) {
    fail(ErrorKind::Encoding, "token '" + std::string(token) + "' is not in the vocabulary");
  }
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    fail(ErrorKind::Encoding, "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(const Sentence& sentence) const {
  std::vector<TokenId> out;
  out.reserve(sentence.size());
  for (const std::string& w : sentence) out.push_back(id(w));
  return out;
}

Sentence Vocabulary::decode(std::span<const TokenId> ids) const {
  Sentence out;
  out.reserve(ids.size());
  for (TokenId t : ids) out.push_back(token(t));
  return out;
}

Vocabulary build_vocabulary(const Lexicon& lexicon) {
  std::set<std::string> forms;
  for (std::string& f : lexicon.source_forms()) forms.insert(std::move(f));
  for (std::string& f : lexicon.target_forms()) forms.insert(std::move(f));
  return Vocabulary(std::vector<std::string>(forms.begin(), forms.end()));
}

CompositionSpec composition_spec_from_json(std::string_view text) {
  CompositionSpec spec;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    spec.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& part : j.at("parts")) {
      spec.parts.push_back({part.at("pool").get<std::string>(),
                            part.at("count").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed composition spec: ") + e.what());
  }
  return spec;
}

std::string composition_spec_to_json(const CompositionSpec& spec) {
  nlohmann::ordered_json j;
  j["seed"] = spec.seed;
  j["parts"] = nlohmann::ordered_json::array();
  for (const CompositionPart& p : spec.parts) {
    j["parts"].push_back({{"pool", p.pool}, {"count", p.count}});
  }
  return j.dump(2) + "\n";
}

Corpus compose(const PoolMap& pools, const CompositionSpec& spec) {
  std::set<std::string> seen;
  Corpus out;
  for (const CompositionPart& part : spec.parts) {
    if (!seen.insert(part.pool).second) {
      fail(ErrorKind::Config, "pool '" + part.pool + "' listed twice");
    }
    const auto it = pools.find(part.pool);
    if (it == pools.end()) fail(ErrorKind::Config, "unknown pool '" + part.pool + "'");
    const Corpus& pool = it->second;
    if (part.count > pool.size()) {
      fail(ErrorKind::Capacity, "pool '" + part.pool + "' holds " +
                                    std::to_string(pool.size()) + " examples, " +
                                    std::to_string(part.count) + " requested");
    }
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(spec.seed, "pool:" + part.pool));
    rng.shuffle(order);
    for (std::size_t i = 0; i < part.count; ++i) out.push_back(pool[order[i]]);
  }
  Rng rng(derive_seed(spec.seed, "compose-order"));
  rng.shuffle(out);
  return out;
}

double density(const Corpus& corpus, PhenomenonKind kind) {
  if (corpus.empty()) fail(ErrorKind::Domain, "density of an empty corpus");
  const auto n = std::count_if(corpus.begin(), corpus.end(), [kind](const auto& e) {
    return e.annotation && e.annotation->kind == kind;
  });
  return static_cast<double>(n) / static_cast<double>(corpus.size());
}

std::size_t variant_count(const ContextualExample& example, std::size_t max_ctx) {
  return std::min(example.context_size(), max_ctx) + 1;
}

ContextualExample with_context_size(const ContextualExample& example,
                                    std::size_t context_size) {
  const std::size_t available = example.context_size();
  if (context_size > available) {
    fail(ErrorKind::Range, "requested context size exceeds available context");
  }
  ContextualExample v;
  v.id = example.id;
  v.src = example.src;
  v.tgt = example.tgt;
  const auto drop = static_cast<std::ptrdiff_t>(available - context_size);
  v.src_ctx.assign(example.src_ctx.begin() + drop, example.src_ctx.end());
  v.tgt_ctx.assign(example.tgt_ctx.begin() + drop, example.tgt_ctx.end());
  if (example.annotation && example.annotation->antecedent_distance <= context_size) {
    v.annotation = example.annotation;
  }
  return v;
}

Corpus expand_context_sizes(const Corpus& corpus, std::size_t max_ctx) {
  Corpus out;
  for (const ContextualExample& ex : corpus) {
    const std::size_t top = std::min(ex.context_size(), max_ctx);
    for (std::size_t c = 0; c <= top; ++c) out.push_back(with_context_size(ex, c));
  }
  return out;
}

EncodedExample encode(const ContextualExample& example, const Vocabulary& vocab,
                      const WeightingOptions& weighting) {
  if (example.src_ctx.size() != example.tgt_ctx.size()) {
    fail(ErrorKind::Encoding, "context sides differ in length");
  }
  EncodedExample enc;
  enc.origin_id = example.id;
  enc.context_size = example.context_size();
  enc.tgt_ids.push_back(kBos);
  for (std::size_t c = 0; c < example.src_ctx.size(); ++c) {
    for (const std::string& w : example.src_ctx[c]) enc.src_ids.push_back(vocab.id(w));
    enc.src_ids.push_back(kSep);
    for (const std::string& w : example.tgt_ctx[c]) enc.tgt_ids.push_back(vocab.id(w));
    enc.tgt_ids.push_back(kSep);
  }
  for (const std::string& w : example.src) enc.src_ids.push_back(vocab.id(w));
  enc.current_start = enc.tgt_ids.size();
  for (const std::string& w : example.tgt) enc.tgt_ids.push_back(vocab.id(w));
  enc.tgt_ids.push_back(kEos);

  // weights[j] belongs to the prediction of tgt_ids[j + 1].
  enc.weights.assign(enc.tgt_ids.size() - 1, 1.0);
  if (weighting.enabled && example.annotation) {
    for (std::size_t idx : example.annotation->target_indices) {
      const std::size_t pos = enc.current_start + idx;
      if (pos >= enc.tgt_ids.size() - 1) {
        fail(ErrorKind::Encoding, "annotation index outside the current sentence");
      }
      enc.weights[pos - 1] = token_weight(true, weighting.lambda);
    }
  }
  return enc;
}

}  // namespace ctxlab
