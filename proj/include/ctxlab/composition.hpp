#pragma once

// Dataset assembly: mixing pools at controlled density, expanding each
// document position into every context size, and laying examples out as
// "ctx [SEP] ... [SEP] current" id sequences with per-token loss weights.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxlab/toy_corpus.hpp"

namespace ctxlab {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kMask = 4;
inline constexpr std::size_t kReservedCount = 5;

inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::string_view kSepToken = "[SEP]";

class Vocabulary {
 public:
  Vocabulary();
  // Reserved tokens followed by the given forms (duplicates ignored).
  explicit Vocabulary(const std::vector<std::string>& forms);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  // Throws Error(Encoding) naming the token when absent.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(const Sentence& sentence) const;
  Sentence decode(std::span<const TokenId> ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

Vocabulary build_vocabulary(const Lexicon& lexicon);

struct CompositionPart {
  std::string pool;
  std::size_t count = 0;
};

struct CompositionSpec {
  std::uint64_t seed = 0;
  std::vector<CompositionPart> parts;
};

CompositionSpec composition_spec_from_json(std::string_view text);
std::string composition_spec_to_json(const CompositionSpec& spec);

using PoolMap = std::map<std::string, Corpus>;

// Each part samples without replacement from its pool; the sample for a
// pool is a prefix of a seed-determined permutation, so growing a count only
// adds examples. The concatenation is then shuffled with the spec seed.
Corpus compose(const PoolMap& pools, const CompositionSpec& spec);

double density(const Corpus& corpus, PhenomenonKind kind);

// One variant per context size 0..min(available, max_ctx), each keeping the
// most recent sentences. A variant that no longer reaches the antecedent
// loses its annotation.
Corpus expand_context_sizes(const Corpus& corpus, std::size_t max_ctx);
std::size_t variant_count(const ContextualExample& example, std::size_t max_ctx);

// The same example truncated to its most recent `context_size` sentences.
ContextualExample with_context_size(const ContextualExample& example,
                                    std::size_t context_size);

struct WeightingOptions {
  bool enabled = false;
  double lambda = 0.0;
};

struct EncodedExample {
  std::vector<TokenId> src_ids;  // ctx_1 [SEP] ... [SEP] current
  std::vector<TokenId> tgt_ids;  // [BOS] ctx_1 [SEP] ... [SEP] current [EOS]
  std::vector<double> weights;   // one per predicted position (|tgt_ids| - 1)
  std::size_t current_start = 1; // index into tgt_ids
  std::int64_t origin_id = 0;
  std::size_t context_size = 0;

  std::size_t current_length() const { return tgt_ids.size() - 1 - current_start; }
};

EncodedExample encode(const ContextualExample& example, const Vocabulary& vocab,
                      const WeightingOptions& weighting = {});

}  // namespace ctxlab
