#pragma once

// Micro concatenation encoder-decoder. One encoder reads
// "ctx [SEP] ... [SEP] current"; an autoregressive decoder with
// cross-attention produces "ctx [SEP] ... [SEP] current [EOS]". Tokens carry
// learned embeddings of their sentence index and of their position inside
// the sentence, so a target slot can find its aligned source word.
//
// Parameters live in one flat array; ParamLayout names the slices. All
// routines are templated on the scalar type: float for experiments, double
// for gradient checking.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxlab/composition.hpp"
#include "ctxlab/rng.hpp"

namespace ctxlab {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t heads = 2;
  std::size_t encoder_layers = 1;
  std::size_t decoder_layers = 1;
  std::size_t max_len = 96;
  std::size_t max_positions = 16;
  std::size_t max_segments = 8;
  std::string optimizer = "adam";  // "adam" or "sgd"
  double learning_rate = 2e-3;
  // Linear decay to zero over the updates of each train() call.
  bool lr_decay = true;
  double clip_norm = 1.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 12;
  std::uint64_t seed = 1;
  bool weighting = false;
  double lambda = 0.0;

  void validate() const;
  WeightingOptions weighting_options() const { return {weighting, lambda}; }
};

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

struct LinearSlice {
  std::size_t w = 0, b = 0, in = 0, out = 0;
};
struct NormSlice {
  std::size_t gain = 0, bias = 0;
};
struct AttentionSlice {
  LinearSlice q, k, v, o;
};
struct FeedForwardSlice {
  LinearSlice up, down;
};
struct EncoderLayerSlice {
  NormSlice norm1;
  AttentionSlice attn;
  NormSlice norm2;
  FeedForwardSlice ffn;
};
struct DecoderLayerSlice {
  NormSlice norm1;
  AttentionSlice self_attn;
  NormSlice norm2;
  AttentionSlice cross_attn;
  NormSlice norm3;
  FeedForwardSlice ffn;
};

struct TensorInfo {
  enum class Init { Xavier, Embedding, One, Zero };
  std::string name;
  std::size_t offset = 0, rows = 0, cols = 0;
  Init init = Init::Zero;
};

struct ParamLayout {
  std::size_t token_embedding = 0, position_embedding = 0, segment_embedding = 0;
  std::vector<EncoderLayerSlice> encoder;
  NormSlice encoder_norm;
  std::vector<DecoderLayerSlice> decoder;
  NormSlice decoder_norm;
  LinearSlice output;
  std::vector<TensorInfo> tensors;
  std::size_t total = 0;

  explicit ParamLayout(const ModelConfig& config);
  ParamLayout() = default;
};

template <class Real>
struct ModelState {
  ModelConfig config;
  ParamLayout layout;
  std::vector<Real> params;
  std::vector<Real> moment1;  // optimizer state
  std::vector<Real> moment2;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
};

using Model = ModelState<float>;

template <class Real>
ModelState<Real> init_model(const ModelConfig& config);

// Element-wise conversion, e.g. for checking a float model in double.
template <class To, class From>
ModelState<To> convert_model(const ModelState<From>& model);

// Loss weight of one target token: 1 + lambda when it depends on context.
double token_weight(bool is_dependent, double lambda);

// Row j is log q(. | tgt[0..j], src), i.e. the distribution of tgt[j + 1].
struct LogProbMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

template <class Real>
LogProbMatrix forward_logprobs(const ModelState<Real>& model,
                               std::span<const TokenId> src_ids,
                               std::span<const TokenId> tgt_ids);

// -sum_j weights[j] * logprobs[j][tgt[j + 1]] for one example.
double weighted_nll(const LogProbMatrix& logprobs, std::span<const TokenId> tgt_ids,
                    std::span<const double> weights);
double nll(const LogProbMatrix& logprobs, std::span<const TokenId> tgt_ids);

// Mean over examples of the per-example weighted sums, and its gradient with
// respect to every parameter (grad is resized to the parameter count).
template <class Real>
double loss_and_gradient(const ModelState<Real>& model,
                         std::span<const EncodedExample> batch,
                         std::vector<Real>& grad);

using ExampleTransform =
    std::function<ContextualExample(const ContextualExample&, Rng&)>;

struct TrainStats {
  std::size_t updates = 0;
  std::vector<double> epoch_losses;
};

// Mini-batch training on context-size variants. Without a transform the
// examples are encoded once; with one, each example is transformed and
// re-encoded every epoch from a per-epoch random stream.
template <class Real>
TrainStats train(ModelState<Real>& model, const Vocabulary& vocab,
                 std::span<const ContextualExample> variants,
                 const ExampleTransform& transform = {},
                 std::optional<std::size_t> epochs = std::nullopt);

template <class Real>
TrainStats train_encoded(ModelState<Real>& model,
                         std::span<const EncodedExample> examples,
                         std::optional<std::size_t> epochs = std::nullopt);

// One optimizer update from a precomputed batch; returns the batch loss.
template <class Real>
double train_step(ModelState<Real>& model, std::span<const EncodedExample> batch,
                  double lr_scale = 1.0);

struct Hypothesis {
  std::vector<TokenId> ids;  // without [BOS] and [EOS]
  double logprob = 0.0;      // includes the [EOS] step when finished
  bool finished = false;
};

template <class Real>
Hypothesis decode_scored(const ModelState<Real>& model,
                         std::span<const TokenId> src_ids, std::size_t beam_width);

template <class Real>
std::vector<TokenId> decode(const ModelState<Real>& model,
                            std::span<const TokenId> src_ids, std::size_t beam_width);

// Tokens after the final separator; the whole sequence without one.
std::vector<TokenId> split_on_separator(std::span<const TokenId> ids,
                                        TokenId sep = kSep);

// Sum of log q(tgt[t] | tgt[<t], src) over t >= from_index.
template <class Real>
double sequence_logprob(const ModelState<Real>& model, std::span<const TokenId> src_ids,
                        std::span<const TokenId> tgt_ids, std::size_t from_index);

// --- checkpoints -----------------------------------------------------------

template <class Real>
struct Checkpoint {
  ModelState<Real> model;
  Vocabulary vocab;
};

template <class Real>
std::string checkpoint_to_json(const ModelState<Real>& model, const Vocabulary& vocab);
template <class Real>
Checkpoint<Real> checkpoint_from_json(std::string_view text);

void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& vocab);
Checkpoint<float> load_checkpoint(const std::string& path);

}  // namespace ctxlab
