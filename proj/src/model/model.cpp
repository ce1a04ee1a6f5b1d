#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "ctxlab/error.hpp"
#include "ctxlab/io.hpp"
#include "network.hpp"

namespace ctxlab {

void ModelConfig::validate() const {
  if (vocab_size == 0) fail(ErrorKind::Config, "vocabulary size must be positive");
  if (embed_dim == 0 || hidden_dim == 0 || heads == 0) {
    fail(ErrorKind::Config, "model widths must be positive");
  }
  if (embed_dim % heads != 0) fail(ErrorKind::Config, "embed_dim must be divisible by heads");
  if (max_len < 2 || max_positions == 0 || max_segments == 0) {
    fail(ErrorKind::Config, "invalid sequence limits");
  }
  if (!(lambda >= 0.0)) fail(ErrorKind::Config, "lambda must be >= 0");
  if (!(learning_rate > 0.0)) fail(ErrorKind::Config, "learning rate must be positive");
  if (batch_size == 0) fail(ErrorKind::Config, "batch size must be positive");
  if (optimizer != "adam" && optimizer != "sgd") {
    fail(ErrorKind::Config, "unknown optimizer '" + optimizer + "'");
  }
}

std::string model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["embed_dim"] = c.embed_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["heads"] = c.heads;
  j["encoder_layers"] = c.encoder_layers;
  j["decoder_layers"] = c.decoder_layers;
  j["max_len"] = c.max_len;
  j["max_positions"] = c.max_positions;
  j["max_segments"] = c.max_segments;
  j["optimizer"] = c.optimizer;
  j["learning_rate"] = c.learning_rate;
  j["lr_decay"] = c.lr_decay;
  j["clip_norm"] = c.clip_norm;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["weighting"] = c.weighting;
  j["lambda"] = c.lambda;
  return j.dump(2);
}

ModelConfig model_config_from_json(std::string_view text) {
  ModelConfig c;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.heads = j.value("heads", c.heads);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
    c.max_len = j.value("max_len", c.max_len);
    c.max_positions = j.value("max_positions", c.max_positions);
    c.max_segments = j.value("max_segments", c.max_segments);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.weighting = j.value("weighting", c.weighting);
    c.lambda = j.value("lambda", c.lambda);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed model config: ") + e.what());
  }
  return c;
}

// --- layout ------------------------------------------------------------------

namespace {

class LayoutBuilder {
 public:
  explicit LayoutBuilder(ParamLayout& layout) : layout_(layout) {}

  std::size_t tensor(const std::string& name, std::size_t rows, std::size_t cols,
                     TensorInfo::Init init) {
    TensorInfo t{name, layout_.total, rows, cols, init};
    layout_.total += rows * cols;
    layout_.tensors.push_back(t);
    return t.offset;
  }

  LinearSlice linear(const std::string& name, std::size_t in, std::size_t out) {
    LinearSlice s;
    s.in = in;
    s.out = out;
    s.w = tensor(name + ".w", in, out, TensorInfo::Init::Xavier);
    s.b = tensor(name + ".b", 1, out, TensorInfo::Init::Zero);
    return s;
  }

  NormSlice norm(const std::string& name, std::size_t d) {
    return {tensor(name + ".gain", 1, d, TensorInfo::Init::One),
            tensor(name + ".bias", 1, d, TensorInfo::Init::Zero)};
  }

  AttentionSlice attention(const std::string& name, std::size_t d) {
    return {linear(name + ".q", d, d), linear(name + ".k", d, d), linear(name + ".v", d, d),
            linear(name + ".o", d, d)};
  }

  FeedForwardSlice ffn(const std::string& name, std::size_t d, std::size_t h) {
    return {linear(name + ".up", d, h), linear(name + ".down", h, d)};
  }

 private:
  ParamLayout& layout_;
};

}  // namespace

ParamLayout::ParamLayout(const ModelConfig& c) {
  LayoutBuilder b(*this);
  const std::size_t d = c.embed_dim;
  token_embedding = b.tensor("embed.token", c.vocab_size, d, TensorInfo::Init::Embedding);
  position_embedding = b.tensor("embed.position", c.max_positions, d, TensorInfo::Init::Embedding);
  segment_embedding = b.tensor("embed.segment", c.max_segments, d, TensorInfo::Init::Embedding);
  for (std::size_t l = 0; l < c.encoder_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    EncoderLayerSlice s;
    s.norm1 = b.norm(p + ".norm1", d);
    s.attn = b.attention(p + ".attn", d);
    s.norm2 = b.norm(p + ".norm2", d);
    s.ffn = b.ffn(p + ".ffn", d, c.hidden_dim);
    encoder.push_back(s);
  }
  encoder_norm = b.norm("enc.norm", d);
  for (std::size_t l = 0; l < c.decoder_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    DecoderLayerSlice s;
    s.norm1 = b.norm(p + ".norm1", d);
    s.self_attn = b.attention(p + ".self", d);
    s.norm2 = b.norm(p + ".norm2", d);
    s.cross_attn = b.attention(p + ".cross", d);
    s.norm3 = b.norm(p + ".norm3", d);
    s.ffn = b.ffn(p + ".ffn", d, c.hidden_dim);
    decoder.push_back(s);
  }
  decoder_norm = b.norm("dec.norm", d);
  output = b.linear("output", d, c.vocab_size);
}

template <class Real>
ModelState<Real> init_model(const ModelConfig& config) {
  config.validate();
  ModelState<Real> m;
  m.config = config;
  m.layout = ParamLayout(config);
  m.params.assign(m.layout.total, Real(0));
  m.moment1.assign(m.layout.total, Real(0));
  m.moment2.assign(m.layout.total, Real(0));
  Rng rng(derive_seed(config.seed, "init"));
  for (const TensorInfo& t : m.layout.tensors) {
    Real* p = m.params.data() + t.offset;
    const std::size_t n = t.rows * t.cols;
    switch (t.init) {
      case TensorInfo::Init::Xavier: {
        const double bound = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
        for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<Real>(rng.uniform(-bound, bound));
        break;
      }
      case TensorInfo::Init::Embedding:
        for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<Real>(rng.uniform(-0.5, 0.5));
        break;
      case TensorInfo::Init::One:
        std::fill(p, p + n, Real(1));
        break;
      case TensorInfo::Init::Zero:
        break;
    }
  }
  return m;
}

template <class To, class From>
ModelState<To> convert_model(const ModelState<From>& from) {
  ModelState<To> to;
  to.config = from.config;
  to.layout = from.layout;
  to.step = from.step;
  to.epoch = from.epoch;
  to.params.assign(from.params.begin(), from.params.end());
  to.moment1.assign(from.moment1.begin(), from.moment1.end());
  to.moment2.assign(from.moment2.begin(), from.moment2.end());
  return to;
}

double token_weight(bool is_dependent, double lambda) {
  if (!(lambda >= 0.0)) fail(ErrorKind::Domain, "lambda must be >= 0");
  return is_dependent ? 1.0 + lambda : 1.0;
}

template <class Real>
LogProbMatrix forward_logprobs(const ModelState<Real>& model, std::span<const TokenId> src,
                               std::span<const TokenId> tgt) {
  detail::Workspace<Real> ws;
  detail::forward(model, src, tgt, ws);
  LogProbMatrix out;
  out.rows = ws.m;
  out.cols = model.config.vocab_size;
  out.data = std::move(ws.logp);
  return out;
}

double weighted_nll(const LogProbMatrix& lp, std::span<const TokenId> tgt,
                    std::span<const double> weights) {
  if (weights.size() != lp.rows || tgt.size() != lp.rows + 1) {
    fail(ErrorKind::Shape, "weights/targets do not match log-probability rows");
  }
  double loss = 0.0;
  for (std::size_t j = 0; j < lp.rows; ++j) {
    loss -= weights[j] * lp.at(j, static_cast<std::size_t>(tgt[j + 1]));
  }
  return loss;
}

double nll(const LogProbMatrix& lp, std::span<const TokenId> tgt) {
  if (tgt.size() != lp.rows + 1) fail(ErrorKind::Shape, "targets do not match rows");
  double loss = 0.0;
  for (std::size_t j = 0; j < lp.rows; ++j) {
    loss -= lp.at(j, static_cast<std::size_t>(tgt[j + 1]));
  }
  return loss;
}

template <class Real>
double loss_and_gradient(const ModelState<Real>& model, std::span<const EncodedExample> batch,
                         std::vector<Real>& grad) {
  grad.assign(model.params.size(), Real(0));
  if (batch.empty()) fail(ErrorKind::Input, "empty batch");
  detail::Workspace<Real> ws;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  std::vector<double> coef;
  for (const EncodedExample& ex : batch) {
    if (ex.weights.size() + 1 != ex.tgt_ids.size()) {
      fail(ErrorKind::Shape, "weights must cover every predicted position");
    }
    detail::forward(model, ex.src_ids, ex.tgt_ids, ws);
    const std::size_t vocab = model.config.vocab_size;
    double loss = 0.0;
    for (std::size_t j = 0; j < ws.m; ++j) {
      loss -= ex.weights[j] * ws.logp[j * vocab + static_cast<std::size_t>(ex.tgt_ids[j + 1])];
    }
    total += loss;
    coef.resize(ws.m);
    for (std::size_t j = 0; j < ws.m; ++j) coef[j] = ex.weights[j] * scale;
    detail::backward(model, ex.src_ids, ex.tgt_ids, coef, ws, grad.data());
  }
  return total * scale;
}

template <class Real>
double train_step(ModelState<Real>& model, std::span<const EncodedExample> batch,
                  double lr_scale) {
  std::vector<Real> grad;
  const double loss = loss_and_gradient(model, batch, grad);
  if (!std::isfinite(loss)) {
    fail(ErrorKind::Training, "non-finite loss at step " + std::to_string(model.step));
  }
  const ModelConfig& cfg = model.config;
  double norm2 = 0.0;
  for (Real g : grad) norm2 += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(norm2);
  const double clip = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

  ++model.step;
  const double lr = cfg.learning_rate * lr_scale;
  if (cfg.optimizer == "sgd") {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      model.params[i] -= static_cast<Real>(lr * clip * static_cast<double>(grad[i]));
    }
  } else {
    constexpr double b1 = 0.9, b2 = 0.98, eps = 1e-8;
    const double t = static_cast<double>(model.step);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double g = clip * static_cast<double>(grad[i]);
      const double m1 = b1 * static_cast<double>(model.moment1[i]) + (1.0 - b1) * g;
      const double m2 = b2 * static_cast<double>(model.moment2[i]) + (1.0 - b2) * g * g;
      model.moment1[i] = static_cast<Real>(m1);
      model.moment2[i] = static_cast<Real>(m2);
      model.params[i] -= static_cast<Real>(lr * (m1 / c1) / (std::sqrt(m2 / c2) + eps));
    }
  }
  for (Real p : model.params) {
    if (!std::isfinite(p)) {
      fail(ErrorKind::Training, "non-finite parameter after step " + std::to_string(model.step));
    }
  }
  return loss;
}

namespace {

template <class Real, class Fetch>
TrainStats train_loop(ModelState<Real>& model, std::size_t count, std::size_t epochs,
                      Fetch&& fetch) {
  if (count == 0) fail(ErrorKind::Input, "training dataset is empty");
  TrainStats stats;
  const std::size_t batch_size = model.config.batch_size;
  std::vector<EncodedExample> batch;
  const std::size_t per_epoch = (count + batch_size - 1) / batch_size;
  const double total_updates = static_cast<double>(per_epoch * epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng(derive_seed(model.config.seed, "epoch-order", model.epoch));
    order_rng.shuffle(order);
    Rng transform_rng(derive_seed(model.config.seed, "epoch-transform", model.epoch));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < count; start += batch_size) {
      const std::size_t end = std::min(count, start + batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(fetch(order[i], transform_rng));
      const double scale =
          model.config.lr_decay
              ? 1.0 - static_cast<double>(stats.updates) / total_updates
              : 1.0;
      epoch_loss += train_step(model, std::span<const EncodedExample>(batch), scale);
      ++batches;
      ++stats.updates;
    }
    stats.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
    ++model.epoch;
  }
  return stats;
}

}  // namespace

template <class Real>
TrainStats train_encoded(ModelState<Real>& model, std::span<const EncodedExample> examples,
                         std::optional<std::size_t> epochs) {
  return train_loop(model, examples.size(), epochs.value_or(model.config.epochs),
                    [&](std::size_t i, Rng&) { return examples[i]; });
}

template <class Real>
TrainStats train(ModelState<Real>& model, const Vocabulary& vocab,
                 std::span<const ContextualExample> variants, const ExampleTransform& transform,
                 std::optional<std::size_t> epochs) {
  const WeightingOptions weighting = model.config.weighting_options();
  if (!transform) {
    std::vector<EncodedExample> encoded;
    encoded.reserve(variants.size());
    for (const ContextualExample& ex : variants) encoded.push_back(encode(ex, vocab, weighting));
    return train_encoded(model, std::span<const EncodedExample>(encoded), epochs);
  }
  return train_loop(model, variants.size(), epochs.value_or(model.config.epochs),
                    [&](std::size_t i, Rng& rng) {
                      return encode(transform(variants[i], rng), vocab, weighting);
                    });
}

// --- decoding ----------------------------------------------------------------

std::vector<TokenId> split_on_separator(std::span<const TokenId> ids, TokenId sep) {
  const auto last = std::find(ids.rbegin(), ids.rend(), sep);
  if (last == ids.rend()) return {ids.begin(), ids.end()};
  return {last.base(), ids.end()};
}

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

template <class Real>
Hypothesis greedy(const ModelState<Real>& model, std::span<const TokenId> src) {
  const auto memory = detail::encode_memory(model, src);
  detail::DecoderCursor<Real> cursor;
  std::vector<double> logp;
  Hypothesis h;
  TokenId token = kBos;
  const std::size_t limit = model.config.max_len - 1;
  for (std::size_t t = 0; t < limit; ++t) {
    detail::decoder_step(model, memory, cursor, token, logp);
    const auto next = static_cast<TokenId>(argmax(logp));
    h.logprob += logp[static_cast<std::size_t>(next)];
    if (next == kEos) {
      h.finished = true;
      break;
    }
    h.ids.push_back(next);
    token = next;
  }
  return h;
}

template <class Real>
struct Beam {
  std::vector<TokenId> ids;
  double score = 0.0;
  detail::DecoderCursor<Real> cursor;
  TokenId last = kBos;
};

struct Candidate {
  std::size_t beam;
  TokenId token;
  double score;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.finished != b.finished) return a.finished;
  return a.logprob > b.logprob;
}

template <class Real>
Hypothesis beam_search(const ModelState<Real>& model, std::span<const TokenId> src,
                       std::size_t width) {
  const auto memory = detail::encode_memory(model, src);
  std::vector<Beam<Real>> beams(1);
  std::vector<Hypothesis> finished;
  std::vector<double> logp;
  const std::size_t limit = model.config.max_len - 1;
  for (std::size_t t = 0; t < limit && !beams.empty(); ++t) {
    std::vector<Candidate> cands;
    for (std::size_t b = 0; b < beams.size(); ++b) {
      detail::decoder_step(model, memory, beams[b].cursor, beams[b].last, logp);
      std::vector<TokenId> order(logp.size());
      std::iota(order.begin(), order.end(), 0);
      const std::size_t keep = std::min(width, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                        order.end(), [&](TokenId x, TokenId y) {
                          const double lx = logp[static_cast<std::size_t>(x)];
                          const double ly = logp[static_cast<std::size_t>(y)];
                          return lx != ly ? lx > ly : x < y;
                        });
      for (std::size_t k = 0; k < keep; ++k) {
        cands.push_back({b, order[k], beams[b].score + logp[static_cast<std::size_t>(order[k])]});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.beam != b.beam) return a.beam < b.beam;
      return a.token < b.token;
    });
    std::vector<Beam<Real>> next;
    for (std::size_t k = 0; k < cands.size() && k < width; ++k) {
      const Candidate& c = cands[k];
      if (c.token == kEos) {
        finished.push_back({beams[c.beam].ids, c.score, true});
        continue;
      }
      Beam<Real> child;
      child.ids = beams[c.beam].ids;
      child.ids.push_back(c.token);
      child.score = c.score;
      child.cursor = beams[c.beam].cursor;
      child.last = c.token;
      next.push_back(std::move(child));
    }
    beams = std::move(next);
    if (!finished.empty()) {
      double best_finished = finished.front().logprob;
      for (const Hypothesis& h : finished) best_finished = std::max(best_finished, h.logprob);
      // Scores only decrease, so no live beam can overtake.
      const bool dominated = std::all_of(beams.begin(), beams.end(), [&](const Beam<Real>& b) {
        return b.score <= best_finished;
      });
      if (dominated || finished.size() >= width) break;
    }
  }
  Hypothesis best;
  bool have = false;
  for (const Hypothesis& h : finished) {
    if (!have || better(h, best)) {
      best = h;
      have = true;
    }
  }
  for (const Beam<Real>& b : beams) {
    Hypothesis h{b.ids, b.score, false};
    if (!have || better(h, best)) {
      best = h;
      have = true;
    }
  }
  // Pruning can drop the greedy path; keep it as a candidate so the result
  // never scores below greedy decoding.
  Hypothesis g = greedy(model, src);
  if (!have || better(g, best)) best = std::move(g);
  return best;
}

}  // namespace

template <class Real>
Hypothesis decode_scored(const ModelState<Real>& model, std::span<const TokenId> src,
                         std::size_t beam_width) {
  if (beam_width == 0) fail(ErrorKind::Config, "beam width must be >= 1");
  if (beam_width == 1) return greedy(model, src);
  return beam_search(model, src, beam_width);
}

template <class Real>
std::vector<TokenId> decode(const ModelState<Real>& model, std::span<const TokenId> src,
                            std::size_t beam_width) {
  return decode_scored(model, src, beam_width).ids;
}

template <class Real>
double sequence_logprob(const ModelState<Real>& model, std::span<const TokenId> src,
                        std::span<const TokenId> tgt, std::size_t from_index) {
  if (from_index >= tgt.size()) fail(ErrorKind::Range, "from_index beyond target length");
  const LogProbMatrix lp = forward_logprobs(model, src, tgt);
  double sum = 0.0;
  for (std::size_t t = std::max<std::size_t>(from_index, 1); t < tgt.size(); ++t) {
    sum += lp.at(t - 1, static_cast<std::size_t>(tgt[t]));
  }
  return sum;
}

// --- checkpoints -------------------------------------------------------------

namespace {
template <class Real>
constexpr const char* precision_name() {
  return sizeof(Real) == 4 ? "float32" : "float64";
}
}  // namespace

template <class Real>
std::string checkpoint_to_json(const ModelState<Real>& model, const Vocabulary& vocab) {
  nlohmann::ordered_json j;
  j["format"] = "ctxlab-checkpoint";
  j["version"] = 1;
  j["precision"] = precision_name<Real>();
  j["config"] = nlohmann::ordered_json::parse(model_config_to_json(model.config));
  j["vocabulary"] = vocab.tokens();
  j["step"] = model.step;
  j["epoch"] = model.epoch;
  j["params"] = model.params;
  j["moment1"] = model.moment1;
  j["moment2"] = model.moment2;
  return j.dump() + "\n";
}

template <class Real>
Checkpoint<Real> checkpoint_from_json(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "ctxlab-checkpoint") {
      fail(ErrorKind::Input, "not a ctxlab checkpoint");
    }
    if (j.at("precision").get<std::string>() != precision_name<Real>()) {
      fail(ErrorKind::Input, "checkpoint precision mismatch");
    }
    const ModelConfig config = model_config_from_json(j.at("config").dump());
    auto tokens = j.at("vocabulary").get<std::vector<std::string>>();
    if (tokens.size() < kReservedCount) fail(ErrorKind::Input, "truncated vocabulary");
    Vocabulary vocab(std::vector<std::string>(tokens.begin() + kReservedCount, tokens.end()));
    if (vocab.tokens() != tokens || vocab.size() != config.vocab_size) {
      fail(ErrorKind::Input, "checkpoint vocabulary is inconsistent");
    }
    ModelState<Real> m = init_model<Real>(config);
    m.step = j.at("step").get<std::uint64_t>();
    m.epoch = j.at("epoch").get<std::uint64_t>();
    m.params = j.at("params").get<std::vector<Real>>();
    m.moment1 = j.at("moment1").get<std::vector<Real>>();
    m.moment2 = j.at("moment2").get<std::vector<Real>>();
    if (m.params.size() != m.layout.total || m.moment1.size() != m.layout.total ||
        m.moment2.size() != m.layout.total) {
      fail(ErrorKind::Input, "checkpoint parameter count does not match its config");
    }
    return {std::move(m), std::move(vocab)};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Input, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& vocab) {
  io::write_file(path, checkpoint_to_json(model, vocab));
}

Checkpoint<float> load_checkpoint(const std::string& path) {
  return checkpoint_from_json<float>(io::read_file(path));
}

#define CTXLAB_INSTANTIATE(Real)                                                            \
  template ModelState<Real> init_model<Real>(const ModelConfig&);                           \
  template LogProbMatrix forward_logprobs(const ModelState<Real>&, std::span<const TokenId>, \
                                          std::span<const TokenId>);                        \
  template double loss_and_gradient(const ModelState<Real>&, std::span<const EncodedExample>, \
                                    std::vector<Real>&);                                    \
  template double train_step(ModelState<Real>&, std::span<const EncodedExample>, double);           \
  template TrainStats train_encoded(ModelState<Real>&, std::span<const EncodedExample>,     \
                                    std::optional<std::size_t>);                            \
  template TrainStats train(ModelState<Real>&, const Vocabulary&,                           \
                            std::span<const ContextualExample>, const ExampleTransform&,    \
                            std::optional<std::size_t>);                                    \
  template Hypothesis decode_scored(const ModelState<Real>&, std::span<const TokenId>,      \
                                    std::size_t);                                           \
  template std::vector<TokenId> decode(const ModelState<Real>&, std::span<const TokenId>,   \
                                       std::size_t);                                        \
  template double sequence_logprob(const ModelState<Real>&, std::span<const TokenId>,       \
                                   std::span<const TokenId>, std::size_t);                  \
  template std::string checkpoint_to_json(const ModelState<Real>&, const Vocabulary&);      \
  template Checkpoint<Real> checkpoint_from_json<Real>(std::string_view);

CTXLAB_INSTANTIATE(float)
CTXLAB_INSTANTIATE(double)
#undef CTXLAB_INSTANTIATE

template ModelState<double> convert_model<double, float>(const ModelState<float>&);
template ModelState<float> convert_model<float, double>(const ModelState<double>&);

}  // namespace ctxlab
