#include "network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctxlab/error.hpp"
#include "ctxlab/kernels.hpp"

namespace ctxlab::detail {

namespace {

constexpr double kNormEps = 1e-5;

std::size_t clamp_index(std::size_t v, std::size_t limit) {
  return v < limit ? v : limit - 1;
}

template <class Real>
struct Net {
  const ModelConfig& cfg;
  const ParamLayout& layout;
  const Real* p;
  std::size_t d() const { return cfg.embed_dim; }
  std::size_t heads() const { return cfg.heads; }
  std::size_t head_dim() const { return cfg.embed_dim / cfg.heads; }
  const Real* at(std::size_t offset) const { return p + offset; }
};

template <class Real>
Net<Real> net_of(const ModelState<Real>& m) {
  return {m.config, m.layout, m.params.data()};
}

// --- row helpers -------------------------------------------------------------

template <class Real>
void embed_row(const Net<Real>& net, TokenId token, Slot slot, Real* out) {
  const std::size_t d = net.d();
  const Real* tok = net.at(net.layout.token_embedding) + static_cast<std::size_t>(token) * d;
  const Real* pos = net.at(net.layout.position_embedding) +
                    clamp_index(slot.position, net.cfg.max_positions) * d;
  const Real* seg = net.at(net.layout.segment_embedding) +
                    clamp_index(slot.segment, net.cfg.max_segments) * d;
  for (std::size_t k = 0; k < d; ++k) out[k] = tok[k] + pos[k] + seg[k];
}

template <class Real>
void norm_row(const Net<Real>& net, const NormSlice& s, const Real* x, Real* y,
              Real* xhat, Real& inv) {
  const std::size_t d = net.d();
  Real mean = 0;
  for (std::size_t k = 0; k < d; ++k) mean += x[k];
  mean /= static_cast<Real>(d);
  Real var = 0;
  for (std::size_t k = 0; k < d; ++k) {
    const Real c = x[k] - mean;
    var += c * c;
  }
  var /= static_cast<Real>(d);
  inv = Real(1) / std::sqrt(var + static_cast<Real>(kNormEps));
  const Real* g = net.at(s.gain);
  const Real* b = net.at(s.bias);
  for (std::size_t k = 0; k < d; ++k) {
    xhat[k] = (x[k] - mean) * inv;
    y[k] = g[k] * xhat[k] + b[k];
  }
}

template <class Real>
void linear_row(const Net<Real>& net, const LinearSlice& s, const Real* x, Real* y) {
  kernels::linear(x, net.at(s.w), net.at(s.b), y, s.in, s.out);
}

// One query row against nvis key/value rows (row stride d). Writes the
// attention probabilities (heads x nvis, stride p_stride) and the mixed row.
template <class Real>
void attend_row(const Net<Real>& net, const Real* q, const Real* keys,
                const Real* values, std::size_t nvis, Real* probs,
                std::size_t p_stride, Real* out) {
  const std::size_t d = net.d();
  const std::size_t dh = net.head_dim();
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dh));
  std::fill(out, out + d, Real(0));
  for (std::size_t h = 0; h < net.heads(); ++h) {
    Real* p = probs + h * p_stride;
    const Real* qh = q + h * dh;
    Real best = -std::numeric_limits<Real>::infinity();
    for (std::size_t j = 0; j < nvis; ++j) {
      p[j] = kernels::dot(qh, keys + j * d + h * dh, dh) * scale;
      best = std::max(best, p[j]);
    }
    Real sum = 0;
    for (std::size_t j = 0; j < nvis; ++j) {
      p[j] = std::exp(p[j] - best);
      sum += p[j];
    }
    const Real inv = Real(1) / sum;
    for (std::size_t j = 0; j < nvis; ++j) {
      p[j] *= inv;
      kernels::axpy(p[j], values + j * d + h * dh, out + h * dh, dh);
    }
  }
}

template <class Real>
Real gelu(Real x) {
  constexpr Real c = static_cast<Real>(0.7978845608028654);
  const Real u = c * (x + static_cast<Real>(0.044715) * x * x * x);
  return Real(0.5) * x * (Real(1) + std::tanh(u));
}

template <class Real>
Real gelu_grad(Real x) {
  constexpr Real c = static_cast<Real>(0.7978845608028654);
  const Real x2 = x * x;
  const Real t = std::tanh(c * (x + static_cast<Real>(0.044715) * x2 * x));
  return Real(0.5) * (Real(1) + t) +
         Real(0.5) * x * (Real(1) - t * t) * c *
             (Real(1) + static_cast<Real>(3 * 0.044715) * x2);
}

template <class Real>
void ffn_row(const Net<Real>& net, const FeedForwardSlice& s, const Real* x,
             Real* pre, Real* act, Real* y) {
  linear_row(net, s.up, x, pre);
  for (std::size_t k = 0; k < s.up.out; ++k) act[k] = gelu(pre[k]);
  linear_row(net, s.down, act, y);
}

template <class Real>
void log_softmax_row(const Real* logits, std::size_t n, double* out) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) best = std::max(best, static_cast<double>(logits[k]));
  double sum = 0;
  for (std::size_t k = 0; k < n; ++k) sum += std::exp(static_cast<double>(logits[k]) - best);
  const double lse = best + std::log(sum);
  for (std::size_t k = 0; k < n; ++k) out[k] = static_cast<double>(logits[k]) - lse;
}

template <class Real>
void add_rows(const Real* a, const Real* b, Real* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] + b[k];
}

// --- matrix-level forward ----------------------------------------------------

template <class Real>
void norm_rows(const Net<Real>& net, const NormSlice& s, const Buf<Real>& x,
               std::size_t rows, Buf<Real>& y, NormCache<Real>& c) {
  const std::size_t d = net.d();
  y.resize(rows * d);
  c.xhat.resize(rows * d);
  c.inv.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    norm_row(net, s, x.data() + r * d, y.data() + r * d, c.xhat.data() + r * d, c.inv[r]);
  }
}

template <class Real>
void linear_rows(const Net<Real>& net, const LinearSlice& s, const Real* x,
                 std::size_t rows, Buf<Real>& y) {
  y.resize(rows * s.out);
  for (std::size_t r = 0; r < rows; ++r) linear_row(net, s, x + r * s.in, y.data() + r * s.out);
}

template <class Real>
void attention_rows(const Net<Real>& net, const AttentionSlice& s, const Buf<Real>& xq,
                    std::size_t nq, const Buf<Real>& xkv, std::size_t nk, bool causal,
                    AttentionCache<Real>& c, Buf<Real>& out) {
  const std::size_t d = net.d();
  const std::size_t heads = net.heads();
  c.nq = nq;
  c.nk = nk;
  c.causal = causal;
  linear_rows(net, s.q, xq.data(), nq, c.q);
  linear_rows(net, s.k, xkv.data(), nk, c.k);
  linear_rows(net, s.v, xkv.data(), nk, c.v);
  c.p.assign(nq * heads * nk, Real(0));
  c.o.resize(nq * d);
  for (std::size_t i = 0; i < nq; ++i) {
    const std::size_t nvis = causal ? i + 1 : nk;
    attend_row(net, c.q.data() + i * d, c.k.data(), c.v.data(), nvis,
               c.p.data() + i * heads * nk, nk, c.o.data() + i * d);
  }
  linear_rows(net, s.o, c.o.data(), nq, out);
}

template <class Real>
void ffn_rows(const Net<Real>& net, const FeedForwardSlice& s, const Buf<Real>& x,
              std::size_t rows, FeedForwardCache<Real>& c, Buf<Real>& out) {
  const std::size_t d = net.d();
  const std::size_t h = s.up.out;
  c.pre.resize(rows * h);
  c.act.resize(rows * h);
  out.resize(rows * d);
  for (std::size_t r = 0; r < rows; ++r) {
    ffn_row(net, s, x.data() + r * d, c.pre.data() + r * h, c.act.data() + r * h,
            out.data() + r * d);
  }
}

template <class Real>
void encoder_forward(const Net<Real>& net, std::span<const TokenId> src, Workspace<Real>& ws) {
  const std::size_t d = net.d();
  const std::size_t n = src.size();
  ws.src_slots = source_slots(src);
  Buf<Real> x(n * d);
  for (std::size_t i = 0; i < n; ++i) embed_row(net, src[i], ws.src_slots[i], x.data() + i * d);
  ws.enc.resize(net.layout.encoder.size());
  Buf<Real> tmp;
  for (std::size_t l = 0; l < net.layout.encoder.size(); ++l) {
    const EncoderLayerSlice& s = net.layout.encoder[l];
    EncoderLayerCache<Real>& c = ws.enc[l];
    c.x_in = x;
    norm_rows(net, s.norm1, c.x_in, n, c.a1, c.n1);
    attention_rows(net, s.attn, c.a1, n, c.a1, n, false, c.attn, tmp);
    c.h.resize(n * d);
    add_rows(c.x_in.data(), tmp.data(), c.h.data(), n * d);
    norm_rows(net, s.norm2, c.h, n, c.a2, c.n2);
    ffn_rows(net, s.ffn, c.a2, n, c.ffn, tmp);
    add_rows(c.h.data(), tmp.data(), x.data(), n * d);
  }
  ws.enc_x = std::move(x);
  norm_rows(net, net.layout.encoder_norm, ws.enc_x, n, ws.enc_out, ws.enc_norm);
}

// --- matrix-level backward ---------------------------------------------------

template <class Real>
void linear_backward(const Net<Real>& net, const LinearSlice& s, const Real* x,
                     const Real* dy, std::size_t rows, Real* grad, Real* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    kernels::outer_acc(x + r * s.in, dy + r * s.out, grad + s.w, s.in, s.out);
    kernels::axpy(Real(1), dy + r * s.out, grad + s.b, s.out);
    if (dx) kernels::linear_input_grad(net.at(s.w), dy + r * s.out, dx + r * s.in, s.in, s.out);
  }
}

// dx += d(norm)/dx applied to dy.
template <class Real>
void norm_backward(const Net<Real>& net, const NormSlice& s, const NormCache<Real>& c,
                   const Buf<Real>& dy, std::size_t rows, Real* grad, Real* dx) {
  const std::size_t d = net.d();
  const Real* g = net.at(s.gain);
  Buf<Real> dxhat(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* dyr = dy.data() + r * d;
    const Real* xh = c.xhat.data() + r * d;
    Real mean1 = 0, mean2 = 0;
    for (std::size_t k = 0; k < d; ++k) {
      grad[s.gain + k] += dyr[k] * xh[k];
      grad[s.bias + k] += dyr[k];
      dxhat[k] = dyr[k] * g[k];
      mean1 += dxhat[k];
      mean2 += dxhat[k] * xh[k];
    }
    mean1 /= static_cast<Real>(d);
    mean2 /= static_cast<Real>(d);
    Real* dxr = dx + r * d;
    for (std::size_t k = 0; k < d; ++k) dxr[k] += c.inv[r] * (dxhat[k] - mean1 - xh[k] * mean2);
  }
}

template <class Real>
void ffn_backward(const Net<Real>& net, const FeedForwardSlice& s, const Buf<Real>& x,
                  const FeedForwardCache<Real>& c, const Buf<Real>& dy, std::size_t rows,
                  Real* grad, Buf<Real>& dx) {
  const std::size_t h = s.up.out;
  Buf<Real> dact(rows * h, Real(0));
  linear_backward(net, s.down, c.act.data(), dy.data(), rows, grad, dact.data());
  for (std::size_t k = 0; k < rows * h; ++k) dact[k] *= gelu_grad(c.pre[k]);
  dx.assign(rows * net.d(), Real(0));
  linear_backward(net, s.up, x.data(), dact.data(), rows, grad, dx.data());
}

// Adds the query-side gradient into dxq and the key/value-side one into dxkv
// (which may alias dxq for self-attention).
template <class Real>
void attention_backward(const Net<Real>& net, const AttentionSlice& s,
                        const Buf<Real>& xq, const Buf<Real>& xkv,
                        const AttentionCache<Real>& c, const Buf<Real>& dout,
                        Real* grad, Real* dxq, Real* dxkv) {
  const std::size_t d = net.d();
  const std::size_t heads = net.heads();
  const std::size_t dh = net.head_dim();
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dh));
  const std::size_t nq = c.nq, nk = c.nk;

  Buf<Real> d_o(nq * d, Real(0));
  linear_backward(net, s.o, c.o.data(), dout.data(), nq, grad, d_o.data());

  Buf<Real> dq(nq * d, Real(0)), dk(nk * d, Real(0)), dv(nk * d, Real(0));
  Buf<Real> ds(nk);
  for (std::size_t i = 0; i < nq; ++i) {
    const std::size_t nvis = c.causal ? i + 1 : nk;
    for (std::size_t h = 0; h < heads; ++h) {
      const Real* p = c.p.data() + (i * heads + h) * nk;
      const Real* doh = d_o.data() + i * d + h * dh;
      Real weighted = 0;
      for (std::size_t j = 0; j < nvis; ++j) {
        ds[j] = kernels::dot(doh, c.v.data() + j * d + h * dh, dh);
        weighted += p[j] * ds[j];
      }
      const Real* qh = c.q.data() + i * d + h * dh;
      Real* dqh = dq.data() + i * d + h * dh;
      for (std::size_t j = 0; j < nvis; ++j) {
        const Real g = p[j] * (ds[j] - weighted) * scale;
        kernels::axpy(g, c.k.data() + j * d + h * dh, dqh, dh);
        kernels::axpy(g, qh, dk.data() + j * d + h * dh, dh);
        kernels::axpy(p[j], doh, dv.data() + j * d + h * dh, dh);
      }
    }
  }
  linear_backward(net, s.q, xq.data(), dq.data(), nq, grad, dxq);
  linear_backward(net, s.k, xkv.data(), dk.data(), nk, grad, dxkv);
  linear_backward(net, s.v, xkv.data(), dv.data(), nk, grad, dxkv);
}

template <class Real>
void embed_backward(const Net<Real>& net, std::span<const TokenId> ids,
                    const std::vector<Slot>& slots, const Buf<Real>& dx, Real* grad) {
  const std::size_t d = net.d();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Real* g = dx.data() + i * d;
    kernels::axpy(Real(1), g, grad + net.layout.token_embedding + static_cast<std::size_t>(ids[i]) * d, d);
    kernels::axpy(Real(1), g, grad + net.layout.position_embedding +
                                  clamp_index(slots[i].position, net.cfg.max_positions) * d, d);
    kernels::axpy(Real(1), g, grad + net.layout.segment_embedding +
                                  clamp_index(slots[i].segment, net.cfg.max_segments) * d, d);
  }
}

}  // namespace

// --- slots -------------------------------------------------------------------

std::vector<Slot> source_slots(std::span<const TokenId> src) {
  std::vector<Slot> out(src.size());
  Slot s;
  for (std::size_t i = 0; i < src.size(); ++i) {
    out[i] = s;
    if (src[i] == kSep) {
      ++s.segment;
      s.position = 0;
    } else {
      ++s.position;
    }
  }
  return out;
}

Slot next_target_slot(Slot current, TokenId consumed, bool first) {
  if (first) return {};
  if (consumed == kSep) return {current.segment + 1, 0};
  return {current.segment, current.position + 1};
}

std::vector<Slot> target_slots(std::span<const TokenId> tgt_inputs) {
  std::vector<Slot> out(tgt_inputs.size());
  Slot s;
  for (std::size_t j = 0; j < tgt_inputs.size(); ++j) {
    s = next_target_slot(s, tgt_inputs[j], j == 0);
    out[j] = s;
  }
  return out;
}

// --- public-internal entry points --------------------------------------------

template <class Real>
void check_inputs(const ModelState<Real>& model, std::span<const TokenId> src,
                  std::span<const TokenId> tgt) {
  const ModelConfig& cfg = model.config;
  if (src.empty()) fail(ErrorKind::Length, "empty source sequence");
  if (tgt.size() < 2) fail(ErrorKind::Length, "target needs at least [BOS] and one token");
  if (src.size() > cfg.max_len || tgt.size() > cfg.max_len) {
    fail(ErrorKind::Length, "sequence longer than max length " + std::to_string(cfg.max_len));
  }
  for (auto seq : {src, tgt}) {
    for (TokenId t : seq) {
      if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
        fail(ErrorKind::Encoding, "token id " + std::to_string(t) + " outside the vocabulary");
      }
    }
  }
}

template <class Real>
void forward(const ModelState<Real>& model, std::span<const TokenId> src,
             std::span<const TokenId> tgt, Workspace<Real>& ws) {
  check_inputs(model, src, tgt);
  const Net<Real> net = net_of(model);
  const std::size_t d = net.d();
  const std::size_t n = src.size();
  const std::size_t m = tgt.size() - 1;
  const std::size_t vocab = model.config.vocab_size;
  ws.n = n;
  ws.m = m;
  encoder_forward(net, src, ws);

  const auto inputs = tgt.first(m);
  ws.tgt_slots = target_slots(inputs);
  Buf<Real> y(m * d);
  for (std::size_t j = 0; j < m; ++j) embed_row(net, inputs[j], ws.tgt_slots[j], y.data() + j * d);
  ws.dec.resize(net.layout.decoder.size());
  Buf<Real> tmp;
  for (std::size_t l = 0; l < net.layout.decoder.size(); ++l) {
    const DecoderLayerSlice& s = net.layout.decoder[l];
    DecoderLayerCache<Real>& c = ws.dec[l];
    c.y_in = y;
    norm_rows(net, s.norm1, c.y_in, m, c.a1, c.n1);
    attention_rows(net, s.self_attn, c.a1, m, c.a1, m, true, c.self_attn, tmp);
    c.r1.resize(m * d);
    add_rows(c.y_in.data(), tmp.data(), c.r1.data(), m * d);
    norm_rows(net, s.norm2, c.r1, m, c.a2, c.n2);
    attention_rows(net, s.cross_attn, c.a2, m, ws.enc_out, n, false, c.cross_attn, tmp);
    c.r2.resize(m * d);
    add_rows(c.r1.data(), tmp.data(), c.r2.data(), m * d);
    norm_rows(net, s.norm3, c.r2, m, c.a3, c.n3);
    ffn_rows(net, s.ffn, c.a3, m, c.ffn, tmp);
    add_rows(c.r2.data(), tmp.data(), y.data(), m * d);
  }
  ws.dec_y = std::move(y);
  norm_rows(net, net.layout.decoder_norm, ws.dec_y, m, ws.z, ws.dec_norm);
  ws.logp.resize(m * vocab);
  Buf<Real> logits(vocab);
  for (std::size_t j = 0; j < m; ++j) {
    linear_row(net, net.layout.output, ws.z.data() + j * d, logits.data());
    log_softmax_row(logits.data(), vocab, ws.logp.data() + j * vocab);
  }
}

template <class Real>
void backward(const ModelState<Real>& model, std::span<const TokenId> src,
              std::span<const TokenId> tgt, std::span<const double> coef,
              const Workspace<Real>& ws, Real* grad) {
  const Net<Real> net = net_of(model);
  const std::size_t d = net.d();
  const std::size_t n = ws.n, m = ws.m;
  const std::size_t vocab = model.config.vocab_size;

  Buf<Real> dlogits(m * vocab);
  for (std::size_t j = 0; j < m; ++j) {
    const double* lp = ws.logp.data() + j * vocab;
    Real* dl = dlogits.data() + j * vocab;
    for (std::size_t k = 0; k < vocab; ++k) dl[k] = static_cast<Real>(coef[j] * std::exp(lp[k]));
    dl[static_cast<std::size_t>(tgt[j + 1])] -= static_cast<Real>(coef[j]);
  }
  Buf<Real> dz(m * d, Real(0));
  linear_backward(net, net.layout.output, ws.z.data(), dlogits.data(), m, grad, dz.data());
  Buf<Real> dy(m * d, Real(0));
  norm_backward(net, net.layout.decoder_norm, ws.dec_norm, dz, m, grad, dy.data());

  Buf<Real> denc(n * d, Real(0));
  Buf<Real> dtmp, dnorm;
  for (std::size_t l = net.layout.decoder.size(); l-- > 0;) {
    const DecoderLayerSlice& s = net.layout.decoder[l];
    const DecoderLayerCache<Real>& c = ws.dec[l];
    // y = r2 + ffn(norm3(r2))
    Buf<Real> dr = dy;
    ffn_backward(net, s.ffn, c.a3, c.ffn, dy, m, grad, dtmp);
    norm_backward(net, s.norm3, c.n3, dtmp, m, grad, dr.data());
    // r2 = r1 + cross(norm2(r1), enc_out)
    dnorm.assign(m * d, Real(0));
    attention_backward(net, s.cross_attn, c.a2, ws.enc_out, c.cross_attn, dr, grad,
                       dnorm.data(), denc.data());
    norm_backward(net, s.norm2, c.n2, dnorm, m, grad, dr.data());
    // r1 = y_in + self(norm1(y_in))
    dnorm.assign(m * d, Real(0));
    attention_backward(net, s.self_attn, c.a1, c.a1, c.self_attn, dr, grad, dnorm.data(),
                       dnorm.data());
    norm_backward(net, s.norm1, c.n1, dnorm, m, grad, dr.data());
    dy = std::move(dr);
  }
  embed_backward(net, tgt.first(m), ws.tgt_slots, dy, grad);

  Buf<Real> dx(n * d, Real(0));
  norm_backward(net, net.layout.encoder_norm, ws.enc_norm, denc, n, grad, dx.data());
  for (std::size_t l = net.layout.encoder.size(); l-- > 0;) {
    const EncoderLayerSlice& s = net.layout.encoder[l];
    const EncoderLayerCache<Real>& c = ws.enc[l];
    // x = h + ffn(norm2(h))
    Buf<Real> dh = dx;
    ffn_backward(net, s.ffn, c.a2, c.ffn, dx, n, grad, dtmp);
    norm_backward(net, s.norm2, c.n2, dtmp, n, grad, dh.data());
    // h = x_in + attn(norm1(x_in))
    dnorm.assign(n * d, Real(0));
    attention_backward(net, s.attn, c.a1, c.a1, c.attn, dh, grad, dnorm.data(), dnorm.data());
    norm_backward(net, s.norm1, c.n1, dnorm, n, grad, dh.data());
    dx = std::move(dh);
  }
  embed_backward(net, src, ws.src_slots, dx, grad);
}

template <class Real>
EncoderMemory<Real> encode_memory(const ModelState<Real>& model, std::span<const TokenId> src) {
  const TokenId dummy[2] = {kBos, kEos};
  check_inputs(model, src, std::span<const TokenId>(dummy, 2));
  const Net<Real> net = net_of(model);
  Workspace<Real> ws;
  ws.n = src.size();
  encoder_forward(net, src, ws);
  EncoderMemory<Real> mem;
  mem.n = src.size();
  mem.enc_out = std::move(ws.enc_out);
  for (const DecoderLayerSlice& s : net.layout.decoder) {
    Buf<Real> k, v;
    linear_rows(net, s.cross_attn.k, mem.enc_out.data(), mem.n, k);
    linear_rows(net, s.cross_attn.v, mem.enc_out.data(), mem.n, v);
    mem.cross_k.push_back(std::move(k));
    mem.cross_v.push_back(std::move(v));
  }
  return mem;
}

template <class Real>
void decoder_step(const ModelState<Real>& model, const EncoderMemory<Real>& mem,
                  DecoderCursor<Real>& cur, TokenId token, std::vector<double>& logp) {
  const Net<Real> net = net_of(model);
  const std::size_t d = net.d();
  const std::size_t heads = net.heads();
  const std::size_t vocab = model.config.vocab_size;
  const std::size_t layers = net.layout.decoder.size();
  if (cur.self_k.size() != layers) {
    cur.self_k.assign(layers, {});
    cur.self_v.assign(layers, {});
  }
  cur.slot = next_target_slot(cur.slot, token, cur.len == 0);
  const std::size_t t = cur.len;

  Buf<Real> y(d), a(d), xhat(d), q(d), o(d), tmp(d), r(d);
  Buf<Real> probs(heads * std::max(t + 1, mem.n));
  Real inv;
  embed_row(net, token, cur.slot, y.data());
  for (std::size_t l = 0; l < layers; ++l) {
    const DecoderLayerSlice& s = net.layout.decoder[l];
    norm_row(net, s.norm1, y.data(), a.data(), xhat.data(), inv);
    linear_row(net, s.self_attn.q, a.data(), q.data());
    Buf<Real>& ks = cur.self_k[l];
    Buf<Real>& vs = cur.self_v[l];
    ks.resize((t + 1) * d);
    vs.resize((t + 1) * d);
    linear_row(net, s.self_attn.k, a.data(), ks.data() + t * d);
    linear_row(net, s.self_attn.v, a.data(), vs.data() + t * d);
    attend_row(net, q.data(), ks.data(), vs.data(), t + 1, probs.data(), t + 1, o.data());
    linear_row(net, s.self_attn.o, o.data(), tmp.data());
    add_rows(y.data(), tmp.data(), r.data(), d);

    norm_row(net, s.norm2, r.data(), a.data(), xhat.data(), inv);
    linear_row(net, s.cross_attn.q, a.data(), q.data());
    attend_row(net, q.data(), mem.cross_k[l].data(), mem.cross_v[l].data(), mem.n,
               probs.data(), mem.n, o.data());
    linear_row(net, s.cross_attn.o, o.data(), tmp.data());
    Buf<Real> r2(d);
    add_rows(r.data(), tmp.data(), r2.data(), d);

    norm_row(net, s.norm3, r2.data(), a.data(), xhat.data(), inv);
    Buf<Real> pre(s.ffn.up.out), act(s.ffn.up.out);
    ffn_row(net, s.ffn, a.data(), pre.data(), act.data(), tmp.data());
    add_rows(r2.data(), tmp.data(), y.data(), d);
  }
  Buf<Real> z(d), logits(vocab);
  norm_row(net, net.layout.decoder_norm, y.data(), z.data(), xhat.data(), inv);
  linear_row(net, net.layout.output, z.data(), logits.data());
  logp.resize(vocab);
  log_softmax_row(logits.data(), vocab, logp.data());
  ++cur.len;
}

#define CTXLAB_INSTANTIATE(Real)                                                        \
  template void check_inputs(const ModelState<Real>&, std::span<const TokenId>,         \
                             std::span<const TokenId>);                                 \
  template void forward(const ModelState<Real>&, std::span<const TokenId>,              \
                        std::span<const TokenId>, Workspace<Real>&);                    \
  template void backward(const ModelState<Real>&, std::span<const TokenId>,             \
                         std::span<const TokenId>, std::span<const double>,             \
                         const Workspace<Real>&, Real*);                                \
  template EncoderMemory<Real> encode_memory(const ModelState<Real>&,                   \
                                             std::span<const TokenId>);                 \
  template void decoder_step(const ModelState<Real>&, const EncoderMemory<Real>&,       \
                             DecoderCursor<Real>&, TokenId, std::vector<double>&);

CTXLAB_INSTANTIATE(float)
CTXLAB_INSTANTIATE(double)
#undef CTXLAB_INSTANTIATE

}  // namespace ctxlab::detail
