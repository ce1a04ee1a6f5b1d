#pragma once

// Internal forward/backward machinery shared by training, scoring and
// decoding. The teacher-forced forward pass and the incremental decoder call
// the same row-level helpers in the same order, so both paths produce
// bit-identical log-probabilities.

#include <span>
#include <vector>

#include "ctxlab/model.hpp"

namespace ctxlab::detail {

template <class Real>
using Buf = std::vector<Real>;

struct Slot {
  std::size_t segment = 0;
  std::size_t position = 0;
};

// Slot of each source token: sentence index and offset inside the sentence;
// a separator closes its sentence.
std::vector<Slot> source_slots(std::span<const TokenId> src);
// Slot of the token predicted from each decoder input tgt[0..m-1].
std::vector<Slot> target_slots(std::span<const TokenId> tgt_inputs);
Slot next_target_slot(Slot current, TokenId consumed, bool first);

template <class Real>
struct NormCache {
  Buf<Real> xhat;
  Buf<Real> inv;
};

template <class Real>
struct AttentionCache {
  Buf<Real> q, k, v, p, o;
  std::size_t nq = 0, nk = 0;
  bool causal = false;
};

template <class Real>
struct FeedForwardCache {
  Buf<Real> pre, act;
};

template <class Real>
struct EncoderLayerCache {
  Buf<Real> x_in, a1, h, a2;
  NormCache<Real> n1, n2;
  AttentionCache<Real> attn;
  FeedForwardCache<Real> ffn;
};

template <class Real>
struct DecoderLayerCache {
  Buf<Real> y_in, a1, r1, a2, r2, a3;
  NormCache<Real> n1, n2, n3;
  AttentionCache<Real> self_attn, cross_attn;
  FeedForwardCache<Real> ffn;
};

template <class Real>
struct Workspace {
  std::size_t n = 0, m = 0;
  std::vector<Slot> src_slots, tgt_slots;
  std::vector<EncoderLayerCache<Real>> enc;
  Buf<Real> enc_x, enc_out;
  NormCache<Real> enc_norm;
  std::vector<DecoderLayerCache<Real>> dec;
  Buf<Real> dec_y, z;
  NormCache<Real> dec_norm;
  std::vector<double> logp;  // m x V
};

template <class Real>
void check_inputs(const ModelState<Real>& model, std::span<const TokenId> src,
                  std::span<const TokenId> tgt);

// Teacher-forced forward pass over the whole example; fills ws.logp.
template <class Real>
void forward(const ModelState<Real>& model, std::span<const TokenId> src,
             std::span<const TokenId> tgt, Workspace<Real>& ws);

// Accumulates into grad the gradient of sum_j coef[j] * -logp[j][tgt[j+1]].
template <class Real>
void backward(const ModelState<Real>& model, std::span<const TokenId> src,
              std::span<const TokenId> tgt, std::span<const double> coef,
              const Workspace<Real>& ws, Real* grad);

// Incremental decoding.
template <class Real>
struct EncoderMemory {
  std::size_t n = 0;
  Buf<Real> enc_out;
  std::vector<Buf<Real>> cross_k, cross_v;  // per decoder layer, n x d
};

template <class Real>
struct DecoderCursor {
  std::vector<Buf<Real>> self_k, self_v;  // per layer, len x d
  std::size_t len = 0;
  Slot slot;
};

template <class Real>
EncoderMemory<Real> encode_memory(const ModelState<Real>& model,
                                  std::span<const TokenId> src);

// Feeds one decoder input token and writes log q(next | prefix) into logp.
template <class Real>
void decoder_step(const ModelState<Real>& model, const EncoderMemory<Real>& memory,
                  DecoderCursor<Real>& cursor, TokenId token, std::vector<double>& logp);

}  // namespace ctxlab::detail
