#pragma once

// Dense inner loops used by the model. Every kernel has a scalar reference
// implementation (templated, also used for double precision) and, for float,
// optional SIMD variants chosen once at runtime. Weight matrices are stored
// input-major: W[i * out + o] connects input i to output o.

#include <cstddef>
#include <string_view>
#include <vector>

namespace ctxlab::kernels {

struct KernelTable {
  const char* name;
  float (*dot)(const float* a, const float* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  // y = b + x W   (b may be null)
  void (*linear)(const float* x, const float* w, const float* b, float* y,
                 std::size_t in, std::size_t out);
  // dx += W dy
  void (*linear_input_grad)(const float* w, const float* dy, float* dx,
                            std::size_t in, std::size_t out);
  // dW += x (outer) dy
  void (*outer_acc)(const float* x, const float* dy, float* dw, std::size_t in,
                    std::size_t out);
};

const KernelTable& scalar_table();
// Null when the binary or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// Tables usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

const KernelTable& active();
// "scalar", "avx2" or "auto". Returns false if the request cannot be honoured.
bool select(std::string_view name);

// ---------------------------------------------------------------------------
// Scalar reference implementations.

namespace ref {

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void linear(const T* x, const T* w, const T* b, T* y, std::size_t in,
            std::size_t out) {
  for (std::size_t o = 0; o < out; ++o) y[o] = b ? b[o] : T(0);
  for (std::size_t i = 0; i < in; ++i) {
    const T xi = x[i];
    const T* row = w + i * out;
    for (std::size_t o = 0; o < out; ++o) y[o] += xi * row[o];
  }
}

template <class T>
void linear_input_grad(const T* w, const T* dy, T* dx, std::size_t in,
                       std::size_t out) {
  for (std::size_t i = 0; i < in; ++i) dx[i] += dot(w + i * out, dy, out);
}

template <class T>
void outer_acc(const T* x, const T* dy, T* dw, std::size_t in,
               std::size_t out) {
  for (std::size_t i = 0; i < in; ++i) axpy(x[i], dy, dw + i * out, out);
}

}  // namespace ref

// ---------------------------------------------------------------------------
// Precision-generic entry points: float goes through the active table, double
// always uses the scalar reference.

inline float dot(const float* a, const float* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline double dot(const double* a, const double* b, std::size_t n) {
  return ref::dot(a, b, n);
}

inline void axpy(float alpha, const float* x, float* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  ref::axpy(alpha, x, y, n);
}

inline void linear(const float* x, const float* w, const float* b, float* y,
                   std::size_t in, std::size_t out) {
  active().linear(x, w, b, y, in, out);
}
inline void linear(const double* x, const double* w, const double* b,
                   double* y, std::size_t in, std::size_t out) {
  ref::linear(x, w, b, y, in, out);
}

inline void linear_input_grad(const float* w, const float* dy, float* dx,
                              std::size_t in, std::size_t out) {
  active().linear_input_grad(w, dy, dx, in, out);
}
inline void linear_input_grad(const double* w, const double* dy, double* dx,
                              std::size_t in, std::size_t out) {
  ref::linear_input_grad(w, dy, dx, in, out);
}

inline void outer_acc(const float* x, const float* dy, float* dw,
                      std::size_t in, std::size_t out) {
  active().outer_acc(x, dy, dw, in, out);
}
inline void outer_acc(const double* x, const double* dy, double* dw,
                      std::size_t in, std::size_t out) {
  ref::outer_acc(x, dy, dw, in, out);
}

}  // namespace ctxlab::kernels
