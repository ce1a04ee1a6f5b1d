#include "ctxlab/kernels.hpp"

namespace ctxlab::kernels {
namespace {

float dot_f(const float* a, const float* b, std::size_t n) {
  return ref::dot(a, b, n);
}
void axpy_f(float alpha, const float* x, float* y, std::size_t n) {
  ref::axpy(alpha, x, y, n);
}
void linear_f(const float* x, const float* w, const float* b, float* y,
              std::size_t in, std::size_t out) {
  ref::linear(x, w, b, y, in, out);
}
void linear_input_grad_f(const float* w, const float* dy, float* dx,
                         std::size_t in, std::size_t out) {
  ref::linear_input_grad(w, dy, dx, in, out);
}
void outer_acc_f(const float* x, const float* dy, float* dw, std::size_t in,
                 std::size_t out) {
  ref::outer_acc(x, dy, dw, in, out);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", dot_f, axpy_f, linear_f,
                                 linear_input_grad_f, outer_acc_f};
  return table;
}

}  // namespace ctxlab::kernels
