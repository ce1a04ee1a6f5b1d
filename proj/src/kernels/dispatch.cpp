#include <atomic>

#include "ctxlab/kernels.hpp"

namespace ctxlab::kernels {
namespace {

const KernelTable* best_table() {
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{best_table()};
  return table;
}

}  // namespace

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out{&scalar_table()};
  if (const KernelTable* t = avx2_table()) out.push_back(t);
  return out;
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
  if (name == "auto") {
    current().store(best_table());
    return true;
  }
  for (const KernelTable* t : available_tables()) {
    if (name == t->name) {
      current().store(t);
      return true;
    }
  }
  return false;
}

}  // namespace ctxlab::kernels
