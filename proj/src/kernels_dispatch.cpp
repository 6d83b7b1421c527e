// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string>

#include "psdebnn/errors.hpp"
#include "psdebnn/kernels.hpp"

namespace psdebnn::kernels {

namespace {

const Ops* resolve(std::string_view name) {
  if (name == "scalar") return &scalar_ops();
  if (name == "avx2") {
    if (!avx2_available())
      throw ConfigError("PSDEBNN_KERNELS=avx2 requested but CPU lacks AVX2/FMA");
    return &avx2_ops();
  }
  if (name == "auto") return avx2_available() ? &avx2_ops() : &scalar_ops();
  throw ConfigError("unknown kernel backend '" + std::string(name) +
                    "' (expected scalar, avx2, or auto)");
}

std::atomic<const Ops*> g_active{nullptr};

}  // namespace

const Ops& active() {
  const Ops* ops = g_active.load(std::memory_order_acquire);
  if (!ops) {
    const char* env = std::getenv("PSDEBNN_KERNELS");
    ops = resolve(env ? std::string_view(env) : std::string_view("auto"));
    g_active.store(ops, std::memory_order_release);
  }
  return *ops;
}

void select(std::string_view name) {
  g_active.store(resolve(name), std::memory_order_release);
}

}  // namespace psdebnn::kernels
