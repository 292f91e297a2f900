#include "nrl/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace nrl::kernels {
namespace {

const Kernels* pick_auto() {
  return avx2_available() ? &avx2_kernels() : &scalar_kernels();
}

const Kernels* initial() {
  if (const char* env = std::getenv("NRL_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_kernels();
    if (std::strcmp(env, "avx2") == 0 && avx2_available()) return &avx2_kernels();
  }
  return pick_auto();
}

const Kernels*& slot() {
  static const Kernels* k = initial();
  return k;
}

}  // namespace

const Kernels& active() { return *slot(); }

void set_active(const char* name) {
  if (std::strcmp(name, "scalar") == 0) {
    slot() = &scalar_kernels();
  } else if (std::strcmp(name, "avx2") == 0) {
    if (!avx2_available()) throw std::runtime_error("avx2 not supported on this cpu");
    slot() = &avx2_kernels();
  } else if (std::strcmp(name, "auto") == 0) {
    slot() = pick_auto();
  } else {
    throw std::runtime_error(std::string("unknown kernel set: ") + name);
  }
}

}  // namespace nrl::kernels
