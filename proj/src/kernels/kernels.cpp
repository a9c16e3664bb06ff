#include "sarnarrator/kernels.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "kernels_internal.hpp"

namespace sarnarrator::kernels {

namespace detail {

// Row 0 is sqrt(1/N); row k is sqrt(2/N) * cos(pi*(2i+1)*k / (2N)).
const double* dct32_basis() {
  constexpr int kN = kDctN;
  static const double* basis = [] {
    static double d[kN * kN];
    const double inv = 1.0 / static_cast<double>(kN);
    for (int i = 0; i < kN; ++i) d[i] = std::sqrt(inv);
    const double c = std::sqrt(2.0 * inv);
    for (int k = 1; k < kN; ++k) {
      for (int i = 0; i < kN; ++i) {
        d[k * kN + i] = c * std::cos((M_PI / (2.0 * kN)) * k * (2 * i + 1));
      }
    }
    return d;
  }();
  return basis;
}

const double* dct32_basis_t() {
  constexpr int kN = kDctN;
  static const double* basis_t = [] {
    static double dt[kN * kN];
    const double* d = dct32_basis();
    for (int k = 0; k < kN; ++k) {
      for (int i = 0; i < kN; ++i) dt[i * kN + k] = d[k * kN + i];
    }
    return dt;
  }();
  return basis_t;
}

}  // namespace detail

namespace {

constexpr int kN = detail::kDctN;

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend resolve_backend() {
  const char* env = std::getenv("SAR_NARRATOR_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::avx2;
    // "auto" or anything unrecognized falls through to detection.
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

}  // namespace

bool avx2_supported() { return cpu_has_avx2(); }

Backend active_backend() {
  static const Backend b = resolve_backend();
  return b;
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

void dct32_2d_scalar(const double* in, double* out) {
  const double* d = detail::dct32_basis();
  const double* dt = detail::dct32_basis_t();
  double tmp[kN * kN];
  // tmp = in * D^T  (rows transformed): tmp[r][k] = sum_i in[r][i] * DT[i][k].
  // The output index k is innermost so the AVX2 variant can vectorize across
  // it while keeping each element's accumulation order over i unchanged.
  std::memset(tmp, 0, sizeof(tmp));
  for (int r = 0; r < kN; ++r) {
    for (int i = 0; i < kN; ++i) {
      const double w = in[r * kN + i];
      for (int k = 0; k < kN; ++k) tmp[r * kN + k] += w * dt[i * kN + k];
    }
  }
  // out = D * tmp, accumulated over r with the column index innermost so the
  // AVX2 variant can vectorize across columns with the same per-element order.
  std::memset(out, 0, sizeof(double) * kN * kN);
  for (int k = 0; k < kN; ++k) {
    for (int r = 0; r < kN; ++r) {
      const double w = d[k * kN + r];
      for (int j = 0; j < kN; ++j) out[k * kN + j] += w * tmp[r * kN + j];
    }
  }
}

void dct32_2d(const double* in, double* out) {
  if (active_backend() == Backend::avx2) {
    dct32_2d_avx2(in, out);
  } else {
    dct32_2d_scalar(in, out);
  }
}

void pack_rgb_u32(const uint8_t* rgb, size_t n_px, uint32_t* out) {
  for (size_t i = 0; i < n_px; ++i) {
    const uint8_t* p = rgb + i * 3;
    out[i] = (static_cast<uint32_t>(p[0]) << 16) |
             (static_cast<uint32_t>(p[1]) << 8) | static_cast<uint32_t>(p[2]);
  }
}

void match_assign_u32_scalar(const uint32_t* px, size_t n, uint32_t key,
                             int32_t entry_index, int32_t* out_idx) {
  for (size_t i = 0; i < n; ++i) {
    if (px[i] == key) out_idx[i] = entry_index;
  }
}

void match_assign_u32(const uint32_t* px, size_t n, uint32_t key,
                      int32_t entry_index, int32_t* out_idx) {
  if (active_backend() == Backend::avx2) {
    match_assign_u32_avx2(px, n, key, entry_index, out_idx);
  } else {
    match_assign_u32_scalar(px, n, key, entry_index, out_idx);
  }
}

int hamming64(uint64_t a, uint64_t b) { return std::popcount(a ^ b); }

void hamming_batch_scalar(uint64_t a, const uint64_t* b, size_t n,
                          uint16_t* out) {
  for (size_t i = 0; i < n; ++i) {
    out[i] = static_cast<uint16_t>(std::popcount(a ^ b[i]));
  }
}

void hamming_batch(uint64_t a, const uint64_t* b, size_t n, uint16_t* out) {
  if (active_backend() == Backend::avx2) {
    hamming_batch_avx2(a, b, n, out);
  } else {
    hamming_batch_scalar(a, b, n, out);
  }
}

void matmul_a_bt_f32_scalar(const float* a, size_t an, const float* bt,
                            size_t bn, size_t k, float* c) {
  std::memset(c, 0, sizeof(float) * an * bn);
  for (size_t i = 0; i < an; ++i) {
    float* crow = c + i * bn;
    for (size_t kk = 0; kk < k; ++kk) {
      const float w = a[i * k + kk];
      const float* brow = bt + kk * bn;
      for (size_t j = 0; j < bn; ++j) crow[j] += w * brow[j];
    }
  }
}

void matmul_a_bt_f32(const float* a, size_t an, const float* bt, size_t bn,
                     size_t k, float* c) {
  if (active_backend() == Backend::avx2) {
    matmul_a_bt_f32_avx2(a, an, bt, bn, k, c);
  } else {
    matmul_a_bt_f32_scalar(a, an, bt, bn, k, c);
  }
}

#if !defined(__x86_64__) && !defined(__i386__)
// Non-x86 builds fall back to the reference kernels; the dispatcher never
// selects avx2 there.
void dct32_2d_avx2(const double* in, double* out) { dct32_2d_scalar(in, out); }
void match_assign_u32_avx2(const uint32_t* px, size_t n, uint32_t key,
                           int32_t entry_index, int32_t* out_idx) {
  match_assign_u32_scalar(px, n, key, entry_index, out_idx);
}
void hamming_batch_avx2(uint64_t a, const uint64_t* b, size_t n,
                        uint16_t* out) {
  hamming_batch_scalar(a, b, n, out);
}
void matmul_a_bt_f32_avx2(const float* a, size_t an, const float* bt,
                          size_t bn, size_t k, float* c) {
  matmul_a_bt_f32_scalar(a, an, bt, bn, k, c);
}
#endif

}  // namespace sarnarrator::kernels
