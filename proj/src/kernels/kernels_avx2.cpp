#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <bit>
#include <cstring>

#include "kernels_internal.hpp"
#include "sarnarrator/kernels.hpp"

// Compiled with -mavx2 only (no FMA), so mul+add stays two rounded IEEE ops
// exactly like the scalar reference.
namespace sarnarrator::kernels {

namespace {

constexpr int kN = detail::kDctN;

// acc[j..j+3] += w * src[j..j+3] across a row of 32 doubles.
inline void axpy_row32(double* acc, double w, const double* src) {
  const __m256d vw = _mm256_set1_pd(w);
  for (int j = 0; j < kN; j += 4) {
    __m256d a = _mm256_loadu_pd(acc + j);
    __m256d s = _mm256_loadu_pd(src + j);
    a = _mm256_add_pd(a, _mm256_mul_pd(vw, s));
    _mm256_storeu_pd(acc + j, a);
  }
}

}  // namespace

void dct32_2d_avx2(const double* in, double* out) {
  const double* d = detail::dct32_basis();
  const double* dt = detail::dct32_basis_t();
  double tmp[kN * kN];
  std::memset(tmp, 0, sizeof(tmp));
  for (int r = 0; r < kN; ++r) {
    for (int i = 0; i < kN; ++i) {
      axpy_row32(tmp + r * kN, in[r * kN + i], dt + i * kN);
    }
  }
  std::memset(out, 0, sizeof(double) * kN * kN);
  for (int k = 0; k < kN; ++k) {
    for (int r = 0; r < kN; ++r) {
      axpy_row32(out + k * kN, d[k * kN + r], tmp + r * kN);
    }
  }
}

void match_assign_u32_avx2(const uint32_t* px, size_t n, uint32_t key,
                           int32_t entry_index, int32_t* out_idx) {
  const __m256i vkey = _mm256_set1_epi32(static_cast<int32_t>(key));
  const __m256i ventry = _mm256_set1_epi32(entry_index);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i v =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(px + i));
    const __m256i eq = _mm256_cmpeq_epi32(v, vkey);
    const __m256i cur =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(out_idx + i));
    const __m256i merged = _mm256_blendv_epi8(cur, ventry, eq);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out_idx + i), merged);
  }
  for (; i < n; ++i) {
    if (px[i] == key) out_idx[i] = entry_index;
  }
}

void hamming_batch_avx2(uint64_t a, const uint64_t* b, size_t n,
                        uint16_t* out) {
  // Nibble-LUT popcount over 4 xor'ed u64 lanes at a time.
  const __m256i va = _mm256_set1_epi64x(static_cast<long long>(a));
  const __m256i lut = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2,
                                       3, 3, 4, 0, 1, 1, 2, 1, 2, 2, 3, 1, 2,
                                       2, 3, 2, 3, 3, 4);
  const __m256i low_mask = _mm256_set1_epi8(0x0f);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256i vb =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    const __m256i x = _mm256_xor_si256(va, vb);
    const __m256i lo = _mm256_and_si256(x, low_mask);
    const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(x, 4), low_mask);
    const __m256i cnt =
        _mm256_add_epi8(_mm256_shuffle_epi8(lut, lo), _mm256_shuffle_epi8(lut, hi));
    // Horizontal byte sums per 64-bit lane.
    const __m256i sums = _mm256_sad_epu8(cnt, _mm256_setzero_si256());
    alignas(32) uint64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), sums);
    out[i + 0] = static_cast<uint16_t>(lanes[0]);
    out[i + 1] = static_cast<uint16_t>(lanes[1]);
    out[i + 2] = static_cast<uint16_t>(lanes[2]);
    out[i + 3] = static_cast<uint16_t>(lanes[3]);
  }
  for (; i < n; ++i) {
    out[i] = static_cast<uint16_t>(std::popcount(a ^ b[i]));
  }
}

void matmul_a_bt_f32_avx2(const float* a, size_t an, const float* bt,
                          size_t bn, size_t k, float* c) {
  std::memset(c, 0, sizeof(float) * an * bn);
  for (size_t i = 0; i < an; ++i) {
    float* crow = c + i * bn;
    for (size_t kk = 0; kk < k; ++kk) {
      const float w = a[i * k + kk];
      const float* brow = bt + kk * bn;
      const __m256 vw = _mm256_set1_ps(w);
      size_t j = 0;
      for (; j + 8 <= bn; j += 8) {
        __m256 acc = _mm256_loadu_ps(crow + j);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(vw, _mm256_loadu_ps(brow + j)));
        _mm256_storeu_ps(crow + j, acc);
      }
      for (; j < bn; ++j) crow[j] += w * brow[j];
    }
  }
}

}  // namespace sarnarrator::kernels

#endif  // x86
