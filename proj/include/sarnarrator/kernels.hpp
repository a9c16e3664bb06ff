#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops, built as scalar reference kernels plus AVX2
// variants selected at runtime. Every variant is bit-exact against the scalar
// reference: integer kernels trivially, floating-point kernels by construction
// (vectorization runs across independent output elements while reduction
// order stays identical, and the AVX2 units are compiled without FMA
// contraction). Equivalence is enforced by tests/test_kernels.cpp.
namespace sarnarrator::kernels {

enum class Backend { scalar, avx2 };

// Backend the dispatcher resolved for this process: AVX2 when the CPU has it,
// overridable with SAR_NARRATOR_KERNELS=scalar|avx2|auto.
Backend active_backend();
const char* backend_name(Backend b);
bool avx2_supported();

// 2D DCT-II of a 32x32 block, orthonormal scaling: out = D * in * D^T.
// Dispatched and per-backend entry points (the latter exist for the
// equivalence tests).
void dct32_2d(const double* in, double* out);
void dct32_2d_scalar(const double* in, double* out);
void dct32_2d_avx2(const double* in, double* out);

// Packs interleaved RGB8 pixels into 0x00RRGGBB words (scalar prep step for
// the matchers below).
void pack_rgb_u32(const uint8_t* rgb, size_t n_px, uint32_t* out);

// Writes `entry_index` into out_idx[i] wherever px[i] == key. Used to build a
// CategoryGrid by sweeping the palette.
void match_assign_u32(const uint32_t* px, size_t n, uint32_t key,
                      int32_t entry_index, int32_t* out_idx);
void match_assign_u32_scalar(const uint32_t* px, size_t n, uint32_t key,
                             int32_t entry_index, int32_t* out_idx);
void match_assign_u32_avx2(const uint32_t* px, size_t n, uint32_t key,
                           int32_t entry_index, int32_t* out_idx);

int hamming64(uint64_t a, uint64_t b);

// out[i] = popcount(a ^ b[i]) for a query hash against a block of hashes.
void hamming_batch(uint64_t a, const uint64_t* b, size_t n, uint16_t* out);
void hamming_batch_scalar(uint64_t a, const uint64_t* b, size_t n,
                          uint16_t* out);
void hamming_batch_avx2(uint64_t a, const uint64_t* b, size_t n,
                        uint16_t* out);

// c[i*bn + j] = dot(a_i, bt_:,j): A is (an x k) row-major, BT is (k x bn)
// row-major (i.e. B transposed by the caller). Accumulation order over k is
// identical in every backend.
void matmul_a_bt_f32(const float* a, size_t an, const float* bt, size_t bn,
                     size_t k, float* c);
void matmul_a_bt_f32_scalar(const float* a, size_t an, const float* bt,
                            size_t bn, size_t k, float* c);
void matmul_a_bt_f32_avx2(const float* a, size_t an, const float* bt,
                          size_t bn, size_t k, float* c);

}  // namespace sarnarrator::kernels
