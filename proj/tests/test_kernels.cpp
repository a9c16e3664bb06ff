#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "oracle.hpp"
#include "sarnarrator/kernels.hpp"

using namespace sarnarrator;

namespace {

std::vector<double> random_block(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> value(-200.0, 200.0);
  std::vector<double> block(32 * 32);
  for (auto& v : block) v = value(rng);
  return block;
}

}  // namespace

TEST_CASE("active backend resolves and names itself") {
  const auto backend = kernels::active_backend();
  CHECK(kernels::backend_name(backend) != nullptr);
  if (!kernels::avx2_supported()) CHECK(backend == kernels::Backend::scalar);
}

TEST_CASE("dct32_2d scalar and avx2 agree bit for bit") {
  if (!kernels::avx2_supported()) return;
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> in = random_block(rng);
    std::vector<double> out_scalar(32 * 32);
    std::vector<double> out_avx2(32 * 32);
    kernels::dct32_2d_scalar(in.data(), out_scalar.data());
    kernels::dct32_2d_avx2(in.data(), out_avx2.data());
    for (size_t i = 0; i < out_scalar.size(); ++i) {
      CHECK(out_scalar[i] == out_avx2[i]);
    }
  }
}

TEST_CASE("dct32_2d of a constant block concentrates in DC") {
  std::vector<double> in(32 * 32, 3.0);
  std::vector<double> out(32 * 32);
  kernels::dct32_2d(in.data(), out.data());
  // Orthonormal DCT: DC = sum / 32 for a constant 2D block.
  CHECK(out[0] == doctest::Approx(3.0 * 32.0).epsilon(1e-12));
  double off_dc = 0.0;
  for (size_t i = 1; i < out.size(); ++i) off_dc += std::fabs(out[i]);
  CHECK(off_dc < 1e-9);
}

TEST_CASE("dct32_2d preserves total energy") {
  std::mt19937_64 rng(7);
  const std::vector<double> in = random_block(rng);
  std::vector<double> out(32 * 32);
  kernels::dct32_2d(in.data(), out.data());
  double energy_in = 0.0;
  double energy_out = 0.0;
  for (size_t i = 0; i < in.size(); ++i) {
    energy_in += in[i] * in[i];
    energy_out += out[i] * out[i];
  }
  CHECK(energy_out == doctest::Approx(energy_in).epsilon(1e-9));
}

TEST_CASE("match_assign_u32 variants agree") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<uint32_t> word(0, 8);
  for (const size_t n : {0ul, 1ul, 7ul, 8ul, 33ul, 1000ul}) {
    std::vector<uint32_t> px(n);
    for (auto& p : px) p = word(rng);
    std::vector<int32_t> scalar(n, -1);
    std::vector<int32_t> vec(n, -1);
    kernels::match_assign_u32_scalar(px.data(), n, 5, 42, scalar.data());
    if (kernels::avx2_supported()) {
      kernels::match_assign_u32_avx2(px.data(), n, 5, 42, vec.data());
      CHECK(scalar == vec);
    }
    std::vector<int32_t> dispatched(n, -1);
    kernels::match_assign_u32(px.data(), n, 5, 42, dispatched.data());
    CHECK(scalar == dispatched);
  }
}

TEST_CASE("pack_rgb_u32 packs bytes into 0x00RRGGBB") {
  const std::vector<uint8_t> rgb = {0x12, 0x34, 0x56, 0xFF, 0x00, 0x80};
  std::vector<uint32_t> out(2);
  kernels::pack_rgb_u32(rgb.data(), 2, out.data());
  CHECK(out[0] == 0x00123456u);
  CHECK(out[1] == 0x00FF0080u);
}

TEST_CASE("hamming64 and hamming_batch match the bit-loop oracle") {
  std::mt19937_64 rng(29);
  std::vector<uint64_t> hashes(257);
  for (auto& h : hashes) h = rng();
  const uint64_t query = rng();

  std::vector<uint16_t> scalar(hashes.size());
  kernels::hamming_batch_scalar(query, hashes.data(), hashes.size(),
                                scalar.data());
  for (size_t i = 0; i < hashes.size(); ++i) {
    CHECK(scalar[i] == oracle::hamming_bits(query, hashes[i]));
    CHECK(kernels::hamming64(query, hashes[i]) ==
          oracle::hamming_bits(query, hashes[i]));
  }
  if (kernels::avx2_supported()) {
    std::vector<uint16_t> vec(hashes.size());
    kernels::hamming_batch_avx2(query, hashes.data(), hashes.size(),
                                vec.data());
    CHECK(scalar == vec);
  }
}

TEST_CASE("matmul_a_bt_f32 variants are bit-identical") {
  if (!kernels::avx2_supported()) return;
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<float> value(-2.0f, 2.0f);
  for (const auto& [an, bn, k] :
       {std::tuple<size_t, size_t, size_t>{1, 1, 1},
        {3, 5, 7},
        {8, 8, 16},
        {13, 9, 33}}) {
    std::vector<float> a(an * k);
    std::vector<float> bt(k * bn);
    for (auto& v : a) v = value(rng);
    for (auto& v : bt) v = value(rng);
    std::vector<float> c_scalar(an * bn);
    std::vector<float> c_avx2(an * bn);
    kernels::matmul_a_bt_f32_scalar(a.data(), an, bt.data(), bn, k,
                                    c_scalar.data());
    kernels::matmul_a_bt_f32_avx2(a.data(), an, bt.data(), bn, k,
                                  c_avx2.data());
    for (size_t i = 0; i < c_scalar.size(); ++i) {
      CHECK(c_scalar[i] == c_avx2[i]);
    }
  }
}
