#pragma once

namespace sarnarrator::kernels::detail {

inline constexpr int kDctN = 32;

// Shared orthonormal DCT-II basis (row-major) and its transpose. Both
// backends must read the same table so results stay bit-identical.
const double* dct32_basis();
const double* dct32_basis_t();

}  // namespace sarnarrator::kernels::detail
