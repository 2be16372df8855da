#pragma once

#include <utility>

#include "tstiefel/tensor3.hpp"

namespace tstiefel {

/// bcirc and the vec-Sylvester oracle refuse matrices with more entries than this.
inline constexpr Index kBcircElementGuard = 100'000'000;

/// Stacks the frontal slices vertically into an (n*l) x p matrix.
Eigen::MatrixXd unfold(const Tensor3d& a);
/// Inverse of unfold; `m` must have rows * slices rows and `cols` columns.
Tensor3d fold(const Eigen::Ref<const Eigen::MatrixXd>& m, Index rows, Index cols, Index slices);

/// Block-circulant matrix whose first block column is unfold(a). Test oracle only.
Eigen::MatrixXd bcirc(const Tensor3d& a);
/// Block-circulant matrix with block (i, j) = A^(j - i + 1 mod l), i.e. the
/// transposed block order used by the vec form of the t-product.
Eigen::MatrixXd bcirc_tilde(const Tensor3d& a);

/// Unnormalized DFT along mode 3: A_hat^(k) = sum_j w^{(k-1)(j-1)} A^(j), w = exp(-2 pi i / l).
SpectralTensor3 dft(const Tensor3d& a);

/// Inverse of dft. Throws ConjugateSymmetryViolated when the imaginary part of
/// the spatial result exceeds 1e-8 of its norm.
Tensor3d idft(const SpectralTensor3& a);

/// Relative conjugate-pairing defect max_k ||A^(k) - conj(A^(l+2-k))||_F / ||A||_F
/// (k = 1 also checks that the first slice is real).
double conjugate_pairing_defect(const SpectralTensor3& a);

/// Builds a spectral tensor by evaluating `slice_fn(k)` (returning an
/// Eigen::MatrixXcd) on the half range k < ceil((l+1)/2) and mirroring the
/// rest by conjugation.
template <typename SliceFn>
SpectralTensor3 spectral_from_half(Index rows, Index cols, Index slices, SliceFn&& slice_fn) {
  SpectralTensor3 out = SpectralTensor3::Uninitialized(rows, cols, slices);
  const Index h = half_range(slices);
  for (Index k = 0; k < h; ++k) {
    Eigen::MatrixXcd m = slice_fn(k);
    if (m.rows() != rows || m.cols() != cols)
      throw DimensionMismatch("spectral_from_half: slice function returned wrong shape");
    out.slice(k) = m;
    const Index mk = mirror_index(k, slices);
    if (mk != k) out.slice(mk) = m.conjugate();
  }
  return out;
}

/// Overwrites slices past the half range with conjugates of their partners.
inline void mirror_from_half(SpectralTensor3& a) {
  const Index l = a.slices();
  for (Index k = 1; k < half_range(l); ++k)
    if (mirror_index(k, l) != k) a.slice(mirror_index(k, l)) = a.slice(k).conjugate();
}

/// Slicewise product C_hat^(k) = A_hat^(k) B_hat^(k).
SpectralTensor3 spectral_product(const SpectralTensor3& a, const SpectralTensor3& b);

/// t-product A * B, computed slicewise in the Fourier domain.
Tensor3d t_product(const Tensor3d& a, const Tensor3d& b);

/// Left-to-right chain A * B * C * ..., transforming every factor once.
template <typename... Rest>
Tensor3d t_product(const Tensor3d& a, const Tensor3d& b, const Tensor3d& c, const Rest&... rest) {
  SpectralTensor3 acc = spectral_product(dft(a), dft(b));
  acc = spectral_product(acc, dft(c));
  ((acc = spectral_product(acc, dft(rest))), ...);
  return idft(acc);
}

/// t-transpose: transpose every slice and reverse the order of slices 2..l.
Tensor3d t_transpose(const Tensor3d& a);

/// Sum of traces of the spectral slices (equals tr(bcirc(A))). Requires n == p.
double trace(const Tensor3d& a);

/// Frobenius inner product sum_ijk a_ijk b_ijk.
double inner(const Tensor3d& a, const Tensor3d& b);
/// Real part of sum conj(a) b over all entries of two spectral tensors.
double inner(const SpectralTensor3& a, const SpectralTensor3& b);
double fnorm(const Tensor3d& a);

Tensor3d sym_part(const Tensor3d& a);
Tensor3d skew_part(const Tensor3d& a);
/// Zeroes the diagonal (i1 == i2) of every frontal slice.
Tensor3d off_part(const Tensor3d& a);
/// Keeps only the diagonal of every frontal slice.
Tensor3d fdiag_part(const Tensor3d& a);

/// Inverse in the t-product algebra. Throws SingularSlice when a spectral
/// slice has reciprocal condition number below 1e-12 or is negligible
/// (norm below 1e-12 of the largest slice).
Tensor3d t_inverse(const Tensor3d& a);

/// Slicewise inverse of a spectral tensor, same guard as t_inverse.
SpectralTensor3 spectral_inverse(const SpectralTensor3& a);

/// ||A^T * A - I||_F, the feasibility defect.
double feasibility_defect(const Tensor3d& x);

}  // namespace tstiefel
