#pragma once

#include "tstiefel/tcore.hpp"

namespace tstiefel {

/// A = U * S * V^T. Full: U n x n, S n x p, V p x p. Compact (r = min(n, p)):
/// U n x r, S r x r, V p x r.
struct TSvd {
  Tensor3d U, S, V;
};

/// A = Q * R with Q^T * Q = I and spectral R slices upper triangular.
struct TQr {
  Tensor3d Q, R;
};

/// A = P * H with P partially orthogonal and H symmetric t-positive semidefinite.
struct TPolar {
  Tensor3d P, H;
};

struct QrOptions {
  /// Rotate each Q column so the matching R diagonal is positive real. Turning
  /// this off gives an arbitrary (non-unique) Householder gauge.
  bool phase_fix = true;
};

/// Relative threshold on sigma_min / sigma_max used by the rank guards.
inline constexpr double kRankTolerance = 1e-12;

TSvd t_svd(const Tensor3d& a, bool compact = false);

/// Throws RankDeficientSlice when a spectral slice is rank deficient and
/// InvalidArgument when n < p.
TQr t_qr(const Tensor3d& a, const QrOptions& options = {});
/// Q factor only, in the Fourier domain.
SpectralTensor3 spectral_qf(const SpectralTensor3& a, const QrOptions& options = {});

/// Symmetric square root of a symmetric t-PSD tensor. Throws NotPositive.
Tensor3d spd_sqrt(const Tensor3d& a);
/// Symmetric inverse square root of a symmetric t-PD tensor. Throws NotPositive.
Tensor3d spd_inv_sqrt(const Tensor3d& a);
SpectralTensor3 spectral_spd_sqrt(const SpectralTensor3& a);
SpectralTensor3 spectral_spd_inv_sqrt(const SpectralTensor3& a);

/// P = U * V^T and H = V * S * V^T from the compact t-SVD. Throws RankDeficientSlice.
TPolar t_polar(const Tensor3d& a);

/// argmax <A, X> over X in St(n, p, l); the P factor of t_polar.
Tensor3d procrustes_max(const Tensor3d& a);

/// Slicewise matrix exponential in the Fourier domain (scaling and squaring
/// with a degree-13 Pade approximant).
Tensor3d t_exp(const Tensor3d& a);
SpectralTensor3 spectral_exp(const SpectralTensor3& a);

/// B = S + T per slice, S skew-Hermitian and T upper triangular with real diagonal.
struct SkewUpper {
  SpectralTensor3 skew, upper;
};
SkewUpper skew_upper_split(const SpectralTensor3& b);
/// Single-slice version of the split.
void skew_upper_split(const Eigen::MatrixXcd& b, Eigen::MatrixXcd& skew, Eigen::MatrixXcd& upper);

/// Solves A*X + X*B = C through the npl x npl vectorized system and its
/// pseudoinverse. Small sizes only: throws SizeGuardExceeded when (npl)^2
/// exceeds kBcircElementGuard, InconsistentSystem when the residual exceeds
/// 1e-8 ||C||.
Tensor3d t_sylvester_vec(const Tensor3d& a, const Tensor3d& b, const Tensor3d& c);

/// The npl x npl matrix of X -> A*X + X*B acting on vec(X).
Eigen::MatrixXd sylvester_vec_matrix(const Tensor3d& a, const Tensor3d& b);

/// Solves A*X + X*B = C slicewise with Bartels-Stewart. Throws SingularPencil
/// when some eigenvalue sum of A_hat^(k) and B_hat^(k) is nearly zero.
Tensor3d t_sylvester_spectral(const Tensor3d& a, const Tensor3d& b, const Tensor3d& c);
SpectralTensor3 spectral_sylvester(const SpectralTensor3& a, const SpectralTensor3& b, const SpectralTensor3& c);

}  // namespace tstiefel
