#include "tstiefel/tlinalg.hpp"

#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace tstiefel {

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;

template <typename Matrix>
auto svd_of(const Matrix& m, bool full) {
  const unsigned opts = full ? (Eigen::ComputeFullU | Eigen::ComputeFullV) : (Eigen::ComputeThinU | Eigen::ComputeThinV);
  return Eigen::BDCSVD<Matrix>(m, opts);
}

void check_rank(const Eigen::VectorXd& sigma, Index k) {
  if (sigma.size() == 0) return;
  if (!(sigma(sigma.size() - 1) > kRankTolerance * sigma(0)))
    throw RankDeficientSlice("rank guard: sigma_min/sigma_max below threshold", k);
}

// Eigen-decomposition of the Hermitian part; real arithmetic on self-conjugate slices.
struct HermEig {
  Eigen::VectorXd values;
  MatrixXcd vectors;
};

HermEig herm_eig(const Eigen::Ref<const MatrixXcd>& s, bool real) {
  HermEig out;
  if (real) {
    const MatrixXd h = 0.5 * (s.real() + s.real().transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors().cast<cdouble>();
  } else {
    const MatrixXcd h = 0.5 * (s + s.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  return out;
}

enum class RootKind { Sqrt, InvSqrt };

SpectralTensor3 spectral_root(const SpectralTensor3& a, RootKind kind) {
  if (a.rows() != a.cols()) throw DimensionMismatch("spd root: tensor is not f-square");
  return spectral_from_half(a.rows(), a.cols(), a.slices(), [&](Index k) -> MatrixXcd {
    const HermEig e = herm_eig(a.slice(k), self_conjugate(k, a.slices()));
    const double scale = std::max(e.values.cwiseAbs().maxCoeff(), 0.0);
    const double lmin = e.values.size() ? e.values.minCoeff() : 1.0;
    Eigen::VectorXd f(e.values.size());
    if (kind == RootKind::Sqrt) {
      if (lmin < -1e-12 * scale) throw NotPositive(k, lmin);
      f = e.values.cwiseMax(0.0).cwiseSqrt();
    } else {
      if (!(lmin > 1e-12 * scale)) throw NotPositive(k, lmin);
      f = e.values.cwiseSqrt().cwiseInverse();
    }
    MatrixXcd r = e.vectors * f.asDiagonal() * e.vectors.adjoint();
    if (self_conjugate(k, a.slices())) r.imag().setZero();
    return r;
  });
}

// Thin Householder QR of one slice with the positive-diagonal gauge.
template <typename Matrix>
void slice_qr(const Matrix& a, Index k, bool phase_fix, Matrix& q, Matrix& r) {
  const Index n = a.rows(), p = a.cols();
  Eigen::HouseholderQR<Matrix> qr(a);
  q = qr.householderQ() * Matrix::Identity(n, p);
  r = qr.matrixQR().topRows(p).template triangularView<Eigen::Upper>();
  const Eigen::VectorXd sigma = Eigen::JacobiSVD<Matrix>(r).singularValues();
  check_rank(sigma, k);
  if (!phase_fix) return;
  for (Index i = 0; i < p; ++i) {
    const auto d = r(i, i);
    const double mag = std::abs(d);
    if (mag == 0.0) continue;
    const auto phase = d / mag;
    q.col(i) *= phase;
    r.row(i) *= Eigen::numext::conj(phase);
    r(i, i) = mag;
  }
}

void qr_spectral(const SpectralTensor3& a, const QrOptions& options, SpectralTensor3& q, SpectralTensor3* r) {
  const Index n = a.rows(), p = a.cols(), l = a.slices();
  if (n < p) throw InvalidArgument("t_qr: needs n >= p, got " + a.shape_string());
  q = SpectralTensor3(n, p, l);
  if (r) *r = SpectralTensor3(p, p, l);
  for (Index k = 0; k < half_range(l); ++k) {
    if (self_conjugate(k, l)) {
      MatrixXd qk, rk;
      slice_qr<MatrixXd>(a.slice(k).real(), k, options.phase_fix, qk, rk);
      q.slice(k) = qk.cast<cdouble>();
      if (r) r->slice(k) = rk.cast<cdouble>();
    } else {
      MatrixXcd qk, rk;
      slice_qr<MatrixXcd>(a.slice(k), k, options.phase_fix, qk, rk);
      q.slice(k) = qk;
      if (r) r->slice(k) = rk;
    }
  }
  mirror_from_half(q);
  if (r) mirror_from_half(*r);
}

}  // namespace

TSvd t_svd(const Tensor3d& a, bool compact) {
  const Index n = a.rows(), p = a.cols(), l = a.slices(), r = std::min(n, p);
  const SpectralTensor3 ah = dft(a);
  SpectralTensor3 u(n, compact ? r : n, l), s(compact ? r : n, compact ? r : p, l), v(p, compact ? r : p, l);
  for (Index k = 0; k < half_range(l); ++k) {
    MatrixXcd uk, vk;
    Eigen::VectorXd sigma;
    if (self_conjugate(k, l)) {
      const auto svd = svd_of<MatrixXd>(ah.slice(k).real(), !compact);
      uk = svd.matrixU().cast<cdouble>();
      vk = svd.matrixV().cast<cdouble>();
      sigma = svd.singularValues();
    } else {
      const auto svd = svd_of<MatrixXcd>(ah.slice(k), !compact);
      uk = svd.matrixU();
      vk = svd.matrixV();
      sigma = svd.singularValues();
    }
    u.slice(k) = uk;
    v.slice(k) = vk;
    for (Index i = 0; i < r; ++i) s(i, i, k) = sigma(i);
  }
  mirror_from_half(u);
  mirror_from_half(s);
  mirror_from_half(v);
  return {idft(u), idft(s), idft(v)};
}

SpectralTensor3 spectral_qf(const SpectralTensor3& a, const QrOptions& options) {
  SpectralTensor3 q;
  qr_spectral(a, options, q, nullptr);
  return q;
}

TQr t_qr(const Tensor3d& a, const QrOptions& options) {
  SpectralTensor3 q, r;
  qr_spectral(dft(a), options, q, &r);
  return {idft(q), idft(r)};
}

SpectralTensor3 spectral_spd_sqrt(const SpectralTensor3& a) { return spectral_root(a, RootKind::Sqrt); }
SpectralTensor3 spectral_spd_inv_sqrt(const SpectralTensor3& a) { return spectral_root(a, RootKind::InvSqrt); }
Tensor3d spd_sqrt(const Tensor3d& a) { return idft(spectral_spd_sqrt(dft(a))); }
Tensor3d spd_inv_sqrt(const Tensor3d& a) { return idft(spectral_spd_inv_sqrt(dft(a))); }

TPolar t_polar(const Tensor3d& a) {
  const Index n = a.rows(), p = a.cols(), l = a.slices();
  if (n < p) throw InvalidArgument("t_polar: needs n >= p, got " + a.shape_string());
  const SpectralTensor3 ah = dft(a);
  SpectralTensor3 ph(n, p, l), hh(p, p, l);
  for (Index k = 0; k < half_range(l); ++k) {
    MatrixXcd uk, vk;
    Eigen::VectorXd sigma;
    if (self_conjugate(k, l)) {
      const auto svd = svd_of<MatrixXd>(ah.slice(k).real(), false);
      uk = svd.matrixU().cast<cdouble>();
      vk = svd.matrixV().cast<cdouble>();
      sigma = svd.singularValues();
    } else {
      const auto svd = svd_of<MatrixXcd>(ah.slice(k), false);
      uk = svd.matrixU();
      vk = svd.matrixV();
      sigma = svd.singularValues();
    }
    check_rank(sigma, k);
    ph.slice(k) = uk * vk.adjoint();
    hh.slice(k) = vk * sigma.asDiagonal() * vk.adjoint();
  }
  mirror_from_half(ph);
  mirror_from_half(hh);
  return {idft(ph), idft(hh)};
}

Tensor3d procrustes_max(const Tensor3d& a) { return t_polar(a).P; }

SpectralTensor3 spectral_exp(const SpectralTensor3& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("t_exp: tensor is not f-square");
  return spectral_from_half(a.rows(), a.cols(), a.slices(), [&](Index k) -> MatrixXcd {
    if (self_conjugate(k, a.slices())) {
      const MatrixXd re = a.slice(k).real();
      return MatrixXd(re.exp()).cast<cdouble>();
    }
    const MatrixXcd s = a.slice(k);
    return s.exp();
  });
}

Tensor3d t_exp(const Tensor3d& a) { return idft(spectral_exp(dft(a))); }

void skew_upper_split(const MatrixXcd& b, MatrixXcd& skew, MatrixXcd& upper) {
  if (b.rows() != b.cols()) throw DimensionMismatch("skew_upper_split: slice is not square");
  const Index p = b.rows();
  skew = MatrixXcd::Zero(p, p);
  for (Index n = 0; n < p; ++n) {
    for (Index m = n + 1; m < p; ++m) {
      skew(m, n) = b(m, n);
      skew(n, m) = -std::conj(b(m, n));
    }
    skew(n, n) = cdouble(0.0, b(n, n).imag());
  }
  upper = b - skew;
}

SkewUpper skew_upper_split(const SpectralTensor3& b) {
  if (b.rows() != b.cols()) throw DimensionMismatch("skew_upper_split: tensor is not f-square");
  SkewUpper out{SpectralTensor3(b.rows(), b.cols(), b.slices()), SpectralTensor3(b.rows(), b.cols(), b.slices())};
  MatrixXcd s, t;
  for (Index k = 0; k < b.slices(); ++k) {
    skew_upper_split(MatrixXcd(b.slice(k)), s, t);
    out.skew.slice(k) = s;
    out.upper.slice(k) = t;
  }
  return out;
}

Eigen::MatrixXd sylvester_vec_matrix(const Tensor3d& a, const Tensor3d& b) {
  const Index n = a.rows(), p = b.rows(), l = a.slices();
  if (a.cols() != n || b.cols() != p || b.slices() != l)
    throw DimensionMismatch("t_sylvester: A must be n x n x l and B p x p x l");
  const Index dim = n * p * l;
  if (dim * dim > kBcircElementGuard) throw SizeGuardExceeded("t_sylvester_vec: system too large");
  // X*B part: kron(bcirc~(B)^T, I_n).
  MatrixXd m = Eigen::kroneckerProduct(MatrixXd(bcirc_tilde(b).transpose()), MatrixXd::Identity(n, n));
  // A*X part: bcirc(A) with every n x n block A^(s) widened to I_p (x) A^(s).
  const MatrixXd ca = bcirc(a);
  for (Index bi = 0; bi < l; ++bi)
    for (Index bj = 0; bj < l; ++bj)
      m.block(bi * n * p, bj * n * p, n * p, n * p) +=
          Eigen::kroneckerProduct(MatrixXd::Identity(p, p), MatrixXd(ca.block(bi * n, bj * n, n, n)));
  return m;
}

Tensor3d t_sylvester_vec(const Tensor3d& a, const Tensor3d& b, const Tensor3d& c) {
  if (c.rows() != a.rows() || c.cols() != b.rows() || c.slices() != a.slices())
    throw DimensionMismatch("t_sylvester: C has shape " + c.shape_string());
  const MatrixXd m = sylvester_vec_matrix(a, b);
  Tensor3d x(c.rows(), c.cols(), c.slices());
  x.vec() = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(m).solve(c.vec());
  const double residual = (t_product(a, x) + t_product(x, b) - c).norm();
  if (residual > 1e-8 * c.norm())
    throw InconsistentSystem("t_sylvester_vec: residual " + std::to_string(residual) + " exceeds tolerance");
  return x;
}

SpectralTensor3 spectral_sylvester(const SpectralTensor3& a, const SpectralTensor3& b, const SpectralTensor3& c) {
  const Index n = a.rows(), p = b.rows(), l = a.slices();
  if (a.cols() != n || b.cols() != p || b.slices() != l || c.rows() != n || c.cols() != p || c.slices() != l)
    throw DimensionMismatch("t_sylvester: shapes " + a.shape_string() + ", " + b.shape_string() + ", " +
                            c.shape_string());
  return spectral_from_half(n, p, l, [&](Index k) -> MatrixXcd {
    Eigen::ComplexSchur<MatrixXcd> sa(MatrixXcd(a.slice(k))), sb(MatrixXcd(b.slice(k)));
    const MatrixXcd& ta = sa.matrixT();
    const MatrixXcd& tb = sb.matrixT();
    const double scale = std::max({a.slice(k).norm(), b.slice(k).norm(), 1e-300});
    // T_A Y + Y T_B = U_A^H C U_B, solved column by column.
    const MatrixXcd f = sa.matrixU().adjoint() * c.slice(k) * sb.matrixU();
    MatrixXcd y(n, p);
    for (Index j = 0; j < p; ++j) {
      Eigen::VectorXcd rhs = f.col(j);
      if (j > 0) rhs.noalias() -= y.leftCols(j) * tb.col(j).head(j);
      MatrixXcd lhs = ta;
      lhs.diagonal().array() += tb(j, j);
      if (lhs.diagonal().cwiseAbs().minCoeff() < 1e-12 * scale)
        throw SingularPencil("t_sylvester: A and -B share an eigenvalue", k);
      y.col(j) = lhs.triangularView<Eigen::Upper>().solve(rhs);
    }
    MatrixXcd x = sa.matrixU() * y * sb.matrixU().adjoint();
    if (self_conjugate(k, l)) x.imag().setZero();
    return x;
  });
}

Tensor3d t_sylvester_spectral(const Tensor3d& a, const Tensor3d& b, const Tensor3d& c) {
  return idft(spectral_sylvester(dft(a), dft(b), dft(c)));
}

}  // namespace tstiefel
