#include "tstiefel/tcore.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace tstiefel {

namespace {

// Above this many slices the transforms run tube-by-tube through an FFT;
// below it the O(l^2) slice-level sum is faster.
constexpr Index kDirectDftMaxSlices = 32;

struct Twiddles {
  std::vector<double> cos_table, sin_table;
  explicit Twiddles(Index l) : cos_table(l), sin_table(l) {
    for (Index m = 0; m < l; ++m) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(l);
      cos_table[m] = std::cos(angle);
      sin_table[m] = std::sin(angle);
      if ((4 * m) % l == 0) {
        // Exact values at multiples of pi/2.
        const Index quarter = (4 * m) / l;
        cos_table[m] = quarter == 0 ? 1.0 : quarter == 2 ? -1.0 : 0.0;
        sin_table[m] = quarter == 1 ? 1.0 : quarter == 3 ? -1.0 : 0.0;
      }
    }
  }
};

void require_square(const Tensor3d& a, const char* what) {
  if (a.rows() != a.cols())
    throw DimensionMismatch(std::string(what) + ": tensor is not f-square (" + a.shape_string() + ")");
}

// Tube-major views: column k of the np x l matrix is slice k.
using SliceColumns = Eigen::Map<const Eigen::MatrixXd>;
using ComplexSliceColumns = Eigen::Map<const Eigen::MatrixXcd>;

SpectralTensor3 dft_direct(const Tensor3d& a) {
  const Index n = a.rows(), p = a.cols(), l = a.slices(), h = half_range(l);
  const Index np = n * p;
  const Twiddles tw(l);
  SpectralTensor3 out = SpectralTensor3::Uninitialized(n, p, l);
  const SliceColumns cols(a.data(), np, l);
  Eigen::ArrayXd re(np), im(np);
  for (Index k = 0; k < h; ++k) {
    re = cols.col(0).array();
    im.setZero();
    for (Index j = 1; j < l; ++j) {
      re += tw.cos_table[(j * k) % l] * cols.col(j).array();
      im -= tw.sin_table[(j * k) % l] * cols.col(j).array();
    }
    auto dst = out.slice(k).reshaped();
    dst.real() = re;
    dst.imag() = im;
    const Index mk = mirror_index(k, l);
    if (mk != k) out.slice(mk) = out.slice(k).conjugate();
    else out.slice(k).imag().setZero();
  }
  return out;
}

SpectralTensor3 dft_fft(const Tensor3d& a) {
  const Index n = a.rows(), p = a.cols(), l = a.slices();
  SpectralTensor3 out(n, p, l);
  Eigen::FFT<double> fft;
  std::vector<double> tube(l);
  std::vector<cdouble> spec;
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < l; ++k) tube[k] = a(i, j, k);
      fft.fwd(spec, tube);
      for (Index k = 0; k < l; ++k) out(i, j, k) = spec[k];
    }
  // Force exact pairing; the FFT output already satisfies it to rounding.
  for (Index k = 1; k < half_range(l); ++k) {
    const Index mk = mirror_index(k, l);
    if (mk != k) out.slice(mk) = out.slice(k).conjugate();
    else out.slice(k).imag().setZero();
  }
  out.slice(0).imag().setZero();
  return out;
}

Tensor3cd idft_complex(const SpectralTensor3& a) {
  const Index n = a.rows(), p = a.cols(), l = a.slices();
  Tensor3cd out(n, p, l);
  Eigen::FFT<double> fft;
  std::vector<cdouble> tube(l), spatial;
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < l; ++k) tube[k] = a(i, j, k);
      fft.inv(spatial, tube);
      for (Index k = 0; k < l; ++k) out(i, j, k) = spatial[k];
    }
  return out;
}

// Real part of the inverse transform from the conjugate-symmetrized half range,
// (A^(j) + conj(A^(l-j))) / 2 for j < h, as one real GEMM.
Tensor3d idft_direct(const SpectralTensor3& a) {
  const Index n = a.rows(), p = a.cols(), l = a.slices(), h = half_range(l);
  const Index np = n * p;
  const ComplexSliceColumns cols(a.data(), np, l);
  Eigen::MatrixXd sym(np, 2 * h);
  for (Index j = 0; j < h; ++j) {
    const Index mj = mirror_index(j, l);
    sym.col(j) = 0.5 * (cols.col(j).real() + cols.col(mj).real());
    sym.col(h + j) = 0.5 * (cols.col(j).imag() - cols.col(mj).imag());
  }
  const Twiddles tw(l);
  const double scale = 1.0 / static_cast<double>(l);
  Eigen::MatrixXd w(2 * h, l);
  for (Index j = 0; j < h; ++j) {
    const double weight = (mirror_index(j, l) == j ? 1.0 : 2.0) * scale;
    for (Index k = 0; k < l; ++k) {
      w(j, k) = weight * tw.cos_table[(j * k) % l];
      w(h + j, k) = -weight * tw.sin_table[(j * k) % l];
    }
  }
  Tensor3d out = Tensor3d::Uninitialized(n, p, l);
  Eigen::Map<Eigen::MatrixXd>(out.data(), np, l).noalias() = sym * w;
  return out;
}

}  // namespace

Eigen::MatrixXd unfold(const Tensor3d& a) {
  Eigen::MatrixXd m(a.rows() * a.slices(), a.cols());
  for (Index k = 0; k < a.slices(); ++k) m.middleRows(k * a.rows(), a.rows()) = a.slice(k);
  return m;
}

Tensor3d fold(const Eigen::Ref<const Eigen::MatrixXd>& m, Index rows, Index cols, Index slices) {
  if (m.rows() != rows * slices || m.cols() != cols)
    throw DimensionMismatch("fold: matrix is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " +
                            std::to_string(rows * slices) + "x" + std::to_string(cols));
  Tensor3d a(rows, cols, slices);
  for (Index k = 0; k < slices; ++k) a.slice(k) = m.middleRows(k * rows, rows);
  return a;
}

namespace {

Eigen::MatrixXd block_circulant(const Tensor3d& a, bool tilde) {
  const Index n = a.rows(), p = a.cols(), l = a.slices();
  if ((n * l) * (p * l) > kBcircElementGuard)
    throw SizeGuardExceeded("bcirc: " + a.shape_string() + " exceeds the oracle size guard");
  Eigen::MatrixXd m(n * l, p * l);
  for (Index bi = 0; bi < l; ++bi)
    for (Index bj = 0; bj < l; ++bj) {
      const Index k = tilde ? (bj - bi + l) % l : (bi - bj + l) % l;
      m.block(bi * n, bj * p, n, p) = a.slice(k);
    }
  return m;
}

}  // namespace

Eigen::MatrixXd bcirc(const Tensor3d& a) { return block_circulant(a, false); }
Eigen::MatrixXd bcirc_tilde(const Tensor3d& a) { return block_circulant(a, true); }

SpectralTensor3 dft(const Tensor3d& a) {
  if (a.slices() <= kDirectDftMaxSlices) return dft_direct(a);
  return dft_fft(a);
}

Tensor3d idft(const SpectralTensor3& a) {
  const Index l = a.slices();
  if (l <= kDirectDftMaxSlices) {
    // By Parseval the imaginary residue of the full inverse equals the
    // anti-Hermitian part of the input scaled by 1/sqrt(l).
    const ComplexSliceColumns cols(a.data(), a.rows() * a.cols(), l);
    double defect2 = 0.0;
    for (Index k = 0; k < l; ++k)
      defect2 += (cols.col(k) - cols.col(mirror_index(k, l)).conjugate()).squaredNorm();
    const double root_l = std::sqrt(static_cast<double>(l));
    const double residue = 0.5 * std::sqrt(defect2) / root_l;
    const double total = a.norm() / root_l;
    if (residue > 1e-8 * total && residue > 0.0)
      throw ConjugateSymmetryViolated("idft: imaginary residue " + std::to_string(residue) +
                                      " relative to norm " + std::to_string(total));
    return idft_direct(a);
  }
  const Tensor3cd c = idft_complex(a);
  const double total = c.norm();
  const double residue = c.vec().imag().norm();
  if (residue > 1e-8 * total && residue > 0.0)
    throw ConjugateSymmetryViolated("idft: imaginary residue " + std::to_string(residue) +
                                    " relative to norm " + std::to_string(total));
  Tensor3d out(a.rows(), a.cols(), a.slices());
  out.vec() = c.vec().real();
  return out;
}

double conjugate_pairing_defect(const SpectralTensor3& a) {
  const double total = a.norm();
  if (total == 0.0) return 0.0;
  double worst = 0.0;
  const Index l = a.slices();
  for (Index k = 0; k < l; ++k) {
    const Index mk = mirror_index(k, l);
    const double d = (a.slice(k) - a.slice(mk).conjugate()).norm();
    worst = std::max(worst, d);
  }
  return worst / total;
}

SpectralTensor3 spectral_product(const SpectralTensor3& a, const SpectralTensor3& b) {
  if (a.cols() != b.rows() || a.slices() != b.slices())
    throw DimensionMismatch("t_product: " + a.shape_string() + " * " + b.shape_string());
  return spectral_from_half(a.rows(), b.cols(), a.slices(),
                            [&](Index k) -> Eigen::MatrixXcd { return a.slice(k) * b.slice(k); });
}

Tensor3d t_product(const Tensor3d& a, const Tensor3d& b) {
  if (a.cols() != b.rows() || a.slices() != b.slices())
    throw DimensionMismatch("t_product: " + a.shape_string() + " * " + b.shape_string());
  if (a.slices() == 1) {
    Tensor3d c(a.rows(), b.cols(), 1);
    c.slice(0).noalias() = a.slice(0) * b.slice(0);
    return c;
  }
  return idft(spectral_product(dft(a), dft(b)));
}

Tensor3d t_transpose(const Tensor3d& a) {
  const Index l = a.slices();
  Tensor3d t(a.cols(), a.rows(), l);
  for (Index k = 0; k < l; ++k) t.slice(k) = a.slice(mirror_index(k, l)).transpose();
  return t;
}

double trace(const Tensor3d& a) {
  require_square(a, "trace");
  // sum_k tr(A_hat^(k)) = l * tr(A^(1)) because sum_k w^{kj} = l * delta_j0.
  return static_cast<double>(a.slices()) * a.slice(0).trace();
}

double inner(const Tensor3d& a, const Tensor3d& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("inner: " + a.shape_string() + " vs " + b.shape_string());
  return a.vec().dot(b.vec());
}

double inner(const SpectralTensor3& a, const SpectralTensor3& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("inner: " + a.shape_string() + " vs " + b.shape_string());
  return a.vec().dot(b.vec()).real();
}

double fnorm(const Tensor3d& a) { return a.norm(); }

Tensor3d sym_part(const Tensor3d& a) {
  require_square(a, "sym_part");
  return 0.5 * (a + t_transpose(a));
}

Tensor3d skew_part(const Tensor3d& a) {
  require_square(a, "skew_part");
  return 0.5 * (a - t_transpose(a));
}

Tensor3d off_part(const Tensor3d& a) {
  require_square(a, "off_part");
  Tensor3d t = a;
  for (Index k = 0; k < t.slices(); ++k) t.slice(k).diagonal().setZero();
  return t;
}

Tensor3d fdiag_part(const Tensor3d& a) {
  require_square(a, "fdiag_part");
  Tensor3d t(a.rows(), a.cols(), a.slices());
  for (Index k = 0; k < t.slices(); ++k) t.slice(k).diagonal() = a.slice(k).diagonal();
  return t;
}

SpectralTensor3 spectral_inverse(const SpectralTensor3& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("t_inverse: tensor is not f-square");
  double largest = 0.0;
  for (Index k = 0; k < a.slices(); ++k) largest = std::max(largest, a.slice(k).norm());
  return spectral_from_half(a.rows(), a.cols(), a.slices(), [&](Index k) -> Eigen::MatrixXcd {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a.slice(k));
    if (!(lu.rcond() >= 1e-12) || a.slice(k).norm() <= 1e-12 * largest) throw SingularSlice("t_inverse: singular slice", k);
    if (self_conjugate(k, a.slices())) {
      // Keep self-conjugate slices exactly real.
      Eigen::MatrixXcd inv = lu.inverse();
      inv.imag().setZero();
      return inv;
    }
    return lu.inverse();
  });
}

Tensor3d t_inverse(const Tensor3d& a) {
  require_square(a, "t_inverse");
  return idft(spectral_inverse(dft(a)));
}

double feasibility_defect(const Tensor3d& x) {
  Tensor3d g = t_product(t_transpose(x), x);
  g.slice(0) -= Eigen::MatrixXd::Identity(x.cols(), x.cols());
  return g.norm();
}

}  // namespace tstiefel
