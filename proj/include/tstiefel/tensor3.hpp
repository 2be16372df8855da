#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

#include "tstiefel/errors.hpp"

namespace tstiefel {

using Index = Eigen::Index;
using cdouble = std::complex<double>;

/// Third-order tensor of shape n x p x l stored slice-major.
///
/// Element (i, j, k) lives at offset i + n*j + n*p*k, so each frontal slice
/// is a contiguous column-major n x p block and the flat buffer equals the
/// lexicographic vec(A) = A(:).
template <typename Scalar_>
class Tensor3 {
 public:
  using Scalar = Scalar_;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using SliceMap = Eigen::Map<Matrix>;
  using ConstSliceMap = Eigen::Map<const Matrix>;
  using RealScalar = typename Eigen::NumTraits<Scalar>::Real;

  Tensor3() = default;

  Tensor3(Index rows, Index cols, Index slices)
      : rows_(rows), cols_(cols), slices_(slices) {
    if (rows < 0 || cols < 0 || slices < 0)
      throw InvalidArgument("Tensor3: negative dimension");
    data_ = Vector::Zero(rows * cols * slices);
  }

  /// Tensor with unspecified entries, for callers that overwrite every slice.
  static Tensor3 Uninitialized(Index rows, Index cols, Index slices) {
    if (rows < 0 || cols < 0 || slices < 0)
      throw InvalidArgument("Tensor3: negative dimension");
    Tensor3 t;
    t.rows_ = rows;
    t.cols_ = cols;
    t.slices_ = slices;
    t.data_.resize(rows * cols * slices);
    return t;
  }

  static Tensor3 Zero(Index rows, Index cols, Index slices) {
    return Tensor3(rows, cols, slices);
  }

  /// Identity tensor: first frontal slice is I_n, the rest are zero.
  static Tensor3 Identity(Index n, Index slices) {
    Tensor3 t(n, n, slices);
    if (slices > 0) t.slice(0).setIdentity();
    return t;
  }

  /// Embeds a single matrix as an n x p x 1 tensor.
  static Tensor3 FromMatrix(const Eigen::Ref<const Matrix>& m) {
    Tensor3 t(m.rows(), m.cols(), 1);
    t.slice(0) = m;
    return t;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index slices() const { return slices_; }
  Index size() const { return data_.size(); }
  Index slice_size() const { return rows_ * cols_; }

  bool same_shape(const Tensor3& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && slices_ == o.slices_;
  }

  Scalar& operator()(Index i, Index j, Index k) {
    return data_[i + rows_ * j + rows_ * cols_ * k];
  }
  const Scalar& operator()(Index i, Index j, Index k) const {
    return data_[i + rows_ * j + rows_ * cols_ * k];
  }

  SliceMap slice(Index k) {
    return SliceMap(data_.data() + slice_size() * k, rows_, cols_);
  }
  ConstSliceMap slice(Index k) const {
    return ConstSliceMap(data_.data() + slice_size() * k, rows_, cols_);
  }

  /// Flat slice-major storage (equals vec(A)).
  Vector& vec() { return data_; }
  const Vector& vec() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  RealScalar norm() const { return data_.norm(); }
  RealScalar squaredNorm() const { return data_.squaredNorm(); }

  Tensor3& setZero() {
    data_.setZero();
    return *this;
  }

  Tensor3& operator+=(const Tensor3& o) {
    require_same(o, "operator+=");
    data_ += o.data_;
    return *this;
  }
  Tensor3& operator-=(const Tensor3& o) {
    require_same(o, "operator-=");
    data_ -= o.data_;
    return *this;
  }
  Tensor3& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }
  Tensor3& operator/=(Scalar s) {
    data_ /= s;
    return *this;
  }

  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(Tensor3 a, Scalar s) { return a *= s; }
  friend Tensor3 operator*(Scalar s, Tensor3 a) { return a *= s; }
  friend Tensor3 operator/(Tensor3 a, Scalar s) { return a /= s; }
  friend Tensor3 operator-(Tensor3 a) {
    a.data_ = -a.data_;
    return a;
  }

  /// Entrywise cast, e.g. real -> complex.
  template <typename Other>
  Tensor3<Other> cast() const {
    Tensor3<Other> t(rows_, cols_, slices_);
    t.vec() = data_.template cast<Other>();
    return t;
  }

 private:
  void require_same(const Tensor3& o, const char* what) const {
    if (!same_shape(o))
      throw DimensionMismatch(std::string(what) + ": shapes " + shape_string() +
                              " vs " + o.shape_string());
  }

 public:
  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_) + "x" +
           std::to_string(slices_);
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Index slices_ = 0;
  Vector data_;
};

using Tensor3d = Tensor3<double>;
using Tensor3cd = Tensor3<cdouble>;

/// Real spatial-domain tensor.
using DenseTensor3 = Tensor3d;
/// DFT along mode 3: l complex frontal slices.
using SpectralTensor3 = Tensor3cd;

/// Number of independent Fourier slices, ceil((l + 1) / 2).
inline Index half_range(Index slices) { return slices == 0 ? 0 : slices / 2 + 1; }

/// Index of the conjugate partner of spectral slice k (0-based).
inline Index mirror_index(Index k, Index slices) { return k == 0 ? 0 : slices - k; }

/// True for slices that equal their own conjugate (k = 0 and k = l/2 for even l).
inline bool self_conjugate(Index k, Index slices) { return mirror_index(k, slices) == k; }

}  // namespace tstiefel
