#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "tstiefel/tlinalg.hpp"

namespace tstiefel {

inline constexpr double kFeasibilityTolerance = 1e-10;
inline constexpr double kTangencyTolerance = 1e-8;

/// Immutable point X of St(n, p, l): X^T * X = I.
class StiefelPoint {
 public:
  /// Throws NotOnManifold when ||X^T*X - I||_F exceeds `tol` or n < p.
  explicit StiefelPoint(Tensor3d x, double tol = kFeasibilityTolerance);

  const Tensor3d& value() const { return *x_; }
  Index n() const { return x_->rows(); }
  Index p() const { return x_->cols(); }
  Index l() const { return x_->slices(); }
  bool same_as(const StiefelPoint& o) const { return x_ == o.x_; }

 private:
  std::shared_ptr<const Tensor3d> x_;
};

/// V with X^T * V skew-symmetric, tied to its base point.
class TangentVector {
 public:
  /// Throws NotTangent when ||X^T*V + V^T*X||_F > 1e-8 (1 + ||V||_F).
  TangentVector(StiefelPoint base, Tensor3d v);

  const Tensor3d& value() const { return v_; }
  const StiefelPoint& base() const { return base_; }
  double norm() const { return v_.norm(); }

  TangentVector& operator+=(const TangentVector& o);
  TangentVector& operator*=(double s);
  friend TangentVector operator+(TangentVector a, const TangentVector& b) { return a += b; }
  friend TangentVector operator-(TangentVector a, const TangentVector& b) { return a += -1.0 * b; }
  friend TangentVector operator*(double s, TangentVector a) { return a *= s; }
  friend TangentVector operator-(TangentVector a) { return a *= -1.0; }

 private:
  struct Trusted {};
  TangentVector(StiefelPoint base, Tensor3d v, Trusted) : base_(std::move(base)), v_(std::move(v)) {}
  friend TangentVector make_tangent_unchecked(StiefelPoint base, Tensor3d v);

  StiefelPoint base_;
  Tensor3d v_;
};

/// For formulas that produce tangent vectors by construction.
TangentVector make_tangent_unchecked(StiefelPoint base, Tensor3d v);

/// Metric inner product <U, V> of two tangent vectors at the same point.
double inner(const TangentVector& u, const TangentVector& v);

/// ||X^T*V + V^T*X||_F.
double tangency_defect(const Tensor3d& x, const Tensor3d& v);

enum class Retraction { QR, Polar, Cayley, Exp };
enum class Transport { Projection, QRDiff, PolarDiff, CayleyDiff, CayleyIsometric };

std::string to_string(Retraction r);
std::string to_string(Transport t);
/// Accepts "qr", "polar", "cayley", "exp" (also "t-pd" for polar).
Retraction parse_retraction(const std::string& s);
/// Accepts "projection", "qr-diff", "polar-diff", "cayley-diff", "cayley-isometric".
Transport parse_transport(const std::string& s);
/// Differentiated and isometric transports belong to one retraction; projection fits all.
bool compatible(Retraction r, Transport t);
/// The differentiated transport of `r`, or projection for exp.
Transport default_transport(Retraction r);

/// p(nl - pl/2 - 1/2^{|sin(l pi/2)|}): the exponent term is 1 for even l and 1/2 for odd l.
std::int64_t manifold_dim(std::int64_t n, std::int64_t p, std::int64_t l);

/// Q factor of a seeded Gaussian tensor.
StiefelPoint random_point(Index n, Index p, Index l, std::uint64_t seed);

/// P_X(U) = U - X * sym(X^T * U).
TangentVector project_tangent(const StiefelPoint& x, const Tensor3d& u);
TangentVector riemannian_gradient(const StiefelPoint& x, const Tensor3d& egrad);

/// Hess f(X)[V] = P_X(ehess_v - V * sym(X^T * egrad)). The second term is
/// projected too; unprojected it has a normal component, though the bilinear
/// form on tangent vectors is the same either way.
TangentVector riemannian_hessian_apply(const StiefelPoint& x, const Tensor3d& egrad, const Tensor3d& ehess_v,
                                       const TangentVector& v);
using EuclideanHessian = std::function<Tensor3d(const Tensor3d&)>;
TangentVector riemannian_hessian_apply(const StiefelPoint& x, const Tensor3d& egrad, const EuclideanHessian& ehess,
                                       const TangentVector& v);

/// W_V = P*V*X^T - X*V^T*P with P = I - X*X^T/2; skew-symmetric n x n x l.
Tensor3d cayley_generator(const Tensor3d& x, const Tensor3d& v);

StiefelPoint retract_qr(const TangentVector& v);
StiefelPoint retract_polar(const TangentVector& v);
StiefelPoint retract_cayley(const TangentVector& v);

enum class ExpForm {
  Auto,    ///< closed form when n <= 2p, block form otherwise
  Closed,  ///< exp(t(V*X^T + X*V^T*(X*X^T - I))) * X
  Block,   ///< (X Q) * exp(t [[X^T V, -R^T], [R, O]]) * [I; O]
};
/// Point gamma(t) of the t-exponential curve through X with velocity V.
StiefelPoint retract_exp(const TangentVector& v, double t = 1.0, ExpForm form = ExpForm::Auto);

StiefelPoint retract(Retraction r, const TangentVector& v);

/// Each transport carries V to the tangent space at Y = R_X(U). Pass `target`
/// to reuse an already computed Y; it must equal the matching retraction of U.
TangentVector transport_projection(const TangentVector& u, const TangentVector& v, Retraction r,
                                   const StiefelPoint* target = nullptr);
TangentVector transport_qr_diff(const TangentVector& u, const TangentVector& v, const StiefelPoint* target = nullptr);
TangentVector transport_polar_diff(const TangentVector& u, const TangentVector& v,
                                   const StiefelPoint* target = nullptr);
TangentVector transport_cayley_diff(const TangentVector& u, const TangentVector& v,
                                    const StiefelPoint* target = nullptr);
TangentVector transport_cayley_isometric(const TangentVector& u, const TangentVector& v,
                                         const StiefelPoint* target = nullptr);

/// Throws InvalidArgument when `t` does not fit `r`.
TangentVector transport(Transport t, Retraction r, const TangentVector& u, const TangentVector& v,
                        const StiefelPoint* target = nullptr);

/// d/dt (A(t) * B(t)) = A'(t) * B(t) + A(t) * B'(t).
Tensor3d tangent_curve_product_rule(const Tensor3d& a, const Tensor3d& a_dot, const Tensor3d& b,
                                    const Tensor3d& b_dot);

}  // namespace tstiefel
