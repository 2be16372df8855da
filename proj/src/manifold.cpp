#include "tstiefel/manifold.hpp"


#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "tstiefel/random.hpp"

namespace tstiefel {

namespace {

using Eigen::MatrixXcd;

Tensor3d tt(const Tensor3d& a) { return t_transpose(a); }

Tensor3d identity_like(Index n, Index l) { return Tensor3d::Identity(n, l); }

// Slicewise solve A_hat^(k) Z = B_hat^(k).
SpectralTensor3 spectral_solve(const SpectralTensor3& a, const SpectralTensor3& b) {
  return spectral_from_half(b.rows(), b.cols(), b.slices(), [&](Index k) -> MatrixXcd {
    Eigen::PartialPivLU<MatrixXcd> lu(a.slice(k));
    if (!(lu.rcond() >= 1e-12)) throw SingularSlice("linear solve: singular slice", k);
    return lu.solve(b.slice(k));
  });
}

// (I - W/2)^{-1} * B in the Fourier domain.
Tensor3d cayley_solve(const Tensor3d& w, const Tensor3d& b) {
  const Tensor3d lhs = identity_like(w.rows(), w.slices()) - 0.5 * w;
  return idft(spectral_solve(dft(lhs), dft(b)));
}

void require_same_base(const TangentVector& u, const TangentVector& v, const char* what) {
  if (!u.base().same_as(v.base()) && (u.base().value() - v.base().value()).norm() != 0.0)
    throw InvalidArgument(std::string(what) + ": tangent vectors live at different points");
}

// One slice of the block form of the exponential curve.
MatrixXcd exp_block_slice(const MatrixXcd& x, const MatrixXcd& v, double t) {
  const Index n = x.rows(), p = x.cols();
  const MatrixXcd c = v - x * (x.adjoint() * v);
  MatrixXcd q, r;
  const Eigen::VectorXd sigma = Eigen::JacobiSVD<MatrixXcd>(c).singularValues();
  const bool full_rank = n >= 2 * p && sigma.size() > 0 && sigma(sigma.size() - 1) >= 1e-10 * sigma(0) && sigma(0) > 0;
  if (full_rank) {
    Eigen::HouseholderQR<MatrixXcd> qr(c);
    q = qr.householderQ() * MatrixXcd::Identity(n, p);
  } else {
    // Orthonormal basis of the complement of span(x).
    Eigen::HouseholderQR<MatrixXcd> qr(x);
    q = (qr.householderQ() * MatrixXcd::Identity(n, n)).rightCols(n - p);
  }
  r = q.adjoint() * c;
  const Index m = p + q.cols();
  MatrixXcd a = MatrixXcd::Zero(m, m);
  const MatrixXcd xv = x.adjoint() * v;
  a.topLeftCorner(p, p) = 0.5 * (xv - xv.adjoint());
  a.bottomLeftCorner(q.cols(), p) = r;
  a.topRightCorner(p, q.cols()) = -r.adjoint();
  const MatrixXcd e = MatrixXcd(t * a).exp();
  return x * e.topLeftCorner(p, p) + q * e.bottomLeftCorner(q.cols(), p);
}

}  // namespace

StiefelPoint::StiefelPoint(Tensor3d x, double tol) {
  if (x.rows() < x.cols()) throw NotOnManifold("StiefelPoint: needs n >= p, got " + x.shape_string());
  const double defect = feasibility_defect(x);
  if (!(defect <= tol)) {
    std::ostringstream msg;
    msg << "StiefelPoint: feasibility defect " << std::scientific << defect;
    throw NotOnManifold(msg.str());
  }
  x_ = std::make_shared<const Tensor3d>(std::move(x));
}

double tangency_defect(const Tensor3d& x, const Tensor3d& v) {
  const Tensor3d xv = t_product(tt(x), v);
  return (xv + tt(xv)).norm();
}

TangentVector::TangentVector(StiefelPoint base, Tensor3d v) : base_(std::move(base)), v_(std::move(v)) {
  if (!v_.same_shape(base_.value()))
    throw DimensionMismatch("TangentVector: shape " + v_.shape_string() + " at point " + base_.value().shape_string());
  const double defect = tangency_defect(base_.value(), v_);
  if (!(defect <= kTangencyTolerance * (1.0 + v_.norm())))
    throw NotTangent("TangentVector: tangency defect " + std::to_string(defect));
}

TangentVector make_tangent_unchecked(StiefelPoint base, Tensor3d v) {
  return TangentVector(std::move(base), std::move(v), TangentVector::Trusted{});
}

TangentVector& TangentVector::operator+=(const TangentVector& o) {
  require_same_base(*this, o, "TangentVector +=");
  v_ += o.v_;
  return *this;
}

TangentVector& TangentVector::operator*=(double s) {
  v_ *= s;
  return *this;
}

double inner(const TangentVector& u, const TangentVector& v) {
  require_same_base(u, v, "inner");
  return inner(u.value(), v.value());
}

std::string to_string(Retraction r) {
  switch (r) {
    case Retraction::QR: return "qr";
    case Retraction::Polar: return "polar";
    case Retraction::Cayley: return "cayley";
    case Retraction::Exp: return "exp";
  }
  return "?";
}

std::string to_string(Transport t) {
  switch (t) {
    case Transport::Projection: return "projection";
    case Transport::QRDiff: return "qr-diff";
    case Transport::PolarDiff: return "polar-diff";
    case Transport::CayleyDiff: return "cayley-diff";
    case Transport::CayleyIsometric: return "cayley-isometric";
  }
  return "?";
}

Retraction parse_retraction(const std::string& s) {
  if (s == "qr" || s == "t-qr") return Retraction::QR;
  if (s == "polar" || s == "t-pd" || s == "pd") return Retraction::Polar;
  if (s == "cayley" || s == "t-cayley") return Retraction::Cayley;
  if (s == "exp" || s == "t-exp") return Retraction::Exp;
  throw InvalidArgument("unknown retraction '" + s + "'");
}

Transport parse_transport(const std::string& s) {
  for (Transport t : {Transport::Projection, Transport::QRDiff, Transport::PolarDiff, Transport::CayleyDiff,
                      Transport::CayleyIsometric})
    if (s == to_string(t)) return t;
  throw InvalidArgument("unknown transport '" + s + "'");
}

bool compatible(Retraction r, Transport t) {
  switch (t) {
    case Transport::Projection: return true;
    case Transport::QRDiff: return r == Retraction::QR;
    case Transport::PolarDiff: return r == Retraction::Polar;
    case Transport::CayleyDiff:
    case Transport::CayleyIsometric: return r == Retraction::Cayley;
  }
  return false;
}

Transport default_transport(Retraction r) {
  switch (r) {
    case Retraction::QR: return Transport::QRDiff;
    case Retraction::Polar: return Transport::PolarDiff;
    case Retraction::Cayley: return Transport::CayleyDiff;
    case Retraction::Exp: return Transport::Projection;
  }
  return Transport::Projection;
}

std::int64_t manifold_dim(std::int64_t n, std::int64_t p, std::int64_t l) {
  if (p < 1 || l < 1 || n < p)
    throw InvalidArgument("manifold_dim: needs n >= p >= 1 and l >= 1");
  if (l % 2 == 0) return p * (n * l - 1) - p * p * l / 2;
  return p * n * l - (p * p * l + p) / 2;
}

StiefelPoint random_point(Index n, Index p, Index l, std::uint64_t seed) {
  if (n < p || p < 1 || l < 1) throw InvalidArgument("random_point: needs n >= p >= 1 and l >= 1");
  Rng rng(seed);
  for (int attempt = 0;; ++attempt) {
    try {
      return StiefelPoint(t_qr(randn(n, p, l, rng)).Q);
    } catch (const RankDeficientSlice&) {
      if (attempt >= 10) throw;
    }
  }
}

TangentVector project_tangent(const StiefelPoint& x, const Tensor3d& u) {
  if (!u.same_shape(x.value())) throw DimensionMismatch("project_tangent: shape " + u.shape_string());
  const Tensor3d& xv = x.value();
  return make_tangent_unchecked(x, u - t_product(xv, sym_part(t_product(tt(xv), u))));
}

TangentVector riemannian_gradient(const StiefelPoint& x, const Tensor3d& egrad) { return project_tangent(x, egrad); }

TangentVector riemannian_hessian_apply(const StiefelPoint& x, const Tensor3d& egrad, const Tensor3d& ehess_v,
                                       const TangentVector& v) {
  if (!egrad.same_shape(x.value()) || !ehess_v.same_shape(x.value()))
    throw DimensionMismatch("riemannian_hessian_apply: shape mismatch");
  const Tensor3d correction = t_product(v.value(), sym_part(t_product(tt(x.value()), egrad)));
  return project_tangent(x, ehess_v - correction);
}

TangentVector riemannian_hessian_apply(const StiefelPoint& x, const Tensor3d& egrad, const EuclideanHessian& ehess,
                                       const TangentVector& v) {
  return riemannian_hessian_apply(x, egrad, ehess(v.value()), v);
}

Tensor3d cayley_generator(const Tensor3d& x, const Tensor3d& v) {
  const Tensor3d p = identity_like(x.rows(), x.slices()) - 0.5 * t_product(x, tt(x));
  const Tensor3d pvx = t_product(p, v, tt(x));
  return pvx - tt(pvx);
}

StiefelPoint retract_qr(const TangentVector& v) {
  return StiefelPoint(idft(spectral_qf(dft(v.base().value() + v.value()))));
}

StiefelPoint retract_polar(const TangentVector& v) {
  // Polar factor of X+V per slice as Q * polar(R) from a thin QR, which keeps
  // the result orthonormal to rounding even for long steps.
  const Tensor3d y = v.base().value() + v.value();
  const Index n = y.rows(), p = y.cols();
  const SpectralTensor3 y_hat = dft(y);
  return StiefelPoint(idft(spectral_from_half(n, p, y.slices(), [&](Index k) {
    const Eigen::HouseholderQR<MatrixXcd> qr(y_hat.slice(k));
    const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(n, p);
    const MatrixXcd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Eigen::JacobiSVD<MatrixXcd> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return MatrixXcd(q * (svd.matrixU() * svd.matrixV().adjoint()));
  })));
}

StiefelPoint retract_cayley(const TangentVector& v) {
  // The generator factors as W = A * B^T with A = [P*V, X], B = [X, -P*V], so
  // (I - W/2)^{-1} (I + W/2) X = X + A * (I - B^T*A/2)^{-1} * B^T*X.
  const Tensor3d& x = v.base().value();
  const Index n = x.rows(), p = x.cols();
  const SpectralTensor3 x_hat = dft(x), v_hat = dft(v.value());
  return StiefelPoint(idft(spectral_from_half(n, p, x.slices(), [&](Index k) {
    const auto xk = x_hat.slice(k);
    MatrixXcd a(n, 2 * p), b(n, 2 * p);
    a.leftCols(p) = v_hat.slice(k) - 0.5 * xk * (xk.adjoint() * v_hat.slice(k));
    a.rightCols(p) = xk;
    b.leftCols(p) = xk;
    b.rightCols(p) = -a.leftCols(p);
    const MatrixXcd small = MatrixXcd::Identity(2 * p, 2 * p) - 0.5 * b.adjoint() * a;
    return MatrixXcd(xk + a * small.partialPivLu().solve(b.adjoint() * xk));
  })));
}

StiefelPoint retract_exp(const TangentVector& v, double t, ExpForm form) {
  const Tensor3d& x = v.base().value();
  const Index n = x.rows(), p = x.cols();
  if (form == ExpForm::Auto) form = n <= 2 * p ? ExpForm::Closed : ExpForm::Block;
  if (form == ExpForm::Closed) {
    const Tensor3d& vv = v.value();
    const Tensor3d omega = t_product(vv, tt(x)) + t_product(x, tt(vv), t_product(x, tt(x)) - identity_like(n, x.slices()));
    // Omega is skew for exactly tangent V; dropping the rounding residue keeps exp(t Omega) orthogonal.
    return StiefelPoint(t_product(t_exp(t * skew_part(omega)), x));
  }
  const SpectralTensor3 xh = dft(x), vh = dft(v.value());
  SpectralTensor3 y = spectral_from_half(n, p, x.slices(), [&](Index k) -> MatrixXcd {
    MatrixXcd s = exp_block_slice(xh.slice(k), vh.slice(k), t);
    if (self_conjugate(k, x.slices())) s.imag().setZero();
    return s;
  });
  return StiefelPoint(idft(y));
}

StiefelPoint retract(Retraction r, const TangentVector& v) {
  switch (r) {
    case Retraction::QR: return retract_qr(v);
    case Retraction::Polar: return retract_polar(v);
    case Retraction::Cayley: return retract_cayley(v);
    case Retraction::Exp: return retract_exp(v);
  }
  throw InvalidArgument("retract: unknown retraction");
}

TangentVector transport_projection(const TangentVector& u, const TangentVector& v, Retraction r,
                                   const StiefelPoint* target) {
  require_same_base(u, v, "transport");
  const StiefelPoint y = target ? *target : retract(r, u);
  const Tensor3d& yv = y.value();
  return TangentVector(y, v.value() - t_product(yv, sym_part(t_product(tt(yv), v.value()))));
}

TangentVector transport_qr_diff(const TangentVector& u, const TangentVector& v, const StiefelPoint* target) {
  require_same_base(u, v, "transport");
  const StiefelPoint y = target ? *target : retract_qr(u);
  const SpectralTensor3 qh = dft(y.value()), mh = dft(u.base().value() + u.value()), vh = dft(v.value());
  const SpectralTensor3 out = spectral_from_half(qh.rows(), qh.cols(), qh.slices(), [&](Index k) -> MatrixXcd {
    const MatrixXcd q = qh.slice(k);
    const MatrixXcd r = q.adjoint() * mh.slice(k);
    Eigen::PartialPivLU<MatrixXcd> lu(r);
    if (!(lu.rcond() >= 1e-12)) throw SingularSlice("transport_qr_diff: singular R factor", k);
    // C = V R^{-1}, B = Q^H C.
    const MatrixXcd c = r.transpose().partialPivLu().solve(vh.slice(k).transpose()).transpose();
    const MatrixXcd b = q.adjoint() * c;
    MatrixXcd skew, upper;
    skew_upper_split(b, skew, upper);
    MatrixXcd res = q * skew + c - q * b;
    if (self_conjugate(k, qh.slices())) res.imag().setZero();
    return res;
  });
  return TangentVector(y, idft(out));
}

TangentVector transport_polar_diff(const TangentVector& u, const TangentVector& v, const StiefelPoint* target) {
  require_same_base(u, v, "transport");
  const StiefelPoint y = target ? *target : retract_polar(u);
  const Tensor3d& x = u.base().value();
  const Tensor3d& yv = y.value();
  const Index p = x.cols(), l = x.slices();
  const Tensor3d pm = spd_sqrt(identity_like(p, l) + t_product(tt(u.value()), u.value()));
  const Tensor3d ytv = t_product(tt(yv), v.value());
  const Tensor3d s = t_sylvester_spectral(pm, pm, ytv - tt(ytv));
  const Tensor3d m_inv = t_inverse(t_product(tt(yv), x + u.value()));
  const Tensor3d normal = v.value() - t_product(yv, ytv);
  return TangentVector(y, t_product(yv, s) + t_product(normal, m_inv));
}

TangentVector transport_cayley_diff(const TangentVector& u, const TangentVector& v, const StiefelPoint* target) {
  require_same_base(u, v, "transport");
  const StiefelPoint y = target ? *target : retract_cayley(u);
  const Tensor3d& x = u.base().value();
  const Tensor3d wu = cayley_generator(x, u.value());
  const Tensor3d wv = cayley_generator(x, v.value());
  const Tensor3d inner_solve = cayley_solve(wu, x);
  return TangentVector(y, cayley_solve(wu, t_product(wv, inner_solve)));
}

TangentVector transport_cayley_isometric(const TangentVector& u, const TangentVector& v,
                                         const StiefelPoint* target) {
  require_same_base(u, v, "transport");
  const StiefelPoint y = target ? *target : retract_cayley(u);
  const Tensor3d wu = cayley_generator(u.base().value(), u.value());
  return TangentVector(y, cayley_solve(wu, v.value() + 0.5 * t_product(wu, v.value())));
}

TangentVector transport(Transport t, Retraction r, const TangentVector& u, const TangentVector& v,
                        const StiefelPoint* target) {
  if (!compatible(r, t))
    throw InvalidArgument("transport " + to_string(t) + " does not match retraction " + to_string(r));
  switch (t) {
    case Transport::Projection: return transport_projection(u, v, r, target);
    case Transport::QRDiff: return transport_qr_diff(u, v, target);
    case Transport::PolarDiff: return transport_polar_diff(u, v, target);
    case Transport::CayleyDiff: return transport_cayley_diff(u, v, target);
    case Transport::CayleyIsometric: return transport_cayley_isometric(u, v, target);
  }
  throw InvalidArgument("transport: unknown transport");
}

Tensor3d tangent_curve_product_rule(const Tensor3d& a, const Tensor3d& a_dot, const Tensor3d& b,
                                    const Tensor3d& b_dot) {
  return t_product(a_dot, b) + t_product(a, b_dot);
}

}  // namespace tstiefel
