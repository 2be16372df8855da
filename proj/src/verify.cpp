#include "tstiefel/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <iomanip>
#include <limits>
#include <sstream>
#include <tuple>

#include <unsupported/Eigen/MatrixFunctions>

#include "tstiefel/manifold.hpp"
#include "tstiefel/problems.hpp"
#include "tstiefel/random.hpp"

namespace tstiefel {

namespace {

Tensor3d tt(const Tensor3d& a) { return t_transpose(a); }

double rel(const Tensor3d& a, const Tensor3d& b) {
  return (a - b).norm() / std::max(b.norm(), std::numeric_limits<double>::min());
}

/// Largest value seen, with the case that produced it.
struct Worst {
  double value = -1;
  std::string where;
  void update(double v, const std::string& w) {
    if (!(v <= value)) {
      value = v;
      where = w;
    }
  }
};

std::string shape(Index n, Index p, Index l) {
  return std::to_string(n) + "x" + std::to_string(p) + "x" + std::to_string(l);
}

class Recorder {
 public:
  explicit Recorder(std::string suite) : suite_(std::move(suite)) {}
  void add(const std::string& name, double value, double tol, const std::string& detail = {}) {
    checks_.push_back({suite_, name, value, tol, value <= tol, detail});
  }
  void add(const std::string& name, const Worst& w, double tol) { add(name, w.value, tol, "worst at " + w.where); }
  std::vector<Check> take() { return std::move(checks_); }

 private:
  std::string suite_;
  std::vector<Check> checks_;
};

Index uniform(Rng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

TangentVector random_tangent(const StiefelPoint& x, Rng& rng, double scale = 1.0) {
  Tensor3d v = project_tangent(x, randn(x.n(), x.p(), x.l(), rng)).value();
  v *= scale / v.norm();
  return TangentVector(x, v);
}

/// Tensor whose bcirc is the given nl x nl block-circulant matrix.
Tensor3d from_bcirc(const Eigen::MatrixXd& m, Index n, Index l) {
  return fold(m * unfold(Tensor3d::Identity(n, l)), n, n, l);
}

/// [[a, b], [0, c]] slice by slice.
Tensor3d block_upper(const Tensor3d& a, const Tensor3d& b, const Tensor3d& c) {
  const Index n = a.rows(), l = a.slices();
  Tensor3d m(2 * n, 2 * n, l);
  for (Index k = 0; k < l; ++k) {
    m.slice(k).topLeftCorner(n, n) = a.slice(k);
    m.slice(k).topRightCorner(n, n) = b.slice(k);
    m.slice(k).bottomRightCorner(n, n) = c.slice(k);
  }
  return m;
}

Tensor3d top_right(const Tensor3d& m) {
  const Index n = m.rows() / 2, l = m.slices();
  Tensor3d out(n, n, l);
  for (Index k = 0; k < l; ++k) out.slice(k) = m.slice(k).topRightCorner(n, n);
  return out;
}

Tensor3d series_exp(const Tensor3d& a, int terms) {
  Tensor3d sum = Tensor3d::Identity(a.rows(), a.slices()), term = sum;
  for (int k = 1; k < terms; ++k) {
    term = t_product(term, a) / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

// ---------------------------------------------------------------- suites

std::vector<Check> algebra(const VerifyOptions& opt) {
  Recorder out("algebra");
  Rng rng(opt.seed);
  Worst prod, tr;
  for (int i = 0; i < 200; ++i) {
    const Index n = uniform(rng, 1, 4), p = uniform(rng, 1, 4), q = uniform(rng, 1, 4), l = uniform(rng, 1, 5);
    const Tensor3d a = randn(n, p, l, rng), b = randn(p, q, l, rng), c = randn(n, p, l, rng);
    const Tensor3d oracle = fold(bcirc(a) * unfold(b), n, q, l);
    prod.update(rel(t_product(a, b), oracle), shape(n, p, l) + " * " + shape(p, q, l));
    const double lhs = trace(t_product(tt(a), c)), rhs = static_cast<double>(l) * inner(a, c);
    tr.update(std::abs(lhs - rhs) / (static_cast<double>(l) * a.norm() * c.norm()), shape(n, p, l));
  }
  out.add("t-product equals bcirc oracle (200 instances)", prod, 1e-10);
  out.add("trace(A^T*B) = l<A,B> (200 instances)", tr, 1e-10);
  return out.take();
}

std::vector<Check> decompositions(const VerifyOptions& opt) {
  Recorder out("decompositions");
  Rng rng(opt.seed + 1);
  const QrOptions qopt{opt.qr_phase_fix};
  Worst svd, qr, pd, diag, repeat, unique, procrustes;
  for (int i = 0; i < 30; ++i) {
    {
      const Index n = uniform(rng, 1, 5), p = uniform(rng, 1, 5), l = uniform(rng, 1, 4);
      const Tensor3d a = randn(n, p, l, rng);
      const TSvd s = t_svd(a);
      svd.update(rel(t_product(s.U, s.S, tt(s.V)), a), shape(n, p, l));
    }
    const Index n = uniform(rng, 1, 5), p = uniform(rng, 1, n), l = uniform(rng, 1, 4);
    const Tensor3d a = randn(n, p, l, rng);
    const TQr f = t_qr(a, qopt), g = t_qr(a, qopt);
    qr.update(rel(t_product(f.Q, f.R), a), shape(n, p, l));
    repeat.update(std::max((f.Q - g.Q).norm(), (f.R - g.R).norm()), shape(n, p, l));
    const SpectralTensor3 r_hat = dft(f.R);
    double scale = 0, defect = 0;
    for (Index k = 0; k < l; ++k) scale = std::max(scale, r_hat.slice(k).diagonal().cwiseAbs().maxCoeff());
    for (Index k = 0; k < l; ++k)
      for (Index j = 0; j < p; ++j) {
        const cdouble d = r_hat(j, j, k);
        defect = std::max(defect, std::abs(d - std::abs(d)) / scale);
      }
    diag.update(defect, shape(n, p, l));
    // The positive-diagonal factor is the upper Cholesky factor of A^T*A, slice by slice.
    const SpectralTensor3 a_hat = dft(a);
    SpectralTensor3 chol(p, p, l);
    for (Index k = 0; k < l; ++k) {
      const Eigen::MatrixXcd gram = a_hat.slice(k).adjoint() * a_hat.slice(k);
      chol.slice(k) = gram.llt().matrixU();
    }
    unique.update(rel(f.R, idft(chol)), shape(n, p, l));
    const TPolar h = t_polar(a);
    pd.update(rel(t_product(h.P, h.H), a), shape(n, p, l));
  }
  for (int i = 0; i < 20; ++i) {
    const Index n = uniform(rng, 2, 5), p = uniform(rng, 1, n), l = uniform(rng, 1, 4);
    const Tensor3d a = randn(n, p, l, rng);
    const double best = inner(a, t_polar(a).P);
    double gain = 0;
    for (int j = 0; j < 100; ++j)
      gain = std::max(gain, inner(a, random_point(n, p, l, derive_seed(opt.seed, 1000 * i + j)).value()) - best);
    procrustes.update(gain / a.norm(), shape(n, p, l));
  }
  out.add("t-SVD reconstruction", svd, 1e-9);
  out.add("t-QR reconstruction", qr, 1e-9);
  out.add("t-QR spectral R diagonals real positive", diag, 1e-12);
  out.add("t-QR repeat-run agreement", repeat, 1e-12);
  out.add("t-QR R equals the unique Cholesky-factor oracle", unique, 1e-9);
  out.add("t-PD reconstruction", pd, 1e-9);
  out.add("t_polar beats 100 feasible points (20 instances)", procrustes, 1e-12);
  return out.take();
}

std::vector<Check> exponential(const VerifyOptions& opt) {
  Recorder out("exponential");
  Rng rng(opt.seed + 2);
  Worst definition, frechet, derivative, conj_square, conj_partial, block, transpose, commuting, series;
  for (Index l : {2, 3})
    for (int i = 0; i < 10; ++i) {
      const std::string where = "3x3x" + std::to_string(l) + " #" + std::to_string(i);
      const Tensor3d a = 0.7 * randn(3, 3, l, rng), e = randn(3, 3, l, rng);
      const Tensor3d ea = t_exp(a);
      definition.update(rel(ea, from_bcirc(bcirc(a).exp(), 3, l)), where);

      // Frechet derivative two ways: block-triangular exponential and complex step.
      const Tensor3d l_block = top_right(t_exp(block_upper(a, e, a)));
      constexpr double h = 1e-20;
      const Eigen::MatrixXcd shifted = bcirc(a).cast<cdouble>() + cdouble(0, h) * bcirc(e).cast<cdouble>();
      const Eigen::MatrixXd l_step = Eigen::MatrixXcd(shifted.exp()).imag() / h;
      frechet.update(rel(l_block, from_bcirc(l_step, 3, l)), where);

      const double t = 0.7;
      const Tensor3d d_exp = top_right(t_exp(block_upper(t * a, a, t * a)));
      const Tensor3d eta = t_exp(t * a);
      derivative.update(std::max(rel(d_exp, t_product(eta, a)), rel(d_exp, t_product(a, eta))), where);

      const Tensor3d q = random_point(3, 3, l, derive_seed(opt.seed, i)).value();
      conj_square.update(rel(t_exp(t_product(q, a, tt(q))), t_product(q, ea, tt(q))), where);
      const Tensor3d x = random_point(5, 3, l, derive_seed(opt.seed, 100 + i)).value();
      const Tensor3d proj = t_product(x, tt(x));
      conj_partial.update(rel(t_exp(t_product(x, a, tt(x))),
                              Tensor3d::Identity(5, l) - proj + t_product(x, ea, tt(x))),
                          where);

      const Tensor3d d1 = randn(2, 2, l, rng), d2 = randn(1, 1, l, rng);
      Tensor3d blk(3, 3, l);
      for (Index k = 0; k < l; ++k) {
        blk.slice(k).topLeftCorner(2, 2) = d1.slice(k);
        blk.slice(k).bottomRightCorner(1, 1) = d2.slice(k);
      }
      const Tensor3d eb = t_exp(blk), e1 = t_exp(d1), e2 = t_exp(d2);
      Tensor3d expect(3, 3, l);
      for (Index k = 0; k < l; ++k) {
        expect.slice(k).topLeftCorner(2, 2) = e1.slice(k);
        expect.slice(k).bottomRightCorner(1, 1) = e2.slice(k);
      }
      block.update(rel(eb, expect), where);

      transpose.update(rel(tt(ea), t_exp(tt(a))), where);
      const Tensor3d b = 0.3 * t_product(a, a) - 2.0 * a + Tensor3d::Identity(3, l);
      commuting.update(rel(t_product(ea, t_exp(b)), t_exp(a + b)), where);

      Tensor3d small = randn(3, 3, l, rng);
      small *= (i % 2 == 0 ? 2.0 : 0.5 + 0.15 * i) / small.norm();
      series.update(rel(t_exp(small), series_exp(small, 40)), where);
    }
  out.add("definition: equals exp(bcirc(A))", definition, 1e-9);
  out.add("smoothness: Frechet derivative, block form = complex step", frechet, 1e-9);
  out.add("d/dt exp(tA) = exp(tA)*A = A*exp(tA)", derivative, 1e-9);
  out.add("exp(X*A*X^T) = X*exp(A)*X^T for square orthogonal X", conj_square, 1e-9);
  out.add("exp(X*A*X^T) = I - X*X^T + X*exp(A)*X^T for X in St(5,3,l)", conj_partial, 1e-9);
  out.add("exp(Diag(D1, D2)) = Diag(exp(D1), exp(D2))", block, 1e-9);
  out.add("exp(A)^T = exp(A^T)", transpose, 1e-9);
  out.add("exp(A)*exp(B) = exp(A+B) for commuting A, B", commuting, 1e-9);
  out.add("40-term series agrees for ||A|| <= 2", series, 1e-9);
  return out.take();
}

std::vector<Check> sylvester(const VerifyOptions& opt) {
  Recorder out("sylvester");
  Rng rng(opt.seed + 3);
  Worst agree, residual;
  int singular = 0;
  for (auto [m, n] : {std::pair<Index, Index>{2, 2}, {3, 2}})
    for (int i = 0; i < 50; ++i) {
      const std::string where = shape(m, n, 2) + " #" + std::to_string(i);
      const Tensor3d a = randn(m, m, 2, rng), b = randn(n, n, 2, rng), x = randn(m, n, 2, rng);
      const Tensor3d c = t_product(a, x) + t_product(x, b);
      try {
        const Tensor3d xs = t_sylvester_spectral(a, b, c), xv = t_sylvester_vec(a, b, c);
        agree.update((xs - xv).norm() / std::max(1.0, xv.norm()), where);
        for (const Tensor3d* s : {&xs, &xv})
          residual.update((t_product(a, *s) + t_product(*s, b) - c).norm() / c.norm(), where);
      } catch (const Error& e) {
        ++singular;
        agree.update(std::numeric_limits<double>::infinity(), where + ": " + e.what());
      }
    }
  out.add("spectral and vec solvers agree (100 systems)", agree, 1e-8);
  out.add("residual relative to ||C||", residual, 1e-8);
  out.add("systems rejected as singular", singular, 0);
  return out.take();
}

const Retraction kRetractions[] = {Retraction::QR, Retraction::Polar, Retraction::Cayley, Retraction::Exp};

std::vector<Check> retractions(const VerifyOptions& opt) {
  Recorder out("retractions");
  Rng rng(opt.seed + 4);
  for (Retraction r : kRetractions) {
    Worst zero, differential;
    for (auto [n, p, l] : {std::tuple<Index, Index, Index>{6, 3, 2}, {7, 3, 4}, {4, 4, 3}}) {
      const StiefelPoint x = random_point(n, p, l, derive_seed(opt.seed, n * 100 + p * 10 + l));
      zero.update((retract(r, TangentVector(x, Tensor3d(n, p, l))).value() - x.value()).norm(), shape(n, p, l));
      const TangentVector v = random_tangent(x, rng);
      constexpr double h = 1e-5;
      const Tensor3d fd =
          (retract(r, TangentVector(x, h * v.value())).value() - retract(r, TangentVector(x, -h * v.value())).value()) /
          (2 * h);
      differential.update(rel(fd, v.value()), shape(n, p, l));
    }
    StiefelPoint x = random_point(6, 3, 2, derive_seed(opt.seed, 7));
    for (int i = 0; i < 1000; ++i) x = retract(r, random_tangent(x, rng, 0.1));
    const std::string name = to_string(r);
    out.add(name + ": R_X(0) = X", zero, 1e-12);
    out.add(name + ": central-difference differential at 0 equals V", differential, 1e-6);
    out.add(name + ": feasibility after 1000 composed retractions", feasibility_defect(x.value()), 1e-10);
  }
  return out.take();
}

std::vector<Check> transports(const VerifyOptions& opt) {
  Recorder out("transports");
  Rng rng(opt.seed + 5);
  const std::pair<Transport, Retraction> cases[] = {
      {Transport::Projection, Retraction::QR},     {Transport::Projection, Retraction::Polar},
      {Transport::Projection, Retraction::Cayley}, {Transport::Projection, Retraction::Exp},
      {Transport::QRDiff, Retraction::QR},         {Transport::PolarDiff, Retraction::Polar},
      {Transport::CayleyDiff, Retraction::Cayley}, {Transport::CayleyIsometric, Retraction::Cayley}};
  for (auto [t, r] : cases) {
    Worst tangent, identity, linear, fd, isometry;
    for (auto [n, p, l] : {std::tuple<Index, Index, Index>{6, 3, 2}, {7, 2, 3}}) {
      const std::string where = shape(n, p, l);
      const StiefelPoint x = random_point(n, p, l, derive_seed(opt.seed, 50 + n));
      const TangentVector u = random_tangent(x, rng, 0.8), v1 = random_tangent(x, rng), v2 = random_tangent(x, rng);
      const TangentVector zero(x, Tensor3d(n, p, l));
      identity.update(rel(transport(t, r, zero, v1).value(), v1.value()), where);
      const TangentVector combo = transport(t, r, u, 2.0 * v1 - 3.0 * v2);
      const TangentVector parts = 2.0 * transport(t, r, u, v1) - 3.0 * transport(t, r, u, v2);
      linear.update(rel(combo.value(), parts.value()), where);
      tangent.update(tangency_defect(combo.base().value(), combo.value()), where);
      if (t == Transport::QRDiff || t == Transport::PolarDiff || t == Transport::CayleyDiff) {
        constexpr double h = 1e-5;
        const Tensor3d diff = (retract(r, u + h * v1).value() - retract(r, u - h * v1).value()) / (2 * h);
        fd.update((transport(t, r, u, v1).value() - diff).norm(), where);
      }
      if (t == Transport::CayleyIsometric)
        for (int i = 0; i < 5; ++i) {
          const TangentVector big = random_tangent(x, rng, 1.0 + i);
          isometry.update(std::abs(transport(t, r, big, v1).norm() / v1.norm() - 1.0), where);
        }
    }
    const std::string name = to_string(t) + "/" + to_string(r);
    out.add(name + ": output is tangent", tangent, 1e-8);
    out.add(name + ": identity at zero step", identity, 1e-10);
    out.add(name + ": linear in the transported vector", linear, 1e-10);
    if (t == Transport::QRDiff || t == Transport::PolarDiff || t == Transport::CayleyDiff)
      out.add(name + ": matches central difference of the retraction", fd, 1e-6);
    if (t == Transport::CayleyIsometric) out.add(name + ": preserves norms", isometry, 1e-10);
  }
  return out.take();
}

std::vector<Check> geodesic(const VerifyOptions& opt) {
  Recorder out("geodesic");
  Rng rng(opt.seed + 6);
  Worst acc;
  constexpr double h = 1e-3;
  for (auto [n, p, l] : {std::tuple<Index, Index, Index>{7, 3, 2}, {6, 2, 3}}) {
    const StiefelPoint x = random_point(n, p, l, derive_seed(opt.seed, 60 + n));
    const TangentVector v = random_tangent(x, rng);
    for (double t : {0.0, 0.3, 0.7}) {
      const Tensor3d c0 = retract_exp(v, t).value();
      const Tensor3d second = (retract_exp(v, t + h).value() - 2.0 * c0 + retract_exp(v, t - h).value()) / (h * h);
      acc.update(project_tangent(StiefelPoint(c0), second).norm(), shape(n, p, l) + " t=" + std::to_string(t));
    }
  }
  out.add("exp-retraction curve has no tangential acceleration", acc, 1e-5);
  return out.take();
}

std::vector<Check> gradients(const VerifyOptions& opt) {
  Recorder out("gradients");
  Rng rng(opt.seed + 7);
  Worst best, missing_u, missing_s, joint, sparse, hessian;
  for (auto [n, p, l] : {std::tuple<Index, Index, Index>{6, 3, 2}, {8, 3, 4}}) {
    const std::string where = shape(n, p, l);
    const std::uint64_t s = derive_seed(opt.seed, n);
    const Tensor3d u = random_point(n, p, l, derive_seed(s, 1)).value();
    const auto fd_rel = [&](const Objective& f) {
      return rel(f.euclidean_gradient(u), fd_gradient_oracle([&](const Tensor3d& y) { return f.value(y); }, u));
    };
    best.update(fd_rel(BestApproxObjective(make_best_approx(n, p, l, s))), where);

    const MissingEntriesInstance me = make_missing_entries(n, p, l, p, 0.3, s);
    const Tensor3d s0 = sym_part(randn(p, p, l, rng));
    const MissingEntriesObjective mf(me, s0);
    missing_u.update(fd_rel(mf), where);
    missing_s.update(rel(mf.gradient_s(u, s0),
                         fd_gradient_oracle([&](const Tensor3d& y) { return mf.value(u, y); }, s0)),
                     where);

    joint.update(fd_rel(JointFDiagObjective(make_joint_fdiag(n, p, l, p, 3, 0.1, s))), where);
    sparse.update(fd_rel(SparsePcaObjective(make_sparse_pca(n, p, l, p, 0.1, s))), where);

    // f(X) = <A, X>: Hess[V] is the tangential derivative of the gradient field.
    const StiefelPoint x(u);
    const Tensor3d a = randn(n, p, l, rng);
    const TangentVector v = random_tangent(x, rng);
    constexpr double h = 1e-5;
    const StiefelPoint yp = retract_qr(TangentVector(x, h * v.value()));
    const StiefelPoint ym = retract_qr(TangentVector(x, -h * v.value()));
    const Tensor3d dg = (riemannian_gradient(yp, a).value() - riemannian_gradient(ym, a).value()) / (2 * h);
    hessian.update(rel(riemannian_hessian_apply(x, a, Tensor3d(n, p, l), v).value(), project_tangent(x, dg).value()),
                   where);
  }
  out.add("best approximation gradient", best, 1e-5);
  out.add("missing entries gradient in U", missing_u, 1e-5);
  out.add("missing entries gradient in S", missing_s, 1e-5);
  out.add("joint f-diagonalization gradient", joint, 1e-5);
  out.add("sparse PCA subgradient away from zero entries", sparse, 1e-5);
  out.add("Hessian of the linear objective", hessian, 1e-5);
  return out.take();
}

// Kernel dimension of V -> X^T*V + V^T*X at X.
Index numerical_corank(const Tensor3d& x) {
  const Index n = x.rows(), p = x.cols(), l = x.slices();
  Eigen::MatrixXd jac(p * p * l, n * p * l);
  for (Index q = 0; q < n * p * l; ++q) {
    Tensor3d e(n, p, l);
    e.vec()[q] = 1.0;
    const Tensor3d xe = t_product(tt(x), e);
    jac.col(q) = (xe + tt(xe)).vec();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  svd.setThreshold(1e-10);
  return n * p * l - svd.rank();
}

std::vector<Check> dimension(const VerifyOptions& opt) {
  Recorder out("dimension");
  Rng rng(opt.seed + 8);
  Worst corank;
  for (int i = 0; i < 20;) {
    const Index n = uniform(rng, 1, 10), p = uniform(rng, 1, n), l = uniform(rng, 1, 8);
    if (n * p * l > 400) continue;
    const StiefelPoint x = random_point(n, p, l, derive_seed(opt.seed, 200 + i));
    corank.update(std::abs(static_cast<double>(numerical_corank(x.value()) - manifold_dim(n, p, l))), shape(n, p, l));
    ++i;
  }
  Worst matrix_case;
  for (Index n = 1; n <= 12; ++n)
    for (Index p = 1; p <= n; ++p)
      matrix_case.update(std::abs(static_cast<double>(manifold_dim(n, p, 1) - (n * p - p * (p + 1) / 2))),
                         shape(n, p, 1));
  out.add("manifold_dim equals constraint corank (20 shapes, npl <= 400)", corank, 0);
  out.add("manifold_dim(n, p, 1) = np - p(p+1)/2", matrix_case, 0);
  return out.take();
}

using SuiteFn = std::vector<Check> (*)(const VerifyOptions&);

const std::map<std::string, SuiteFn>& registry() {
  static const std::map<std::string, SuiteFn> suites = {
      {"algebra", algebra},         {"decompositions", decompositions}, {"exponential", exponential},
      {"sylvester", sylvester},     {"retractions", retractions},       {"transports", transports},
      {"geodesic", geodesic},       {"gradients", gradients},           {"dimension", dimension}};
  return suites;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"algebra",     "decompositions", "exponential",
                                                 "sylvester",   "retractions",    "transports",
                                                 "geodesic",    "gradients",      "dimension"};
  return names;
}

std::vector<Check> run_suite(const std::string& suite, const VerifyOptions& options) {
  const auto it = registry().find(suite);
  if (it == registry().end()) throw InvalidArgument("run_suite: unknown suite '" + suite + "'");
  return it->second(options);
}

std::string format_check(const Check& c) {
  std::ostringstream os;
  os << (c.passed ? "PASS" : "FAIL") << "  " << c.suite << "/" << c.name << "  " << std::scientific
     << std::setprecision(2) << c.value << " <= " << c.tolerance;
  if (!c.detail.empty()) os << "  (" << c.detail << ")";
  return os.str();
}

}  // namespace tstiefel
