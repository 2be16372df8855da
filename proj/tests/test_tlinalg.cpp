#include <gtest/gtest.h>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "tstiefel/random.hpp"
#include "tstiefel/tlinalg.hpp"

using namespace tstiefel;

namespace {

double rel(const Tensor3d& a, const Tensor3d& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

Tensor3d tt(const Tensor3d& a) { return t_transpose(a); }

Tensor3d random_feasible(Index n, Index p, Index l, Rng& rng) { return t_qr(randn(n, p, l, rng)).Q; }

Tensor3d series_exp(const Tensor3d& a, int terms = 40) {
  Tensor3d sum = Tensor3d::Identity(a.rows(), a.slices()), term = sum;
  for (int k = 1; k < terms; ++k) {
    term = t_product(term, a) / double(k);
    sum += term;
  }
  return sum;
}

}  // namespace

TEST(Svd, MatrixCase) {
  Rng rng(1);
  const Tensor3d a = randn(4, 3, 1, rng);
  const TSvd d = t_svd(a);
  const Eigen::VectorXd ref = Eigen::JacobiSVD<Eigen::MatrixXd>(a.slice(0)).singularValues();
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(d.S(i, i, 0), ref(i), 1e-12);
}

TEST(Svd, ReconstructionAndOrthogonality) {
  Rng rng(2);
  for (bool compact : {false, true})
    for (auto [n, p, l] : {std::tuple{4, 3, 2}, {3, 5, 3}, {5, 2, 4}}) {
      const Tensor3d a = randn(n, p, l, rng);
      const TSvd d = t_svd(a, compact);
      EXPECT_LT(rel(t_product(d.U, d.S, tt(d.V)), a), 1e-10);
      EXPECT_LT(rel(t_product(tt(d.V), d.V), Tensor3d::Identity(d.V.cols(), l)), 1e-10);
      EXPECT_LT(rel(t_product(tt(d.U), d.U), Tensor3d::Identity(d.U.cols(), l)), 1e-10);
      const SpectralTensor3 s = dft(d.S);
      for (Index k = 0; k < l; ++k) {
        const Eigen::MatrixXcd sk = s.slice(k);
        EXPECT_LT((sk - Eigen::MatrixXcd(sk.diagonal().asDiagonal())).norm(), 1e-10);
        for (Index i = 0; i < sk.diagonal().size(); ++i) {
          EXPECT_GE(sk(i, i).real(), -1e-12);
          EXPECT_LT(std::abs(sk(i, i).imag()), 1e-12);
          if (i > 0) EXPECT_GE(sk(i - 1, i - 1).real(), sk(i, i).real() - 1e-12);
        }
      }
    }
}

TEST(Svd, Identity) {
  const TSvd d = t_svd(Tensor3d::Identity(3, 4));
  EXPECT_LT(rel(d.S, Tensor3d::Identity(3, 4)), 1e-14);
}

TEST(Qr, MatrixCaseHasPositiveDiagonal) {
  Rng rng(3);
  const Tensor3d a = randn(4, 3, 1, rng);
  const TQr d = t_qr(a);
  EXPECT_LT(rel(t_product(d.Q, d.R), a), 1e-12);
  for (Index i = 0; i < 3; ++i) EXPECT_GT(d.R(i, i, 0), 0);
  EXPECT_TRUE(d.R.slice(0).isUpperTriangular(1e-14));
}

TEST(Qr, SpectralPositiveDiagonalAndFeasible) {
  Rng rng(4);
  const Tensor3d a = randn(5, 3, 4, rng);
  const TQr d = t_qr(a);
  EXPECT_LT(rel(t_product(d.Q, d.R), a), 1e-10);
  EXPECT_LT(feasibility_defect(d.Q), 1e-12);
  const SpectralTensor3 r = dft(d.R);
  for (Index k = 0; k < 4; ++k) {
    const Eigen::MatrixXcd rk = r.slice(k);
    EXPECT_LT(rk.triangularView<Eigen::StrictlyLower>().toDenseMatrix().norm(), 1e-12);
    for (Index i = 0; i < 3; ++i) {
      EXPECT_GT(rk(i, i).real(), 0);
      EXPECT_LT(std::abs(rk(i, i).imag()), 1e-12);
    }
  }
  const TQr again = t_qr(a);
  EXPECT_LT((again.Q - d.Q).norm(), 1e-12);
  EXPECT_LT((again.R - d.R).norm(), 1e-12);
}

TEST(Qr, FeasibleInputIsFixedPoint) {
  Rng rng(5);
  const Tensor3d x = random_feasible(5, 3, 3, rng);
  const TQr d = t_qr(x);
  EXPECT_LT((d.Q - x).norm(), 1e-10);
  EXPECT_LT((d.R - Tensor3d::Identity(3, 3)).norm(), 1e-10);
}

TEST(Qr, WithoutPhaseFixTheGaugeIsNotUnique) {
  Rng rng(6);
  const Tensor3d x = random_feasible(5, 3, 3, rng);
  const TQr d = t_qr(x, QrOptions{false});
  EXPECT_LT(rel(t_product(d.Q, d.R), x), 1e-10);
  EXPECT_GT((d.R - Tensor3d::Identity(3, 3)).norm(), 1e-3);
}

TEST(Qr, PerturbationIsSmall) {
  Rng rng(7);
  const Tensor3d a = randn(5, 3, 2, rng);
  const Tensor3d e = randn(5, 3, 2, rng);
  const TQr d0 = t_qr(a), d1 = t_qr(a + 1e-9 * e);
  EXPECT_LT((d1.Q - d0.Q).norm(), 1e-6);
  EXPECT_LT((d1.R - d0.R).norm(), 1e-6);
}

TEST(Qr, Guards) {
  Tensor3d a(4, 2, 2);
  a.slice(0).col(0).setOnes();
  a.slice(0).col(1).setOnes();
  EXPECT_THROW(t_qr(a), RankDeficientSlice);
  EXPECT_THROW(t_qr(Tensor3d(2, 3, 1)), InvalidArgument);
}

TEST(SpdRoot, Basics) {
  EXPECT_LT(rel(spd_sqrt(Tensor3d::Identity(3, 4)), Tensor3d::Identity(3, 4)), 1e-14);
  Tensor3d d(2, 2, 1);
  d.slice(0) << 4, 0, 0, 9;
  const Tensor3d r = spd_sqrt(d);
  EXPECT_NEAR(r(0, 0, 0), 2, 1e-14);
  EXPECT_NEAR(r(1, 1, 0), 3, 1e-14);
  EXPECT_NEAR(r(0, 1, 0), 0, 1e-14);
}

TEST(SpdRoot, InverseSquareRootOfIdentityPlusGram) {
  Rng rng(8);
  const Tensor3d v = randn(5, 3, 4, rng);
  const Tensor3d g = Tensor3d::Identity(3, 4) + t_product(tt(v), v);
  const Tensor3d s = spd_inv_sqrt(g);
  EXPECT_LT(rel(t_product(s, s, g), Tensor3d::Identity(3, 4)), 1e-10);
  EXPECT_LT(rel(s, tt(s)), 1e-12);
  const Tensor3d q = spd_sqrt(g);
  EXPECT_LT(rel(t_product(q, q), g), 1e-10);
}

TEST(SpdRoot, RejectsIndefinite) {
  const Tensor3d m = -1.0 * Tensor3d::Identity(2, 3);
  try {
    spd_sqrt(m);
    ADD_FAILURE();
  } catch (const NotPositive& e) {
    EXPECT_NEAR(e.lambda_min(), -1, 1e-14);
  }
  EXPECT_THROW(spd_inv_sqrt(Tensor3d(2, 2, 2)), NotPositive);
}

TEST(Polar, FactorsAndUniqueH) {
  Rng rng(9);
  const Tensor3d a = randn(4, 2, 3, rng);
  const TPolar d = t_polar(a);
  EXPECT_LT(rel(t_product(d.P, d.H), a), 1e-10);
  EXPECT_LT(feasibility_defect(d.P), 1e-12);
  EXPECT_LT(rel(d.H, tt(d.H)), 1e-12);
  EXPECT_LT(rel(d.H, spd_sqrt(t_product(tt(a), a))), 1e-9);
  const SpectralTensor3 h = dft(d.H);
  for (Index k = 0; k < 3; ++k)
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(h.slice(k)).eigenvalues().minCoeff(), -1e-12);
}

TEST(Polar, FeasibleInputAndMatrixCase) {
  Rng rng(10);
  const Tensor3d x = random_feasible(4, 2, 3, rng);
  const TPolar d = t_polar(x);
  EXPECT_LT((d.P - x).norm(), 1e-10);
  EXPECT_LT((d.H - Tensor3d::Identity(2, 3)).norm(), 1e-10);
  const Tensor3d m = randn(4, 3, 1, rng);
  const TPolar pm = t_polar(m);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.slice(0), Eigen::ComputeThinU | Eigen::ComputeThinV);
  EXPECT_LT((pm.P.slice(0) - svd.matrixU() * svd.matrixV().transpose()).norm(), 1e-12);
}

TEST(Procrustes, MaximizesInnerProduct) {
  Rng rng(11);
  const Tensor3d a = randn(4, 2, 3, rng);
  const Tensor3d p = procrustes_max(a);
  const double best = inner(a, p);
  for (int i = 0; i < 100; ++i) EXPECT_GE(best, inner(a, random_feasible(4, 2, 3, rng)));
  const TSvd s = t_svd(a, true);
  EXPECT_LT(rel(p, t_product(s.U, tt(s.V))), 1e-10);
  EXPECT_NEAR(3 * best, trace(s.S), 1e-9 * std::abs(best));
  EXPECT_LT(rel(procrustes_max(p), p), 1e-12);
}

TEST(Exp, ZeroAndSeries) {
  EXPECT_LT(rel(t_exp(Tensor3d(3, 3, 2)), Tensor3d::Identity(3, 2)), 1e-15);
  Rng rng(12);
  for (Index l : {1, 2, 3, 4}) {
    Tensor3d a = randn(3, 3, l, rng);
    a *= 2.0 / a.norm();
    EXPECT_LT(rel(t_exp(a), series_exp(a)), 1e-12);
  }
}

TEST(Exp, BcircDefinition) {
  Rng rng(13);
  const Tensor3d a = 0.5 * randn(3, 3, 3, rng);
  const Eigen::MatrixXd e = bcirc(a).exp();
  EXPECT_LT(rel(t_exp(a), fold(e * unfold(Tensor3d::Identity(3, 3)), 3, 3, 3)), 1e-12);
}

TEST(Exp, SkewGivesOrthogonal) {
  Rng rng(14);
  const Tensor3d w = skew_part(randn(4, 4, 3, rng));
  const Tensor3d q = t_exp(w);
  EXPECT_LT(rel(t_product(tt(q), q), Tensor3d::Identity(4, 3)), 1e-12);
}

TEST(Exp, DerivativeCommutes) {
  Rng rng(15);
  const Tensor3d a = randn(3, 3, 3, rng) * 0.5;
  const double t = 0.7, h = 1e-5;
  const Tensor3d fd = (t_exp((t + h) * a) - t_exp((t - h) * a)) / (2 * h);
  EXPECT_LT(rel(fd, t_product(t_exp(t * a), a)), 1e-7);
  EXPECT_LT(rel(fd, t_product(a, t_exp(t * a))), 1e-7);
  const Tensor3d at0 = (t_exp(h * a) - t_exp(-h * a)) / (2 * h);
  EXPECT_LT(rel(at0, a), 1e-7);
}

TEST(Exp, OrthogonalConjugation) {
  Rng rng(16);
  const Tensor3d a = randn(3, 3, 2, rng);
  const Tensor3d q = random_feasible(3, 3, 2, rng);
  EXPECT_LT(rel(t_exp(t_product(q, a, tt(q))), t_product(q, t_exp(a), tt(q))), 1e-10);
}

TEST(Exp, PartialIsometryConjugation) {
  // For X in St(m, n, l) with m > n, X*exp(A)*X^T is singular, so only the
  // corrected form with the complementary projector holds.
  Rng rng(17);
  const Tensor3d a = randn(3, 3, 2, rng);
  const Tensor3d x = random_feasible(5, 3, 2, rng);
  const Tensor3d lhs = t_exp(t_product(x, a, tt(x)));
  const Tensor3d proj = t_product(x, tt(x));
  EXPECT_GT(rel(lhs, t_product(x, t_exp(a), tt(x))), 1e-2);
  EXPECT_LT(rel(lhs, Tensor3d::Identity(5, 2) - proj + t_product(x, t_exp(a), tt(x))), 1e-10);
}

TEST(Exp, TransposeAndCommutingSum) {
  Rng rng(18);
  const Tensor3d a = randn(3, 3, 3, rng) * 0.5;
  EXPECT_LT(rel(tt(t_exp(a)), t_exp(tt(a))), 1e-12);
  const Tensor3d b = 0.3 * t_product(a, a) - 2.0 * a;
  EXPECT_LT(rel(t_product(t_exp(a), t_exp(b)), t_exp(a + b)), 1e-10);
}

TEST(Exp, BlockDiagonal) {
  Rng rng(19);
  const Tensor3d d1 = randn(2, 2, 3, rng), d2 = randn(3, 3, 3, rng);
  Tensor3d blk(5, 5, 3);
  for (Index k = 0; k < 3; ++k) {
    blk.slice(k).topLeftCorner(2, 2) = d1.slice(k);
    blk.slice(k).bottomRightCorner(3, 3) = d2.slice(k);
  }
  const Tensor3d e = t_exp(blk), e1 = t_exp(d1), e2 = t_exp(d2);
  for (Index k = 0; k < 3; ++k) {
    EXPECT_LT((e.slice(k).topLeftCorner(2, 2) - e1.slice(k)).norm(), 1e-10);
    EXPECT_LT((e.slice(k).bottomRightCorner(3, 3) - e2.slice(k)).norm(), 1e-10);
    EXPECT_LT(e.slice(k).topRightCorner(2, 3).norm(), 1e-12);
  }
}

TEST(SkewUpper, SplitProperties) {
  Rng rng(20);
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Random(3, 3), s, t;
  skew_upper_split(b, s, t);
  EXPECT_LT((s + t - b).norm(), 1e-12);
  EXPECT_LT((s + s.adjoint()).norm(), 1e-12);
  EXPECT_LT(t.triangularView<Eigen::StrictlyLower>().toDenseMatrix().norm(), 1e-12);
  EXPECT_LT(t.diagonal().imag().norm(), 1e-12);
}

TEST(SkewUpper, DegenerateInputs) {
  Eigen::MatrixXcd up(2, 2), sk(2, 2), s, t;
  up << 1.0, cdouble(2, 3), 0.0, 4.0;
  skew_upper_split(up, s, t);
  EXPECT_EQ(s.norm(), 0.0);
  sk << cdouble(0, 1), cdouble(2, 1), cdouble(-2, 1), cdouble(0, -3);
  skew_upper_split(sk, s, t);
  EXPECT_LT(t.norm(), 1e-15);
}

TEST(SkewUpper, TensorSplitKeepsPairing) {
  Rng rng(21);
  const SpectralTensor3 b = dft(randn(3, 3, 4, rng));
  const SkewUpper su = skew_upper_split(b);
  EXPECT_LT(conjugate_pairing_defect(su.skew), 1e-14);
  EXPECT_LT(conjugate_pairing_defect(su.upper), 1e-14);
}

TEST(Sylvester, IdentityCoefficients) {
  Rng rng(22);
  const Tensor3d c = randn(2, 3, 2, rng);
  const Tensor3d half = 0.5 * c;
  EXPECT_LT(rel(t_sylvester_vec(Tensor3d::Identity(2, 2), Tensor3d::Identity(3, 2), c), half), 1e-12);
  EXPECT_LT(rel(t_sylvester_spectral(Tensor3d::Identity(2, 2), Tensor3d::Identity(3, 2), c), half), 1e-12);
}

TEST(Sylvester, MatrixCase) {
  Rng rng(23);
  Tensor3d a = randn(3, 3, 1, rng), b = randn(2, 2, 1, rng);
  a.slice(0) += 4 * Eigen::MatrixXd::Identity(3, 3);
  b.slice(0) += 4 * Eigen::MatrixXd::Identity(2, 2);
  const Tensor3d c = randn(3, 2, 1, rng);
  // Dense Kronecker oracle.
  const Eigen::MatrixXd k = Eigen::kroneckerProduct(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd(a.slice(0))) +
                            Eigen::kroneckerProduct(Eigen::MatrixXd(b.slice(0).transpose()), Eigen::MatrixXd::Identity(3, 3));
  const Eigen::VectorXd x = k.lu().solve(c.vec());
  EXPECT_LT((t_sylvester_vec(a, b, c).vec() - x).norm(), 1e-12 * x.norm());
  EXPECT_LT((t_sylvester_spectral(a, b, c).vec() - x).norm(), 1e-12 * x.norm());
}

TEST(Sylvester, VecMatrixMatchesOperator) {
  Rng rng(24);
  const Tensor3d a = randn(2, 2, 3, rng), b = randn(3, 3, 3, rng), x = randn(2, 3, 3, rng);
  const Eigen::VectorXd mv = sylvester_vec_matrix(a, b) * x.vec();
  EXPECT_LT((mv - (t_product(a, x) + t_product(x, b)).vec()).norm(), 1e-12 * mv.norm());
}

TEST(Sylvester, SolversAgreeAndRecover) {
  Rng rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor3d g = randn(2, 2, 2, rng);
    const Tensor3d a = Tensor3d::Identity(2, 2) + t_product(tt(g), g);
    const Tensor3d y = randn(2, 2, 2, rng);
    const Tensor3d c = t_product(a, y) + t_product(y, a);
    const Tensor3d xs = t_sylvester_spectral(a, a, c), xv = t_sylvester_vec(a, a, c);
    EXPECT_LT((xs - xv).norm(), 1e-8);
    EXPECT_LT(rel(xs, y), 1e-9);
  }
}

TEST(Sylvester, HermitianRightSideGivesHermitianSolution) {
  Rng rng(26);
  const Tensor3d g = randn(3, 3, 3, rng);
  const Tensor3d a = Tensor3d::Identity(3, 3) + t_product(tt(g), g);
  const Tensor3d c = sym_part(randn(3, 3, 3, rng));
  const Tensor3d x = t_sylvester_spectral(a, a, c);
  EXPECT_LT(rel(x, tt(x)), 1e-10);
}

TEST(Sylvester, Errors) {
  const Tensor3d id = Tensor3d::Identity(2, 2);
  const Tensor3d c = Tensor3d::Identity(2, 2);
  EXPECT_THROW(t_sylvester_spectral(id, -1.0 * id, c), SingularPencil);
  EXPECT_THROW(t_sylvester_vec(id, -1.0 * id, c), InconsistentSystem);
  EXPECT_THROW(t_sylvester_vec(Tensor3d(25, 25, 20), Tensor3d(25, 25, 20), Tensor3d(25, 25, 20)), SizeGuardExceeded);
}
