#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tstiefel/problems.hpp"

using namespace tstiefel;

namespace {

Tensor3d tt(const Tensor3d& a) { return t_transpose(a); }

double rel(const Tensor3d& a, const Tensor3d& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

void expect_fd_gradient(const Objective& obj, const Tensor3d& u, double tol) {
  const Tensor3d fd = fd_gradient_oracle([&](const Tensor3d& y) { return obj.value(y); }, u);
  EXPECT_LT(rel(obj.euclidean_gradient(u), fd), tol);
}

const std::tuple<Index, Index, Index> kShapes[] = {{6, 3, 2}, {8, 3, 4}};

}  // namespace

TEST(Oracle, LinearAndQuadratic) {
  Rng rng(1);
  const Tensor3d a = randn(4, 3, 2, rng), x = randn(4, 3, 2, rng);
  EXPECT_LT((fd_gradient_oracle([&](const Tensor3d& y) { return inner(a, y); }, x) - a).norm(), 1e-7);
  EXPECT_LT((fd_gradient_oracle([](const Tensor3d& y) { return 0.5 * y.squaredNorm(); }, x) - x).norm(), 1e-7);
}

TEST(Names, Families) {
  for (Family f : {Family::BestApprox, Family::MissingEntries, Family::JointFDiag, Family::SparsePca})
    EXPECT_EQ(parse_family(to_string(f)), f);
  EXPECT_THROW(parse_family("pca"), InvalidArgument);
  ProblemParams q;
  q.k = 60;
  EXPECT_THROW(q.validate(), InvalidArgument);
}

TEST(BestApprox, IdentityData) {
  const BestApproxInstance inst{Tensor3d::Identity(6, 3), 2};
  const BestApproxObjective f(inst);
  EXPECT_NEAR(f.value(random_point(6, 2, 3, 1).value()), -2.0 * 3.0, 1e-12);
}

TEST(BestApprox, MatrixCase) {
  const BestApproxInstance inst = make_best_approx(7, 3, 1, 2);
  const BestApproxObjective f(inst);
  const Eigen::MatrixXd u = random_point(7, 3, 1, 3).value().slice(0);
  const Eigen::MatrixXd a = inst.a.slice(0);
  EXPECT_NEAR(f.value(Tensor3d::FromMatrix(u)), -(u.transpose() * a * u).trace(), 1e-10);
  EXPECT_LT((f.euclidean_gradient(Tensor3d::FromMatrix(u)).slice(0) - (-2.0 * a * u)).norm(), 1e-10);
}

TEST(BestApprox, TraceAndInnerFormsAgree) {
  const BestApproxInstance inst = make_best_approx(6, 3, 4, 4);
  EXPECT_LT((inst.a - tt(inst.a)).norm(), 1e-12);
  const Tensor3d u = random_point(6, 3, 4, 5).value();
  const double via_trace = -trace(t_product(tt(u), inst.a, u));
  const double via_inner = BestApproxObjective(inst).value(u);
  EXPECT_NEAR(via_trace, via_inner, 1e-10 * std::abs(via_trace));
}

TEST(MissingEntries, TruthHasZeroObjective) {
  MissingEntriesInstance inst = make_missing_entries(8, 3, 2, 3, 0.3, 6);
  MissingEntriesObjective f(inst, inst.w);
  EXPECT_LT(f.value(inst.x), 1e-24);
  inst.omega.setZero();
  MissingEntriesObjective zero(inst, inst.w);
  const Tensor3d u = random_point(8, 3, 2, 7).value();
  EXPECT_EQ(zero.value(u), 0.0);
  EXPECT_EQ(zero.euclidean_gradient(u).norm(), 0.0);
  EXPECT_EQ(zero.gradient_s(u, inst.w).norm(), 0.0);
}

TEST(MissingEntries, MaskIsSymmetricWithRequestedRatio) {
  Rng rng(8);
  const Tensor3d omega = symmetric_mask(40, 6, 0.3, rng);
  EXPECT_EQ((omega - tt(omega)).norm(), 0.0);
  for (Index q = 0; q < omega.size(); ++q) EXPECT_TRUE(omega.vec()[q] == 0.0 || omega.vec()[q] == 1.0);
  EXPECT_NEAR(1.0 - omega.vec().mean(), 0.3, 0.02);
  const MissingEntriesInstance inst = make_missing_entries(10, 3, 3, 3, 0.3, 9);
  EXPECT_LT((inst.a - tt(inst.a)).norm(), 1e-12);
  EXPECT_LT((inst.w - tt(inst.w)).norm(), 1e-15);
  EXPECT_EQ(off_part(inst.w).norm(), 0.0);
}

TEST(MissingEntries, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  for (auto [n, p, l] : kShapes) {
    const MissingEntriesInstance inst = make_missing_entries(n, p, l, p, 0.3, 11);
    const Tensor3d s = randn(p, p, l, rng);
    const MissingEntriesObjective f(inst, s);
    const Tensor3d u = random_point(n, p, l, 12).value();
    expect_fd_gradient(f, u, 1e-5);
    const Tensor3d fd_s = fd_gradient_oracle([&](const Tensor3d& y) { return f.value(u, y); }, s);
    EXPECT_LT(rel(f.gradient_s(u, s), fd_s), 1e-5);
  }
}

TEST(MissingEntries, SubproblemRecoversWAtTruth) {
  const MissingEntriesInstance inst = make_missing_entries(12, 3, 2, 3, 0.3, 13);
  const MissingEntriesObjective f(inst, Tensor3d(3, 3, 2));
  AlternatingConfig acfg;
  acfg.s_steps = 500;
  acfg.s_tol = 1e-12;
  const Tensor3d s = solve_s_subproblem(f, inst.x, Tensor3d(3, 3, 2), acfg, SolverConfig{});
  EXPECT_LT((s - inst.w).norm(), 1e-8 * inst.w.norm());
}

TEST(MissingEntries, ExactRecoveryWithoutMissingEntries) {
  // Well-separated spectrum W = diag(3, 2) in every spectral slice. The default
  // step tolerance stops near re = 2e-6, so it is tightened here.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MissingEntriesInstance inst;
    inst.x = random_point(12, 2, 2, 40 + seed).value();
    inst.w = Tensor3d(2, 2, 2);
    inst.w(0, 0, 0) = 3.0;
    inst.w(1, 1, 0) = 2.0;
    inst.a = sym_part(t_product(inst.x, inst.w, tt(inst.x)));
    inst.omega = Tensor3d(12, 12, 2);
    inst.omega.vec().setOnes();
    inst.k = 2;
    SolverConfig cfg;
    cfg.max_iter = 200;
    cfg.tol_x = 1e-9;
    const AlternatingResult r = alternating_solve(inst, random_point(12, 2, 2, 60 + seed), cfg);
    EXPECT_LE(r.record.iteration_count(), 200);
    EXPECT_LT(missing_entries_error(inst, r.u.value(), r.s), 1e-6) << "seed " << seed;
    EXPECT_TRUE(r.record.nonmonotone_bound_holds(cfg.delta));
  }
}

TEST(MissingEntries, UnobservedEntriesNeverReachTheSolver) {
  const MissingEntriesInstance inst = make_missing_entries(10, 2, 3, 2, 0.3, 61);
  MissingEntriesInstance tampered = inst;
  Rng rng(62);
  Tensor3d noise = sym_part(randn(10, 10, 3, rng));
  noise.vec().array() *= 1.0 - inst.omega.vec().array();
  ASSERT_GT(noise.norm(), 0.0);
  tampered.a += 100.0 * noise;
  SolverConfig cfg;
  cfg.max_iter = 20;
  const StiefelPoint u0 = random_point(10, 2, 3, 63);
  const AlternatingResult a = alternating_solve(inst, u0, cfg), b = alternating_solve(tampered, u0, cfg);
  EXPECT_EQ(a.u.value().vec(), b.u.value().vec());
  EXPECT_EQ(a.s.vec(), b.s.vec());
}

TEST(JointFDiag, TruthIsExactDiagonalizer) {
  const JointFDiagInstance inst = make_joint_fdiag(8, 3, 2, 3, 3, 0.0, 16);
  const JointFDiagObjective f(inst);
  EXPECT_LT(f.value(inst.x), 1e-24);
  EXPECT_LT(joint_fdiag_error(inst, inst.x), 1e-12);
  EXPECT_GE(f.value(random_point(8, 3, 2, 17).value()), 0.0);
}

TEST(JointFDiag, SingleMatrixJacobiObjective) {
  const JointFDiagInstance inst = make_joint_fdiag(5, 2, 1, 2, 1, 0.1, 18);
  const Eigen::MatrixXd u = random_point(5, 2, 1, 19).value().slice(0);
  Eigen::MatrixXd m = u.transpose() * inst.a[0].slice(0) * u;
  m.diagonal().setZero();
  EXPECT_NEAR(JointFDiagObjective(inst).value(Tensor3d::FromMatrix(u)), m.squaredNorm(), 1e-12);
}

TEST(JointFDiag, GradientMatchesFiniteDifferences) {
  for (auto [n, p, l] : kShapes) {
    const JointFDiagInstance inst = make_joint_fdiag(n, p, l, p, 3, 0.1, 20);
    expect_fd_gradient(JointFDiagObjective(inst), random_point(n, p, l, 21).value(), 1e-5);
  }
}

TEST(BestApprox, GradientMatchesFiniteDifferences) {
  for (auto [n, p, l] : kShapes) {
    const BestApproxInstance inst = make_best_approx(n, p, l, 22);
    expect_fd_gradient(BestApproxObjective(inst), random_point(n, p, l, 23).value(), 1e-5);
  }
}

TEST(SparsePca, SmoothGradientAndSubgradient) {
  for (auto [n, p, l] : kShapes) {
    const SparsePcaInstance inst = make_sparse_pca(n, p, l, p, 0.1, 24);
    const SparsePcaObjective f(inst);
    const Tensor3d u = random_point(n, p, l, 25).value();
    const Tensor3d fd = fd_gradient_oracle([&](const Tensor3d& y) { return f.smooth_value(y); }, u);
    EXPECT_LT(rel(f.smooth_gradient(u), fd), 1e-5);
    // Away from zero entries the l1 term is smooth too.
    expect_fd_gradient(f, u, 1e-5);
  }
  SparsePcaInstance pos = make_sparse_pca(4, 2, 2, 2, 0.1, 26);
  const SparsePcaObjective f(pos);
  Tensor3d u(4, 2, 2);
  u.vec().setConstant(0.3);
  Tensor3d ones(4, 2, 2);
  ones.vec().setConstant(1.0);
  EXPECT_LT((f.euclidean_gradient(u) - f.smooth_gradient(u) - 0.1 * ones).norm(), 1e-14);
  u.vec()[0] = 0.0;
  EXPECT_EQ((f.euclidean_gradient(u) - f.smooth_gradient(u)).vec()[0], 0.0);
}

TEST(SparsePca, ZeroRhoReducesToBestApprox) {
  SparsePcaInstance inst = make_sparse_pca(6, 3, 3, 2, 0.1, 27);
  inst.rho = 0.0;
  const BestApproxInstance ba{t_product(inst.a, tt(inst.a)), 2};
  const Tensor3d u = random_point(6, 2, 3, 28).value();
  EXPECT_NEAR(SparsePcaObjective(inst).value(u), BestApproxObjective(ba).value(u), 1e-10);
}

TEST(Hessian, LinearObjectiveMatchesFiniteDifferences) {
  // f(X) = <A, X>: Hess[V] is the tangential derivative of the gradient field.
  Rng rng(29);
  for (auto [n, p, l] : kShapes) {
    const StiefelPoint x = random_point(n, p, l, 30);
    const Tensor3d a = randn(n, p, l, rng);
    const TangentVector v = project_tangent(x, randn(n, p, l, rng));
    const double h = 1e-5;
    const StiefelPoint yp = retract_qr(TangentVector(x, h * v.value()));
    const StiefelPoint ym = retract_qr(TangentVector(x, -h * v.value()));
    const Tensor3d dg = (riemannian_gradient(yp, a).value() - riemannian_gradient(ym, a).value()) / (2 * h);
    const TangentVector hv = riemannian_hessian_apply(x, a, Tensor3d(n, p, l), v);
    EXPECT_LT(rel(hv.value(), project_tangent(x, dg).value()), 1e-5);
  }
}

TEST(Generators, DeterministicPerSeed) {
  ProblemParams q;
  q.n = 8;
  q.p = q.k = 2;
  q.l = 3;
  for (Family fam : {Family::BestApprox, Family::MissingEntries, Family::JointFDiag, Family::SparsePca}) {
    q.family = fam;
    const Instance a = generate(q, 5), b = generate(q, 5), c = generate(q, 6);
    EXPECT_EQ(family_of(a), fam);
    const auto first = [](const Instance& i) {
      return std::visit(
          [](const auto& x) -> Tensor3d {
            if constexpr (requires { x.a.front(); } && !requires { x.a.vec(); })
              return x.a.front();
            else
              return x.a;
          },
          i);
    };
    EXPECT_EQ(first(a).vec(), first(b).vec());
    EXPECT_NE(first(a).vec(), first(c).vec());
  }
}

TEST(Serialization, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "tstiefel_problems_test";
  std::filesystem::create_directories(dir);
  ProblemParams q;
  q.n = 6;
  q.p = q.k = 2;
  q.l = 2;
  q.family = Family::JointFDiag;
  const Instance inst = generate(q, 31);
  const std::string stem = (dir / "joint").string();
  save_instance(stem, inst, q, 31);
  ProblemParams back;
  std::uint64_t seed = 0;
  const Instance loaded = load_instance(stem, &back, &seed);
  EXPECT_EQ(seed, 31u);
  EXPECT_EQ(back.family, Family::JointFDiag);
  const auto& a = std::get<JointFDiagInstance>(inst);
  const auto& b = std::get<JointFDiagInstance>(loaded);
  ASSERT_EQ(a.a.size(), b.a.size());
  for (std::size_t i = 0; i < a.a.size(); ++i) {
    EXPECT_EQ(a.a[i].vec(), b.a[i].vec());
    EXPECT_EQ(a.c[i].vec(), b.c[i].vec());
  }
  EXPECT_EQ(a.x.vec(), b.x.vec());
  std::filesystem::remove_all(dir);
}

TEST(Metrics, ReportFeasibilityOfInfeasibleInput) {
  const MissingEntriesInstance inst = make_missing_entries(8, 2, 2, 2, 0.3, 32);
  EXPECT_EQ(missing_entries_error(inst, inst.x, inst.w), 0.0);
  const Tensor3d bad = 2.0 * inst.x;
  EXPECT_GT(feasibility_defect(bad), 1.0);
}

TEST(Trial, SmallRunsForEveryFamily) {
  ProblemParams q;
  q.n = 10;
  q.p = q.k = 3;
  q.l = 2;
  for (Family fam : {Family::BestApprox, Family::MissingEntries, Family::JointFDiag, Family::SparsePca}) {
    q.family = fam;
    const Instance inst = generate(q, 33);
    const TrialResult r = run_trial(inst, random_point(10, 3, 2, 34), SolverConfig{});
    EXPECT_LE(r.metrics.feasibility, 1e-12) << to_string(fam);
    EXPECT_NE(r.record.termination, Termination::None);
    EXPECT_LE(r.metrics.objective, r.record.iterations.front().objective) << to_string(fam);
    EXPECT_EQ(std::isnan(r.metrics.re), fam == Family::BestApprox || fam == Family::SparsePca);
  }
}
