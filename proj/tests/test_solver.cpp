#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "tstiefel/random.hpp"
#include "tstiefel/solver.hpp"

using namespace tstiefel;

namespace {

// f(x) = -x^T A x on the unit sphere St(n, 1, 1).
FunctionObjective rayleigh(const Eigen::MatrixXd& a) {
  return FunctionObjective(
      [a](const Tensor3d& x) {
        const Eigen::VectorXd v = x.slice(0).col(0);
        return -v.dot(a * v);
      },
      [a](const Tensor3d& x) {
        Tensor3d g(x.rows(), 1, 1);
        g.slice(0) = -2.0 * a * x.slice(0);
        return g;
      });
}

Eigen::MatrixXd random_symmetric(Index n, Rng& rng) {
  const Eigen::MatrixXd b = randn(n, n, 1, rng).slice(0);
  return 0.5 * (b + b.transpose());
}

TangentVector tangent_at(const StiefelPoint& x, Rng& rng) {
  return project_tangent(x, randn(x.n(), x.p(), x.l(), rng));
}

}  // namespace

TEST(Config, Validation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = SolverConfig{};
  c.alpha0 = 2.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = SolverConfig{};
  c.transport = Transport::QRDiff;
  c.retraction = Retraction::Cayley;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Beta, FletcherReevesIsOneForUnchangedGradient) {
  Rng rng(1);
  const StiefelPoint x = random_point(5, 2, 3, 1);
  const TangentVector g = tangent_at(x, rng);
  const TangentVector z = -g;
  EXPECT_NEAR(cg_beta(g, g, z, z), 1.0, 1e-14);
}

TEST(Beta, NeverExceedsFletcherReeves) {
  Rng rng(2);
  const StiefelPoint x = random_point(5, 2, 3, 2);
  for (int i = 0; i < 50; ++i) {
    const TangentVector g0 = tangent_at(x, rng), g1 = tangent_at(x, rng), z = tangent_at(x, rng),
                        tz = tangent_at(x, rng);
    EXPECT_LE(cg_beta(g1, g0, z, tz), inner(g1, g1) / inner(g0, g0) + 1e-14);
  }
}

TEST(Beta, NonpositiveDenominatorRestarts) {
  Rng rng(3);
  const StiefelPoint x = random_point(5, 2, 3, 3);
  const TangentVector g = tangent_at(x, rng);
  // Ascent direction with <g, Z> > 0 and <g_new, TZ> small makes both terms nonpositive.
  const TangentVector z = g;
  const TangentVector tz = -1.0 * g;
  EXPECT_EQ(cg_beta(g, g, z, tz), 0.0);
}

TEST(Barzilai, Formula) {
  Rng rng(4);
  const Tensor3d s = randn(4, 2, 3, rng), v = randn(4, 2, 3, rng);
  EXPECT_DOUBLE_EQ(bb_steplength(s, s, 1e-20, 1.0), 1.0);
  const double big = 1e300;
  const double a = bb_steplength(s, v, 0.0, big);
  // Degree one in S alone, degree zero under joint scaling.
  EXPECT_NEAR(bb_steplength(3.0 * s, v, 0.0, big), 3.0 * a, 1e-12 * a);
  EXPECT_NEAR(bb_steplength(3.0 * s, 3.0 * v, 0.0, big), a, 1e-12 * a);
  EXPECT_NEAR(a, s.squaredNorm() / std::abs(inner(s, v)), 1e-12 * a);
  EXPECT_EQ(bb_steplength(s, Tensor3d(4, 2, 3), 1e-20, 1.0), 1.0);
  EXPECT_EQ(bb_steplength(1e-30 * s, s, 1e-20, 1.0), 1e-20);
}

TEST(LineSearch, AcceptsImmediately) {
  Rng rng(5);
  const Tensor3d a = randn(5, 2, 2, rng);
  const FunctionObjective f([a](const Tensor3d& x) { return inner(a, x); }, [a](const Tensor3d&) { return a; });
  const StiefelPoint x = random_point(5, 2, 2, 5);
  const TangentVector g = riemannian_gradient(x, a);
  const double fx = f.value(x.value());
  const LineSearchResult r = nonmonotone_linesearch(f, -g, -inner(g, g), 1e-3, fx, fx, SolverConfig{});
  EXPECT_EQ(r.backtracks, 0);
  EXPECT_EQ(r.alpha, 1e-3);
}

TEST(LineSearch, BacktracksGeometrically) {
  Rng rng(6);
  const Tensor3d a = randn(5, 2, 2, rng);
  const FunctionObjective f([a](const Tensor3d& x) { return inner(a, x); }, [a](const Tensor3d&) { return a; });
  const StiefelPoint x = random_point(5, 2, 2, 6);
  const TangentVector g = riemannian_gradient(x, a);
  const double fx = f.value(x.value()), slope = -inner(g, g);
  SolverConfig cfg;
  const LineSearchResult r = nonmonotone_linesearch(f, -g, slope, 1e8, fx, fx, cfg);
  EXPECT_GT(r.backtracks, 0);
  EXPECT_DOUBLE_EQ(r.alpha, 1e8 * std::pow(cfg.lambda, r.backtracks));
  EXPECT_LE(r.value, fx + cfg.delta * r.alpha * slope);
  // The previous trial step must have failed.
  const double prev = r.alpha / cfg.lambda;
  EXPECT_GT(f.value(retract(cfg.retraction, prev * -g).value()), fx + cfg.delta * prev * slope);
}

TEST(LineSearch, StallsWhenNoStepIsAccepted) {
  // Distance from X grows along every direction, so no step meets a negative slope.
  const StiefelPoint x = random_point(5, 2, 2, 7);
  const Tensor3d x0 = x.value();
  const FunctionObjective f([x0](const Tensor3d& y) { return (y - x0).norm(); },
                            [](const Tensor3d& y) { return Tensor3d(y.rows(), y.cols(), y.slices()); });
  Rng rng(7);
  const TangentVector z = tangent_at(x, rng);
  EXPECT_THROW(nonmonotone_linesearch(f, z, -1.0, 1.0, 0.0, 0.0, SolverConfig{}), LineSearchStalled);
}

TEST(LineSearch, TwoTermMemoryAcceptsIncrease) {
  // f = x_2^2 on the circle; a long step overshoots the minimum.
  const FunctionObjective f([](const Tensor3d& x) { return x(1, 0, 0) * x(1, 0, 0); },
                            [](const Tensor3d& x) {
                              Tensor3d g(2, 1, 1);
                              g(1, 0, 0) = 2 * x(1, 0, 0);
                              return g;
                            });
  Tensor3d x0(2, 1, 1);
  x0(0, 0, 0) = std::cos(0.1);
  x0(1, 0, 0) = std::sin(0.1);
  const StiefelPoint x(x0);
  const TangentVector g = riemannian_gradient(x, f.euclidean_gradient(x0));
  const double fx = f.value(x0), slope = -inner(g, g);
  const LineSearchResult r = nonmonotone_linesearch(f, -g, slope, 10.0, fx, 1.0, SolverConfig{});
  EXPECT_EQ(r.backtracks, 0);
  EXPECT_GT(r.value, fx);
  EXPECT_GT(nonmonotone_linesearch(f, -g, slope, 10.0, fx, fx, SolverConfig{}).backtracks, 0);
}

TEST(Solve, StartsAtMinimizer) {
  const StiefelPoint xs = random_point(6, 2, 3, 7);
  const Tensor3d target = xs.value();
  const FunctionObjective f([target](const Tensor3d& x) { return 0.5 * (x - target).squaredNorm(); },
                            [target](const Tensor3d& x) { return x - target; });
  const SolveResult r = solve(f, xs, SolverConfig{});
  EXPECT_LE(r.record.iteration_count(), 1);
  EXPECT_LT((r.x.value() - target).norm(), 1e-14);
}

TEST(Solve, RayleighQuotientFindsDominantEigenvector) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 20;
    const Eigen::MatrixXd a = random_symmetric(n, rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    const Eigen::VectorXd top = eig.eigenvectors().col(n - 1);
    const FunctionObjective f = rayleigh(a);
    const SolveResult r = solve(f, random_point(n, 1, 1, 100 + trial), SolverConfig{});
    const double cosine = std::abs(top.dot(r.x.value().slice(0).col(0)));
    EXPECT_LT(std::acos(std::min(cosine, 1.0)), 1e-4) << "trial " << trial;
  }
}

TEST(Solve, BarzilaiBorweinBeatsFixedStep) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd a = random_symmetric(15, rng);
    const FunctionObjective f = rayleigh(a);
    const StiefelPoint x0 = random_point(15, 1, 1, 200 + trial);
    SolverConfig bb, fixed;
    fixed.bb_steplength = false;
    const int it_bb = solve(f, x0, bb).record.iteration_count();
    const int it_fixed = solve(f, x0, fixed).record.iteration_count();
    EXPECT_LT(it_bb, it_fixed) << "trial " << trial;
  }
}

TEST(Solve, RecordInvariantsAndDeterminism) {
  Rng rng(10);
  const Tensor3d v = randn(12, 12, 3, rng);
  const Tensor3d a = t_product(t_transpose(v), v);
  const FunctionObjective f([a](const Tensor3d& u) { return -trace(t_product(t_transpose(u), a, u)); },
                            [a](const Tensor3d& u) { return -6.0 * t_product(a, u); });
  for (Retraction r : {Retraction::QR, Retraction::Polar, Retraction::Cayley, Retraction::Exp}) {
    SolverConfig cfg;
    cfg.retraction = r;
    cfg.transport = Transport::Projection;
    SCOPED_TRACE(to_string(r));
    const StiefelPoint x0 = random_point(12, 3, 3, 11);
    const SolveResult s1 = solve(f, x0, cfg), s2 = solve(f, x0, cfg);
    ASSERT_EQ(s1.record.iterations.size(), s2.record.iterations.size());
    for (std::size_t i = 0; i < s1.record.iterations.size(); ++i)
      EXPECT_EQ(s1.record.iterations[i].objective, s2.record.iterations[i].objective);
    EXPECT_TRUE(s1.record.nonmonotone_bound_holds(cfg.delta));
    EXPECT_NE(s1.record.termination, Termination::None);
    for (const IterationRecord& it : s1.record.iterations) EXPECT_LE(it.feasibility, 1e-10);
    EXPECT_LT(s1.record.last().grad_norm, 1e-2 * s1.record.iterations[0].grad_norm) << to_string(r);
  }
}

TEST(Solve, DifferentiatedTransportsRun) {
  Rng rng(11);
  const Tensor3d v = randn(8, 8, 2, rng);
  const Tensor3d a = t_product(t_transpose(v), v);
  const FunctionObjective f([a](const Tensor3d& u) { return -trace(t_product(t_transpose(u), a, u)); },
                            [a](const Tensor3d& u) { return -4.0 * t_product(a, u); });
  const StiefelPoint x0 = random_point(8, 2, 2, 12);
  const double reference = solve(f, x0, SolverConfig{}).record.last().objective;
  const std::pair<Retraction, Transport> arms[] = {{Retraction::QR, Transport::QRDiff},
                                                   {Retraction::Polar, Transport::PolarDiff},
                                                   {Retraction::Cayley, Transport::CayleyDiff},
                                                   {Retraction::Cayley, Transport::CayleyIsometric}};
  for (auto [r, t] : arms) {
    SolverConfig cfg;
    cfg.retraction = r;
    cfg.transport = t;
    const SolveResult s = solve(f, x0, cfg);
    EXPECT_NEAR(s.record.last().objective, reference, 1e-6 * std::abs(reference)) << to_string(t);
  }
}

TEST(Output, JsonLinesAndTrace) {
  Rng rng(12);
  const FunctionObjective f = rayleigh(random_symmetric(6, rng));
  const SolveResult r = solve(f, random_point(6, 1, 1, 13), SolverConfig{});
  std::stringstream js, csv;
  write_jsonl(js, r.record, {{"trial", 4}});
  std::string line;
  int count = 0;
  nlohmann::json last;
  while (std::getline(js, line)) {
    last = nlohmann::json::parse(line);
    EXPECT_EQ(last["trial"], 4);
    ++count;
  }
  EXPECT_EQ(count, static_cast<int>(r.record.iterations.size()));
  EXPECT_EQ(last["termination"], to_string(r.record.termination));
  EXPECT_EQ(last["objective"].get<double>(), r.record.last().objective);
  write_trace_csv(csv, r.record);
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, count + 1);
}
