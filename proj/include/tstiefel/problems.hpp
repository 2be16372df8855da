#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "tstiefel/random.hpp"
#include "tstiefel/solver.hpp"

namespace tstiefel {

enum class Family { BestApprox, MissingEntries, JointFDiag, SparsePca };
std::string to_string(Family f);
/// "best-approx", "missing-entries", "joint-fdiag", "sparse-pca".
Family parse_family(const std::string& s);

/// Generator parameters. U lives on St(n, k, l); ground truth X on St(n, p, l).
struct ProblemParams {
  Family family = Family::BestApprox;
  Index n = 50, p = 10, l = 8, k = 10;
  int samples = 3;        ///< N, joint f-diagonalization
  double noise = 0.1;     ///< r, joint f-diagonalization
  double rho = 0.1;       ///< sparse PCA weight
  double missing = 0.3;   ///< missing-entries ratio

  void validate() const;
};

// ---------------------------------------------------------------- instances

/// min -trace(U^T * A * U) with A = V^T * V, V standard normal n x n x l.
struct BestApproxInstance {
  Tensor3d a;
  Index k;
};

/// min ||Omega o (A - U*S*U^T)||^2 with A = X*W*X^T, W symmetric f-diagonal.
struct MissingEntriesInstance {
  Tensor3d a;      ///< full data; only entries where omega = 1 are observed
  Tensor3d omega;  ///< 0/1 mask, invariant under t-transpose
  Tensor3d x, w;
  Index k;
};

/// min sum_i off(U^T * A_i * U) with A_i = X*C_i*X^T + r E_i/||E_i||.
struct JointFDiagInstance {
  std::vector<Tensor3d> a, c;
  Tensor3d x;
  Index k;
};

/// min -trace(U^T * A * A^T * U) + rho ||U||_1 with A standard normal n x p x l.
struct SparsePcaInstance {
  Tensor3d a;
  double rho;
  Index k;
};

using Instance = std::variant<BestApproxInstance, MissingEntriesInstance, JointFDiagInstance, SparsePcaInstance>;

Family family_of(const Instance& inst);
/// Deterministic per (params, seed).
Instance generate(const ProblemParams& params, std::uint64_t seed);

BestApproxInstance make_best_approx(Index n, Index k, Index l, std::uint64_t seed);
MissingEntriesInstance make_missing_entries(Index n, Index p, Index l, Index k, double missing, std::uint64_t seed);
JointFDiagInstance make_joint_fdiag(Index n, Index p, Index l, Index k, int samples, double noise,
                                    std::uint64_t seed);
SparsePcaInstance make_sparse_pca(Index n, Index p, Index l, Index k, double rho, std::uint64_t seed);

/// Mask with entries missing independently per t-transpose orbit
/// {(i,j,s), (j,i,-s mod l)} with probability `missing`.
Tensor3d symmetric_mask(Index n, Index l, double missing, Rng& rng);

// ---------------------------------------------------------------- objectives

class BestApproxObjective : public Objective {
 public:
  explicit BestApproxObjective(const BestApproxInstance& inst);
  double value(const Tensor3d& u) const override;
  Tensor3d euclidean_gradient(const Tensor3d& u) const override;

 private:
  SpectralTensor3 a_hat_;
  Index k_;
};

class MissingEntriesObjective : public Objective {
 public:
  /// U-objective at a fixed S.
  MissingEntriesObjective(const MissingEntriesInstance& inst, Tensor3d s);
  double value(const Tensor3d& u) const override;
  Tensor3d euclidean_gradient(const Tensor3d& u) const override;

  const Tensor3d& s() const { return s_; }
  void set_s(Tensor3d s);
  /// 2 U^T * R * U with R = Omega o (U*S*U^T - A).
  Tensor3d gradient_s(const Tensor3d& u, const Tensor3d& s) const;
  double value(const Tensor3d& u, const Tensor3d& s) const;
  /// Omega o (U*S*U^T - A).
  Tensor3d residual(const Tensor3d& u, const Tensor3d& s) const;
  const Tensor3d& mask() const { return omega_; }
  const Tensor3d& data() const { return a_; }

 private:
  Tensor3d a_, omega_;
  Tensor3d s_;
  struct ResidualCache {
    Tensor3d u, s, r;
  };
  mutable ResidualCache cache_;  ///< last residual; an objective is not shared across threads
};

class JointFDiagObjective : public Objective {
 public:
  explicit JointFDiagObjective(const JointFDiagInstance& inst);
  double value(const Tensor3d& u) const override;
  Tensor3d euclidean_gradient(const Tensor3d& u) const override;

 private:
  std::vector<SpectralTensor3> a_hat_;
};

/// Smooth part plus rho * sign(U), sign(0) = 0.
class SparsePcaObjective : public Objective {
 public:
  explicit SparsePcaObjective(const SparsePcaInstance& inst);
  double value(const Tensor3d& u) const override;
  Tensor3d euclidean_gradient(const Tensor3d& u) const override;
  double smooth_value(const Tensor3d& u) const;
  Tensor3d smooth_gradient(const Tensor3d& u) const;

 private:
  SpectralTensor3 b_hat_;  ///< DFT of A * A^T
  double rho_;
  Index k_;
};

/// Central-difference estimate of the Euclidean gradient, one coordinate at a time.
Tensor3d fd_gradient_oracle(const std::function<double(const Tensor3d&)>& f, const Tensor3d& x, double h = 1e-6);

// ---------------------------------------------------------------- drivers

struct AlternatingConfig {
  int s_steps = 50;     ///< BB gradient steps on S per outer iteration
  double s_tol = 1e-8;  ///< relative gradient-norm tolerance of the S subproblem
};

/// Starting from the current S, runs BB gradient steps with the nonmonotone
/// acceptance test. Never returns an S worse than the input.
Tensor3d solve_s_subproblem(const MissingEntriesObjective& obj, const Tensor3d& u, Tensor3d s,
                            const AlternatingConfig& acfg, const SolverConfig& cfg);

struct AlternatingResult {
  StiefelPoint u;
  Tensor3d s;
  RunRecord record;
};

/// One CG step in U, then the S subproblem, until the solver's stopping tests
/// fire on the joint objective. S_0 = U_0^T * A * U_0.
AlternatingResult alternating_solve(const MissingEntriesInstance& inst, const StiefelPoint& u0,
                                    const SolverConfig& cfg, const AlternatingConfig& acfg = {});

struct Metrics {
  double objective = 0;
  double re = 0;  ///< relative error; NaN for families without ground truth
  double feasibility = 0;
};

/// ||X*W*X^T - U*S*U^T|| / ||W||.
double missing_entries_error(const MissingEntriesInstance& inst, const Tensor3d& u, const Tensor3d& s);
/// mean_i ||X*C_i*X^T - U*U^T*A_i*U*U^T|| / ||C_i||.
double joint_fdiag_error(const JointFDiagInstance& inst, const Tensor3d& u);

struct TrialResult {
  Tensor3d u;
  Tensor3d s;  ///< empty unless missing entries
  RunRecord record;
  Metrics metrics;
};

/// Solves one instance from `u0` with the family's driver and computes its metrics.
TrialResult run_trial(const Instance& inst, const StiefelPoint& u0, const SolverConfig& cfg,
                      const AlternatingConfig& acfg = {});

/// Tensor files <stem>.<name>.tt3d plus <stem>.json with family, seed and parameters.
void save_instance(const std::string& stem, const Instance& inst, const ProblemParams& params, std::uint64_t seed);
/// Reads back an instance written by save_instance; fills `params` and `seed` when given.
Instance load_instance(const std::string& stem, ProblemParams* params = nullptr, std::uint64_t* seed = nullptr);

}  // namespace tstiefel
