#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tstiefel/manifold.hpp"

namespace tstiefel {

struct SolverConfig {
  double alpha0 = 1e-3;
  double alpha_min = 1e-20;
  double alpha_max = 1.0;
  double lambda = 0.2;  ///< backtracking shrink factor
  double delta = 1e-4;  ///< Armijo constant
  double tol_x = 1e-6;
  double tol_f = 1e-12;
  int max_iter = 1000;
  Retraction retraction = Retraction::QR;
  Transport transport = Transport::Projection;
  /// When false every line search starts from alpha0 instead of the BB step.
  bool bb_steplength = true;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on out-of-range parameters or an incompatible transport.
  void validate() const;
};

/// Smooth (or subgradient-equipped) function on the ambient space R^{n x p x l}.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double value(const Tensor3d& u) const = 0;
  virtual Tensor3d euclidean_gradient(const Tensor3d& u) const = 0;
};

class FunctionObjective : public Objective {
 public:
  using Value = std::function<double(const Tensor3d&)>;
  using Gradient = std::function<Tensor3d(const Tensor3d&)>;
  FunctionObjective(Value f, Gradient g) : f_(std::move(f)), g_(std::move(g)) {}
  double value(const Tensor3d& u) const override { return f_(u); }
  Tensor3d euclidean_gradient(const Tensor3d& u) const override { return g_(u); }

 private:
  Value f_;
  Gradient g_;
};

enum class Termination { None, StepTolerance, ObjectiveTolerance, MaxIterations, LineSearchStalled };
std::string to_string(Termination t);

struct IterationRecord {
  int k = 0;
  double objective = 0;
  double grad_norm = 0;
  double alpha = 0;      ///< accepted steplength (0 for the initial record)
  int backtracks = 0;
  double beta = 0;
  double reference = 0;  ///< max(f(X_k), f(X_{k-1})) used by the acceptance test
  double slope = 0;      ///< <grad f(X_k), Z_k>
  double feasibility = 0;
  double time = 0;       ///< seconds since the solve started
  bool restarted = false;  ///< direction reset to -grad before the line search
};

struct RunRecord {
  std::vector<IterationRecord> iterations;  ///< entry 0 describes X_0
  Termination termination = Termination::None;
  int stalls = 0;  ///< line searches that hit alpha_min

  int iteration_count() const { return static_cast<int>(iterations.size()) - 1; }
  const IterationRecord& last() const { return iterations.back(); }
  /// f(X_{k+1}) <= ref + delta * alpha * slope at every accepted step, up to `slack`.
  bool nonmonotone_bound_holds(double delta, double slack = 0.0) const;
};

nlohmann::json to_json(const IterationRecord& r);
/// One JSON object per iteration, each merged with `tags`.
void write_jsonl(std::ostream& os, const RunRecord& run, const nlohmann::json& tags = nlohmann::json::object());
/// Columns k,objective,grad_norm,alpha,backtracks,feasibility,time.
void write_trace_csv(std::ostream& os, const RunRecord& run);

/// min(beta_FR, beta_D). Returns 0 when the Dai denominator is nonpositive or
/// the previous gradient vanishes.
double cg_beta(const TangentVector& grad_new, const TangentVector& grad_old, const TangentVector& dir_old,
               const TangentVector& dir_transported);

/// <S,S> / |<S,V>| clamped to [alpha_min, alpha_max]; alpha_max when <S,V> = 0.
double bb_steplength(const Tensor3d& s, const Tensor3d& v, double alpha_min, double alpha_max);

struct LineSearchResult {
  double alpha;
  StiefelPoint point;
  double value;
  int backtracks;
};

/// Smallest m with f(R_X(lambda^m alpha_init Z)) <= max(f_k, f_prev) + delta alpha <grad, Z>.
/// Throws LineSearchStalled once the trial step drops below alpha_min.
LineSearchResult nonmonotone_linesearch(const Objective& f, const TangentVector& z, double slope, double alpha_init,
                                        double f_k, double f_prev, const SolverConfig& cfg);

/// Iterates Algorithm-1 steps one at a time.
class CgStepper {
 public:
  CgStepper(const Objective& f, StiefelPoint x0, SolverConfig cfg);

  /// One CG iteration. Sets termination() when a stopping test fires.
  const IterationRecord& step();
  /// Re-evaluates f and grad at the current point after the objective changed
  /// and forgets f(X_{k-1}). The search direction and steplength are kept.
  void refresh();

  bool done() const { return run_.termination != Termination::None; }
  const StiefelPoint& point() const { return x_; }
  double value() const { return f_; }
  const TangentVector& gradient() const { return g_; }
  const RunRecord& record() const { return run_; }
  RunRecord take_record() { return std::move(run_); }

 private:
  double elapsed() const;

  const Objective& obj_;
  SolverConfig cfg_;
  StiefelPoint x_;
  double f_, f_prev_;
  TangentVector g_, z_;
  double alpha_;
  RunRecord run_;
  std::int64_t start_ns_;
};

struct SolveResult {
  StiefelPoint x;
  RunRecord record;
};

/// Riemannian nonmonotone CG from X0 until a stopping test fires.
SolveResult solve(const Objective& f, const StiefelPoint& x0, const SolverConfig& cfg);

}  // namespace tstiefel
