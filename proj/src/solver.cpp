#include "tstiefel/solver.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace tstiefel {

namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

void SolverConfig::validate() const {
  if (!(alpha_min > 0 && alpha_min <= alpha0 && alpha0 <= alpha_max))
    throw InvalidArgument("SolverConfig: need 0 < alpha_min <= alpha0 <= alpha_max");
  if (!(lambda > 0 && lambda < 1)) throw InvalidArgument("SolverConfig: lambda must lie in (0, 1)");
  if (!(delta > 0 && delta < 1)) throw InvalidArgument("SolverConfig: delta must lie in (0, 1)");
  if (!(tol_x >= 0 && tol_f >= 0)) throw InvalidArgument("SolverConfig: tolerances must be nonnegative");
  if (max_iter < 1) throw InvalidArgument("SolverConfig: max_iter must be positive");
  if (!compatible(retraction, transport))
    throw InvalidArgument("SolverConfig: transport " + to_string(transport) + " does not match retraction " +
                          to_string(retraction));
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::None: return "running";
    case Termination::StepTolerance: return "step-tolerance";
    case Termination::ObjectiveTolerance: return "objective-tolerance";
    case Termination::MaxIterations: return "max-iterations";
    case Termination::LineSearchStalled: return "line-search-stalled";
  }
  return "unknown";
}

bool RunRecord::nonmonotone_bound_holds(double delta, double slack) const {
  for (std::size_t i = 1; i < iterations.size(); ++i) {
    const IterationRecord& r = iterations[i];
    if (r.objective > r.reference + delta * r.alpha * r.slope + slack) return false;
  }
  return true;
}

nlohmann::json to_json(const IterationRecord& r) {
  return {{"k", r.k},
          {"objective", r.objective},
          {"grad_norm", r.grad_norm},
          {"alpha", r.alpha},
          {"backtracks", r.backtracks},
          {"beta", r.beta},
          {"reference", r.reference},
          {"slope", r.slope},
          {"feasibility", r.feasibility},
          {"time", r.time},
          {"restarted", r.restarted}};
}

void write_jsonl(std::ostream& os, const RunRecord& run, const nlohmann::json& tags) {
  for (const IterationRecord& r : run.iterations) {
    nlohmann::json j = tags;
    j.update(to_json(r));
    if (&r == &run.iterations.back()) j["termination"] = to_string(run.termination);
    os << j.dump() << '\n';
  }
}

void write_trace_csv(std::ostream& os, const RunRecord& run) {
  os << "k,objective,grad_norm,alpha,backtracks,feasibility,time\n";
  const auto old = os.precision(17);
  for (const IterationRecord& r : run.iterations)
    os << r.k << ',' << r.objective << ',' << r.grad_norm << ',' << r.alpha << ',' << r.backtracks << ','
       << r.feasibility << ',' << r.time << '\n';
  os.precision(old);
}

double cg_beta(const TangentVector& grad_new, const TangentVector& grad_old, const TangentVector& dir_old,
               const TangentVector& dir_transported) {
  const double gg_new = inner(grad_new, grad_new);
  const double gg_old = inner(grad_old, grad_old);
  const double slope_old = inner(grad_old, dir_old);
  const double denom = std::max(inner(grad_new, dir_transported) - slope_old, -slope_old);
  if (gg_old == 0.0 || !(denom > 0.0)) return 0.0;
  return std::min(gg_new / gg_old, gg_new / denom);
}

double bb_steplength(const Tensor3d& s, const Tensor3d& v, double alpha_min, double alpha_max) {
  const double sv = std::abs(inner(s, v));
  if (sv == 0.0) return alpha_max;
  return std::max(std::min(inner(s, s) / sv, alpha_max), alpha_min);
}

LineSearchResult nonmonotone_linesearch(const Objective& f, const TangentVector& z, double slope, double alpha_init,
                                        double f_k, double f_prev, const SolverConfig& cfg) {
  const double reference = std::max(f_k, f_prev);
  double alpha = alpha_init;
  for (int m = 0; alpha >= cfg.alpha_min; ++m, alpha *= cfg.lambda) {
    StiefelPoint y = retract(cfg.retraction, alpha * z);
    const double fy = f.value(y.value());
    if (fy <= reference + cfg.delta * alpha * slope) return {alpha, std::move(y), fy, m};
  }
  throw LineSearchStalled("nonmonotone_linesearch: step fell below alpha_min");
}

CgStepper::CgStepper(const Objective& f, StiefelPoint x0, SolverConfig cfg)
    : obj_(f),
      cfg_(cfg),
      x_(std::move(x0)),
      f_(0),
      f_prev_(0),
      g_(make_tangent_unchecked(x_, Tensor3d(x_.n(), x_.p(), x_.l()))),
      z_(g_),
      alpha_(cfg.alpha0),
      start_ns_(now_ns()) {
  cfg_.validate();
  f_ = f_prev_ = obj_.value(x_.value());
  g_ = riemannian_gradient(x_, obj_.euclidean_gradient(x_.value()));
  z_ = -g_;
  IterationRecord r;
  r.objective = f_;
  r.grad_norm = g_.norm();
  r.feasibility = feasibility_defect(x_.value());
  r.time = elapsed();
  run_.iterations.push_back(r);
}

double CgStepper::elapsed() const { return 1e-9 * static_cast<double>(now_ns() - start_ns_); }

void CgStepper::refresh() {
  f_ = f_prev_ = obj_.value(x_.value());
  g_ = riemannian_gradient(x_, obj_.euclidean_gradient(x_.value()));
  run_.termination = Termination::None;
}

const IterationRecord& CgStepper::step() {
  if (done()) return run_.last();
  IterationRecord rec;
  rec.k = run_.iteration_count() + 1;

  double slope = inner(g_, z_);
  const auto restart = [&] {
    z_ = -g_;
    slope = -inner(g_, g_);
    rec.restarted = true;
  };
  if (!(slope < 0)) restart();

  std::optional<LineSearchResult> ls;
  for (int attempt = 0; attempt < 2 && !ls; ++attempt) {
    try {
      ls = nonmonotone_linesearch(obj_, z_, slope, alpha_, f_, f_prev_, cfg_);
    } catch (const LineSearchStalled&) {
      ++run_.stalls;
      if (rec.restarted) break;
      restart();
    }
  }
  if (!ls) {
    run_.termination = Termination::LineSearchStalled;
    return run_.last();
  }

  const StiefelPoint& y = ls->point;
  TangentVector g_new = riemannian_gradient(y, obj_.euclidean_gradient(y.value()));
  const TangentVector step = ls->alpha * z_;
  const TangentVector z_moved = transport(cfg_.transport, cfg_.retraction, step, z_, &y);
  const TangentVector g_moved = transport(cfg_.transport, cfg_.retraction, step, g_, &y);

  rec.beta = cg_beta(g_new, g_, z_, z_moved);
  TangentVector z_new = -g_new + rec.beta * z_moved;

  double alpha_next = cfg_.alpha0;
  if (cfg_.bb_steplength) {
    const Tensor3d s = -ls->alpha * g_moved.value();
    const Tensor3d v = g_new.value() + s / ls->alpha;
    alpha_next = bb_steplength(s, v, cfg_.alpha_min, cfg_.alpha_max);
  }

  const double dx = (y.value() - x_.value()).norm() / std::sqrt(static_cast<double>(x_.n()));
  const double df = std::abs(ls->value - f_) / (1.0 + std::abs(f_));

  rec.objective = ls->value;
  rec.grad_norm = g_new.norm();
  rec.alpha = ls->alpha;
  rec.backtracks = ls->backtracks;
  rec.reference = std::max(f_, f_prev_);
  rec.slope = slope;
  rec.feasibility = feasibility_defect(y.value());

  f_prev_ = f_;
  f_ = ls->value;
  x_ = y;
  g_ = std::move(g_new);
  z_ = std::move(z_new);
  alpha_ = alpha_next;

  if (dx < cfg_.tol_x)
    run_.termination = Termination::StepTolerance;
  else if (df < cfg_.tol_f)
    run_.termination = Termination::ObjectiveTolerance;
  else if (rec.k >= cfg_.max_iter)
    run_.termination = Termination::MaxIterations;

  rec.time = elapsed();
  run_.iterations.push_back(rec);
  return run_.last();
}

SolveResult solve(const Objective& f, const StiefelPoint& x0, const SolverConfig& cfg) {
  CgStepper stepper(f, x0, cfg);
  while (!stepper.done()) stepper.step();
  return {stepper.point(), stepper.take_record()};
}

}  // namespace tstiefel
