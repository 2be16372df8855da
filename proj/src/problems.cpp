#include "tstiefel/problems.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "tstiefel/io.hpp"

namespace tstiefel {

namespace {

Tensor3d tt(const Tensor3d& a) { return t_transpose(a); }

// A * U with A given by its DFT.
Tensor3d apply_spectral(const SpectralTensor3& a_hat, const Tensor3d& u) {
  return idft(spectral_product(a_hat, dft(u)));
}

Tensor3d random_fdiag(Index p, Index l, Rng& rng) {
  Tensor3d w(p, p, l);
  const Tensor3d d = randn(p, 1, l, rng);
  for (Index k = 0; k < l; ++k)
    for (Index i = 0; i < p; ++i) w(i, i, k) = d(i, 0, k);
  return w;
}

void require_positive(Index v, const char* name) {
  if (v < 1) throw InvalidArgument(std::string("ProblemParams: ") + name + " must be positive");
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::BestApprox: return "best-approx";
    case Family::MissingEntries: return "missing-entries";
    case Family::JointFDiag: return "joint-fdiag";
    case Family::SparsePca: return "sparse-pca";
  }
  return "unknown";
}

Family parse_family(const std::string& s) {
  for (Family f : {Family::BestApprox, Family::MissingEntries, Family::JointFDiag, Family::SparsePca})
    if (s == to_string(f)) return f;
  throw InvalidArgument("unknown problem family '" + s + "'");
}

void ProblemParams::validate() const {
  require_positive(n, "n");
  require_positive(p, "p");
  require_positive(l, "l");
  require_positive(k, "k");
  if (k > n || p > n) throw InvalidArgument("ProblemParams: need k <= n and p <= n");
  if (samples < 1) throw InvalidArgument("ProblemParams: samples must be positive");
  if (!(noise >= 0)) throw InvalidArgument("ProblemParams: noise must be nonnegative");
  if (!(rho > 0)) throw InvalidArgument("ProblemParams: rho must be positive");
  if (!(missing >= 0 && missing < 1)) throw InvalidArgument("ProblemParams: missing ratio must lie in [0, 1)");
}

Family family_of(const Instance& inst) {
  return std::visit(
      [](const auto& i) {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, BestApproxInstance>) return Family::BestApprox;
        else if constexpr (std::is_same_v<T, MissingEntriesInstance>) return Family::MissingEntries;
        else if constexpr (std::is_same_v<T, JointFDiagInstance>) return Family::JointFDiag;
        else return Family::SparsePca;
      },
      inst);
}

// ---------------------------------------------------------------- generators

BestApproxInstance make_best_approx(Index n, Index k, Index l, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor3d v = randn(n, n, l, rng);
  return {sym_part(t_product(tt(v), v)), k};
}

Tensor3d symmetric_mask(Index n, Index l, double missing, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Tensor3d omega(n, n, l);
  Tensor3d seen(n, n, l);
  for (Index s = 0; s < l; ++s)
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) {
        if (seen(i, j, s) != 0) continue;
        const Index s_mirror = (l - s) % l;
        const double keep = unif(rng) >= missing ? 1.0 : 0.0;
        omega(i, j, s) = omega(j, i, s_mirror) = keep;
        seen(i, j, s) = seen(j, i, s_mirror) = 1;
      }
  return omega;
}

MissingEntriesInstance make_missing_entries(Index n, Index p, Index l, Index k, double missing, std::uint64_t seed) {
  Rng rng(seed);
  MissingEntriesInstance inst;
  inst.x = random_point(n, p, l, derive_seed(seed, 0)).value();
  inst.w = sym_part(random_fdiag(p, l, rng));
  inst.a = sym_part(t_product(inst.x, inst.w, tt(inst.x)));
  inst.omega = symmetric_mask(n, l, missing, rng);
  inst.k = k;
  return inst;
}

JointFDiagInstance make_joint_fdiag(Index n, Index p, Index l, Index k, int samples, double noise,
                                    std::uint64_t seed) {
  Rng rng(seed);
  JointFDiagInstance inst;
  inst.x = random_point(n, p, l, derive_seed(seed, 0)).value();
  inst.k = k;
  for (int i = 0; i < samples; ++i) {
    Tensor3d c = sym_part(random_fdiag(p, l, rng));
    const Tensor3d e = sym_part(randn(n, n, l, rng));
    inst.a.push_back(sym_part(t_product(inst.x, c, tt(inst.x)) + (noise / e.norm()) * e));
    inst.c.push_back(std::move(c));
  }
  return inst;
}

SparsePcaInstance make_sparse_pca(Index n, Index p, Index l, Index k, double rho, std::uint64_t seed) {
  Rng rng(seed);
  return {randn(n, p, l, rng), rho, k};
}

Instance generate(const ProblemParams& params, std::uint64_t seed) {
  params.validate();
  const auto& q = params;
  switch (q.family) {
    case Family::BestApprox: return make_best_approx(q.n, q.k, q.l, seed);
    case Family::MissingEntries: return make_missing_entries(q.n, q.p, q.l, q.k, q.missing, seed);
    case Family::JointFDiag: return make_joint_fdiag(q.n, q.p, q.l, q.k, q.samples, q.noise, seed);
    case Family::SparsePca: return make_sparse_pca(q.n, q.p, q.l, q.k, q.rho, seed);
  }
  throw InvalidArgument("generate: unknown family");
}

// ---------------------------------------------------------------- objectives

BestApproxObjective::BestApproxObjective(const BestApproxInstance& inst)
    : a_hat_(dft(inst.a + tt(inst.a))), k_(inst.k) {}

// -trace(U^T*A*U) = -l <U, A*U> = -(l/2) <U, (A + A^T)*U>.
double BestApproxObjective::value(const Tensor3d& u) const {
  return -0.5 * static_cast<double>(u.slices()) * inner(u, apply_spectral(a_hat_, u));
}

Tensor3d BestApproxObjective::euclidean_gradient(const Tensor3d& u) const {
  return -static_cast<double>(u.slices()) * apply_spectral(a_hat_, u);
}

MissingEntriesObjective::MissingEntriesObjective(const MissingEntriesInstance& inst, Tensor3d s)
    : a_(inst.a), omega_(inst.omega), s_(std::move(s)) {
  if (!omega_.same_shape(a_)) throw DimensionMismatch("MissingEntriesObjective: mask and data shapes differ");
}

void MissingEntriesObjective::set_s(Tensor3d s) { s_ = std::move(s); }

Tensor3d MissingEntriesObjective::residual(const Tensor3d& u, const Tensor3d& s) const {
  const bool hit = cache_.r.size() > 0 && cache_.u.same_shape(u) && cache_.s.same_shape(s) &&
                   cache_.u.vec() == u.vec() && cache_.s.vec() == s.vec();
  if (!hit) {
    const SpectralTensor3 u_hat = dft(u), s_hat = dft(s);
    Tensor3d r = idft(spectral_from_half(u.rows(), u.rows(), u.slices(), [&](Index k) {
      return Eigen::MatrixXcd(u_hat.slice(k) * s_hat.slice(k) * u_hat.slice(k).adjoint());
    }));
    r -= a_;
    r.vec().array() *= omega_.vec().array();
    cache_ = {u, s, std::move(r)};
  }
  return cache_.r;
}

double MissingEntriesObjective::value(const Tensor3d& u, const Tensor3d& s) const {
  return residual(u, s).squaredNorm();
}

double MissingEntriesObjective::value(const Tensor3d& u) const { return value(u, s_); }

Tensor3d MissingEntriesObjective::euclidean_gradient(const Tensor3d& u) const {
  const SpectralTensor3 r_hat = dft(residual(u, s_)), u_hat = dft(u), s_hat = dft(s_);
  return 2.0 * idft(spectral_from_half(u.rows(), u.cols(), u.slices(), [&](Index k) {
           const Eigen::MatrixXcd ru = r_hat.slice(k) * u_hat.slice(k);
           const Eigen::MatrixXcd rtu = r_hat.slice(k).adjoint() * u_hat.slice(k);
           return Eigen::MatrixXcd(ru * s_hat.slice(k).adjoint() + rtu * s_hat.slice(k));
         }));
}

Tensor3d MissingEntriesObjective::gradient_s(const Tensor3d& u, const Tensor3d& s) const {
  return 2.0 * t_product(tt(u), residual(u, s), u);
}

// Masking the diagonal commutes with the tube DFT, so off(U^T*A*U) is formed
// slicewise in the Fourier domain.
namespace {

Eigen::MatrixXcd spectral_off(const SpectralTensor3& a_hat, const SpectralTensor3& u_hat, Index k) {
  Eigen::MatrixXcd m = u_hat.slice(k).adjoint() * a_hat.slice(k) * u_hat.slice(k);
  m.diagonal().setZero();
  return m;
}

}  // namespace

JointFDiagObjective::JointFDiagObjective(const JointFDiagInstance& inst) {
  for (const Tensor3d& a : inst.a) {
    if (!a.same_shape(inst.a.front()))
      throw DimensionMismatch("JointFDiagObjective: inconsistent sample shapes");
    a_hat_.push_back(dft(a));
  }
}

double JointFDiagObjective::value(const Tensor3d& u) const {
  const SpectralTensor3 u_hat = dft(u);
  const Index l = u.slices();
  double f = 0;
  for (const SpectralTensor3& a_hat : a_hat_)
    for (Index k = 0; k < half_range(l); ++k) {
      const double weight = mirror_index(k, l) == k ? 1.0 : 2.0;
      f += weight * spectral_off(a_hat, u_hat, k).squaredNorm();
    }
  return f / static_cast<double>(l);
}

Tensor3d JointFDiagObjective::euclidean_gradient(const Tensor3d& u) const {
  const SpectralTensor3 u_hat = dft(u);
  return 2.0 * idft(spectral_from_half(u.rows(), u.cols(), u.slices(), [&](Index k) {
           Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(u.rows(), u.cols());
           for (const SpectralTensor3& a_hat : a_hat_) {
             const Eigen::MatrixXcd e = spectral_off(a_hat, u_hat, k);
             g.noalias() += a_hat.slice(k) * (u_hat.slice(k) * e.adjoint());
             g.noalias() += a_hat.slice(k).adjoint() * (u_hat.slice(k) * e);
           }
           return g;
         }));
}

SparsePcaObjective::SparsePcaObjective(const SparsePcaInstance& inst)
    : b_hat_(dft(sym_part(t_product(inst.a, tt(inst.a))))), rho_(inst.rho), k_(inst.k) {}

double SparsePcaObjective::smooth_value(const Tensor3d& u) const {
  return -static_cast<double>(u.slices()) * inner(u, apply_spectral(b_hat_, u));
}

Tensor3d SparsePcaObjective::smooth_gradient(const Tensor3d& u) const {
  return -2.0 * static_cast<double>(u.slices()) * apply_spectral(b_hat_, u);
}

double SparsePcaObjective::value(const Tensor3d& u) const {
  return smooth_value(u) + rho_ * u.vec().lpNorm<1>();
}

Tensor3d SparsePcaObjective::euclidean_gradient(const Tensor3d& u) const {
  Tensor3d g = smooth_gradient(u);
  g.vec() += rho_ * u.vec().unaryExpr([](double x) { return double((x > 0) - (x < 0)); });
  return g;
}

Tensor3d fd_gradient_oracle(const std::function<double(const Tensor3d&)>& f, const Tensor3d& x, double h) {
  Tensor3d g(x.rows(), x.cols(), x.slices());
  Tensor3d y = x;
  for (Index q = 0; q < x.size(); ++q) {
    const double x0 = y.vec()[q];
    y.vec()[q] = x0 + h;
    const double fp = f(y);
    y.vec()[q] = x0 - h;
    const double fm = f(y);
    y.vec()[q] = x0;
    g.vec()[q] = (fp - fm) / (2 * h);
  }
  return g;
}

// ---------------------------------------------------------------- drivers

namespace {

// Spectral data of a fixed U for the S subproblem, where every quantity is
// linear in S: R(S - tG) = R(S) - t Omega o (U*G*U^T).
class FixedU {
 public:
  FixedU(const Tensor3d& u, const Tensor3d& omega) : u_hat_(dft(u)), omega_(omega) {}

  Tensor3d masked_image(const Tensor3d& s) const {
    const SpectralTensor3 s_hat = dft(s);
    Tensor3d m = idft(spectral_from_half(u_hat_.rows(), u_hat_.rows(), u_hat_.slices(), [&](Index k) {
      return Eigen::MatrixXcd(u_hat_.slice(k) * s_hat.slice(k) * u_hat_.slice(k).adjoint());
    }));
    m.vec().array() *= omega_.vec().array();
    return m;
  }

  /// 2 U^T * R * U.
  Tensor3d gradient(const Tensor3d& r) const {
    const SpectralTensor3 r_hat = dft(r);
    return 2.0 * idft(spectral_from_half(u_hat_.cols(), u_hat_.cols(), u_hat_.slices(), [&](Index k) {
             return Eigen::MatrixXcd(u_hat_.slice(k).adjoint() * r_hat.slice(k) * u_hat_.slice(k));
           }));
  }

 private:
  SpectralTensor3 u_hat_;
  const Tensor3d& omega_;
};

}  // namespace

Tensor3d solve_s_subproblem(const MissingEntriesObjective& obj, const Tensor3d& u, Tensor3d s,
                            const AlternatingConfig& acfg, const SolverConfig& cfg) {
  const FixedU fixed(u, obj.mask());
  Tensor3d r = obj.residual(u, s);
  double f = r.squaredNorm(), f_prev = f;
  Tensor3d g = fixed.gradient(r);
  Tensor3d observed = obj.data();
  observed.vec().array() *= obj.mask().vec().array();
  const double g0 = observed.norm();
  Tensor3d best = s;
  double f_best = f;
  double t = cfg.alpha0;
  for (int step = 0; step < acfg.s_steps && g.norm() > acfg.s_tol * g0; ++step) {
    const double gg = g.squaredNorm();
    const double reference = std::max(f, f_prev);
    const Tensor3d q = fixed.masked_image(g);
    const double rq = inner(r, q), qq = q.squaredNorm();
    double trial = t;
    double f_new = 0;
    for (; trial >= cfg.alpha_min; trial *= cfg.lambda) {
      f_new = f - 2.0 * trial * rq + trial * trial * qq;
      if (f_new <= reference - cfg.delta * trial * gg) break;
    }
    if (trial < cfg.alpha_min) break;
    Tensor3d s_new = s - trial * g;
    r -= trial * q;
    f_new = r.squaredNorm();
    Tensor3d g_new = fixed.gradient(r);
    t = bb_steplength(s_new - s, g_new - g, cfg.alpha_min, std::numeric_limits<double>::max());
    f_prev = f;
    f = f_new;
    s = std::move(s_new);
    g = std::move(g_new);
    if (f < f_best) {
      f_best = f;
      best = s;
    }
  }
  return best;
}

AlternatingResult alternating_solve(const MissingEntriesInstance& inst, const StiefelPoint& u0,
                                    const SolverConfig& cfg, const AlternatingConfig& acfg) {
  // S0 = U0^T * (Omega o A) * U0: only observed entries are used.
  Tensor3d observed = inst.a;
  observed.vec().array() *= inst.omega.vec().array();
  MissingEntriesObjective obj(inst, t_product(tt(u0.value()), observed, u0.value()));
  CgStepper stepper(obj, u0, cfg);
  RunRecord run;
  run.iterations.push_back(stepper.record().iterations.front());
  const double n_sqrt = std::sqrt(static_cast<double>(u0.n()));

  while (true) {
    const Tensor3d u_old = stepper.point().value();
    const double f_old = stepper.value();
    IterationRecord rec = stepper.step();
    if (stepper.record().termination == Termination::LineSearchStalled) {
      run.termination = Termination::LineSearchStalled;
      break;
    }
    obj.set_s(solve_s_subproblem(obj, stepper.point().value(), obj.s(), acfg, cfg));
    stepper.refresh();

    rec.k = run.iteration_count() + 1;
    rec.objective = stepper.value();
    rec.grad_norm = stepper.gradient().norm();
    run.iterations.push_back(rec);

    const double dx = (stepper.point().value() - u_old).norm() / n_sqrt;
    const double df = std::abs(stepper.value() - f_old) / (1.0 + std::abs(f_old));
    if (dx < cfg.tol_x) run.termination = Termination::StepTolerance;
    else if (df < cfg.tol_f) run.termination = Termination::ObjectiveTolerance;
    else if (rec.k >= cfg.max_iter) run.termination = Termination::MaxIterations;
    if (run.termination != Termination::None) break;
  }
  run.stalls = stepper.record().stalls;
  return {stepper.point(), obj.s(), std::move(run)};
}

double missing_entries_error(const MissingEntriesInstance& inst, const Tensor3d& u, const Tensor3d& s) {
  return (t_product(inst.x, inst.w, tt(inst.x)) - t_product(u, s, tt(u))).norm() / inst.w.norm();
}

double joint_fdiag_error(const JointFDiagInstance& inst, const Tensor3d& u) {
  const Tensor3d uut = t_product(u, tt(u));
  double sum = 0;
  for (std::size_t i = 0; i < inst.a.size(); ++i)
    sum += (t_product(inst.x, inst.c[i], tt(inst.x)) - t_product(uut, inst.a[i], uut)).norm() / inst.c[i].norm();
  return sum / static_cast<double>(inst.a.size());
}

TrialResult run_trial(const Instance& inst, const StiefelPoint& u0, const SolverConfig& cfg,
                      const AlternatingConfig& acfg) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  return std::visit(
      [&](const auto& i) -> TrialResult {
        using T = std::decay_t<decltype(i)>;
        TrialResult out;
        if constexpr (std::is_same_v<T, MissingEntriesInstance>) {
          AlternatingResult r = alternating_solve(i, u0, cfg, acfg);
          out.u = r.u.value();
          out.s = std::move(r.s);
          out.record = std::move(r.record);
          out.metrics.re = missing_entries_error(i, out.u, out.s);
        } else {
          using Obj = std::conditional_t<std::is_same_v<T, BestApproxInstance>, BestApproxObjective,
                                         std::conditional_t<std::is_same_v<T, JointFDiagInstance>,
                                                            JointFDiagObjective, SparsePcaObjective>>;
          const Obj obj(i);
          SolveResult r = solve(obj, u0, cfg);
          out.u = r.x.value();
          out.record = std::move(r.record);
          if constexpr (std::is_same_v<T, JointFDiagInstance>)
            out.metrics.re = joint_fdiag_error(i, out.u);
          else
            out.metrics.re = nan;
        }
        out.metrics.objective = out.record.last().objective;
        out.metrics.feasibility = feasibility_defect(out.u);
        return out;
      },
      inst);
}

// ---------------------------------------------------------------- serialization

void save_instance(const std::string& stem, const Instance& inst, const ProblemParams& params, std::uint64_t seed) {
  nlohmann::json meta = {{"family", to_string(family_of(inst))},
                         {"seed", seed},
                         {"n", params.n},
                         {"p", params.p},
                         {"l", params.l},
                         {"k", params.k},
                         {"samples", params.samples},
                         {"noise", params.noise},
                         {"rho", params.rho},
                         {"missing", params.missing}};
  nlohmann::json files = nlohmann::json::object();
  const auto put = [&](const std::string& name, const Tensor3d& t) {
    const std::string path = stem + "." + name + ".tt3d";
    save_tt3d(path, t);
    files[name] = path.substr(path.find_last_of('/') + 1);
  };
  std::visit(
      [&](const auto& i) {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, BestApproxInstance> || std::is_same_v<T, SparsePcaInstance>) {
          put("a", i.a);
        } else if constexpr (std::is_same_v<T, MissingEntriesInstance>) {
          put("a", i.a);
          put("omega", i.omega);
          put("x", i.x);
          put("w", i.w);
        } else {
          put("x", i.x);
          for (std::size_t s = 0; s < i.a.size(); ++s) {
            put("a" + std::to_string(s), i.a[s]);
            put("c" + std::to_string(s), i.c[s]);
          }
        }
      },
      inst);
  meta["files"] = files;
  std::ofstream os(stem + ".json");
  if (!os) throw InvalidArgument("save_instance: cannot write " + stem + ".json");
  os << meta.dump(2) << '\n';
}

Instance load_instance(const std::string& stem, ProblemParams* params, std::uint64_t* seed) {
  std::ifstream is(stem + ".json");
  if (!is) throw InvalidArgument("load_instance: cannot read " + stem + ".json");
  const nlohmann::json meta = nlohmann::json::parse(is);
  const std::string dir = stem.find('/') == std::string::npos ? "" : stem.substr(0, stem.find_last_of('/') + 1);
  const auto get = [&](const std::string& name) { return load_tt3d(dir + meta.at("files").at(name).get<std::string>()); };

  ProblemParams q;
  q.family = parse_family(meta.at("family").get<std::string>());
  q.n = meta.at("n");
  q.p = meta.at("p");
  q.l = meta.at("l");
  q.k = meta.at("k");
  q.samples = meta.at("samples");
  q.noise = meta.at("noise");
  q.rho = meta.at("rho");
  q.missing = meta.at("missing");
  if (params) *params = q;
  if (seed) *seed = meta.at("seed");

  switch (q.family) {
    case Family::BestApprox: return BestApproxInstance{get("a"), q.k};
    case Family::SparsePca: return SparsePcaInstance{get("a"), q.rho, q.k};
    case Family::MissingEntries: return MissingEntriesInstance{get("a"), get("omega"), get("x"), get("w"), q.k};
    case Family::JointFDiag: {
      JointFDiagInstance inst{{}, {}, get("x"), q.k};
      for (int s = 0; s < q.samples; ++s) {
        inst.a.push_back(get("a" + std::to_string(s)));
        inst.c.push_back(get("c" + std::to_string(s)));
      }
      return inst;
    }
  }
  throw InvalidArgument("load_instance: unknown family");
}

}  // namespace tstiefel
