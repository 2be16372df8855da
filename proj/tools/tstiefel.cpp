// Command-line harness: seeded experiment grids, property suites, dimension
// queries and tensor decompositions.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "tstiefel/experiment.hpp"
#include "tstiefel/io.hpp"
#include "tstiefel/tlinalg.hpp"
#include "tstiefel/verify.hpp"

namespace fs = std::filesystem;
using namespace tstiefel;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAllTrialsFailed = 3;

struct RunOptions {
  std::string problem = "best-approx";
  std::string retraction = "qr";
  std::string transport = "projection";
  std::string out_jsonl, out_csv, trace_dir;
  bool single_threaded = false;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
  return os;
}

ExperimentConfig build_config(const ExperimentConfig& base, const RunOptions& o) {
  ExperimentConfig cfg = base;
  if (o.problem == "all")
    cfg.families = {Family::BestApprox, Family::MissingEntries, Family::JointFDiag, Family::SparsePca};
  else
    cfg.families = {parse_family(o.problem)};
  if (o.retraction == "all")
    cfg.retractions = {Retraction::QR, Retraction::Polar, Retraction::Cayley};
  else
    cfg.retractions = {parse_retraction(o.retraction)};
  cfg.transport = parse_transport(o.transport);
  if (o.single_threaded) {
    cfg.threads = 1;
    cfg.record_time = false;
  }
  cfg.validate();
  return cfg;
}

int run_command(const ExperimentConfig& cfg, const RunOptions& o) {
  const ExperimentResult res = run_experiment(cfg, [](const TrialRecord& t) {
    std::cerr << to_string(t.family) << ' ' << to_string(t.retraction) << " trial " << t.trial << ": ";
    if (t.ok)
      std::cerr << "obj=" << t.metrics.objective << " re=" << t.metrics.re << " iter=" << t.iterations
                << " feasi=" << t.metrics.feasibility << '\n';
    else
      std::cerr << "error: " << t.error << '\n';
  });
  if (!o.out_jsonl.empty()) {
    std::ofstream os = open_out(o.out_jsonl);
    write_trials_jsonl(os, res.trials);
  }
  if (!o.out_csv.empty()) {
    std::ofstream os = open_out(o.out_csv);
    write_summary_csv(os, res.summary);
  } else {
    write_summary_csv(std::cout, res.summary);
  }
  if (!o.trace_dir.empty()) {
    fs::create_directories(o.trace_dir);
    for (const TrialRecord& t : res.trials) {
      if (!t.ok) continue;
      std::ofstream os = open_out((fs::path(o.trace_dir) / (to_string(t.family) + "_" + to_string(t.retraction) +
                                                             "_" + std::to_string(t.trial) + ".csv"))
                                      .string());
      write_trace_csv(os, t.record);
    }
  }
  const auto failed = std::count_if(res.trials.begin(), res.trials.end(), [](const TrialRecord& t) { return !t.ok; });
  if (failed == static_cast<long>(res.trials.size())) return kExitAllTrialsFailed;
  return failed > 0 ? kExitFailure : 0;
}

int verify_command(const std::vector<std::string>& only, const std::string& fault, std::uint64_t seed) {
  VerifyOptions opt;
  opt.seed = seed;
  if (fault == "qr-phase")
    opt.qr_phase_fix = false;
  else if (!fault.empty())
    throw InvalidArgument("unknown fault '" + fault + "' (known: qr-phase)");
  const std::vector<std::string>& suites = only.empty() ? suite_names() : only;
  int failures = 0, total = 0;
  for (const std::string& s : suites)
    for (const Check& c : run_suite(s, opt)) {
      std::cout << format_check(c) << '\n';
      ++total;
      failures += c.passed ? 0 : 1;
    }
  std::cout << (total - failures) << "/" << total << " checks passed\n";
  return failures == 0 ? 0 : kExitFailure;
}

Tensor3d load_any(const std::string& path) {
  return fs::path(path).extension() == ".csv" ? load_tensor_csv(path) : load_tt3d(path);
}

void emit(const std::string& prefix, const std::string& name, const Tensor3d& t) {
  if (prefix.empty()) {
    std::cout << name << " (" << t.rows() << "x" << t.cols() << "x" << t.slices() << ")\n";
    write_tensor_csv(std::cout, t);
  } else {
    save_tt3d(prefix + name + ".tt3d", t);
  }
}

int decompose_command(const std::string& input, const std::string& kind, const std::string& prefix) {
  const Tensor3d a = load_any(input);
  Tensor3d recon;
  if (kind == "svd") {
    const TSvd f = t_svd(a);
    emit(prefix, "U", f.U);
    emit(prefix, "S", f.S);
    emit(prefix, "V", f.V);
    recon = t_product(f.U, f.S, t_transpose(f.V));
  } else if (kind == "qr") {
    const TQr f = t_qr(a);
    emit(prefix, "Q", f.Q);
    emit(prefix, "R", f.R);
    recon = t_product(f.Q, f.R);
  } else if (kind == "pd") {
    const TPolar f = t_polar(a);
    emit(prefix, "P", f.P);
    emit(prefix, "H", f.H);
    recon = t_product(f.P, f.H);
  } else {
    throw InvalidArgument("unknown decomposition '" + kind + "' (known: svd, qr, pd)");
  }
  std::cout << "relative residual " << (recon - a).norm() / std::max(a.norm(), 1e-300) << '\n';
  return 0;
}

// Fills options of `cmd` that were not given on the command line from a
// key=value file. Unknown keys are an error.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(path)) {
    const bool own_section = item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == cmd.get_name());
    CLI::Option* opt = own_section ? cmd.get_option_no_throw("--" + item.name) : nullptr;
    if (opt == nullptr || item.name == "config") throw CLI::ConfigError::Extras(item.fullname());
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimization on the tensor Stiefel manifold under the t-product"};
  app.require_subcommand(1);

  ExperimentConfig base;
  RunOptions ro;
  CLI::App* run = app.add_subcommand("run", "Run a seeded experiment grid and write per-trial and summary output");
  std::string config_path;
  run->add_option("--config", config_path, "key=value file of run options; command-line flags override it")
      ->check(CLI::ExistingFile);
  run->add_option("--problem", ro.problem, "best-approx, missing-entries, joint-fdiag, sparse-pca or all")
      ->capture_default_str();
  run->add_option("--n", base.params.n, "rows")->capture_default_str();
  run->add_option("--p", base.params.p, "rank of the ground truth")->capture_default_str();
  run->add_option("--l", base.params.l, "tube length")->capture_default_str();
  run->add_option("--k", base.params.k, "columns of the unknown U")->capture_default_str();
  run->add_option("--samples", base.params.samples, "tensors in joint f-diagonalization")->capture_default_str();
  run->add_option("--noise", base.params.noise, "noise norm in joint f-diagonalization")->capture_default_str();
  run->add_option("--rho", base.params.rho, "sparse PCA weight")->capture_default_str();
  run->add_option("--missing", base.params.missing, "missing-entries ratio")->capture_default_str();
  run->add_option("--retraction", ro.retraction, "qr, polar, cayley, exp or all (qr, polar, cayley)")
      ->capture_default_str();
  run->add_option("--transport", ro.transport,
                  "projection, qr-diff, polar-diff, cayley-diff or cayley-isometric")
      ->capture_default_str();
  run->add_option("--trials", base.trials, "trials per family")->capture_default_str();
  run->add_option("--seed", base.seed, "master seed")->capture_default_str();
  run->add_option("--threads", base.threads, "worker threads, 0 = all cores (TSTIEFEL_THREADS caps)")
      ->capture_default_str();
  run->add_flag("--single-threaded", ro.single_threaded, "one thread, time fields zeroed: bitwise reproducible");
  run->add_option("--max-iter", base.solver.max_iter, "solver iteration cap")->capture_default_str();
  run->add_option("--tol-x", base.solver.tol_x, "step tolerance")->capture_default_str();
  run->add_option("--tol-f", base.solver.tol_f, "objective tolerance")->capture_default_str();
  run->add_option("--alpha0", base.solver.alpha0, "initial steplength")->capture_default_str();
  run->add_option("--s-steps", base.alternating.s_steps, "S-subproblem steps per outer iteration")
      ->capture_default_str();
  run->add_option("--s-tol", base.alternating.s_tol, "S-subproblem gradient tolerance")->capture_default_str();
  run->add_option("--out-jsonl", ro.out_jsonl, "per-iteration records, one JSON object per line");
  run->add_option("--out-csv", ro.out_csv, "summary CSV (default: standard output)");
  run->add_option("--trace-dir", ro.trace_dir, "directory for one objective-trace CSV per trial");

  std::vector<std::string> only;
  std::string fault;
  std::uint64_t verify_seed = VerifyOptions{}.seed;
  CLI::App* verify = app.add_subcommand("verify", "Run the property suites and print one line per check");
  verify->add_option("--only", only, "suites to run")->delimiter(',')->check(CLI::IsMember(suite_names()));
  verify->add_option("--inject-fault", fault, "deliberate fault: qr-phase (t-QR without the phase fix)");
  verify->add_option("--seed", verify_seed, "suite seed")->capture_default_str();

  Index dn = 0, dp = 0, dl = 0;
  CLI::App* dim = app.add_subcommand("dim", "Print the dimension of St(n, p, l)");
  dim->add_option("--n", dn)->required();
  dim->add_option("--p", dp)->required();
  dim->add_option("--l", dl)->required();

  std::string input, kind = "svd", prefix;
  CLI::App* decompose = app.add_subcommand("decompose", "t-SVD, t-QR or t-PD of a tensor file (.tt3d or .csv)");
  decompose->add_option("input", input, "tensor file")->required()->check(CLI::ExistingFile);
  decompose->add_option("--kind", kind, "svd, qr or pd")->capture_default_str();
  decompose->add_option("--out-prefix", prefix, "write factors to PREFIX<name>.tt3d instead of standard output");

  try {
    app.parse(argc, argv);
    if (!config_path.empty()) apply_config_file(*run, config_path);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      ExperimentConfig cfg;
      try {
        cfg = build_config(base, ro);
      } catch (const Error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
      }
      return run_command(cfg, ro);
    }
    if (*verify) return verify_command(only, fault, verify_seed);
    if (*dim) {
      std::cout << manifold_dim(dn, dp, dl) << '\n';
      return 0;
    }
    if (*decompose) return decompose_command(input, kind, prefix);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
