#include "tstiefel/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "tstiefel/random.hpp"

namespace tstiefel {

void ExperimentConfig::validate() const {
  if (families.empty()) throw InvalidArgument("ExperimentConfig: no problem family");
  if (retractions.empty()) throw InvalidArgument("ExperimentConfig: no retraction");
  if (trials < 1) throw InvalidArgument("ExperimentConfig: trials must be >= 1");
  if (threads < 0) throw InvalidArgument("ExperimentConfig: threads must be >= 0");
  params.validate();
  for (Retraction r : retractions) {
    SolverConfig s = solver;
    s.retraction = r;
    s.transport = transport;
    s.validate();
  }
}

std::uint64_t instance_seed(std::uint64_t master, Family f, int trial) {
  return derive_seed(derive_seed(master, static_cast<std::uint64_t>(f)), 2 * static_cast<std::uint64_t>(trial));
}

std::uint64_t start_seed(std::uint64_t master, Family f, int trial) {
  return derive_seed(derive_seed(master, static_cast<std::uint64_t>(f)), 2 * static_cast<std::uint64_t>(trial) + 1);
}

int effective_threads(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* cap = std::getenv("TSTIEFEL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(cap, &end, 10);
    if (end == cap || *end != '\0' || v < 1) throw InvalidArgument("TSTIEFEL_THREADS must be a positive integer");
    n = std::min<long>(n, v);
  }
  return n;
}

namespace {

// All retraction arms of one (family, trial) cell, written into `out`.
void run_cell(const ExperimentConfig& cfg, Family family, int trial, TrialRecord* out) {
  ProblemParams params = cfg.params;
  params.family = family;
  const std::uint64_t seed = instance_seed(cfg.seed, family, trial);
  for (std::size_t a = 0; a < cfg.retractions.size(); ++a) {
    TrialRecord& rec = out[a];
    rec.family = family;
    rec.retraction = cfg.retractions[a];
    rec.transport = cfg.transport;
    rec.trial = trial;
    rec.instance_seed = seed;
  }
  try {
    const Instance inst = generate(params, seed);
    const StiefelPoint u0 = random_point(params.n, params.k, params.l, start_seed(cfg.seed, family, trial));
    for (std::size_t a = 0; a < cfg.retractions.size(); ++a) {
      TrialRecord& rec = out[a];
      SolverConfig solver = cfg.solver;
      solver.retraction = rec.retraction;
      solver.transport = rec.transport;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        TrialResult res = run_trial(inst, u0, solver, cfg.alternating);
        rec.time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.metrics = res.metrics;
        rec.iterations = res.record.iteration_count();
        rec.record = std::move(res.record);
        rec.ok = true;
        if (!cfg.record_time) {
          rec.time = 0;
          for (IterationRecord& it : rec.record.iterations) it.time = 0;
        }
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
    }
  } catch (const std::exception& e) {
    for (std::size_t a = 0; a < cfg.retractions.size(); ++a) out[a].error = e.what();
  }
}

double mean_or_nan(double sum, int count) {
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::function<void(const TrialRecord&)>& on_trial) {
  cfg.validate();
  const std::size_t arms = cfg.retractions.size();
  const std::size_t cells = cfg.families.size() * static_cast<std::size_t>(cfg.trials);
  ExperimentResult result;
  result.trials.resize(cells * arms);

  std::atomic<std::size_t> next{0};
  std::mutex report;
  const auto worker = [&] {
    for (std::size_t c; (c = next.fetch_add(1)) < cells;) {
      const Family family = cfg.families[c / cfg.trials];
      const int trial = static_cast<int>(c % cfg.trials);
      TrialRecord* out = result.trials.data() + c * arms;
      run_cell(cfg, family, trial, out);
      if (on_trial) {
        std::lock_guard lock(report);
        for (std::size_t a = 0; a < arms; ++a) on_trial(out[a]);
      }
    }
  };
  const int threads = std::min<std::size_t>(effective_threads(cfg.threads), cells);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  result.summary = summarize(result.trials);
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& trials) {
  struct Acc {
    SummaryRow row;
    int re_count = 0;
  };
  std::vector<Acc> acc;
  for (const TrialRecord& t : trials) {
    auto it = std::find_if(acc.begin(), acc.end(), [&](const Acc& a) {
      return a.row.family == t.family && a.row.retraction == t.retraction;
    });
    if (it == acc.end()) {
      acc.push_back({});
      it = std::prev(acc.end());
      it->row.family = t.family;
      it->row.retraction = t.retraction;
    }
    SummaryRow& r = it->row;
    if (!t.ok) {
      ++r.failed;
      continue;
    }
    ++r.succeeded;
    r.obj += t.metrics.objective;
    r.iter += t.iterations;
    r.time += t.time;
    r.feasi += t.metrics.feasibility;
    if (!std::isnan(t.metrics.re)) {
      r.re += t.metrics.re;
      ++it->re_count;
    }
  }
  std::vector<SummaryRow> rows;
  for (Acc& a : acc) {
    SummaryRow r = a.row;
    r.obj = mean_or_nan(r.obj, r.succeeded);
    r.iter = mean_or_nan(r.iter, r.succeeded);
    r.time = mean_or_nan(r.time, r.succeeded);
    r.feasi = mean_or_nan(r.feasi, r.succeeded);
    r.re = mean_or_nan(r.re, a.re_count);
    rows.push_back(r);
  }
  return rows;
}

void write_trials_jsonl(std::ostream& os, const std::vector<TrialRecord>& trials) {
  for (const TrialRecord& t : trials) {
    nlohmann::json tags = {{"family", to_string(t.family)},
                           {"retraction", to_string(t.retraction)},
                           {"transport", to_string(t.transport)},
                           {"trial", t.trial},
                           {"seed", t.instance_seed}};
    if (!t.ok) {
      tags["error"] = t.error;
      os << tags.dump() << '\n';
      continue;
    }
    write_jsonl(os, t.record, tags);
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "family,retraction,obj,re,iter,time,feasi,succeeded,failed\n";
  const auto old = os.precision(17);
  for (const SummaryRow& r : rows)
    os << to_string(r.family) << ',' << to_string(r.retraction) << ',' << r.obj << ',' << r.re << ',' << r.iter << ','
       << r.time << ',' << r.feasi << ',' << r.succeeded << ',' << r.failed << '\n';
  os.precision(old);
}

}  // namespace tstiefel
