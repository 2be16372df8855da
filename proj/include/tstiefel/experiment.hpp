#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tstiefel/problems.hpp"

namespace tstiefel {

/// Seeded grid of families x trials x retractions.
struct ExperimentConfig {
  std::vector<Family> families = {Family::BestApprox, Family::MissingEntries, Family::JointFDiag, Family::SparsePca};
  ProblemParams params;  ///< family is taken from `families`
  std::vector<Retraction> retractions = {Retraction::QR, Retraction::Polar, Retraction::Cayley};
  Transport transport = Transport::Projection;
  SolverConfig solver;  ///< retraction and transport are overridden per arm
  AlternatingConfig alternating;
  int trials = 50;
  std::uint64_t seed = 1;
  /// 0 picks the hardware concurrency; TSTIEFEL_THREADS caps either choice.
  int threads = 0;
  /// False zeroes every time field so output is bitwise reproducible.
  bool record_time = true;

  /// Throws InvalidArgument on empty grids, trials < 1, bad parameters or an
  /// incompatible retraction/transport pair.
  void validate() const;
};

/// Instance and starting-point seeds of one (family, trial) cell:
/// s = derive_seed(master, family index), instance = derive_seed(s, 2 t), X0 = derive_seed(s, 2 t + 1).
std::uint64_t instance_seed(std::uint64_t master, Family f, int trial);
std::uint64_t start_seed(std::uint64_t master, Family f, int trial);

struct TrialRecord {
  Family family = Family::BestApprox;
  Retraction retraction = Retraction::QR;
  Transport transport = Transport::Projection;
  int trial = 0;
  std::uint64_t instance_seed = 0;
  bool ok = false;
  std::string error;  ///< set when !ok
  Metrics metrics;
  int iterations = 0;
  double time = 0;  ///< wall seconds of the solve
  RunRecord record;
};

/// Means over the successful trials of one (family, retraction) arm.
struct SummaryRow {
  Family family = Family::BestApprox;
  Retraction retraction = Retraction::QR;
  int succeeded = 0;
  int failed = 0;
  double obj = 0, re = 0, iter = 0, time = 0, feasi = 0;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;  ///< ordered by family, trial, retraction
  std::vector<SummaryRow> summary;  ///< ordered by family, retraction
};

/// Threads used for `requested` (0 = auto) after the TSTIEFEL_THREADS cap.
int effective_threads(int requested);

/// Runs the grid. Every retraction arm of a (family, trial) cell sees the same
/// instance and X0. Solver errors are recorded per trial, not thrown.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::function<void(const TrialRecord&)>& on_trial = {});

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& trials);

/// One JSON object per iteration, tagged with family, retraction, transport,
/// trial and seed. A failed trial yields one line with its error.
void write_trials_jsonl(std::ostream& os, const std::vector<TrialRecord>& trials);

/// Header family,retraction,obj,re,iter,time,feasi,succeeded,failed.
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

}  // namespace tstiefel
