#pragma once

#include <span>
#include <vector>

#include "csp/baselines.hpp"

namespace csp {

constexpr int kSoloStage = -1;

struct EvalRecord {
  int task = 0;
  int stage = 0;  // checkpoint stage (after training task `stage`) or kSoloStage
  double mean_return = 0.0;
  int n_eval = 1;
  std::uint64_t seed = 0;
};

// Raw returns P_i(pi_i^j) for j >= i plus the solo column and the per-task
// normalization reference (SAC-N returns). Metrics divide by the reference.
class PerformanceMatrix {
 public:
  explicit PerformanceMatrix(int n_tasks);

  int tasks() const { return n_; }
  void set_entry(int task, int stage, double value);
  double entry(int task, int stage) const;
  bool has_entry(int task, int stage) const;
  void set_solo(int task, double value);
  double solo(int task) const;
  bool has_solo(int task) const;
  void set_reference(int task, double value);
  double reference(int task) const;

  void record(const EvalRecord& r);

 private:
  double normalized(int task, int stage) const;
  friend double average_performance(const PerformanceMatrix&);
  friend double forgetting(const PerformanceMatrix&);
  friend double forward_transfer(const PerformanceMatrix&);

  int n_;
  std::vector<double> entries_;  // n x n, NaN = missing
  std::vector<double> solo_, reference_;
};

// (1/N) sum_i P_i(pi_i^N) / ref_i.
double average_performance(const PerformanceMatrix& m);

// (1/N) sum_i (P_i(pi_i^i) - P_i(pi_i^N)) / ref_i; positive means forgot.
double forgetting(const PerformanceMatrix& m);

// (1/N) sum_i (P_i(pi_i^i) - P_i(pi_i^{t_i})) / ref_i.
double forward_transfer(const PerformanceMatrix& m);

// Final parameter count in FT-1 units per the reporting convention.
double model_size(MethodId id, int n_tasks, int anchors);

struct GrowthRow {
  double epsilon = 0.0;
  double ratio = 0.0;  // mean final anchors / tasks over the replayed logs
};

// Replays recorded (w_new, w_old) decision logs across thresholds.
std::vector<GrowthRow> growing_factor(
    const std::vector<std::vector<GrowDecision>>& logs,
    std::span<const double> epsilons);

}  // namespace csp
