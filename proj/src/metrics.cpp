#include "csp/metrics.hpp"

#include <cmath>
#include <limits>

namespace csp {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

PerformanceMatrix::PerformanceMatrix(int n_tasks)
    : n_(n_tasks),
      entries_(static_cast<std::size_t>(n_tasks) * n_tasks, kNaN),
      solo_(n_tasks, kNaN),
      reference_(n_tasks, kNaN) {
  if (n_tasks < 1) throw ConfigError("performance matrix needs >= 1 task");
}

void PerformanceMatrix::set_entry(int task, int stage, double value) {
  if (task < 0 || task >= n_ || stage < task || stage >= n_)
    throw InputError("matrix entry needs 0 <= task <= stage < N");
  entries_[static_cast<std::size_t>(task) * n_ + stage] = value;
}

double PerformanceMatrix::entry(int task, int stage) const {
  if (task < 0 || task >= n_ || stage < task || stage >= n_)
    throw InputError("matrix entry needs 0 <= task <= stage < N");
  const double v = entries_[static_cast<std::size_t>(task) * n_ + stage];
  if (std::isnan(v)) throw InputError("missing matrix entry");
  return v;
}

bool PerformanceMatrix::has_entry(int task, int stage) const {
  if (task < 0 || task >= n_ || stage < task || stage >= n_) return false;
  return !std::isnan(entries_[static_cast<std::size_t>(task) * n_ + stage]);
}

void PerformanceMatrix::set_solo(int task, double value) {
  if (task < 0 || task >= n_) throw InputError("solo task out of range");
  solo_[task] = value;
}

double PerformanceMatrix::solo(int task) const {
  if (task < 0 || task >= n_) throw InputError("solo task out of range");
  if (std::isnan(solo_[task])) throw InputError("missing solo column entry");
  return solo_[task];
}

bool PerformanceMatrix::has_solo(int task) const {
  return task >= 0 && task < n_ && !std::isnan(solo_[task]);
}

void PerformanceMatrix::set_reference(int task, double value) {
  if (task < 0 || task >= n_) throw InputError("reference task out of range");
  reference_[task] = value;
}

double PerformanceMatrix::reference(int task) const {
  if (task < 0 || task >= n_) throw InputError("reference task out of range");
  const double r = reference_[task];
  if (std::isnan(r)) throw InputError("missing reference entry");
  if (std::abs(r) < 1e-12)
    throw ConfigError("normalization reference is zero");
  return r;
}

void PerformanceMatrix::record(const EvalRecord& r) {
  if (r.stage == kSoloStage)
    set_solo(r.task, r.mean_return);
  else
    set_entry(r.task, r.stage, r.mean_return);
}

double average_performance(const PerformanceMatrix& m) {
  double acc = 0.0;
  for (int i = 0; i < m.tasks(); ++i)
    acc += m.entry(i, m.tasks() - 1) / m.reference(i);
  return acc / m.tasks();
}

double forgetting(const PerformanceMatrix& m) {
  double acc = 0.0;
  for (int i = 0; i < m.tasks(); ++i)
    acc += (m.entry(i, i) - m.entry(i, m.tasks() - 1)) / m.reference(i);
  return acc / m.tasks();
}

double forward_transfer(const PerformanceMatrix& m) {
  double acc = 0.0;
  for (int i = 0; i < m.tasks(); ++i)
    acc += (m.entry(i, i) - m.solo(i)) / m.reference(i);
  return acc / m.tasks();
}

double model_size(MethodId id, int n_tasks, int anchors) {
  switch (id) {
    case MethodId::Ft1: return 1.0;
    case MethodId::FtL2: return 2.0;
    case MethodId::Ewc: return 3.0;
    case MethodId::SacN:
    case MethodId::FtN: return static_cast<double>(n_tasks);
    case MethodId::Csp:
    case MethodId::CspLinear:
    case MethodId::CspOracle: return static_cast<double>(anchors);
  }
  throw ConfigError("unknown method id");
}

std::vector<GrowthRow> growing_factor(
    const std::vector<std::vector<GrowDecision>>& logs,
    std::span<const double> epsilons) {
  std::vector<GrowthRow> table;
  table.reserve(epsilons.size());
  for (double eps : epsilons) {
    double acc = 0.0;
    for (const auto& log : logs) {
      int anchors = 1;
      for (const GrowDecision& d : log)
        if (d.w_new > (1.0 + eps) * d.w_old) anchors += 1;
      acc += static_cast<double>(anchors) / (1.0 + log.size());
    }
    table.push_back({eps, logs.empty() ? 0.0 : acc / logs.size()});
  }
  return table;
}

}  // namespace csp
