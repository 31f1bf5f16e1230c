#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "csp/sac.hpp"

namespace csp {

using AlphaWeights = std::vector<double>;

bool is_simplex(std::span<const double> alpha, double tol = 1e-9);
AlphaWeights one_hot(int m, int index);
AlphaWeights zero_pad(std::span<const double> alpha, int m);

// Ordered anchor set sharing one signature. All anchors are frozen except,
// during growth, the most recently added one.
struct Subspace {
  ArchSignature signature;
  std::vector<ParamVector> anchors;

  int size() const { return static_cast<int>(anchors.size()); }
  bool empty() const { return anchors.empty(); }

  // Sum_i alpha_i * theta_i, elementwise, summed left to right in anchor
  // order. One-hot weights recover the anchor bit-exactly, and appending a
  // zero weight never changes the result.
  ParamVector combine(std::span<const double> alpha) const;
  void combine_into(std::span<const double> alpha,
                    std::vector<double>& out) const;
};

enum class AlphaMode { Mixture, Flat, Peaked };

// Mixture: with probability 1/2 a flat Dirichlet over the m_new-simplex, else
// a flat Dirichlet over the old m_old-face zero-padded to m_new. Flat/Peaked:
// symmetric Dirichlet with concentration 1 or 1/m_new. Draws normalize
// independent Gamma(concentration, 1) samples.
AlphaWeights sample_alpha(int m_old, int m_new, AlphaMode mode, Rng& rng);

// Appends a trainable anchor initialized to the elementwise mean of the
// existing anchors. Prior anchors are never touched.
void grow(Subspace& subspace, int alpha_max = 16);

struct PolicyEntry {
  std::string task_name;
  AlphaWeights alpha;
  double reference = std::numeric_limits<double>::quiet_NaN();
};

// Best-found policy per past task; alphas are immutable except for
// zero-padding when the subspace extends.
struct PolicyRegistry {
  std::vector<PolicyEntry> entries;

  int size() const { return static_cast<int>(entries.size()); }
  void pad_all(int m);
};

// Uniform (s, a) pair indices for W estimation; paired across every candidate
// compared in one decision. `with_replacement = false` requires n <= size and
// returns sorted indices.
std::vector<long> sample_pairs(const ReplayBuffer& buffer, int n_pairs,
                               Rng& rng, bool with_replacement = true);

// W(alpha): critic mean over the given buffer pairs.
double estimate_W(const ParamVector& critic, const ReplayBuffer& buffer,
                  std::span<const double> alpha,
                  std::span<const long> pair_idx);

struct GrowDecision {
  double w_new = 0.0;
  double w_old = 0.0;
  double epsilon = 0.0;
  bool extended = false;
};

// extended iff w_new > (1 + epsilon) * w_old, strictly. Logs a warning to
// stderr when w_old < 0 (the multiplicative rule flips meaning there).
GrowDecision decide(double w_new, double w_old, double epsilon);

struct BestAlphaOptions {
  int n_candidates = 256;  // per face
  int n_pairs = 1024;
  int top_k = 8;  // rollout refinement size; 0 disables refinement
  const TaskSpec* rollout_task = nullptr;
  std::uint64_t rollout_seed = 0;
};

struct BestAlphaResult {
  AlphaWeights alpha_old;  // length = subspace size, trailing zero
  AlphaWeights alpha_new;  // length = subspace size
  double w_old = 0.0;
  double w_new = 0.0;
};

// Per-face argmax of W over sampled flat-Dirichlet candidates plus the forced
// candidates (stored task alphas and the newest vertex), all estimated on one
// shared pair sample. With a rollout task, the top-k of each face are
// re-ranked by one deterministic rollout and the rollout-best is returned.
BestAlphaResult best_alpha(const ParamVector& critic,
                           const ReplayBuffer& buffer, const Subspace& subspace,
                           const PolicyRegistry& registry, int m_old, Rng& rng,
                           const BestAlphaOptions& opts = {});

// Keeps or drops the grown anchor and updates the registry: on extension all
// stored alphas are zero-padded and alpha_new is stored; on pruning the new
// anchor is dropped and alpha_old (trimmed) is stored.
void commit(Subspace& subspace, PolicyRegistry& registry,
            const GrowDecision& decision, const AlphaWeights& alpha_new,
            const AlphaWeights& alpha_old, const std::string& task_name);

// ActorSource over a subspace whose last anchor is trainable. Frozen-anchor
// combinations are cached per alpha prefix for the lifetime of the source.
class SubspaceActorSource final : public ActorSource {
 public:
  explicit SubspaceActorSource(Subspace& subspace);
  int alpha_dim() const override;
  const ParamVector& trainable() const override;
  ParamVector& trainable() override;
  const ParamVector& params_for(std::span<const double> alpha) override;
  double trainable_weight(std::span<const double> alpha) const override;

 private:
  Subspace& subspace_;
  std::unordered_map<std::string, std::vector<double>> frozen_cache_;
  ParamVector combined_;
};

struct CspConfig {
  double epsilon = 0.1;
  int alpha_max = 16;
  AlphaMode sample_mode = AlphaMode::Mixture;
  bool refine = true;  // top-k rollout refinement in best_alpha
  int n_candidates = 256;
  int n_pairs = 1024;
  int top_k = 8;
  SacConfig sac;
};

struct TaskOutcome {
  bool first_task = false;
  std::optional<GrowDecision> decision;
  AlphaWeights selected_alpha;
  long env_steps = 0;
  long grad_updates = 0;
};

// One full CSP task: grow, train the new anchor under mixture-sampled alphas,
// estimate the best policies of both faces, decide, commit. The task buffer
// and critic are discarded afterwards. `state` keeps the final critic so
// callers may export landscapes. RNG streams derive from (run_seed,
// task_index) only, so a first task matches a solo SAC run bit for bit.
TaskOutcome csp_learn_task(Subspace& subspace, PolicyRegistry& registry,
                           SacState& state, const TaskSpec& task,
                           const CspConfig& cfg, std::uint64_t run_seed,
                           int task_index,
                           std::shared_ptr<ReplayBuffer>* buffer_handle = nullptr);

}  // namespace csp
