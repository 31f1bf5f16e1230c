#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "csp/subspace.hpp"

namespace csp {

// All (i/n, j/n, k/n) with i+j+k = n, lexicographic in (i, j);
// count = (n+1)(n+2)/2.
std::vector<std::array<double, 3>> barycentric_grid3(int n);
long barycentric_count(int n);

struct LandscapeRow {
  std::array<double, 3> alpha{};
  double mc_return = 0.0;
  double critic_w = 0.0;
};

struct LandscapeOptions {
  int grid_n = 127;  // 8256 points; CI-sized grids pass 8 (45 points)
  int mc_rollouts = 10;
  int n_pairs = 1024;
  long critic_train_steps = 20000;
  std::uint64_t seed = 0;
};

// Trains a subspace critic on the task with every anchor frozen (flat
// Dirichlet alphas, actor updates disabled); returns the critic and, through
// `out_buffer`, the replay buffer it was trained on.
ParamVector train_frozen_critic(const Subspace& subspace, const TaskSpec& task,
                                SacConfig cfg, std::uint64_t seed,
                                std::shared_ptr<ReplayBuffer>* out_buffer);

// One row per grid point: alpha, Monte-Carlo mean return over deterministic
// rollouts, and the critic's W over shared buffer pairs. Requires exactly 3
// anchors. With `critic == nullptr` a critic is trained in place and its
// buffer supplies the pairs; otherwise pairs come from n_pairs random-policy
// environment steps.
std::vector<LandscapeRow> export_landscape(const Subspace& subspace,
                                           const TaskSpec& task,
                                           const ParamVector* critic,
                                           const SacConfig& sac,
                                           const LandscapeOptions& opts);

void write_landscape_csv(const std::filesystem::path& path,
                         const std::vector<LandscapeRow>& rows);

}  // namespace csp
