#pragma once

#include <span>
#include <vector>

#include "csp/common.hpp"

namespace csp {

// Bounded ring of (s, a, r, s', done, alpha) tuples, struct-of-arrays.
// Rewards are stored post reward-scaling. The alpha snapshot is the convex
// combination under which the transition was collected.
class ReplayBuffer {
 public:
  ReplayBuffer(int obs_dim, int act_dim, int alpha_dim, long capacity = 200000);

  void push(std::span<const double> obs, std::span<const double> action,
            double reward, std::span<const double> next_obs, bool done,
            std::span<const double> alpha);

  long size() const { return size_; }
  long capacity() const { return capacity_; }
  long inserted() const { return inserted_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  int alpha_dim() const { return alpha_dim_; }

  std::span<const double> obs(long i) const;
  std::span<const double> action(long i) const;
  std::span<const double> next_obs(long i) const;
  std::span<const double> alpha(long i) const;
  double reward(long i) const;
  bool done(long i) const;

  long sample_index(Rng& rng) const;

  // Poisons the buffer: any later read throws. Used to enforce that no data
  // from a finished task leaks into the next one.
  void invalidate();
  bool valid() const { return valid_; }

 private:
  void check_read(long i) const;

  int obs_dim_, act_dim_, alpha_dim_;
  long capacity_, size_ = 0, inserted_ = 0;
  bool valid_ = true;
  std::vector<double> obs_, act_, next_obs_, alpha_, reward_;
  std::vector<unsigned char> done_;
};

}  // namespace csp
