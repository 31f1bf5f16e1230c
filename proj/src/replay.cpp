#include "csp/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace csp {

ReplayBuffer::ReplayBuffer(int obs_dim, int act_dim, int alpha_dim,
                           long capacity)
    : obs_dim_(obs_dim),
      act_dim_(act_dim),
      alpha_dim_(alpha_dim),
      capacity_(capacity) {
  if (obs_dim <= 0 || act_dim <= 0 || alpha_dim <= 0 || capacity <= 0)
    throw ConfigError("replay buffer dimensions must be positive");
  obs_.resize(static_cast<std::size_t>(capacity) * obs_dim);
  act_.resize(static_cast<std::size_t>(capacity) * act_dim);
  next_obs_.resize(static_cast<std::size_t>(capacity) * obs_dim);
  alpha_.resize(static_cast<std::size_t>(capacity) * alpha_dim);
  reward_.resize(capacity);
  done_.resize(capacity);
}

void ReplayBuffer::push(std::span<const double> obs,
                        std::span<const double> action, double reward,
                        std::span<const double> next_obs, bool done,
                        std::span<const double> alpha) {
  if (!valid_) throw std::logic_error("replay buffer used after task end");
  if (static_cast<int>(obs.size()) != obs_dim_ ||
      static_cast<int>(next_obs.size()) != obs_dim_ ||
      static_cast<int>(action.size()) != act_dim_ ||
      static_cast<int>(alpha.size()) != alpha_dim_)
    throw InputError("replay push: dimension mismatch");
  const long slot = inserted_ % capacity_;
  std::copy(obs.begin(), obs.end(), obs_.begin() + slot * obs_dim_);
  std::copy(action.begin(), action.end(), act_.begin() + slot * act_dim_);
  std::copy(next_obs.begin(), next_obs.end(),
            next_obs_.begin() + slot * obs_dim_);
  std::copy(alpha.begin(), alpha.end(), alpha_.begin() + slot * alpha_dim_);
  reward_[slot] = reward;
  done_[slot] = done ? 1 : 0;
  inserted_ += 1;
  size_ = std::min(inserted_, capacity_);
}

void ReplayBuffer::check_read(long i) const {
  if (!valid_) throw std::logic_error("replay buffer used after task end");
  if (i < 0 || i >= size_) throw InputError("replay read: index out of range");
}

std::span<const double> ReplayBuffer::obs(long i) const {
  check_read(i);
  return {obs_.data() + i * obs_dim_, static_cast<std::size_t>(obs_dim_)};
}
std::span<const double> ReplayBuffer::action(long i) const {
  check_read(i);
  return {act_.data() + i * act_dim_, static_cast<std::size_t>(act_dim_)};
}
std::span<const double> ReplayBuffer::next_obs(long i) const {
  check_read(i);
  return {next_obs_.data() + i * obs_dim_, static_cast<std::size_t>(obs_dim_)};
}
std::span<const double> ReplayBuffer::alpha(long i) const {
  check_read(i);
  return {alpha_.data() + i * alpha_dim_, static_cast<std::size_t>(alpha_dim_)};
}
double ReplayBuffer::reward(long i) const {
  check_read(i);
  return reward_[i];
}
bool ReplayBuffer::done(long i) const {
  check_read(i);
  return done_[i] != 0;
}

long ReplayBuffer::sample_index(Rng& rng) const {
  if (!valid_) throw std::logic_error("replay buffer used after task end");
  if (size_ == 0) throw InputError("replay sample: empty buffer");
  std::uniform_int_distribution<long> d(0, size_ - 1);
  return d(rng);
}

void ReplayBuffer::invalidate() {
  valid_ = false;
  obs_.clear();
  act_.clear();
  next_obs_.clear();
  alpha_.clear();
  reward_.clear();
  done_.clear();
  size_ = 0;
}

}  // namespace csp
