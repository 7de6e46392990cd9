#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iker/network.hpp"
#include "iker/task_env.hpp"

// Policy optimization: clipped-surrogate updates over rollouts collected
// from a set of randomized environments, generalized advantage estimation,
// observation normalization, and the trained-policy artifact.

namespace iker::rl {

struct PPOConfig {
  int num_envs = 128;
  int rollout_length = 64;
  int epochs_per_update = 5;
  int minibatch_size = 2048;
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 1e-3;
  bool linear_lr_decay = true;
  double value_coef = 0.5;
  double entropy_coef = 0.003;
  double max_grad_norm = 1.0;
  int max_updates = 500;
  double target_success_early_stop = 0.93;
  int eval_interval = 10;
  int train_horizon = 200;
  std::vector<int> hidden = {256, 128, 64};
  // fraction of push-task training episodes that start in contact with the
  // object; evaluation always starts from the home pose
  double contact_start_probability = 0.5;
  bool verbose = false;  // per-evaluation progress on stdout
};

// Running per-dimension statistics (Welford); frozen at evaluation.
class ObsNormalizer {
 public:
  ObsNormalizer() = default;
  explicit ObsNormalizer(int dim)
      : mean_(dim, 0.0), m2_(dim, 0.0), count_(0.0) {}

  void update(const std::vector<double>& x) {
    if (frozen_) return;
    count_ += 1.0;
    for (size_t i = 0; i < mean_.size(); ++i) {
      double delta = x[i] - mean_[i];
      mean_[i] += delta / count_;
      m2_[i] += delta * (x[i] - mean_[i]);
    }
  }

  void normalize(const std::vector<double>& x, float* out) const {
    for (size_t i = 0; i < mean_.size(); ++i) {
      double var = count_ > 1.0 ? m2_[i] / count_ : 1.0;
      double v = (x[i] - mean_[i]) / std::sqrt(var + 1e-8);
      out[i] = static_cast<float>(geom::clamp(v, -10.0, 10.0));
    }
  }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  double count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& m2() const { return m2_; }
  void restore(std::vector<double> mean, std::vector<double> m2, double count,
               bool frozen) {
    mean_ = std::move(mean);
    m2_ = std::move(m2);
    count_ = count;
    frozen_ = frozen;
  }

 private:
  std::vector<double> mean_;
  std::vector<double> m2_;
  double count_ = 0.0;
  bool frozen_ = false;
};

// Everything needed to run a trained policy: architecture, flat parameters,
// frozen observation statistics, action scaling, and the config hash of the
// run that produced it.
struct Policy {
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<int> hidden;
  std::vector<float> params;
  ObsNormalizer normalizer;
  double max_translation_step = 0.02;
  double max_rotation_step = 0.1;
  std::uint64_t config_hash = 0;
};

void save_policy(const Policy& policy, const std::string& path);
Policy load_policy(const std::string& path);

// Stateless-per-call runtime for a policy: normalizes, runs the network,
// squashes, scales.
class PolicyRuntime {
 public:
  explicit PolicyRuntime(const Policy& policy);
  ActionDelta act(const std::vector<double>& raw_obs) const;
  // batched variant used by vectorized evaluation
  void act_batch(const MatX<float>& normalized_obs, MatX<float>& means) const;
  const Policy& policy() const { return policy_; }
  ActionDelta scale_action(const float* squashed_row) const;

 private:
  Policy policy_;
  mutable Network<float> net_;
};

struct TrajectoryBatch {
  int num_envs = 0;
  int steps = 0;
  int obs_dim = 0;
  int act_dim = 0;
  MatX<float> obs;        // (T*N) x obs_dim, normalized
  MatX<float> actions_u;  // pre-squash Gaussian samples
  VecX<float> log_probs;
  VecX<float> rewards;  // truncation bootstraps already folded in
  VecX<float> values;
  VecX<float> dones;
  VecX<float> advantages;
  VecX<float> returns;
  VecX<float> next_values;  // per env, value of the rollout-boundary state

  int episodes_finished = 0;
  int episodes_success = 0;
  double episode_reward_sum = 0.0;
  double episode_length_sum = 0.0;
};

// advantage_t = sum_l (gamma*lambda)^l delta_{t+l}, truncated at episode
// ends; returns = advantages + values. Templated so tests can run the same
// code path in double against the O(T^2) oracle.
template <typename S>
void compute_gae(const VecX<S>& rewards, const VecX<S>& values, const VecX<S>& dones,
                 const VecX<S>& next_values, int steps, int num_envs, S gamma,
                 S lambda, VecX<S>& advantages, VecX<S>& returns) {
  advantages.resize(rewards.size());
  returns.resize(rewards.size());
  for (int e = 0; e < num_envs; ++e) {
    S adv = 0;
    S next_value = next_values(e);
    for (int t = steps - 1; t >= 0; --t) {
      int idx = t * num_envs + e;
      S nonterminal = S(1) - dones(idx);
      S delta = rewards(idx) + gamma * next_value * nonterminal - values(idx);
      adv = delta + gamma * lambda * nonterminal * adv;
      advantages(idx) = adv;
      returns(idx) = adv + values(idx);
      next_value = values(idx);
    }
  }
}

void compute_gae(TrajectoryBatch& batch, double gamma, double lambda);
void normalize_advantages(TrajectoryBatch& batch);

struct UpdateMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl_estimate = 0.0;
  double clip_fraction = 0.0;
  double mean_episode_reward = 0.0;
  double mean_episode_length = 0.0;
  double rollout_success_rate = 0.0;
  double eval_success = -1.0;  // filled on evaluation updates
  double learning_rate = 0.0;
};

// Owns the vectorized environments and their episode seed streams.
class RolloutCollector {
 public:
  RolloutCollector(std::vector<TaskEnv> envs, std::uint64_t seed,
                   double max_translation_step, double max_rotation_step,
                   ObsNormalizer& normalizer);

  TrajectoryBatch collect(Network<float>& net, int rollout_length, double gamma,
                          Rng& action_rng);

 private:
  std::uint64_t episode_seed(int env_index, std::uint64_t episode);

  std::vector<TaskEnv> envs_;
  std::uint64_t seed_;
  std::vector<std::uint64_t> episode_counts_;
  std::vector<std::vector<double>> raw_obs_;
  std::vector<double> episode_rewards_;
  std::vector<int> episode_lengths_;
  ObsNormalizer& normalizer_;
  double max_translation_step_;
  double max_rotation_step_;
};

// One PPO update: shuffled minibatches, clipped-surrogate loss, global
// gradient-norm clipping, Adam. Throws "divergence" on a non-finite loss.
UpdateMetrics ppo_update(Network<float>& net, const TrajectoryBatch& batch,
                         const PPOConfig& config, Adam<float>& adam, double lr,
                         Rng& shuffle_rng);

struct EpisodeOutcome {
  bool success = false;
  double final_mean_distance = 0.0;
  int steps = 0;
};

// Deterministic-mean rollout of one episode; optional per-step callback for
// disturbance injection and logging (called after each simulator step).
EpisodeOutcome run_episode(TaskEnv& env, const PolicyRuntime& runtime,
                           std::uint64_t seed, int horizon,
                           const std::function<void(TaskEnv&, int)>& on_step = {});

// Vectorized deterministic evaluation: one episode per seed.
std::vector<EpisodeOutcome> evaluate_policy(const scene::SceneModel& scn,
                                            const reward::RewardSpec& spec,
                                            const sim::DomainRandomizationConfig& dr,
                                            const sim::SimConfig& sim_config,
                                            const Policy& policy, int horizon,
                                            const std::vector<std::uint64_t>& seeds,
                                            sim::ObservationNoiseModel obs_noise = {});

struct TrainResult {
  Policy policy;
  std::vector<UpdateMetrics> history;
  double best_eval_success = 0.0;
  int updates_run = 0;
  double seconds = 0.0;
};

// collect -> GAE -> update until max_updates or the train-distribution
// success target, evaluated every eval_interval updates; returns the best
// checkpoint by evaluation success.
TrainResult train_task(const scene::SceneModel& scn, const reward::RewardSpec& spec,
                       const sim::DomainRandomizationConfig& dr,
                       const sim::SimConfig& sim_config, const PPOConfig& config,
                       std::uint64_t seed);

}  // namespace iker::rl
