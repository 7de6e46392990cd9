#include "iker/rl.hpp"

#include <algorithm>
#include <cstdio>
#include <chrono>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace iker::rl {

using nlohmann::json;

namespace {

// On small shared machines Eigen's parallel GEMM loses to its own
// synchronization, and the 1-2 MB activation buffers churn through
// mmap/munmap on every forward. Pin both once per process.
void configure_numeric_runtime() {
  static const bool configured = [] {
    Eigen::setNbThreads(1);
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 64 * 1024 * 1024);
#endif
    return true;
  }();
  (void)configured;
}

// distinct per-env, per-episode seed streams (splitmix64 mixing)
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1) + 0xbf58476d1ce4e5b9ull * (c + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

Network<float> make_network(const Policy& policy) {
  Network<float> net(policy.obs_dim, policy.act_dim, policy.hidden);
  if (static_cast<int>(policy.params.size()) != net.parameter_count())
    throw std::runtime_error("policy parameter count mismatch");
  for (int i = 0; i < net.parameter_count(); ++i) net.params()(i) = policy.params[i];
  return net;
}

}  // namespace

void save_policy(const Policy& policy, const std::string& path) {
  json header;
  header["format_version"] = 1;
  header["obs_dim"] = policy.obs_dim;
  header["act_dim"] = policy.act_dim;
  header["hidden"] = policy.hidden;
  header["param_count"] = policy.params.size();
  header["max_translation_step"] = policy.max_translation_step;
  header["max_rotation_step"] = policy.max_rotation_step;
  header["config_hash"] = policy.config_hash;
  header["normalizer"] = {{"mean", policy.normalizer.mean()},
                          {"m2", policy.normalizer.m2()},
                          {"count", policy.normalizer.count()},
                          {"frozen", policy.normalizer.frozen()}};
  std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write policy file '" + path + "'");
  out.write("IKPOLIC1", 8);
  std::uint32_t len = static_cast<std::uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(head.data(), head.size());
  // parameter block: little-endian 32-bit floats
  out.write(reinterpret_cast<const char*>(policy.params.data()),
            static_cast<std::streamsize>(policy.params.size() * sizeof(float)));
}

Policy load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open policy file '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "IKPOLIC1", 8) != 0)
    throw std::runtime_error("not a policy checkpoint: '" + path + "'");
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string head(len, '\0');
  in.read(head.data(), len);
  json header = json::parse(head);

  Policy policy;
  policy.obs_dim = header.at("obs_dim").get<int>();
  policy.act_dim = header.at("act_dim").get<int>();
  policy.hidden = header.at("hidden").get<std::vector<int>>();
  policy.max_translation_step = header.at("max_translation_step").get<double>();
  policy.max_rotation_step = header.at("max_rotation_step").get<double>();
  policy.config_hash = header.at("config_hash").get<std::uint64_t>();
  size_t count = header.at("param_count").get<size_t>();
  policy.params.resize(count);
  in.read(reinterpret_cast<char*>(policy.params.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw std::runtime_error("truncated policy checkpoint: '" + path + "'");
  const auto& n = header.at("normalizer");
  ObsNormalizer norm(policy.obs_dim);
  norm.restore(n.at("mean").get<std::vector<double>>(),
               n.at("m2").get<std::vector<double>>(), n.at("count").get<double>(),
               n.at("frozen").get<bool>());
  policy.normalizer = norm;
  return policy;
}

PolicyRuntime::PolicyRuntime(const Policy& policy)
    : policy_(policy), net_(make_network(policy)) {
  configure_numeric_runtime();
}

ActionDelta PolicyRuntime::scale_action(const float* squashed_row) const {
  ActionDelta a;
  a.dp = {policy_.max_translation_step * squashed_row[0],
          policy_.max_translation_step * squashed_row[1],
          policy_.max_translation_step * squashed_row[2]};
  a.dr = {policy_.max_rotation_step * squashed_row[3],
          policy_.max_rotation_step * squashed_row[4],
          policy_.max_rotation_step * squashed_row[5]};
  return a;
}

ActionDelta PolicyRuntime::act(const std::vector<double>& raw_obs) const {
  MatX<float> obs(1, policy_.obs_dim);
  policy_.normalizer.normalize(raw_obs, obs.data());
  auto cache = net_.forward(obs);
  float squashed[6];
  for (int j = 0; j < policy_.act_dim; ++j) squashed[j] = std::tanh(cache.mean(0, j));
  return scale_action(squashed);
}

void PolicyRuntime::act_batch(const MatX<float>& normalized_obs, MatX<float>& means) const {
  auto cache = net_.forward(normalized_obs);
  means = cache.mean;
}

void compute_gae(TrajectoryBatch& batch, double gamma, double lambda) {
  compute_gae<float>(batch.rewards, batch.values, batch.dones, batch.next_values,
                     batch.steps, batch.num_envs, static_cast<float>(gamma),
                     static_cast<float>(lambda), batch.advantages, batch.returns);
}

void normalize_advantages(TrajectoryBatch& batch) {
  const auto n = static_cast<float>(batch.advantages.size());
  float mean = batch.advantages.sum() / n;
  float var = (batch.advantages.array() - mean).square().sum() / n;
  float inv = 1.0f / (std::sqrt(var) + 1e-8f);
  batch.advantages = (batch.advantages.array() - mean).matrix() * inv;
}

RolloutCollector::RolloutCollector(std::vector<TaskEnv> envs, std::uint64_t seed,
                                   double max_translation_step, double max_rotation_step,
                                   ObsNormalizer& normalizer)
    : envs_(std::move(envs)),
      seed_(seed),
      episode_counts_(envs_.size(), 0),
      raw_obs_(envs_.size()),
      episode_rewards_(envs_.size(), 0.0),
      episode_lengths_(envs_.size(), 0),
      normalizer_(normalizer),
      max_translation_step_(max_translation_step),
      max_rotation_step_(max_rotation_step) {
  for (size_t e = 0; e < envs_.size(); ++e) {
    raw_obs_[e] = envs_[e].reset(episode_seed(static_cast<int>(e), episode_counts_[e]++));
    normalizer_.update(raw_obs_[e]);
  }
}

std::uint64_t RolloutCollector::episode_seed(int env_index, std::uint64_t episode) {
  return mix_seed(seed_, static_cast<std::uint64_t>(env_index), episode);
}

TrajectoryBatch RolloutCollector::collect(Network<float>& net, int rollout_length,
                                          double gamma, Rng& action_rng) {
  const int n = static_cast<int>(envs_.size());
  const int obs_dim = net.obs_dim();
  const int act_dim = net.act_dim();

  TrajectoryBatch batch;
  batch.num_envs = n;
  batch.steps = rollout_length;
  batch.obs_dim = obs_dim;
  batch.act_dim = act_dim;
  batch.obs.resize(rollout_length * n, obs_dim);
  batch.actions_u.resize(rollout_length * n, act_dim);
  batch.log_probs.resize(rollout_length * n);
  batch.rewards.resize(rollout_length * n);
  batch.values.resize(rollout_length * n);
  batch.dones.resize(rollout_length * n);
  batch.next_values.resize(n);

  MatX<float> cur(n, obs_dim);
  for (int e = 0; e < n; ++e) normalizer_.normalize(raw_obs_[e], cur.row(e).data());

  VecX<float> log_std = net.log_std();
  VecX<float> sigma = log_std.array().exp();

  struct PendingBootstrap {
    int index;      // row in the batch
    MatX<float> obs;  // 1 x obs_dim, normalized terminal-truncation obs
  };
  std::vector<PendingBootstrap> pending;

  for (int t = 0; t < rollout_length; ++t) {
    auto cache = net.forward(cur);
    for (int e = 0; e < n; ++e) {
      const int idx = t * n + e;
      batch.obs.row(idx) = cur.row(e);
      for (int j = 0; j < act_dim; ++j)
        batch.actions_u(idx, j) =
            cache.mean(e, j) + sigma(j) * static_cast<float>(action_rng.normal());
      batch.values(idx) = cache.value(e);
    }
    // gaussian log-probs of the sampled pre-squash actions
    for (int e = 0; e < n; ++e) {
      const int idx = t * n + e;
      float acc = 0.0f;
      for (int j = 0; j < act_dim; ++j) {
        float d = (batch.actions_u(idx, j) - cache.mean(e, j)) / sigma(j);
        acc += -0.5f * d * d - log_std(j) -
               0.5f * static_cast<float>(std::log(2.0 * 3.14159265358979323846));
      }
      batch.log_probs(idx) = acc;
    }

    for (int e = 0; e < n; ++e) {
      const int idx = t * n + e;
      float squashed[6];
      for (int j = 0; j < act_dim; ++j) squashed[j] = std::tanh(batch.actions_u(idx, j));
      ActionDelta a;
      a.dp = {max_translation_step_ * squashed[0], max_translation_step_ * squashed[1],
              max_translation_step_ * squashed[2]};
      a.dr = {max_rotation_step_ * squashed[3], max_rotation_step_ * squashed[4],
              max_rotation_step_ * squashed[5]};
      StepResult r = envs_[e].step(a);
      batch.rewards(idx) = static_cast<float>(r.reward);
      episode_rewards_[e] += r.reward;
      episode_lengths_[e] += 1;

      bool episode_end = r.terminated || r.truncated;
      batch.dones(idx) = episode_end ? 1.0f : 0.0f;
      if (r.truncated) {
        // bootstrap the cut-off return with V of the post-step observation
        PendingBootstrap pb;
        pb.index = idx;
        pb.obs.resize(1, obs_dim);
        auto raw = envs_[e].observation();
        normalizer_.update(raw);
        normalizer_.normalize(raw, pb.obs.row(0).data());
        pending.push_back(std::move(pb));
      }
      if (episode_end) {
        batch.episodes_finished += 1;
        batch.episodes_success += envs_[e].success_latched() ? 1 : 0;
        batch.episode_reward_sum += episode_rewards_[e];
        batch.episode_length_sum += episode_lengths_[e];
        episode_rewards_[e] = 0.0;
        episode_lengths_[e] = 0;
        raw_obs_[e] = envs_[e].reset(episode_seed(e, episode_counts_[e]++));
      } else {
        raw_obs_[e] = envs_[e].observation();
      }
      normalizer_.update(raw_obs_[e]);
      normalizer_.normalize(raw_obs_[e], cur.row(e).data());
    }
  }

  // rollout-boundary bootstrap values
  auto boundary = net.forward(cur);
  batch.next_values = boundary.value;

  if (!pending.empty()) {
    MatX<float> obs(static_cast<int>(pending.size()), obs_dim);
    for (size_t i = 0; i < pending.size(); ++i)
      obs.row(static_cast<int>(i)) = pending[i].obs.row(0);
    auto values = net.forward(obs).value;
    for (size_t i = 0; i < pending.size(); ++i)
      batch.rewards(pending[i].index) +=
          static_cast<float>(gamma) * values(static_cast<int>(i));
  }
  return batch;
}

UpdateMetrics ppo_update(Network<float>& net, const TrajectoryBatch& batch,
                         const PPOConfig& config, Adam<float>& adam, double lr,
                         Rng& shuffle_rng) {
  const int total = batch.steps * batch.num_envs;
  const int mb_size = std::min(config.minibatch_size, total);

  std::vector<int> indices(total);
  for (int i = 0; i < total; ++i) indices[i] = i;

  UpdateMetrics metrics;
  metrics.learning_rate = lr;
  int passes = 0;

  PPOLossInputs<float> in;
  in.clip_epsilon = static_cast<float>(config.clip_epsilon);
  in.value_coef = static_cast<float>(config.value_coef);
  in.entropy_coef = static_cast<float>(config.entropy_coef);
  in.obs.resize(mb_size, batch.obs_dim);
  in.actions_u.resize(mb_size, batch.act_dim);
  in.old_logp.resize(mb_size);
  in.advantages.resize(mb_size);
  in.returns.resize(mb_size);

  for (int epoch = 0; epoch < config.epochs_per_update; ++epoch) {
    // Fisher-Yates with the deterministic stream
    for (int i = total - 1; i > 0; --i) {
      int j = static_cast<int>(shuffle_rng.uniform_int(i + 1));
      std::swap(indices[i], indices[j]);
    }
    for (int start = 0; start + mb_size <= total; start += mb_size) {
      for (int r = 0; r < mb_size; ++r) {
        int src = indices[start + r];
        in.obs.row(r) = batch.obs.row(src);
        in.actions_u.row(r) = batch.actions_u.row(src);
        in.old_logp(r) = batch.log_probs(src);
        in.advantages(r) = batch.advantages(src);
        in.returns(r) = batch.returns(src);
      }
      net.zero_grad();
      auto loss = ppo_loss(net, in, true);
      if (!std::isfinite(loss.total)) throw std::runtime_error("divergence");

      float norm = net.grads().norm();
      if (norm > static_cast<float>(config.max_grad_norm))
        net.grads() *= static_cast<float>(config.max_grad_norm) / norm;
      adam.step(net.params(), net.grads(), lr);

      metrics.policy_loss += loss.policy_loss;
      metrics.value_loss += loss.value_loss;
      metrics.entropy += loss.entropy;
      metrics.kl_estimate += loss.kl;
      metrics.clip_fraction += loss.clip_fraction;
      ++passes;
    }
  }
  if (passes > 0) {
    metrics.policy_loss /= passes;
    metrics.value_loss /= passes;
    metrics.entropy /= passes;
    metrics.kl_estimate /= passes;
    metrics.clip_fraction /= passes;
  }
  if (batch.episodes_finished > 0) {
    metrics.mean_episode_reward = batch.episode_reward_sum / batch.episodes_finished;
    metrics.mean_episode_length = batch.episode_length_sum / batch.episodes_finished;
    metrics.rollout_success_rate =
        static_cast<double>(batch.episodes_success) / batch.episodes_finished;
  }
  return metrics;
}

EpisodeOutcome run_episode(TaskEnv& env, const PolicyRuntime& runtime,
                           std::uint64_t seed, int horizon,
                           const std::function<void(TaskEnv&, int)>& on_step) {
  env.reset(seed);
  EpisodeOutcome outcome;
  for (int t = 0; t < horizon; ++t) {
    ActionDelta a = runtime.act(env.observation());
    StepResult r = env.step(a);
    outcome.steps = t + 1;
    if (on_step) on_step(env, t + 1);
    if (r.terminated) break;
  }
  outcome.final_mean_distance = env.mean_target_distance();
  outcome.success = env.success_latched() ||
                    outcome.final_mean_distance <= env.spec().success_threshold;
  return outcome;
}

std::vector<EpisodeOutcome> evaluate_policy(const scene::SceneModel& scn,
                                            const reward::RewardSpec& spec,
                                            const sim::DomainRandomizationConfig& dr,
                                            const sim::SimConfig& sim_config,
                                            const Policy& policy, int horizon,
                                            const std::vector<std::uint64_t>& seeds,
                                            sim::ObservationNoiseModel obs_noise) {
  PolicyRuntime runtime(policy);
  const int n = static_cast<int>(seeds.size());
  std::vector<TaskEnv> envs;
  envs.reserve(n);
  for (int e = 0; e < n; ++e)
    envs.emplace_back(scn, spec, dr, sim_config, horizon, obs_noise);

  std::vector<EpisodeOutcome> outcomes(n);
  std::vector<bool> running(n, true);
  MatX<float> obs(n, policy.obs_dim);
  for (int e = 0; e < n; ++e) {
    auto raw = envs[e].reset(seeds[e]);
    policy.normalizer.normalize(raw, obs.row(e).data());
  }

  MatX<float> means;
  for (int t = 0; t < horizon; ++t) {
    bool any = false;
    for (int e = 0; e < n; ++e) any = any || running[e];
    if (!any) break;
    runtime.act_batch(obs, means);
    for (int e = 0; e < n; ++e) {
      if (!running[e]) continue;
      float squashed[6];
      for (int j = 0; j < policy.act_dim; ++j) squashed[j] = std::tanh(means(e, j));
      StepResult r = envs[e].step(runtime.scale_action(squashed));
      outcomes[e].steps = t + 1;
      if (r.terminated || r.truncated) {
        running[e] = false;
      } else {
        policy.normalizer.normalize(envs[e].observation(), obs.row(e).data());
      }
    }
  }
  for (int e = 0; e < n; ++e) {
    outcomes[e].final_mean_distance = envs[e].mean_target_distance();
    outcomes[e].success = envs[e].success_latched() ||
                          outcomes[e].final_mean_distance <= spec.success_threshold;
  }
  return outcomes;
}

TrainResult train_task(const scene::SceneModel& scn, const reward::RewardSpec& spec,
                       const sim::DomainRandomizationConfig& dr,
                       const sim::SimConfig& sim_config, const PPOConfig& config,
                       std::uint64_t seed) {
  configure_numeric_runtime();
  auto t0 = std::chrono::steady_clock::now();

  const int obs_dim = observation_dim();
  const int act_dim = 6;
  Network<float> net(obs_dim, act_dim, config.hidden);
  Rng init_rng(mix_seed(seed, 0xA11CE, 1));
  net.init(init_rng);
  Adam<float> adam(net.parameter_count());

  ObsNormalizer normalizer(obs_dim);
  std::vector<TaskEnv> envs;
  envs.reserve(config.num_envs);
  for (int e = 0; e < config.num_envs; ++e)
    envs.emplace_back(scn, spec, dr, sim_config, config.train_horizon,
                      sim::ObservationNoiseModel{}, config.contact_start_probability);
  RolloutCollector collector(std::move(envs), mix_seed(seed, 0xE27, 2),
                             sim_config.max_translation_step,
                             sim_config.max_rotation_step, normalizer);
  Rng action_rng(mix_seed(seed, 0xAC7, 3));
  Rng shuffle_rng(mix_seed(seed, 0x5FF, 4));

  auto snapshot_policy = [&](const VecX<float>& params) {
    Policy p;
    p.obs_dim = obs_dim;
    p.act_dim = act_dim;
    p.hidden = config.hidden;
    p.params.assign(params.data(), params.data() + params.size());
    ObsNormalizer frozen = normalizer;
    frozen.freeze();
    p.normalizer = frozen;
    p.max_translation_step = sim_config.max_translation_step;
    p.max_rotation_step = sim_config.max_rotation_step;
    return p;
  };

  auto eval_success = [&](const Policy& policy) {
    std::vector<std::uint64_t> seeds(config.num_envs);
    for (int e = 0; e < config.num_envs; ++e)
      seeds[e] = mix_seed(seed, 0xEA1ull, e);
    auto outcomes = evaluate_policy(scn, spec, dr, sim_config, policy,
                                    config.train_horizon, seeds);
    int successes = 0;
    for (const auto& o : outcomes) successes += o.success ? 1 : 0;
    return static_cast<double>(successes) / outcomes.size();
  };

  TrainResult result;
  VecX<float> best_params = net.params();
  double best_success = -1.0;

  for (int update = 0; update < config.max_updates; ++update) {
    double lr = config.learning_rate;
    if (config.linear_lr_decay)
      lr *= 1.0 - static_cast<double>(update) / config.max_updates;

    TrajectoryBatch batch =
        collector.collect(net, config.rollout_length, config.gamma, action_rng);
    compute_gae(batch, config.gamma, config.gae_lambda);
    normalize_advantages(batch);
    UpdateMetrics metrics = ppo_update(net, batch, config, adam, lr, shuffle_rng);
    result.updates_run = update + 1;

    if ((update + 1) % config.eval_interval == 0 || update + 1 == config.max_updates) {
      Policy candidate = snapshot_policy(net.params());
      metrics.eval_success = eval_success(candidate);
      if (config.verbose) {
        std::printf(
            "  update %3d  eval %.3f  rollout %.2f  reward %.2f  kl %.4f\n",
            update + 1, metrics.eval_success, metrics.rollout_success_rate,
            metrics.mean_episode_reward, metrics.kl_estimate);
        std::fflush(stdout);
      }
      if (metrics.eval_success > best_success) {
        best_success = metrics.eval_success;
        best_params = net.params();
      }
      result.history.push_back(metrics);
      if (metrics.eval_success >= config.target_success_early_stop) break;
    } else {
      result.history.push_back(metrics);
    }
  }

  if (best_success < 0.0) {
    // max_updates below the eval interval: evaluate the final parameters
    Policy candidate = snapshot_policy(net.params());
    best_success = eval_success(candidate);
    best_params = net.params();
  }

  result.policy = snapshot_policy(best_params);
  result.best_eval_success = best_success;
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace iker::rl
