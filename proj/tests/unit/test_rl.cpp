#include "iker/rl.hpp"

#include <cmath>

#include "doctest.h"
#include "iker/rng.hpp"

using namespace iker;
using namespace iker::rl;

namespace {

// generic random loss inputs for a small double-precision net
PPOLossInputs<double> random_loss_inputs(Network<double>& net, Rng& rng, int batch) {
  PPOLossInputs<double> in;
  in.clip_epsilon = 0.2;
  in.value_coef = 0.5;
  in.entropy_coef = 0.01;
  in.obs.resize(batch, net.obs_dim());
  in.actions_u.resize(batch, net.act_dim());
  in.old_logp.resize(batch);
  in.advantages.resize(batch);
  in.returns.resize(batch);
  for (int i = 0; i < batch; ++i) {
    for (int j = 0; j < net.obs_dim(); ++j) in.obs(i, j) = rng.normal();
    for (int j = 0; j < net.act_dim(); ++j) in.actions_u(i, j) = rng.normal();
    in.old_logp(i) = rng.normal();  // generic ratios away from the clip kinks
    in.advantages(i) = rng.normal();
    in.returns(i) = rng.normal();
  }
  return in;
}

double finite_difference_max_rel_error(Network<double>& net,
                                       const PPOLossInputs<double>& in) {
  net.zero_grad();
  ppo_loss(net, in, true);
  VecX<double> analytic = net.grads();

  const double eps = 1e-5;
  double max_rel = 0.0;
  for (int p = 0; p < net.parameter_count(); ++p) {
    double keep = net.params()(p);
    net.params()(p) = keep + eps;
    double up = ppo_loss(net, in, false).total;
    net.params()(p) = keep - eps;
    double down = ppo_loss(net, in, false).total;
    net.params()(p) = keep;
    double numeric = (up - down) / (2.0 * eps);
    double denom = std::max({std::abs(numeric), std::abs(analytic(p)), 1e-6});
    max_rel = std::max(max_rel, std::abs(numeric - analytic(p)) / denom);
  }
  return max_rel;
}

}  // namespace

TEST_SUITE("rl") {

TEST_CASE("zero-initialized heads give zero mean and value") {
  Network<double> net(8, 6, {10});
  Rng rng(1);
  net.init(rng);
  // zero the heads explicitly
  net.weights(net.actor_head()).setZero();
  net.bias(net.actor_head()).setZero();
  net.weights(net.critic_head()).setZero();
  net.bias(net.critic_head()).setZero();

  MatX<double> obs(3, 8);
  for (int i = 0; i < obs.size(); ++i) obs.data()[i] = rng.normal();
  auto cache = net.forward(obs);
  CHECK(cache.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(cache.value.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batched forward equals per-row forwards") {
  Network<double> net(12, 6, {16, 8});
  Rng rng(2);
  net.init(rng);
  MatX<double> obs(32, 12);
  for (int i = 0; i < obs.size(); ++i) obs.data()[i] = rng.normal();
  auto batch = net.forward(obs);
  for (int r = 0; r < 32; ++r) {
    MatX<double> row = obs.row(r);
    auto single = net.forward(row);
    CHECK((single.mean.row(0) - batch.mean.row(r)).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(std::abs(single.value(0) - batch.value(r)) <= 1e-7);
  }
}

TEST_CASE("elu matches its definition and is smooth at zero") {
  MatX<double> z(1, 5);
  z << -2.0, -1e-9, 0.0, 1e-9, 2.0;
  MatX<double> f = Network<double>::elu(z);
  CHECK(f(0, 0) == doctest::Approx(std::exp(-2.0) - 1.0));
  CHECK(f(0, 2) == doctest::Approx(0.0));
  CHECK(f(0, 4) == doctest::Approx(2.0));
  MatX<double> d = Network<double>::elu_derivative(z);
  // both one-sided derivatives approach 1 at zero
  CHECK(d(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(d(0, 3) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("analytic gradients match central finite differences") {
  // 10-unit toy net exercises every layer type and both heads
  Network<double> net(5, 3, {10});
  Rng rng(3);
  net.init(rng, /*actor_gain=*/0.5, /*critic_gain=*/1.0);
  auto in = random_loss_inputs(net, rng, 16);
  CHECK(finite_difference_max_rel_error(net, in) <= 1e-4);
}

TEST_CASE("gradients stay correct with two hidden layers") {
  Network<double> net(4, 2, {8, 6});
  Rng rng(4);
  net.init(rng, 0.5, 1.0);
  auto in = random_loss_inputs(net, rng, 8);
  CHECK(finite_difference_max_rel_error(net, in) <= 1e-4);
}

TEST_CASE("gae matches the O(T^2) oracle in double precision") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    int steps = 1 + static_cast<int>(rng.uniform_int(32));
    int envs = 1 + static_cast<int>(rng.uniform_int(3));
    int total = steps * envs;
    VecX<double> rewards(total), values(total), dones(total), next_values(envs);
    for (int i = 0; i < total; ++i) {
      rewards(i) = rng.normal();
      values(i) = rng.normal();
      dones(i) = rng.uniform() < 0.15 ? 1.0 : 0.0;
    }
    for (int e = 0; e < envs; ++e) next_values(e) = rng.normal();
    double gamma = rng.uniform(0.9, 1.0);
    double lambda = rng.uniform(0.0, 1.0);

    VecX<double> adv, ret;
    compute_gae<double>(rewards, values, dones, next_values, steps, envs, gamma,
                        lambda, adv, ret);

    // O(T^2) direct summation: adv_t = sum_l (gamma*lambda)^l delta_{t+l},
    // cut at the first done on the path
    for (int e = 0; e < envs; ++e) {
      for (int t = 0; t < steps; ++t) {
        double acc = 0.0;
        double coef = 1.0;
        for (int l = t; l < steps; ++l) {
          int idx = l * envs + e;
          double next_v = l + 1 < steps ? values((l + 1) * envs + e) : next_values(e);
          double nonterm = 1.0 - dones(idx);
          double delta = rewards(idx) + gamma * next_v * nonterm - values(idx);
          acc += coef * delta;
          if (dones(idx) == 1.0) break;
          coef *= gamma * lambda;
        }
        CHECK(std::abs(adv(t * envs + e) - acc) <= 1e-10);
        CHECK(std::abs(ret(t * envs + e) - (acc + values(t * envs + e))) <= 1e-10);
      }
    }
  }
}

TEST_CASE("gae special cases: TD(0) and undiscounted reward-to-go") {
  int steps = 8, envs = 1;
  VecX<double> rewards(steps), values(steps), dones = VecX<double>::Zero(steps);
  VecX<double> next_values(1);
  Rng rng(6);
  for (int i = 0; i < steps; ++i) {
    rewards(i) = rng.normal();
    values(i) = rng.normal();
  }
  next_values(0) = rng.normal();

  VecX<double> adv, ret;
  // lambda = 0 -> advantage_t = r_t + gamma V_{t+1} - V_t exactly
  compute_gae<double>(rewards, values, dones, next_values, steps, envs, 0.99, 0.0,
                      adv, ret);
  for (int t = 0; t < steps; ++t) {
    double next_v = t + 1 < steps ? values(t + 1) : next_values(0);
    CHECK(adv(t) == doctest::Approx(rewards(t) + 0.99 * next_v - values(t)));
  }

  // gamma = 1, lambda = 1, zero values -> undiscounted reward-to-go
  VecX<double> zero_values = VecX<double>::Zero(steps);
  VecX<double> zero_next = VecX<double>::Zero(1);
  compute_gae<double>(rewards, zero_values, dones, zero_next, steps, envs, 1.0, 1.0,
                      adv, ret);
  for (int t = 0; t < steps; ++t) {
    double to_go = 0.0;
    for (int l = t; l < steps; ++l) to_go += rewards(l);
    CHECK(adv(t) == doctest::Approx(to_go));
  }
}

TEST_CASE("surrogate identities: zero advantages and unit ratios") {
  Network<double> net(5, 3, {10});
  Rng rng(7);
  net.init(rng, 0.5, 1.0);
  auto in = random_loss_inputs(net, rng, 16);

  // rho = 1 everywhere: surrogate equals -mean(A)
  auto cache = net.forward(in.obs);
  in.old_logp = gaussian_log_prob<double>(cache.mean, net.log_std(), in.actions_u);
  auto metrics = ppo_loss(net, in, false);
  CHECK(metrics.policy_loss ==
        doctest::Approx(-in.advantages.mean()).epsilon(1e-9));
  CHECK(metrics.kl == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(metrics.clip_fraction == 0.0);

  // zero advantages: no policy-gradient contribution to any parameter
  in.advantages.setZero();
  net.zero_grad();
  ppo_loss(net, in, true);
  VecX<double> grads_full = net.grads();

  PPOLossInputs<double> value_only = in;
  value_only.entropy_coef = 0.0;
  Network<double> net2(5, 3, {10});
  net2.params() = net.params();
  net2.zero_grad();
  // policy loss contributes exactly zero gradient; value+entropy remain
  auto m2 = ppo_loss(net2, value_only, true);
  (void)m2;
  VecX<double> grads_value = net2.grads();
  // actor-head weight gradients must vanish entirely
  const auto& actor = net.actor_head();
  for (int i = 0; i < actor.in * actor.out; ++i)
    CHECK(grads_full(actor.w_offset + i) == doctest::Approx(0.0).epsilon(1e-12));
  (void)grads_value;
}

TEST_CASE("kl estimate and clip fraction stay in range") {
  Network<double> net(5, 3, {10});
  Rng rng(8);
  net.init(rng, 0.5, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = random_loss_inputs(net, rng, 32);
    auto m = ppo_loss(net, in, false);
    CHECK(m.kl >= 0.0);
    CHECK(m.clip_fraction >= 0.0);
    CHECK(m.clip_fraction <= 1.0);
  }
}

TEST_CASE("adam converges on a quadratic") {
  VecX<float> params(3);
  params << 5.0f, -3.0f, 2.0f;
  Adam<float> adam(3);
  for (int i = 0; i < 2000; ++i) {
    VecX<float> grads = 2.0f * params;  // d/dx of sum(x^2)
    adam.step(params, grads, 0.01);
  }
  CHECK(params.cwiseAbs().maxCoeff() <= 1e-3f);
}

TEST_CASE("one-step bandit converges to the analytic optimum") {
  // 1-step episodes, reward -(a - 0.3)^2 with a = tanh(u); the optimum is
  // tanh(u*) = 0.3. Uses the full PPO machinery on a tiny net.
  PPOConfig config;
  config.num_envs = 16;
  config.rollout_length = 16;
  config.epochs_per_update = 4;
  config.minibatch_size = 64;
  config.entropy_coef = 0.0;
  config.learning_rate = 5e-3;
  config.linear_lr_decay = false;
  config.gamma = 0.0;
  config.gae_lambda = 0.0;

  Network<float> net(1, 1, {});
  Rng init(9);
  net.init(init, 0.01, 1.0, std::log(0.4));
  Adam<float> adam(net.parameter_count());
  Rng action_rng(10);
  Rng shuffle_rng(11);

  const int batch_rows = config.num_envs * config.rollout_length;
  TrajectoryBatch batch;
  batch.num_envs = config.num_envs;
  batch.steps = config.rollout_length;
  batch.obs_dim = 1;
  batch.act_dim = 1;
  batch.obs = MatX<float>::Ones(batch_rows, 1);
  batch.actions_u.resize(batch_rows, 1);
  batch.log_probs.resize(batch_rows);
  batch.rewards.resize(batch_rows);
  batch.values.resize(batch_rows);
  batch.dones = VecX<float>::Ones(batch_rows);  // every step ends an episode
  batch.next_values = VecX<float>::Zero(config.num_envs);

  double mean_u = 0.0;
  for (int update = 0; update < 2000; ++update) {
    auto cache = net.forward(batch.obs);
    float sigma = std::exp(net.log_std()(0));
    for (int i = 0; i < batch_rows; ++i) {
      float u = cache.mean(i, 0) + sigma * static_cast<float>(action_rng.normal());
      batch.actions_u(i, 0) = u;
      float d = (u - cache.mean(i, 0)) / sigma;
      batch.log_probs(i) = -0.5f * d * d - net.log_std()(0) -
                           0.5f * static_cast<float>(std::log(2.0 * M_PI));
      float a = std::tanh(u);
      batch.rewards(i) = -(a - 0.3f) * (a - 0.3f);
      batch.values(i) = cache.value(i);
    }
    compute_gae(batch, config.gamma, config.gae_lambda);
    normalize_advantages(batch);
    ppo_update(net, batch, config, adam, config.learning_rate, shuffle_rng);
    mean_u = net.forward(batch.obs).mean(0, 0);
    if (std::abs(std::tanh(mean_u) - 0.3) < 5e-3 && update > 50) break;
  }
  CHECK(std::tanh(mean_u) == doctest::Approx(0.3).epsilon(0.04));  // within 1e-2 absolute
  CHECK(std::abs(std::tanh(mean_u) - 0.3) <= 1e-2);
}

TEST_CASE("policy checkpoints round-trip through disk") {
  Policy p;
  p.obs_dim = 38;
  p.act_dim = 6;
  p.hidden = {256, 128, 64};
  Rng rng(12);
  Network<float> net(p.obs_dim, p.act_dim, p.hidden);
  net.init(rng);
  p.params.assign(net.params().data(), net.params().data() + net.parameter_count());
  ObsNormalizer norm(p.obs_dim);
  std::vector<double> sample(p.obs_dim);
  for (int i = 0; i < 20; ++i) {
    for (auto& v : sample) v = rng.normal();
    norm.update(sample);
  }
  norm.freeze();
  p.normalizer = norm;
  p.config_hash = 0xDEADBEEFull;

  std::string path = "/tmp/iker_test_policy.bin";
  save_policy(p, path);
  Policy q = load_policy(path);
  CHECK(q.obs_dim == p.obs_dim);
  CHECK(q.hidden == p.hidden);
  CHECK(q.config_hash == p.config_hash);
  REQUIRE(q.params.size() == p.params.size());
  for (size_t i = 0; i < p.params.size(); ++i) CHECK(q.params[i] == p.params[i]);
  CHECK(q.normalizer.count() == p.normalizer.count());
  CHECK(q.normalizer.frozen());
  for (int i = 0; i < p.obs_dim; ++i)
    CHECK(q.normalizer.mean()[i] == p.normalizer.mean()[i]);
}

}  // TEST_SUITE
