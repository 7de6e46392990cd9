#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "iker/rng.hpp"

// Actor-critic multilayer perceptron with a shared ELU trunk, an action-mean
// head, a state-independent learnable log-std, and a value head. Parameters
// and gradients live in one flat vector so the optimizer, the finite-
// difference checks, and checkpointing all see the same layout. Templated on
// the scalar so training runs in single precision while gradient checks run
// in double.

namespace iker::rl {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
class Network {
 public:
  Network(int obs_dim, int act_dim, std::vector<int> hidden)
      : obs_dim_(obs_dim), act_dim_(act_dim), hidden_(std::move(hidden)) {
    int offset = 0;
    int in = obs_dim_;
    for (int units : hidden_) {
      trunk_.push_back(make_layer(in, units, offset));
      in = units;
    }
    actor_ = make_layer(in, act_dim_, offset);
    critic_ = make_layer(in, 1, offset);
    log_std_offset_ = offset;
    offset += act_dim_;
    params_ = VecX<S>::Zero(offset);
    grads_ = VecX<S>::Zero(offset);
  }

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  int parameter_count() const { return static_cast<int>(params_.size()); }

  VecX<S>& params() { return params_; }
  const VecX<S>& params() const { return params_; }
  VecX<S>& grads() { return grads_; }
  const VecX<S>& grads() const { return grads_; }

  void zero_grad() { grads_.setZero(); }

  // Orthogonal-ish initialization: Gaussian matrices orthonormalized by
  // modified Gram-Schmidt, gain sqrt(2) in the trunk, small actor head.
  void init(Rng& rng, double actor_gain = 0.01, double critic_gain = 1.0,
            double log_std_init = -0.5) {
    for (const Layer& l : trunk_) init_layer(l, rng, std::sqrt(2.0));
    init_layer(actor_, rng, actor_gain);
    init_layer(critic_, rng, critic_gain);
    log_std().setConstant(static_cast<S>(log_std_init));
  }

  Eigen::Map<VecX<S>> log_std() {
    return Eigen::Map<VecX<S>>(params_.data() + log_std_offset_, act_dim_);
  }
  Eigen::Map<const VecX<S>> log_std() const {
    return Eigen::Map<const VecX<S>>(params_.data() + log_std_offset_, act_dim_);
  }
  Eigen::Map<VecX<S>> log_std_grad() {
    return Eigen::Map<VecX<S>>(grads_.data() + log_std_offset_, act_dim_);
  }

  // Caches the per-layer inputs and pre-activations needed by backward().
  struct ForwardCache {
    std::vector<MatX<S>> inputs;  // input to each trunk layer, then to heads
    std::vector<MatX<S>> pre;     // trunk pre-activations
    MatX<S> mean;                 // B x act_dim
    VecX<S> value;                // B
  };

  ForwardCache forward(const MatX<S>& obs) const {
    if (obs.cols() != obs_dim_) throw std::runtime_error("observation dimension mismatch");
    ForwardCache cache;
    cache.inputs.reserve(trunk_.size() + 1);
    cache.pre.reserve(trunk_.size());
    MatX<S> h = obs;
    for (const Layer& l : trunk_) {
      cache.inputs.push_back(std::move(h));
      MatX<S> z(cache.inputs.back().rows(), l.out);
      z.noalias() = cache.inputs.back() * weights(l);
      z.rowwise() += bias(l).transpose();
      h = elu(z);
      cache.pre.push_back(std::move(z));
    }
    cache.inputs.push_back(std::move(h));
    const MatX<S>& out = cache.inputs.back();
    cache.mean.noalias() = out * weights(actor_);
    cache.mean.rowwise() += bias(actor_).transpose();
    VecX<S> v(out.rows());
    v.noalias() = out * weights(critic_).col(0);
    cache.value = v.array() + bias(critic_)(0);
    return cache;
  }

  // Accumulates parameter gradients for upstream dL/dmean and dL/dvalue.
  void backward(const ForwardCache& cache, const MatX<S>& d_mean, const VecX<S>& d_value) {
    const MatX<S>& trunk_out = cache.inputs.back();
    weight_grads(actor_).noalias() += trunk_out.transpose() * d_mean;
    bias_grads(actor_) += d_mean.colwise().sum().transpose();
    weight_grads(critic_).col(0).noalias() += trunk_out.transpose() * d_value;
    bias_grads(critic_)(0) += d_value.sum();

    MatX<S> dh(trunk_out.rows(), trunk_out.cols());
    dh.noalias() = d_mean * weights(actor_).transpose();
    dh.noalias() += d_value * weights(critic_).col(0).transpose();

    for (int i = static_cast<int>(trunk_.size()) - 1; i >= 0; --i) {
      // elu'(z) = 1 for z>0, elu(z)+1 otherwise; the activation is the next
      // layer's cached input, so no exp is needed here
      const MatX<S>& activated = cache.inputs[i + 1];
      MatX<S> dz =
          (cache.pre[i].array() > S(0))
              .select(dh.array(), dh.array() * (activated.array() + S(1)));
      weight_grads(trunk_[i]).noalias() += cache.inputs[i].transpose() * dz;
      bias_grads(trunk_[i]) += dz.colwise().sum().transpose();
      if (i > 0) {
        dh.resize(dz.rows(), trunk_[i].in);
        dh.noalias() = dz * weights(trunk_[i]).transpose();
      }
    }
  }

  // elu(z) = max(z, 0) + exp(min(z, 0)) - 1, fully vectorized
  static MatX<S> elu(const MatX<S>& z) {
    return (z.array().max(S(0)) + z.array().min(S(0)).exp() - S(1)).matrix();
  }
  static MatX<S> elu_derivative(const MatX<S>& z) {
    return (z.array() > S(0)).select(MatX<S>::Ones(z.rows(), z.cols()).array(),
                                     z.array().exp());
  }

  struct Layer {
    int in = 0;
    int out = 0;
    int w_offset = 0;
    int b_offset = 0;
  };

  Eigen::Map<MatX<S>> weights(const Layer& l) {
    return Eigen::Map<MatX<S>>(params_.data() + l.w_offset, l.in, l.out);
  }
  Eigen::Map<const MatX<S>> weights(const Layer& l) const {
    return Eigen::Map<const MatX<S>>(params_.data() + l.w_offset, l.in, l.out);
  }
  Eigen::Map<VecX<S>> bias(const Layer& l) {
    return Eigen::Map<VecX<S>>(params_.data() + l.b_offset, l.out);
  }
  Eigen::Map<const VecX<S>> bias(const Layer& l) const {
    return Eigen::Map<const VecX<S>>(params_.data() + l.b_offset, l.out);
  }
  Eigen::Map<MatX<S>> weight_grads(const Layer& l) {
    return Eigen::Map<MatX<S>>(grads_.data() + l.w_offset, l.in, l.out);
  }
  Eigen::Map<VecX<S>> bias_grads(const Layer& l) {
    return Eigen::Map<VecX<S>>(grads_.data() + l.b_offset, l.out);
  }

  const std::vector<Layer>& trunk_layers() const { return trunk_; }
  const Layer& actor_head() const { return actor_; }
  const Layer& critic_head() const { return critic_; }

 private:
  Layer make_layer(int in, int out, int& offset) {
    Layer l{in, out, offset, offset + in * out};
    offset += in * out + out;
    return l;
  }

  void init_layer(const Layer& l, Rng& rng, double gain) {
    MatX<double> g(l.in, l.out);
    for (int r = 0; r < l.in; ++r)
      for (int c = 0; c < l.out; ++c) g(r, c) = rng.normal();
    // modified Gram-Schmidt over the shorter dimension
    if (l.in >= l.out) {
      for (int c = 0; c < l.out; ++c) {
        for (int k = 0; k < c; ++k) g.col(c) -= g.col(k).dot(g.col(c)) * g.col(k);
        double n = g.col(c).norm();
        if (n > 1e-12) g.col(c) /= n;
      }
    } else {
      for (int r = 0; r < l.in; ++r) {
        for (int k = 0; k < r; ++k) g.row(r) -= g.row(k).dot(g.row(r)) * g.row(k);
        double n = g.row(r).norm();
        if (n > 1e-12) g.row(r) /= n;
      }
    }
    auto w = weights(l);
    for (int r = 0; r < l.in; ++r)
      for (int c = 0; c < l.out; ++c) w(r, c) = static_cast<S>(gain * g(r, c));
    bias(l).setZero();
  }

  int obs_dim_;
  int act_dim_;
  std::vector<int> hidden_;
  std::vector<Layer> trunk_;
  Layer actor_;
  Layer critic_;
  int log_std_offset_ = 0;
  VecX<S> params_;
  VecX<S> grads_;
};

// Adam with bias correction over the flat parameter vector.
template <typename S>
class Adam {
 public:
  explicit Adam(int n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(VecX<S>::Zero(n)), v_(VecX<S>::Zero(n)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(VecX<S>& params, const VecX<S>& grads, double lr) {
    ++t_;
    const S b1 = static_cast<S>(beta1_);
    const S b2 = static_cast<S>(beta2_);
    m_ = b1 * m_ + (S(1) - b1) * grads;
    v_ = b2 * v_ + (S(1) - b2) * grads.cwiseProduct(grads);
    const double corr1 = 1.0 - std::pow(beta1_, t_);
    const double corr2 = 1.0 - std::pow(beta2_, t_);
    const S alpha = static_cast<S>(lr * std::sqrt(corr2) / corr1);
    params.array() -=
        alpha * m_.array() / (v_.array().sqrt() + static_cast<S>(eps_ * std::sqrt(corr2)));
  }

 private:
  VecX<S> m_;
  VecX<S> v_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

// Clipped-surrogate loss with analytic gradients. `actions_u` are the
// pre-squash Gaussian samples; the tanh correction term in the stored
// log-probs cancels in the ratio, so Gaussian log-densities suffice here.
template <typename S>
struct PPOLossInputs {
  MatX<S> obs;        // B x obs_dim, already normalized
  MatX<S> actions_u;  // B x act_dim
  VecX<S> old_logp;
  VecX<S> advantages;
  VecX<S> returns;
  S clip_epsilon{};
  S value_coef{};
  S entropy_coef{};
};

template <typename S>
struct PPOLossMetrics {
  S total = 0;
  S policy_loss = 0;
  S value_loss = 0;
  S entropy = 0;
  S kl = 0;
  S clip_fraction = 0;
};

template <typename S>
VecX<S> gaussian_log_prob(const MatX<S>& mean, const VecX<S>& log_std,
                          const MatX<S>& u) {
  const S half_log_2pi = static_cast<S>(0.5 * std::log(2.0 * 3.14159265358979323846));
  VecX<S> out = VecX<S>::Zero(u.rows());
  for (int i = 0; i < u.rows(); ++i) {
    S acc = 0;
    for (int j = 0; j < u.cols(); ++j) {
      S sigma = std::exp(log_std(j));
      S d = (u(i, j) - mean(i, j)) / sigma;
      acc += -S(0.5) * d * d - log_std(j) - half_log_2pi;
    }
    out(i) = acc;
  }
  return out;
}

template <typename S>
PPOLossMetrics<S> ppo_loss(Network<S>& net, const PPOLossInputs<S>& in, bool with_grad) {
  const int batch = static_cast<int>(in.obs.rows());
  const int act_dim = net.act_dim();
  auto cache = net.forward(in.obs);
  VecX<S> log_std = net.log_std();
  VecX<S> logp = gaussian_log_prob<S>(cache.mean, log_std, in.actions_u);

  PPOLossMetrics<S> m;
  VecX<S> d_logp = VecX<S>::Zero(batch);
  S inv_b = S(1) / static_cast<S>(batch);

  for (int i = 0; i < batch; ++i) {
    S ratio = std::exp(logp(i) - in.old_logp(i));
    S adv = in.advantages(i);
    S pg1 = -adv * ratio;
    S clipped = std::min(std::max(ratio, S(1) - in.clip_epsilon), S(1) + in.clip_epsilon);
    S pg2 = -adv * clipped;
    if (pg1 >= pg2) {
      m.policy_loss += pg1 * inv_b;
      d_logp(i) = -adv * ratio * inv_b;  // d(pg1)/dlogp = -A * ratio
    } else {
      m.policy_loss += pg2 * inv_b;
    }
    m.kl += (ratio - S(1) - std::log(ratio)) * inv_b;
    if (std::abs(ratio - S(1)) > in.clip_epsilon) m.clip_fraction += inv_b;
  }

  VecX<S> v_err = cache.value - in.returns;
  m.value_loss = in.value_coef * v_err.squaredNorm() * inv_b;

  const S half_log_2pi_e =
      static_cast<S>(0.5 * std::log(2.0 * 3.14159265358979323846 * 2.718281828459045235));
  m.entropy = log_std.sum() + static_cast<S>(act_dim) * half_log_2pi_e;

  m.total = m.policy_loss + m.value_loss - in.entropy_coef * m.entropy;
  if (!with_grad) return m;

  // gradients: policy term through mean and log_std, value term through the
  // critic, entropy term through log_std only
  MatX<S> d_mean = MatX<S>::Zero(batch, act_dim);
  VecX<S> d_log_std = VecX<S>::Zero(act_dim);
  for (int i = 0; i < batch; ++i) {
    if (d_logp(i) == S(0)) continue;
    for (int j = 0; j < act_dim; ++j) {
      S sigma = std::exp(log_std(j));
      S d = (in.actions_u(i, j) - cache.mean(i, j)) / sigma;
      d_mean(i, j) = d_logp(i) * d / sigma;
      d_log_std(j) += d_logp(i) * (d * d - S(1));
    }
  }
  d_log_std.array() -= in.entropy_coef;  // d(-c*H)/dlog_std = -c
  VecX<S> d_value = (S(2) * in.value_coef * inv_b) * v_err;

  net.backward(cache, d_mean, d_value);
  net.log_std_grad() += d_log_std;
  return m;
}

}  // namespace iker::rl
