#pragma once

#include <string>

#include "trt/core.hpp"
#include "trt/net.hpp"
#include "trt/reward.hpp"
#include "trt/rng.hpp"

namespace trt {

// Diagonal Gaussian over actions; log_std is state independent.
struct ActionDistribution {
  Vec mean;
  Vec log_std;

  Vec sample(Rng& rng) const {
    Vec a(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i)
      a[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
    return a;
  }
  double log_prob(const Vec& action) const {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      const double z = (action[i] - mean[i]) / std::exp(log_std[i]);
      lp += -0.5 * z * z - log_std[i] - 0.9189385332046727418;  // 0.5*log(2*pi)
    }
    return lp;
  }
};

template <class S>
double gaussian_logp(const VecX<S>& mean, const VecX<S>& log_std, const VecX<S>& action) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double sd = std::exp(static_cast<double>(log_std[i]));
    const double z = (static_cast<double>(action[i]) - static_cast<double>(mean[i])) / sd;
    lp += -0.5 * z * z - static_cast<double>(log_std[i]) - 0.9189385332046727418;
  }
  return lp;
}

// d logp / d mean and d logp / d log_std for the diagonal Gaussian.
template <class S>
void gaussian_logp_grad(const VecX<S>& mean, const VecX<S>& log_std, const VecX<S>& action,
                        VecX<S>& dmean, VecX<S>& dlog_std) {
  dmean.resize(mean.size());
  dlog_std.resize(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const S sd = std::exp(log_std[i]);
    const S z = (action[i] - mean[i]) / sd;
    dmean[i] = z / sd;
    dlog_std[i] = z * z - S(1);
  }
}

// Actor and critic share the architecture but never the weights.
template <class S>
struct ActorCritic {
  PolicyConfig cfg;
  net::ModelP<S> actor;
  net::ModelP<S> critic;
  uint64_t source_seed = 0;

  void init(const PolicyConfig& c, uint64_t seed) {
    cfg = c;
    source_seed = seed;
    Rng ra = Rng(seed).stream(101);
    Rng rc = Rng(seed).stream(202);
    actor.init(c, c.action_dim, true, ra);
    critic.init(c, 1, false, rc);
  }
};

using ActorCriticF = ActorCritic<float>;
using ActorCriticD = ActorCritic<double>;

// s^H_{min(j_prev + lookahead, n)}; the SGC baseline's conditioning state.
HighState select_subgoal(const MatchTracker& tracker, const AbstractTrajectory& traj,
                         int lookahead);

// Versioned checkpoint: config JSON + named f64 tensors. Loading refuses a
// file whose architecture disagrees with its tensors or the caller's needs.
void save_checkpoint(const std::string& path, ActorCritic<float>& ac);
void save_checkpoint(const std::string& path, ActorCritic<double>& ac);
ActorCritic<float> load_checkpoint_f(const std::string& path);
ActorCritic<double> load_checkpoint_d(const std::string& path);

}  // namespace trt
