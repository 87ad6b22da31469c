#pragma once

#include <functional>
#include <string>
#include <vector>

#include "trt/gae.hpp"
#include "trt/policy.hpp"
#include "trt/session.hpp"

namespace trt {

struct PPOConfig {
  double policy_lr = 3e-4;
  double value_lr = 3e-4;
  int rollout_batch = 20000;
  int minibatch = 1024;
  int epochs = 2000;
  int grad_updates_per_epoch = 60;
  int n_parallel_envs = 20;
  double clip_ratio = 0.2;
  double target_kl = 0.15;
  double gae_lambda = 0.95;
  double discount = 0.99;
  bool grad_accumulation = false;  // 3 optimizer steps per epoch when on
  uint64_t seed = 0;
  int n_threads = 1;  // 1 = the deterministic reference mode
  int checkpoint_every = 50;

  // deterministic-eval early stop (0/negative disables)
  int eval_every = 0;
  int eval_episodes = 128;
  double stop_at_success = -1.0;

  void validate() const;
};

struct PromptEntry {
  Mat states;  // Lp x high_dim
  std::vector<int> orig_idx;
};

struct Transition {
  Mat obs_hist;  // k x obs_dim, oldest first (the policy input at this step)
  Vec goal;      // GC/SGC conditioning, empty otherwise
  Vec action;
  double logp = 0.0;
  double value = 0.0;
  double reward = 0.0;  // combined trajectory + scaled task reward
  bool terminal = false;
  bool truncated = false;  // horizon or collection end; bootstrap applies
  double bootstrap = 0.0;  // V(s_{t+1}) when truncated
  int j = 0;
  int prompt_id = -1;
  LowState post_obs;  // s_{t+1}; lets tests replay rewards exactly
};

struct RolloutBuffer {
  std::vector<PromptEntry> prompts;
  std::vector<std::vector<Transition>> streams;  // one per parallel env
  std::vector<double> advantages, returns;       // flattened, stream-major
  std::vector<std::pair<int, int>> index;        // flat -> (stream, t)

  int total() const {
    int n = 0;
    for (const auto& s : streams) n += static_cast<int>(s.size());
    return n;
  }
  void finalize(double gamma, double lam);  // GAE per stream

  // episode bookkeeping for logging
  int episodes_done = 0;
  int episodes_success = 0;
  double return_sum = 0.0;  // over finished episodes
};

struct UpdateStats {
  int updates_applied = 0;
  double kl = 0.0;          // mean estimated KL over applied updates
  double actor_loss = 0.0;  // means over applied updates
  double critic_loss = 0.0;
  double clip_fraction = 0.0;
};

struct EpochLog {
  int epoch = 0;
  long env_steps = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
  double kl = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double eval_success = -1.0;  // -1 when no eval ran this epoch
};

struct RunLog {
  std::vector<EpochLog> rows;
  std::string to_text() const;  // line-delimited, deterministic formatting
};

struct RunConfig {
  EnvConfig env;
  PolicyConfig policy;
  PPOConfig ppo;
  std::string out_dir;  // checkpoints + run log land here; empty = no files
};

struct TrainResult {
  RunLog log;
  std::string checkpoint_path;
  double final_eval_success = -1.0;
  long env_steps = 0;
};

// Adam state for the actor/critic pair.
template <class S>
struct AdamPair {
  struct State {
    std::vector<VecX<S>> m, v;
    long t = 0;
  };
  State actor, critic;
  double policy_lr, value_lr;
  AdamPair(double plr, double vlr) : policy_lr(plr), value_lr(vlr) {}
  void step_actor(net::ModelP<S>& params, net::ModelP<S>& grads);
  void step_critic(net::ModelP<S>& params, net::ModelP<S>& grads);
};

template <class S>
RolloutBuffer collect_rollouts(std::vector<Session>& sessions, ActorCritic<S>& ac,
                               const PPOConfig& cfg, Rng& rng);

template <class S>
UpdateStats ppo_update(RolloutBuffer& buffer, ActorCritic<S>& ac, const PPOConfig& cfg,
                       AdamPair<S>& opt, Rng& rng);

using ProgressFn = std::function<void(const EpochLog&)>;

template <class S>
TrainResult train_run(const RunConfig& cfg, const ProgressFn& progress = nullptr);

}  // namespace trt
