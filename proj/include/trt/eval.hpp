#pragma once

#include <functional>
#include <memory>

#include "trt/plans.hpp"
#include "trt/policy.hpp"
#include "trt/session.hpp"

namespace trt {

// A per-episode actor. begin() starts a fresh episode; on_plan() fires after
// every (re)plan installation.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void begin(Session& s) { on_plan(s); }
  virtual void on_plan(Session& s) = 0;
  virtual void on_obs(Session& s, const LowState& obs) = 0;  // after each step
  virtual Vec act(Session& s) = 0;
};

// Policy controller around a trained network (mean-action by default).
template <class S>
class NetController : public Controller {
 public:
  NetController(ActorCritic<S>& ac, bool sample_mode = false, uint64_t sample_seed = 0)
      : ac_(ac), sample_(sample_mode), rng_(sample_seed),
        stack_(ac.cfg.k, ac.cfg.obs_dim) {}
  void begin(Session& s) override {
    fresh_ = true;
    on_plan(s);
  }
  void on_plan(Session& s) override;
  void on_obs(Session& s, const LowState& obs) override;
  Vec act(Session& s) override;

 private:
  ActorCritic<S>& ac_;
  bool sample_;
  Rng rng_;
  ObsStack stack_;
  bool fresh_ = true;
  net::PromptCtx<S> ctx_;
};

struct EpisodeResult {
  bool success = false;
  int steps = 0;
  int j_final = 0;
  int n_plan = 0;
  int replans_used = 0;
};

struct EvalReport {
  int n_episodes = 0;
  double success_rate = 0.0;
  double stderr_ = 0.0;  // sqrt(p(1-p)/n)
  std::vector<EpisodeResult> episodes;
  std::string to_text() const;
};

using StepHook = std::function<void(Session&, int step)>;

// Runs one episode on an already-reset session. Replanning: the timeout
// trigger re-plans when the per-plan budget is spent without matching the
// final state; the final-state trigger re-plans to continue a longer task.
// Each plan gets `max_steps` steps; the hook can inject interventions.
EpisodeResult run_episode(Controller& c, Session& s, int max_steps,
                          const StepHook& hook = nullptr);
EpisodeResult run_with_replanning(Controller& c, Session& s, const ReplanTrigger& timeout,
                                  bool final_state_trigger, int max_replans,
                                  const StepHook& hook = nullptr);

// Executes pre-chunked plans in order; the final-state trigger advances to
// the next chunk. Used for periodic tasks.
EpisodeResult run_chunked(Controller& c, Session& s,
                          const std::vector<AbstractTrajectory>& chunks, int max_steps_per_chunk);

// n deterministic episodes with fresh plans; success per the environment.
template <class S>
EvalReport evaluate(ActorCritic<S>& ac, const EnvConfig& env, int n_episodes, uint64_t seed,
                    bool replan = false, int max_replans = 3);

// Oracle-policy evaluation (environment/solvability gates).
EvalReport evaluate_oracle(const EnvConfig& env, int n_episodes, uint64_t seed,
                           const StepHook& hook = nullptr, int max_replans = 0,
                           bool timeout_replan = false);

struct SweepRow {
  int p = 0;
  EvalReport report;
};

// Trains one configuration per prompt-sparsity value and evaluates it.
// Prompt sparsity only: the reward always uses the full trajectory.
std::vector<SweepRow> granularity_sweep(const struct RunConfig& base,
                                        const std::vector<int>& p_values, int eval_episodes,
                                        uint64_t eval_seed);

}  // namespace trt
