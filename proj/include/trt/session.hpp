#pragma once

#include <deque>
#include <memory>
#include <optional>

#include "trt/box_pusher.hpp"
#include "trt/couch_moving.hpp"
#include "trt/plans.hpp"
#include "trt/policy_config.hpp"
#include "trt/reward.hpp"

namespace trt {

// Everything that defines one experiment environment: which world, its
// parameters, plan preprocessing, matching and reward scales.
struct EnvConfig {
  EnvTag tag = EnvTag::box_pusher;
  BoxPusherConfig box;
  CouchParams couch;
  Maze::Variant maze_variant = Maze::Variant::short_range;
  int maze_corners = 3;
  PlanConfig plan;
  RewardParams reward;
  double eps_match = 0.1;   // matching threshold for Eq.-style rewards
  int max_episode_len = 200;
  bool scale_horizon = true;  // longer mazes get proportionally more steps

  static EnvConfig box_pusher_train();
  static EnvConfig box_pusher_test();        // with obstacles
  static EnvConfig make_couch(Maze::Variant v, int corners);
  static EnvConfig for_name(const std::string& name);
  std::string name() const;

  int obs_dim() const { return tag == EnvTag::box_pusher ? 6 : 13; }
  int act_dim() const { return tag == EnvTag::box_pusher ? 2 : 3; }
  int high_dim() const { return tag == EnvTag::box_pusher ? 4 : 2; }
  int goal_dim(Backbone b) const {
    if (b == Backbone::feedforward_sgc) return high_dim();
    return 2;  // GC: the task goal position
  }
};

struct StepOut {
  LowState obs;
  double traj_reward = 0.0;
  double task_reward = 0.0;
  double reward = 0.0;  // combined
  bool success = false;
  bool terminal = false;   // success ends the episode
  bool truncated = false;  // horizon reached
  int j = 0;
};

// One environment instance paired with its abstract plan and match tracker.
class Session {
 public:
  Session(const EnvConfig& cfg, uint64_t stream_seed);

  void reset();                   // fresh episode, fresh plan
  void replan();                  // re-plan from the current low state
  bool has_plan() const { return tracker_.has_value(); }

  const EnvConfig& config() const { return cfg_; }
  const SubsampledPrompt& prompt() const { return prompt_; }
  const AbstractTrajectory& full_plan() const { return *plan_; }
  const MatchTracker& tracker() const { return *tracker_; }
  LowState observe() const;
  // GC goal / SGC subgoal conditioning vector.
  Vec goal_vec(Backbone b, int sgc_lookahead = 5) const;
  StepOut step(const Vec& action);
  int episode_steps() const { return episode_steps_; }
  int horizon() const { return horizon_; }
  bool success_now() const;

  // box pusher internals (oracles, interventions, io)
  const BoxPusherState& box_state() const { return box_state_; }
  BoxPusherState& mutable_box_state() { return box_state_; }
  const BoxPusherEnv& box_env() const { return box_env_; }
  void teleport_box(Rng& rng);

  // couch internals
  const CouchState& couch_state() const { return couch_state_; }
  const Maze& maze() const { return *maze_; }
  const CouchMovingEnv& couch_env() const { return couch_env_; }

  // io support: start an episode from externally supplied state/plan
  void load_box_state(const BoxPusherState& s);
  void load_maze(std::shared_ptr<const Maze> maze);
  void set_plan(const AbstractTrajectory& full_plan);

  Rng& rng() { return rng_; }

 private:
  void make_plan_from_current();
  void install_plan(AbstractTrajectory plan);
  void update_horizon();

  EnvConfig cfg_;
  Rng rng_;
  BoxPusherEnv box_env_;
  BoxPusherState box_state_;
  CouchMovingEnv couch_env_;
  std::shared_ptr<const Maze> maze_;
  CouchState couch_state_;
  std::shared_ptr<const AbstractTrajectory> plan_;
  SubsampledPrompt prompt_;
  std::optional<MatchTracker> tracker_;
  int episode_steps_ = 0;
  int horizon_ = 0;
};

// Rolling stack of the last k observations, padded with the first one.
class ObsStack {
 public:
  ObsStack(int k, int dim) : k_(k), dim_(dim) {}
  void start(const LowState& first) {
    buf_.clear();
    for (int i = 0; i < k_; ++i) buf_.push_back(first.v);
  }
  void push(const LowState& s) {
    buf_.push_back(s.v);
    while (static_cast<int>(buf_.size()) > k_) buf_.pop_front();
  }
  // k x dim, oldest first
  Mat history() const {
    Mat m(k_, dim_);
    for (int i = 0; i < k_; ++i) m.row(i) = buf_[i].transpose();
    return m;
  }

 private:
  int k_;
  int dim_;
  std::deque<Vec> buf_;
};

}  // namespace trt
