#include "trt/reward.hpp"

#include <cmath>

namespace trt {

double r_dist(double distance, double w) { return 1.0 - std::tanh(w * distance); }

std::optional<int> match_index(const LowState& low, const AbstractTrajectory& traj,
                               const Dissimilarity& d, double epsilon) {
  const HighState projected = apply_state_map(low, d.map);
  std::optional<int> best;
  double best_dist = epsilon;
  for (int i = 0; i < traj.size(); ++i) {
    const double dist = d.between(projected, traj[i]);
    if (dist < best_dist) {  // strict: ties keep the earlier index
      best_dist = dist;
      best = i + 1;
    }
  }
  return best;
}

MatchTracker::MatchTracker(std::shared_ptr<const AbstractTrajectory> traj, Dissimilarity d,
                           double epsilon)
    : traj_(std::move(traj)), d_(std::move(d)), epsilon_(epsilon) {
  check(traj_ && traj_->size() >= 1, "MatchTracker: empty trajectory");
  check(epsilon_ > 0.0, "MatchTracker: epsilon must be positive");
  // Eq-style matching is ill-defined on periodic plans: two far-apart plan
  // positions holding the same state make j ambiguous. Adjacent states may
  // be close (the final preprocessed segment can be short); revisits may not.
  const auto& s = traj_->states;
  for (size_t i = 0; i < s.size(); ++i) {
    for (size_t k = i + 2; k < s.size(); ++k) {
      if ((s[i].v - s[k].v).norm() < epsilon_ / 2.0) {
        throw ConfigError(
            "MatchTracker: trajectory revisits a state (indices " + std::to_string(i + 1) +
            " and " + std::to_string(k + 1) +
            " are within epsilon/2); chunk the plan first (chunk_periodic)");
      }
    }
  }
}

double MatchTracker::step(const LowState& low, const RewardParams& params) {
  const std::optional<int> jp = match_index(low, *traj_, d_, epsilon_);
  const int j_now = std::max(j_prev_, jp.value_or(0));
  double reward = 0.0;
  if (j_now == n()) {
    // has matched all high-level states: plain distance reward to s^H_n
    reward = r_dist(d_(low, (*traj_)[n() - 1]), params.w);
  } else if (jp && *jp > j_prev_) {
    // made progress: weighted by how deep into the plan the match is
    reward = (1.0 + params.beta * static_cast<double>(*jp)) *
             r_dist(d_(low, (*traj_)[*jp - 1]), params.w);
  }
  j_prev_ = j_now;
  return reward;
}

double step_reward(MatchTracker& tracker, const LowState& low, const RewardParams& params) {
  return tracker.step(low, params);
}

double combined_reward(double traj_reward, double task_reward, const RewardParams& params) {
  return traj_reward + params.lambda_task * task_reward;
}

std::vector<TraceRow> reward_trace(const std::vector<LowState>& episode,
                                   std::shared_ptr<const AbstractTrajectory> traj,
                                   const Dissimilarity& d, double epsilon,
                                   const RewardParams& params) {
  check(!episode.empty(), "reward_trace: empty episode");
  MatchTracker tracker(std::move(traj), d, epsilon);
  std::vector<TraceRow> rows;
  rows.reserve(episode.size());
  double running = 0.0;
  for (size_t t = 0; t < episode.size(); ++t) {
    const double r = tracker.step(episode[t], params);
    running += r;
    rows.push_back(TraceRow{static_cast<int>(t + 1), tracker.j_prev(), r, running});
  }
  return rows;
}

}  // namespace trt
