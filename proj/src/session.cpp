#include "trt/session.hpp"

#include "trt/policy.hpp"

namespace trt {

EnvConfig EnvConfig::box_pusher_train() {
  EnvConfig c;
  c.tag = EnvTag::box_pusher;
  c.plan.epsilon_spacing = c.box.box_width;  // matching stays well-posed
  c.plan.p = 2;
  c.plan.L_max = 32;
  c.eps_match = c.plan.epsilon_spacing;
  c.reward.lambda_task = 0.1;
  c.max_episode_len = 200;
  return c;
}

EnvConfig EnvConfig::box_pusher_test() {
  EnvConfig c = box_pusher_train();
  c.box.with_obstacles = true;
  return c;
}

EnvConfig EnvConfig::make_couch(Maze::Variant v, int corners) {
  EnvConfig c;
  c.tag = EnvTag::couch_moving;
  c.maze_variant = v;
  c.maze_corners = corners;
  c.plan.epsilon_spacing = 0.1;
  c.plan.p = 10;
  c.plan.L_max = 50;
  c.eps_match = 0.1;
  c.reward.lambda_task = 0.5;
  c.max_episode_len = 150;
  return c;
}

std::string EnvConfig::name() const {
  if (tag == EnvTag::box_pusher) return box.with_obstacles ? "box_pusher_test" : "box_pusher";
  return std::string("couch_") + variant_name(maze_variant) + "_" +
         std::to_string(maze_corners);
}

EnvConfig EnvConfig::for_name(const std::string& name) {
  if (name == "box_pusher") return box_pusher_train();
  if (name == "box_pusher_test") return box_pusher_test();
  if (name.rfind("couch_", 0) == 0) {
    const std::string rest = name.substr(6);
    const auto us = rest.find('_');
    check(us != std::string::npos, "bad couch env name: " + name);
    return make_couch(variant_from_name(rest.substr(0, us)), std::stoi(rest.substr(us + 1)));
  }
  throw ConfigError("unknown env name: " + name +
                    " (expected box_pusher, box_pusher_test, couch_<short|long>_<n>)");
}

Session::Session(const EnvConfig& cfg, uint64_t stream_seed)
    : cfg_(cfg), rng_(stream_seed), box_env_(cfg.box), couch_env_(cfg.couch) {}

void Session::reset() {
  if (cfg_.tag == EnvTag::box_pusher) {
    box_state_ = box_env_.reset(rng_);
  } else {
    maze_ = std::make_shared<Maze>(generate_maze(cfg_.maze_variant, cfg_.maze_corners, rng_));
    couch_state_ = couch_env_.reset(*maze_);
  }
  episode_steps_ = 0;
  make_plan_from_current();
  update_horizon();
}

void Session::load_box_state(const BoxPusherState& s) {
  check(cfg_.tag == EnvTag::box_pusher, "load_box_state on a couch session");
  box_state_ = s;
  box_state_.step_count = 0;
  episode_steps_ = 0;
  make_plan_from_current();
  update_horizon();
}

void Session::load_maze(std::shared_ptr<const Maze> maze) {
  check(cfg_.tag == EnvTag::couch_moving, "load_maze on a box pusher session");
  maze_ = std::move(maze);
  couch_state_ = couch_env_.reset(*maze_);
  episode_steps_ = 0;
  make_plan_from_current();
  update_horizon();
}

void Session::update_horizon() {
  horizon_ = cfg_.max_episode_len;
  if (cfg_.tag == EnvTag::couch_moving && cfg_.scale_horizon && maze_) {
    // test mazes are longer than the training one; give the episode a
    // proportional budget (the training config stays at max_episode_len)
    horizon_ = std::max(horizon_, 10 * static_cast<int>(maze_->path.size()));
  }
}

void Session::make_plan_from_current() {
  if (cfg_.tag == EnvTag::box_pusher) {
    const LowState low = box_env_.observe(box_state_);
    const HighState high = apply_state_map(low, StateMap::box_pusher());
    install_plan(plan_box_pusher(high, box_state_.goal, box_state_.obstacles,
                                 box_state_.box_width, cfg_.plan.epsilon_spacing, rng_));
  } else {
    if (episode_steps_ == 0 && (couch_state_.pos - maze_->start()).norm() < 1e-12) {
      install_plan(plan_couch(*maze_, cfg_.plan.epsilon_spacing));
    } else {
      install_plan(plan_couch_from(*maze_, couch_state_.pos, cfg_.plan.epsilon_spacing));
    }
  }
}

void Session::install_plan(AbstractTrajectory plan) {
  auto shared = std::make_shared<const AbstractTrajectory>(std::move(plan));
  prompt_ = subsample(*shared, cfg_.plan.p, cfg_.plan.L_max);
  tracker_.emplace(shared, Dissimilarity::for_env(cfg_.tag), cfg_.eps_match);
  plan_ = std::move(shared);
}

void Session::set_plan(const AbstractTrajectory& full_plan) { install_plan(full_plan); }

void Session::replan() { make_plan_from_current(); }

LowState Session::observe() const {
  if (cfg_.tag == EnvTag::box_pusher) return box_env_.observe(box_state_);
  return couch_env_.observe(couch_state_, *maze_);
}

Vec Session::goal_vec(Backbone b, int sgc_lookahead) const {
  if (b == Backbone::feedforward_sgc) {
    return select_subgoal(*tracker_, *plan_, sgc_lookahead).v;
  }
  if (cfg_.tag == EnvTag::box_pusher) {
    Vec g(2);
    g << box_state_.goal.x(), box_state_.goal.y();
    return g;
  }
  Vec g(2);
  const Vec2 gp = maze_->goal();
  g << gp.x(), gp.y();
  return g;
}

StepOut Session::step(const Vec& action) {
  check(has_plan(), "session step before reset");
  StepOut out;
  if (cfg_.tag == EnvTag::box_pusher) {
    check(action.size() == 2, "box pusher action must be 2-dimensional");
    box_state_ = box_env_.step(box_state_, Vec2(action[0], action[1]));
    out.obs = box_env_.observe(box_state_);
    out.task_reward = box_env_.task_reward(box_state_);
    out.success = box_env_.success(box_state_);
  } else {
    couch_state_ = couch_env_.step(couch_state_, *maze_, action);
    out.obs = couch_env_.observe(couch_state_, *maze_);
    out.task_reward = couch_env_.task_reward(couch_state_, *maze_);
    out.success = couch_env_.success(couch_state_, *maze_);
  }
  ++episode_steps_;
  out.traj_reward = tracker_->step(out.obs, cfg_.reward);
  out.reward = combined_reward(out.traj_reward, out.task_reward, cfg_.reward);
  out.j = tracker_->j_prev();
  out.terminal = out.success;
  out.truncated = !out.terminal && episode_steps_ >= horizon_;
  return out;
}

bool Session::success_now() const {
  if (cfg_.tag == EnvTag::box_pusher) return box_env_.success(box_state_);
  return couch_env_.success(couch_state_, *maze_);
}

void Session::teleport_box(Rng& rng) {
  check(cfg_.tag == EnvTag::box_pusher, "teleport_box on a couch session");
  const double bw = box_state_.box_width;
  const double lo = bw / 2.0, hi = cfg_.box.arena - bw / 2.0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Vec2 p(rng.uniform(lo, hi), rng.uniform(lo, hi));
    if ((p - box_state_.box).norm() < 3.0 * bw) continue;   // actually move it
    if ((p - box_state_.agent).norm() < 2.0 * bw) continue; // not onto the agent
    if ((p - box_state_.goal).norm() < 2.0 * bw) continue;  // not onto the goal
    box_state_.box = p;
    return;
  }
  throw ConfigError("teleport_box: no valid teleport target found");
}

}  // namespace trt
