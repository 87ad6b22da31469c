#include "trt/eval.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "trt/oracles.hpp"
#include "trt/ppo.hpp"

namespace trt {

namespace {

template <class S>
net::PromptCtx<S> session_prompt_ctx(const net::ModelP<S>& model, const Session& s) {
  if (model.is_mlp()) return net::PromptCtx<S>();
  const SubsampledPrompt& p = s.prompt();
  MatX<S> states(p.size(), p.traj.dim());
  for (int i = 0; i < p.size(); ++i)
    states.row(i) = p.traj[i].v.transpose().template cast<S>();
  return model.encode_prompt(states, p.orig_indices, false, nullptr);
}

}  // namespace

template <class S>
void NetController<S>::on_plan(Session& s) {
  ctx_ = session_prompt_ctx(ac_.actor, s);
}

template <class S>
Vec NetController<S>::act(Session& s) {
  const Mat hist = stack_.history();
  VecX<S> min;
  if (ac_.actor.is_mlp()) {
    const Vec goal = s.goal_vec(ac_.cfg.backbone, ac_.cfg.sgc_lookahead);
    const Vec cur = hist.row(hist.rows() - 1).transpose();
    min.resize(cur.size() + goal.size());
    min.head(cur.size()) = cur.template cast<S>();
    min.tail(goal.size()) = goal.template cast<S>();
  }
  const auto out = ac_.actor.forward_tail(ctx_, hist.template cast<S>(), min, false, nullptr,
                                          false, nullptr);
  Vec mean = out.out.template cast<double>();
  if (!sample_) return mean;
  ActionDistribution dist;
  dist.mean = std::move(mean);
  dist.log_std = ac_.actor.log_std.template cast<double>();
  return dist.sample(rng_);
}

template <class S>
void NetController<S>::on_obs(Session& s, const LowState& obs) {
  (void)s;
  if (fresh_) {
    stack_.start(obs);
    fresh_ = false;
  } else {
    stack_.push(obs);
  }
}

namespace {

void begin_episode(Controller& c, Session& s) {
  c.begin(s);
  c.on_obs(s, s.observe());
}

}  // namespace

EpisodeResult run_episode(Controller& c, Session& s, int max_steps, const StepHook& hook) {
  begin_episode(c, s);
  EpisodeResult res;
  for (int step = 1; step <= max_steps; ++step) {
    const Vec a = c.act(s);
    const StepOut out = s.step(a);
    c.on_obs(s, out.obs);
    if (hook) hook(s, step);
    res.steps = step;
    if (out.success) {
      res.success = true;
      break;
    }
  }
  res.j_final = s.tracker().j_prev();
  res.n_plan = s.tracker().n();
  return res;
}

EpisodeResult run_with_replanning(Controller& c, Session& s, const ReplanTrigger& timeout,
                                  bool final_state_trigger, int max_replans,
                                  const StepHook& hook) {
  begin_episode(c, s);
  EpisodeResult res;
  const int per_plan = timeout.max_steps;
  const int budget = per_plan * (max_replans + 1);
  const ReplanTrigger final_trig{ReplanTrigger::Kind::final_state_matched, per_plan};
  int plan_steps = 0;
  for (int step = 1; step <= budget; ++step) {
    const Vec a = c.act(s);
    const StepOut out = s.step(a);
    c.on_obs(s, out.obs);
    if (hook) hook(s, step);
    res.steps = step;
    ++plan_steps;
    if (out.success) {
      res.success = true;
      break;
    }
    if (res.replans_used < max_replans) {
      const bool fire_final =
          final_state_trigger && should_replan(s.tracker(), plan_steps, final_trig);
      const bool fire_timeout = should_replan(s.tracker(), plan_steps, timeout);
      if (fire_final || fire_timeout) {
        s.replan();
        c.on_plan(s);
        plan_steps = 0;
        res.replans_used += 1;
      }
    }
  }
  res.j_final = s.tracker().j_prev();
  res.n_plan = s.tracker().n();
  return res;
}

EpisodeResult run_chunked(Controller& c, Session& s,
                          const std::vector<AbstractTrajectory>& chunks,
                          int max_steps_per_chunk) {
  check(!chunks.empty(), "run_chunked: no chunks");
  EpisodeResult res;
  size_t chunk = 0;
  s.set_plan(chunks[chunk]);
  begin_episode(c, s);
  int plan_steps = 0;
  while (true) {
    const Vec a = c.act(s);
    const StepOut out = s.step(a);
    c.on_obs(s, out.obs);
    res.steps += 1;
    ++plan_steps;
    if (s.tracker().complete()) {
      if (chunk + 1 == chunks.size()) {
        res.success = true;  // every chunk's final state matched, in order
        break;
      }
      ++chunk;
      s.set_plan(chunks[chunk]);
      c.on_plan(s);
      res.replans_used += 1;
      plan_steps = 0;
      continue;
    }
    if (plan_steps >= max_steps_per_chunk) break;
  }
  res.j_final = s.tracker().j_prev();
  res.n_plan = s.tracker().n();
  return res;
}

std::string EvalReport::to_text() const {
  char line[160];
  std::snprintf(line, sizeof(line), "episodes %d success_rate %.9g stderr %.9g\n", n_episodes,
                success_rate, stderr_);
  std::string out = line;
  for (size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    std::snprintf(line, sizeof(line), "episode %zu steps %d j_final %d n %d success %d replans %d\n",
                  i, e.steps, e.j_final, e.n_plan, e.success ? 1 : 0, e.replans_used);
    out += line;
  }
  return out;
}

namespace {

EvalReport aggregate(std::vector<EpisodeResult> episodes) {
  EvalReport rep;
  rep.n_episodes = static_cast<int>(episodes.size());
  int succ = 0;
  for (const auto& e : episodes) succ += e.success ? 1 : 0;
  const double p = rep.n_episodes ? static_cast<double>(succ) / rep.n_episodes : 0.0;
  rep.success_rate = p;
  rep.stderr_ = rep.n_episodes ? std::sqrt(p * (1.0 - p) / rep.n_episodes) : 0.0;
  rep.episodes = std::move(episodes);
  return rep;
}

}  // namespace

template <class S>
EvalReport evaluate(ActorCritic<S>& ac, const EnvConfig& env, int n_episodes, uint64_t seed,
                    bool replan, int max_replans) {
  const Rng base(seed);
  std::vector<EpisodeResult> episodes;
  episodes.reserve(n_episodes);
  for (int ep = 0; ep < n_episodes; ++ep) {
    Session s(env, base.stream(ep + 1).next_u64());
    s.reset();
    NetController<S> ctrl(ac, false);
    if (replan) {
      const ReplanTrigger timeout{ReplanTrigger::Kind::timeout, s.horizon()};
      episodes.push_back(run_with_replanning(ctrl, s, timeout, true, max_replans));
    } else {
      episodes.push_back(run_episode(ctrl, s, s.horizon()));
    }
  }
  return aggregate(std::move(episodes));
}

EvalReport evaluate_oracle(const EnvConfig& env, int n_episodes, uint64_t seed,
                           const StepHook& hook, int max_replans, bool timeout_replan) {
  const Rng base(seed);
  std::vector<EpisodeResult> episodes;
  episodes.reserve(n_episodes);
  for (int ep = 0; ep < n_episodes; ++ep) {
    Session s(env, base.stream(ep + 1).next_u64());
    s.reset();
    OracleController ctrl;
    if (timeout_replan && max_replans > 0) {
      const ReplanTrigger timeout{ReplanTrigger::Kind::timeout, s.horizon()};
      episodes.push_back(run_with_replanning(ctrl, s, timeout, false, max_replans, hook));
    } else {
      episodes.push_back(run_episode(ctrl, s, s.horizon(), hook));
    }
  }
  return aggregate(std::move(episodes));
}

std::vector<SweepRow> granularity_sweep(const RunConfig& base, const std::vector<int>& p_values,
                                        int eval_episodes, uint64_t eval_seed) {
  check(!p_values.empty(), "granularity_sweep: empty p list");
  check(!base.out_dir.empty(), "granularity_sweep: base.out_dir required");
  std::vector<SweepRow> rows;
  for (const int p : p_values) {
    RunConfig cfg = base;
    cfg.env.plan.p = p;  // prompt sparsity only; rewards keep the full plan
    cfg.out_dir = base.out_dir + "/p_" + std::to_string(p);
    const TrainResult tr = train_run<float>(cfg);
    ActorCritic<float> ac = load_checkpoint_f(tr.checkpoint_path);
    SweepRow row;
    row.p = p;
    row.report = evaluate(ac, cfg.env, eval_episodes, eval_seed, false, 0);
    rows.push_back(std::move(row));
  }
  return rows;
}

template class NetController<float>;
template class NetController<double>;
template EvalReport evaluate<float>(ActorCritic<float>&, const EnvConfig&, int, uint64_t, bool,
                                    int);
template EvalReport evaluate<double>(ActorCritic<double>&, const EnvConfig&, int, uint64_t,
                                     bool, int);

}  // namespace trt
