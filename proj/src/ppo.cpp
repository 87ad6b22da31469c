#include "trt/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "trt/eval.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace trt {

void PPOConfig::validate() const {
  check(policy_lr > 0 && value_lr > 0, "PPOConfig: learning rates must be positive");
  check(rollout_batch > 0 && minibatch > 0 && minibatch <= rollout_batch,
        "PPOConfig: need 0 < minibatch <= rollout_batch");
  check(epochs >= 0 && grad_updates_per_epoch > 0, "PPOConfig: bad epoch settings");
  check(n_parallel_envs > 0 && rollout_batch % n_parallel_envs == 0,
        "PPOConfig: n_parallel_envs must divide rollout_batch");
  check(clip_ratio > 0 && target_kl > 0, "PPOConfig: clip_ratio/target_kl must be positive");
  check(gae_lambda >= 0 && gae_lambda <= 1 && discount > 0 && discount <= 1,
        "PPOConfig: bad gae/discount");
  check(n_threads >= 1, "PPOConfig: n_threads must be >= 1");
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<double>& next_values,
                      const std::vector<uint8_t>& chain_cut, double gamma, double lam) {
  const size_t T = rewards.size();
  check(values.size() == T && next_values.size() == T && chain_cut.size() == T,
        "compute_gae: misaligned inputs");
  GaeResult out;
  out.advantages.assign(T, 0.0);
  out.returns.assign(T, 0.0);
  double running = 0.0;
  for (size_t i = T; i-- > 0;) {
    const double delta = rewards[i] + gamma * next_values[i] - values[i];
    running = delta + gamma * lam * (chain_cut[i] ? 0.0 : running);
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
  }
  return out;
}

void RolloutBuffer::finalize(double gamma, double lam) {
  advantages.clear();
  returns.clear();
  index.clear();
  for (size_t e = 0; e < streams.size(); ++e) {
    const auto& st = streams[e];
    std::vector<double> r(st.size()), v(st.size()), nv(st.size());
    std::vector<uint8_t> cut(st.size());
    for (size_t t = 0; t < st.size(); ++t) {
      r[t] = st[t].reward;
      v[t] = st[t].value;
      if (st[t].terminal) {
        nv[t] = 0.0;
        cut[t] = 1;
      } else if (st[t].truncated) {
        nv[t] = st[t].bootstrap;
        cut[t] = 1;
      } else {
        check(t + 1 < st.size(), "RolloutBuffer: stream ends without terminal/truncated");
        nv[t] = st[t + 1].value;
        cut[t] = 0;
      }
    }
    const GaeResult g = compute_gae(r, v, nv, cut, gamma, lam);
    for (size_t t = 0; t < st.size(); ++t) {
      advantages.push_back(g.advantages[t]);
      returns.push_back(g.returns[t]);
      index.emplace_back(static_cast<int>(e), static_cast<int>(t));
    }
  }
}

namespace {

template <class S>
MatX<S> cast_mat(const Mat& m) {
  return m.template cast<S>();
}

template <class S>
VecX<S> cast_vec(const Vec& v) {
  return v.template cast<S>();
}

// Conditioning input for the feedforward baselines: [current obs; goal].
template <class S>
VecX<S> mlp_input(const Mat& obs_hist, const Vec& goal) {
  const Vec cur = obs_hist.row(obs_hist.rows() - 1).transpose();
  VecX<S> in(cur.size() + goal.size());
  in.head(cur.size()) = cur.template cast<S>();
  in.tail(goal.size()) = goal.template cast<S>();
  return in;
}

template <class S>
net::PromptCtx<S> make_prompt_ctx(const net::ModelP<S>& model, const PromptEntry& pe,
                                  bool train, Rng* rng) {
  if (model.is_mlp()) return net::PromptCtx<S>();
  return model.encode_prompt(cast_mat<S>(pe.states), pe.orig_idx, train, rng);
}

PromptEntry prompt_entry_from(const SubsampledPrompt& p) {
  PromptEntry pe;
  pe.orig_idx = p.orig_indices;
  pe.states.resize(p.size(), p.traj.dim());
  for (int i = 0; i < p.size(); ++i) pe.states.row(i) = p.traj[i].v.transpose();
  return pe;
}

}  // namespace

template <class S>
RolloutBuffer collect_rollouts(std::vector<Session>& sessions, ActorCritic<S>& ac,
                               const PPOConfig& cfg, Rng& rng) {
  const int n_envs = static_cast<int>(sessions.size());
  const int steps_per_env = cfg.rollout_batch / n_envs;
  const int lookahead = ac.cfg.sgc_lookahead;
  const bool is_mlp = ac.actor.is_mlp();

  RolloutBuffer buf;
  buf.streams.resize(n_envs);

  Rng coll(rng.next_u64());
  std::vector<Rng> act_rng;
  std::vector<net::PromptCtx<S>> ctx_a(n_envs), ctx_c(n_envs);
  std::vector<ObsStack> stacks;
  std::vector<int> prompt_ids(n_envs);
  std::vector<double> ep_return(n_envs, 0.0);

  auto fresh_episode = [&](int e) {
    sessions[e].reset();
    buf.prompts.push_back(prompt_entry_from(sessions[e].prompt()));
    prompt_ids[e] = static_cast<int>(buf.prompts.size()) - 1;
    ctx_a[e] = make_prompt_ctx(ac.actor, buf.prompts.back(), false, nullptr);
    ctx_c[e] = make_prompt_ctx(ac.critic, buf.prompts.back(), false, nullptr);
    stacks[e].start(sessions[e].observe());
    ep_return[e] = 0.0;
  };

  for (int e = 0; e < n_envs; ++e) {
    act_rng.push_back(coll.stream(e + 1));
    stacks.emplace_back(ac.cfg.k, ac.cfg.obs_dim);
  }
  for (int e = 0; e < n_envs; ++e) fresh_episode(e);

  const VecX<S> empty_goal;
  for (int t = 0; t < steps_per_env; ++t) {
    for (int e = 0; e < n_envs; ++e) {
      Transition tr;
      tr.obs_hist = stacks[e].history();
      if (is_mlp) tr.goal = sessions[e].goal_vec(ac.cfg.backbone, lookahead);
      tr.prompt_id = prompt_ids[e];

      const MatX<S> oh = cast_mat<S>(tr.obs_hist);
      const VecX<S> min = is_mlp ? mlp_input<S>(tr.obs_hist, tr.goal) : empty_goal;
      const auto a_out = ac.actor.forward_tail(ctx_a[e], oh, min, false, nullptr, false, nullptr);
      const auto c_out = ac.critic.forward_tail(ctx_c[e], oh, min, false, nullptr, false, nullptr);

      ActionDistribution dist;
      dist.mean = a_out.out.template cast<double>();
      dist.log_std = ac.actor.log_std.template cast<double>();
      tr.action = dist.sample(act_rng[e]);
      tr.logp = dist.log_prob(tr.action);
      tr.value = static_cast<double>(c_out.value());

      StepOut out = sessions[e].step(tr.action);
      tr.reward = out.reward;
      tr.terminal = out.terminal;
      tr.truncated = out.truncated;
      tr.j = out.j;
      tr.post_obs = out.obs;
      ep_return[e] += out.reward;

      if (out.terminal || out.truncated) {
        if (out.truncated) {
          stacks[e].push(out.obs);
          const MatX<S> oh2 = cast_mat<S>(stacks[e].history());
          const VecX<S> min2 =
              is_mlp ? mlp_input<S>(stacks[e].history(),
                                    sessions[e].goal_vec(ac.cfg.backbone, lookahead))
                     : empty_goal;
          tr.bootstrap = static_cast<double>(
              ac.critic.forward_tail(ctx_c[e], oh2, min2, false, nullptr, false, nullptr)
                  .value());
        }
        buf.episodes_done += 1;
        buf.episodes_success += out.success ? 1 : 0;
        buf.return_sum += ep_return[e];
        buf.streams[e].push_back(std::move(tr));
        fresh_episode(e);
      } else {
        stacks[e].push(out.obs);
        buf.streams[e].push_back(std::move(tr));
      }
    }
  }

  // collection cut: bootstrap unfinished episodes without ending them
  for (int e = 0; e < n_envs; ++e) {
    Transition& last = buf.streams[e].back();
    if (!last.terminal && !last.truncated) {
      last.truncated = true;
      const MatX<S> oh = cast_mat<S>(stacks[e].history());
      const VecX<S> min =
          is_mlp ? mlp_input<S>(stacks[e].history(),
                                sessions[e].goal_vec(ac.cfg.backbone, lookahead))
                 : empty_goal;
      last.bootstrap = static_cast<double>(
          ac.critic.forward_tail(ctx_c[e], oh, min, false, nullptr, false, nullptr).value());
    }
  }
  return buf;
}

template <class S>
void adam_step_impl(typename AdamPair<S>::State& st, double lr, net::ModelP<S>& params,
                    net::ModelP<S>& grads) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<S*> pdata;
  std::vector<Eigen::Index> sizes;
  params.visit([&](const std::string&, auto& m) {
    pdata.push_back(m.data());
    sizes.push_back(m.size());
  });
  if (st.m.empty()) {
    for (Eigen::Index n : sizes) {
      st.m.push_back(VecX<S>::Zero(n));
      st.v.push_back(VecX<S>::Zero(n));
    }
  }
  st.t += 1;
  const S c1 = static_cast<S>(1.0 / (1.0 - std::pow(b1, static_cast<double>(st.t))));
  const S c2 = static_cast<S>(1.0 / (1.0 - std::pow(b2, static_cast<double>(st.t))));
  size_t i = 0;
  grads.visit([&](const std::string&, auto& gm) {
    Eigen::Map<VecX<S>> p(pdata[i], sizes[i]);
    Eigen::Map<VecX<S>> g(gm.data(), gm.size());
    auto& m = st.m[i];
    auto& v = st.v[i];
    m = static_cast<S>(b1) * m + static_cast<S>(1.0 - b1) * g;
    v = static_cast<S>(b2) * v + static_cast<S>(1.0 - b2) * g.cwiseProduct(g);
    p.array() -= static_cast<S>(lr) * (m.array() * c1) /
                 ((v.array() * c2).sqrt() + static_cast<S>(eps));
    ++i;
  });
}

template <class S>
void AdamPair<S>::step_actor(net::ModelP<S>& params, net::ModelP<S>& grads) {
  adam_step_impl<S>(actor, policy_lr, params, grads);
}
template <class S>
void AdamPair<S>::step_critic(net::ModelP<S>& params, net::ModelP<S>& grads) {
  adam_step_impl<S>(critic, value_lr, params, grads);
}

template <class S>
UpdateStats ppo_update(RolloutBuffer& buf, ActorCritic<S>& ac, const PPOConfig& cfg,
                       AdamPair<S>& opt, Rng& rng) {
  const int N = buf.total();
  check(N > 0 && !buf.index.empty(), "ppo_update: buffer not finalized");
  const int B = std::min(cfg.minibatch, N);
  const bool is_mlp = ac.actor.is_mlp();
  const int n_threads = std::max(1, cfg.n_threads);

  UpdateStats stats;
  Rng upd(rng.next_u64());

  std::vector<int> order(N);
  for (int i = 0; i < N; ++i) order[i] = i;
  auto reshuffle = [&]() {
    for (int i = N - 1; i > 0; --i) {
      const int j = static_cast<int>(upd.next_u64() % static_cast<uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }
  };
  reshuffle();
  int pos = 0;

  std::vector<net::ModelP<S>> ga(n_threads), gc(n_threads);
  for (int t = 0; t < n_threads; ++t) {
    ga[t] = ac.actor.zeros_like();
    gc[t] = ac.critic.zeros_like();
  }
  net::ModelP<S> acc_a = ac.actor.zeros_like();
  net::ModelP<S> acc_c = ac.critic.zeros_like();
  int acc_count = 0;
  const int accum_group =
      cfg.grad_accumulation ? (cfg.grad_updates_per_epoch + 2) / 3 : 1;

  double kl_sum = 0.0, aloss_sum = 0.0, closs_sum = 0.0, clip_sum = 0.0;
  int applied = 0;
  bool stop = false;

  for (int u = 0; u < cfg.grad_updates_per_epoch && !stop; ++u) {
    if (pos + B > N) {
      reshuffle();
      pos = 0;
    }
    const int* mb = order.data() + pos;
    pos += B;

    // normalize advantages per update batch
    double mean = 0.0;
    for (int i = 0; i < B; ++i) mean += buf.advantages[mb[i]];
    mean /= B;
    double var = 0.0;
    for (int i = 0; i < B; ++i) {
      const double d = buf.advantages[mb[i]] - mean;
      var += d * d;
    }
    var /= B;
    const double astd = std::sqrt(var) + 1e-8;

    // group samples by prompt for shared-prefix processing
    std::vector<int> group_of_prompt(buf.prompts.size(), -1);
    std::vector<std::vector<int>> groups;  // sample positions in mb
    for (int i = 0; i < B; ++i) {
      const auto [e, t] = buf.index[mb[i]];
      const int pid = buf.streams[e][t].prompt_id;
      if (!is_mlp && group_of_prompt[pid] < 0) {
        group_of_prompt[pid] = static_cast<int>(groups.size());
        groups.emplace_back();
      }
      if (is_mlp) {
        if (groups.empty()) groups.emplace_back();
        groups[0].push_back(i);
      } else {
        groups[group_of_prompt[pid]].push_back(i);
      }
    }

    const uint64_t upd_salt = upd.next_u64();
    const int n_groups = static_cast<int>(groups.size());
    std::vector<double> th_kl(n_threads, 0.0), th_aloss(n_threads, 0.0),
        th_closs(n_threads, 0.0), th_clip(n_threads, 0.0);

#ifdef _OPENMP
#pragma omp parallel for schedule(static, 1) num_threads(n_threads)
#endif
    for (int gi = 0; gi < n_groups; ++gi) {
#ifdef _OPENMP
      const int tid = omp_get_thread_num();
#else
      const int tid = 0;
#endif
      const auto& members = groups[gi];
      const auto [e0, t0] = buf.index[mb[members[0]]];
      const int pid = buf.streams[e0][t0].prompt_id;
      Rng grng(upd_salt ^ (0x51ed2701u + static_cast<uint64_t>(pid) * 0x9e3779b97f4a7c15ull));
      net::PromptCtx<S> pca = make_prompt_ctx(ac.actor, buf.prompts[pid], true, &grng);
      net::PromptCtx<S> pcc = make_prompt_ctx(ac.critic, buf.prompts[pid], true, &grng);
      net::GroupGrad<S> gga, ggc;
      if (ac.actor.is_gpt()) {
        gga.init_gpt(ac.cfg.n_layers(), pca.Lp, ac.cfg.model_width());
        ggc.init_gpt(ac.cfg.n_layers(), pcc.Lp, ac.cfg.model_width());
      } else if (ac.actor.is_lstm()) {
        gga.init_lstm(ac.cfg.layer_dims);
        ggc.init_lstm(ac.cfg.layer_dims);
      }

      for (const int i : members) {
        const int flat = mb[i];
        const auto [e, t] = buf.index[flat];
        const Transition& tr = buf.streams[e][t];
        Rng srng(upd_salt ^ (0xabcd1234u + static_cast<uint64_t>(flat) * 0xd1342543de82ef95ull));

        const MatX<S> oh = cast_mat<S>(tr.obs_hist);
        const VecX<S> min = is_mlp ? mlp_input<S>(tr.obs_hist, tr.goal) : VecX<S>();
        net::TailCache<S> tca, tcc;
        const auto aout = ac.actor.forward_tail(pca, oh, min, true, &srng, false, &tca);
        const auto cout = ac.critic.forward_tail(pcc, oh, min, true, &srng, false, &tcc);

        const VecX<S> action = cast_vec<S>(tr.action);
        const double logp_new = gaussian_logp(aout.out, ac.actor.log_std, action);
        const double ratio = std::exp(logp_new - tr.logp);
        const double adv = (buf.advantages[flat] - mean) / astd;
        const double surr1 = ratio * adv;
        const double clipped =
            std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
        const double surr2 = clipped * adv;

        th_kl[tid] += tr.logp - logp_new;
        th_aloss[tid] += -std::min(surr1, surr2);
        th_clip[tid] += std::abs(ratio - 1.0) > cfg.clip_ratio ? 1.0 : 0.0;

        const double coeff = (surr1 <= surr2) ? (-adv * ratio / B) : 0.0;
        if (coeff != 0.0) {
          VecX<S> dmean, dlogstd;
          gaussian_logp_grad(aout.out, ac.actor.log_std, action, dmean, dlogstd);
          dmean *= static_cast<S>(coeff);
          ga[tid].log_std += dlogstd * static_cast<S>(coeff);
          ac.actor.backward_tail(pca, tca, dmean, ga[tid], gga);
        }

        const double verr = static_cast<double>(cout.value()) - buf.returns[flat];
        th_closs[tid] += verr * verr;
        VecX<S> dv(1);
        dv[0] = static_cast<S>(2.0 * verr / B);
        ac.critic.backward_tail(pcc, tcc, dv, gc[tid], ggc);
      }
      ac.actor.backward_prompt(pca, gga, ga[tid]);
      ac.critic.backward_prompt(pcc, ggc, gc[tid]);
    }

    for (int t = 1; t < n_threads; ++t) {
      ga[0].add_from(ga[t]);
      gc[0].add_from(gc[t]);
      ga[t].set_zero();
      gc[t].set_zero();
    }

    if (cfg.grad_accumulation) {
      acc_a.add_from(ga[0]);
      acc_c.add_from(gc[0]);
      acc_count += 1;
    } else {
      opt.step_actor(ac.actor, ga[0]);
      opt.step_critic(ac.critic, gc[0]);
    }
    ga[0].set_zero();
    gc[0].set_zero();

    double kl_mb = 0.0, al = 0.0, cl = 0.0, cf = 0.0;
    for (int t = 0; t < n_threads; ++t) {
      kl_mb += th_kl[t];
      al += th_aloss[t];
      cl += th_closs[t];
      cf += th_clip[t];
    }
    kl_mb /= B;
    applied += 1;
    kl_sum += kl_mb;
    aloss_sum += al / B;
    closs_sum += cl / B;
    clip_sum += cf / B;

    const bool accum_boundary =
        cfg.grad_accumulation &&
        (acc_count == accum_group || u == cfg.grad_updates_per_epoch - 1);
    if (kl_mb > cfg.target_kl) stop = true;
    if (cfg.grad_accumulation && (accum_boundary || stop) && acc_count > 0) {
      const S inv = static_cast<S>(1.0 / acc_count);
      acc_a.visit([&](const std::string&, auto& m) { m *= inv; });
      acc_c.visit([&](const std::string&, auto& m) { m *= inv; });
      opt.step_actor(ac.actor, acc_a);
      opt.step_critic(ac.critic, acc_c);
      acc_a.set_zero();
      acc_c.set_zero();
      acc_count = 0;
    }
  }

  stats.updates_applied = applied;
  stats.kl = applied ? kl_sum / applied : 0.0;
  stats.actor_loss = applied ? aloss_sum / applied : 0.0;
  stats.critic_loss = applied ? closs_sum / applied : 0.0;
  stats.clip_fraction = applied ? clip_sum / applied : 0.0;
  return stats;
}

namespace {

std::string fmt_g(double v) {
  char b[40];
  std::snprintf(b, sizeof(b), "%.9g", v);
  return b;
}

}  // namespace

std::string RunLog::to_text() const {
  std::string out = "epoch env_steps success_rate mean_return kl actor_loss critic_loss eval_success\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + " " + std::to_string(r.env_steps) + " " +
           fmt_g(r.success_rate) + " " + fmt_g(r.mean_return) + " " + fmt_g(r.kl) + " " +
           fmt_g(r.actor_loss) + " " + fmt_g(r.critic_loss) + " " + fmt_g(r.eval_success) +
           "\n";
  }
  return out;
}

template <class S>
TrainResult train_run(const RunConfig& cfg, const ProgressFn& progress) {
  cfg.ppo.validate();
  cfg.policy.validate();

  TrainResult result;
  ActorCritic<S> ac;
  ac.init(cfg.policy, cfg.ppo.seed);
  AdamPair<S> opt(cfg.ppo.policy_lr, cfg.ppo.value_lr);
  Rng rng(cfg.ppo.seed);

  std::vector<Session> sessions;
  sessions.reserve(cfg.ppo.n_parallel_envs);
  const Rng env_base = Rng(cfg.ppo.seed).stream(77);
  for (int e = 0; e < cfg.ppo.n_parallel_envs; ++e)
    sessions.emplace_back(cfg.env, env_base.stream(e + 1).next_u64());

  const bool to_disk = !cfg.out_dir.empty();
  if (to_disk) std::filesystem::create_directories(cfg.out_dir);
  const std::string ckpt_path = to_disk ? cfg.out_dir + "/final.ckpt" : "";

  long env_steps = 0;
  for (int epoch = 1; epoch <= cfg.ppo.epochs; ++epoch) {
    RolloutBuffer buf = collect_rollouts(sessions, ac, cfg.ppo, rng);
    buf.finalize(cfg.ppo.discount, cfg.ppo.gae_lambda);
    const UpdateStats st = ppo_update(buf, ac, cfg.ppo, opt, rng);
    env_steps += buf.total();

    EpochLog row;
    row.epoch = epoch;
    row.env_steps = env_steps;
    row.success_rate =
        buf.episodes_done ? static_cast<double>(buf.episodes_success) / buf.episodes_done : 0.0;
    row.mean_return = buf.episodes_done ? buf.return_sum / buf.episodes_done : 0.0;
    row.kl = st.kl;
    row.actor_loss = st.actor_loss;
    row.critic_loss = st.critic_loss;

    const bool eval_now = cfg.ppo.eval_every > 0 && epoch % cfg.ppo.eval_every == 0;
    if (eval_now) {
      const EvalReport rep = evaluate(ac, cfg.env, cfg.ppo.eval_episodes,
                                      Rng(cfg.ppo.seed).stream(991).next_u64(), false, 0);
      row.eval_success = rep.success_rate;
      result.final_eval_success = rep.success_rate;
    }
    result.log.rows.push_back(row);
    if (progress) progress(row);

    if (to_disk && cfg.ppo.checkpoint_every > 0 && epoch % cfg.ppo.checkpoint_every == 0)
      save_checkpoint(cfg.out_dir + "/epoch_" + std::to_string(epoch) + ".ckpt", ac);

    if (eval_now && cfg.ppo.stop_at_success >= 0.0 &&
        row.eval_success >= cfg.ppo.stop_at_success)
      break;
  }

  if (to_disk) {
    save_checkpoint(ckpt_path, ac);
    std::ofstream log_out(cfg.out_dir + "/runlog.txt");
    log_out << result.log.to_text();
  }
  result.checkpoint_path = ckpt_path;
  result.env_steps = env_steps;
  return result;
}

template RolloutBuffer collect_rollouts<float>(std::vector<Session>&, ActorCritic<float>&,
                                               const PPOConfig&, Rng&);
template RolloutBuffer collect_rollouts<double>(std::vector<Session>&, ActorCritic<double>&,
                                                const PPOConfig&, Rng&);
template UpdateStats ppo_update<float>(RolloutBuffer&, ActorCritic<float>&, const PPOConfig&,
                                       AdamPair<float>&, Rng&);
template UpdateStats ppo_update<double>(RolloutBuffer&, ActorCritic<double>&, const PPOConfig&,
                                        AdamPair<double>&, Rng&);
template struct AdamPair<float>;
template struct AdamPair<double>;
template TrainResult train_run<float>(const RunConfig&, const ProgressFn&);
template TrainResult train_run<double>(const RunConfig&, const ProgressFn&);

}  // namespace trt
