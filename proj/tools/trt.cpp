// trt: trajectory-translation lab command line.
//
//   trt config --env <name> [--backbone <b>] --out cfg.json
//   trt train  --config cfg.json
//   trt eval   --ckpt final.ckpt --env box_pusher --episodes 128 [--replan]
//   trt plan   --snapshot snap.txt --out traj.txt [--variant-seed N]
//   trt replay --traj traj.txt --snapshot snap.txt [--ckpt c] [--out ep.txt]
//   trt attn   --ckpt final.ckpt --episode ep.txt --out heat
//   trt trace  --episode ep.txt [--out trace.txt]
//
// Exit codes: 0 success, 1 task failure, 2 configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "trt/attention.hpp"
#include "trt/io.hpp"
#include "trt/oracles.hpp"

namespace {

using namespace trt;

int cmd_config(const std::string& env_name, const std::string& backbone,
               const std::string& out) {
  RunConfig cfg = default_run_config(env_name, backbone_from_name(backbone));
  cfg.out_dir = "runs/" + cfg.env.name();
  save_run_config(out, cfg);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, int threads, int epochs_override) {
  RunConfig cfg = load_run_config(config_path);
  if (threads > 0) cfg.ppo.n_threads = threads;
  if (epochs_override >= 0) cfg.ppo.epochs = epochs_override;
  const TrainResult res = train_run<float>(cfg, [](const EpochLog& row) {
    std::cout << "epoch " << row.epoch << " steps " << row.env_steps << " success "
              << row.success_rate << " return " << row.mean_return << " kl " << row.kl;
    if (row.eval_success >= 0) std::cout << " eval " << row.eval_success;
    std::cout << std::endl;
  });
  std::cout << "checkpoint: " << res.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& env_name, int episodes, uint64_t seed,
             bool replan, const std::string& out) {
  ActorCritic<double> ac = load_checkpoint_d(ckpt);
  const EnvConfig env = EnvConfig::for_name(env_name);
  check(env.obs_dim() == ac.cfg.obs_dim,
        "checkpoint was trained for a different environment (obs_dim " +
            std::to_string(ac.cfg.obs_dim) + " vs " + std::to_string(env.obs_dim()) + ")");
  const EvalReport rep = evaluate(ac, env, episodes, seed, replan);
  std::cout << rep.to_text();
  if (!out.empty()) {
    std::ofstream f(out);
    f << rep.to_text();
  }
  return 0;
}

int cmd_plan(const std::string& snapshot, const std::string& out, uint64_t variant_seed) {
  Rng rng(variant_seed);
  if (sniff_snapshot(snapshot) == SnapshotKind::box_pusher) {
    const BoxPusherState s = read_box_snapshot(snapshot);
    Vec high(4);
    high << s.agent.x(), s.agent.y(), s.box.x(), s.box.y();
    const EnvConfig env = EnvConfig::box_pusher_train();
    const AbstractTrajectory traj = plan_box_pusher(
        HighState(high), s.goal, s.obstacles, s.box_width, env.plan.epsilon_spacing, rng);
    write_trajectory(out, traj, EnvTag::box_pusher);
  } else {
    const Maze maze = read_maze(snapshot);
    const EnvConfig env = EnvConfig::make_couch(maze.variant, maze.n_corners);
    write_trajectory(out, plan_couch(maze, env.plan.epsilon_spacing), EnvTag::couch_moving);
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_replay(const std::string& traj_path, const std::string& snapshot,
               const std::string& ckpt, const std::string& out) {
  auto [traj, env_tag] = read_trajectory(traj_path);

  EnvConfig env;
  std::optional<Maze> maze;
  std::unique_ptr<Session> session;
  if (sniff_snapshot(snapshot) == SnapshotKind::box_pusher) {
    check(env_tag == EnvTag::box_pusher, "trajectory/snapshot environment mismatch");
    env = EnvConfig::box_pusher_train();
    session = std::make_unique<Session>(env, 0);
    session->load_box_state(read_box_snapshot(snapshot));
  } else {
    check(env_tag == EnvTag::couch_moving, "trajectory/snapshot environment mismatch");
    maze = read_maze(snapshot);
    env = EnvConfig::make_couch(maze->variant, maze->n_corners);
    session = std::make_unique<Session>(env, 0);
    session->load_maze(std::make_shared<Maze>(*maze));
  }
  session->set_plan(traj);

  std::unique_ptr<Controller> ctrl;
  std::optional<ActorCritic<double>> ac;
  if (!ckpt.empty()) {
    ac.emplace(load_checkpoint_d(ckpt));
    check(ac->cfg.obs_dim == env.obs_dim(), "checkpoint/environment mismatch");
    ctrl = std::make_unique<NetController<double>>(*ac);
  } else {
    ctrl = std::make_unique<OracleController>();
  }

  EpisodeRecord rec;
  rec.env = env_tag;
  rec.traj = session->full_plan();
  rec.p = env.plan.p;
  rec.L_max = env.plan.L_max;
  rec.eps = env.eps_match;
  rec.maze = maze;
  rec.obs.push_back(session->observe());

  EpisodeResult res;
  ctrl->begin(*session);
  ctrl->on_obs(*session, session->observe());
  for (int step = 1; step <= session->horizon(); ++step) {
    const Vec a = ctrl->act(*session);
    const StepOut so = session->step(a);
    ctrl->on_obs(*session, so.obs);
    rec.obs.push_back(so.obs);
    res.steps = step;
    if (so.success) {
      res.success = true;
      break;
    }
  }
  res.j_final = session->tracker().j_prev();
  res.n_plan = session->tracker().n();

  if (!out.empty()) write_episode(out, rec);
  std::cout << "steps " << res.steps << " j_final " << res.j_final << "/" << res.n_plan
            << " success " << (res.success ? 1 : 0) << "\n";
  return res.success ? 0 : 1;
}

int cmd_attn(const std::string& ckpt, const std::string& episode, const std::string& out,
             int step_arg) {
  ActorCritic<double> ac = load_checkpoint_d(ckpt);
  const EpisodeRecord rec = read_episode(episode);
  check(ac.cfg.obs_dim == rec.obs.front().dim(), "checkpoint/episode mismatch");
  const SubsampledPrompt prompt = subsample(rec.traj, rec.p, rec.L_max);
  const Maze* maze = rec.maze ? &*rec.maze : nullptr;
  const AttentionMap map = attention_heatmap(ac, prompt, rec.obs, maze);

  const int step = step_arg < 0 ? static_cast<int>(map.per_step.size()) - 1 : step_arg;
  check(step >= 0 && step < static_cast<int>(map.per_step.size()), "attn: step out of range");

  std::ofstream grid(out + ".txt");
  check(static_cast<bool>(grid), "cannot write " + out + ".txt");
  for (const auto& row : map.per_step) {
    for (size_t i = 0; i < row.size(); ++i) grid << (i ? " " : "") << row[i];
    grid << "\n";
  }
  if (maze) {
    write_ppm(out + ".ppm", map.grids[step], map.rows, map.cols);
  } else {
    // prompt positions over time as an image strip
    std::vector<double> img;
    for (const auto& row : map.per_step) img.insert(img.end(), row.begin(), row.end());
    write_ppm(out + ".ppm", img, static_cast<int>(map.per_step.size()), map.prompt_len, 6);
  }
  std::cout << "wrote " << out << ".txt and " << out << ".ppm\n";
  return 0;
}

int cmd_trace(const std::string& episode, const std::string& out) {
  const EpisodeRecord rec = read_episode(episode);
  RewardParams params;  // trajectory-following part only, as in the trace figure
  const auto rows = reward_trace(rec.obs, std::make_shared<AbstractTrajectory>(rec.traj),
                                 Dissimilarity::for_env(rec.env), rec.eps, params);
  std::ostream* os = &std::cout;
  std::ofstream f;
  if (!out.empty()) {
    f.open(out);
    check(static_cast<bool>(f), "cannot write " + out);
    os = &f;
  }
  (*os) << "step j traj_reward running_sum\n";
  for (const auto& r : rows)
    (*os) << r.step << " " << r.j << " " << r.reward << " " << r.running << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajectory-translation lab"};
  app.require_subcommand(1);

  std::string env_name = "box_pusher", backbone = "causal-attention", out, config_path;
  std::string ckpt, snapshot, traj_path, episode;
  int episodes = 128, threads = 0, epochs_override = -1, step_arg = -1;
  uint64_t seed = 0, variant_seed = 0;
  bool replan = false;

  auto* c_config = app.add_subcommand("config", "write a default run configuration");
  c_config->add_option("--env", env_name, "box_pusher|box_pusher_test|couch_<short|long>_<n>");
  c_config->add_option("--backbone", backbone,
                       "causal-attention|recurrent|feedforward-gc|feedforward-sgc");
  c_config->add_option("--out", out)->required();

  auto* c_train = app.add_subcommand("train", "run PPO training");
  c_train->add_option("--config", config_path)->required();
  c_train->add_option("--threads", threads);
  c_train->add_option("--epochs", epochs_override, "override the configured epoch count");

  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  c_eval->add_option("--ckpt", ckpt)->required();
  c_eval->add_option("--env", env_name)->required();
  c_eval->add_option("--episodes", episodes);
  c_eval->add_option("--seed", seed);
  c_eval->add_flag("--replan", replan);
  c_eval->add_option("--out", out);

  auto* c_plan = app.add_subcommand("plan", "plan from an environment snapshot");
  c_plan->add_option("--snapshot", snapshot)->required();
  c_plan->add_option("--out", out)->required();
  c_plan->add_option("--variant-seed", variant_seed);

  auto* c_replay = app.add_subcommand("replay", "follow a trajectory file in an environment");
  c_replay->add_option("--traj", traj_path)->required();
  c_replay->add_option("--snapshot", snapshot)->required();
  c_replay->add_option("--ckpt", ckpt, "policy checkpoint; omit for the scripted oracle");
  c_replay->add_option("--out", out, "write an episode record");

  auto* c_attn = app.add_subcommand("attn", "attention heatmap for an episode");
  c_attn->add_option("--ckpt", ckpt)->required();
  c_attn->add_option("--episode", episode)->required();
  c_attn->add_option("--out", out)->required();
  c_attn->add_option("--step", step_arg, "episode step for the spatial map (default last)");

  auto* c_trace = app.add_subcommand("trace", "reward trace of a recorded episode");
  c_trace->add_option("--episode", episode)->required();
  c_trace->add_option("--out", out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_config->parsed()) return cmd_config(env_name, backbone, out);
    if (c_train->parsed()) return cmd_train(config_path, threads, epochs_override);
    if (c_eval->parsed()) return cmd_eval(ckpt, env_name, episodes, seed, replan, out);
    if (c_plan->parsed()) return cmd_plan(snapshot, out, variant_seed);
    if (c_replay->parsed()) return cmd_replay(traj_path, snapshot, ckpt, out);
    if (c_attn->parsed()) return cmd_attn(ckpt, episode, out, step_arg);
    if (c_trace->parsed()) return cmd_trace(episode, out);
  } catch (const trt::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const trt::PlanningError& e) {
    std::cerr << "planning error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
