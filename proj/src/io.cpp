#include "trt/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace trt {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof(b), "%.17g", v);
  return b;
}

std::vector<double> parse_csv_line(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    out.push_back(std::stod(cell));
  }
  return out;
}

std::string csv_line(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt(v[i]);
  }
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  check(static_cast<bool>(in), "cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  check(static_cast<bool>(out), "cannot open " + path + " for writing");
  return out;
}

// "key=value" tokens on a header line
std::string header_field(const std::string& line, const std::string& key) {
  const std::string token = key + "=";
  const auto pos = line.find(token);
  check(pos != std::string::npos, "missing header field '" + key + "' in: " + line);
  const auto start = pos + token.size();
  auto end = line.find(' ', start);
  if (end == std::string::npos) end = line.size();
  return line.substr(start, end - start);
}

}  // namespace

void write_trajectory(const std::string& path, const AbstractTrajectory& traj, EnvTag env) {
  check(!traj.empty(), "write_trajectory: empty trajectory");
  auto out = open_out(path);
  out << "dim=" << traj.dim() << " env=" << env_tag_name(env) << "\n";
  for (const auto& s : traj.states) out << csv_line(s.v) << "\n";
}

std::pair<AbstractTrajectory, EnvTag> read_trajectory(const std::string& path) {
  auto in = open_in(path);
  std::string header;
  check(static_cast<bool>(std::getline(in, header)), "trajectory file is empty: " + path);
  const int dim = std::stoi(header_field(header, "dim"));
  const EnvTag env = env_tag_from_name(header_field(header, "env"));
  AbstractTrajectory traj;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto vals = parse_csv_line(line);
    check(static_cast<int>(vals.size()) == dim,
          "trajectory row has " + std::to_string(vals.size()) + " values, expected " +
              std::to_string(dim));
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = vals[i];
    traj.states.emplace_back(std::move(v));
  }
  check(!traj.empty(), "trajectory file has no states: " + path);
  return {std::move(traj), env};
}

void write_box_snapshot(const std::string& path, const BoxPusherState& s) {
  auto out = open_out(path);
  out << "env=box_pusher\n";
  out << "box_width=" << fmt(s.box_width) << "\n";
  out << "agent=" << fmt(s.agent.x()) << "," << fmt(s.agent.y()) << "\n";
  out << "box=" << fmt(s.box.x()) << "," << fmt(s.box.y()) << "\n";
  out << "goal=" << fmt(s.goal.x()) << "," << fmt(s.goal.y()) << "\n";
  out << "obstacles=" << s.obstacles.size() << "\n";
  for (const auto& r : s.obstacles)
    out << fmt(r.lo.x()) << "," << fmt(r.lo.y()) << "," << fmt(r.hi.x()) << ","
        << fmt(r.hi.y()) << "\n";
}

BoxPusherState read_box_snapshot(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  check(static_cast<bool>(std::getline(in, line)) && line == "env=box_pusher",
        "not a box pusher snapshot: " + path);
  BoxPusherState s;
  auto next_field = [&](const std::string& key) {
    check(static_cast<bool>(std::getline(in, line)), "snapshot truncated at " + key);
    return header_field(line, key);
  };
  s.box_width = std::stod(next_field("box_width"));
  auto vec2 = [&](const std::string& key) {
    const auto vals = parse_csv_line(next_field(key));
    check(vals.size() == 2, "snapshot field " + key + " must have two values");
    return Vec2(vals[0], vals[1]);
  };
  s.agent = vec2("agent");
  s.box = vec2("box");
  s.goal = vec2("goal");
  const int n_obs = std::stoi(next_field("obstacles"));
  for (int i = 0; i < n_obs; ++i) {
    check(static_cast<bool>(std::getline(in, line)), "snapshot truncated in obstacles");
    const auto vals = parse_csv_line(line);
    check(vals.size() == 4, "obstacle row must have four values");
    s.obstacles.push_back(Rect{Vec2(vals[0], vals[1]), Vec2(vals[2], vals[3])});
  }
  return s;
}

std::string maze_to_text(const Maze& maze) {
  std::string out = "maze variant=" + std::string(variant_name(maze.variant)) +
                    " n_corners=" + std::to_string(maze.n_corners) +
                    " seed=" + std::to_string(maze.seed) + " rows=" + std::to_string(maze.rows) +
                    " cols=" + std::to_string(maze.cols) + "\n";
  std::vector<char> grid(static_cast<size_t>(maze.rows) * maze.cols);
  for (int r = 0; r < maze.rows; ++r)
    for (int c = 0; c < maze.cols; ++c) grid[r * maze.cols + c] = maze.wall(r, c) ? '#' : '.';
  for (const auto& ch : maze.chamber_centers) {
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) grid[(ch.x() + dr) * maze.cols + ch.y() + dc] = 'C';
  }
  for (const int ci : maze.corner_path_idx) {
    const Cell c = maze.path[ci];
    grid[c.x() * maze.cols + c.y()] = 'K';
  }
  grid[maze.path.front().x() * maze.cols + maze.path.front().y()] = 'S';
  grid[maze.path.back().x() * maze.cols + maze.path.back().y()] = 'G';
  for (int r = 0; r < maze.rows; ++r) {
    out.append(&grid[r * maze.cols], maze.cols);
    out += "\n";
  }
  return out;
}

Maze maze_from_text(const std::string& text) {
  std::stringstream in(text);
  std::string header;
  check(static_cast<bool>(std::getline(in, header)) && header.rfind("maze ", 0) == 0,
        "not a maze file");
  Maze m;
  m.variant = variant_from_name(header_field(header, "variant"));
  m.n_corners = std::stoi(header_field(header, "n_corners"));
  m.seed = std::stoull(header_field(header, "seed"));
  m.rows = std::stoi(header_field(header, "rows"));
  m.cols = std::stoi(header_field(header, "cols"));
  m.occ.assign(static_cast<size_t>(m.rows) * m.cols, 1);
  Cell start(-1, -1), goal(-1, -1);
  std::vector<Cell> chambers;
  for (int r = 0; r < m.rows; ++r) {
    std::string line;
    check(static_cast<bool>(std::getline(in, line)), "maze grid truncated");
    check(static_cast<int>(line.size()) >= m.cols, "maze grid row too short");
    for (int c = 0; c < m.cols; ++c) {
      const char ch = line[c];
      if (ch == '#') continue;
      m.occ[r * m.cols + c] = 0;
      if (ch == 'S') {
        start = Cell(r, c);
        chambers.push_back(start);
      } else if (ch == 'G') {
        goal = Cell(r, c);
      } else if (ch == 'K') {
        chambers.push_back(Cell(r, c));
      }
    }
  }
  check(start.x() >= 0 && goal.x() >= 0, "maze file lacks S or G");
  // keep the start chamber first, corners in path order after rebuild
  m.rebuild_path(start, goal);
  check(static_cast<int>(m.corner_path_idx.size()) == m.n_corners,
        "maze file: grid corners disagree with the n_corners header");
  m.chamber_centers.clear();
  m.chamber_centers.push_back(start);
  for (const int ci : m.corner_path_idx) m.chamber_centers.push_back(m.path[ci]);
  return m;
}

void write_maze(const std::string& path, const Maze& maze) {
  auto out = open_out(path);
  out << maze_to_text(maze);
}

Maze read_maze(const std::string& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return maze_from_text(ss.str());
}

SnapshotKind sniff_snapshot(const std::string& path) {
  auto in = open_in(path);
  std::string first;
  check(static_cast<bool>(std::getline(in, first)), "empty snapshot file: " + path);
  if (first.rfind("maze ", 0) == 0) return SnapshotKind::maze;
  if (first == "env=box_pusher") return SnapshotKind::box_pusher;
  throw ConfigError("unrecognized snapshot file: " + path);
}

void write_episode(const std::string& path, const EpisodeRecord& rec) {
  check(!rec.traj.empty() && !rec.obs.empty(), "write_episode: empty record");
  auto out = open_out(path);
  out << "episode env=" << env_tag_name(rec.env) << " obs_dim=" << rec.obs.front().dim()
      << " traj_dim=" << rec.traj.dim() << " traj_n=" << rec.traj.size()
      << " steps=" << rec.obs.size() << " p=" << rec.p << " L_max=" << rec.L_max
      << " eps=" << fmt(rec.eps) << "\n";
  out << "traj\n";
  for (const auto& s : rec.traj.states) out << csv_line(s.v) << "\n";
  out << "obs\n";
  for (const auto& s : rec.obs) out << csv_line(s.v) << "\n";
  if (rec.maze) {
    out << "maze_block\n";
    out << maze_to_text(*rec.maze);
  }
  out << "end\n";
}

EpisodeRecord read_episode(const std::string& path) {
  auto in = open_in(path);
  std::string header;
  check(static_cast<bool>(std::getline(in, header)) && header.rfind("episode ", 0) == 0,
        "not an episode file: " + path);
  EpisodeRecord rec;
  rec.env = env_tag_from_name(header_field(header, "env"));
  const int obs_dim = std::stoi(header_field(header, "obs_dim"));
  const int traj_dim = std::stoi(header_field(header, "traj_dim"));
  const int traj_n = std::stoi(header_field(header, "traj_n"));
  const int steps = std::stoi(header_field(header, "steps"));
  rec.p = std::stoi(header_field(header, "p"));
  rec.L_max = std::stoi(header_field(header, "L_max"));
  rec.eps = std::stod(header_field(header, "eps"));

  std::string line;
  check(static_cast<bool>(std::getline(in, line)) && line == "traj", "expected traj section");
  for (int i = 0; i < traj_n; ++i) {
    check(static_cast<bool>(std::getline(in, line)), "episode truncated in traj");
    const auto vals = parse_csv_line(line);
    check(static_cast<int>(vals.size()) == traj_dim, "bad traj row width");
    Vec v(traj_dim);
    for (int k = 0; k < traj_dim; ++k) v[k] = vals[k];
    rec.traj.states.emplace_back(std::move(v));
  }
  check(static_cast<bool>(std::getline(in, line)) && line == "obs", "expected obs section");
  for (int i = 0; i < steps; ++i) {
    check(static_cast<bool>(std::getline(in, line)), "episode truncated in obs");
    const auto vals = parse_csv_line(line);
    check(static_cast<int>(vals.size()) == obs_dim, "bad obs row width");
    Vec v(obs_dim);
    for (int k = 0; k < obs_dim; ++k) v[k] = vals[k];
    rec.obs.emplace_back(LowState(std::move(v)));
  }
  check(static_cast<bool>(std::getline(in, line)), "episode truncated at trailer");
  if (line == "maze_block") {
    std::stringstream rest;
    rest << in.rdbuf();
    std::string text = rest.str();
    const auto endpos = text.rfind("end\n");
    check(endpos != std::string::npos, "episode missing end marker");
    rec.maze = maze_from_text(text.substr(0, endpos));
  } else {
    check(line == "end", "episode missing end marker");
  }
  return rec;
}

// ---------------------------------------------------------------------------
// run configuration

namespace {

json plan_to_json(const PlanConfig& p) {
  return json{{"epsilon_spacing", p.epsilon_spacing}, {"p", p.p}, {"L_max", p.L_max},
              {"seed", p.seed}};
}

void plan_from_json(const json& j, PlanConfig& p) {
  p.epsilon_spacing = j.at("epsilon_spacing");
  p.p = j.at("p");
  p.L_max = j.at("L_max");
  p.seed = j.value("seed", 0ull);
}

json env_to_json(const EnvConfig& e) {
  json j{{"name", e.name()},
         {"max_episode_len", e.max_episode_len},
         {"eps_match", e.eps_match},
         {"scale_horizon", e.scale_horizon},
         {"plan", plan_to_json(e.plan)},
         {"reward", {{"beta", e.reward.beta}, {"w", e.reward.w},
                     {"lambda_task", e.reward.lambda_task}}}};
  if (e.tag == EnvTag::box_pusher) {
    j["box"] = {{"box_width", e.box.box_width}, {"arena", e.box.arena},
                {"delta_max", e.box.delta_max}, {"min_sep", e.box.min_sep},
                {"with_obstacles", e.box.with_obstacles},
                {"max_obstacles", e.box.max_obstacles}};
  } else {
    j["couch"] = {{"length", e.couch.length}, {"width", e.couch.width},
                  {"mass", e.couch.mass}, {"dt", e.couch.dt},
                  {"lin_damping", e.couch.lin_damping}, {"ang_damping", e.couch.ang_damping},
                  {"f_max", e.couch.f_max}, {"tau_max", e.couch.tau_max}};
    j["maze"] = {{"variant", variant_name(e.maze_variant)}, {"n_corners", e.maze_corners}};
  }
  return j;
}

EnvConfig env_from_json(const json& j) {
  EnvConfig e = EnvConfig::for_name(j.at("name").get<std::string>());
  e.max_episode_len = j.at("max_episode_len");
  e.eps_match = j.at("eps_match");
  e.scale_horizon = j.value("scale_horizon", true);
  plan_from_json(j.at("plan"), e.plan);
  e.reward.beta = j.at("reward").at("beta");
  e.reward.w = j.at("reward").at("w");
  e.reward.lambda_task = j.at("reward").at("lambda_task");
  if (e.tag == EnvTag::box_pusher) {
    const auto& b = j.at("box");
    e.box.box_width = b.at("box_width");
    e.box.arena = b.at("arena");
    e.box.delta_max = b.at("delta_max");
    e.box.min_sep = b.at("min_sep");
    e.box.with_obstacles = b.at("with_obstacles");
    e.box.max_obstacles = b.at("max_obstacles");
  } else {
    const auto& c = j.at("couch");
    e.couch.length = c.at("length");
    e.couch.width = c.at("width");
    e.couch.mass = c.at("mass");
    e.couch.dt = c.at("dt");
    e.couch.lin_damping = c.at("lin_damping");
    e.couch.ang_damping = c.at("ang_damping");
    e.couch.f_max = c.at("f_max");
    e.couch.tau_max = c.at("tau_max");
  }
  return e;
}

json policy_to_json(const PolicyConfig& c) {
  return json{{"backbone", backbone_name(c.backbone)},
              {"k", c.k},
              {"L_max", c.L_max},
              {"embed_dim", c.embed_dim},
              {"layer_dims", c.layer_dims},
              {"head_dims", c.head_dims},
              {"n_heads", c.n_heads},
              {"ff_mult", c.ff_mult},
              {"dropout", c.dropout},
              {"timestep_embeddings", c.timestep_embeddings},
              {"max_timestep", c.max_timestep},
              {"init_log_std", c.init_log_std},
              {"action_dim", c.action_dim},
              {"obs_dim", c.obs_dim},
              {"high_dim", c.high_dim},
              {"goal_dim", c.goal_dim},
              {"sgc_lookahead", c.sgc_lookahead}};
}

PolicyConfig policy_from_json(const json& j) {
  PolicyConfig c;
  c.backbone = backbone_from_name(j.at("backbone").get<std::string>());
  c.k = j.at("k");
  c.L_max = j.at("L_max");
  c.embed_dim = j.at("embed_dim");
  c.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  c.head_dims = j.at("head_dims").get<std::vector<int>>();
  c.n_heads = j.at("n_heads");
  c.ff_mult = j.at("ff_mult");
  c.dropout = j.at("dropout");
  c.timestep_embeddings = j.at("timestep_embeddings");
  c.max_timestep = j.at("max_timestep");
  c.init_log_std = j.at("init_log_std");
  c.action_dim = j.at("action_dim");
  c.obs_dim = j.at("obs_dim");
  c.high_dim = j.at("high_dim");
  c.goal_dim = j.at("goal_dim");
  c.sgc_lookahead = j.at("sgc_lookahead");
  return c;
}

json ppo_to_json(const PPOConfig& c) {
  return json{{"policy_lr", c.policy_lr},
              {"value_lr", c.value_lr},
              {"rollout_batch", c.rollout_batch},
              {"minibatch", c.minibatch},
              {"epochs", c.epochs},
              {"grad_updates_per_epoch", c.grad_updates_per_epoch},
              {"n_parallel_envs", c.n_parallel_envs},
              {"clip_ratio", c.clip_ratio},
              {"target_kl", c.target_kl},
              {"gae_lambda", c.gae_lambda},
              {"discount", c.discount},
              {"grad_accumulation", c.grad_accumulation},
              {"seed", c.seed},
              {"n_threads", c.n_threads},
              {"checkpoint_every", c.checkpoint_every},
              {"eval_every", c.eval_every},
              {"eval_episodes", c.eval_episodes},
              {"stop_at_success", c.stop_at_success}};
}

PPOConfig ppo_from_json(const json& j) {
  PPOConfig c;
  c.policy_lr = j.at("policy_lr");
  c.value_lr = j.at("value_lr");
  c.rollout_batch = j.at("rollout_batch");
  c.minibatch = j.at("minibatch");
  c.epochs = j.at("epochs");
  c.grad_updates_per_epoch = j.at("grad_updates_per_epoch");
  c.n_parallel_envs = j.at("n_parallel_envs");
  c.clip_ratio = j.at("clip_ratio");
  c.target_kl = j.at("target_kl");
  c.gae_lambda = j.at("gae_lambda");
  c.discount = j.at("discount");
  c.grad_accumulation = j.at("grad_accumulation");
  c.seed = j.at("seed").get<uint64_t>();
  c.n_threads = j.at("n_threads");
  c.checkpoint_every = j.at("checkpoint_every");
  c.eval_every = j.at("eval_every");
  c.eval_episodes = j.at("eval_episodes");
  c.stop_at_success = j.at("stop_at_success");
  return c;
}

}  // namespace

RunConfig default_run_config(const std::string& env_name, Backbone backbone) {
  RunConfig cfg;
  cfg.env = EnvConfig::for_name(env_name);
  cfg.policy = cfg.env.tag == EnvTag::box_pusher ? PolicyConfig::box_pusher_default()
                                                 : PolicyConfig::couch_default();
  cfg.policy.backbone = backbone;
  if (backbone == Backbone::feedforward_gc || backbone == Backbone::feedforward_sgc) {
    cfg.policy.goal_dim = cfg.env.goal_dim(backbone);
    cfg.policy.timestep_embeddings = false;
    cfg.policy.dropout = 0.0;
  }
  if (cfg.env.tag == EnvTag::couch_moving) cfg.ppo.rollout_batch = 20000;
  return cfg;
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  json j{{"env", env_to_json(cfg.env)},
         {"policy", policy_to_json(cfg.policy)},
         {"ppo", ppo_to_json(cfg.ppo)},
         {"out_dir", cfg.out_dir}};
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

RunConfig load_run_config(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("bad run config " + path + ": " + e.what());
  }
  RunConfig cfg;
  cfg.env = env_from_json(j.at("env"));
  cfg.policy = policy_from_json(j.at("policy"));
  cfg.ppo = ppo_from_json(j.at("ppo"));
  cfg.out_dir = j.value("out_dir", "");
  return cfg;
}

}  // namespace trt
