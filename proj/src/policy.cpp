#include "trt/policy.hpp"

#include <fstream>

#include "json.hpp"

namespace trt {

using nlohmann::json;

const char* backbone_name(Backbone b) {
  switch (b) {
    case Backbone::causal_attention: return "causal-attention";
    case Backbone::recurrent: return "recurrent";
    case Backbone::feedforward_gc: return "feedforward-gc";
    case Backbone::feedforward_sgc: return "feedforward-sgc";
  }
  return "?";
}

Backbone backbone_from_name(const std::string& name) {
  if (name == "causal-attention") return Backbone::causal_attention;
  if (name == "recurrent") return Backbone::recurrent;
  if (name == "feedforward-gc") return Backbone::feedforward_gc;
  if (name == "feedforward-sgc") return Backbone::feedforward_sgc;
  throw ConfigError("unknown backbone: " + name);
}

void PolicyConfig::validate() const {
  check(k >= 1, "PolicyConfig: k must be >= 1");
  check(embed_dim > 0 && action_dim > 0 && obs_dim > 0, "PolicyConfig: dims must be positive");
  check(dropout >= 0.0 && dropout < 1.0, "PolicyConfig: dropout must be in [0, 1)");
  check(L_max >= 2, "PolicyConfig: L_max must be >= 2");
  const int d = model_width();
  if (backbone == Backbone::causal_attention) {
    check(n_heads >= 1 && d % n_heads == 0, "PolicyConfig: n_heads must divide model width");
    check(ff_mult >= 1, "PolicyConfig: ff_mult must be >= 1");
  }
  if (backbone == Backbone::feedforward_gc || backbone == Backbone::feedforward_sgc)
    check(goal_dim > 0, "PolicyConfig: GC/SGC require goal_dim");
  if (backbone == Backbone::feedforward_sgc)
    check(sgc_lookahead >= 1, "PolicyConfig: sgc_lookahead must be >= 1");
}

bool PolicyConfig::same_architecture(const PolicyConfig& o) const {
  return backbone == o.backbone && k == o.k && L_max == o.L_max && embed_dim == o.embed_dim &&
         layer_dims == o.layer_dims && head_dims == o.head_dims && n_heads == o.n_heads &&
         ff_mult == o.ff_mult && timestep_embeddings == o.timestep_embeddings &&
         max_timestep == o.max_timestep && action_dim == o.action_dim && obs_dim == o.obs_dim &&
         high_dim == o.high_dim && goal_dim == o.goal_dim;
}

PolicyConfig PolicyConfig::box_pusher_default() {
  PolicyConfig c;
  c.k = 2;
  c.L_max = 32;
  c.embed_dim = 32;
  c.obs_dim = 6;
  c.high_dim = 4;
  c.action_dim = 2;
  c.max_timestep = 96;
  return c;
}

PolicyConfig PolicyConfig::couch_default() {
  PolicyConfig c;
  c.k = 5;
  c.L_max = 50;
  c.embed_dim = 64;
  c.obs_dim = 13;
  c.high_dim = 2;
  c.action_dim = 3;
  c.max_timestep = 520;
  return c;
}

HighState select_subgoal(const MatchTracker& tracker, const AbstractTrajectory& traj,
                         int lookahead) {
  check(lookahead >= 1, "select_subgoal: lookahead must be >= 1");
  const int idx = std::min(tracker.j_prev() + lookahead, traj.size());
  return traj[std::max(idx, 1) - 1];
}

// ---------------------------------------------------------------------------
// checkpoint io

namespace {

constexpr char kMagic[] = "TRTCKPT1";
constexpr char kTail[] = "TRTEND\n";

json config_to_json(const PolicyConfig& c) {
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

PolicyConfig config_from_json(const json& j) {
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

template <class S>
void write_tensors(std::ofstream& out, const std::string& prefix, net::ModelP<S>& m) {
  m.visit([&](const std::string& name, auto& t) {
    const std::string full = prefix + name;
    const uint32_t nl = static_cast<uint32_t>(full.size());
    out.write(reinterpret_cast<const char*>(&nl), sizeof(nl));
    out.write(full.data(), nl);
    const uint64_t rows = static_cast<uint64_t>(t.rows());
    const uint64_t cols = static_cast<uint64_t>(t.cols());
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double v = static_cast<double>(t.data()[i]);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  });
}

template <class S>
void read_tensors(std::ifstream& in, const std::string& prefix, net::ModelP<S>& m) {
  m.visit([&](const std::string& name, auto& t) {
    uint32_t nl = 0;
    in.read(reinterpret_cast<char*>(&nl), sizeof(nl));
    std::string full(nl, '\0');
    in.read(full.data(), nl);
    check(full == prefix + name,
          "checkpoint: tensor order mismatch, expected " + prefix + name + " got " + full);
    uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    check(rows == static_cast<uint64_t>(t.rows()) && cols == static_cast<uint64_t>(t.cols()),
          "checkpoint: tensor " + full + " has mismatched shape");
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      t.data()[i] = static_cast<S>(v);
    }
  });
  check(static_cast<bool>(in), "checkpoint: truncated tensor data");
}

template <class S>
void save_impl(const std::string& path, ActorCritic<S>& ac) {
  std::ofstream out(path, std::ios::binary);
  check(static_cast<bool>(out), "checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, 8);
  const json meta{{"version", 1}, {"config", config_to_json(ac.cfg)}, {"seed", ac.source_seed}};
  const std::string js = meta.dump();
  const uint64_t len = js.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(js.data(), static_cast<std::streamsize>(js.size()));
  write_tensors(out, "actor.", ac.actor);
  write_tensors(out, "critic.", ac.critic);
  out.write(kTail, 7);
  check(static_cast<bool>(out), "checkpoint: write failed for " + path);
}

template <class S>
ActorCritic<S> load_impl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), "checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  check(in && std::string(magic, 8) == kMagic, "checkpoint: bad magic in " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  check(in && len < (1ull << 24), "checkpoint: corrupt header length");
  std::string js(len, '\0');
  in.read(js.data(), static_cast<std::streamsize>(len));
  const json meta = json::parse(js);
  check(meta.at("version") == 1, "checkpoint: unsupported version");
  ActorCritic<S> ac;
  ac.init(config_from_json(meta.at("config")), meta.at("seed").get<uint64_t>());
  read_tensors(in, "actor.", ac.actor);
  read_tensors(in, "critic.", ac.critic);
  char tail[7];
  in.read(tail, 7);
  check(in && std::string(tail, 7) == kTail, "checkpoint: missing end marker");
  return ac;
}

}  // namespace

void save_checkpoint(const std::string& path, ActorCritic<float>& ac) { save_impl(path, ac); }
void save_checkpoint(const std::string& path, ActorCritic<double>& ac) { save_impl(path, ac); }
ActorCritic<float> load_checkpoint_f(const std::string& path) { return load_impl<float>(path); }
ActorCritic<double> load_checkpoint_d(const std::string& path) { return load_impl<double>(path); }

}  // namespace trt
