#pragma once

// Sequence policy networks with hand-written forward/backward passes.
//
// The causal-attention backbone processes [prompt tokens .. low tokens] with
// unidirectional attention. Prompt rows never attend to low rows, so their
// activations are shared by every step of an episode (at inference) and by
// every minibatch sample drawn from the same episode (at training): the
// prompt runs through the blocks once per group, low rows run per sample and
// attend to the cached prompt keys/values. Backward mirrors this: samples
// accumulate gradients w.r.t. the prompt K/V, and the prompt stack is walked
// backward once per group with those gradients injected.

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "trt/policy_config.hpp"
#include "trt/rng.hpp"

namespace trt {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

namespace net {

constexpr double kLnEps = 1e-5;

template <class S>
struct Dense {
  MatX<S> w;  // out x in
  VecX<S> b;

  void init(int in, int out, Rng& rng, double scale) {
    w.resize(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w.data()[i] = static_cast<S>(rng.normal() * scale);
    b = VecX<S>::Zero(out);
  }
  void zero(int in, int out) {
    w = MatX<S>::Zero(out, in);
    b = VecX<S>::Zero(out);
  }
  // y = x w^T + b, rows are tokens
  MatX<S> forward(const MatX<S>& x) const {
    return (x * w.transpose()).rowwise() + b.transpose();
  }
  // returns dx; accumulates dw/db into g
  MatX<S> backward(const MatX<S>& x, const MatX<S>& dy, Dense<S>& g) const {
    g.w.noalias() += dy.transpose() * x;
    g.b.noalias() += dy.colwise().sum().transpose();
    return dy * w;
  }
};

template <class S>
struct LayerNormP {
  VecX<S> g, b;
  void init(int dim) {
    g = VecX<S>::Ones(dim);
    b = VecX<S>::Zero(dim);
  }
  void zero(int dim) {
    g = VecX<S>::Zero(dim);
    b = VecX<S>::Zero(dim);
  }
};

template <class S>
struct LnCache {
  MatX<S> normed;  // (x - mu) * istd, per row
  VecX<S> istd;
};

template <class S>
MatX<S> layer_norm(const LayerNormP<S>& p, const MatX<S>& x, LnCache<S>& c) {
  const Eigen::Index L = x.rows(), D = x.cols();
  c.normed.resize(L, D);
  c.istd.resize(L);
  MatX<S> y(L, D);
  for (Eigen::Index i = 0; i < L; ++i) {
    const S mu = x.row(i).mean();
    const S var = (x.row(i).array() - mu).square().mean();
    const S istd = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
    c.istd[i] = istd;
    c.normed.row(i) = ((x.row(i).array() - mu) * istd).matrix();
    y.row(i) = c.normed.row(i).cwiseProduct(p.g.transpose()) + p.b.transpose();
  }
  return y;
}

template <class S>
MatX<S> layer_norm_backward(const LayerNormP<S>& p, const LnCache<S>& c, const MatX<S>& dy,
                            LayerNormP<S>& g) {
  const Eigen::Index L = dy.rows(), D = dy.cols();
  MatX<S> dx(L, D);
  for (Eigen::Index i = 0; i < L; ++i) {
    g.g += dy.row(i).cwiseProduct(c.normed.row(i)).transpose();
    g.b += dy.row(i).transpose();
    const Eigen::Matrix<S, 1, Eigen::Dynamic> dn = dy.row(i).cwiseProduct(p.g.transpose());
    const S m1 = dn.mean();
    const S m2 = dn.cwiseProduct(c.normed.row(i)).mean();
    dx.row(i) = (((dn.array() - m1) - c.normed.row(i).array() * m2) * c.istd[i]).matrix();
  }
  return dx;
}

template <class S>
S gelu(S x) {
  return S(0.5) * x *
         (S(1) + static_cast<S>(std::erf(static_cast<double>(x) * 0.7071067811865475244)));
}

template <class S>
S gelu_grad(S x) {
  const double xd = static_cast<double>(x);
  const double pdf = std::exp(-0.5 * xd * xd) * 0.39894228040143267794;
  const double cdf = 0.5 * (1.0 + std::erf(xd * 0.7071067811865475244));
  return static_cast<S>(cdf + xd * pdf);
}

// Inverted dropout; mask entries are 0 or 1/(1-p).
template <class S>
MatX<S> make_dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) {
  MatX<S> m(rows, cols);
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = rng->uniform() < p ? S(0) : keep_scale;
  return m;
}

template <class S>
struct BlockP {
  LayerNormP<S> ln1, ln2;
  Dense<S> qkv;   // 3D x D
  Dense<S> proj;  // D x D
  Dense<S> ff1;   // F x D
  Dense<S> ff2;   // D x F

  void init(int d, int f, Rng& rng) {
    ln1.init(d);
    ln2.init(d);
    qkv.init(d, 3 * d, rng, 0.02);
    proj.init(d, d, rng, 0.02);
    ff1.init(d, f, rng, 0.02);
    ff2.init(f, d, rng, 0.02);
  }
  void zero(int d, int f) {
    ln1.zero(d);
    ln2.zero(d);
    qkv.zero(d, 3 * d);
    proj.zero(d, d);
    ff1.zero(d, f);
    ff2.zero(f, d);
  }
};

// Per-block activations for a row range (the prompt rows, or one sample's
// low rows attending to a prompt prefix).
template <class S>
struct BlockCache {
  MatX<S> x;  // block input, L x D
  LnCache<S> ln1c, ln2c;
  MatX<S> n1;
  MatX<S> q, k, v;            // local rows, L x D
  std::vector<MatX<S>> attn;  // per head, L x (prefix + L)
  MatX<S> att_concat;         // pre-proj, L x D
  MatX<S> drop1, drop2;       // empty when not training
  MatX<S> x2;                 // x + attention branch
  MatX<S> n2;
  MatX<S> ff_pre;  // L x F
  MatX<S> ff_act;
  MatX<S> out;  // x2 + ff branch
};

// Shared prompt activations: one per (episode plan, parameter snapshot).
template <class S>
struct PromptCtx {
  int Lp = 0;
  MatX<S> high_in;  // raw prompt states, Lp x high_dim
  MatX<S> enc_pre;  // pre-ReLU encoder output, Lp x E
  MatX<S> tokens;   // encoder tokens (+ timestep embeddings)
  std::vector<int> ts_idx;
  MatX<S> x0;  // post in_proj, Lp x D
  std::vector<BlockCache<S>> blocks;
  MatX<S> out;  // final block output, Lp x D

  // recurrent backbone: states after consuming the prompt, and BPTT caches
  std::vector<VecX<S>> h_end, c_end;
  std::vector<MatX<S>> lstm_x, lstm_gates, lstm_h, lstm_c;
};

// Per-sample activations for the k low rows.
template <class S>
struct TailCache {
  MatX<S> obs_in;  // k x obs_dim
  MatX<S> enc_pre;
  MatX<S> tokens;
  MatX<S> x0;
  std::vector<BlockCache<S>> blocks;
  LnCache<S> lnf;
  VecX<S> head_in;
  std::vector<MatX<S>> head_pre;  // per head layer, 1 x dim

  std::vector<MatX<S>> lstm_x, lstm_gates, lstm_h, lstm_c;
  std::vector<VecX<S>> h0, c0;

  VecX<S> mlp_in, mlp_pre;
};

// Gradients flowing from the tail samples back into their shared prompt.
template <class S>
struct GroupGrad {
  std::vector<MatX<S>> dk, dv;          // per block, Lp x D
  std::vector<VecX<S>> dh_end, dc_end;  // per LSTM layer

  void init_gpt(int n_blocks, int Lp, int d) {
    dk.assign(n_blocks, MatX<S>::Zero(Lp, d));
    dv.assign(n_blocks, MatX<S>::Zero(Lp, d));
  }
  void init_lstm(const std::vector<int>& dims) {
    dh_end.clear();
    dc_end.clear();
    for (int h : dims) {
      dh_end.push_back(VecX<S>::Zero(h));
      dc_end.push_back(VecX<S>::Zero(h));
    }
  }
};

template <class S>
struct LstmLayerP {
  Dense<S> ih;  // 4H x in, gate rows [i; f; g; o]
  Dense<S> hh;  // 4H x H
  void init(int in, int h, Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(h));
    ih.init(in, 4 * h, rng, s);
    hh.init(h, 4 * h, rng, s);
    ih.b.segment(h, h).setConstant(S(1));  // forget-gate bias
  }
  void zero(int in, int h) {
    ih.zero(in, 4 * h);
    hh.zero(h, 4 * h);
  }
};

template <class S>
struct TailResult {
  VecX<S> out;                // action mean, or a 1-dim value
  std::vector<MatX<S>> attn;  // per block: heads x (Lp + k), final-token rows
  S value() const { return out[0]; }
};

// One network: encoders + backbone + head (+ log_std when it is an actor).
template <class S>
struct ModelP {
  PolicyConfig cfg;
  int out_dim = 0;
  bool has_log_std = false;

  Dense<S> enc_high, enc_low;
  MatX<S> ts_embed;
  Dense<S> in_proj;
  std::vector<BlockP<S>> blocks;
  LayerNormP<S> ln_f;
  std::vector<LstmLayerP<S>> lstm;
  Dense<S> mlp_enc;
  std::vector<Dense<S>> head;
  Dense<S> head_out;
  VecX<S> log_std;

  bool is_gpt() const { return cfg.backbone == Backbone::causal_attention; }
  bool is_lstm() const { return cfg.backbone == Backbone::recurrent; }
  bool is_mlp() const {
    return cfg.backbone == Backbone::feedforward_gc ||
           cfg.backbone == Backbone::feedforward_sgc;
  }

  int head_input_dim() const {
    if (is_mlp()) return cfg.embed_dim;
    if (is_lstm()) return cfg.layer_dims.back();
    return cfg.model_width();
  }

  void init(const PolicyConfig& c, int out, bool actor, Rng& rng) {
    cfg = c;
    cfg.validate();
    out_dim = out;
    has_log_std = actor;
    const int e = cfg.embed_dim;
    if (is_gpt() || is_lstm()) {
      enc_high.init(cfg.high_dim, e, rng, 0.05);
      enc_low.init(cfg.obs_dim, e, rng, 0.05);
      if (cfg.timestep_embeddings) {
        ts_embed.resize(cfg.max_timestep, e);
        for (Eigen::Index i = 0; i < ts_embed.size(); ++i)
          ts_embed.data()[i] = static_cast<S>(rng.normal() * 0.02);
      }
    }
    if (is_gpt()) {
      const int d = cfg.model_width();
      in_proj.init(e, d, rng, 0.02);
      blocks.resize(cfg.n_layers());
      for (auto& blk : blocks) blk.init(d, d * cfg.ff_mult, rng);
      ln_f.init(d);
    } else if (is_lstm()) {
      lstm.resize(cfg.n_layers());
      for (int l = 0; l < cfg.n_layers(); ++l)
        lstm[l].init(l == 0 ? e : cfg.layer_dims[l - 1], cfg.layer_dims[l], rng);
    } else {
      mlp_enc.init(cfg.obs_dim + cfg.goal_dim, e, rng, 0.05);
    }
    int hin = head_input_dim();
    for (int hd : cfg.head_dims) {
      Dense<S> fc;
      fc.init(hin, hd, rng, 0.05);
      head.push_back(std::move(fc));
      hin = hd;
    }
    head_out.init(hin, out_dim, rng, 0.01);
    if (has_log_std)
      log_std = VecX<S>::Constant(out_dim, static_cast<S>(cfg.init_log_std));
  }

  ModelP<S> zeros_like() const {
    ModelP<S> g;
    g.cfg = cfg;
    g.out_dim = out_dim;
    g.has_log_std = has_log_std;
    const int e = cfg.embed_dim;
    if (is_gpt() || is_lstm()) {
      g.enc_high.zero(cfg.high_dim, e);
      g.enc_low.zero(cfg.obs_dim, e);
      if (cfg.timestep_embeddings) g.ts_embed = MatX<S>::Zero(cfg.max_timestep, e);
    }
    if (is_gpt()) {
      const int d = cfg.model_width();
      g.in_proj.zero(e, d);
      g.blocks.resize(blocks.size());
      for (auto& blk : g.blocks) blk.zero(d, d * cfg.ff_mult);
      g.ln_f.zero(d);
    } else if (is_lstm()) {
      g.lstm.resize(lstm.size());
      for (int l = 0; l < cfg.n_layers(); ++l)
        g.lstm[l].zero(l == 0 ? e : cfg.layer_dims[l - 1], cfg.layer_dims[l]);
    } else {
      g.mlp_enc.zero(cfg.obs_dim + cfg.goal_dim, e);
    }
    int hin = head_input_dim();
    for (size_t i = 0; i < head.size(); ++i) {
      Dense<S> fc;
      fc.zero(hin, cfg.head_dims[i]);
      g.head.push_back(std::move(fc));
      hin = cfg.head_dims[i];
    }
    g.head_out.zero(hin, out_dim);
    if (has_log_std) g.log_std = VecX<S>::Zero(out_dim);
    return g;
  }

  // Enumerates every active parameter tensor in a stable order.
  template <class F>
  void visit(F&& f) {
    if (is_gpt() || is_lstm()) {
      f(std::string("enc_high.w"), enc_high.w);
      f(std::string("enc_high.b"), enc_high.b);
      f(std::string("enc_low.w"), enc_low.w);
      f(std::string("enc_low.b"), enc_low.b);
      if (cfg.timestep_embeddings) f(std::string("ts_embed"), ts_embed);
    }
    if (is_gpt()) {
      f(std::string("in_proj.w"), in_proj.w);
      f(std::string("in_proj.b"), in_proj.b);
      for (size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = "block" + std::to_string(i) + ".";
        f(p + "ln1.g", blocks[i].ln1.g);
        f(p + "ln1.b", blocks[i].ln1.b);
        f(p + "qkv.w", blocks[i].qkv.w);
        f(p + "qkv.b", blocks[i].qkv.b);
        f(p + "proj.w", blocks[i].proj.w);
        f(p + "proj.b", blocks[i].proj.b);
        f(p + "ln2.g", blocks[i].ln2.g);
        f(p + "ln2.b", blocks[i].ln2.b);
        f(p + "ff1.w", blocks[i].ff1.w);
        f(p + "ff1.b", blocks[i].ff1.b);
        f(p + "ff2.w", blocks[i].ff2.w);
        f(p + "ff2.b", blocks[i].ff2.b);
      }
      f(std::string("ln_f.g"), ln_f.g);
      f(std::string("ln_f.b"), ln_f.b);
    } else if (is_lstm()) {
      for (size_t i = 0; i < lstm.size(); ++i) {
        const std::string p = "lstm" + std::to_string(i) + ".";
        f(p + "ih.w", lstm[i].ih.w);
        f(p + "ih.b", lstm[i].ih.b);
        f(p + "hh.w", lstm[i].hh.w);
        f(p + "hh.b", lstm[i].hh.b);
      }
    } else {
      f(std::string("mlp_enc.w"), mlp_enc.w);
      f(std::string("mlp_enc.b"), mlp_enc.b);
    }
    for (size_t i = 0; i < head.size(); ++i) {
      const std::string p = "head" + std::to_string(i) + ".";
      f(p + "w", head[i].w);
      f(p + "b", head[i].b);
    }
    f(std::string("head_out.w"), head_out.w);
    f(std::string("head_out.b"), head_out.b);
    if (has_log_std) f(std::string("log_std"), log_std);
  }

  Eigen::Index param_count() {
    Eigen::Index n = 0;
    visit([&](const std::string&, auto& m) { n += m.size(); });
    return n;
  }

  // Accumulate other's tensors into this (gradient reduction).
  void add_from(ModelP<S>& other) {
    std::vector<S*> mine;
    std::vector<Eigen::Index> sizes;
    visit([&](const std::string&, auto& m) {
      mine.push_back(m.data());
      sizes.push_back(m.size());
    });
    size_t i = 0;
    other.visit([&](const std::string&, auto& m) {
      Eigen::Map<VecX<S>>(mine[i], sizes[i]) += Eigen::Map<VecX<S>>(m.data(), m.size());
      ++i;
    });
  }

  void set_zero() {
    visit([&](const std::string&, auto& m) { m.setZero(); });
  }

  PromptCtx<S> encode_prompt(const MatX<S>& high_states, const std::vector<int>& orig_idx,
                             bool train, Rng* rng) const;
  TailResult<S> forward_tail(const PromptCtx<S>& ctx, const MatX<S>& obs_hist,
                             const VecX<S>& mlp_in, bool train, Rng* rng, bool want_attn,
                             TailCache<S>* cache) const;
  void backward_tail(const PromptCtx<S>& ctx, const TailCache<S>& tc, const VecX<S>& dout,
                     ModelP<S>& grads, GroupGrad<S>& gg) const;
  void backward_prompt(const PromptCtx<S>& ctx, const GroupGrad<S>& gg, ModelP<S>& grads) const;

  // ln_f applied to every prompt row; used by the causality probe.
  MatX<S> prompt_outputs(const PromptCtx<S>& ctx) const {
    LnCache<S> c;
    return layer_norm(ln_f, ctx.out, c);
  }

 private:
  void block_forward(const BlockP<S>& p, const MatX<S>* pref_k, const MatX<S>* pref_v,
                     BlockCache<S>& c, bool train, Rng* rng) const;
  MatX<S> block_backward(const BlockP<S>& p, const BlockCache<S>& c, const MatX<S>* pref_k,
                         const MatX<S>* pref_v, MatX<S> dout, BlockP<S>& g, MatX<S>* dpref_k,
                         MatX<S>* dpref_v, const MatX<S>* dk_ext, const MatX<S>* dv_ext) const;
  void lstm_run(const MatX<S>& inputs, std::vector<VecX<S>>& h, std::vector<VecX<S>>& c,
                std::vector<MatX<S>>& xs, std::vector<MatX<S>>& gates,
                std::vector<MatX<S>>& hs, std::vector<MatX<S>>& cs) const;
  // One layer of truncated BPTT; returns gradient rows w.r.t. the layer
  // inputs and leaves the entry-state gradients in dh_t/dc_t.
  void lstm_layer_backward(int l, const MatX<S>& xs, const MatX<S>& gates, const MatX<S>& hs,
                           const MatX<S>& cs, const VecX<S>* h0, const VecX<S>* c0,
                           const MatX<S>* dtop_rows, VecX<S>& dh_t, VecX<S>& dc_t,
                           MatX<S>& dx_rows, ModelP<S>& grads) const;
};

// ---------------------------------------------------------------------------

template <class S>
void ModelP<S>::block_forward(const BlockP<S>& p, const MatX<S>* pref_k, const MatX<S>* pref_v,
                              BlockCache<S>& c, bool train, Rng* rng) const {
  const int d = cfg.model_width();
  const int H = cfg.n_heads;
  const int dh = d / H;
  const Eigen::Index L = c.x.rows();
  const Eigen::Index P = pref_k ? pref_k->rows() : 0;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  const bool drop = train && cfg.dropout > 0.0;

  c.n1 = layer_norm(p.ln1, c.x, c.ln1c);
  const MatX<S> qkv = p.qkv.forward(c.n1);
  c.q = qkv.leftCols(d);
  c.k = qkv.middleCols(d, d);
  c.v = qkv.rightCols(d);

  c.attn.assign(H, MatX<S>());
  c.att_concat.resize(L, d);
  for (int h = 0; h < H; ++h) {
    const MatX<S> qh = c.q.middleCols(h * dh, dh);
    MatX<S> kh(P + L, dh), vh(P + L, dh);
    if (P > 0) {
      kh.topRows(P) = pref_k->middleCols(h * dh, dh);
      vh.topRows(P) = pref_v->middleCols(h * dh, dh);
    }
    kh.bottomRows(L) = c.k.middleCols(h * dh, dh);
    vh.bottomRows(L) = c.v.middleCols(h * dh, dh);

    MatX<S> sc = qh * kh.transpose() * scale;  // L x (P+L)
    MatX<S>& A = c.attn[h];
    A = MatX<S>::Zero(L, P + L);
    for (Eigen::Index i = 0; i < L; ++i) {
      const Eigen::Index lim = P + i + 1;  // causal: prefix plus own past
      S mx = sc(i, 0);
      for (Eigen::Index j = 1; j < lim; ++j) mx = std::max(mx, sc(i, j));
      S sum = S(0);
      for (Eigen::Index j = 0; j < lim; ++j) {
        const S e = std::exp(sc(i, j) - mx);
        A(i, j) = e;
        sum += e;
      }
      A.row(i).head(lim) /= sum;
    }
    c.att_concat.middleCols(h * dh, dh).noalias() = A * vh;
  }

  MatX<S> proj_out = p.proj.forward(c.att_concat);
  if (drop) {
    c.drop1 = make_dropout_mask<S>(L, d, cfg.dropout, rng);
    proj_out = proj_out.cwiseProduct(c.drop1);
  }
  c.x2 = c.x + proj_out;

  c.n2 = layer_norm(p.ln2, c.x2, c.ln2c);
  c.ff_pre = p.ff1.forward(c.n2);
  c.ff_act = c.ff_pre.unaryExpr([](S x) { return gelu(x); });
  MatX<S> f2 = p.ff2.forward(c.ff_act);
  if (drop) {
    c.drop2 = make_dropout_mask<S>(L, d, cfg.dropout, rng);
    f2 = f2.cwiseProduct(c.drop2);
  }
  c.out = c.x2 + f2;
}

template <class S>
MatX<S> ModelP<S>::block_backward(const BlockP<S>& p, const BlockCache<S>& c,
                                  const MatX<S>* pref_k, const MatX<S>* pref_v, MatX<S> dout,
                                  BlockP<S>& g, MatX<S>* dpref_k, MatX<S>* dpref_v,
                                  const MatX<S>* dk_ext, const MatX<S>* dv_ext) const {
  const int d = cfg.model_width();
  const int H = cfg.n_heads;
  const int dh = d / H;
  const Eigen::Index L = c.x.rows();
  const Eigen::Index P = pref_k ? pref_k->rows() : 0;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  // feedforward branch
  MatX<S> df2 = dout;
  if (c.drop2.size() > 0) df2 = df2.cwiseProduct(c.drop2);
  MatX<S> dff_act = p.ff2.backward(c.ff_act, df2, g.ff2);
  MatX<S> dff_pre =
      dff_act.cwiseProduct(c.ff_pre.unaryExpr([](S x) { return gelu_grad(x); }));
  MatX<S> dn2 = p.ff1.backward(c.n2, dff_pre, g.ff1);
  MatX<S> dx2 = dout + layer_norm_backward(p.ln2, c.ln2c, dn2, g.ln2);

  // attention branch
  MatX<S> dproj_out = dx2;
  if (c.drop1.size() > 0) dproj_out = dproj_out.cwiseProduct(c.drop1);
  MatX<S> datt = p.proj.backward(c.att_concat, dproj_out, g.proj);

  MatX<S> dq = MatX<S>::Zero(L, d), dk = MatX<S>::Zero(L, d), dv = MatX<S>::Zero(L, d);
  for (int h = 0; h < H; ++h) {
    const MatX<S> qh = c.q.middleCols(h * dh, dh);
    MatX<S> kh(P + L, dh), vh(P + L, dh);
    if (P > 0) {
      kh.topRows(P) = pref_k->middleCols(h * dh, dh);
      vh.topRows(P) = pref_v->middleCols(h * dh, dh);
    }
    kh.bottomRows(L) = c.k.middleCols(h * dh, dh);
    vh.bottomRows(L) = c.v.middleCols(h * dh, dh);

    const MatX<S>& A = c.attn[h];
    const MatX<S> dO = datt.middleCols(h * dh, dh);
    MatX<S> dA = dO * vh.transpose();     // L x (P+L)
    MatX<S> dVfull = A.transpose() * dO;  // (P+L) x dh
    MatX<S> dS(L, P + L);
    for (Eigen::Index i = 0; i < L; ++i) {
      const S dot = dA.row(i).cwiseProduct(A.row(i)).sum();
      dS.row(i) = A.row(i).cwiseProduct((dA.row(i).array() - dot).matrix());
    }
    dq.middleCols(h * dh, dh).noalias() += dS * kh * scale;
    MatX<S> dKfull = dS.transpose() * qh * scale;  // (P+L) x dh
    if (P > 0) {
      dpref_k->middleCols(h * dh, dh).noalias() += dKfull.topRows(P);
      dpref_v->middleCols(h * dh, dh).noalias() += dVfull.topRows(P);
    }
    dk.middleCols(h * dh, dh) += dKfull.bottomRows(L);
    dv.middleCols(h * dh, dh) += dVfull.bottomRows(L);
  }
  if (dk_ext) dk += *dk_ext;
  if (dv_ext) dv += *dv_ext;

  MatX<S> dqkv(L, 3 * d);
  dqkv.leftCols(d) = dq;
  dqkv.middleCols(d, d) = dk;
  dqkv.rightCols(d) = dv;
  MatX<S> dn1 = p.qkv.backward(c.n1, dqkv, g.qkv);
  return dx2 + layer_norm_backward(p.ln1, c.ln1c, dn1, g.ln1);
}

template <class S>
PromptCtx<S> ModelP<S>::encode_prompt(const MatX<S>& high_states,
                                      const std::vector<int>& orig_idx, bool train,
                                      Rng* rng) const {
  PromptCtx<S> ctx;
  if (is_mlp()) return ctx;
  const Eigen::Index Lp = high_states.rows();
  check(Lp >= 1, "encode_prompt: empty prompt");
  check(Lp <= cfg.L_max, "encode_prompt: prompt longer than L_max");
  ctx.Lp = static_cast<int>(Lp);

  ctx.high_in = high_states;
  ctx.enc_pre = enc_high.forward(high_states);
  ctx.tokens = ctx.enc_pre.cwiseMax(S(0));
  if (cfg.timestep_embeddings) {
    check(static_cast<Eigen::Index>(orig_idx.size()) == Lp,
          "encode_prompt: timestep indices missing");
    ctx.ts_idx = orig_idx;
    for (Eigen::Index i = 0; i < Lp; ++i) {
      check(orig_idx[i] >= 0 && orig_idx[i] < cfg.max_timestep,
            "encode_prompt: timestep index " + std::to_string(orig_idx[i]) +
                " out of range (max_timestep=" + std::to_string(cfg.max_timestep) + ")");
      ctx.tokens.row(i) += ts_embed.row(orig_idx[i]);
    }
  }

  if (is_gpt()) {
    ctx.x0 = in_proj.forward(ctx.tokens);
    ctx.blocks.resize(blocks.size());
    MatX<S> x = ctx.x0;
    for (size_t l = 0; l < blocks.size(); ++l) {
      ctx.blocks[l].x = std::move(x);
      block_forward(blocks[l], nullptr, nullptr, ctx.blocks[l], train, rng);
      x = ctx.blocks[l].out;
    }
    ctx.out = std::move(x);
  } else {
    std::vector<VecX<S>> h, cc;
    for (int hd : cfg.layer_dims) {
      h.push_back(VecX<S>::Zero(hd));
      cc.push_back(VecX<S>::Zero(hd));
    }
    lstm_run(ctx.tokens, h, cc, ctx.lstm_x, ctx.lstm_gates, ctx.lstm_h, ctx.lstm_c);
    ctx.h_end = std::move(h);
    ctx.c_end = std::move(cc);
  }
  return ctx;
}

template <class S>
void ModelP<S>::lstm_run(const MatX<S>& inputs, std::vector<VecX<S>>& h,
                         std::vector<VecX<S>>& c, std::vector<MatX<S>>& xs,
                         std::vector<MatX<S>>& gates, std::vector<MatX<S>>& hs,
                         std::vector<MatX<S>>& cs) const {
  const int nl = cfg.n_layers();
  const Eigen::Index T = inputs.rows();
  xs.assign(nl, MatX<S>());
  gates.assign(nl, MatX<S>());
  hs.assign(nl, MatX<S>());
  cs.assign(nl, MatX<S>());
  MatX<S> layer_in = inputs;
  for (int l = 0; l < nl; ++l) {
    const int Hd = cfg.layer_dims[l];
    xs[l] = layer_in;
    gates[l].resize(T, 4 * Hd);
    hs[l].resize(T, Hd);
    cs[l].resize(T, Hd);
    VecX<S> hh = h[l], ccell = c[l];
    for (Eigen::Index t = 0; t < T; ++t) {
      VecX<S> z = lstm[l].ih.w * layer_in.row(t).transpose() + lstm[l].ih.b +
                  lstm[l].hh.w * hh + lstm[l].hh.b;
      for (int j = 0; j < Hd; ++j) {
        const S i_g = S(1) / (S(1) + std::exp(-z[j]));
        const S f_g = S(1) / (S(1) + std::exp(-z[Hd + j]));
        const S g_g = std::tanh(z[2 * Hd + j]);
        const S o_g = S(1) / (S(1) + std::exp(-z[3 * Hd + j]));
        gates[l](t, j) = i_g;
        gates[l](t, Hd + j) = f_g;
        gates[l](t, 2 * Hd + j) = g_g;
        gates[l](t, 3 * Hd + j) = o_g;
        ccell[j] = f_g * ccell[j] + i_g * g_g;
        hh[j] = o_g * std::tanh(ccell[j]);
      }
      cs[l].row(t) = ccell.transpose();
      hs[l].row(t) = hh.transpose();
    }
    h[l] = hh;
    c[l] = ccell;
    layer_in = hs[l];
  }
}

template <class S>
TailResult<S> ModelP<S>::forward_tail(const PromptCtx<S>& ctx, const MatX<S>& obs_hist,
                                      const VecX<S>& mlp_in, bool train, Rng* rng,
                                      bool want_attn, TailCache<S>* cache) const {
  TailCache<S> local;
  TailCache<S>& tc = cache ? *cache : local;
  TailResult<S> res;

  if (is_mlp()) {
    tc.mlp_in = mlp_in;
    tc.mlp_pre = mlp_enc.w * mlp_in + mlp_enc.b;
    tc.head_in = tc.mlp_pre.cwiseMax(S(0));
  } else if (is_gpt()) {
    check(obs_hist.rows() == cfg.k, "forward_tail: expected k stacked low states");
    tc.obs_in = obs_hist;
    tc.enc_pre = enc_low.forward(obs_hist);
    tc.tokens = tc.enc_pre.cwiseMax(S(0));
    tc.x0 = in_proj.forward(tc.tokens);
    tc.blocks.resize(blocks.size());
    MatX<S> x = tc.x0;
    if (want_attn) res.attn.resize(blocks.size());
    for (size_t l = 0; l < blocks.size(); ++l) {
      tc.blocks[l].x = std::move(x);
      block_forward(blocks[l], &ctx.blocks[l].k, &ctx.blocks[l].v, tc.blocks[l], train, rng);
      x = tc.blocks[l].out;
      if (want_attn) {
        const int H = cfg.n_heads;
        MatX<S> rows(H, ctx.Lp + cfg.k);
        for (int h = 0; h < H; ++h) rows.row(h) = tc.blocks[l].attn[h].bottomRows(1);
        res.attn[l] = std::move(rows);
      }
    }
    MatX<S> normed = layer_norm(ln_f, MatX<S>(x.bottomRows(1)), tc.lnf);
    tc.head_in = normed.row(0).transpose();
  } else {
    check(obs_hist.rows() == cfg.k, "forward_tail: expected k stacked low states");
    tc.obs_in = obs_hist;
    tc.enc_pre = enc_low.forward(obs_hist);
    tc.tokens = tc.enc_pre.cwiseMax(S(0));
    std::vector<VecX<S>> h = ctx.h_end, c = ctx.c_end;
    tc.h0 = ctx.h_end;
    tc.c0 = ctx.c_end;
    lstm_run(tc.tokens, h, c, tc.lstm_x, tc.lstm_gates, tc.lstm_h, tc.lstm_c);
    tc.head_in = h.back();
  }

  VecX<S> z = tc.head_in;
  tc.head_pre.clear();
  for (const auto& fc : head) {
    VecX<S> pre = fc.w * z + fc.b;
    tc.head_pre.push_back(MatX<S>(pre.transpose()));
    z = pre.array().tanh().matrix();
  }
  res.out = head_out.w * z + head_out.b;
  return res;
}

template <class S>
void ModelP<S>::backward_tail(const PromptCtx<S>& ctx, const TailCache<S>& tc,
                              const VecX<S>& dout, ModelP<S>& grads, GroupGrad<S>& gg) const {
  // heads
  std::vector<VecX<S>> zs{tc.head_in};
  for (size_t i = 0; i < head.size(); ++i)
    zs.push_back(tc.head_pre[i].row(0).transpose().array().tanh().matrix());
  grads.head_out.w.noalias() += dout * zs.back().transpose();
  grads.head_out.b += dout;
  VecX<S> dz = head_out.w.transpose() * dout;
  for (int i = static_cast<int>(head.size()) - 1; i >= 0; --i) {
    const VecX<S> one_minus_sq =
        (VecX<S>::Ones(zs[i + 1].size()) - zs[i + 1].cwiseProduct(zs[i + 1]));
    VecX<S> dpre = dz.cwiseProduct(one_minus_sq);
    grads.head[i].w.noalias() += dpre * zs[i].transpose();
    grads.head[i].b += dpre;
    dz = head[i].w.transpose() * dpre;
  }

  if (is_mlp()) {
    MatX<S> zero = MatX<S>::Zero(dz.rows(), 1);
    VecX<S> dpre = (tc.mlp_pre.array() > S(0)).select(dz, zero);
    grads.mlp_enc.w.noalias() += dpre * tc.mlp_in.transpose();
    grads.mlp_enc.b += dpre;
    return;
  }

  if (is_gpt()) {
    MatX<S> dlast = layer_norm_backward(ln_f, tc.lnf, MatX<S>(dz.transpose()), grads.ln_f);
    MatX<S> dx = MatX<S>::Zero(cfg.k, cfg.model_width());
    dx.bottomRows(1) = dlast;
    for (int l = static_cast<int>(blocks.size()) - 1; l >= 0; --l) {
      dx = block_backward(blocks[l], tc.blocks[l], &ctx.blocks[l].k, &ctx.blocks[l].v,
                          std::move(dx), grads.blocks[l], &gg.dk[l], &gg.dv[l], nullptr,
                          nullptr);
    }
    MatX<S> dtok = in_proj.backward(tc.tokens, dx, grads.in_proj);
    MatX<S> zero = MatX<S>::Zero(dtok.rows(), dtok.cols());
    MatX<S> dpre = (tc.enc_pre.array() > S(0)).select(dtok, zero);
    enc_low.backward(tc.obs_in, dpre, grads.enc_low);
    return;
  }

  // recurrent: BPTT over the k tail steps
  const int nl = cfg.n_layers();
  MatX<S> dtop_rows;  // d(output rows of layer below's consumer)
  for (int l = nl - 1; l >= 0; --l) {
    VecX<S> dh_t = VecX<S>::Zero(cfg.layer_dims[l]);
    VecX<S> dc_t = VecX<S>::Zero(cfg.layer_dims[l]);
    if (l == nl - 1) dh_t = dz;  // head consumes the final hidden state
    MatX<S> dx_rows;
    lstm_layer_backward(l, tc.lstm_x[l], tc.lstm_gates[l], tc.lstm_h[l], tc.lstm_c[l],
                        &tc.h0[l], &tc.c0[l], l < nl - 1 ? &dtop_rows : nullptr, dh_t, dc_t,
                        dx_rows, grads);
    gg.dh_end[l] += dh_t;
    gg.dc_end[l] += dc_t;
    dtop_rows = std::move(dx_rows);
  }
  MatX<S> zero = MatX<S>::Zero(dtop_rows.rows(), dtop_rows.cols());
  MatX<S> dpre = (tc.enc_pre.array() > S(0)).select(dtop_rows, zero);
  enc_low.backward(tc.obs_in, dpre, grads.enc_low);
}

template <class S>
void ModelP<S>::lstm_layer_backward(int l, const MatX<S>& xs, const MatX<S>& gates,
                                    const MatX<S>& hs, const MatX<S>& cs, const VecX<S>* h0,
                                    const VecX<S>* c0, const MatX<S>* dtop_rows, VecX<S>& dh_t,
                                    VecX<S>& dc_t, MatX<S>& dx_rows, ModelP<S>& grads) const {
  const int Hd = cfg.layer_dims[l];
  const Eigen::Index T = xs.rows();
  dx_rows = MatX<S>::Zero(T, xs.cols());
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    if (dtop_rows) dh_t += dtop_rows->row(t).transpose();
    const VecX<S> c_prev = t == 0 ? (c0 ? *c0 : VecX<S>(VecX<S>::Zero(Hd)))
                                  : VecX<S>(cs.row(t - 1).transpose());
    const VecX<S> h_prev = t == 0 ? (h0 ? *h0 : VecX<S>(VecX<S>::Zero(Hd)))
                                  : VecX<S>(hs.row(t - 1).transpose());
    VecX<S> dgates(4 * Hd);
    for (int j = 0; j < Hd; ++j) {
      const S i_g = gates(t, j);
      const S f_g = gates(t, Hd + j);
      const S g_g = gates(t, 2 * Hd + j);
      const S o_g = gates(t, 3 * Hd + j);
      const S tc_t = std::tanh(cs(t, j));
      const S do_ = dh_t[j] * tc_t;
      const S dc_ = dc_t[j] + dh_t[j] * o_g * (S(1) - tc_t * tc_t);
      const S di = dc_ * g_g;
      const S df = dc_ * c_prev[j];
      const S dg = dc_ * i_g;
      dc_t[j] = dc_ * f_g;
      dgates[j] = di * i_g * (S(1) - i_g);
      dgates[Hd + j] = df * f_g * (S(1) - f_g);
      dgates[2 * Hd + j] = dg * (S(1) - g_g * g_g);
      dgates[3 * Hd + j] = do_ * o_g * (S(1) - o_g);
    }
    grads.lstm[l].ih.w.noalias() += dgates * xs.row(t);
    grads.lstm[l].ih.b += dgates;
    grads.lstm[l].hh.w.noalias() += dgates * h_prev.transpose();
    grads.lstm[l].hh.b += dgates;
    dx_rows.row(t) = (lstm[l].ih.w.transpose() * dgates).transpose();
    dh_t = lstm[l].hh.w.transpose() * dgates;
  }
}

template <class S>
void ModelP<S>::backward_prompt(const PromptCtx<S>& ctx, const GroupGrad<S>& gg,
                                ModelP<S>& grads) const {
  if (is_mlp()) return;
  MatX<S> dtok;
  if (is_gpt()) {
    MatX<S> dx = MatX<S>::Zero(ctx.Lp, cfg.model_width());
    for (int l = static_cast<int>(blocks.size()) - 1; l >= 0; --l) {
      dx = block_backward(blocks[l], ctx.blocks[l], nullptr, nullptr, std::move(dx),
                          grads.blocks[l], nullptr, nullptr, &gg.dk[l], &gg.dv[l]);
    }
    dtok = in_proj.backward(ctx.tokens, dx, grads.in_proj);
  } else {
    const int nl = cfg.n_layers();
    MatX<S> dtop_rows;
    for (int l = nl - 1; l >= 0; --l) {
      VecX<S> dh_t = gg.dh_end[l];
      VecX<S> dc_t = gg.dc_end[l];
      MatX<S> dx_rows;
      lstm_layer_backward(l, ctx.lstm_x[l], ctx.lstm_gates[l], ctx.lstm_h[l], ctx.lstm_c[l],
                          nullptr, nullptr, l < nl - 1 ? &dtop_rows : nullptr, dh_t, dc_t,
                          dx_rows, grads);
      dtop_rows = std::move(dx_rows);
    }
    dtok = std::move(dtop_rows);
  }
  if (cfg.timestep_embeddings) {
    for (Eigen::Index i = 0; i < dtok.rows(); ++i)
      grads.ts_embed.row(ctx.ts_idx[i]) += dtok.row(i);
  }
  MatX<S> zero = MatX<S>::Zero(dtok.rows(), dtok.cols());
  MatX<S> dpre = (ctx.enc_pre.array() > S(0)).select(dtok, zero);
  enc_high.backward(ctx.high_in, dpre, grads.enc_high);
}

}  // namespace net
}  // namespace trt
