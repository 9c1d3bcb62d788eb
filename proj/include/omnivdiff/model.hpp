#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "omnivdiff/codec.hpp"
#include "omnivdiff/control.hpp"
#include "omnivdiff/palette.hpp"
#include "omnivdiff/tensor.hpp"

namespace ovd {

// Floor on (1-t) when converting a clean-latent head output into a noise
// prediction; keeps the conversion finite at t = 1 where the noise is
// unrecoverable anyway. Matches the default sampler's x0-recovery floor so
// the final Euler step lands exactly on the predicted clean latent.
inline constexpr double kBlendFloor = 0.02;

struct ModelConfig {
  int64_t model_dim = 256;
  int64_t depth = 4;
  int64_t heads = 4;
  int64_t latent_channels = 96;  // C per modality
  int64_t tokens_f = 4, tokens_h = 8, tokens_w = 8;
  int64_t caption_len = 9;
  int64_t vocab_size = kVocabSize;
  bool use_modality_embedding = true;
  bool use_msph = true;
  bool use_amcs = true;  // consumed by the trainer: off forces T2V roles

  int64_t video_tokens() const { return tokens_f * tokens_h * tokens_w; }
  int64_t fused_channels() const { return kNumModalities * latent_channels; }

  void validate() const {
    if (model_dim < 2 || model_dim % 2 != 0) throw std::invalid_argument("model_dim must be even and >= 2");
    if (model_dim % heads != 0) throw std::invalid_argument("model_dim must divide by heads");
    if (depth < 1 || latent_channels < 1 || caption_len < 1) throw std::invalid_argument("bad model config");
  }

  bool same_architecture(const ModelConfig& o) const {
    return model_dim == o.model_dim && depth == o.depth && heads == o.heads &&
           latent_channels == o.latent_channels && tokens_f == o.tokens_f &&
           tokens_h == o.tokens_h && tokens_w == o.tokens_w && caption_len == o.caption_len &&
           vocab_size == o.vocab_size && use_msph == o.use_msph;
  }
};

// Multi-modal diffusion transformer: fused channel-concat input, caption +
// timestep conditioning, adaLN-modulated attention blocks, per-modality heads.
template <typename T>
class OmniDiT {
 public:
  ModelConfig cfg;

  static OmniDiT init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    OmniDiT m;
    m.cfg = cfg;
    Rng rng(seed ^ 0xda3e39cb94b95bdbULL);
    int64_t d = cfg.model_dim, c = cfg.latent_channels;
    auto normal = [&](Shape shape, double std = 0.02) {
      int64_t n = numel(shape);
      std::vector<T> v(n);
      for (auto& x : v) x = static_cast<T>(rng.normal() * std);
      return Tensor<T>::leaf(std::move(shape), std::move(v));
    };
    auto zeros = [&](Shape shape) {
      return Tensor<T>::leaf(shape, std::vector<T>(numel(shape), T(0)));
    };
    m.add_param("token_embed.w", normal({cfg.fused_channels(), d}));
    m.add_param("token_embed.b", zeros({d}));
    // Unit-scale rows: the caption is the only input that distinguishes
    // text-conditioned generations, and it competes with O(1) positional
    // encodings inside the layer norm; at 0.02 it would be invisible there.
    m.add_param("caption_table", normal({cfg.vocab_size + 1, d}, 1.0));
    m.add_param("role_embed.gen", zeros({c}));
    m.add_param("role_embed.cond", zeros({c}));
    m.add_param("time_mlp.w1", normal({d, d}));
    m.add_param("time_mlp.b1", zeros({d}));
    m.add_param("time_mlp.w2", normal({d, d}));
    m.add_param("time_mlp.b2", zeros({d}));
    for (int64_t i = 0; i < cfg.depth; ++i) {
      std::string p = "block." + std::to_string(i) + ".";
      m.add_param(p + "attn.wqkv", normal({d, 3 * d}));
      m.add_param(p + "attn.bqkv", zeros({3 * d}));
      m.add_param(p + "attn.wo", normal({d, d}));
      m.add_param(p + "attn.bo", zeros({d}));
      m.add_param(p + "mlp.w1", normal({d, 4 * d}));
      m.add_param(p + "mlp.b1", zeros({4 * d}));
      m.add_param(p + "mlp.w2", normal({4 * d, d}));
      m.add_param(p + "mlp.b2", zeros({d}));
      m.add_param(p + "mod.w", normal({d, 6 * d}));
      m.add_param(p + "mod.b", zeros({6 * d}));
    }
    m.add_param("final_mod.w", normal({d, 2 * d}));
    m.add_param("final_mod.b", zeros({2 * d}));
    if (cfg.use_msph) {
      for (int mi = 0; mi < kNumModalities; ++mi) {
        std::string p = std::string("head.") + kModalityNames[mi] + ".";
        m.add_param(p + "w", zeros({d, c}));
        m.add_param(p + "b", zeros({c}));
      }
    } else {
      m.add_param("head.shared.w", zeros({d, kNumModalities * c}));
      m.add_param("head.shared.b", zeros({kNumModalities * c}));
    }
    return m;
  }

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }

  Tensor<T>& p(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::logic_error("no parameter named " + name);
    return params_[it->second].value;
  }
  const Tensor<T>& p(const std::string& name) const {
    return const_cast<OmniDiT*>(this)->p(name);
  }
  bool has_param(const std::string& name) const { return index_.count(name) > 0; }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& pr : params_) n += pr.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& pr : params_) pr.value.zero_grad();
  }

  // Channel concatenation in the fixed (rgb, depth, seg, edges) order.
  Tensor<T> build_input(const std::array<Tensor<T>, kNumModalities>& latents) const {
    Shape expect = {cfg.tokens_f, cfg.tokens_h, cfg.tokens_w, cfg.latent_channels};
    for (const auto& l : latents)
      if (l.shape() != expect)
        throw std::invalid_argument("latent shape " + shape_str(l.shape()) +
                                    " does not match token grid " + shape_str(expect));
    std::vector<Tensor<T>> parts(latents.begin(), latents.end());
    return concat(parts, 3);
  }

  // Noise predictions for every modality, each shaped (F,H,W,C). The trunk's
  // token embedding reads only conditioning channels (generation channels are
  // zeroed there); generation state reaches the outputs solely through the
  // algebraic skip below, so the heads must learn the clean latents from the
  // conditioning modalities and the caption instead of chasing their own
  // noisy state. Without roles every modality counts as generation.
  std::array<Tensor<T>, kNumModalities> forward(const Tensor<T>& fused, double t,
                                                const std::vector<int64_t>& caption,
                                                const RoleAssignment* roles = nullptr) const {
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("timestep t must be in [0,1]");
    if (static_cast<int64_t>(caption.size()) > cfg.caption_len)
      throw std::invalid_argument("caption overflows caption_len=" + std::to_string(cfg.caption_len));
    Shape expect = {cfg.tokens_f, cfg.tokens_h, cfg.tokens_w, cfg.fused_channels()};
    if (fused.shape() != expect)
      throw std::invalid_argument("fused latent shape " + shape_str(fused.shape()) +
                                  " does not match " + shape_str(expect));
    int64_t d = cfg.model_dim;
    int64_t nv = cfg.video_tokens();
    int64_t nc = cfg.caption_len;

    // Caption tokens, padded with the reserved pad id.
    std::vector<int64_t> ids(caption);
    for (int64_t t_id : ids)
      if (t_id < 0 || t_id >= cfg.vocab_size)
        throw std::invalid_argument("caption token id out of vocabulary");
    ids.resize(nc, cfg.vocab_size);  // pad row is the last table row
    Tensor<T> cap = gather_rows(p("caption_table"), ids);

    Tensor<T> cells = reshape(fused, {nv, cfg.fused_channels()});
    std::vector<T> mask_data(cfg.fused_channels(), T(0));
    if (roles)
      for (int mi = 0; mi < kNumModalities; ++mi)
        if (roles->roles[mi] == Role::Conditioning)
          std::fill(mask_data.begin() + mi * cfg.latent_channels,
                    mask_data.begin() + (mi + 1) * cfg.latent_channels, T(1));
    Tensor<T> trunk_cells = mul(cells, Tensor<T>({cfg.fused_channels()}, std::move(mask_data)));
    Tensor<T> x = add(matmul(trunk_cells, p("token_embed.w")), p("token_embed.b"));
    Tensor<T> tokens = concat(std::vector<Tensor<T>>{cap, x}, 0);
    tokens = add(tokens, positional_encoding());

    // Timestep embedding -> 2-layer mlp.
    Tensor<T> temb = sinusoidal_embed<T>({t * 1000.0}, d);
    temb = add(matmul(temb, p("time_mlp.w1")), p("time_mlp.b1"));
    temb = gelu(temb);
    temb = add(matmul(temb, p("time_mlp.w2")), p("time_mlp.b2"));  // (1, d)

    for (int64_t i = 0; i < cfg.depth; ++i) {
      std::string bp = "block." + std::to_string(i) + ".";
      Tensor<T> mod = add(matmul(temb, p(bp + "mod.w")), p(bp + "mod.b"));
      auto pieces = split(reshape(mod, {6 * d}), 0, {d, d, d, d, d, d});
      const Tensor<T>&shift1 = pieces[0], &scale1 = pieces[1], &gate1 = pieces[2];
      const Tensor<T>&shift2 = pieces[3], &scale2 = pieces[4], &gate2 = pieces[5];

      Tensor<T> h = layer_norm_last(tokens);
      h = add(mul(h, scalar_add(scale1, T(1))), shift1);
      Tensor<T> a = attention(h, bp);
      tokens = add(tokens, mul(a, gate1));

      Tensor<T> h2 = layer_norm_last(tokens);
      h2 = add(mul(h2, scalar_add(scale2, T(1))), shift2);
      Tensor<T> m1 = gelu(add(matmul(h2, p(bp + "mlp.w1")), p(bp + "mlp.b1")));
      Tensor<T> m2 = add(matmul(m1, p(bp + "mlp.w2")), p(bp + "mlp.b2"));
      tokens = add(tokens, mul(m2, gate2));
    }

    Tensor<T> video = slice(tokens, 0, nc, nv);
    Tensor<T> fmod = add(matmul(temb, p("final_mod.w")), p("final_mod.b"));
    auto fpieces = split(reshape(fmod, {2 * d}), 0, {d, d});
    Tensor<T> h = layer_norm_last(video);
    h = add(mul(h, scalar_add(fpieces[1], T(1))), fpieces[0]);

    std::array<Tensor<T>, kNumModalities> x0;
    Shape latent_shape = {cfg.tokens_f, cfg.tokens_h, cfg.tokens_w, cfg.latent_channels};
    if (cfg.use_msph) {
      for (int mi = 0; mi < kNumModalities; ++mi) {
        std::string hp = std::string("head.") + kModalityNames[mi] + ".";
        x0[mi] = reshape(add(matmul(h, p(hp + "w")), p(hp + "b")), latent_shape);
      }
    } else {
      Tensor<T> all = add(matmul(h, p("head.shared.w")), p("head.shared.b"));
      auto parts = split(all, 1, std::vector<int64_t>(kNumModalities, cfg.latent_channels));
      for (int mi = 0; mi < kNumModalities; ++mi) x0[mi] = reshape(parts[mi], latent_shape);
    }

    // Heads predict the clean latent; the noise estimate follows from inverting
    // the blend on the modality's own input channels. The fused width (M·C)
    // exceeds model_dim, so a trunk-only noise head would sit behind a rank
    // bottleneck that caps how much of the input it can reproduce; routing the
    // input around the trunk removes that cap without adding parameters.
    std::array<Tensor<T>, kNumModalities> out;
    T inv = static_cast<T>(1.0 / std::max(1.0 - t, kBlendFloor));
    for (int mi = 0; mi < kNumModalities; ++mi) {
      Tensor<T> cell = slice(fused, 3, mi * cfg.latent_channels, cfg.latent_channels);
      out[mi] = scalar_mul(sub(cell, scalar_mul(x0[mi], static_cast<T>(t))), inv);
    }
    return out;
  }

  Tensor<T> role_embedding(Role role) const {
    return p(role == Role::Generation ? "role_embed.gen" : "role_embed.cond");
  }

  // For the checkpoint writer: replace a parameter's values in place.
  void set_param_data(const std::string& name, const std::vector<T>& data) {
    Tensor<T>& t = p(name);
    if (static_cast<int64_t>(data.size()) != t.size())
      throw std::invalid_argument("parameter " + name + " size mismatch on load");
    t.data() = data;
  }

 private:
  std::vector<Param<T>> params_;
  std::map<std::string, size_t> index_;

  void add_param(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter " + name);
    index_[name] = params_.size();
    params_.push_back({name, std::move(value)});
  }

  // Fixed sinusoidal positions: caption slots 0..nc-1, video cells nc+idx.
  Tensor<T> positional_encoding() const {
    std::vector<double> pos;
    for (int64_t i = 0; i < cfg.caption_len; ++i) pos.push_back(static_cast<double>(i));
    for (int64_t i = 0; i < cfg.video_tokens(); ++i)
      pos.push_back(static_cast<double>(cfg.caption_len + i));
    return sinusoidal_embed<T>(pos, cfg.model_dim);
  }

  Tensor<T> attention(const Tensor<T>& h, const std::string& bp) const {
    int64_t d = cfg.model_dim;
    int64_t dh = d / cfg.heads;
    Tensor<T> qkv = add(matmul(h, p(bp + "attn.wqkv")), p(bp + "attn.bqkv"));
    Tensor<T> q = slice(qkv, 1, 0, d);
    Tensor<T> k = slice(qkv, 1, d, d);
    Tensor<T> v = slice(qkv, 1, 2 * d, d);
    T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<Tensor<T>> heads_out;
    for (int64_t hi = 0; hi < cfg.heads; ++hi) {
      Tensor<T> qh = slice(q, 1, hi * dh, dh);
      Tensor<T> kh = slice(k, 1, hi * dh, dh);
      Tensor<T> vh = slice(v, 1, hi * dh, dh);
      Tensor<T> scores = scalar_mul(matmul(qh, transpose_last2(kh)), scale);
      heads_out.push_back(matmul(softmax_last(scores), vh));
    }
    Tensor<T> cat = concat(heads_out, 1);
    return add(matmul(cat, p(bp + "attn.wo")), p(bp + "attn.bo"));
  }
};

}  // namespace ovd
