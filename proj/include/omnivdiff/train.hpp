#pragma once

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "omnivdiff/codec.hpp"
#include "omnivdiff/control.hpp"
#include "omnivdiff/model.hpp"
#include "omnivdiff/tensor.hpp"

namespace ovd {

struct TrainConfig {
  double lr = 2e-4;  // toy default; the reference setup uses 2e-5 at 5B scale
  int64_t steps = 2000;
  int64_t batch_size = 4;
  uint64_t seed = 0;
  std::array<double, kNumTasks> task_mixture = {0.2, 0.2, 0.2, 0.2, 0.2};
  double t_floor = 0.02;
  double grad_clip = 1.0;
  double beta1 = 0.9, beta2 = 0.95;
  double weight_decay = 0.0;

  void validate() const {
    if (lr <= 0) throw std::invalid_argument("lr must be > 0");
    if (t_floor <= 0 || t_floor >= 1) throw std::invalid_argument("t_floor must be in (0,1)");
    if (batch_size < 1 || steps < 0) throw std::invalid_argument("bad train config");
    validate_mixture(task_mixture);
  }
};

struct SamplerConfig {
  int64_t steps = 50;
  double t_floor = 0.02;

  void validate() const {
    if (steps < 1) throw std::invalid_argument("sampler steps must be >= 1");
    if (t_floor <= 0 || t_floor >= 1) throw std::invalid_argument("t_floor must be in (0,1)");
  }
};

// A training/eval sample after the codec: one latent per modality + caption.
struct EncodedSample {
  std::array<std::vector<double>, kNumModalities> latents;
  std::vector<int64_t> caption;
};

inline EncodedSample encode_sample(const MultiModalVideo& v, const CodecConfig& codec) {
  EncodedSample s;
  for (int m = 0; m < kNumModalities; ++m)
    s.latents[m] = encode(to_color(v, static_cast<Modality>(m)), v.frames, v.height, v.width, codec);
  s.caption = v.caption;
  return s;
}

// x0_hat = (x_t - (1-t)*eps_hat) / max(t, t_floor)
inline std::vector<double> recover_x0(const std::vector<double>& x_t,
                                      const std::vector<double>& eps_hat, double t,
                                      double t_floor) {
  if (x_t.size() != eps_hat.size()) throw std::invalid_argument("recover_x0: size mismatch");
  double denom = std::max(t, t_floor);
  std::vector<double> out(x_t.size());
  for (size_t i = 0; i < x_t.size(); ++i) out[i] = (x_t[i] - (1.0 - t) * eps_hat[i]) / denom;
  return out;
}

// Adam with bias correction and global-norm gradient clipping.
template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const OmniDiT<T>& model) {
    for (const auto& pr : model.params()) {
      m_.emplace_back(pr.value.size(), 0.0);
      v_.emplace_back(pr.value.size(), 0.0);
    }
  }

  void step(OmniDiT<T>& model, const TrainConfig& cfg) {
    ++t_;
    double norm_sq = 0.0;
    for (auto& pr : model.params())
      for (T g : pr.value.grad()) norm_sq += static_cast<double>(g) * static_cast<double>(g);
    double scale = 1.0;
    double norm = std::sqrt(norm_sq);
    if (cfg.grad_clip > 0 && norm > cfg.grad_clip) scale = cfg.grad_clip / norm;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    auto& params = model.params();
    for (size_t i = 0; i < params.size(); ++i) {
      auto& val = params[i].value.data();
      auto& grad = params[i].value.grad();
      for (int64_t j = 0; j < static_cast<int64_t>(val.size()); ++j) {
        double g = static_cast<double>(grad[j]) * scale;
        if (cfg.weight_decay > 0) g += cfg.weight_decay * static_cast<double>(val[j]);
        m_[i][j] = cfg.beta1 * m_[i][j] + (1.0 - cfg.beta1) * g;
        v_[i][j] = cfg.beta2 * v_[i][j] + (1.0 - cfg.beta2) * g * g;
        double mh = m_[i][j] / bc1;
        double vh = v_[i][j] / bc2;
        val[j] -= static_cast<T>(cfg.lr * mh / (std::sqrt(vh) + 1e-8));
      }
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

// One optimization step of the role-masked denoising objective. Per element:
// draw a task and t, blend per role, add role embeddings, forward, and average
// masked per-modality MSEs. An injectable role override supports the
// slot-repurposing workflow (it must still pass the generation-count guard).
template <typename T>
double training_step(OmniDiT<T>& model, const std::vector<const EncodedSample*>& batch,
                     const TrainConfig& cfg, AdamOptimizer<T>& opt, Rng& rng,
                     std::array<int64_t, kNumTasks>* task_counts = nullptr,
                     const std::optional<RoleAssignment>& forced_roles = std::nullopt) {
  if (batch.empty()) throw std::invalid_argument("training_step: empty batch");
  const ModelConfig& mc = model.cfg;
  Shape latent_shape = {mc.tokens_f, mc.tokens_h, mc.tokens_w, mc.latent_channels};
  int64_t latent_size = numel(latent_shape);

  model.zero_grad();
  Tensor<T> total = Tensor<T>::scalar(T(0));
  for (const EncodedSample* sample : batch) {
    TaskKind task;
    RoleAssignment roles;
    if (forced_roles) {
      roles = validate_roles(*forced_roles);
      task = TaskKind::T2V;  // counted under t2v; roles are what matter
    } else {
      task = model.cfg.use_amcs ? sample_task(rng, cfg.task_mixture) : TaskKind::T2V;
      roles = assign_roles(task);
    }
    if (task_counts) ++(*task_counts)[static_cast<int>(task)];
    double t = cfg.t_floor + (1.0 - cfg.t_floor) * rng.uniform();

    std::array<Tensor<T>, kNumModalities> noisy;
    std::array<Tensor<T>, kNumModalities> targets;
    for (int m = 0; m < kNumModalities; ++m) {
      const std::vector<double>& x = sample->latents[m];
      if (static_cast<int64_t>(x.size()) != latent_size)
        throw std::invalid_argument("encoded latent size does not match model token grid");
      std::vector<double> eps(x.size());
      for (auto& e : eps) e = rng.normal();
      Role role = roles.roles[m];
      std::vector<double> blended = blend(x, eps, t, role);
      std::vector<T> bl(blended.begin(), blended.end());
      std::vector<T> ep(eps.begin(), eps.end());
      noisy[m] = apply_role_embedding(Tensor<T>(latent_shape, std::move(bl)), role,
                                      model.role_embedding(Role::Generation),
                                      model.role_embedding(Role::Conditioning),
                                      mc.use_modality_embedding);
      targets[m] = Tensor<T>(latent_shape, std::move(ep));
    }

    auto preds = model.forward(model.build_input(noisy), t, sample->caption, &roles);
    auto mask = loss_mask(roles);
    int n_gen = roles.generation_count();
    Tensor<T> elem = Tensor<T>::scalar(T(0));
    for (int m = 0; m < kNumModalities; ++m) {
      if (mask[m] == 0.0f) continue;
      Tensor<T> diff = sub(preds[m], targets[m]);
      elem = add(elem, scalar_mul(mean_all(mul(diff, diff)), T(1.0 / n_gen)));
    }
    total = add(total, scalar_mul(elem, T(1.0 / static_cast<double>(batch.size()))));
  }

  double loss = static_cast<double>(total.item());
  if (!std::isfinite(loss)) throw std::runtime_error("non-finite training loss");
  backward(total);
  opt.step(model, cfg);
  return loss;
}

// Deterministic Euler sampler on recovered x0. Conditioning modalities are
// held at their clean latents at every step and returned untouched.
template <typename T>
std::array<std::vector<double>, kNumModalities> sample_video(
    const OmniDiT<T>& model, TaskKind task,
    const std::array<std::optional<std::vector<double>>, kNumModalities>& cond,
    const std::vector<int64_t>& caption, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  const ModelConfig& mc = model.cfg;
  RoleAssignment roles = assign_roles(task);
  Shape latent_shape = {mc.tokens_f, mc.tokens_h, mc.tokens_w, mc.latent_channels};
  int64_t latent_size = numel(latent_shape);

  std::array<std::vector<double>, kNumModalities> state;
  for (int m = 0; m < kNumModalities; ++m) {
    bool is_cond = roles.roles[m] == Role::Conditioning;
    if (is_cond != cond[m].has_value())
      throw std::invalid_argument(std::string("conditioning latent ") +
                                  (is_cond ? "missing" : "unexpected") + " for modality " +
                                  kModalityNames[m]);
    if (is_cond) {
      if (static_cast<int64_t>(cond[m]->size()) != latent_size)
        throw std::invalid_argument("conditioning latent size mismatch");
      state[m] = *cond[m];
    } else {
      state[m].resize(latent_size);
      for (auto& e : state[m]) e = rng.normal();
    }
  }

  NoGradGuard ng;
  int64_t n = cfg.steps;
  for (int64_t k = 0; k < n; ++k) {
    double t0 = static_cast<double>(k) / static_cast<double>(n);
    double t1 = static_cast<double>(k + 1) / static_cast<double>(n);
    std::array<Tensor<T>, kNumModalities> inputs;
    for (int m = 0; m < kNumModalities; ++m) {
      std::vector<T> data(state[m].begin(), state[m].end());
      inputs[m] = apply_role_embedding(Tensor<T>(latent_shape, std::move(data)), roles.roles[m],
                                       model.role_embedding(Role::Generation),
                                       model.role_embedding(Role::Conditioning),
                                       mc.use_modality_embedding);
    }
    auto preds = model.forward(model.build_input(inputs), t0, caption, &roles);
    for (int m = 0; m < kNumModalities; ++m) {
      if (roles.roles[m] == Role::Conditioning) continue;  // reset-every-step contract
      std::vector<double> eps_hat(preds[m].data().begin(), preds[m].data().end());
      std::vector<double> x0 = recover_x0(state[m], eps_hat, t0, cfg.t_floor);
      for (int64_t i = 0; i < latent_size; ++i) state[m][i] += (t1 - t0) * (x0[i] - eps_hat[i]);
    }
  }
  return state;
}

// ---- OVDF checkpoints ----

struct CheckpointMeta {
  ModelConfig model;
  int64_t step = 0;
  std::map<std::string, std::string> extra;  // freeform entries in the config block
};

namespace detail {

inline void ck_put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back(v >> 8);
}
inline void ck_put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

inline std::string config_block(const CheckpointMeta& meta) {
  const ModelConfig& c = meta.model;
  std::ostringstream os;
  os << "model_dim=" << c.model_dim << "\ndepth=" << c.depth << "\nheads=" << c.heads
     << "\nlatent_channels=" << c.latent_channels << "\ntokens_f=" << c.tokens_f
     << "\ntokens_h=" << c.tokens_h << "\ntokens_w=" << c.tokens_w
     << "\ncaption_len=" << c.caption_len << "\nvocab_size=" << c.vocab_size
     << "\nuse_modality_embedding=" << (c.use_modality_embedding ? 1 : 0)
     << "\nuse_msph=" << (c.use_msph ? 1 : 0) << "\nuse_amcs=" << (c.use_amcs ? 1 : 0)
     << "\nstep=" << meta.step << "\n";
  for (const auto& [k, v] : meta.extra) os << k << "=" << v << "\n";
  return os.str();
}

inline CheckpointMeta parse_config_block(const std::string& text) {
  CheckpointMeta meta;
  std::istringstream is(text);
  std::string line;
  std::map<std::string, std::string> kv;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("OVDF: malformed config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take_int = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error(std::string("OVDF: missing config key ") + key);
    int64_t v = std::stoll(it->second);
    kv.erase(it);
    return v;
  };
  meta.model.model_dim = take_int("model_dim");
  meta.model.depth = take_int("depth");
  meta.model.heads = take_int("heads");
  meta.model.latent_channels = take_int("latent_channels");
  meta.model.tokens_f = take_int("tokens_f");
  meta.model.tokens_h = take_int("tokens_h");
  meta.model.tokens_w = take_int("tokens_w");
  meta.model.caption_len = take_int("caption_len");
  meta.model.vocab_size = take_int("vocab_size");
  meta.model.use_modality_embedding = take_int("use_modality_embedding") != 0;
  meta.model.use_msph = take_int("use_msph") != 0;
  meta.model.use_amcs = take_int("use_amcs") != 0;
  meta.step = take_int("step");
  meta.extra = std::move(kv);
  return meta;
}

}  // namespace detail

inline std::vector<uint8_t> serialize_checkpoint(const OmniDiT<float>& model,
                                                 const CheckpointMeta& meta) {
  std::vector<uint8_t> out;
  out.insert(out.end(), {'O', 'V', 'D', 'F'});
  detail::ck_put_u16(out, 1);
  std::string cfg = detail::config_block(meta);
  detail::ck_put_u32(out, static_cast<uint32_t>(cfg.size()));
  out.insert(out.end(), cfg.begin(), cfg.end());
  for (const auto& pr : model.params()) {
    if (pr.name.size() > 0xffff) throw std::invalid_argument("parameter name too long");
    detail::ck_put_u16(out, static_cast<uint16_t>(pr.name.size()));
    out.insert(out.end(), pr.name.begin(), pr.name.end());
    out.push_back(static_cast<uint8_t>(pr.value.rank()));
    for (int64_t e : pr.value.shape()) detail::ck_put_u32(out, static_cast<uint32_t>(e));
    size_t base = out.size();
    out.resize(base + pr.value.size() * 4);
    std::memcpy(out.data() + base, pr.value.data().data(), pr.value.size() * 4);
  }
  uint32_t crc = crc32(0, out.data(), out.size());
  detail::ck_put_u32(out, crc);
  return out;
}

inline std::pair<OmniDiT<float>, CheckpointMeta> deserialize_checkpoint(
    const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 10) throw std::runtime_error("OVDF: truncated file");
  if (std::memcmp(bytes.data(), "OVDF", 4) != 0) throw std::runtime_error("OVDF: bad magic");
  uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i)
    stored_crc |= static_cast<uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
  uint32_t crc = crc32(0, bytes.data(), bytes.size() - 4);
  if (crc != stored_crc) throw std::runtime_error("OVDF: crc mismatch");

  size_t pos = 4;
  auto u16 = [&]() {
    uint16_t v = bytes[pos] | (bytes[pos + 1] << 8);
    pos += 2;
    return v;
  };
  auto u32 = [&]() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  };
  uint16_t version = u16();
  if (version != 1) throw std::runtime_error("OVDF: unsupported version");
  uint32_t cfg_len = u32();
  if (pos + cfg_len > bytes.size() - 4) throw std::runtime_error("OVDF: truncated config block");
  CheckpointMeta meta =
      detail::parse_config_block(std::string(bytes.begin() + pos, bytes.begin() + pos + cfg_len));
  pos += cfg_len;
  OmniDiT<float> model = OmniDiT<float>::init(meta.model, 0);
  size_t end = bytes.size() - 4;
  while (pos < end) {
    if (pos + 2 > end) throw std::runtime_error("OVDF: truncated parameter record");
    uint16_t name_len = u16();
    if (pos + name_len + 1 > end) throw std::runtime_error("OVDF: truncated parameter record");
    std::string name(bytes.begin() + pos, bytes.begin() + pos + name_len);
    pos += name_len;
    uint8_t rank = bytes[pos++];
    Shape shape(rank);
    if (pos + 4 * rank > end) throw std::runtime_error("OVDF: truncated parameter record");
    for (auto& e : shape) e = u32();
    int64_t n = numel(shape);
    if (pos + n * 4 > end) throw std::runtime_error("OVDF: truncated parameter data");
    std::vector<float> data(n);
    std::memcpy(data.data(), bytes.data() + pos, n * 4);
    pos += n * 4;
    model.set_param_data(name, data);
  }
  return {std::move(model), std::move(meta)};
}

inline void save_checkpoint(const OmniDiT<float>& model, const CheckpointMeta& meta,
                            const std::string& path) {
  auto bytes = serialize_checkpoint(model, meta);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::pair<OmniDiT<float>, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

// Load and require an architecture match against the requested config.
inline std::pair<OmniDiT<float>, CheckpointMeta> load_checkpoint_checked(
    const std::string& path, const ModelConfig& requested) {
  auto [model, meta] = load_checkpoint(path);
  if (!meta.model.same_architecture(requested))
    throw std::runtime_error("OVDF: config mismatch between checkpoint and requested model");
  return {std::move(model), std::move(meta)};
}

}  // namespace ovd
