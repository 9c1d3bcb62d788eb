#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "omnivdiff/codec.hpp"
#include "omnivdiff/model.hpp"
#include "omnivdiff/scene.hpp"
#include "omnivdiff/train.hpp"

namespace ovd {

// Full run configuration: key=value file plus command-line overrides
// (later wins). Every key is validated against the closed schema below;
// unknown keys are rejected.
struct RunConfig {
  // paths
  std::string data_dir = "data/train";
  std::string eval_dir = "data/eval";
  std::string out_dir = "out";
  std::string checkpoint = "out/model.ovdf";

  // dataset
  int64_t n_train = 64, n_eval = 16;
  int64_t frames = 8, height = 32, width = 32;
  uint64_t data_seed = 1;

  // codec
  int64_t codec_ft = 2, codec_fh = 4, codec_fw = 4;

  // model
  int64_t model_dim = 256, depth = 4, heads = 4, caption_len = 9;
  bool use_modality_embedding = true, use_msph = true, use_amcs = true;

  // training
  double lr = 2e-4;
  int64_t steps = 2000, batch_size = 4;
  uint64_t seed = 0;
  double t_floor = 0.02, grad_clip = 1.0, beta1 = 0.9, beta2 = 0.95, weight_decay = 0.0;
  std::array<double, kNumTasks> task_mixture = {0.2, 0.2, 0.2, 0.2, 0.2};
  int64_t stage = 0;  // 0 = use task_mixture, 1 = pure T2V, 2 = uniform
  int64_t checkpoint_every = 500;
  bool resume = false;

  // sampling / adaptation
  int64_t sampler_steps = 50;
  uint64_t sample_seed = 0;
  int64_t sr_steps = 500;
  int64_t sr_factor = 4;

  static RunConfig from_file(const std::string& path);
  static const std::vector<std::string>& known_keys();

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;

  CodecConfig codec() const { return {codec_fh, codec_fw, codec_ft}; }
  SceneConfig scene() const { return {frames, height, width, codec_ft, codec_fh, codec_fw}; }
  ModelConfig model() const;
  TrainConfig train() const;
  SamplerConfig sampler() const { return {sampler_steps, t_floor}; }

  // Effective mixture after the stage preset.
  std::array<double, kNumTasks> effective_mixture() const;
};

}  // namespace ovd
