#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "omnivdiff/config.hpp"
#include "omnivdiff/dataset.hpp"
#include "omnivdiff/metrics.hpp"
#include "omnivdiff/train.hpp"

namespace ovd::pipeline {

// Renders n scenes (seeds seed_base..seed_base+n-1) into OMMV files plus a
// manifest under dir. Every sample is re-checked for cross-modality
// consistency before it is written.
void generate_dataset(const RunConfig& cfg, const std::string& dir, int64_t n, uint64_t seed_base);

std::vector<EncodedSample> encode_dataset(const std::vector<MultiModalVideo>& samples,
                                          const CodecConfig& codec);

using CheckpointHook = std::function<void(int64_t step, const OmniDiT<float>&)>;

// Runs the optimization loop; `log` receives "step,loss,counts" lines.
// start_model/start_step resume an existing run; forced_roles pins every
// element to one role assignment (slot-repurposing adaptation).
OmniDiT<float> train_model(const RunConfig& cfg, const std::vector<EncodedSample>& train_set,
                           std::ostream* log = nullptr,
                           const OmniDiT<float>* start_model = nullptr, int64_t start_step = 0,
                           int64_t steps_override = -1,
                           const std::optional<RoleAssignment>& forced_roles = std::nullopt,
                           const CheckpointHook& on_checkpoint = nullptr);

struct SampleOutput {
  std::array<std::vector<double>, kNumModalities> latents;
  MultiModalVideo video;  // decoded planes
};

// Samples one video for the given task. cond supplies the conditioning
// latent when the task needs one; for dataset-driven runs use
// encode_sample(...).latents[task modality].
SampleOutput run_sampling(const OmniDiT<float>& model, TaskKind task,
                          const std::optional<std::vector<double>>& cond,
                          const std::vector<int64_t>& caption, const RunConfig& cfg,
                          uint64_t seed);

MultiModalVideo decode_stack(const std::array<std::vector<double>, kNumModalities>& latents,
                             const RunConfig& cfg, const std::vector<int64_t>& caption);

// Per-sample sampling + metrics against exact ground truth, averaged.
MetricReport evaluate(const OmniDiT<float>& model, const std::vector<MultiModalVideo>& samples,
                      TaskKind task, const RunConfig& cfg);

// Composite score used by the ablation comparison: mean of AbsRel-complement,
// mIoU, edge F1 (understanding run) and PSNR/40 clamped to 1 (depth-cond run).
double composite_score(const MetricReport& understanding, const MetricReport& depth_generation);

struct AblationRow {
  std::string name;
  MetricReport understanding;
  MetricReport generation;
  double composite;
};

using VariantHook = std::function<void(const std::string& name, const OmniDiT<float>&)>;

std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const std::vector<EncodedSample>& train_set,
                                      const std::vector<MultiModalVideo>& eval_set,
                                      std::ostream* log = nullptr,
                                      const VariantHook& on_model = nullptr);

struct V2VResult {
  SampleOutput understanding;  // rgb-conditioned pass; latents[Depth] is the estimate
  SampleOutput restyled;       // depth-conditioned pass under the new caption
};

V2VResult v2v_style(const OmniDiT<float>& model, const MultiModalVideo& source,
                    const std::vector<int64_t>& new_caption, const RunConfig& cfg);

// Low-resolution rgb conditioning for the repurposed edges slot:
// box-downsample by cfg.sr_factor, bilinear-upsample back, then encode.
std::vector<double> lowres_conditioning(const MultiModalVideo& v, const RunConfig& cfg);

// Fine-tunes a copy of `base` with the edges slot repurposed as described
// above; the base model is not modified.
OmniDiT<float> adapt_sr(const OmniDiT<float>& base, const std::vector<MultiModalVideo>& train_set,
                        const RunConfig& cfg, std::ostream* log = nullptr);

struct SrEval {
  double model_psnr;
  double bicubic_psnr;
};

SrEval evaluate_sr(const OmniDiT<float>& adapted, const std::vector<MultiModalVideo>& eval_set,
                   const RunConfig& cfg);

}  // namespace ovd::pipeline
