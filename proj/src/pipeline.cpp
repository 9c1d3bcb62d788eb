#include "omnivdiff/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>

#include "omnivdiff/image.hpp"

namespace ovd::pipeline {

namespace fs = std::filesystem;

void generate_dataset(const RunConfig& cfg, const std::string& dir, int64_t n, uint64_t seed_base) {
  fs::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (int64_t i = 0; i < n; ++i) {
    uint64_t seed = seed_base + static_cast<uint64_t>(i);
    SceneSpec spec = sample_scene(seed, cfg.scene());
    MultiModalVideo v = render(spec);
    std::string why;
    if (!check_consistency(spec, v, &why))
      throw std::runtime_error("generated sample failed consistency re-check: " + why);
    std::ostringstream name;
    name << "sample_" << std::setw(5) << std::setfill('0') << i << ".ommv";
    write_sample(v, dir + "/" + name.str());
    entries.push_back({name.str(), seed});
  }
  write_manifest(entries, dir + "/manifest.txt");
}

std::vector<EncodedSample> encode_dataset(const std::vector<MultiModalVideo>& samples,
                                          const CodecConfig& codec) {
  std::vector<EncodedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(encode_sample(s, codec));
  return out;
}

OmniDiT<float> train_model(const RunConfig& cfg, const std::vector<EncodedSample>& train_set,
                           std::ostream* log, const OmniDiT<float>* start_model,
                           int64_t start_step, int64_t steps_override,
                           const std::optional<RoleAssignment>& forced_roles,
                           const CheckpointHook& on_checkpoint) {
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  TrainConfig tc = cfg.train();
  if (steps_override >= 0) tc.steps = steps_override;
  tc.validate();

  OmniDiT<float> model =
      start_model ? *start_model : OmniDiT<float>::init(cfg.model(), cfg.seed);
  AdamOptimizer<float> opt(model);
  // Mixing the start step into the stream keeps resumed runs deterministic.
  Rng rng(tc.seed ^ (0xabcdef12345678ULL + static_cast<uint64_t>(start_step)));

  const double base_lr = tc.lr;
  for (int64_t step = start_step + 1; step <= tc.steps; ++step) {
    // Constant lr for the first 60% of the run, cosine decay to zero after;
    // the decay settles the parameters against end-of-run gradient noise.
    double frac = static_cast<double>(step) / static_cast<double>(tc.steps);
    tc.lr = frac <= 0.6 ? base_lr
                        : base_lr * 0.5 * (1.0 + std::cos(M_PI * (frac - 0.6) / 0.4));
    std::vector<const EncodedSample*> batch;
    for (int64_t b = 0; b < tc.batch_size; ++b)
      batch.push_back(&train_set[rng.uniform_index(train_set.size())]);
    std::array<int64_t, kNumTasks> counts{};
    double loss;
    try {
      loss = training_step(model, batch, tc, opt, rng, &counts, forced_roles);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training aborted at step " + std::to_string(step) + ": " +
                               e.what());
    }
    if (log) {
      (*log) << step << "," << loss << ",";
      for (int i = 0; i < kNumTasks; ++i) (*log) << (i ? "|" : "") << counts[i];
      (*log) << "\n";
    }
    if (on_checkpoint && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 &&
        step != tc.steps)
      on_checkpoint(step, model);
  }
  if (on_checkpoint) on_checkpoint(tc.steps, model);
  return model;
}

SampleOutput run_sampling(const OmniDiT<float>& model, TaskKind task,
                          const std::optional<std::vector<double>>& cond,
                          const std::vector<int64_t>& caption, const RunConfig& cfg,
                          uint64_t seed) {
  std::array<std::optional<std::vector<double>>, kNumModalities> conds;
  if (task != TaskKind::T2V) {
    if (!cond) throw std::invalid_argument("task requires a conditioning latent");
    conds[static_cast<int>(task) - 1] = *cond;
  } else if (cond) {
    throw std::invalid_argument("t2v takes no conditioning latent");
  }
  Rng rng(seed ^ 0x5eedf00d12345ULL);
  SampleOutput out;
  out.latents = sample_video(model, task, conds, caption, cfg.sampler(), rng);
  out.video = decode_stack(out.latents, cfg, caption);
  return out;
}

MultiModalVideo decode_stack(const std::array<std::vector<double>, kNumModalities>& latents,
                             const RunConfig& cfg, const std::vector<int64_t>& caption) {
  MultiModalVideo v;
  v.frames = cfg.frames;
  v.height = cfg.height;
  v.width = cfg.width;
  CodecConfig codec = cfg.codec();
  v.rgb = decode(latents[static_cast<int>(Modality::Rgb)], v.frames, v.height, v.width, codec, true);
  v.depth = depth_from_color(
      decode(latents[static_cast<int>(Modality::Depth)], v.frames, v.height, v.width, codec, true));
  v.seg = seg_from_color(
      decode(latents[static_cast<int>(Modality::Seg)], v.frames, v.height, v.width, codec, true));
  v.edges = edges_from_color(
      decode(latents[static_cast<int>(Modality::Edges)], v.frames, v.height, v.width, codec, true));
  v.caption = caption;
  return v;
}

MetricReport evaluate(const OmniDiT<float>& model, const std::vector<MultiModalVideo>& samples,
                      TaskKind task, const RunConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("evaluation split is empty");
  MetricReport report;
  double rgb_sse = 0.0;
  int64_t rgb_n = 0;
  CodecConfig codec = cfg.codec();
  for (size_t i = 0; i < samples.size(); ++i) {
    const MultiModalVideo& gt = samples[i];
    std::optional<std::vector<double>> cond;
    if (task != TaskKind::T2V) {
      Modality cm = static_cast<Modality>(static_cast<int>(task) - 1);
      cond = encode(to_color(gt, cm), gt.frames, gt.height, gt.width, codec);
    }
    SampleOutput out =
        run_sampling(model, task, cond, gt.caption, cfg, cfg.sample_seed + i);
    double absrel, delta1;
    depth_metrics(out.video.depth, gt.depth, absrel, delta1);
    report.absrel += absrel;
    report.delta1 += delta1;
    report.miou += seg_miou(out.video.seg, gt.seg);
    report.edge_f1 += edge_f1(out.video.edges, gt.edges, gt.frames, gt.height, gt.width);
    for (size_t j = 0; j < gt.rgb.size(); ++j) {
      double d = static_cast<double>(out.video.rgb[j]) - gt.rgb[j];
      rgb_sse += d * d;
    }
    rgb_n += static_cast<int64_t>(gt.rgb.size());
  }
  double n = static_cast<double>(samples.size());
  report.absrel /= n;
  report.delta1 /= n;
  report.miou /= n;
  report.edge_f1 /= n;
  double mse = rgb_sse / static_cast<double>(rgb_n);
  report.psnr = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
  report.n_samples = static_cast<int64_t>(samples.size());
  return report;
}

double composite_score(const MetricReport& understanding, const MetricReport& depth_generation) {
  double absrel_c = std::clamp(1.0 - understanding.absrel, 0.0, 1.0);
  double p = depth_generation.psnr;
  double psnr_norm = std::isinf(p) ? 1.0 : std::clamp(p / 40.0, 0.0, 1.0);
  return (absrel_c + understanding.miou + understanding.edge_f1 + psnr_norm) / 4.0;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const std::vector<EncodedSample>& train_set,
                                      const std::vector<MultiModalVideo>& eval_set,
                                      std::ostream* log, const VariantHook& on_model) {
  struct Variant {
    const char* name;
    bool embed, amcs, msph;
  };
  const Variant variants[] = {
      {"full", true, true, true},
      {"no_modality_embedding", false, true, true},
      {"no_amcs", true, false, true},
      {"no_msph", true, true, false},
  };
  std::vector<AblationRow> rows;
  for (const Variant& var : variants) {
    RunConfig vc = cfg;
    vc.use_modality_embedding = var.embed;
    vc.use_amcs = var.amcs;
    vc.use_msph = var.msph;
    if (log) (*log) << "# variant " << var.name << "\n";
    OmniDiT<float> model = train_model(vc, train_set, log);
    if (on_model) on_model(var.name, model);
    AblationRow row;
    row.name = var.name;
    row.understanding = evaluate(model, eval_set, TaskKind::CondRgb, vc);
    row.generation = evaluate(model, eval_set, TaskKind::CondDepth, vc);
    row.composite = composite_score(row.understanding, row.generation);
    rows.push_back(std::move(row));
  }
  return rows;
}

V2VResult v2v_style(const OmniDiT<float>& model, const MultiModalVideo& source,
                    const std::vector<int64_t>& new_caption, const RunConfig& cfg) {
  CodecConfig codec = cfg.codec();
  std::vector<double> rgb_latent =
      encode(to_color(source, Modality::Rgb), source.frames, source.height, source.width, codec);
  V2VResult r;
  r.understanding =
      run_sampling(model, TaskKind::CondRgb, rgb_latent, source.caption, cfg, cfg.sample_seed);
  // The *predicted* depth drives the restyle pass.
  const std::vector<double>& depth_latent = r.understanding.latents[static_cast<int>(Modality::Depth)];
  r.restyled =
      run_sampling(model, TaskKind::CondDepth, depth_latent, new_caption, cfg, cfg.sample_seed + 1);
  return r;
}

std::vector<double> lowres_conditioning(const MultiModalVideo& v, const RunConfig& cfg) {
  std::vector<float> low = box_downsample(v.rgb, v.frames, v.height, v.width, cfg.sr_factor);
  std::vector<float> up = bilinear_upsample(low, v.frames, v.height / cfg.sr_factor,
                                            v.width / cfg.sr_factor, cfg.sr_factor);
  return encode(up, v.frames, v.height, v.width, cfg.codec());
}

OmniDiT<float> adapt_sr(const OmniDiT<float>& base, const std::vector<MultiModalVideo>& train_set,
                        const RunConfig& cfg, std::ostream* log) {
  CodecConfig codec = cfg.codec();
  std::vector<EncodedSample> adapted;
  for (const auto& v : train_set) {
    EncodedSample s = encode_sample(v, codec);
    s.latents[static_cast<int>(Modality::Edges)] = lowres_conditioning(v, cfg);
    adapted.push_back(std::move(s));
  }
  RoleAssignment roles = assign_roles(TaskKind::CondEdges);
  return train_model(cfg, adapted, log, &base, 0, cfg.sr_steps, roles);
}

SrEval evaluate_sr(const OmniDiT<float>& adapted, const std::vector<MultiModalVideo>& eval_set,
                   const RunConfig& cfg) {
  if (eval_set.empty()) throw std::invalid_argument("evaluation split is empty");
  double model_sse = 0.0, bicubic_sse = 0.0;
  int64_t n = 0;
  for (size_t i = 0; i < eval_set.size(); ++i) {
    const MultiModalVideo& gt = eval_set[i];
    std::vector<double> cond = lowres_conditioning(gt, cfg);
    SampleOutput out =
        run_sampling(adapted, TaskKind::CondEdges, cond, gt.caption, cfg, cfg.sample_seed + i);
    std::vector<float> low = box_downsample(gt.rgb, gt.frames, gt.height, gt.width, cfg.sr_factor);
    std::vector<float> bicubic = bicubic_upsample(low, gt.frames, gt.height / cfg.sr_factor,
                                                  gt.width / cfg.sr_factor, cfg.sr_factor);
    for (size_t j = 0; j < gt.rgb.size(); ++j) {
      double dm = static_cast<double>(out.video.rgb[j]) - gt.rgb[j];
      double db = static_cast<double>(bicubic[j]) - gt.rgb[j];
      model_sse += dm * dm;
      bicubic_sse += db * db;
    }
    n += static_cast<int64_t>(gt.rgb.size());
  }
  auto to_psnr = [&](double sse) {
    double mse = sse / static_cast<double>(n);
    return mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
  };
  return {to_psnr(model_sse), to_psnr(bicubic_sse)};
}

}  // namespace ovd::pipeline
