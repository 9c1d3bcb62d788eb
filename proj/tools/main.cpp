// Command-line front end: data generation, training, sampling, evaluation,
// ablations, and the two adaptation workflows.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "omnivdiff/image.hpp"
#include "omnivdiff/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ovd;

namespace {

RunConfig load_config(const std::string& config_path,
                      const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
  for (const std::string& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::vector<int64_t> parse_caption(const std::string& text) {
  std::istringstream is(text);
  std::vector<int64_t> tokens;
  std::string word;
  while (is >> word) tokens.push_back(vocab_id(word));
  if (static_cast<int64_t>(tokens.size()) > kMaxCaptionTokens)
    throw std::invalid_argument("caption has more than " + std::to_string(kMaxCaptionTokens) +
                                " words");
  return tokens;
}

MultiModalVideo load_source(const RunConfig& cfg, int64_t index, const std::string& file,
                            const std::string& dir) {
  if (!file.empty()) return read_sample(file);
  if (index < 0) throw std::invalid_argument("provide a sample index or an input file");
  std::vector<ManifestEntry> manifest = read_manifest(dir + "/manifest.txt");
  if (index >= static_cast<int64_t>(manifest.size()))
    throw std::invalid_argument("sample index " + std::to_string(index) + " out of range (" +
                                std::to_string(manifest.size()) + " samples)");
  (void)cfg;
  return read_sample(dir + "/" + manifest[index].filename);
}

void write_grids(const MultiModalVideo& v, const std::string& prefix) {
  for (int m = 0; m < kNumModalities; ++m) {
    std::vector<float> color = to_color(v, static_cast<Modality>(m));
    write_video_grid_png(prefix + "_" + kModalityNames[m] + ".png", color, v.frames, v.height,
                         v.width);
  }
}

void save_with_meta(const OmniDiT<float>& model, int64_t step, const std::string& path,
                    std::map<std::string, std::string> extra = {}) {
  CheckpointMeta meta;
  meta.model = model.cfg;
  meta.step = step;
  meta.extra = std::move(extra);
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  save_checkpoint(model, meta, path);
}

void append_metrics(const RunConfig& cfg, const std::string& tag, const MetricReport& r) {
  fs::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir + "/metrics.log", std::ios::app);
  log << tag << " " << r.to_line() << "\n";
}

void print_report(const std::string& tag, const MetricReport& r) {
  std::cout << std::left << std::setw(24) << tag << std::right << std::fixed
            << std::setprecision(4) << "  absrel=" << r.absrel << "  delta1=" << r.delta1
            << "  miou=" << r.miou << "  edge_f1=" << r.edge_f1 << "  psnr=" << std::setprecision(2)
            << r.psnr << "  n=" << r.n_samples << "\n";
}

int cmd_gen_data(const RunConfig& cfg) {
  pipeline::generate_dataset(cfg, cfg.data_dir, cfg.n_train, cfg.data_seed);
  if (cfg.n_eval > 0)
    pipeline::generate_dataset(cfg, cfg.eval_dir, cfg.n_eval,
                               cfg.data_seed + static_cast<uint64_t>(cfg.n_train));
  std::cout << "wrote " << cfg.n_train << " train samples to " << cfg.data_dir << " and "
            << cfg.n_eval << " eval samples to " << cfg.eval_dir << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  std::vector<MultiModalVideo> videos = read_dataset(cfg.data_dir);
  std::vector<EncodedSample> train_set = pipeline::encode_dataset(videos, cfg.codec());

  OmniDiT<float> start = OmniDiT<float>::init(cfg.model(), cfg.seed);
  int64_t start_step = 0;
  if (cfg.resume) {
    auto [model, meta] = load_checkpoint_checked(cfg.checkpoint, cfg.model());
    start = std::move(model);
    start_step = meta.step;
    std::cout << "resuming from " << cfg.checkpoint << " at step " << start_step << "\n";
  }

  fs::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir + "/train.log", cfg.resume ? std::ios::app : std::ios::trunc);
  auto hook = [&](int64_t step, const OmniDiT<float>& m) {
    save_with_meta(m, step, cfg.checkpoint);
  };
  pipeline::train_model(cfg, train_set, &log, &start, start_step, -1, std::nullopt, hook);
  std::cout << "trained to step " << cfg.steps << "; checkpoint at " << cfg.checkpoint << "\n";
  return 0;
}

int cmd_sample(const RunConfig& cfg, const std::string& task_name, int64_t cond_index,
               const std::string& cond_file, const std::string& caption_text,
               const std::string& out_prefix) {
  TaskKind task = task_from_name(task_name);
  auto [model, meta] = load_checkpoint_checked(cfg.checkpoint, cfg.model());

  std::optional<std::vector<double>> cond;
  std::vector<int64_t> caption;
  if (task != TaskKind::T2V) {
    MultiModalVideo src = load_source(cfg, cond_index, cond_file, cfg.eval_dir);
    Modality cm = static_cast<Modality>(static_cast<int>(task) - 1);
    cond = encode(to_color(src, cm), src.frames, src.height, src.width, cfg.codec());
    caption = caption_text.empty() ? src.caption : parse_caption(caption_text);
  } else {
    if (cond_index >= 0 || !cond_file.empty())
      throw std::invalid_argument("t2v takes no conditioning sample");
    if (caption_text.empty()) throw std::invalid_argument("t2v requires --caption");
    caption = parse_caption(caption_text);
  }

  pipeline::SampleOutput out =
      pipeline::run_sampling(model, task, cond, caption, cfg, cfg.sample_seed);

  std::string prefix = out_prefix.empty() ? cfg.out_dir + "/sample_" + task_name : out_prefix;
  fs::path pp(prefix);
  if (pp.has_parent_path()) fs::create_directories(pp.parent_path());
  write_sample(out.video, prefix + ".ommv");
  write_grids(out.video, prefix);
  std::cout << "wrote " << prefix << ".ommv plus per-modality grids\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& task_name) {
  TaskKind task = task_from_name(task_name);
  auto [model, meta] = load_checkpoint_checked(cfg.checkpoint, cfg.model());
  std::vector<MultiModalVideo> eval_set = read_dataset(cfg.eval_dir);
  MetricReport r = pipeline::evaluate(model, eval_set, task, cfg);
  append_metrics(cfg, "eval task=" + task_name, r);
  print_report("eval[" + task_name + "]", r);
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  std::vector<MultiModalVideo> videos = read_dataset(cfg.data_dir);
  std::vector<EncodedSample> train_set = pipeline::encode_dataset(videos, cfg.codec());
  std::vector<MultiModalVideo> eval_set = read_dataset(cfg.eval_dir);

  fs::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir + "/ablate.log", std::ios::trunc);
  auto save_variant = [&](const std::string& name, const OmniDiT<float>& m) {
    save_with_meta(m, cfg.steps, cfg.out_dir + "/ablate_" + name + ".ovdf");
  };
  auto rows = pipeline::run_ablation(cfg, train_set, eval_set, &log, save_variant);

  std::ofstream table(cfg.out_dir + "/ablation.txt", std::ios::trunc);
  for (const auto& row : rows) {
    std::ostringstream line;
    line << std::left << std::setw(24) << row.name << std::right << std::fixed
         << std::setprecision(4) << "  absrel=" << row.understanding.absrel
         << "  miou=" << row.understanding.miou << "  edge_f1=" << row.understanding.edge_f1
         << "  psnr=" << std::setprecision(2) << row.generation.psnr << std::setprecision(4)
         << "  composite=" << row.composite;
    std::cout << line.str() << "\n";
    table << line.str() << "\n";
  }
  return 0;
}

int cmd_v2v_style(const RunConfig& cfg, int64_t source_index, const std::string& source_file,
                  const std::string& caption_text) {
  if (caption_text.empty()) throw std::invalid_argument("v2v-style requires --caption");
  auto [model, meta] = load_checkpoint_checked(cfg.checkpoint, cfg.model());
  MultiModalVideo source = load_source(cfg, source_index, source_file, cfg.eval_dir);
  std::vector<int64_t> new_caption = parse_caption(caption_text);

  pipeline::V2VResult r = pipeline::v2v_style(model, source, new_caption, cfg);

  fs::create_directories(cfg.out_dir);
  write_sample(r.understanding.video, cfg.out_dir + "/v2v_intermediate.ommv");
  write_grids(r.understanding.video, cfg.out_dir + "/v2v_intermediate");
  write_sample(r.restyled.video, cfg.out_dir + "/v2v_restyled.ommv");
  write_grids(r.restyled.video, cfg.out_dir + "/v2v_restyled");
  std::cout << "wrote " << cfg.out_dir << "/v2v_intermediate.ommv and " << cfg.out_dir
            << "/v2v_restyled.ommv\n";
  return 0;
}

int cmd_adapt_sr(const RunConfig& cfg) {
  auto [base, meta] = load_checkpoint_checked(cfg.checkpoint, cfg.model());
  std::vector<MultiModalVideo> train_set = read_dataset(cfg.data_dir);
  std::vector<MultiModalVideo> eval_set = read_dataset(cfg.eval_dir);

  fs::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir + "/adapt_sr.log", std::ios::trunc);
  OmniDiT<float> adapted = pipeline::adapt_sr(base, train_set, cfg, &log);

  std::string out_path = cfg.out_dir + "/model_sr.ovdf";
  save_with_meta(adapted, cfg.sr_steps, out_path,
                 {{"adapted_slot", "edges"},
                  {"adapted_role", "lowres_rgb"},
                  {"sr_factor", std::to_string(cfg.sr_factor)}});

  pipeline::SrEval ev = pipeline::evaluate_sr(adapted, eval_set, cfg);
  std::cout << std::fixed << std::setprecision(2) << "adapted checkpoint: " << out_path
            << "\nmodel psnr: " << ev.model_psnr << " dB\nbicubic psnr: " << ev.bicubic_psnr
            << " dB\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-modal video diffusion toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key=value config file")->configurable(false);
  app.add_option("--set", overrides, "override a config key (key=value, repeatable)");

  auto* gen = app.add_subcommand("gen-data", "generate train + eval datasets");
  auto* train = app.add_subcommand("train", "run the optimization loop");

  std::string task_name = "t2v", cond_file, caption_text, out_prefix;
  int64_t cond_index = -1;
  auto* sample = app.add_subcommand("sample", "sample one video for a task");
  sample->add_option("--task", task_name, "t2v|rgb|depth|seg|edges");
  sample->add_option("--index", cond_index, "conditioning sample index in the eval split");
  sample->add_option("--input", cond_file, "conditioning sample file (.ommv)");
  sample->add_option("--caption", caption_text, "caption words");
  sample->add_option("--out", out_prefix, "output path prefix");

  std::string eval_task = "rgb";
  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on the eval split");
  evalc->add_option("--task", eval_task, "t2v|rgb|depth|seg|edges");

  auto* ablate = app.add_subcommand("ablate", "train and compare the 4 model variants");

  std::string v2v_file, v2v_caption;
  int64_t v2v_index = -1;
  auto* v2v = app.add_subcommand("v2v-style", "depth-mediated restyling of a source video");
  v2v->add_option("--index", v2v_index, "source sample index in the eval split");
  v2v->add_option("--input", v2v_file, "source sample file (.ommv)");
  v2v->add_option("--caption", v2v_caption, "caption for the restyled output");

  auto* sr = app.add_subcommand("adapt-sr", "repurpose the edges slot for super-resolution");

  // Let --config / --set appear after the subcommand name.
  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = load_config(config_path, overrides);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (sample->parsed())
      return cmd_sample(cfg, task_name, cond_index, cond_file, caption_text, out_prefix);
    if (evalc->parsed()) return cmd_eval(cfg, eval_task);
    if (ablate->parsed()) return cmd_ablate(cfg);
    if (v2v->parsed()) return cmd_v2v_style(cfg, v2v_index, v2v_file, v2v_caption);
    if (sr->parsed()) return cmd_adapt_sr(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
