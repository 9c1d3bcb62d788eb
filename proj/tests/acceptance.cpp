// Acceptance gates. Prints one PASS/FAIL line per criterion and exits
// non-zero if any gate fails. argv[1] must point at the CLI binary so the
// determinism criterion can exercise the real command surface.

#include <array>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <vector>

#include "omnivdiff/image.hpp"
#include "omnivdiff/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ovd;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_cli;
fs::path g_work;
int g_failures = 0;

void criterion(int number, const std::string& name, const std::function<void()>& body) {
  auto start = Clock::now();
  std::string failure;
  try {
    body();
  } catch (const std::exception& e) {
    failure = e.what();
  }
  double secs = std::chrono::duration<double>(Clock::now() - start).count();
  std::ostringstream line;
  line << (failure.empty() ? "PASS" : "FAIL") << " " << number << ". " << name << " ("
       << std::fixed << std::setprecision(1) << secs << "s)";
  if (!failure.empty()) {
    line << ": " << failure;
    ++g_failures;
  }
  std::cout << line.str() << std::endl;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

int run_cli(const std::string& args) {
  std::string cmd = "\"" + g_cli + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::vector<uint8_t> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  require(bool(f), "cannot open " + p.string());
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                              std::istreambuf_iterator<char>());
}

bool identical_dirs(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
  for (auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) return false;
  for (const auto& rel : fa)
    if (read_bytes(a / rel) != read_bytes(b / rel)) return false;
  return true;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.model_dim = 8;
  c.depth = 1;
  c.heads = 2;
  c.latent_channels = 4;
  c.tokens_f = 1;
  c.tokens_h = 2;
  c.tokens_w = 2;
  c.caption_len = 2;
  return c;
}

template <typename T>
OmniDiT<T> perturbed_model(const ModelConfig& c, uint64_t seed) {
  OmniDiT<T> m = OmniDiT<T>::init(c, seed);
  Rng rng(seed + 1000);
  for (auto& pr : m.params())
    for (auto& v : pr.value.data()) v += static_cast<T>(0.05 * rng.normal());
  return m;
}

EncodedSample random_encoded(const ModelConfig& c, Rng& rng) {
  EncodedSample s;
  int64_t n = c.tokens_f * c.tokens_h * c.tokens_w * c.latent_channels;
  for (auto& l : s.latents) {
    l.resize(n);
    for (auto& x : l) x = rng.uniform(-1.0, 1.0);
  }
  s.caption = {0, 9};
  return s;
}

// Shared artifacts across the training-dependent criteria.
struct TrainedState {
  RunConfig cfg;
  std::vector<MultiModalVideo> videos;
  std::vector<EncodedSample> train_set;
  OmniDiT<float> model = OmniDiT<float>::init(ModelConfig{}, 0);
  bool ready = false;
} g_trained;

// ---- criteria ----

void mechanism_identities() {
  Rng rng(1);

  // Blend endpoints and conditioning passthrough.
  std::vector<double> x(32), eps(32);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  for (auto& v : eps) v = rng.normal();
  require(blend(x, eps, 1.0, Role::Generation) == x, "blend(t=1) must return the clean latent");
  require(blend(x, eps, 0.0, Role::Generation) == eps, "blend(t=0) must return the noise");
  require(blend(x, eps, 0.63, Role::Conditioning) == x,
          "conditioning blend must pass through bit-exactly");

  // Loss mask mirrors the role table for all five tasks.
  for (int task = 0; task < kNumTasks; ++task) {
    RoleAssignment roles = assign_roles(static_cast<TaskKind>(task));
    auto mask = loss_mask(roles);
    for (int m = 0; m < kNumModalities; ++m)
      require(mask[m] == (roles.roles[m] == Role::Generation ? 1.0f : 0.0f),
              "loss mask disagrees with role table");
  }

  // Codec roundtrip, 100 random videos across both factor sets.
  for (auto cfg : {CodecConfig{4, 4, 2}, CodecConfig{8, 8, 4}}) {
    int64_t f = cfg.ft * 2, h = cfg.fh * 2, w = cfg.fw * 2;
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<float> color(f * h * w * 3);
      for (auto& v : color) v = static_cast<float>(rng.uniform_index(256)) / 255.0f;
      require(decode(encode(color, f, h, w, cfg), f, h, w, cfg) == color,
              "codec roundtrip not bit-exact");
    }
  }
  require(CodecConfig{8, 8, 4}.channels() == 768, "full-scale codec must give 768 channels");

  // Sampler conditioning reset for several step counts.
  ModelConfig mc = tiny_config();
  OmniDiT<float> m = perturbed_model<float>(mc, 7);
  EncodedSample s = random_encoded(mc, rng);
  for (int64_t n : {1, 10, 50}) {
    SamplerConfig sc;
    sc.steps = n;
    std::array<std::optional<std::vector<double>>, kNumModalities> cond;
    cond[2] = s.latents[2];
    Rng srng(n);
    auto out = sample_video(m, TaskKind::CondSeg, cond, s.caption, sc, srng);
    require(out[2] == s.latents[2], "conditioned modality must equal its input exactly");
  }
}

void gradient_correctness() {
  ModelConfig c = tiny_config();
  for (uint64_t seed : {11u, 22u, 33u}) {
    OmniDiT<double> m = perturbed_model<double>(c, seed);
    Rng rng(seed);
    Shape s = {c.tokens_f, c.tokens_h, c.tokens_w, c.latent_channels};
    std::array<Tensor<double>, kNumModalities> lat;
    for (auto& t : lat) {
      std::vector<double> v(numel(s));
      for (auto& x : v) x = rng.normal();
      t = Tensor<double>(s, std::move(v));
    }
    std::array<std::vector<double>, kNumModalities> targets;
    for (auto& t : targets) {
      t.resize(numel(s));
      for (auto& x : t) x = rng.normal();
    }
    std::vector<Tensor<double>> point;
    for (auto& pr : m.params()) point.push_back(pr.value);
    auto f = [&](const std::vector<Tensor<double>>&) {
      auto preds = m.forward(m.build_input(lat), 0.4, {2, 10});
      Tensor<double> loss = Tensor<double>::scalar(0.0);
      for (int mi = 0; mi < kNumModalities; ++mi) {
        Tensor<double> diff = sub(preds[mi], Tensor<double>(s, std::vector<double>(targets[mi])));
        loss = add(loss, mean_all(mul(diff, diff)));
      }
      return loss;
    };
    double err = grad_check<double>(f, point, 1e-3);
    require(err < 1e-4, "seed " + std::to_string(seed) + ": max relative error " + fmt(err));
  }
}

void masked_gradients() {
  ModelConfig mc = tiny_config();
  TrainConfig tc;
  Rng rng(5);
  for (int task = 1; task < kNumTasks; ++task) {
    OmniDiT<float> model = perturbed_model<float>(mc, 40 + task);
    AdamOptimizer<float> opt(model);
    EncodedSample s = random_encoded(mc, rng);
    std::vector<const EncodedSample*> batch = {&s, &s};
    training_step(model, batch, tc, opt, rng, nullptr, assign_roles(static_cast<TaskKind>(task)));

    const char* cond = kModalityNames[task - 1];
    for (const char* suffix : {".w", ".b"})
      for (float g : model.p(std::string("head.") + cond + suffix).grad())
        require(g == 0.0f, std::string("head for conditioning modality ") + cond +
                               " received non-zero gradient");
    bool learning = false;
    for (int m = 0; m < kNumModalities; ++m) {
      if (m == task - 1) continue;
      for (float g : model.p(std::string("head.") + kModalityNames[m] + ".w").grad())
        if (g != 0.0f) learning = true;
    }
    require(learning, "generation heads received no gradient at all");
  }
}

void oracle_recovery() {
  Rng rng(9);
  for (double t : {0.02, 0.1, 0.33, 0.5, 0.75, 0.99, 1.0}) {
    for (int64_t n : {4, 64, 1024}) {
      std::vector<double> x(n), eps(n);
      for (auto& v : x) v = rng.uniform(-1.0, 1.0);
      for (auto& v : eps) v = rng.normal();
      std::vector<double> xt = blend(x, eps, t, Role::Generation);
      std::vector<double> rec = recover_x0(xt, eps, t, 0.02);
      for (int64_t i = 0; i < n; ++i)
        require(std::abs(rec[i] - x[i]) < 1e-5,
                "x0 recovery error " + fmt(std::abs(rec[i] - x[i])) + " at t=" + fmt(t));
    }
  }
}

RunConfig overfit_config() {
  RunConfig cfg;
  cfg.n_train = 8;
  cfg.n_eval = 0;
  cfg.data_dir = (g_work / "overfit").string();
  cfg.out_dir = (g_work / "out").string();
  cfg.checkpoint = (g_work / "out/model.ovdf").string();
  return cfg;
}

void overfit_gates() {
  RunConfig cfg = overfit_config();
  pipeline::generate_dataset(cfg, cfg.data_dir, cfg.n_train, cfg.data_seed);
  g_trained.cfg = cfg;
  g_trained.videos = read_dataset(cfg.data_dir);
  g_trained.train_set = pipeline::encode_dataset(g_trained.videos, cfg.codec());
  g_trained.model = pipeline::train_model(cfg, g_trained.train_set);
  g_trained.ready = true;

  MetricReport und =
      pipeline::evaluate(g_trained.model, g_trained.videos, TaskKind::CondRgb, cfg);
  require(und.absrel < 0.10, "understanding absrel " + fmt(und.absrel) + " >= 0.10");
  require(und.delta1 > 0.90, "understanding delta1 " + fmt(und.delta1) + " <= 0.90");
  require(und.miou > 0.80, "understanding miou " + fmt(und.miou) + " <= 0.80");
  require(und.edge_f1 > 0.80, "understanding edge f1 " + fmt(und.edge_f1) + " <= 0.80");

  MetricReport gen =
      pipeline::evaluate(g_trained.model, g_trained.videos, TaskKind::CondDepth, cfg);
  require(gen.psnr > 20.0, "generation rgb psnr " + fmt(gen.psnr) + " <= 20 dB");
  require(gen.miou > 0.70, "generation miou " + fmt(gen.miou) + " <= 0.70");

  // Text-to-video cross-modality agreement: foreground according to the
  // generated depth vs foreground according to the generated seg map.
  double agree_sum = 0.0;
  int64_t checked = 0;
  for (size_t i = 0; i < 4; ++i) {
    pipeline::SampleOutput out =
        pipeline::run_sampling(g_trained.model, TaskKind::T2V, std::nullopt,
                               g_trained.videos[i].caption, cfg, cfg.sample_seed + i);
    int64_t agree = 0, total = out.video.pixels();
    for (int64_t p = 0; p < total; ++p) {
      bool fg_depth = out.video.depth[p] < 0.95f;
      bool fg_seg = out.video.seg[p] > 0;
      if (fg_depth == fg_seg) ++agree;
    }
    agree_sum += static_cast<double>(agree) / static_cast<double>(total);
    ++checked;
  }
  double agreement = agree_sum / checked;
  require(agreement > 0.70, "t2v depth/seg agreement " + fmt(agreement) + " <= 0.70");
}

void ablation_direction() {
  require(g_trained.ready, "depends on the overfit run");
  RunConfig cfg = g_trained.cfg;
  cfg.steps = 300;  // shared reduced budget, shared seed
  auto rows = pipeline::run_ablation(cfg, g_trained.train_set, g_trained.videos);
  require(rows.size() == 4, "expected 4 variants");
  require(rows[0].name == "full", "first row must be the full model");
  for (size_t i = 1; i < rows.size(); ++i)
    require(rows[0].composite >= rows[i].composite,
            rows[i].name + " composite " + fmt(rows[i].composite) + " beats full " +
                fmt(rows[0].composite));
}

void applications() {
  require(g_trained.ready, "depends on the overfit run");
  const RunConfig& cfg = g_trained.cfg;

  // Depth-mediated restyling: silhouettes survive, rgb changes.
  const MultiModalVideo& source = g_trained.videos[0];
  std::vector<int64_t> new_caption = source.caption;
  new_caption[0] = (new_caption[0] + 1) % 8;  // different color word
  pipeline::V2VResult v2v = pipeline::v2v_style(g_trained.model, source, new_caption, cfg);
  double iou = seg_miou(v2v.restyled.video.seg, source.seg);
  require(iou > 0.6, "restyled silhouette iou " + fmt(iou) + " <= 0.6");
  require(v2v.restyled.video.rgb != source.rgb, "restyled rgb must differ from the source");

  // Slot repurposing: low-res rgb in the edges slot beats bicubic.
  RunConfig sr_cfg = cfg;
  sr_cfg.sr_steps = 500;
  OmniDiT<float> adapted = pipeline::adapt_sr(g_trained.model, g_trained.videos, sr_cfg);
  pipeline::SrEval ev = pipeline::evaluate_sr(adapted, g_trained.videos, sr_cfg);
  require(ev.model_psnr > ev.bicubic_psnr, "sr psnr " + fmt(ev.model_psnr) +
                                               " dB does not beat bicubic " +
                                               fmt(ev.bicubic_psnr) + " dB");
}

void determinism() {
  fs::path d = g_work / "det";
  fs::create_directories(d);
  std::string base = " --set n_train=4 --set n_eval=2 --set steps=20 --set sampler_steps=10";

  for (const char* run : {"a", "b"}) {
    fs::path r = d / run;
    fs::create_directories(r);
    std::string paths = " --set data_dir=" + (r / "train").string() + " --set eval_dir=" +
                        (r / "eval").string() + " --set out_dir=" + (r / "out").string() +
                        " --set checkpoint=" + (r / "out/model.ovdf").string();
    require(run_cli("gen-data" + base + paths) == 0, "gen-data failed");
    require(run_cli("train" + base + paths) == 0, "train failed");
    require(run_cli("sample --task depth --index 0" + base + paths) == 0, "sample failed");
    require(run_cli("sample --task t2v --caption \"red circle left\" --out " +
                    (r / "out/t2v").string() + base + paths) == 0,
            "t2v sample failed");
  }
  require(identical_dirs(d / "a" / "train", d / "b" / "train"), "datasets differ between runs");
  require(identical_dirs(d / "a" / "eval", d / "b" / "eval"), "eval datasets differ");
  require(read_bytes(d / "a/out/model.ovdf") == read_bytes(d / "b/out/model.ovdf"),
          "checkpoints differ between runs");
  for (const char* f : {"out/sample_depth.ommv", "out/t2v.ommv"})
    require(read_bytes(d / "a" / f) == read_bytes(d / "b" / f),
            std::string(f) + " differs between runs");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-cli-binary>" << std::endl;
    return 2;
  }
  g_cli = argv[1];
  g_work = fs::temp_directory_path() / "omnivdiff_acceptance";
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  criterion(1, "mechanism identities", mechanism_identities);
  criterion(2, "full-model gradient vs finite differences", gradient_correctness);
  criterion(3, "conditioning heads get exactly zero gradient", masked_gradients);
  criterion(4, "oracle noise recovers x0", oracle_recovery);
  criterion(5, "overfit gates on the 8-sample set", overfit_gates);
  criterion(6, "full model beats every ablation", ablation_direction);
  criterion(7, "restyling and super-resolution workflows", applications);
  criterion(8, "byte-identical reruns per command", determinism);

  if (g_failures) {
    std::cout << g_failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all criteria passed" << std::endl;
  return 0;
}
