#include "omnivdiff/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ovd {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int64_t to_int(const std::string& v) {
  size_t pos = 0;
  int64_t r = std::stoll(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not an integer: " + v);
  return r;
}

uint64_t to_u64(const std::string& v) {
  size_t pos = 0;
  uint64_t r = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not an unsigned integer: " + v);
  return r;
}

double to_double(const std::string& v) {
  size_t pos = 0;
  double r = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not a number: " + v);
  return r;
}

bool to_bool(const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw std::invalid_argument("not a boolean (use 0/1): " + v);
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct KeySpec {
  Setter set;
  Getter get;
};

template <typename T>
std::string fmt(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> s = [] {
    std::map<std::string, KeySpec> m;
    auto str_key = [&](const char* k, std::string RunConfig::* f) {
      m[k] = {[f](RunConfig& c, const std::string& v) { c.*f = v; },
              [f](const RunConfig& c) { return c.*f; }};
    };
    auto int_key = [&](const char* k, int64_t RunConfig::* f) {
      m[k] = {[f](RunConfig& c, const std::string& v) { c.*f = to_int(v); },
              [f](const RunConfig& c) { return fmt(c.*f); }};
    };
    auto u64_key = [&](const char* k, uint64_t RunConfig::* f) {
      m[k] = {[f](RunConfig& c, const std::string& v) { c.*f = to_u64(v); },
              [f](const RunConfig& c) { return fmt(c.*f); }};
    };
    auto dbl_key = [&](const char* k, double RunConfig::* f) {
      m[k] = {[f](RunConfig& c, const std::string& v) { c.*f = to_double(v); },
              [f](const RunConfig& c) { return fmt(c.*f); }};
    };
    auto bool_key = [&](const char* k, bool RunConfig::* f) {
      m[k] = {[f](RunConfig& c, const std::string& v) { c.*f = to_bool(v); },
              [f](const RunConfig& c) { return c.*f ? "1" : "0"; }};
    };
    str_key("data_dir", &RunConfig::data_dir);
    str_key("eval_dir", &RunConfig::eval_dir);
    str_key("out_dir", &RunConfig::out_dir);
    str_key("checkpoint", &RunConfig::checkpoint);
    int_key("n_train", &RunConfig::n_train);
    int_key("n_eval", &RunConfig::n_eval);
    int_key("frames", &RunConfig::frames);
    int_key("height", &RunConfig::height);
    int_key("width", &RunConfig::width);
    u64_key("data_seed", &RunConfig::data_seed);
    int_key("codec_ft", &RunConfig::codec_ft);
    int_key("codec_fh", &RunConfig::codec_fh);
    int_key("codec_fw", &RunConfig::codec_fw);
    int_key("model_dim", &RunConfig::model_dim);
    int_key("depth", &RunConfig::depth);
    int_key("heads", &RunConfig::heads);
    int_key("caption_len", &RunConfig::caption_len);
    bool_key("use_modality_embedding", &RunConfig::use_modality_embedding);
    bool_key("use_msph", &RunConfig::use_msph);
    bool_key("use_amcs", &RunConfig::use_amcs);
    dbl_key("lr", &RunConfig::lr);
    int_key("steps", &RunConfig::steps);
    int_key("batch_size", &RunConfig::batch_size);
    u64_key("seed", &RunConfig::seed);
    dbl_key("t_floor", &RunConfig::t_floor);
    dbl_key("grad_clip", &RunConfig::grad_clip);
    dbl_key("beta1", &RunConfig::beta1);
    dbl_key("beta2", &RunConfig::beta2);
    dbl_key("weight_decay", &RunConfig::weight_decay);
    int_key("stage", &RunConfig::stage);
    int_key("checkpoint_every", &RunConfig::checkpoint_every);
    bool_key("resume", &RunConfig::resume);
    int_key("sampler_steps", &RunConfig::sampler_steps);
    u64_key("sample_seed", &RunConfig::sample_seed);
    int_key("sr_steps", &RunConfig::sr_steps);
    int_key("sr_factor", &RunConfig::sr_factor);
    m["task_mixture"] = {
        [](RunConfig& c, const std::string& v) {
          std::istringstream is(v);
          std::string part;
          std::array<double, kNumTasks> mix{};
          int i = 0;
          while (std::getline(is, part, ',')) {
            if (i >= kNumTasks) throw std::invalid_argument("task_mixture needs 5 entries");
            mix[i++] = to_double(trim(part));
          }
          if (i != kNumTasks) throw std::invalid_argument("task_mixture needs 5 entries");
          c.task_mixture = mix;
        },
        [](const RunConfig& c) {
          std::ostringstream os;
          for (int i = 0; i < kNumTasks; ++i) os << (i ? "," : "") << c.task_mixture[i];
          return os.str();
        }};
    return m;
  }();
  return s;
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, _] : schema()) k.push_back(key);
    return k;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = schema().find(key);
  if (it == schema().end()) throw std::invalid_argument("unknown config key: " + key);
  it->second.set(*this, value);
}

std::string RunConfig::get(const std::string& key) const {
  auto it = schema().find(key);
  if (it == schema().end()) throw std::invalid_argument("unknown config key: " + key);
  return it->second.get(*this);
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=value");
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::validate() const {
  scene();          // divisibility checks
  model().validate();
  train().validate();
  sampler().validate();
  if (n_train < 1 || n_eval < 0) throw std::invalid_argument("dataset sizes invalid");
  if (stage < 0 || stage > 2) throw std::invalid_argument("stage must be 0, 1 or 2");
  if (sr_factor < 2) throw std::invalid_argument("sr_factor must be >= 2");
  if (height % sr_factor || width % sr_factor)
    throw std::invalid_argument("frame dims must divide sr_factor");
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.model_dim = model_dim;
  m.depth = depth;
  m.heads = heads;
  m.latent_channels = codec().channels();
  LatentDims d = latent_dims(frames, height, width, codec());
  m.tokens_f = d.F;
  m.tokens_h = d.H;
  m.tokens_w = d.W;
  m.caption_len = caption_len;
  m.vocab_size = kVocabSize;
  m.use_modality_embedding = use_modality_embedding;
  m.use_msph = use_msph;
  m.use_amcs = use_amcs;
  return m;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.lr = lr;
  t.steps = steps;
  t.batch_size = batch_size;
  t.seed = seed;
  t.task_mixture = effective_mixture();
  t.t_floor = t_floor;
  t.grad_clip = grad_clip;
  t.beta1 = beta1;
  t.beta2 = beta2;
  t.weight_decay = weight_decay;
  return t;
}

std::array<double, kNumTasks> RunConfig::effective_mixture() const {
  if (stage == 1) return {1.0, 0.0, 0.0, 0.0, 0.0};
  if (stage == 2) return {0.2, 0.2, 0.2, 0.2, 0.2};
  return task_mixture;
}

}  // namespace ovd
