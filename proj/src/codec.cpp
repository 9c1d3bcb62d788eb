#include "omnivdiff/codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ovd {

LatentDims latent_dims(int64_t f, int64_t h, int64_t w, const CodecConfig& cfg) {
  if (cfg.ft < 1 || cfg.fh < 1 || cfg.fw < 1) throw std::invalid_argument("codec factors must be >= 1");
  if (f % cfg.ft) throw std::invalid_argument("frame count " + std::to_string(f) + " not divisible by ft=" + std::to_string(cfg.ft));
  if (h % cfg.fh) throw std::invalid_argument("height " + std::to_string(h) + " not divisible by fh=" + std::to_string(cfg.fh));
  if (w % cfg.fw) throw std::invalid_argument("width " + std::to_string(w) + " not divisible by fw=" + std::to_string(cfg.fw));
  return {f / cfg.ft, h / cfg.fh, w / cfg.fw, cfg.channels()};
}

std::vector<float> to_color(const MultiModalVideo& v, Modality m) {
  int64_t px = v.pixels();
  std::vector<float> out(px * 3);
  switch (m) {
    case Modality::Rgb:
      out = v.rgb;
      break;
    case Modality::Depth:
      for (int64_t p = 0; p < px; ++p)
        out[p * 3] = out[p * 3 + 1] = out[p * 3 + 2] = v.depth[p];
      break;
    case Modality::Seg:
      for (int64_t p = 0; p < px; ++p) {
        uint8_t id = v.seg[p];
        if (id > kPalette.size())
          throw std::invalid_argument("seg id " + std::to_string(id) + " outside palette");
        Color c = id == 0 ? Color{0, 0, 0} : kPalette[id - 1];
        out[p * 3] = c.r;
        out[p * 3 + 1] = c.g;
        out[p * 3 + 2] = c.b;
      }
      break;
    case Modality::Edges:
      for (int64_t p = 0; p < px; ++p)
        out[p * 3] = out[p * 3 + 1] = out[p * 3 + 2] = v.edges[p] ? 1.0f : 0.0f;
      break;
  }
  return out;
}

namespace {
float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

// Double accumulation keeps the mean of three equal floats bit-exact.
float channel_mean(const std::vector<float>& color, int64_t p) {
  double sum = static_cast<double>(clamp01(color[p * 3])) + clamp01(color[p * 3 + 1]) +
               clamp01(color[p * 3 + 2]);
  return static_cast<float>(sum / 3.0);
}
}  // namespace

std::vector<float> depth_from_color(const std::vector<float>& color) {
  int64_t px = static_cast<int64_t>(color.size()) / 3;
  std::vector<float> out(px);
  for (int64_t p = 0; p < px; ++p) out[p] = channel_mean(color, p);
  return out;
}

std::vector<uint8_t> seg_from_color(const std::vector<float>& color) {
  int64_t px = static_cast<int64_t>(color.size()) / 3;
  std::vector<uint8_t> out(px);
  for (int64_t p = 0; p < px; ++p) {
    float r = clamp01(color[p * 3]), g = clamp01(color[p * 3 + 1]), b = clamp01(color[p * 3 + 2]);
    // Candidate 0 is black background; ties resolve to the lowest id.
    float best = r * r + g * g + b * b;
    uint8_t best_id = 0;
    for (size_t i = 0; i < kPalette.size(); ++i) {
      float dr = r - kPalette[i].r, dg = g - kPalette[i].g, db = b - kPalette[i].b;
      float d = dr * dr + dg * dg + db * db;
      if (d < best) {
        best = d;
        best_id = static_cast<uint8_t>(i + 1);
      }
    }
    out[p] = best_id;
  }
  return out;
}

std::vector<uint8_t> edges_from_color(const std::vector<float>& color) {
  int64_t px = static_cast<int64_t>(color.size()) / 3;
  std::vector<uint8_t> out(px);
  for (int64_t p = 0; p < px; ++p) out[p] = channel_mean(color, p) >= 0.5f ? 1 : 0;
  return out;
}

std::vector<double> encode(const std::vector<float>& color, int64_t f, int64_t h, int64_t w,
                           const CodecConfig& cfg) {
  LatentDims d = latent_dims(f, h, w, cfg);
  if (static_cast<int64_t>(color.size()) != f * h * w * 3)
    throw std::invalid_argument("encode: color buffer size mismatch");
  std::vector<double> latent(d.size());
  int64_t patch = cfg.ft * cfg.fh * cfg.fw;
  for (int64_t t = 0; t < f; ++t)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t c = 0; c < 3; ++c) {
          int64_t ch = c * patch + (t % cfg.ft) * (cfg.fh * cfg.fw) + (y % cfg.fh) * cfg.fw +
                       (x % cfg.fw);
          int64_t cell = ((t / cfg.ft) * d.H + y / cfg.fh) * d.W + x / cfg.fw;
          latent[cell * d.C + ch] =
              2.0 * static_cast<double>(color[((t * h + y) * w + x) * 3 + c]) - 1.0;
        }
  return latent;
}

std::vector<float> decode(const std::vector<double>& latent, int64_t f, int64_t h, int64_t w,
                          const CodecConfig& cfg, bool clamp_unit) {
  LatentDims d = latent_dims(f, h, w, cfg);
  if (static_cast<int64_t>(latent.size()) != d.size())
    throw std::invalid_argument("decode: latent buffer size mismatch");
  std::vector<float> color(f * h * w * 3);
  int64_t patch = cfg.ft * cfg.fh * cfg.fw;
  for (int64_t t = 0; t < f; ++t)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t c = 0; c < 3; ++c) {
          int64_t ch = c * patch + (t % cfg.ft) * (cfg.fh * cfg.fw) + (y % cfg.fh) * cfg.fw +
                       (x % cfg.fw);
          int64_t cell = ((t / cfg.ft) * d.H + y / cfg.fh) * d.W + x / cfg.fw;
          double v = (latent[cell * d.C + ch] + 1.0) * 0.5;
          if (clamp_unit) v = std::clamp(v, 0.0, 1.0);
          color[((t * h + y) * w + x) * 3 + c] = static_cast<float>(v);
        }
  return color;
}

}  // namespace ovd
