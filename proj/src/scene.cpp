#include "omnivdiff/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ovd {

namespace {

float quantize_u8(float v) { return std::round(v * 255.0f) / 255.0f; }
float quantize_u16(float v) { return std::round(v * 65535.0f) / 65535.0f; }

constexpr float kStillThreshold = 0.25f;

}  // namespace

bool operator==(const MultiModalVideo& a, const MultiModalVideo& b) {
  return a.frames == b.frames && a.height == b.height && a.width == b.width && a.rgb == b.rgb &&
         a.depth == b.depth && a.seg == b.seg && a.edges == b.edges && a.caption == b.caption;
}

SceneSpec sample_scene(uint64_t seed, const SceneConfig& config) {
  if (config.frames < 1 || config.height < 8 || config.width < 8)
    throw std::invalid_argument("scene dims too small: f=" + std::to_string(config.frames) +
                                " h=" + std::to_string(config.height) +
                                " w=" + std::to_string(config.width));
  if (config.frames % config.ft || config.height % config.fh || config.width % config.fw)
    throw std::invalid_argument("scene dims must divide codec factors (ft,fh,fw)");

  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  SceneSpec spec;
  spec.seed = seed;
  spec.frames = config.frames;
  spec.height = config.height;
  spec.width = config.width;
  spec.bg_top = quantize_u8(static_cast<float>(rng.uniform(0.1, 0.45)));
  spec.bg_bottom = quantize_u8(static_cast<float>(rng.uniform(0.55, 0.9)));

  int n_shapes = 1 + static_cast<int>(rng.uniform_index(3));

  // Distinct depths with a 0.05 minimum gap, on the u16 grid.
  std::vector<float> depths;
  while (static_cast<int>(depths.size()) < n_shapes) {
    float d = quantize_u16(static_cast<float>(rng.uniform(0.1, 0.9)));
    bool ok = true;
    for (float e : depths)
      if (std::abs(e - d) < 0.05f) ok = false;
    if (ok) depths.push_back(d);
  }
  std::sort(depths.begin(), depths.end());

  // Colors without replacement so captions are unambiguous.
  std::vector<int> color_ids;
  while (static_cast<int>(color_ids.size()) < n_shapes) {
    int c = 1 + static_cast<int>(rng.uniform_index(8));
    if (std::find(color_ids.begin(), color_ids.end(), c) == color_ids.end()) color_ids.push_back(c);
  }

  float min_dim = static_cast<float>(std::min(config.height, config.width));
  for (int i = 0; i < n_shapes; ++i) {
    ShapeSpec s;
    s.kind = static_cast<ShapeKind>(rng.uniform_index(3));
    s.color_id = color_ids[i];
    s.depth = depths[i];
    s.size = static_cast<float>(rng.uniform(3.0, min_dim / 4.0));
    float margin = s.size + 1.0f;
    s.cx0 = static_cast<float>(rng.uniform(margin, config.width - 1 - margin));
    s.cy0 = static_cast<float>(rng.uniform(margin, config.height - 1 - margin));
    s.vx = static_cast<float>(rng.uniform(-2.0, 2.0));
    s.vy = static_cast<float>(rng.uniform(-2.0, 2.0));
    // Half the scenes get an axis-dominant motion so captions stay legible.
    if (rng.uniform() < 0.5) {
      if (std::abs(s.vx) >= std::abs(s.vy))
        s.vy = 0.0f;
      else
        s.vx = 0.0f;
    }
    spec.shapes.push_back(s);
  }
  return spec;
}

void shape_center_at(const ShapeSpec& s, int64_t frame, int64_t height, int64_t width, float& cx,
                     float& cy) {
  float margin = s.size + 1.0f;
  cx = std::clamp(s.cx0 + s.vx * static_cast<float>(frame), margin,
                  static_cast<float>(width - 1) - margin);
  cy = std::clamp(s.cy0 + s.vy * static_cast<float>(frame), margin,
                  static_cast<float>(height - 1) - margin);
}

bool shape_covers(const ShapeSpec& s, float cx, float cy, int64_t x, int64_t y) {
  float dx = static_cast<float>(x) - cx;
  float dy = static_cast<float>(y) - cy;
  switch (s.kind) {
    case ShapeKind::Circle:
      return dx * dx + dy * dy <= s.size * s.size;
    case ShapeKind::Square:
      return std::abs(dx) <= s.size && std::abs(dy) <= s.size;
    case ShapeKind::Triangle:
      // Upward triangle: apex at (cx, cy - s), base at cy + s.
      return dy >= -s.size && dy <= s.size && std::abs(dx) <= (dy + s.size) * 0.5f;
  }
  return false;
}

MultiModalVideo render(const SceneSpec& spec) {
  MultiModalVideo v;
  v.frames = spec.frames;
  v.height = spec.height;
  v.width = spec.width;
  int64_t px = v.pixels();
  v.rgb.assign(px * 3, 0.0f);
  v.depth.assign(px, 1.0f);
  v.seg.assign(px, 0);
  v.edges.assign(px, 0);
  v.caption = caption_tokens(spec);

  for (int64_t f = 0; f < spec.frames; ++f) {
    std::vector<float> cxs(spec.shapes.size()), cys(spec.shapes.size());
    for (size_t i = 0; i < spec.shapes.size(); ++i)
      shape_center_at(spec.shapes[i], f, spec.height, spec.width, cxs[i], cys[i]);
    for (int64_t y = 0; y < spec.height; ++y) {
      float g = spec.height > 1 ? spec.bg_top + (spec.bg_bottom - spec.bg_top) *
                                                    static_cast<float>(y) /
                                                    static_cast<float>(spec.height - 1)
                                : spec.bg_top;
      g = quantize_u8(g);
      for (int64_t x = 0; x < spec.width; ++x) {
        int64_t p = (f * spec.height + y) * spec.width + x;
        // Shapes are sorted by ascending depth, so the first cover is nearest.
        bool hit = false;
        for (size_t i = 0; i < spec.shapes.size() && !hit; ++i) {
          if (shape_covers(spec.shapes[i], cxs[i], cys[i], x, y)) {
            const Color& c = kPalette[spec.shapes[i].color_id - 1];
            v.rgb[p * 3 + 0] = quantize_u8(c.r);
            v.rgb[p * 3 + 1] = quantize_u8(c.g);
            v.rgb[p * 3 + 2] = quantize_u8(c.b);
            v.depth[p] = spec.shapes[i].depth;
            v.seg[p] = static_cast<uint8_t>(i + 1);
            hit = true;
          }
        }
        if (!hit) {
          v.rgb[p * 3 + 0] = g;
          v.rgb[p * 3 + 1] = g;
          v.rgb[p * 3 + 2] = g;
        }
      }
    }
  }

  // Edge = any 4-neighbor with a different seg id (frame borders excluded).
  for (int64_t f = 0; f < spec.frames; ++f)
    for (int64_t y = 0; y < spec.height; ++y)
      for (int64_t x = 0; x < spec.width; ++x) {
        int64_t p = (f * spec.height + y) * spec.width + x;
        uint8_t id = v.seg[p];
        bool e = false;
        if (x > 0 && v.seg[p - 1] != id) e = true;
        if (x + 1 < spec.width && v.seg[p + 1] != id) e = true;
        if (y > 0 && v.seg[p - spec.width] != id) e = true;
        if (y + 1 < spec.height && v.seg[p + spec.width] != id) e = true;
        v.edges[p] = e ? 1 : 0;
      }
  return v;
}

std::vector<int64_t> caption_tokens(const SceneSpec& spec) {
  std::vector<int64_t> tokens;
  for (const ShapeSpec& s : spec.shapes) {
    tokens.push_back(s.color_id - 1);  // color ids 0..7 in the vocabulary
    tokens.push_back(8 + static_cast<int64_t>(s.kind));
    const char* dir;
    if (std::max(std::abs(s.vx), std::abs(s.vy)) < kStillThreshold)
      dir = "still";
    else if (std::abs(s.vx) >= std::abs(s.vy))
      dir = s.vx > 0 ? "right" : "left";
    else
      dir = s.vy > 0 ? "down" : "up";
    tokens.push_back(vocab_id(dir));
  }
  return tokens;
}

std::string caption_text(const std::vector<int64_t>& tokens) {
  std::string out;
  for (int64_t t : tokens) {
    if (t < 0 || t >= kVocabSize) throw std::invalid_argument("caption token out of vocabulary");
    if (!out.empty()) out += ' ';
    out += kVocabulary[t];
  }
  return out;
}

bool check_consistency(const SceneSpec& spec, const MultiModalVideo& v, std::string* why) {
  MultiModalVideo ref = render(spec);
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (!(ref == v)) {
    // Pin down which modality disagrees for the error message.
    if (ref.rgb != v.rgb) return fail("rgb mismatch vs re-rasterization");
    if (ref.depth != v.depth) return fail("depth mismatch vs re-rasterization");
    if (ref.seg != v.seg) return fail("seg mismatch vs re-rasterization");
    if (ref.edges != v.edges) return fail("edge mismatch vs re-rasterization");
    return fail("caption/dims mismatch vs re-rasterization");
  }
  // Edge rule re-derived directly from the stored seg map.
  for (int64_t f = 0; f < v.frames; ++f)
    for (int64_t y = 0; y < v.height; ++y)
      for (int64_t x = 0; x < v.width; ++x) {
        int64_t p = (f * v.height + y) * v.width + x;
        uint8_t id = v.seg[p];
        bool e = false;
        if (x > 0 && v.seg[p - 1] != id) e = true;
        if (x + 1 < v.width && v.seg[p + 1] != id) e = true;
        if (y > 0 && v.seg[p - v.width] != id) e = true;
        if (y + 1 < v.height && v.seg[p + v.width] != id) e = true;
        if (v.edges[p] != (e ? 1 : 0)) return fail("edge map violates 4-neighbor rule");
      }
  return true;
}

}  // namespace ovd
