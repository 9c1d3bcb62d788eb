#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omnivdiff/palette.hpp"
#include "omnivdiff/rng.hpp"

namespace ovd {

enum class ShapeKind : uint8_t { Circle = 0, Square = 1, Triangle = 2 };

struct ShapeSpec {
  ShapeKind kind;
  int color_id;       // 1..8, palette index + 1
  float depth;        // [0.1, 0.9], quantized to the u16 grid, smaller = nearer
  float cx0, cy0;     // initial center, pixels
  float vx, vy;       // pixels per frame
  float size;         // radius / half-extent, pixels
};

struct SceneConfig {
  int64_t frames = 8;
  int64_t height = 32;
  int64_t width = 32;
  // Codec factors the dims must divide by.
  int64_t ft = 2, fh = 4, fw = 4;
};

struct SceneSpec {
  uint64_t seed = 0;
  int64_t frames = 0, height = 0, width = 0;
  float bg_top = 0.0f, bg_bottom = 0.0f;  // vertical gray gradient endpoints
  std::vector<ShapeSpec> shapes;           // sorted by ascending depth; seg id = index + 1
};

// Paired modality planes; all values live on their file-format grids
// (rgb on u8/255, depth on u16/65535) so dataset roundtrips are bit-exact.
struct MultiModalVideo {
  int64_t frames = 0, height = 0, width = 0;
  std::vector<float> rgb;      // (f,h,w,3) in [0,1]
  std::vector<float> depth;    // (f,h,w) in [0,1], background 1.0
  std::vector<uint8_t> seg;    // (f,h,w) instance ids, 0 = background
  std::vector<uint8_t> edges;  // (f,h,w) binary
  std::vector<int64_t> caption;

  int64_t pixels() const { return frames * height * width; }
};

bool operator==(const MultiModalVideo& a, const MultiModalVideo& b);

// Deterministic scene draw; identical (seed, config) gives identical specs.
SceneSpec sample_scene(uint64_t seed, const SceneConfig& config);

// Shape center at frame k, clamped so the shape stays >= 1 px inside the frame.
void shape_center_at(const ShapeSpec& s, int64_t frame, int64_t height, int64_t width, float& cx,
                     float& cy);

bool shape_covers(const ShapeSpec& s, float cx, float cy, int64_t x, int64_t y);

// Painter's rasterization; all four modalities come from one coverage pass.
MultiModalVideo render(const SceneSpec& spec);

// "<color> <kind> <direction>" per shape, ascending depth order.
std::vector<int64_t> caption_tokens(const SceneSpec& spec);

std::string caption_text(const std::vector<int64_t>& tokens);

// Independent consistency re-check used by tests and `gen-data`:
// re-rasterizes coverage and re-derives edges from seg.
bool check_consistency(const SceneSpec& spec, const MultiModalVideo& v, std::string* why = nullptr);

}  // namespace ovd
