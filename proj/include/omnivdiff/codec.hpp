#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omnivdiff/palette.hpp"
#include "omnivdiff/scene.hpp"

namespace ovd {

enum class Modality : int { Rgb = 0, Depth = 1, Seg = 2, Edges = 3 };
inline constexpr int kNumModalities = 4;
inline constexpr const char* kModalityNames[kNumModalities] = {"rgb", "depth", "seg", "edges"};

struct CodecConfig {
  int64_t fh = 4, fw = 4, ft = 2;  // toy default; (8,8,4) matches the full-scale geometry

  int64_t channels() const { return 3 * fh * fw * ft; }
};

// Latent grid geometry for a video of (f,h,w).
struct LatentDims {
  int64_t F, H, W, C;
  int64_t size() const { return F * H * W * C; }
};

LatentDims latent_dims(int64_t f, int64_t h, int64_t w, const CodecConfig& cfg);

// Modality planes to (f,h,w,3) color videos in [0,1]. rgb passes through,
// depth/edges replicate to 3 channels, seg maps ids to palette colors.
std::vector<float> to_color(const MultiModalVideo& v, Modality m);

// Inverse interpretation after clamping to [0,1]: depth = channel mean,
// seg = nearest palette color (ties to the lowest id), edges = mean >= 0.5.
std::vector<float> depth_from_color(const std::vector<float>& color);
std::vector<uint8_t> seg_from_color(const std::vector<float>& color);
std::vector<uint8_t> edges_from_color(const std::vector<float>& color);

// Space-time-to-channel patchify. Pixel (t,y,x,c) lands at latent cell
// (t/ft, y/fh, x/fw), channel c*(ft*fh*fw) + (t%ft)*(fh*fw) + (y%fh)*fw + (x%fw),
// with values mapped v -> 2v-1. Latents are double so the affine map is
// exactly invertible for every f32 pixel value; decode is the exact inverse.
std::vector<double> encode(const std::vector<float>& color, int64_t f, int64_t h, int64_t w,
                           const CodecConfig& cfg);
std::vector<float> decode(const std::vector<double>& latent, int64_t f, int64_t h, int64_t w,
                          const CodecConfig& cfg, bool clamp_unit = false);

}  // namespace ovd
