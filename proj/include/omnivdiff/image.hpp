#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ovd {

// 8-bit RGB PNG writer (zlib-deflated, single IDAT).
void write_png_rgb8(const std::string& path, int64_t width, int64_t height,
                    const std::vector<uint8_t>& rgb);

// Frames of a (f,h,w,3) float video laid out left-to-right in one PNG.
void write_video_grid_png(const std::string& path, const std::vector<float>& video, int64_t frames,
                          int64_t height, int64_t width);

// Per-frame resampling of (f,h,w,3) videos, values clamped to [0,1].
std::vector<float> box_downsample(const std::vector<float>& video, int64_t frames, int64_t height,
                                  int64_t width, int64_t factor);
std::vector<float> bilinear_upsample(const std::vector<float>& video, int64_t frames,
                                     int64_t height, int64_t width, int64_t factor);
std::vector<float> bicubic_upsample(const std::vector<float>& video, int64_t frames, int64_t height,
                                    int64_t width, int64_t factor);

}  // namespace ovd
