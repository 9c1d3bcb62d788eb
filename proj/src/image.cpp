#include "omnivdiff/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ovd {

namespace {

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(v >> 24);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back(v & 0xff);
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
  put_u32_be(out, static_cast<uint32_t>(data.size()));
  size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uint32_t crc = crc32(0, out.data() + crc_start, out.size() - crc_start);
  put_u32_be(out, crc);
}

float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

}  // namespace

void write_png_rgb8(const std::string& path, int64_t width, int64_t height,
                    const std::vector<uint8_t>& rgb) {
  if (static_cast<int64_t>(rgb.size()) != width * height * 3)
    throw std::invalid_argument("png: pixel buffer size mismatch");
  // Raw scanlines with filter byte 0.
  std::vector<uint8_t> raw;
  raw.reserve(height * (1 + width * 3));
  for (int64_t y = 0; y < height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), rgb.begin() + y * width * 3, rgb.begin() + (y + 1) * width * 3);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw std::runtime_error("png: deflate failed");
  comp.resize(comp_len);

  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<uint32_t>(width));
  put_u32_be(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", comp);
  put_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), out.size());
  if (!f) throw std::runtime_error("write failed: " + path);
}

void write_video_grid_png(const std::string& path, const std::vector<float>& video, int64_t frames,
                          int64_t height, int64_t width) {
  if (static_cast<int64_t>(video.size()) != frames * height * width * 3)
    throw std::invalid_argument("grid: video buffer size mismatch");
  const int64_t sep = 2;  // white separator between frames
  int64_t gw = frames * width + (frames - 1) * sep;
  std::vector<uint8_t> pixels(gw * height * 3, 255);
  for (int64_t f = 0; f < frames; ++f)
    for (int64_t y = 0; y < height; ++y)
      for (int64_t x = 0; x < width; ++x)
        for (int64_t c = 0; c < 3; ++c) {
          float v = clamp01(video[((f * height + y) * width + x) * 3 + c]);
          pixels[(y * gw + f * (width + sep) + x) * 3 + c] =
              static_cast<uint8_t>(std::lround(v * 255.0f));
        }
  write_png_rgb8(path, gw, height, pixels);
}

std::vector<float> box_downsample(const std::vector<float>& video, int64_t frames, int64_t height,
                                  int64_t width, int64_t factor) {
  if (height % factor || width % factor)
    throw std::invalid_argument("box_downsample: dims must divide factor");
  int64_t lh = height / factor, lw = width / factor;
  std::vector<float> out(frames * lh * lw * 3);
  for (int64_t f = 0; f < frames; ++f)
    for (int64_t y = 0; y < lh; ++y)
      for (int64_t x = 0; x < lw; ++x)
        for (int64_t c = 0; c < 3; ++c) {
          double sum = 0;
          for (int64_t dy = 0; dy < factor; ++dy)
            for (int64_t dx = 0; dx < factor; ++dx)
              sum += video[((f * height + y * factor + dy) * width + x * factor + dx) * 3 + c];
          out[((f * lh + y) * lw + x) * 3 + c] =
              static_cast<float>(sum / static_cast<double>(factor * factor));
        }
  return out;
}

namespace {

// Shared sampling loop: `kernel` maps a source coordinate to a value.
template <typename SampleFn>
std::vector<float> upsample_with(const std::vector<float>& video, int64_t frames, int64_t lh,
                                 int64_t lw, int64_t factor, SampleFn sample) {
  int64_t h = lh * factor, w = lw * factor;
  std::vector<float> out(frames * h * w * 3);
  for (int64_t f = 0; f < frames; ++f)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        // Align centers: source coord of the destination pixel center.
        double sy = (static_cast<double>(y) + 0.5) / factor - 0.5;
        double sx = (static_cast<double>(x) + 0.5) / factor - 0.5;
        for (int64_t c = 0; c < 3; ++c)
          out[((f * h + y) * w + x) * 3 + c] = sample(video, f, lh, lw, sy, sx, c);
      }
  return out;
}

float fetch(const std::vector<float>& v, int64_t f, int64_t lh, int64_t lw, int64_t y, int64_t x,
            int64_t c) {
  y = std::clamp<int64_t>(y, 0, lh - 1);
  x = std::clamp<int64_t>(x, 0, lw - 1);
  return v[((f * lh + y) * lw + x) * 3 + c];
}

double cubic_weight(double t) {
  // Catmull-Rom (a = -0.5)
  t = std::abs(t);
  if (t < 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
  if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
  return 0.0;
}

}  // namespace

std::vector<float> bilinear_upsample(const std::vector<float>& video, int64_t frames,
                                     int64_t height, int64_t width, int64_t factor) {
  return upsample_with(video, frames, height, width, factor,
                       [](const std::vector<float>& v, int64_t f, int64_t lh, int64_t lw, double sy,
                          double sx, int64_t c) {
                         int64_t y0 = static_cast<int64_t>(std::floor(sy));
                         int64_t x0 = static_cast<int64_t>(std::floor(sx));
                         double fy = sy - y0, fx = sx - x0;
                         double v00 = fetch(v, f, lh, lw, y0, x0, c);
                         double v01 = fetch(v, f, lh, lw, y0, x0 + 1, c);
                         double v10 = fetch(v, f, lh, lw, y0 + 1, x0, c);
                         double v11 = fetch(v, f, lh, lw, y0 + 1, x0 + 1, c);
                         double r = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                    fy * ((1 - fx) * v10 + fx * v11);
                         return static_cast<float>(std::clamp(r, 0.0, 1.0));
                       });
}

std::vector<float> bicubic_upsample(const std::vector<float>& video, int64_t frames, int64_t height,
                                    int64_t width, int64_t factor) {
  return upsample_with(video, frames, height, width, factor,
                       [](const std::vector<float>& v, int64_t f, int64_t lh, int64_t lw, double sy,
                          double sx, int64_t c) {
                         int64_t y0 = static_cast<int64_t>(std::floor(sy));
                         int64_t x0 = static_cast<int64_t>(std::floor(sx));
                         double r = 0.0;
                         for (int64_t dy = -1; dy <= 2; ++dy)
                           for (int64_t dx = -1; dx <= 2; ++dx) {
                             double w = cubic_weight(sy - (y0 + dy)) * cubic_weight(sx - (x0 + dx));
                             r += w * fetch(v, f, lh, lw, y0 + dy, x0 + dx, c);
                           }
                         return static_cast<float>(std::clamp(r, 0.0, 1.0));
                       });
}

}  // namespace ovd
