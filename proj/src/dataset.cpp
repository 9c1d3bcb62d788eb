#include "omnivdiff/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "omnivdiff/palette.hpp"

namespace ovd {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back(v >> 8);
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

struct Reader {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > bytes.size()) throw std::runtime_error("OMMV file truncated");
  }
  uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = bytes[pos] | (bytes[pos + 1] << 8);
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
};

}  // namespace

std::vector<uint8_t> serialize_sample(const MultiModalVideo& v) {
  int64_t px = v.pixels();
  if (static_cast<int64_t>(v.rgb.size()) != px * 3 ||
      static_cast<int64_t>(v.depth.size()) != px ||
      static_cast<int64_t>(v.seg.size()) != px || static_cast<int64_t>(v.edges.size()) != px)
    throw std::invalid_argument("sample plane sizes inconsistent with dims");
  if (v.caption.size() > 255) throw std::invalid_argument("caption too long for OMMV");

  std::vector<uint8_t> out;
  out.insert(out.end(), {'O', 'M', 'M', 'V'});
  put_u16(out, 1);
  put_u32(out, static_cast<uint32_t>(v.frames));
  put_u32(out, static_cast<uint32_t>(v.height));
  put_u32(out, static_cast<uint32_t>(v.width));
  for (float c : v.rgb) out.push_back(static_cast<uint8_t>(std::lround(c * 255.0f)));
  for (float d : v.depth) put_u16(out, static_cast<uint16_t>(std::lround(d * 65535.0f)));
  out.insert(out.end(), v.seg.begin(), v.seg.end());
  // Edge bits, LSB-first, each row padded to whole bytes.
  int64_t row_bytes = (v.width + 7) / 8;
  for (int64_t f = 0; f < v.frames; ++f)
    for (int64_t y = 0; y < v.height; ++y) {
      std::vector<uint8_t> row(row_bytes, 0);
      for (int64_t x = 0; x < v.width; ++x)
        if (v.edges[(f * v.height + y) * v.width + x]) row[x / 8] |= 1 << (x % 8);
      out.insert(out.end(), row.begin(), row.end());
    }
  out.push_back(static_cast<uint8_t>(v.caption.size()));
  for (int64_t t : v.caption) {
    if (t < 0 || t > 255) throw std::invalid_argument("caption token id out of byte range");
    out.push_back(static_cast<uint8_t>(t));
  }
  return out;
}

MultiModalVideo deserialize_sample(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  r.need(4);
  if (std::memcmp(bytes.data(), "OMMV", 4) != 0) throw std::runtime_error("OMMV: bad magic");
  r.pos = 4;
  uint16_t version = r.u16();
  if (version != 1) throw std::runtime_error("OMMV: unsupported version " + std::to_string(version));
  MultiModalVideo v;
  v.frames = r.u32();
  v.height = r.u32();
  v.width = r.u32();
  if (v.frames < 1 || v.height < 1 || v.width < 1)
    throw std::runtime_error("OMMV: inconsistent dimensions");
  int64_t px = v.pixels();
  v.rgb.resize(px * 3);
  for (auto& c : v.rgb) c = static_cast<float>(r.u8()) / 255.0f;
  v.depth.resize(px);
  for (auto& d : v.depth) d = static_cast<float>(r.u16()) / 65535.0f;
  v.seg.resize(px);
  for (auto& s : v.seg) s = r.u8();
  v.edges.assign(px, 0);
  int64_t row_bytes = (v.width + 7) / 8;
  for (int64_t f = 0; f < v.frames; ++f)
    for (int64_t y = 0; y < v.height; ++y) {
      r.need(row_bytes);
      for (int64_t x = 0; x < v.width; ++x)
        v.edges[(f * v.height + y) * v.width + x] = (bytes[r.pos + x / 8] >> (x % 8)) & 1;
      r.pos += row_bytes;
    }
  uint8_t cap_len = r.u8();
  v.caption.resize(cap_len);
  for (auto& t : v.caption) t = r.u8();
  if (r.pos != bytes.size()) throw std::runtime_error("OMMV: trailing bytes");
  return v;
}

void write_sample(const MultiModalVideo& v, const std::string& path) {
  std::vector<uint8_t> bytes = serialize_sample(v);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!f) throw std::runtime_error("write failed: " + path);
}

MultiModalVideo read_sample(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_sample(bytes);
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& e : entries) f << e.filename << " " << e.seed << "\n";
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    ManifestEntry e;
    if (!(is >> e.filename >> e.seed)) throw std::runtime_error("malformed manifest line: " + line);
    entries.push_back(e);
  }
  return entries;
}

std::vector<MultiModalVideo> read_dataset(const std::string& dir) {
  auto entries = read_manifest(dir + "/manifest.txt");
  std::vector<MultiModalVideo> samples;
  samples.reserve(entries.size());
  for (const auto& e : entries) samples.push_back(read_sample(dir + "/" + e.filename));
  return samples;
}

}  // namespace ovd
