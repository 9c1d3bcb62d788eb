#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omnivdiff/scene.hpp"

namespace ovd {

// OMMV sample format, all little-endian:
//   magic "OMMV", version u16=1, f/h/w u32,
//   rgb u8[f*h*w*3], depth u16[f*h*w] (round(d*65535)),
//   seg u8[f*h*w], edges bit-packed LSB-first with rows padded to bytes,
//   caption length u8 + token ids u8.
void write_sample(const MultiModalVideo& v, const std::string& path);
MultiModalVideo read_sample(const std::string& path);

std::vector<uint8_t> serialize_sample(const MultiModalVideo& v);
MultiModalVideo deserialize_sample(const std::vector<uint8_t>& bytes);

struct ManifestEntry {
  std::string filename;
  uint64_t seed;
};

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Loads every sample listed in <dir>/manifest.txt, in manifest order.
std::vector<MultiModalVideo> read_dataset(const std::string& dir);

}  // namespace ovd
