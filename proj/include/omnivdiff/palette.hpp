#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ovd {

struct Color {
  float r, g, b;
};

// Normative 8-color palette, ids 1..8; id 0 is black background.
inline constexpr std::array<Color, 8> kPalette = {{
    {1.0f, 0.0f, 0.0f},  // red
    {0.0f, 1.0f, 0.0f},  // green
    {0.0f, 0.0f, 1.0f},  // blue
    {1.0f, 1.0f, 0.0f},  // yellow
    {1.0f, 0.0f, 1.0f},  // magenta
    {0.0f, 1.0f, 1.0f},  // cyan
    {1.0f, 0.5f, 0.0f},  // orange
    {1.0f, 1.0f, 1.0f},  // white
}};

inline constexpr std::array<const char*, 8> kColorNames = {
    "red", "green", "blue", "yellow", "magenta", "cyan", "orange", "white"};

// Closed caption vocabulary, 18 words with fixed ids. Captions use the
// "<color> <kind> <direction>" template; the last two words are reserved.
inline constexpr std::array<const char*, 18> kVocabulary = {
    "red",  "green",  "blue", "yellow", "magenta", "cyan",  "orange", "white", "circle",
    "square", "triangle", "left", "right",  "up",      "down",  "still",  "small", "big"};

inline constexpr int64_t kVocabSize = 18;
inline constexpr int64_t kPadTokenId = 18;  // reserved pad id, one past the vocabulary
inline constexpr int64_t kMaxCaptionTokens = 9;  // three shapes, three words each

inline int64_t vocab_id(const std::string& word) {
  for (int64_t i = 0; i < kVocabSize; ++i)
    if (word == kVocabulary[i]) return i;
  throw std::invalid_argument("word '" + word + "' is not in the caption vocabulary");
}

}  // namespace ovd
