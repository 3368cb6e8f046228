#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sdgan/data.hpp"
#include "sdgan/image.hpp"

namespace sdgan {

/// Procedural identity/observation dataset. Identity = (shape, hue); each
/// render draws rotation, translation, scale and background gray level.
///
/// Shapes, by index: filled circle, square, triangle, cross, ring, star.
inline constexpr int kMaxGlyphShapes = 6;

struct GlyphSpec {
  int num_shapes = 4;
  int num_hues = 3;
  int per_identity = 8;
  int resolution = 32;
  std::uint64_t seed = 0;
};

/// Renders one glyph with 4x4 supersampled antialiasing.
Rgb8 render_glyph(const GlyphFactor& factor, int resolution);

/// Fully saturated RGB of hue index h out of num_hues, equally spaced on the
/// color wheel; components in [0, 1].
std::array<double, 3> glyph_hue_rgb(int hue_index, int num_hues);

std::string glyph_identity_id(int shape_index, int hue_index);

/// S*H identities with m renders each. Throws std::invalid_argument unless
/// S*H >= 2, m >= 2, S <= 6 and H >= 1.
IdentityDataset make_glyphs(const GlyphSpec& spec);

/// Writes `<root>/<identity_id>/<n>.png` plus `factors.json` keyed by the
/// relative image path. Rewrites each ImageRef::path to the written file.
void write_glyph_dataset(const std::filesystem::path& root, IdentityDataset& dataset);

}  // namespace sdgan
