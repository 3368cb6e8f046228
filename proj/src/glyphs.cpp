#include "sdgan/glyphs.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sdgan {

namespace {

constexpr int kSupersample = 4;
constexpr double kRadiusPerScale = 0.6;  // glyph radius in half-canvas units per unit scale

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

struct Vec2 {
  double x, y;
};

bool in_polygon(const Vec2* poly, int n, Vec2 p) {
  bool inside = false;
  for (int i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

const std::array<Vec2, 3>& triangle() {
  static const std::array<Vec2, 3> t = [] {
    std::array<Vec2, 3> v{};
    for (int i = 0; i < 3; ++i) {
      const double a = std::numbers::pi / 2 + i * 2 * std::numbers::pi / 3;
      v[i] = {std::cos(a), std::sin(a)};
    }
    return v;
  }();
  return t;
}

const std::array<Vec2, 10>& star() {
  static const std::array<Vec2, 10> s = [] {
    std::array<Vec2, 10> v{};
    for (int i = 0; i < 10; ++i) {
      const double a = std::numbers::pi / 2 + i * std::numbers::pi / 5;
      const double r = (i % 2 == 0) ? 1.0 : 0.45;
      v[i] = {r * std::cos(a), r * std::sin(a)};
    }
    return v;
  }();
  return s;
}

bool inside_shape(int shape, Vec2 p) {
  const double r = std::hypot(p.x, p.y);
  switch (shape) {
    case 0: return r <= 0.9;
    case 1: return std::max(std::abs(p.x), std::abs(p.y)) <= 0.75;
    case 2: return in_polygon(triangle().data(), 3, p);
    case 3:
      return (std::abs(p.x) <= 0.3 && std::abs(p.y) <= 0.9) || (std::abs(p.y) <= 0.3 && std::abs(p.x) <= 0.9);
    case 4: return r >= 0.55 && r <= 0.95;
    case 5: return in_polygon(star().data(), 10, p);
    default: throw std::invalid_argument("glyph shape index out of range");
  }
}

}  // namespace

std::array<double, 3> glyph_hue_rgb(int hue_index, int num_hues) {
  // HSV -> RGB with s = v = 1.
  const double h = 6.0 * static_cast<double>(hue_index) / static_cast<double>(num_hues);
  const int sector = static_cast<int>(std::floor(h)) % 6;
  const double f = h - std::floor(h);
  switch (sector) {
    case 0: return {1.0, f, 0.0};
    case 1: return {1.0 - f, 1.0, 0.0};
    case 2: return {0.0, 1.0, f};
    case 3: return {0.0, 1.0 - f, 1.0};
    case 4: return {f, 0.0, 1.0};
    default: return {1.0, 0.0, 1.0 - f};
  }
}

std::string glyph_identity_id(int shape_index, int hue_index) {
  return "glyph_s" + std::to_string(shape_index) + "_h" + std::to_string(hue_index);
}

Rgb8 render_glyph(const GlyphFactor& f, int resolution) {
  if (resolution <= 0) throw std::invalid_argument("resolution must be positive");
  const auto color = glyph_hue_rgb(f.hue_index, f.num_hues);
  const double radius = kRadiusPerScale * f.scale;
  const double c = std::cos(-f.rotation), s = std::sin(-f.rotation);
  const int n = resolution * kSupersample;

  Rgb8 img;
  img.width = img.height = resolution;
  img.data.resize(static_cast<std::size_t>(resolution) * resolution * 3);
  for (int py = 0; py < resolution; ++py) {
    for (int px = 0; px < resolution; ++px) {
      int hits = 0;
      for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
          const double u = (px * kSupersample + sx + 0.5) / n * 2.0 - 1.0 - 2.0 * f.translation[0];
          const double v = 1.0 - (py * kSupersample + sy + 0.5) / n * 2.0 - 2.0 * f.translation[1];
          const Vec2 local{(c * u - s * v) / radius, (s * u + c * v) / radius};
          hits += inside_shape(f.shape_index, local) ? 1 : 0;
        }
      }
      const double cover = static_cast<double>(hits) / (kSupersample * kSupersample);
      auto* out = img.data.data() + (static_cast<std::size_t>(py) * resolution + px) * 3;
      for (int ch = 0; ch < 3; ++ch) {
        const double value = f.background * (1.0 - cover) + color[ch] * cover;
        out[ch] = static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 1.0) * 255.0));
      }
    }
  }
  return img;
}

IdentityDataset make_glyphs(const GlyphSpec& spec) {
  if (spec.num_shapes < 1 || spec.num_shapes > kMaxGlyphShapes || spec.num_hues < 1 ||
      spec.num_shapes * spec.num_hues < 2 || spec.per_identity < 2) {
    throw std::invalid_argument("glyph dataset needs 1<=S<=6, H>=1, S*H>=2 and m>=2");
  }
  Rng rng(spec.seed);
  IdentityDataset ds;
  ds.resolution = spec.resolution;
  for (int shape = 0; shape < spec.num_shapes; ++shape) {
    for (int hue = 0; hue < spec.num_hues; ++hue) {
      IdentityRecord rec;
      rec.identity_id = glyph_identity_id(shape, hue);
      for (int j = 0; j < spec.per_identity; ++j) {
        GlyphFactor f;
        f.shape_index = shape;
        f.hue_index = hue;
        f.num_hues = spec.num_hues;
        f.rotation = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        f.translation = {uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2)};
        f.scale = uniform(rng, 0.5, 0.9);
        f.background = uniform(rng, 0.1, 0.9);
        const auto rgb = render_glyph(f, spec.resolution);
        ImageRef ref;
        ref.path = rec.identity_id + "/" + std::to_string(j) + ".png";
        ref.hash = content_hash(rgb);
        ref.pixels = from_rgb8(rgb);
        ref.factors = f;
        rec.images.push_back(std::move(ref));
      }
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

void write_glyph_dataset(const std::filesystem::path& root, IdentityDataset& dataset) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  nlohmann::json factors = nlohmann::json::object();
  for (auto& rec : dataset.records) {
    fs::create_directories(root / rec.identity_id);
    for (std::size_t j = 0; j < rec.images.size(); ++j) {
      auto& img = rec.images[j];
      const auto rel = rec.identity_id + "/" + std::to_string(j) + ".png";
      write_png(root / rel, to_rgb8(img.pixels));
      img.path = (root / rel).string();
      if (img.factors) {
        const auto& f = *img.factors;
        factors[rel] = {{"identity_id", rec.identity_id},
                        {"shape_index", f.shape_index},
                        {"hue_index", f.hue_index},
                        {"num_hues", f.num_hues},
                        {"rotation", f.rotation},
                        {"translation", {f.translation[0], f.translation[1]}},
                        {"scale", f.scale},
                        {"background", f.background},
                        {"hash", img.hash}};
      }
    }
  }
  std::ofstream out(root / "factors.json");
  out << factors.dump(2) << '\n';
}

}  // namespace sdgan
