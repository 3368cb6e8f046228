#pragma once

// Shared fixtures and brute-force reference implementations for the tests.
// The references deliberately avoid the library's code paths: plain loops in
// double precision over explicit windows.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "sdgan/checkpoint.hpp"
#include "sdgan/nets.hpp"
#include "sdgan/train.hpp"

namespace fs = std::filesystem;

namespace testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "sdgan") {
    static std::uint64_t counter = 0;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() / (tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Small 32x32 SD-DCGAN trained for `iterations` steps on a 2x2 glyph set.
inline sdgan::TrainConfig tiny_config(const fs::path& out, std::int64_t iterations = 0) {
  sdgan::TrainConfig c;
  c.model.family = sdgan::Family::sd_dcgan;
  c.model.resolution = 32;
  c.model.k = 2;
  c.optim.total_iterations = iterations;
  c.optim.batch_tuples = 2;
  sdgan::GlyphSpec g;
  g.num_shapes = 2;
  g.num_hues = 2;
  g.per_identity = 4;
  g.resolution = 32;
  g.seed = 3;
  c.dataset.glyphs = g;
  c.seed = 11;
  c.output_dir = out;
  return c;
}

inline sdgan::Checkpoint tiny_checkpoint(const fs::path& out, std::int64_t iterations = 0) {
  const auto cfg = tiny_config(out, iterations);
  return sdgan::train(cfg, sdgan::load_dataset(cfg.dataset, cfg.model.resolution));
}

// ---------------------------------------------------------------------------
// MS-SSIM, written out pixel by pixel.

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  double at(int y, int x) const { return v[static_cast<std::size_t>(y * w + x)]; }
};

inline std::vector<Plane> planes01(const torch::Tensor& chw) {
  auto t = chw.to(torch::kFloat64).contiguous();
  const int c = static_cast<int>(t.size(0)), h = static_cast<int>(t.size(1)), w = static_cast<int>(t.size(2));
  const double* p = t.data_ptr<double>();
  std::vector<Plane> out(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    out[ch].h = h;
    out[ch].w = w;
    for (int i = 0; i < h * w; ++i) out[ch].v.push_back((p[ch * h * w + i] + 1.0) / 2.0);
  }
  return out;
}

inline Plane halve(const Plane& p) {
  Plane q;
  q.h = p.h / 2;
  q.w = p.w / 2;
  for (int y = 0; y < q.h; ++y) {
    for (int x = 0; x < q.w; ++x) {
      q.v.push_back((p.at(2 * y, 2 * x) + p.at(2 * y + 1, 2 * x) + p.at(2 * y, 2 * x + 1) +
                     p.at(2 * y + 1, 2 * x + 1)) /
                    4.0);
    }
  }
  return q;
}

// Mean contrast-structure term and mean full SSIM over all valid window positions and channels.
inline std::pair<double, double> ssim_terms(const std::vector<Plane>& a, const std::vector<Plane>& b) {
  const int h = a[0].h, w = a[0].w;
  const int n = std::min({11, h, w});
  std::vector<double> win(static_cast<std::size_t>(n * n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double di = i - (n - 1) / 2.0, dj = j - (n - 1) / 2.0;
      win[static_cast<std::size_t>(i * n + j)] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
      total += win[static_cast<std::size_t>(i * n + j)];
    }
  }
  for (auto& x : win) x /= total;
  const double C1 = 1e-4, C2 = 9e-4;
  double cs_sum = 0.0, ssim_sum = 0.0;
  long count = 0;
  for (std::size_t ch = 0; ch < a.size(); ++ch) {
    for (int y = 0; y + n <= h; ++y) {
      for (int x = 0; x + n <= w; ++x) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const double g = win[static_cast<std::size_t>(i * n + j)];
            const double p = a[ch].at(y + i, x + j), q = b[ch].at(y + i, x + j);
            mx += g * p;
            my += g * q;
            xx += g * p * p;
            yy += g * q * q;
            xy += g * p * q;
          }
        }
        const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
        const double cs = (2 * cov + C2) / (vx + vy + C2);
        const double l = (2 * mx * my + C1) / (mx * mx + my * my + C1);
        cs_sum += cs;
        ssim_sum += l * cs;
        ++count;
      }
    }
  }
  return {cs_sum / static_cast<double>(count), ssim_sum / static_cast<double>(count)};
}

inline double reference_msssim(const torch::Tensor& x, const torch::Tensor& y) {
  auto a = planes01(x), b = planes01(y);
  const int size = std::min(a[0].h, a[0].w);
  std::vector<double> w{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  if (size < 176) {
    w = {0.0448, 0.2856, 0.3001};
    const double s = 0.0448 + 0.2856 + 0.3001;
    for (auto& v : w) v /= s;
  }
  double result = 1.0;
  for (std::size_t s = 0; s < w.size(); ++s) {
    const auto [cs, ssim] = ssim_terms(a, b);
    const double term = s + 1 < w.size() ? cs : ssim;
    result *= std::pow(std::max(term, 0.0), w[s]);
    for (auto& p : a) p = halve(p);
    for (auto& p : b) p = halve(p);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Verification references.

// Accuracy of "d <= tau" for one threshold.
inline double accuracy_at(const std::vector<double>& d, const std::vector<bool>& m, double tau) {
  int correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) correct += ((d[i] <= tau) == m[i]) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

// Tries every candidate (sentinels and midpoints) in ascending order, recomputing accuracy from scratch.
inline std::pair<double, double> exhaustive_threshold(const std::vector<double>& d, const std::vector<bool>& m) {
  std::vector<double> u = d;
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  std::vector<double> candidates{u.front() - 1.0};
  for (std::size_t i = 0; i + 1 < u.size(); ++i) candidates.push_back((u[i] + u[i + 1]) / 2.0);
  candidates.push_back(u.back() + 1.0);
  double best_tau = candidates.front(), best = -1.0;
  for (double t : candidates) {
    const double a = accuracy_at(d, m, t);
    if (a > best) {
      best = a;
      best_tau = t;
    }
  }
  return {best_tau, best};
}

// Fraction of (positive, negative) pairs ranked correctly, ties one half.
inline double brute_force_auc(const std::vector<double>& s, const std::vector<bool>& p) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!p[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (p[j]) continue;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      ++pairs;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace testing
