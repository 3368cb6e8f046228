#include "sdgan/metrics.hpp"

#include "sdgan/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sdgan {

namespace F = torch::nn::functional;
using torch::Tensor;

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("scores and labels differ in length");
}

std::pair<std::int64_t, std::int64_t> class_counts(const std::vector<bool>& labels) {
  const auto pos = std::count(labels.begin(), labels.end(), true);
  return {pos, static_cast<std::int64_t>(labels.size()) - pos};
}

}  // namespace

// ---------------------------------------------------------------------------
// Thresholds and ROC

ThresholdCalibration calibrate_threshold(std::span<const double> distances, const std::vector<bool>& matched) {
  check_lengths(distances.size(), matched.size());
  const auto [pos, neg] = class_counts(matched);
  if (pos == 0 || neg == 0) throw std::invalid_argument("threshold calibration needs matched and unmatched pairs");
  for (double d : distances) {
    if (!std::isfinite(d)) throw std::invalid_argument("non-finite distance");
  }

  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return distances[a] < distances[b]; });

  // Below every distance: all pairs rejected, the unmatched ones are correct.
  std::int64_t correct = neg;
  std::int64_t best = correct;
  double best_tau = distances[order.front()] - 1.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double d = distances[order[i]];
    for (; i < order.size() && distances[order[i]] == d; ++i) correct += matched[order[i]] ? 1 : -1;
    const double tau = i < order.size() ? 0.5 * (d + distances[order[i]]) : d + 1.0;
    if (correct > best) {
      best = correct;
      best_tau = tau;
    }
  }
  return {best_tau, static_cast<double>(best) / static_cast<double>(distances.size())};
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  check_lengths(scores.size(), positive.size());
  const auto [pos, neg] = class_counts(positive);
  if (pos == 0 || neg == 0) throw std::invalid_argument("AUC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) rank_sum += avg;
    }
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

VerificationResult verification_metrics(std::span<const double> distances, const std::vector<bool>& matched,
                                        double tau) {
  check_lengths(distances.size(), matched.size());
  if (distances.empty()) throw std::invalid_argument("empty pair set");
  VerificationResult r;
  std::int64_t correct = 0, false_accepts = 0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const bool accept = distances[i] <= tau;
    if (accept == matched[i]) ++correct;
    if (matched[i]) {
      ++r.matched;
    } else {
      ++r.unmatched;
      if (accept) ++false_accepts;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(distances.size());
  r.far = r.unmatched ? static_cast<double>(false_accepts) / static_cast<double>(r.unmatched) : 0.0;
  if (r.matched && r.unmatched) {
    std::vector<double> scores(distances.size());
    std::transform(distances.begin(), distances.end(), scores.begin(), [](double d) { return -d; });
    r.auc = roc_auc(scores, matched);
  } else {
    r.auc = std::nan("");
  }
  return r;
}

// ---------------------------------------------------------------------------
// MS-SSIM

std::vector<double> msssim_weights(std::int64_t height, std::int64_t width) {
  std::vector<double> w{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  if (std::min(height, width) >= 176) return w;
  w.resize(3);
  const double s = w[0] + w[1] + w[2];
  for (auto& v : w) v /= s;
  return w;
}

namespace {

Tensor gaussian(std::int64_t size, double sigma) {
  auto x = torch::arange(size, torch::kFloat64) - static_cast<double>(size - 1) / 2.0;
  auto g = torch::exp(-(x * x) / (2.0 * sigma * sigma));
  return g / g.sum();
}

// Separable valid-mode Gaussian filter of each channel.
Tensor blur(const Tensor& x, const Tensor& g) {
  const auto c = x.size(1), n = g.size(0);
  auto h = F::conv2d(x, g.view({1, 1, 1, n}).expand({c, 1, 1, n}), F::Conv2dFuncOptions().groups(c));
  return F::conv2d(h, g.view({1, 1, n, 1}).expand({c, 1, n, 1}), F::Conv2dFuncOptions().groups(c));
}

}  // namespace

Tensor msssim_batch(const Tensor& x_in, const Tensor& y_in) {
  if (x_in.sizes() != y_in.sizes()) throw std::invalid_argument("msssim: image dimensions differ");
  if (x_in.dim() != 3 && x_in.dim() != 4) throw std::invalid_argument("msssim: expected (C,H,W) or (N,C,H,W)");
  auto x = ((x_in.dim() == 3 ? x_in.unsqueeze(0) : x_in).to(torch::kFloat64) + 1.0) / 2.0;
  auto y = ((y_in.dim() == 3 ? y_in.unsqueeze(0) : y_in).to(torch::kFloat64) + 1.0) / 2.0;
  const auto weights = msssim_weights(x.size(2), x.size(3));
  const auto scales = static_cast<std::int64_t>(weights.size());
  if (std::min(x.size(2), x.size(3)) < (std::int64_t{1} << (scales - 1))) {
    throw std::invalid_argument("msssim: image too small for " + std::to_string(scales) + " scales");
  }
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;

  auto result = torch::ones({x.size(0)}, torch::kFloat64);
  for (std::int64_t s = 0; s < scales; ++s) {
    const auto win = std::min<std::int64_t>({11, x.size(2), x.size(3)});
    const auto g = gaussian(win, 1.5);
    auto mx = blur(x, g), my = blur(y, g);
    auto sxx = blur(x * x, g) - mx * mx;
    auto syy = blur(y * y, g) - my * my;
    auto sxy = blur(x * y, g) - mx * my;
    auto cs = (2.0 * sxy + C2) / (sxx + syy + C2);
    Tensor term;
    if (s + 1 < scales) {
      term = cs.mean({1, 2, 3});
    } else {
      auto l = (2.0 * mx * my + C1) / (mx * mx + my * my + C1);
      term = (l * cs).mean({1, 2, 3});
    }
    result = result * term.clamp_min(0.0).pow(weights[static_cast<std::size_t>(s)]);
    if (s + 1 < scales) {
      x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
      y = F::avg_pool2d(y, F::AvgPool2dFuncOptions(2));
    }
  }
  return result;
}

double msssim(const Tensor& x, const Tensor& y) {
  if (x.dim() != 3) throw std::invalid_argument("msssim: expected a single (C,H,W) image");
  return msssim_batch(x, y).item<double>();
}

// ---------------------------------------------------------------------------
// Diversity

namespace {

constexpr std::int64_t kChunk = 256;

double one_minus_mean(const Tensor& a, const Tensor& b) {
  double sum = 0.0;
  for (std::int64_t i = 0; i < a.size(0); i += kChunk) {
    const auto n = std::min(kChunk, a.size(0) - i);
    sum += msssim_batch(a.narrow(0, i, n), b.narrow(0, i, n)).sum().item<double>();
  }
  return 1.0 - sum / static_cast<double>(a.size(0));
}

void check_pairs(int n_pairs) {
  if (n_pairs < 1) throw std::invalid_argument("n_pairs must be positive");
}

std::pair<std::size_t, std::size_t> distinct_two(Rng& rng, std::size_t n) {
  const auto a = uniform_index(rng, n);
  auto b = uniform_index(rng, n - 1);
  if (b >= a) ++b;
  return {a, b};
}

}  // namespace

double id_div(const std::vector<Tensor>& groups, int n_pairs, Rng& rng) {
  check_pairs(n_pairs);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].size(0) >= 2) eligible.push_back(i);
  }
  if (eligible.empty()) throw std::invalid_argument("id_div needs a group with at least two images");
  std::vector<Tensor> a, b;
  for (int p = 0; p < n_pairs; ++p) {
    const auto& g = groups[eligible[uniform_index(rng, eligible.size())]];
    const auto [i, j] = distinct_two(rng, static_cast<std::size_t>(g.size(0)));
    a.push_back(g[static_cast<std::int64_t>(i)]);
    b.push_back(g[static_cast<std::int64_t>(j)]);
  }
  return one_minus_mean(torch::stack(a), torch::stack(b));
}

double all_div(const std::vector<Tensor>& groups, int n_pairs, Rng& rng) {
  check_pairs(n_pairs);
  if (groups.empty()) throw std::invalid_argument("all_div needs at least one group");
  std::int64_t total = 0;
  for (const auto& g : groups) total += g.size(0);
  if (total < 2) throw std::invalid_argument("all_div needs at least two images");
  std::vector<Tensor> a, b;
  for (int p = 0; p < n_pairs; ++p) {
    std::size_t ga, gb;
    do {
      ga = uniform_index(rng, groups.size());
    } while (groups[ga].size(0) == 0);
    do {
      gb = uniform_index(rng, groups.size());
    } while (groups[gb].size(0) == 0 || (gb == ga && groups[ga].size(0) < 2));
    std::int64_t i, j;
    if (ga == gb) {
      const auto [u, v] = distinct_two(rng, static_cast<std::size_t>(groups[ga].size(0)));
      i = static_cast<std::int64_t>(u);
      j = static_cast<std::int64_t>(v);
    } else {
      i = static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(groups[ga].size(0))));
      j = static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(groups[gb].size(0))));
    }
    a.push_back(groups[ga][i]);
    b.push_back(groups[gb][j]);
  }
  return one_minus_mean(torch::stack(a), torch::stack(b));
}

Tensor generate_images(GeneratorNet& generator, const Tensor& codes) {
  torch::NoGradGuard no_grad;
  const bool was_training = generator.is_training();
  generator.eval();
  std::vector<Tensor> out;
  for (std::int64_t i = 0; i < codes.size(0); i += kChunk) {
    out.push_back(generator.forward(codes.narrow(0, i, std::min(kChunk, codes.size(0) - i))));
  }
  if (was_training) generator.train();
  return torch::cat(out);
}

namespace {

double generator_div(GeneratorNet& g, const LatentPartition& partition, int n_pairs, Rng& rng, bool shared) {
  check_pairs(n_pairs);
  const auto pairs = latent_tuples(partition, 2, n_pairs, rng);  // (n, 2, T), shared z_I
  auto a = pairs.select(1, 0).contiguous();
  auto b = pairs.select(1, 1).contiguous();
  if (!shared) {
    b = latent_tuples(partition, 2, n_pairs, rng).select(1, 0).contiguous();
  }
  return one_minus_mean(generate_images(g, a), generate_images(g, b));
}

}  // namespace

double id_div(GeneratorNet& generator, const LatentPartition& partition, int n_pairs, Rng& rng) {
  return generator_div(generator, partition, n_pairs, rng, true);
}

double all_div(GeneratorNet& generator, const LatentPartition& partition, int n_pairs, Rng& rng) {
  return generator_div(generator, partition, n_pairs, rng, false);
}

}  // namespace sdgan
