#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "sdgan/latent.hpp"
#include "sdgan/nets.hpp"

namespace sdgan {

struct ThresholdCalibration {
  double tau = 0.0;
  double accuracy = 0.0;
};

/// Accuracy-maximizing tau for the rule "distance <= tau means match".
/// Candidates: min - 1, midpoints between adjacent distinct distances, max + 1.
/// Ties go to the smallest tau. Throws std::invalid_argument unless both
/// classes are present and the inputs have equal length.
ThresholdCalibration calibrate_threshold(std::span<const double> distances, const std::vector<bool>& matched);

/// Area under the ROC curve for scores where larger means "positive", via
/// average ranks (ties count one half). Throws std::invalid_argument unless
/// both classes are present.
double roc_auc(std::span<const double> scores, const std::vector<bool>& positive);

struct VerificationResult {
  double auc = 0.0;
  double accuracy = 0.0;
  double far = 0.0;  // unmatched pairs accepted at tau / unmatched pairs
  std::int64_t matched = 0;
  std::int64_t unmatched = 0;
};

/// AUC over -distance, accuracy and FAR of "distance <= tau". Throws
/// std::invalid_argument for empty input.
VerificationResult verification_metrics(std::span<const double> distances, const std::vector<bool>& matched,
                                        double tau);

/// Multi-scale SSIM of images in [-1, 1], either (3, H, W) or batched
/// (N, 3, H, W). Values are mapped to [0, 1] first. Gaussian window
/// sigma 1.5 of size min(11, H, W), valid filtering, K1 = 0.01, K2 = 0.03.
/// Five scales from 176 px upward, otherwise the first three weights
/// renormalized. Returns an (N) double tensor (a single element for 3-D input).
torch::Tensor msssim_batch(const torch::Tensor& x, const torch::Tensor& y);
double msssim(const torch::Tensor& x, const torch::Tensor& y);

/// Scale weights in use for an image of the given size.
std::vector<double> msssim_weights(std::int64_t height, std::int64_t width);

/// 1 - mean MS-SSIM over n_pairs pairs of distinct images from one group
/// (group drawn uniformly among those with >= 2 images). Groups are (n, 3, R, R).
double id_div(const std::vector<torch::Tensor>& groups, int n_pairs, Rng& rng);
/// As id_div, with the two groups drawn independently.
double all_div(const std::vector<torch::Tensor>& groups, int n_pairs, Rng& rng);

/// Generator versions: pairs share z_I (id) or are fully independent (all);
/// observation codes are always fresh.
double id_div(GeneratorNet& generator, const LatentPartition& partition, int n_pairs, Rng& rng);
double all_div(GeneratorNet& generator, const LatentPartition& partition, int n_pairs, Rng& rng);

/// Runs the generator in eval mode without gradients, in chunks.
torch::Tensor generate_images(GeneratorNet& generator, const torch::Tensor& codes);

}  // namespace sdgan
