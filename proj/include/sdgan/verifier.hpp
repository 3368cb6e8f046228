#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>
#include <torch/torch.h>

#include "sdgan/data.hpp"
#include "sdgan/latent.hpp"
#include "sdgan/metrics.hpp"
#include "sdgan/nets.hpp"

namespace sdgan {

/// Image pairs with ground truth. first/second are (N, 3, R, R) in [-1, 1].
struct PairSet {
  torch::Tensor first;
  torch::Tensor second;
  std::vector<bool> matched;

  std::int64_t size() const { return static_cast<std::int64_t>(matched.size()); }
};

/// n_pairs / 2 same-identity pairs (distinct images) followed by
/// n_pairs - n_pairs / 2 pairs from two distinct identities.
PairSet real_pairs(const IdentityDataset& dataset, int n_pairs, Rng& rng);

/// Same layout from a generator: matched pairs share z_I, unmatched pairs
/// draw z_I independently; z_O is fresh for every image.
PairSet generated_pairs(GeneratorNet& generator, const LatentPartition& partition, int n_pairs, Rng& rng);

/// Pair verification by embedding distance D = ||f(a) - f(b)||^2 against a
/// calibrated threshold. embed must be safe to call concurrently.
class Verifier {
 public:
  virtual ~Verifier() = default;

  /// (N, 3, R, R) images in [-1, 1] -> (N, D) embeddings.
  virtual torch::Tensor embed(const torch::Tensor& images) const = 0;
  virtual void save(const std::filesystem::path& dir) const = 0;

  std::vector<double> distances(const torch::Tensor& a, const torch::Tensor& b) const;

  /// Sets tau with calibrate_threshold on the given pairs.
  ThresholdCalibration calibrate(const PairSet& pairs);
  bool calibrated() const { return tau_.has_value(); }
  /// Throws std::logic_error when uncalibrated.
  double threshold() const;
  void set_threshold(double tau) { tau_ = tau; }

  /// Throws std::invalid_argument for an empty pair set.
  VerificationResult verify(const PairSet& pairs) const;

 protected:
  std::optional<double> tau_;
};

struct GlyphVerifierConfig {
  int embedding_dim = 64;  // per head
  int epochs = 20;
  int batch = 64;
  double lr = 1e-3;
  double scale = 16.0;  // cosine-softmax temperature
  bool factor_heads = true;  // shape and hue heads when every image carries glyph factors
  int calibration_pairs = 2000;
  std::uint64_t seed = 0;
};

/// Small CNN classifier with one cosine-softmax head per label set: either the
/// identity, or the two identity factors of a glyph (shape, hue). The
/// embedding is the L2-normalized penultimate layer of every head,
/// concatenated and scaled back to unit norm.
class GlyphVerifier : public Verifier {
 public:
  GlyphVerifier(std::vector<int> head_classes, int resolution, const GlyphVerifierConfig& config);
  ~GlyphVerifier() override;

  torch::Tensor embed(const torch::Tensor& images) const override;
  void save(const std::filesystem::path& dir) const override;
  static std::unique_ptr<GlyphVerifier> load(const std::filesystem::path& dir);

  /// Per-head logits, for training.
  std::vector<torch::Tensor> class_logits(const torch::Tensor& images);
  torch::nn::Module& module();

  /// Validation (calibration) and held-out test metrics written by training.
  nlohmann::json& report();
  const nlohmann::json& report() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits identities 80/10/10, trains on the training identities, calibrates
/// tau on balanced pairs from the validation identities and measures the test
/// identities at that tau. Glyph factor labels, when every image has them and
/// config.factor_heads is set, replace the identity label with (shape, hue).
/// Throws std::invalid_argument with fewer than two identities in the
/// training or validation split.
std::unique_ptr<GlyphVerifier> train_glyph_verifier(const IdentityDataset& dataset,
                                                    const GlyphVerifierConfig& config);

/// Embeddings looked up by image content hash from JSON lines
/// {"image_hash": "...", "embedding": [...]}. Images are hashed as 8-bit RGB.
class EmbeddingTableVerifier : public Verifier {
 public:
  static std::unique_ptr<EmbeddingTableVerifier> from_jsonl(const std::filesystem::path& path);

  /// Throws std::out_of_range for an image not in the table.
  torch::Tensor embed(const torch::Tensor& images) const override;
  void save(const std::filesystem::path& dir) const override;
  std::size_t size() const { return table_.size(); }

 private:
  std::unordered_map<std::string, std::vector<float>> table_;
  std::filesystem::path source_;
};

/// A directory written by Verifier::save, or a .jsonl embedding table
/// (calibrated later).
std::unique_ptr<Verifier> load_verifier(const std::filesystem::path& path);

}  // namespace sdgan
