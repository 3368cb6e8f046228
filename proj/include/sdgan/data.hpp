#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "sdgan/latent.hpp"

namespace sdgan {

/// Raised when split membership is inconsistent (an image in two splits).
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for unusable datasets (empty, nothing eligible for sampling).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ground-truth factors of a rendered glyph. Identity is (shape, hue); the
/// rest are observation factors.
struct GlyphFactor {
  int shape_index = 0;
  int hue_index = 0;
  int num_hues = 1;
  double rotation = 0.0;                       // radians in [0, 2pi)
  std::array<double, 2> translation{0.0, 0.0};  // fraction of canvas, [-0.2, 0.2]
  double scale = 0.7;                          // [0.5, 0.9]
  double background = 0.5;                     // gray level [0.1, 0.9]

  bool same_identity(const GlyphFactor& o) const {
    return shape_index == o.shape_index && hue_index == o.hue_index;
  }
};

struct ImageRef {
  std::string path;            // source file, or a synthetic name
  std::string hash;            // hex SHA-256 of the post-resize RGB bytes
  torch::Tensor pixels;        // (3, R, R) float in [-1, 1]
  std::optional<GlyphFactor> factors;
};

struct IdentityRecord {
  std::string identity_id;
  std::vector<ImageRef> images;
};

struct IdentityDataset {
  int resolution = 0;
  std::vector<IdentityRecord> records;

  std::size_t num_images() const;
  const IdentityRecord* find(const std::string& identity_id) const;
  /// Records restricted to `ids`, in the order given.
  IdentityDataset subset(const std::vector<std::string>& ids) const;
};

/// Decodes `<root>/<identity_id>/<image>` files, resizes to resolution^2 RGB,
/// maps pixels to [-1, 1], removes exact duplicates and drops identities with
/// fewer than two surviving images. Unreadable files are skipped with a
/// warning; an empty result throws DataError.
IdentityDataset ingest(const std::filesystem::path& root, int resolution);

/// Removes exact duplicates by content hash, keeping first occurrences.
std::vector<ImageRef> dedup(std::vector<ImageRef> images);

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;

  /// "train", "validation", "test" or empty when the id is unknown.
  std::string which(const std::string& identity_id) const;
};

/// Identity-level split, deterministic under `seed`. Throws ConsistencyError
/// when one image hash lands in two splits.
DatasetSplit split(const IdentityDataset& dataset, const SplitFractions& fractions, std::uint64_t seed);

struct RealTuple {
  std::size_t record = 0;
  std::string identity_id;
  std::vector<std::size_t> images;  // indices into the record, all distinct
};

/// Uniform identity over records holding at least k images, then k distinct
/// images of it without replacement. Throws DataError if nothing is eligible.
RealTuple sample_real_tuple(const IdentityDataset& dataset, int k, Rng& rng);

/// JSON lines, one identity per line: {"identity_id","split","images":[{"path","hash"}]}.
void write_manifest(const std::filesystem::path& path, const IdentityDataset& dataset,
                    const DatasetSplit* splits);

}  // namespace sdgan
