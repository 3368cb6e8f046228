#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sdgan {

/// Random source used for every sampling operation. Passed explicitly; there
/// is no global random state anywhere in the library.
using Rng = std::mt19937_64;

/// Uniform draw on [-1, 1) built from the raw 64-bit engine output so the
/// stream is identical across standard library implementations.
float uniform_pm1(Rng& rng);

/// Unbiased integer in [0, n), n > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Splits the latent space Z = Z_I x Z_O.
struct LatentPartition {
  int total_dim = 100;
  int identity_dim = 50;

  int observation_dim() const { return total_dim - identity_dim; }

  /// Throws std::invalid_argument unless 0 < identity_dim < total_dim.
  static LatentPartition make(int total_dim, int identity_dim);
  void validate() const;

  bool operator==(const LatentPartition&) const = default;
};

struct LatentCode {
  std::vector<float> identity;
  std::vector<float> observation;

  /// Concatenation [z_I; z_O].
  std::vector<float> full() const;
  bool in_range() const;
  bool matches(const LatentPartition& p) const;

  bool operator==(const LatentCode&) const = default;
};

/// One identity vector shared by k >= 2 independently drawn observation vectors.
struct LatentGroup {
  std::vector<float> identity;
  std::vector<std::vector<float>> observations;

  int k() const { return static_cast<int>(observations.size()); }
};

enum class LerpAxis { identity, observation, both };

LerpAxis parse_lerp_axis(const std::string& s);
std::string to_string(LerpAxis axis);

/// Result of composing latent parts into full vectors. Codes recovered by
/// inversion may leave [-1, 1]; they are accepted and flagged.
struct Composition {
  std::vector<std::vector<float>> vectors;
  bool out_of_range = false;
};

LatentCode sample_code(const LatentPartition& partition, Rng& rng);

/// Throws std::invalid_argument if k < 2.
LatentGroup sample_group(const LatentPartition& partition, int k, Rng& rng);

Composition compose(const LatentGroup& group);
Composition compose(std::span<const LatentCode> codes);

/// Linear interpolation from a to b in `steps` points. Only the selected axis
/// moves; the other stays at a's value.
std::vector<LatentCode> lerp(const LatentCode& a, const LatentCode& b, int steps,
                             LerpAxis axis);

void to_json(nlohmann::json& j, const LatentCode& code);
void from_json(const nlohmann::json& j, LatentCode& code);

}  // namespace sdgan
