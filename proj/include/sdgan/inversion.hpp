#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>
#include <torch/torch.h>

#include "sdgan/latent.hpp"
#include "sdgan/nets.hpp"

namespace sdgan {

struct InversionOptions {
  int steps = 1000;
  int restarts = 4;
  double lr = 0.05;  // Adam step size
  double target_loss = 1e-2;  // per-pixel MSE counted as converged
  std::uint64_t seed = 0;
};

struct InversionResult {
  LatentCode z_hat;
  double final_loss = 0.0;  // per-pixel MSE of G(z_hat) against the target
  int iterations_used = 0;
  bool converged = false;
  bool out_of_range = false;  // z_hat left [-1, 1]
  std::vector<double> best_so_far;  // winning restart, one entry per step
};

void to_json(nlohmann::json& j, const InversionResult& r);

/// Minimizes ||G(z) - x||^2 from `restarts` uniform starts with Adam, keeping
/// each restart's best iterate and returning the best overall. x is (3, R, R)
/// in [-1, 1]. The generator is run in eval mode and its parameters are never
/// written. A restart whose objective turns non-finite is abandoned; if all
/// are abandoned std::runtime_error is thrown.
InversionResult invert(GeneratorNet& generator, const torch::Tensor& x, const LatentPartition& partition,
                       const InversionOptions& options = {});

/// (rows, cols, 3, R, R): cell (r, c) renders [identities[r]; observations[c]].
torch::Tensor render_grid(GeneratorNet& generator, const std::vector<std::vector<float>>& identities,
                          const std::vector<std::vector<float>>& observations);

/// Random rows x cols grid: each row shares one z_I, each column one z_O.
torch::Tensor random_grid(GeneratorNet& generator, const LatentPartition& partition, int rows, int cols,
                          std::uint64_t seed);

/// Row r takes z_I from lerp(a, b, rows) and column c z_O from lerp(a, b, cols).
/// Throws std::invalid_argument if rows or cols < 2.
torch::Tensor interpolation_grid(GeneratorNet& generator, const LatentCode& a, const LatentCode& b, int rows,
                                 int cols);
torch::Tensor interpolation_grid(GeneratorNet& generator, const InversionResult& a, const InversionResult& b,
                                 int rows, int cols);

}  // namespace sdgan
