#include "sdgan/inversion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sdgan/metrics.hpp"

namespace sdgan {

using torch::Tensor;

void to_json(nlohmann::json& j, const InversionResult& r) {
  j = nlohmann::json{{"z_hat", r.z_hat},
                     {"final_loss", r.final_loss},
                     {"iterations_used", r.iterations_used},
                     {"converged", r.converged},
                     {"out_of_range", r.out_of_range}};
}

namespace {

LatentCode split_code(const Tensor& z, const LatentPartition& p) {
  auto c = z.to(torch::kFloat32).contiguous();
  const float* v = c.data_ptr<float>();
  LatentCode code;
  code.identity.assign(v, v + p.identity_dim);
  code.observation.assign(v + p.identity_dim, v + p.total_dim);
  return code;
}

}  // namespace

InversionResult invert(GeneratorNet& generator, const Tensor& x, const LatentPartition& partition,
                       const InversionOptions& options) {
  partition.validate();
  const int R = generator.resolution();
  if (x.dim() != 3 || x.size(0) != 3 || x.size(1) != R || x.size(2) != R) {
    throw std::invalid_argument("target must be (3, " + std::to_string(R) + ", " + std::to_string(R) + ")");
  }
  if (generator.latent_dim() != partition.total_dim) throw std::invalid_argument("partition does not fit generator");
  if (options.restarts < 1) throw std::invalid_argument("restarts must be positive");
  if (options.steps < 0) throw std::invalid_argument("steps must be non-negative");

  const bool was_training = generator.is_training();
  generator.eval();
  const int n = options.restarts;
  const auto T = partition.total_dim;

  Rng rng(options.seed);
  auto init = torch::empty({n, T});
  {
    auto acc = init.accessor<float, 2>();
    for (int r = 0; r < n; ++r) {
      for (int d = 0; d < T; ++d) acc[r][d] = uniform_pm1(rng);
    }
  }
  auto target = x.to(torch::kFloat32).unsqueeze(0).expand({n, 3, R, R});
  auto per_restart = [&](const Tensor& z) { return (generator.forward(z) - target).pow(2).mean({1, 2, 3}); };

  auto z = init.clone().set_requires_grad(true);
  torch::optim::Adam opt({z}, torch::optim::AdamOptions(options.lr));
  auto best_z = init.clone();
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  std::vector<std::vector<double>> history(static_cast<std::size_t>(n));

  auto track = [&](const Tensor& losses, const Tensor& at) {
    auto l = losses.detach().to(torch::kFloat64).contiguous();
    for (int r = 0; r < n; ++r) {
      const double v = l.data_ptr<double>()[r];
      if (!std::isfinite(v)) alive[static_cast<std::size_t>(r)] = false;
      if (alive[static_cast<std::size_t>(r)] && v < best[static_cast<std::size_t>(r)]) {
        best[static_cast<std::size_t>(r)] = v;
        best_z[r].copy_(at[r]);
      }
      history[static_cast<std::size_t>(r)].push_back(best[static_cast<std::size_t>(r)]);
    }
  };

  {
    torch::NoGradGuard no_grad;
    track(per_restart(init), init);
  }
  int used = 0;
  for (int step = 0; step < options.steps; ++step) {
    auto losses = per_restart(z);
    // Only live restarts contribute, so a diverged row cannot poison Adam's step for the others.
    auto mask = torch::tensor(std::vector<float>(alive.begin(), alive.end()));
    auto total = (torch::where(mask > 0, losses, torch::zeros_like(losses))).sum();
    auto grad = torch::autograd::grad({total}, {z})[0];
    {
      torch::NoGradGuard no_grad;
      z.mutable_grad() = torch::where(mask.unsqueeze(1) > 0, grad, torch::zeros_like(grad));
    }
    opt.step();
    ++used;
    torch::NoGradGuard no_grad;
    auto zc = z.detach().clone();
    track(per_restart(zc), zc);
    if (std::none_of(alive.begin(), alive.end(), [](bool a) { return a; })) break;
  }
  if (was_training) generator.train();

  int winner = -1;
  for (int r = 0; r < n; ++r) {
    if (std::isfinite(best[static_cast<std::size_t>(r)]) &&
        (winner < 0 || best[static_cast<std::size_t>(r)] < best[static_cast<std::size_t>(winner)])) {
      winner = r;
    }
  }
  if (winner < 0) throw std::runtime_error("inversion objective was non-finite for every restart");

  InversionResult out;
  out.z_hat = split_code(best_z[winner], partition);
  out.final_loss = best[static_cast<std::size_t>(winner)];
  out.iterations_used = used;
  out.converged = used > 0 && out.final_loss <= options.target_loss;
  out.out_of_range = !out.z_hat.in_range();
  out.best_so_far.assign(history[static_cast<std::size_t>(winner)].begin() + 1,
                         history[static_cast<std::size_t>(winner)].end());
  return out;
}

Tensor render_grid(GeneratorNet& generator, const std::vector<std::vector<float>>& identities,
                   const std::vector<std::vector<float>>& observations) {
  if (identities.empty() || observations.empty()) throw std::invalid_argument("grid needs at least one row and column");
  const auto rows = static_cast<std::int64_t>(identities.size());
  const auto cols = static_cast<std::int64_t>(observations.size());
  const auto di = static_cast<std::int64_t>(identities.front().size());
  const auto dobs = static_cast<std::int64_t>(observations.front().size());
  if (di + dobs != generator.latent_dim()) throw std::invalid_argument("grid codes do not fit the generator");
  auto codes = torch::empty({rows * cols, di + dobs});
  auto acc = codes.accessor<float, 2>();
  for (std::int64_t r = 0; r < rows; ++r) {
    if (static_cast<std::int64_t>(identities[r].size()) != di) throw std::invalid_argument("ragged identity codes");
    for (std::int64_t c = 0; c < cols; ++c) {
      if (static_cast<std::int64_t>(observations[c].size()) != dobs) {
        throw std::invalid_argument("ragged observation codes");
      }
      for (std::int64_t d = 0; d < di; ++d) acc[r * cols + c][d] = identities[r][d];
      for (std::int64_t d = 0; d < dobs; ++d) acc[r * cols + c][di + d] = observations[c][d];
    }
  }
  auto images = generate_images(generator, codes);
  return images.reshape({rows, cols, 3, images.size(2), images.size(3)});
}

Tensor random_grid(GeneratorNet& generator, const LatentPartition& partition, int rows, int cols,
                   std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("rows and cols must be positive");
  Rng rng(seed);
  std::vector<std::vector<float>> ids, obs;
  for (int r = 0; r < rows; ++r) ids.push_back(sample_code(partition, rng).identity);
  for (int c = 0; c < cols; ++c) obs.push_back(sample_code(partition, rng).observation);
  return render_grid(generator, ids, obs);
}

Tensor interpolation_grid(GeneratorNet& generator, const LatentCode& a, const LatentCode& b, int rows, int cols) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("interpolation grid needs rows, cols >= 2");
  std::vector<std::vector<float>> ids, obs;
  for (auto& code : lerp(a, b, rows, LerpAxis::identity)) ids.push_back(std::move(code.identity));
  for (auto& code : lerp(a, b, cols, LerpAxis::observation)) obs.push_back(std::move(code.observation));
  return render_grid(generator, ids, obs);
}

Tensor interpolation_grid(GeneratorNet& generator, const InversionResult& a, const InversionResult& b, int rows,
                          int cols) {
  return interpolation_grid(generator, a.z_hat, b.z_hat, rows, cols);
}

}  // namespace sdgan
