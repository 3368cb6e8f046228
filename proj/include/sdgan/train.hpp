#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>
#include <torch/torch.h>

#include "sdgan/data.hpp"
#include "sdgan/glyphs.hpp"
#include "sdgan/latent.hpp"
#include "sdgan/nets.hpp"

namespace sdgan {

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OptimAlgorithm { adam, rmsprop };

struct OptimConfig {
  OptimAlgorithm algorithm = OptimAlgorithm::adam;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double gamma = 0.5;      // BEGAN diversity ratio
  double lambda_k = 1e-3;  // BEGAN control gain
  double k0 = 0.0;
  int batch_tuples = 16;
  std::int64_t total_iterations = 10000;
  double clip = 0.01;         // WGAN weight clipping
  int critic_iterations = 5;  // WGAN critic updates per generator update
  bool minimax_generator = false;

  /// Adam 2e-4/0.5/0.999 for gan, Adam 1e-3/0.9/0.999 for began, RMSprop 5e-5 for wgan.
  static OptimConfig defaults_for(LossKind loss);
};

void to_json(nlohmann::json& j, const OptimConfig& c);
/// Missing keys fall back to defaults_for(loss).
OptimConfig optim_from_json(const nlohmann::json& j, LossKind loss);

/// A minibatch of image tuples. Images are (m, k, 3, R, R).
struct PairBatch {
  enum class Source { real, generated };

  torch::Tensor images;
  std::vector<int> labels;  // 1 real, 0 fake, per tuple
  Source source = Source::real;
  torch::Tensor latents;                 // generated: (m, k, total_dim)
  std::vector<RealTuple> tuples;         // real: provenance of every image
  torch::Tensor identity_labels;         // (m) int64 class index (real record / AC conditioning)

  std::int64_t size() const { return images.size(0); }
};

/// (m, k, total_dim) codes: one fresh z_I per tuple, k fresh z_O each.
torch::Tensor latent_tuples(const LatentPartition& partition, int k, int m, Rng& rng);

/// m generated tuples, label 0. Gradients are tracked only when requested.
PairBatch assemble_fake_batch(GeneratorNet& generator, const LatentPartition& partition, int k, int m, Rng& rng,
                              bool track_grad = false);

/// m real tuples of k distinct same-identity images, label 1.
PairBatch assemble_real_batch(const IdentityDataset& dataset, int k, int m, Rng& rng);

// --- Loss arithmetic --------------------------------------------------------

/// -(log D(x) + log(1 - D(G(z)))) for scalar probabilities.
double gan_discriminator_loss(double d_real, double d_fake);
/// Non-saturating -log D(G(z)), or log(1 - D(G(z))) for the strict minimax form.
double gan_generator_loss(double d_fake, bool minimax);
torch::Tensor gan_discriminator_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);
torch::Tensor gan_generator_loss(const torch::Tensor& fake_logits, bool minimax);

/// Mean cross-entropy of identity predictions. Throws std::invalid_argument for
/// labels outside [0, num_classes).
torch::Tensor auxiliary_loss(const torch::Tensor& class_logits, const torch::Tensor& labels);

/// Mean absolute reconstruction error.
torch::Tensor reconstruction_loss(const torch::Tensor& images, const torch::Tensor& reconstruction);

/// clamp(k + lambda_k * (gamma * L(real) - L(fake)), 0, 1).
double began_k_update(double k_t, double gamma, double lambda_k, double l_real, double l_fake);
/// L(real) + |gamma * L(real) - L(fake)|.
double began_convergence(double gamma, double l_real, double l_fake);

// --- Training state and steps ----------------------------------------------

struct StepLosses {
  std::int64_t iteration = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double k_t = 0.0;
  double convergence = 0.0;
};

struct TrainState {
  std::int64_t iteration = 0;
  double k_t = 0.0;
  Rng rng;
  std::deque<StepLosses> history;
  std::size_t history_capacity = 1000;

  void record(const StepLosses& s);
};

struct Players {
  std::shared_ptr<GeneratorNet> generator;
  std::shared_ptr<DiscriminatorNet> discriminator;
  std::unique_ptr<torch::optim::Optimizer> generator_opt;
  std::unique_ptr<torch::optim::Optimizer> discriminator_opt;
};

std::unique_ptr<torch::optim::Optimizer> make_optimizer(const OptimConfig& c, std::vector<torch::Tensor> params);
Players make_players(std::shared_ptr<GeneratorNet> g, std::shared_ptr<DiscriminatorNet> d, const OptimConfig& c);

/// Where steps draw their minibatches from. Every call returns fresh samples.
struct BatchFeed {
  std::function<PairBatch()> real;
  std::function<torch::Tensor()> latents;  // (m, k, total_dim)
  /// AC-DCGAN conditioning: (labels (m) int64, observation codes (m, d_O)).
  std::function<std::pair<torch::Tensor, torch::Tensor>()> conditioning;
};

/// One discriminator ascent on V(G, D), then one generator update on a fresh
/// latent minibatch.
StepLosses gan_step(TrainState& state, Players& p, const BatchFeed& feed, const OptimConfig& c);

/// BEGAN update with proportional control of k_t toward the ratio gamma.
StepLosses began_step(TrainState& state, Players& p, const BatchFeed& feed, const OptimConfig& c);

/// c.critic_iterations critic updates with weight clipping, then one
/// generator update. loss_d is the negated critic gap of the last update.
StepLosses wgan_step(TrainState& state, Players& p, const BatchFeed& feed, const OptimConfig& c);

/// Adversarial terms plus identity cross-entropy for both players. With the
/// wgan loss the adversarial term is the clipped critic gap, as in wgan_step.
StepLosses acgan_step(TrainState& state, Players& p, const BatchFeed& feed, const OptimConfig& c,
                      LossKind loss = LossKind::gan);

/// Feed backed by a dataset and the state's random source.
BatchFeed dataset_feed(const IdentityDataset& dataset, const ModelConfig& model, int batch_tuples, TrainState& state);

// --- Driver ------------------------------------------------------------------

struct DatasetSource {
  std::optional<std::filesystem::path> path;  // ingest from <root>/<identity>/<images>
  std::optional<GlyphSpec> glyphs;            // or render procedurally
};

struct TrainConfig {
  ModelConfig model;
  OptimConfig optim;
  DatasetSource dataset;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "checkpoint";
  std::int64_t checkpoint_every = 1000;
};

/// Parses and validates a training config document.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);

IdentityDataset load_dataset(const DatasetSource& source, int resolution);

struct TrainCallbacks {
  std::function<void(const StepLosses&)> on_step;
  std::function<void(std::int64_t iteration)> on_checkpoint;
};

struct Checkpoint;

/// Runs total_iterations of the configured loss, writing `losses.csv` and a
/// checkpoint into config.output_dir every checkpoint_every iterations and at
/// the end.
Checkpoint train(const TrainConfig& config, const IdentityDataset& dataset, const TrainCallbacks& callbacks = {});

}  // namespace sdgan
