#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "sdgan/nets.hpp"
#include "sdgan/train.hpp"

namespace sdgan {

/// A checkpoint directory: `manifest.json` plus one serialized archive per
/// network (`generator.pt`, `discriminator.pt`) and per optimizer.
struct Checkpoint {
  std::filesystem::path dir;
  ModelConfig model;
  OptimConfig optim;
  std::int64_t iteration = 0;
  std::uint64_t seed = 0;
  double k_t = 0.0;
  std::string rng_state;
  nlohmann::json loss_summary = nlohmann::json::object();

  /// Stable identifier for the service: the directory name.
  std::string id() const;
};

/// Writes every file to a temporary name inside `dir` and renames it into
/// place, so readers never observe a half-written archive.
void save_checkpoint(const Checkpoint& meta, Players& players);

/// Reads manifest.json; throws std::runtime_error when missing or malformed.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Rebuilds the generator and loads its weights; the network is left in eval mode.
std::shared_ptr<GeneratorNet> load_generator(const Checkpoint& ckpt);
std::shared_ptr<DiscriminatorNet> load_discriminator(const Checkpoint& ckpt);

/// Restores both networks and optimizer moments for resuming training.
Players load_players(const Checkpoint& ckpt);

}  // namespace sdgan
