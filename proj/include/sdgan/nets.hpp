#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>
#include <torch/torch.h>

#include "sdgan/latent.hpp"

namespace sdgan {

enum class Family { sd_dcgan, sd_began, ac_dcgan };
enum class SiameseMode { siamese, stacked_channels };
enum class LossKind { gan, began, wgan };

std::string to_string(Family f);
std::string to_string(SiameseMode m);
std::string to_string(LossKind l);
Family parse_family(const std::string& s);
SiameseMode parse_siamese_mode(const std::string& s);
LossKind parse_loss(const std::string& s);

/// Full description of one model variant.
struct ModelConfig {
  Family family = Family::sd_dcgan;
  int k = 2;  // tuple size; AC-DCGAN is single-image and ignores it
  int identity_dim = 50;
  int total_dim = 100;
  int resolution = 64;
  SiameseMode siamese_mode = SiameseMode::siamese;
  LossKind loss = LossKind::gan;
  int num_identities = 0;  // AC-DCGAN only

  LatentPartition partition() const { return {total_dim, identity_dim}; }
  /// Images per discriminator example: k for SD families, 1 for AC-DCGAN.
  int tuple_size() const { return family == Family::ac_dcgan ? 1 : k; }
  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// One row of an architecture table. Shapes use the (batch, H, W, C) layout;
/// kernels are (kh, kw, in, out) for convolutions and (in, out) for FC layers.
struct LayerRow {
  std::string op;
  std::vector<std::int64_t> input;
  std::vector<std::int64_t> kernel;
  std::vector<std::int64_t> output;

  bool operator==(const LayerRow&) const = default;
};
using LayerTable = std::vector<LayerRow>;

std::string format_shape(const std::vector<std::int64_t>& shape);

/// Maps (N, total_dim) latent codes to (N, 3, R, R) images. The tuple axis is
/// folded into N.
class GeneratorNet : public torch::nn::Module {
 public:
  torch::Tensor forward(const torch::Tensor& z) { return run(z, nullptr); }
  /// Runs a k-image forward pass in eval mode and records every layer.
  LayerTable trace(int k);
  virtual int resolution() const = 0;
  virtual int latent_dim() const = 0;

 protected:
  virtual torch::Tensor run(const torch::Tensor& z, LayerTable* rows) = 0;
};

struct DiscriminatorOutput {
  torch::Tensor logits;          // (B) real/fake score before any sigmoid
  torch::Tensor reconstruction;  // (B, k, 3, R, R), autoencoder families only
  torch::Tensor class_logits;    // (B, num_identities), AC-DCGAN only
};

/// Scores (B, k, 3, R, R) image tuples.
class DiscriminatorNet : public torch::nn::Module {
 public:
  DiscriminatorOutput forward(const torch::Tensor& tuples) { return run(tuples, nullptr); }
  /// Runs one k-tuple through the network in eval mode and records every layer.
  LayerTable trace();
  virtual int tuple_size() const = 0;
  virtual int resolution() const = 0;

 protected:
  virtual DiscriminatorOutput run(const torch::Tensor& tuples, LayerTable* rows) = 0;
};

class DcganGenerator;
class BeganGenerator;

/// AC-DCGAN generator: a learned identity embedding row concatenated with z_O.
class AcGenerator : public GeneratorNet {
 public:
  AcGenerator(int num_identities, int identity_dim, int total_dim, int resolution);
  /// labels: (N) int64 identity indices; observations: (N, total_dim - identity_dim).
  torch::Tensor conditional(const torch::Tensor& labels, const torch::Tensor& observations);
  int resolution() const override;
  int latent_dim() const override;
  int num_identities() const { return num_identities_; }
  int identity_dim() const { return identity_dim_; }

 protected:
  torch::Tensor run(const torch::Tensor& z, LayerTable* rows) override;

 private:
  int num_identities_;
  int identity_dim_;
  torch::nn::Embedding embedding_{nullptr};
  std::shared_ptr<DcganGenerator> body_;
};

/// Throws std::invalid_argument for an invalid config or unsupported resolution.
std::shared_ptr<GeneratorNet> build_generator(const ModelConfig& config);
std::shared_ptr<DiscriminatorNet> build_discriminator(const ModelConfig& config);

/// Trainable parameters only; batch-norm running statistics are excluded.
std::int64_t parameter_count(const torch::nn::Module& net);
/// Combined size of both parameter sets as 32-bit floats.
std::int64_t parameter_footprint(const torch::nn::Module& generator, const torch::nn::Module& discriminator);

/// Order-sensitive SHA-256 over every parameter and, by default, every buffer
/// (batch-norm running statistics).
std::string parameter_hash(const torch::nn::Module& net, bool include_buffers = true);

/// Reference architecture tables for SD-DCGAN / SD-BEGAN at resolution 64 and
/// the 32x32 reduction (one fewer up/down-sampling stage).
LayerTable reference_generator_table(const ModelConfig& config);
LayerTable reference_discriminator_table(const ModelConfig& config);

struct RowCheck {
  enum class Status { pass, mismatch, missing, unexpected, extra };
  Status status = Status::pass;
  std::optional<LayerRow> expected;
  std::optional<LayerRow> actual;
};

struct ConformanceReport {
  std::vector<RowCheck> rows;

  bool passed() const;
  int failures() const;
  /// Shape-preserving activation / normalization rows present in the network
  /// but not in the reference table.
  int extras() const;
  std::string to_text() const;
};

/// Aligns the traced network rows against a reference table. Every reference
/// row must appear in order with identical shapes; additional rows are allowed
/// only when they are element-wise (input shape == output shape, no kernel).
ConformanceReport shape_conformance_report(const LayerTable& actual, const LayerTable& expected);

/// N(0, 0.02) conv/FC weights, zero biases, batch-norm scale 1 / offset 0.
void initialize_weights(torch::nn::Module& net);

}  // namespace sdgan
