#include "sdgan/nets.hpp"

#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace sdgan {

namespace nn = torch::nn;
using torch::Tensor;
using Shape = std::vector<std::int64_t>;

// ---------------------------------------------------------------------------
// Config

std::string to_string(Family f) {
  switch (f) {
    case Family::sd_dcgan: return "sd-dcgan";
    case Family::sd_began: return "sd-began";
    case Family::ac_dcgan: return "ac-dcgan";
  }
  return "sd-dcgan";
}

std::string to_string(SiameseMode m) {
  return m == SiameseMode::siamese ? "siamese" : "stacked_channels";
}

std::string to_string(LossKind l) {
  switch (l) {
    case LossKind::gan: return "gan";
    case LossKind::began: return "began";
    case LossKind::wgan: return "wgan";
  }
  return "gan";
}

Family parse_family(const std::string& s) {
  if (s == "sd-dcgan") return Family::sd_dcgan;
  if (s == "sd-began") return Family::sd_began;
  if (s == "ac-dcgan") return Family::ac_dcgan;
  throw std::invalid_argument("unknown model family '" + s + "'");
}

SiameseMode parse_siamese_mode(const std::string& s) {
  if (s == "siamese") return SiameseMode::siamese;
  if (s == "stacked_channels") return SiameseMode::stacked_channels;
  throw std::invalid_argument("unknown siamese_mode '" + s + "'");
}

LossKind parse_loss(const std::string& s) {
  if (s == "gan") return LossKind::gan;
  if (s == "began") return LossKind::began;
  if (s == "wgan") return LossKind::wgan;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

void ModelConfig::validate() const {
  partition().validate();
  if (resolution != 32 && resolution != 64) {
    throw std::invalid_argument("unsupported resolution " + std::to_string(resolution) + " (expected 32 or 64)");
  }
  if (family != Family::ac_dcgan && k < 2) {
    throw std::invalid_argument("siamese discriminators need k >= 2, got k=" + std::to_string(k));
  }
  if (siamese_mode == SiameseMode::stacked_channels && family != Family::sd_dcgan) {
    throw std::invalid_argument("stacked_channels is only defined for sd-dcgan");
  }
  if ((loss == LossKind::began) != (family == Family::sd_began)) {
    throw std::invalid_argument("loss 'began' goes with family sd-began and only with it");
  }
  if (family == Family::ac_dcgan) {
    if (num_identities < 1) throw std::invalid_argument("ac-dcgan needs num_identities >= 1");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"family", to_string(c.family)},
                     {"k", c.k},
                     {"d_i", c.identity_dim},
                     {"total_dim", c.total_dim},
                     {"resolution", c.resolution},
                     {"siamese_mode", to_string(c.siamese_mode)},
                     {"loss", to_string(c.loss)},
                     {"num_identities", c.num_identities}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  static const std::set<std::string> known{"family", "k", "d_i", "total_dim", "resolution",
                                           "siamese_mode", "loss", "num_identities"};
  if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("unknown model config key '" + key + "'");
  }
  c = ModelConfig{};
  c.family = parse_family(j.value("family", std::string("sd-dcgan")));
  c.k = j.value("k", 2);
  c.identity_dim = j.value("d_i", 50);
  c.total_dim = j.value("total_dim", 100);
  c.resolution = j.value("resolution", 64);
  c.siamese_mode = parse_siamese_mode(j.value("siamese_mode", std::string("siamese")));
  const std::string default_loss = c.family == Family::sd_began ? "began" : "gan";
  c.loss = parse_loss(j.value("loss", default_loss));
  c.num_identities = j.value("num_identities", 0);
}

std::string format_shape(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tracing helpers

namespace {

Shape nhwc(const Tensor& t) {
  auto s = t.sizes().vec();
  if (s.size() == 4) return {s[0], s[2], s[3], s[1]};
  return s;
}

Shape drop_batch(Shape s) {
  s.erase(s.begin());
  return s;
}

Shape conv_kernel(const nn::Conv2d& c) {
  const auto w = c->weight.sizes();
  return {w[2], w[3], w[1], w[0]};
}

Shape upconv_kernel(const nn::ConvTranspose2d& c) {
  const auto w = c->weight.sizes();
  return {w[2], w[3], w[0], w[1]};
}

Shape fc_kernel(const nn::Linear& l) {
  const auto w = l->weight.sizes();
  return {w[1], w[0]};
}

void record(LayerTable* rows, std::string op, Shape in, Shape kernel, Shape out) {
  if (rows) rows->push_back({std::move(op), std::move(in), std::move(kernel), std::move(out)});
}

void record(LayerTable* rows, std::string op, const Tensor& in, const Tensor& out, Shape kernel = {}) {
  if (rows) record(rows, std::move(op), nhwc(in), std::move(kernel), nhwc(out));
}

/// Post-tuple rows: the tensor carries a leading batch of one that the
/// reference tables omit.
void record_unbatched(LayerTable* rows, std::string op, const Tensor& in, const Tensor& out, Shape kernel = {}) {
  if (rows) record(rows, std::move(op), drop_batch(nhwc(in)), std::move(kernel), drop_batch(nhwc(out)));
}

Tensor lrelu(const Tensor& x) { return torch::leaky_relu(x, 0.2); }

Tensor upsample2(const Tensor& x) {
  return nn::functional::interpolate(
      x, nn::functional::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
}

struct ConvSpec {
  std::string name;
  int in, out;
  bool batch_norm;
};

}  // namespace

// ---------------------------------------------------------------------------
// DCGAN blocks

class DcganGenerator : public GeneratorNet {
 public:
  DcganGenerator(int total_dim, int resolution) : total_dim_(total_dim), resolution_(resolution) {
    fc1_ = register_module("fc1", nn::Linear(total_dim, 4 * 4 * 512));
    bn0_ = register_module("bn0", nn::BatchNorm2d(512));
    std::vector<ConvSpec> stages{{"upconv1", 512, 256, true}, {"upconv2", 256, 128, true},
                                 {"upconv3", 128, 64, true}, {"upconv4", 64, 3, false}};
    if (resolution == 32) {
      // Drop the 128->64 stage; the output layer reads 128 channels.
      stages = {{"upconv1", 512, 256, true}, {"upconv2", 256, 128, true}, {"upconv4", 128, 3, false}};
    }
    for (const auto& s : stages) {
      names_.push_back(s.name);
      convs_.push_back(register_module(
          s.name, nn::ConvTranspose2d(nn::ConvTranspose2dOptions(s.in, s.out, 5).stride(2).padding(2).output_padding(1))));
      bns_.push_back(s.batch_norm ? register_module(s.name + "_bn", nn::BatchNorm2d(s.out)) : nn::BatchNorm2d(nullptr));
    }
  }

  int resolution() const override { return resolution_; }
  int latent_dim() const override { return total_dim_; }

 protected:
  Tensor run(const Tensor& z, LayerTable* rows) override {
    record(rows, "z", z, z);
    auto x = fc1_(z);
    record(rows, "fc1", z, x, fc_kernel(fc1_));
    auto y = x.view({-1, 512, 4, 4});
    record(rows, "reshape", x, y);
    x = bn0_(y);
    record(rows, "bnorm", y, x);
    y = torch::relu(x);
    record(rows, "relu", x, y);
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      x = convs_[i](y);
      record(rows, names_[i], y, x, upconv_kernel(convs_[i]));
      if (bns_[i]) {
        y = bns_[i](x);
        record(rows, "bnorm", x, y);
        x = torch::relu(y);
        record(rows, "relu", y, x);
      } else {
        x = torch::tanh(x);
        record(rows, "tanh", x, x);
      }
      y = x;
    }
    return y;
  }

 private:
  int total_dim_;
  int resolution_;
  nn::Linear fc1_{nullptr};
  nn::BatchNorm2d bn0_{nullptr};
  std::vector<std::string> names_;
  std::vector<nn::ConvTranspose2d> convs_;
  std::vector<nn::BatchNorm2d> bns_;
};

/// Per-image DCGAN encoder producing (N, 512, 4, 4).
class DcganEncoder : public nn::Module {
 public:
  DcganEncoder(int in_channels, int resolution) {
    std::vector<ConvSpec> stages{{"downconv1", in_channels, 64, false},
                                 {"downconv2", 64, 128, true},
                                 {"downconv3", 128, 256, true},
                                 {"downconv4", 256, 512, true}};
    if (resolution == 32) {
      // Drop the first downsampling stage; downconv2 reads the image directly.
      stages = {{"downconv2", in_channels, 128, true}, {"downconv3", 128, 256, true}, {"downconv4", 256, 512, true}};
    }
    for (const auto& s : stages) {
      names_.push_back(s.name);
      convs_.push_back(register_module(s.name, nn::Conv2d(nn::Conv2dOptions(s.in, s.out, 5).stride(2).padding(2))));
      bns_.push_back(s.batch_norm ? register_module(s.name + "_bn", nn::BatchNorm2d(s.out)) : nn::BatchNorm2d(nullptr));
    }
  }

  Tensor run(Tensor x, LayerTable* rows) {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      auto y = convs_[i](x);
      record(rows, names_[i], x, y, conv_kernel(convs_[i]));
      if (bns_[i]) {
        x = bns_[i](y);
        record(rows, "bnorm", y, x);
        y = x;
      }
      x = lrelu(y);
      record(rows, "lrelu", y, x);
    }
    return x;
  }

 private:
  std::vector<std::string> names_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::BatchNorm2d> bns_;
};

class SiameseDcganDiscriminator : public DiscriminatorNet {
 public:
  explicit SiameseDcganDiscriminator(const ModelConfig& c)
      : k_(c.k), resolution_(c.resolution), stacked_(c.siamese_mode == SiameseMode::stacked_channels),
        sigmoid_(c.loss != LossKind::wgan) {
    encoder_ = register_module("encoder", std::make_shared<DcganEncoder>(stacked_ ? 3 * k_ : 3, resolution_));
    const int stacked_channels = stacked_ ? 512 : 512 * k_;
    downconv5_ = register_module(
        "downconv5", nn::Conv2d(nn::Conv2dOptions(stacked_channels, 512, 3).stride(2).padding(1)));
    fc1_ = register_module("fc1", nn::Linear(2048, 1));
  }

  int tuple_size() const override { return k_; }
  int resolution() const override { return resolution_; }

 protected:
  DiscriminatorOutput run(const Tensor& tuples, LayerTable* rows) override {
    const auto b = tuples.size(0);
    const auto r = tuples.size(-1);
    Tensor x = stacked_ ? tuples.reshape({b, 3 * k_, r, r}) : tuples.reshape({b * k_, 3, r, r});
    record(rows, "x", x, x);
    auto f = encoder_->run(x, rows);
    auto s = f.reshape({b, stacked_ ? 512 : 512 * k_, 4, 4});
    if (rows) record(rows, "stackchannels", nhwc(f), {}, drop_batch(nhwc(s)));
    auto h = downconv5_(s);
    record_unbatched(rows, "downconv5", s, h, conv_kernel(downconv5_));
    auto a = lrelu(h);
    record_unbatched(rows, "lrelu", h, a);
    auto flat = a.flatten(1);
    record_unbatched(rows, "flatten", a, flat);
    auto logit = fc1_(flat);
    record_unbatched(rows, "fc1", flat, logit, fc_kernel(fc1_));
    if (rows && sigmoid_) record_unbatched(rows, "sigmoid", logit, logit);
    return {logit.squeeze(1), {}, {}};
  }

 private:
  int k_;
  int resolution_;
  bool stacked_;
  bool sigmoid_;
  std::shared_ptr<DcganEncoder> encoder_;
  nn::Conv2d downconv5_{nullptr};
  nn::Linear fc1_{nullptr};
};

class AcDcganDiscriminator : public DiscriminatorNet {
 public:
  explicit AcDcganDiscriminator(const ModelConfig& c) : resolution_(c.resolution) {
    encoder_ = register_module("encoder", std::make_shared<DcganEncoder>(3, resolution_));
    downconv5_ = register_module("downconv5", nn::Conv2d(nn::Conv2dOptions(512, 512, 3).stride(2).padding(1)));
    fc_real_ = register_module("fc_real", nn::Linear(2048, 1));
    fc_class_ = register_module("fc_class", nn::Linear(2048, c.num_identities));
  }

  int tuple_size() const override { return 1; }
  int resolution() const override { return resolution_; }

 protected:
  DiscriminatorOutput run(const Tensor& tuples, LayerTable* rows) override {
    const auto r = tuples.size(-1);
    auto x = tuples.reshape({-1, 3, r, r});
    record(rows, "x", x, x);
    auto f = encoder_->run(x, rows);
    auto h = downconv5_(f);
    record(rows, "downconv5", f, h, conv_kernel(downconv5_));
    auto a = lrelu(h);
    record(rows, "lrelu", h, a);
    auto flat = a.flatten(1);
    record(rows, "flatten", a, flat);
    auto logit = fc_real_(flat);
    record(rows, "fc_real", flat, logit, fc_kernel(fc_real_));
    auto cls = fc_class_(flat);
    record(rows, "fc_class", flat, cls, fc_kernel(fc_class_));
    return {logit.squeeze(1), {}, cls};
  }

 private:
  int resolution_;
  std::shared_ptr<DcganEncoder> encoder_;
  nn::Conv2d downconv5_{nullptr};
  nn::Linear fc_real_{nullptr};
  nn::Linear fc_class_{nullptr};
};

// ---------------------------------------------------------------------------
// BEGAN blocks

class BeganGenerator : public GeneratorNet {
 public:
  BeganGenerator(int total_dim, int resolution) : total_dim_(total_dim), resolution_(resolution) {
    fc1_ = register_module("fc1", nn::Linear(total_dim, 8 * 8 * 128));
    const int stages = resolution == 64 ? 4 : 3;  // conv pairs; upsampling between them
    for (int s = 0; s < stages; ++s) {
      for (int j = 0; j < 2; ++j) {
        convs_.push_back(register_module("conv" + std::to_string(convs_.size() + 1),
                                         nn::Conv2d(nn::Conv2dOptions(128, 128, 3).padding(1))));
      }
    }
    out_ = register_module("out", nn::Conv2d(nn::Conv2dOptions(128, 3, 3).padding(1)));
  }

  int resolution() const override { return resolution_; }
  int latent_dim() const override { return total_dim_; }

 protected:
  Tensor run(const Tensor& z, LayerTable* rows) override {
    record(rows, "z", z, z);
    auto x = fc1_(z);
    record(rows, "fc1", z, x, fc_kernel(fc1_));
    auto y = x.view({-1, 128, 8, 8});
    record(rows, "reshape", x, y);
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      x = convs_[i](y);
      record(rows, "conv2d", y, x, conv_kernel(convs_[i]));
      y = torch::elu(x);
      record(rows, "elu", x, y);
      if (i % 2 == 1 && i + 1 < convs_.size()) {
        x = upsample2(y);
        record(rows, "upsample2", y, x);
        y = x;
      }
    }
    x = out_(y);
    record(rows, "conv2d", y, x, conv_kernel(out_));
    return x;
  }

 private:
  int total_dim_;
  int resolution_;
  nn::Linear fc1_{nullptr};
  std::vector<nn::Conv2d> convs_;
  nn::Conv2d out_{nullptr};
};

/// BEGAN encoder trunk producing (N, 512, 8, 8).
class BeganEncoder : public nn::Module {
 public:
  explicit BeganEncoder(int resolution) {
    add("conv2d", 3, 128, 1);
    add("conv2d", 128, 128, 1);
    add("conv2d", 128, 128, 1);
    if (resolution == 64) {
      add("downconv2d", 128, 256, 2);
      add("conv2d", 256, 256, 1);
      add("conv2d", 256, 256, 1);
      add("downconv2d", 256, 384, 2);
    } else {
      // Drop the 128->256 stage; the next downsampling reads 128 channels.
      add("downconv2d", 128, 384, 2);
    }
    add("conv2d", 384, 384, 1);
    add("conv2d", 384, 384, 1);
    add("downconv2d", 384, 512, 2);
    add("conv2d", 512, 512, 1);
    add("conv2d", 512, 512, 1);
  }

  Tensor run(Tensor x, LayerTable* rows) {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      auto y = convs_[i](x);
      record(rows, ops_[i], x, y, conv_kernel(convs_[i]));
      x = torch::elu(y);
      record(rows, "elu", y, x);
    }
    return x;
  }

 private:
  void add(const std::string& op, int in, int out, int stride) {
    ops_.push_back(op);
    convs_.push_back(register_module("conv" + std::to_string(convs_.size() + 1),
                                     nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1))));
  }

  std::vector<std::string> ops_;
  std::vector<nn::Conv2d> convs_;
};

class SdBeganDiscriminator : public DiscriminatorNet {
 public:
  explicit SdBeganDiscriminator(const ModelConfig& c)
      : k_(c.k), resolution_(c.resolution), code_dim_(c.total_dim) {
    const int bottleneck = c.identity_dim + (c.total_dim - c.identity_dim) * c.k;
    encoder_ = register_module("encoder", std::make_shared<BeganEncoder>(resolution_));
    fc1_ = register_module("fc1", nn::Linear(8 * 8 * 512, code_dim_));
    fc2_ = register_module("fc2", nn::Linear(code_dim_ * k_, bottleneck));
    fc3_ = register_module("fc3", nn::Linear(bottleneck, code_dim_ * k_));
    for (int j = 0; j < k_; ++j) {
      decoders_.push_back(
          register_module("decoder" + std::to_string(j + 1), std::make_shared<BeganGenerator>(code_dim_, resolution_)));
    }
  }

  int tuple_size() const override { return k_; }
  int resolution() const override { return resolution_; }
  int bottleneck_dim() const { return static_cast<int>(fc2_->weight.size(0)); }

 protected:
  DiscriminatorOutput run(const Tensor& tuples, LayerTable* rows) override {
    const auto b = tuples.size(0);
    const auto r = tuples.size(-1);
    auto x = tuples.reshape({b * k_, 3, r, r});
    record(rows, "x", x, x);
    auto f = encoder_->run(x, rows);
    auto flat = f.flatten(1);
    record(rows, "flatten", f, flat);
    auto code = fc1_(flat);
    record(rows, "fc1", flat, code, fc_kernel(fc1_));
    auto joint = code.reshape({b, k_ * code_dim_});
    if (rows) record(rows, "concat", nhwc(code), {}, drop_batch(nhwc(joint)));
    auto bott = fc2_(joint);
    record_unbatched(rows, "fc2", joint, bott, fc_kernel(fc2_));
    auto expanded = fc3_(bott);
    record_unbatched(rows, "fc3", bott, expanded, fc_kernel(fc3_));
    auto codes = expanded.reshape({b, k_, code_dim_});
    record_unbatched(rows, "split", expanded, codes);
    std::vector<Tensor> outs;
    for (int j = 0; j < k_; ++j) outs.push_back(decoders_[static_cast<std::size_t>(j)]->forward(codes.select(1, j)));
    auto recon = torch::stack(outs, 1);
    if (rows) record(rows, "G", {k_, code_dim_}, {}, {k_, r, r, 3});
    auto err = (recon - tuples).abs().mean(Shape{1, 2, 3, 4});
    return {-err, recon, {}};
  }

 private:
  int k_;
  int resolution_;
  int code_dim_;
  std::shared_ptr<BeganEncoder> encoder_;
  nn::Linear fc1_{nullptr}, fc2_{nullptr}, fc3_{nullptr};
  std::vector<std::shared_ptr<BeganGenerator>> decoders_;
};

// ---------------------------------------------------------------------------
// AC generator

AcGenerator::AcGenerator(int num_identities, int identity_dim, int total_dim, int resolution)
    : num_identities_(num_identities), identity_dim_(identity_dim) {
  embedding_ = register_module("embedding", nn::Embedding(num_identities, identity_dim));
  body_ = register_module("body", std::make_shared<DcganGenerator>(total_dim, resolution));
}

int AcGenerator::resolution() const { return body_->resolution(); }
int AcGenerator::latent_dim() const { return body_->latent_dim(); }

Tensor AcGenerator::conditional(const Tensor& labels, const Tensor& observations) {
  return forward(torch::cat({embedding_(labels), observations}, 1));
}

Tensor AcGenerator::run(const Tensor& z, LayerTable* rows) {
  if (rows) {
    // Embedding lookup precedes the body; z already carries the looked-up row.
    rows->push_back({"embedding", {num_identities_}, {num_identities_, identity_dim_}, {identity_dim_}});
  }
  return body_->forward(z);
}

// ---------------------------------------------------------------------------
// Tracing, building, accounting

namespace {

struct EvalScope {
  explicit EvalScope(nn::Module& m) : module(m), was_training(m.is_training()) { module.eval(); }
  ~EvalScope() { module.train(was_training); }
  nn::Module& module;
  bool was_training;
};

}  // namespace

LayerTable GeneratorNet::trace(int k) {
  EvalScope scope(*this);
  torch::NoGradGuard no_grad;
  LayerTable rows;
  run(torch::zeros({k, latent_dim()}), &rows);
  return rows;
}

LayerTable DiscriminatorNet::trace() {
  EvalScope scope(*this);
  torch::NoGradGuard no_grad;
  LayerTable rows;
  run(torch::zeros({1, tuple_size(), 3, resolution(), resolution()}), &rows);
  return rows;
}

void initialize_weights(nn::Module& net) {
  torch::NoGradGuard no_grad;
  for (auto& m : net.modules(/*include_self=*/true)) {
    if (auto* conv = m->as<nn::Conv2d>()) {
      conv->weight.normal_(0.0, 0.02);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* up = m->as<nn::ConvTranspose2d>()) {
      up->weight.normal_(0.0, 0.02);
      if (up->bias.defined()) up->bias.zero_();
    } else if (auto* fc = m->as<nn::Linear>()) {
      fc->weight.normal_(0.0, 0.02);
      if (fc->bias.defined()) fc->bias.zero_();
    } else if (auto* bn = m->as<nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
    } else if (auto* emb = m->as<nn::Embedding>()) {
      emb->weight.uniform_(-1.0, 1.0);
    }
  }
}

std::shared_ptr<GeneratorNet> build_generator(const ModelConfig& c) {
  c.validate();
  std::shared_ptr<GeneratorNet> g;
  switch (c.family) {
    case Family::sd_dcgan: g = std::make_shared<DcganGenerator>(c.total_dim, c.resolution); break;
    case Family::sd_began: g = std::make_shared<BeganGenerator>(c.total_dim, c.resolution); break;
    case Family::ac_dcgan:
      g = std::make_shared<AcGenerator>(c.num_identities, c.identity_dim, c.total_dim, c.resolution);
      break;
  }
  initialize_weights(*g);
  return g;
}

std::shared_ptr<DiscriminatorNet> build_discriminator(const ModelConfig& c) {
  c.validate();
  std::shared_ptr<DiscriminatorNet> d;
  switch (c.family) {
    case Family::sd_dcgan: d = std::make_shared<SiameseDcganDiscriminator>(c); break;
    case Family::sd_began: d = std::make_shared<SdBeganDiscriminator>(c); break;
    case Family::ac_dcgan: d = std::make_shared<AcDcganDiscriminator>(c); break;
  }
  initialize_weights(*d);
  return d;
}

std::int64_t parameter_count(const nn::Module& net) {
  std::int64_t n = 0;
  for (const auto& p : net.parameters()) n += p.numel();
  return n;
}

std::int64_t parameter_footprint(const nn::Module& generator, const nn::Module& discriminator) {
  return (parameter_count(generator) + parameter_count(discriminator)) * 4;
}

std::string parameter_hash(const nn::Module& net, bool include_buffers) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  auto feed = [&](const std::string& name, const Tensor& t) {
    EVP_DigestUpdate(ctx, name.data(), name.size());
    auto c = t.detach().to(torch::kCPU).contiguous();
    EVP_DigestUpdate(ctx, c.data_ptr(), static_cast<std::size_t>(c.numel()) * c.element_size());
  };
  for (const auto& p : net.named_parameters()) feed(p.key(), p.value());
  if (include_buffers) {
    for (const auto& b : net.named_buffers()) feed(b.key(), b.value());
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

// ---------------------------------------------------------------------------
// Conformance

namespace {

bool elementwise(const LayerRow& r) { return r.kernel.empty() && r.input == r.output; }

}  // namespace

bool ConformanceReport::passed() const { return failures() == 0; }

int ConformanceReport::failures() const {
  int n = 0;
  for (const auto& r : rows) {
    if (r.status != RowCheck::Status::pass && r.status != RowCheck::Status::extra) ++n;
  }
  return n;
}

int ConformanceReport::extras() const {
  int n = 0;
  for (const auto& r : rows) n += r.status == RowCheck::Status::extra ? 1 : 0;
  return n;
}

std::string ConformanceReport::to_text() const {
  std::ostringstream os;
  auto fmt = [](const std::optional<LayerRow>& r) {
    if (!r) return std::string("-");
    return r->op + " " + format_shape(r->input) + " k" + format_shape(r->kernel) + " -> " + format_shape(r->output);
  };
  for (const auto& r : rows) {
    const char* tag = "PASS";
    switch (r.status) {
      case RowCheck::Status::pass: tag = "PASS"; break;
      case RowCheck::Status::mismatch: tag = "MISMATCH"; break;
      case RowCheck::Status::missing: tag = "MISSING"; break;
      case RowCheck::Status::unexpected: tag = "UNEXPECTED"; break;
      case RowCheck::Status::extra: tag = "EXTRA"; break;
    }
    os << std::left << std::setw(11) << tag << fmt(r.expected) << "  |  " << fmt(r.actual) << '\n';
  }
  return os.str();
}

ConformanceReport shape_conformance_report(const LayerTable& actual, const LayerTable& expected) {
  ConformanceReport report;
  std::size_t j = 0;
  for (const auto& want : expected) {
    while (j < actual.size() && actual[j].op != want.op && elementwise(actual[j])) {
      report.rows.push_back({RowCheck::Status::extra, std::nullopt, actual[j]});
      ++j;
    }
    if (j < actual.size() && actual[j].op == want.op) {
      const bool same = actual[j] == want;
      report.rows.push_back({same ? RowCheck::Status::pass : RowCheck::Status::mismatch, want, actual[j]});
      ++j;
    } else {
      report.rows.push_back({RowCheck::Status::missing, want, std::nullopt});
    }
  }
  for (; j < actual.size(); ++j) {
    report.rows.push_back(
        {elementwise(actual[j]) ? RowCheck::Status::extra : RowCheck::Status::unexpected, std::nullopt, actual[j]});
  }
  return report;
}

}  // namespace sdgan
