#include "sdgan/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sdgan/checkpoint.hpp"

namespace sdgan {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;
using torch::Tensor;

// ---------------------------------------------------------------------------
// Config

OptimConfig OptimConfig::defaults_for(LossKind loss) {
  OptimConfig c;
  switch (loss) {
    case LossKind::gan: break;
    case LossKind::began:
      c.lr = 1e-3;
      c.beta1 = 0.9;
      c.beta2 = 0.999;
      break;
    case LossKind::wgan:
      c.algorithm = OptimAlgorithm::rmsprop;
      c.lr = 5e-5;
      break;
  }
  return c;
}

void to_json(nlohmann::json& j, const OptimConfig& c) {
  j = nlohmann::json{{"algorithm", c.algorithm == OptimAlgorithm::adam ? "adam" : "rmsprop"},
                     {"lr", c.lr},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"gamma", c.gamma},
                     {"lambda_k", c.lambda_k},
                     {"k0", c.k0},
                     {"batch_tuples", c.batch_tuples},
                     {"total_iterations", c.total_iterations},
                     {"clip", c.clip},
                     {"critic_iterations", c.critic_iterations},
                     {"minimax_generator", c.minimax_generator}};
}

OptimConfig optim_from_json(const nlohmann::json& j, LossKind loss) {
  OptimConfig c = OptimConfig::defaults_for(loss);
  if (j.contains("algorithm")) {
    const auto a = j.at("algorithm").get<std::string>();
    if (a == "adam") {
      c.algorithm = OptimAlgorithm::adam;
    } else if (a == "rmsprop") {
      c.algorithm = OptimAlgorithm::rmsprop;
    } else {
      throw std::invalid_argument("unknown optimizer '" + a + "'");
    }
  }
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.gamma = j.value("gamma", c.gamma);
  c.lambda_k = j.value("lambda_k", c.lambda_k);
  c.k0 = j.value("k0", c.k0);
  c.batch_tuples = j.value("batch_tuples", c.batch_tuples);
  c.total_iterations = j.value("total_iterations", c.total_iterations);
  c.clip = j.value("clip", c.clip);
  c.critic_iterations = j.value("critic_iterations", c.critic_iterations);
  c.minimax_generator = j.value("minimax_generator", c.minimax_generator);
  if (c.gamma <= 0.0 || c.gamma > 1.0) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (c.k0 < 0.0 || c.k0 > 1.0) throw std::invalid_argument("k0 must lie in [0, 1]");
  if (c.batch_tuples < 1) throw std::invalid_argument("batch_tuples must be positive");
  if (c.total_iterations < 0) throw std::invalid_argument("total_iterations must be non-negative");
  if (c.critic_iterations < 1) throw std::invalid_argument("critic_iterations must be positive");
  if (c.lr <= 0.0) throw std::invalid_argument("lr must be positive");
  return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.model = j.at("model").get<ModelConfig>();
  c.model.validate();
  c.optim = optim_from_json(j.value("optim", nlohmann::json::object()), c.model.loss);
  const auto& ds = j.at("dataset");
  if (ds.contains("path")) c.dataset.path = ds.at("path").get<std::string>();
  if (ds.contains("glyphs")) {
    const auto& g = ds.at("glyphs");
    GlyphSpec spec;
    spec.num_shapes = g.value("shapes", spec.num_shapes);
    spec.num_hues = g.value("hues", spec.num_hues);
    spec.per_identity = g.value("per_identity", spec.per_identity);
    spec.seed = g.value("seed", std::uint64_t{0});
    spec.resolution = c.model.resolution;
    c.dataset.glyphs = spec;
  }
  if (c.dataset.path.has_value() == c.dataset.glyphs.has_value()) {
    throw std::invalid_argument("dataset needs exactly one of 'path' or 'glyphs'");
  }
  c.seed = j.value("seed", std::uint64_t{0});
  c.output_dir = j.value("output_dir", std::string("checkpoint"));
  c.checkpoint_every = j.value("checkpoint_every", std::int64_t{1000});
  if (c.checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be positive");
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["model"] = c.model;
  j["optim"] = c.optim;
  if (c.dataset.path) j["dataset"]["path"] = c.dataset.path->string();
  if (c.dataset.glyphs) {
    const auto& g = *c.dataset.glyphs;
    j["dataset"]["glyphs"] = {{"shapes", g.num_shapes}, {"hues", g.num_hues}, {"per_identity", g.per_identity},
                              {"seed", g.seed}};
  }
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["checkpoint_every"] = c.checkpoint_every;
  return j;
}

IdentityDataset load_dataset(const DatasetSource& source, int resolution) {
  if (source.glyphs) {
    GlyphSpec spec = *source.glyphs;
    spec.resolution = resolution;
    return make_glyphs(spec);
  }
  if (source.path) return ingest(*source.path, resolution);
  throw std::invalid_argument("dataset source is empty");
}

// ---------------------------------------------------------------------------
// Batches

Tensor latent_tuples(const LatentPartition& partition, int k, int m, Rng& rng) {
  partition.validate();
  auto out = torch::empty({m, k, partition.total_dim});
  auto acc = out.accessor<float, 3>();
  for (int t = 0; t < m; ++t) {
    if (k == 1) {
      const auto code = sample_code(partition, rng).full();
      for (int d = 0; d < partition.total_dim; ++d) acc[t][0][d] = code[static_cast<std::size_t>(d)];
      continue;
    }
    const auto composed = compose(sample_group(partition, k, rng));
    for (int j = 0; j < k; ++j) {
      for (int d = 0; d < partition.total_dim; ++d) acc[t][j][d] = composed.vectors[j][static_cast<std::size_t>(d)];
    }
  }
  return out;
}

namespace {

Tensor generate(GeneratorNet& g, const Tensor& latents) {
  const auto m = latents.size(0), k = latents.size(1);
  auto images = g.forward(latents.reshape({m * k, latents.size(2)}));
  return images.reshape({m, k, 3, images.size(-2), images.size(-1)});
}

double checked(const Tensor& loss, const char* what, std::int64_t iteration) {
  const double v = loss.item<double>();
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "non-finite " << what << " (" << v << ") at iteration " << iteration;
    throw NonFiniteLoss(os.str());
  }
  return v;
}

}  // namespace

PairBatch assemble_fake_batch(GeneratorNet& generator, const LatentPartition& partition, int k, int m, Rng& rng,
                              bool track_grad) {
  PairBatch b;
  b.source = PairBatch::Source::generated;
  b.latents = latent_tuples(partition, k, m, rng);
  b.labels.assign(static_cast<std::size_t>(m), 0);
  if (track_grad) {
    b.images = generate(generator, b.latents);
  } else {
    torch::NoGradGuard no_grad;
    b.images = generate(generator, b.latents);
  }
  return b;
}

PairBatch assemble_real_batch(const IdentityDataset& dataset, int k, int m, Rng& rng) {
  PairBatch b;
  b.source = PairBatch::Source::real;
  b.labels.assign(static_cast<std::size_t>(m), 1);
  std::vector<Tensor> tuples;
  std::vector<std::int64_t> ids;
  tuples.reserve(static_cast<std::size_t>(m));
  for (int t = 0; t < m; ++t) {
    auto tuple = sample_real_tuple(dataset, k, rng);
    std::vector<Tensor> images;
    for (auto idx : tuple.images) images.push_back(dataset.records[tuple.record].images[idx].pixels);
    tuples.push_back(torch::stack(images));
    ids.push_back(static_cast<std::int64_t>(tuple.record));
    b.tuples.push_back(std::move(tuple));
  }
  b.images = torch::stack(tuples);
  b.identity_labels = torch::tensor(ids, torch::kInt64);
  return b;
}

// ---------------------------------------------------------------------------
// Loss arithmetic

double gan_discriminator_loss(double d_real, double d_fake) {
  return -(std::log(d_real) + std::log1p(-d_fake));
}

double gan_generator_loss(double d_fake, bool minimax) {
  return minimax ? std::log1p(-d_fake) : -std::log(d_fake);
}

Tensor gan_discriminator_loss(const Tensor& real_logits, const Tensor& fake_logits) {
  // -log sigmoid(a) = softplus(-a); -log(1 - sigmoid(a)) = softplus(a)
  return F::softplus(-real_logits).mean() + F::softplus(fake_logits).mean();
}

Tensor gan_generator_loss(const Tensor& fake_logits, bool minimax) {
  return minimax ? (-F::softplus(fake_logits)).mean() : F::softplus(-fake_logits).mean();
}

Tensor auxiliary_loss(const Tensor& class_logits, const Tensor& labels) {
  const auto n = class_logits.size(1);
  if (labels.numel() > 0 && (labels.min().item<std::int64_t>() < 0 || labels.max().item<std::int64_t>() >= n)) {
    throw std::invalid_argument("identity label outside [0, " + std::to_string(n) + ")");
  }
  return F::cross_entropy(class_logits, labels);
}

Tensor reconstruction_loss(const Tensor& images, const Tensor& reconstruction) {
  return (images - reconstruction).abs().mean();
}

double began_k_update(double k_t, double gamma, double lambda_k, double l_real, double l_fake) {
  return std::clamp(k_t + lambda_k * (gamma * l_real - l_fake), 0.0, 1.0);
}

double began_convergence(double gamma, double l_real, double l_fake) {
  return l_real + std::abs(gamma * l_real - l_fake);
}

// ---------------------------------------------------------------------------
// Steps

void TrainState::record(const StepLosses& s) {
  history.push_back(s);
  while (history.size() > history_capacity) history.pop_front();
}

std::unique_ptr<torch::optim::Optimizer> make_optimizer(const OptimConfig& c, std::vector<Tensor> params) {
  if (c.algorithm == OptimAlgorithm::adam) {
    return std::make_unique<torch::optim::Adam>(std::move(params),
                                                torch::optim::AdamOptions(c.lr).betas({c.beta1, c.beta2}));
  }
  return std::make_unique<torch::optim::RMSprop>(std::move(params), torch::optim::RMSpropOptions(c.lr));
}

Players make_players(std::shared_ptr<GeneratorNet> g, std::shared_ptr<DiscriminatorNet> d, const OptimConfig& c) {
  Players p;
  p.generator = std::move(g);
  p.discriminator = std::move(d);
  p.generator_opt = make_optimizer(c, p.generator->parameters());
  p.discriminator_opt = make_optimizer(c, p.discriminator->parameters());
  return p;
}

StepLosses gan_step(TrainState& state, Players& p, const BatchFeed& feed, const OptimConfig& c) {
  auto& G = *p.generator;
  auto& D = *p.discriminator;
  StepLosses out;
  out.iteration = state.iteration;

  const auto real = feed.real();
  Tensor fake;
  {
    torch::NoGradGuard no_grad;
    fake = generate(G, feed.latents());
  }
  p.discriminator_opt->zero_grad();
  auto loss_d = gan_discriminator_loss(D.forward(real.images).logits, D.forward(fake).logits);
  out.loss_d = checked(loss_d, "discriminator loss", state.iteration);
  loss_d.backward();
  p.discriminator_opt->step();

  // Fresh identity-matched latents for the generator update.
  auto images = generate(G, feed.latents());
  p.generator_opt->zero_grad();
  auto loss_g = gan_generator_loss(D.forward(images).logits, c.minimax_generator);
  out.loss_g = checked(loss_g, "generator loss", state.iteration);
  loss_g.backward();
  p.generator_opt->step();
  out.k_t = state.k_t;
  return out;
}

StepLosses began_step(TrainState& state, Players& p, const BatchFeed& feed, const OptimConfig& c) {
  auto& G = *p.generator;
  auto& D = *p.discriminator;
  StepLosses out;
  out.iteration = state.iteration;

  const auto real = feed.real();
  Tensor fake;
  {
    torch::NoGradGuard no_grad;
    fake = generate(G, feed.latents());
  }
  p.discriminator_opt->zero_grad();
  auto l_real = reconstruction_loss(real.images, D.forward(real.images).reconstruction);
  auto l_fake = reconstruction_loss(fake, D.forward(fake).reconstruction);
  auto loss_d = l_real - state.k_t * l_fake;
  out.loss_d = checked(loss_d, "discriminator loss", state.iteration);
  const double lr = l_real.item<double>();
  const double lf = l_fake.item<double>();
  loss_d.backward();
  p.discriminator_opt->step();

  auto images = generate(G, feed.latents());
  p.generator_opt->zero_grad();
  auto loss_g = reconstruction_loss(images, D.forward(images).reconstruction);
  out.loss_g = checked(loss_g, "generator loss", state.iteration);
  loss_g.backward();
  p.generator_opt->step();

  state.k_t = began_k_update(state.k_t, c.gamma, c.lambda_k, lr, lf);
  out.k_t = state.k_t;
  out.convergence = began_convergence(c.gamma, lr, lf);
  return out;
}

StepLosses wgan_step(TrainState& state, Players& p, const BatchFeed& feed, const OptimConfig& c) {
  auto& G = *p.generator;
  auto& D = *p.discriminator;
  StepLosses out;
  out.iteration = state.iteration;

  for (int i = 0; i < c.critic_iterations; ++i) {
    const auto real = feed.real();
    Tensor fake;
    {
      torch::NoGradGuard no_grad;
      fake = generate(G, feed.latents());
    }
    p.discriminator_opt->zero_grad();
    auto loss_d = D.forward(fake).logits.mean() - D.forward(real.images).logits.mean();
    out.loss_d = checked(loss_d, "critic loss", state.iteration);
    loss_d.backward();
    p.discriminator_opt->step();
    torch::NoGradGuard no_grad;
    for (auto& w : D.parameters()) w.clamp_(-c.clip, c.clip);
  }

  auto images = generate(G, feed.latents());
  p.generator_opt->zero_grad();
  auto loss_g = -D.forward(images).logits.mean();
  out.loss_g = checked(loss_g, "generator loss", state.iteration);
  loss_g.backward();
  p.generator_opt->step();
  out.k_t = state.k_t;
  return out;
}

StepLosses acgan_step(TrainState& state, Players& p, const BatchFeed& feed, const OptimConfig& c, LossKind loss) {
  auto* G = dynamic_cast<AcGenerator*>(p.generator.get());
  if (!G) throw std::invalid_argument("acgan_step needs an AC-DCGAN generator");
  if (!feed.conditioning) throw std::invalid_argument("acgan_step needs a conditioning feed");
  if (loss == LossKind::began) throw std::invalid_argument("acgan_step supports the gan and wgan losses");
  const bool critic = loss == LossKind::wgan;
  auto& D = *p.discriminator;
  StepLosses out;
  out.iteration = state.iteration;

  auto conditional = [&](const Tensor& labels, const Tensor& observations) {
    auto x = G->conditional(labels, observations);
    return x.reshape({x.size(0), 1, 3, x.size(-2), x.size(-1)});
  };

  for (int i = 0; i < (critic ? c.critic_iterations : 1); ++i) {
    const auto real = feed.real();
    auto [labels, observations] = feed.conditioning();
    Tensor fake;
    {
      torch::NoGradGuard no_grad;
      fake = conditional(labels, observations);
    }
    p.discriminator_opt->zero_grad();
    const auto d_real = D.forward(real.images);
    const auto d_fake = D.forward(fake);
    const auto adversarial = critic ? d_fake.logits.mean() - d_real.logits.mean()
                                    : gan_discriminator_loss(d_real.logits, d_fake.logits);
    auto loss_d = adversarial + auxiliary_loss(d_real.class_logits, real.identity_labels) +
                  auxiliary_loss(d_fake.class_logits, labels);
    out.loss_d = checked(loss_d, "discriminator loss", state.iteration);
    loss_d.backward();
    p.discriminator_opt->step();
    if (critic) {
      torch::NoGradGuard no_grad;
      for (auto& w : D.parameters()) w.clamp_(-c.clip, c.clip);
    }
  }

  auto [labels2, observations2] = feed.conditioning();
  const auto images = conditional(labels2, observations2);
  p.generator_opt->zero_grad();
  const auto d_gen = D.forward(images);
  const auto adversarial = critic ? -d_gen.logits.mean() : gan_generator_loss(d_gen.logits, c.minimax_generator);
  auto loss_g = adversarial + auxiliary_loss(d_gen.class_logits, labels2);
  out.loss_g = checked(loss_g, "generator loss", state.iteration);
  loss_g.backward();
  p.generator_opt->step();
  out.k_t = state.k_t;
  return out;
}

BatchFeed dataset_feed(const IdentityDataset& dataset, const ModelConfig& model, int batch_tuples, TrainState& state) {
  BatchFeed feed;
  const int k = model.tuple_size();
  const auto partition = model.partition();
  feed.real = [&dataset, &state, k, batch_tuples] { return assemble_real_batch(dataset, k, batch_tuples, state.rng); };
  feed.latents = [&state, partition, k, batch_tuples] { return latent_tuples(partition, k, batch_tuples, state.rng); };
  if (model.family == Family::ac_dcgan) {
    const auto n = static_cast<std::size_t>(model.num_identities);
    feed.conditioning = [&state, partition, n, batch_tuples] {
      std::vector<std::int64_t> labels(static_cast<std::size_t>(batch_tuples));
      for (auto& l : labels) l = static_cast<std::int64_t>(uniform_index(state.rng, n));
      auto obs = torch::empty({batch_tuples, partition.observation_dim()});
      auto acc = obs.accessor<float, 2>();
      for (int i = 0; i < batch_tuples; ++i) {
        for (int d = 0; d < partition.observation_dim(); ++d) acc[i][d] = uniform_pm1(state.rng);
      }
      return std::make_pair(torch::tensor(labels, torch::kInt64), obs);
    };
  }
  return feed;
}

// ---------------------------------------------------------------------------
// Driver

namespace {

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

nlohmann::json summarize(const TrainState& state) {
  nlohmann::json s = nlohmann::json::object();
  if (state.history.empty()) return s;
  const auto& last = state.history.back();
  s["last"] = {{"iteration", last.iteration}, {"loss_d", last.loss_d}, {"loss_g", last.loss_g},
               {"k_t", last.k_t}, {"convergence_M", last.convergence}};
  const std::size_t n = std::min<std::size_t>(100, state.history.size());
  double d = 0, g = 0, m = 0;
  for (auto it = state.history.end() - static_cast<std::ptrdiff_t>(n); it != state.history.end(); ++it) {
    d += it->loss_d;
    g += it->loss_g;
    m += it->convergence;
  }
  s["mean_last_100"] = {{"loss_d", d / n}, {"loss_g", g / n}, {"convergence_M", m / n}};
  return s;
}

}  // namespace

Checkpoint train(const TrainConfig& config, const IdentityDataset& dataset, const TrainCallbacks& callbacks) {
  ModelConfig model = config.model;
  if (model.family == Family::ac_dcgan && model.num_identities == 0) {
    model.num_identities = static_cast<int>(dataset.records.size());
  }
  model.validate();
  if (dataset.resolution != model.resolution) {
    throw std::invalid_argument("dataset resolution " + std::to_string(dataset.resolution) +
                                " does not match model resolution " + std::to_string(model.resolution));
  }
  if (model.family == Family::ac_dcgan && static_cast<std::size_t>(model.num_identities) < dataset.records.size()) {
    throw std::invalid_argument("ac-dcgan num_identities is smaller than the number of dataset identities");
  }
  const auto& optim = config.optim;

  torch::manual_seed(config.seed);
  Players players = make_players(build_generator(model), build_discriminator(model), optim);
  players.generator->train();
  players.discriminator->train();

  TrainState state;
  state.rng.seed(config.seed);
  state.k_t = optim.k0;
  const BatchFeed feed = dataset_feed(dataset, model, optim.batch_tuples, state);

  fs::create_directories(config.output_dir);
  std::ofstream(config.output_dir / "config.json") << to_json(config).dump(2) << '\n';
  std::ofstream csv(config.output_dir / "losses.csv");
  csv << "iteration,loss_d,loss_g,k_t,convergence_M\n" << std::setprecision(9);

  Checkpoint meta;
  meta.dir = config.output_dir;
  meta.model = model;
  meta.optim = optim;
  meta.seed = config.seed;
  auto snapshot = [&] {
    meta.iteration = state.iteration;
    meta.k_t = state.k_t;
    meta.rng_state = rng_state(state.rng);
    meta.loss_summary = summarize(state);
    save_checkpoint(meta, players);
    if (callbacks.on_checkpoint) callbacks.on_checkpoint(state.iteration);
  };

  try {
    for (std::int64_t it = 1; it <= optim.total_iterations; ++it) {
      state.iteration = it;
      StepLosses s;
      if (model.family == Family::ac_dcgan) {
        s = acgan_step(state, players, feed, optim, model.loss);
      } else if (model.loss == LossKind::began) {
        s = began_step(state, players, feed, optim);
      } else if (model.loss == LossKind::wgan) {
        s = wgan_step(state, players, feed, optim);
      } else {
        s = gan_step(state, players, feed, optim);
      }
      state.record(s);
      csv << s.iteration << ',' << s.loss_d << ',' << s.loss_g << ',' << s.k_t << ',' << s.convergence << '\n';
      if (callbacks.on_step) callbacks.on_step(s);
      if (it % config.checkpoint_every == 0 && it != optim.total_iterations) {
        csv.flush();
        snapshot();
      }
    }
  } catch (const NonFiniteLoss& e) {
    nlohmann::json diag{{"error", e.what()}, {"iteration", state.iteration}, {"k_t", state.k_t},
                        {"recent", summarize(state)}};
    std::ofstream(config.output_dir / "diagnostic.json") << diag.dump(2) << '\n';
    throw;
  }
  csv.flush();
  snapshot();
  players.generator->eval();
  return meta;
}

}  // namespace sdgan
