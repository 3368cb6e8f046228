#include "sdgan/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace sdgan {

namespace fs = std::filesystem;

namespace {

constexpr int kFormat = 1;

void commit(const fs::path& tmp, const fs::path& dst) { fs::rename(tmp, dst); }

void save_module(const torch::nn::Module& m, const fs::path& path) {
  torch::serialize::OutputArchive archive;
  m.save(archive);
  const fs::path tmp = path.string() + ".tmp";
  archive.save_to(tmp.string());
  commit(tmp, path);
}

void save_optimizer(const torch::optim::Optimizer& opt, const fs::path& path) {
  torch::serialize::OutputArchive archive;
  opt.save(archive);
  const fs::path tmp = path.string() + ".tmp";
  archive.save_to(tmp.string());
  commit(tmp, path);
}

void load_module(torch::nn::Module& m, const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("checkpoint file missing: " + path.string());
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  m.load(archive);
}

void load_optimizer(torch::optim::Optimizer& opt, const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("checkpoint file missing: " + path.string());
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  opt.load(archive);
}

}  // namespace

std::string Checkpoint::id() const {
  auto d = dir.lexically_normal();
  if (!d.has_filename()) d = d.parent_path();
  return d.filename().string();
}

void save_checkpoint(const Checkpoint& meta, Players& players) {
  fs::create_directories(meta.dir);
  save_module(*players.generator, meta.dir / "generator.pt");
  save_module(*players.discriminator, meta.dir / "discriminator.pt");
  if (players.generator_opt) save_optimizer(*players.generator_opt, meta.dir / "generator_opt.pt");
  if (players.discriminator_opt) save_optimizer(*players.discriminator_opt, meta.dir / "discriminator_opt.pt");

  nlohmann::json j{{"format", kFormat},
                   {"model", meta.model},
                   {"optim", meta.optim},
                   {"iteration", meta.iteration},
                   {"seed", meta.seed},
                   {"k_t", meta.k_t},
                   {"rng_state", meta.rng_state},
                   {"loss_summary", meta.loss_summary},
                   {"generator_hash", parameter_hash(*players.generator)}};
  const fs::path tmp = meta.dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  commit(tmp, meta.dir / "manifest.json");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("no checkpoint manifest at " + path.string());
  Checkpoint c;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.value("format", 0) != kFormat) throw std::runtime_error("unsupported checkpoint format");
    c.dir = dir;
    c.model = j.at("model").get<ModelConfig>();
    c.model.validate();
    c.optim = optim_from_json(j.at("optim"), c.model.loss);
    c.iteration = j.at("iteration").get<std::int64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.k_t = j.at("k_t").get<double>();
    c.rng_state = j.value("rng_state", std::string());
    c.loss_summary = j.value("loss_summary", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed checkpoint manifest " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("malformed checkpoint manifest " + path.string() + ": " + e.what());
  }
  return c;
}

std::shared_ptr<GeneratorNet> load_generator(const Checkpoint& ckpt) {
  auto g = build_generator(ckpt.model);
  load_module(*g, ckpt.dir / "generator.pt");
  g->eval();
  return g;
}

std::shared_ptr<DiscriminatorNet> load_discriminator(const Checkpoint& ckpt) {
  auto d = build_discriminator(ckpt.model);
  load_module(*d, ckpt.dir / "discriminator.pt");
  d->eval();
  return d;
}

Players load_players(const Checkpoint& ckpt) {
  auto g = build_generator(ckpt.model);
  auto d = build_discriminator(ckpt.model);
  load_module(*g, ckpt.dir / "generator.pt");
  load_module(*d, ckpt.dir / "discriminator.pt");
  Players p = make_players(std::move(g), std::move(d), ckpt.optim);
  load_optimizer(*p.generator_opt, ckpt.dir / "generator_opt.pt");
  load_optimizer(*p.discriminator_opt, ckpt.dir / "discriminator_opt.pt");
  return p;
}

}  // namespace sdgan
