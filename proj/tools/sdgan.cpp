// sdgan command-line front end.

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sdgan/checkpoint.hpp"
#include "sdgan/evaluate.hpp"
#include "sdgan/glyphs.hpp"
#include "sdgan/image.hpp"
#include "sdgan/inversion.hpp"
#include "sdgan/service.hpp"
#include "sdgan/train.hpp"
#include "sdgan/verifier.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsageError = 2;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Failure("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Failure(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure("cannot write " + path.string());
  out << text;
}

sdgan::Checkpoint open_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw Failure("no checkpoint at " + dir.string());
  return sdgan::load_checkpoint(dir);
}

torch::Tensor read_target(const fs::path& path, int resolution) {
  auto img = sdgan::read_image(path);
  if (!img) throw Failure("cannot read image " + path.string());
  return sdgan::from_rgb8(sdgan::resize_square(*img, resolution));
}

sdgan::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantically decomposed GAN training, evaluation and inference"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a model from a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> train_seed;
  std::string train_out;
  train->add_option("--config", config_path, "Training config (JSON)")->required();
  train->add_option("--seed", train_seed, "Override the config seed");
  train->add_option("--out", train_out, "Override the checkpoint directory");

  // eval
  auto* eval = app.add_subcommand("eval", "Verification and diversity report for a checkpoint");
  std::string checkpoint, verifier_path, out;
  sdgan::EvalOptions eval_opts;
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--verifier", verifier_path, "Verifier directory or embedding table (.jsonl)")->required();
  eval->add_option("--pairs", eval_opts.n_pairs, "Generated verification pairs, half identity-matched")
      ->capture_default_str();
  eval->add_option("--div-pairs", eval_opts.div_pairs, "Pairs for ID-Div and All-Div")->capture_default_str();
  eval->add_option("--seed", eval_opts.seed)->capture_default_str();
  eval->add_option("--out", out, "Report path (JSON)")->required();

  // grid
  auto* grid = app.add_subcommand("grid", "Sample grid: rows share z_I, columns share z_O");
  int rows = 4, cols = 14;
  std::uint64_t seed = 0;
  grid->add_option("--checkpoint", checkpoint)->required();
  grid->add_option("--rows", rows)->capture_default_str();
  grid->add_option("--cols", cols)->capture_default_str();
  grid->add_option("--seed", seed)->capture_default_str();
  grid->add_option("--out", out, "Output PNG")->required();

  // sample
  auto* sample = app.add_subcommand("sample", "Render one random code and record it");
  sample->add_option("--checkpoint", checkpoint)->required();
  sample->add_option("--seed", seed)->capture_default_str();
  sample->add_option("--out", out, "Output PNG; the code goes next to it as .json")->required();

  // invert
  auto* invert = app.add_subcommand("invert", "Recover a latent code for an image");
  std::string image_path;
  sdgan::InversionOptions inv_opts;
  invert->add_option("--checkpoint", checkpoint)->required();
  invert->add_option("--image", image_path)->required();
  invert->add_option("--seed", inv_opts.seed)->capture_default_str();
  invert->add_option("--steps", inv_opts.steps)->capture_default_str();
  invert->add_option("--restarts", inv_opts.restarts)->capture_default_str();
  invert->add_option("--lr", inv_opts.lr)->capture_default_str();
  invert->add_option("--out", out, "Output directory")->required();

  // interp
  auto* interp = app.add_subcommand("interp", "Invert two images and render their interpolation grid");
  std::string image_a, image_b;
  int interp_rows = 5, interp_cols = 5;
  interp->add_option("--checkpoint", checkpoint)->required();
  interp->add_option("--a", image_a)->required();
  interp->add_option("--b", image_b)->required();
  interp->add_option("--rows", interp_rows, "Identity steps (vertical)")->capture_default_str();
  interp->add_option("--cols", interp_cols, "Observation steps (horizontal)")->capture_default_str();
  interp->add_option("--seed", inv_opts.seed)->capture_default_str();
  interp->add_option("--steps", inv_opts.steps)->capture_default_str();
  interp->add_option("--restarts", inv_opts.restarts)->capture_default_str();
  interp->add_option("--out", out, "Output directory")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP inference service for one checkpoint");
  std::string host = "127.0.0.1";
  int port = 8080;
  sdgan::ServiceOptions svc_opts;
  serve->add_option("--checkpoint", checkpoint)->required();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--max-count", svc_opts.max_count)->capture_default_str();

  // glyphs
  auto* glyphs = app.add_subcommand("glyphs", "Write a procedural glyph dataset");
  sdgan::GlyphSpec spec;
  auto add_glyph_opts = [&](CLI::App* cmd) {
    cmd->add_option("--shapes", spec.num_shapes)->capture_default_str();
    cmd->add_option("--hues", spec.num_hues)->capture_default_str();
    cmd->add_option("--per-identity", spec.per_identity)->capture_default_str();
    cmd->add_option("--resolution", spec.resolution)->capture_default_str();
    cmd->add_option("--seed", spec.seed)->capture_default_str();
  };
  add_glyph_opts(glyphs);
  glyphs->add_option("--out", out, "Dataset root")->required();

  // train-verifier
  auto* train_verifier = app.add_subcommand("train-verifier", "Train and calibrate the glyph verifier");
  sdgan::GlyphVerifierConfig vcfg;
  std::string dataset_path;
  add_glyph_opts(train_verifier);
  train_verifier->add_option("--dataset", dataset_path, "Train on an image directory instead of rendered glyphs");
  train_verifier->add_option("--epochs", vcfg.epochs)->capture_default_str();
  train_verifier->add_option("--embedding-dim", vcfg.embedding_dim)->capture_default_str();
  train_verifier->add_option("--scale", vcfg.scale, "Cosine-softmax temperature")->capture_default_str();
  train_verifier->add_option("--lr", vcfg.lr)->capture_default_str();
  train_verifier->add_option("--out", out, "Verifier directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (train->parsed()) {
      auto cfg = sdgan::train_config_from_json(read_json(config_path));
      if (train_seed) cfg.seed = *train_seed;
      if (!train_out.empty()) cfg.output_dir = train_out;
      const auto dataset = sdgan::load_dataset(cfg.dataset, cfg.model.resolution);
      std::cerr << "training " << to_string(cfg.model.family) << " on " << dataset.records.size() << " identities, "
                << dataset.num_images() << " images\n";
      sdgan::TrainCallbacks cb;
      cb.on_step = [](const sdgan::StepLosses& s) {
        if (s.iteration % 100 == 0) {
          std::cerr << "iter " << s.iteration << "  loss_d " << s.loss_d << "  loss_g " << s.loss_g;
          if (s.convergence != 0.0) std::cerr << "  k_t " << s.k_t << "  M " << s.convergence;
          std::cerr << '\n';
        }
      };
      const auto ckpt = sdgan::train(cfg, dataset, cb);
      std::cout << ckpt.dir.string() << '\n';
    } else if (eval->parsed()) {
      const auto ckpt = open_checkpoint(checkpoint);
      if (!fs::exists(verifier_path)) throw Failure("no verifier at " + verifier_path);
      const auto verifier = sdgan::load_verifier(verifier_path);
      if (!verifier->calibrated()) throw Failure("verifier has no calibrated threshold");
      const auto report = sdgan::evaluate_model(ckpt, *verifier, eval_opts);
      const json j = report;
      write_text(out, j.dump(2) + "\n");
      std::cout << j.dump() << '\n';
    } else if (grid->parsed()) {
      const auto ckpt = open_checkpoint(checkpoint);
      auto g = sdgan::load_generator(ckpt);
      sdgan::write_png(out, sdgan::tile(sdgan::random_grid(*g, ckpt.model.partition(), rows, cols, seed)));
    } else if (sample->parsed()) {
      const auto ckpt = open_checkpoint(checkpoint);
      auto g = sdgan::load_generator(ckpt);
      sdgan::Rng rng(seed);
      const auto code = sdgan::sample_code(ckpt.model.partition(), rng);
      const auto img = sdgan::render_grid(*g, {code.identity}, {code.observation})[0][0];
      sdgan::write_png(out, sdgan::to_rgb8(img));
      write_text(fs::path(out).replace_extension(".json"), json(code).dump(2) + "\n");
    } else if (invert->parsed()) {
      const auto ckpt = open_checkpoint(checkpoint);
      auto g = sdgan::load_generator(ckpt);
      const auto target = read_target(image_path, ckpt.model.resolution);
      const auto result = sdgan::invert(*g, target, ckpt.model.partition(), inv_opts);
      fs::create_directories(out);
      write_text(fs::path(out) / "inversion.json", json(result).dump(2) + "\n");
      const auto recon = sdgan::render_grid(*g, {result.z_hat.identity}, {result.z_hat.observation})[0][0];
      sdgan::write_png(fs::path(out) / "reconstruction.png",
                       sdgan::tile(torch::stack({target, recon}).unsqueeze(0)));
      std::cout << json(result).dump() << '\n';
    } else if (interp->parsed()) {
      const auto ckpt = open_checkpoint(checkpoint);
      auto g = sdgan::load_generator(ckpt);
      const auto ta = read_target(image_a, ckpt.model.resolution);
      const auto tb = read_target(image_b, ckpt.model.resolution);
      const auto ra = sdgan::invert(*g, ta, ckpt.model.partition(), inv_opts);
      const auto rb = sdgan::invert(*g, tb, ckpt.model.partition(), inv_opts);
      const auto cells = sdgan::interpolation_grid(*g, ra, rb, interp_rows, interp_cols);
      fs::create_directories(out);
      sdgan::write_png(fs::path(out) / "grid.png", sdgan::tile(cells));
      write_text(fs::path(out) / "inversions.json", json{{"a", ra}, {"b", rb}}.dump(2) + "\n");
    } else if (serve->parsed()) {
      const auto service = sdgan::InferenceService::open(checkpoint, svc_opts);
      sdgan::HttpServer server(*service);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving checkpoint '" << service->checkpoint().id() << "' on http://" << host << ':' << port
                << '\n';
      server.run(host, port);
      g_server = nullptr;
    } else if (glyphs->parsed()) {
      auto ds = sdgan::make_glyphs(spec);
      sdgan::write_glyph_dataset(out, ds);
      sdgan::write_manifest(fs::path(out) / "manifest.jsonl", ds, nullptr);
      std::cout << ds.num_images() << " images in " << ds.records.size() << " identities\n";
    } else if (train_verifier->parsed()) {
      vcfg.seed = spec.seed;
      const auto ds = dataset_path.empty() ? sdgan::make_glyphs(spec) : sdgan::ingest(dataset_path, spec.resolution);
      const auto v = sdgan::train_glyph_verifier(ds, vcfg);
      v->save(out);
      std::cout << v->report().dump() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }
  return 0;
}
