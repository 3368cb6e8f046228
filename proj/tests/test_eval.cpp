#include "doctest_torch.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "sdgan/evaluate.hpp"
#include "sdgan/image.hpp"
#include "sdgan/inversion.hpp"
#include "sdgan/verifier.hpp"
#include "support.hpp"

using namespace sdgan;

namespace {

// Embeds an image as its per-channel mean.
class MeanVerifier : public Verifier {
 public:
  torch::Tensor embed(const torch::Tensor& images) const override { return images.mean({2, 3}).to(torch::kFloat32); }
  void save(const fs::path&) const override {}
};

// Paints every image in one color given by the first three z_I coordinates; z_O is ignored.
class PaintGenerator : public GeneratorNet {
 public:
  int resolution() const override { return 8; }
  int latent_dim() const override { return 10; }

 protected:
  torch::Tensor run(const torch::Tensor& z, LayerTable*) override {
    return z.slice(1, 0, 3).reshape({-1, 3, 1, 1}).expand({z.size(0), 3, 8, 8}).contiguous();
  }
};

class PaintCritic : public DiscriminatorNet {
 public:
  PaintCritic() { w_ = register_parameter("w", torch::zeros({7})); }
  int tuple_size() const override { return 2; }
  int resolution() const override { return 8; }

 protected:
  DiscriminatorOutput run(const torch::Tensor& t, LayerTable*) override { return {torch::zeros({t.size(0)}), {}, {}}; }

 private:
  torch::Tensor w_;
};

std::shared_ptr<GeneratorNet> small_generator(std::uint64_t seed) {
  ModelConfig c;
  c.resolution = 32;
  torch::manual_seed(seed);
  auto g = build_generator(c);
  g->eval();
  return g;
}

}  // namespace

TEST_SUITE("verifier") {
  TEST_CASE("real pairs are balanced with correct ground truth") {
    const auto ds = make_glyphs({2, 3, 4, 32, 2});
    Rng rng(1);
    const auto pairs = real_pairs(ds, 41, rng);
    CHECK(pairs.size() == 41);
    CHECK(pairs.first.sizes() == torch::IntArrayRef{41, 3, 32, 32});
    for (int i = 0; i < 41; ++i) CHECK(pairs.matched[static_cast<std::size_t>(i)] == (i < 20));
    for (int i = 0; i < 20; ++i) CHECK_FALSE(torch::equal(pairs.first[i], pairs.second[i]));
  }

  TEST_CASE("generated pairs share z_I exactly when matched") {
    PaintGenerator g;
    Rng rng(3);
    const auto pairs = generated_pairs(g, {10, 5}, 30, rng);
    for (int i = 0; i < 30; ++i) {
      CHECK(torch::equal(pairs.first[i], pairs.second[i]) == bool(pairs.matched[static_cast<std::size_t>(i)]));
    }
  }

  TEST_CASE("a perfect verifier on a z_O-blind generator") {
    PaintGenerator g;
    MeanVerifier v;
    CHECK_FALSE(v.calibrated());
    CHECK_THROWS_AS(v.threshold(), std::logic_error);
    Rng rng(5);
    const auto cal = v.calibrate(generated_pairs(g, {10, 5}, 100, rng));
    CHECK(cal.accuracy == 1.0);
    const auto r = v.verify(generated_pairs(g, {10, 5}, 200, rng));
    CHECK(r.auc == 1.0);
    CHECK(r.accuracy == 1.0);
    CHECK(r.far == 0.0);
    CHECK(r.matched == 100);
    CHECK(r.unmatched == 100);
    CHECK_THROWS_AS(v.verify(PairSet{}), std::invalid_argument);
  }

  TEST_CASE("the same image is at distance zero") {
    MeanVerifier v;
    const auto x = torch::rand({4, 3, 8, 8});
    for (double d : v.distances(x, x)) CHECK(d == 0.0);
  }

  TEST_CASE("embedding tables resolve images by content hash") {
    testing::TempDir dir("table");
    const auto ds = make_glyphs({2, 1, 2, 16, 1});
    {
      std::ofstream out(dir / "emb.jsonl");
      int i = 0;
      for (const auto& rec : ds.records) {
        for (const auto& img : rec.images) {
          out << nlohmann::json{{"image_hash", content_hash(to_rgb8(img.pixels))},
                                {"embedding", {1.0 * i, 0.0, rec.identity_id == ds.records[0].identity_id ? 0.0 : 5.0}}}
                     .dump()
              << '\n';
          ++i;
        }
      }
    }
    const auto v = load_verifier(dir / "emb.jsonl");
    const auto& a = ds.records[0].images[0].pixels;
    const auto& b = ds.records[1].images[1].pixels;
    const auto d = v->distances(torch::stack({a, a}), torch::stack({a, b}));
    CHECK(d[0] == 0.0);
    CHECK(d[1] == doctest::Approx(9.0 + 25.0));
    CHECK_THROWS_AS(v->embed(torch::zeros({1, 3, 16, 16})), std::out_of_range);
    CHECK_THROWS(load_verifier(dir / "absent.jsonl"));
  }

  TEST_CASE("glyph verifier needs enough identities") {
    GlyphVerifierConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train_glyph_verifier(make_glyphs({2, 1, 4, 32, 0}), cfg), std::invalid_argument);
  }

  TEST_CASE("glyph verifier saves and reloads with its threshold") {
    testing::TempDir dir("glyphver");
    GlyphVerifierConfig cfg;
    cfg.epochs = 1;
    cfg.calibration_pairs = 100;
    cfg.seed = 4;
    auto v = train_glyph_verifier(make_glyphs({4, 5, 6, 32, 4}), cfg);
    CHECK(v->calibrated());
    CHECK(v->report().contains("validation_accuracy"));
    CHECK(v->report().at("test").contains("auc"));
    v->save(dir.path());
    CHECK(fs::exists(dir / "verifier.json"));

    const auto back = load_verifier(dir.path());
    CHECK(back->threshold() == v->threshold());
    const auto x = make_glyphs({2, 2, 2, 32, 9}).records[0].images[0].pixels.unsqueeze(0);
    CHECK(torch::equal(back->embed(x), v->embed(x)));
    const auto e = v->embed(torch::cat({x, x}));
    CHECK(e.norm(2, 1).allclose(torch::ones({2}), 1e-5, 1e-5));
    CHECK(back->distances(x, x)[0] == 0.0);
  }
}

TEST_SUITE("evaluate") {
  TEST_CASE("reports carry exactly six fields") {
    EvalReport r{0.9, 0.8, 0.1, 0.3, 0.5, 1234, 10, 10};
    const nlohmann::json j = r;
    CHECK(j.size() == 6);
    for (const char* k : {"auc", "acc", "far", "id_div", "all_div", "mem_bytes"}) CHECK(j.contains(k));
    const auto back = j.get<EvalReport>();
    CHECK(back.auc == r.auc);
    CHECK(back.mem_bytes == 1234);
  }

  TEST_CASE("a generator that ignores z_O has no observation diversity") {
    PaintGenerator g;
    PaintCritic d;
    MeanVerifier v;
    v.set_threshold(1e-9);
    ModelConfig model;
    model.total_dim = 10;
    model.identity_dim = 5;
    model.resolution = 32;
    const auto r = evaluate_model(g, d, model, v, {400, 100, 3});
    CHECK(r.acc == 1.0);
    CHECK(r.auc == 1.0);
    CHECK(r.id_div == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r.all_div > 0.0);
    CHECK(r.mem_bytes == 4 * 7);
    CHECK(r.matched_pairs == 200);

    model.family = Family::ac_dcgan;
    model.num_identities = 3;
    CHECK_THROWS_AS(evaluate_model(g, d, model, v, {}), std::invalid_argument);
  }

  TEST_CASE("a constant generator scores chance") {
    class Flat : public PaintGenerator {
     protected:
      torch::Tensor run(const torch::Tensor& z, LayerTable*) override { return torch::zeros({z.size(0), 3, 8, 8}); }
    } g;
    PaintCritic d;
    MeanVerifier v;
    v.set_threshold(0.5);
    ModelConfig model;
    model.total_dim = 10;
    model.identity_dim = 5;
    const auto r = evaluate_model(g, d, model, v, {100, 50, 1});
    CHECK(r.acc == 0.5);
    CHECK(r.far == 1.0);
    CHECK(r.auc == 0.5);
    CHECK(r.id_div == doctest::Approx(0.0));
    CHECK(r.all_div == doctest::Approx(0.0));
  }
}

TEST_SUITE("inversion") {
  TEST_CASE("zero steps return the best initial draw unconverged") {
    auto g = small_generator(1);
    const LatentPartition p{100, 50};
    const auto x = g->forward(torch::zeros({1, 100}))[0].detach();
    InversionOptions o;
    o.steps = 0;
    o.restarts = 1;
    o.seed = 12;
    const auto r = invert(*g, x, p, o);
    Rng rng(12);
    std::vector<float> expected;
    for (int i = 0; i < 100; ++i) expected.push_back(uniform_pm1(rng));
    CHECK(r.z_hat.full() == expected);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations_used == 0);
    CHECK(r.best_so_far.empty());
  }

  TEST_CASE("inversion is deterministic, monotone and leaves the generator untouched") {
    auto g = small_generator(2);
    const LatentPartition p{100, 50};
    Rng rng(4);
    const auto target_code = sample_code(p, rng);
    const auto x = generate_images(*g, torch::tensor(target_code.full()).unsqueeze(0))[0];
    const auto hash = parameter_hash(*g);
    InversionOptions o;
    o.steps = 60;
    o.restarts = 3;
    o.seed = 1;
    const auto a = invert(*g, x, p, o);
    const auto b = invert(*g, x, p, o);
    CHECK(a.z_hat == b.z_hat);
    CHECK(a.final_loss == b.final_loss);
    CHECK(parameter_hash(*g) == hash);
    REQUIRE(a.best_so_far.size() == 60);
    for (std::size_t i = 1; i < a.best_so_far.size(); ++i) CHECK(a.best_so_far[i] <= a.best_so_far[i - 1]);
    CHECK(a.final_loss == a.best_so_far.back());
    CHECK(a.best_so_far.back() < a.best_so_far.front());
    const auto recon = generate_images(*g, torch::tensor(a.z_hat.full()).unsqueeze(0))[0];
    CHECK((recon - x).pow(2).mean().item<double>() == doctest::Approx(a.final_loss).epsilon(1e-4));
    const nlohmann::json j = a;
    CHECK(j.contains("z_hat"));
    CHECK(j.contains("converged"));
  }

  TEST_CASE("inversion rejects malformed targets") {
    auto g = small_generator(3);
    const LatentPartition p{100, 50};
    CHECK_THROWS_AS(invert(*g, torch::zeros({3, 64, 64}), p), std::invalid_argument);
    CHECK_THROWS_AS(invert(*g, torch::zeros({3, 32, 32}), {100, 50}, {10, 0, 0.05, 1e-2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(invert(*g, torch::zeros({3, 32, 32}), {90, 50}), std::invalid_argument);
  }

  TEST_CASE("grids share z_I along rows and z_O along columns") {
    PaintGenerator g;
    const std::vector<std::vector<float>> ids{{0.1f, 0.2f, 0.3f, 0, 0}, {-0.5f, 0.5f, 0, 0, 0}};
    const std::vector<std::vector<float>> obs{{1, 1, 1, 1, 1}, {0, 0, 0, 0, 0}, {-1, -1, -1, -1, -1}};
    const auto grid = render_grid(g, ids, obs);
    CHECK(grid.sizes() == torch::IntArrayRef{2, 3, 3, 8, 8});
    CHECK(torch::equal(grid[0][0], grid[0][2]));
    CHECK_FALSE(torch::equal(grid[0][0], grid[1][0]));

    auto real = small_generator(4);
    const auto r1 = random_grid(*real, {100, 50}, 2, 3, 9);
    const auto r2 = random_grid(*real, {100, 50}, 2, 3, 9);
    CHECK(torch::equal(r1, r2));
    CHECK_FALSE(torch::equal(r1, random_grid(*real, {100, 50}, 2, 3, 10)));
  }

  TEST_CASE("interpolation grids pin the corners") {
    auto g = small_generator(5);
    Rng rng(8);
    const LatentPartition p{100, 50};
    const auto a = sample_code(p, rng), b = sample_code(p, rng);
    const auto grid = interpolation_grid(*g, a, b, 3, 4);
    CHECK(grid.sizes() == torch::IntArrayRef{3, 4, 3, 32, 32});
    const auto ga = generate_images(*g, torch::tensor(a.full()).unsqueeze(0))[0];
    const auto gb = generate_images(*g, torch::tensor(b.full()).unsqueeze(0))[0];
    CHECK(torch::allclose(grid[0][0], ga, 1e-5, 1e-5));
    CHECK(torch::allclose(grid[2][3], gb, 1e-5, 1e-5));

    const auto same = interpolation_grid(*g, a, a, 2, 2);
    CHECK(torch::equal(same[0][0], same[1][1]));
    CHECK(torch::equal(same[0][1], same[1][0]));
    CHECK_THROWS_AS(interpolation_grid(*g, a, b, 1, 4), std::invalid_argument);
  }
}
