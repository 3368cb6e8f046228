#include "doctest_torch.hpp"

#include "sdgan/glyphs.hpp"
#include "sdgan/metrics.hpp"
#include "support.hpp"

using namespace sdgan;

namespace {

std::vector<bool> labels(std::initializer_list<int> v) { return std::vector<bool>(v.begin(), v.end()); }

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("threshold calibration on separable and degenerate sets") {
    const std::vector<double> d{0.1, 0.2, 0.9, 1.1};
    const auto c = calibrate_threshold(d, labels({1, 1, 0, 0}));
    CHECK(c.tau == doctest::Approx(0.55));
    CHECK(c.accuracy == 1.0);

    // Interleaved: no threshold beats "reject everything"
    const std::vector<double> e{0.1, 0.2, 0.3, 0.4};
    const auto ci = calibrate_threshold(e, labels({0, 1, 0, 1}));
    CHECK(ci.accuracy == 0.5);
    CHECK(ci.tau == doctest::Approx(0.1 - 1.0));

    const std::vector<double> f{0.7, 0.7, 0.7, 0.7};
    const auto ce = calibrate_threshold(f, labels({1, 0, 1, 0}));
    CHECK(ce.accuracy == 0.5);
    CHECK(ce.tau == doctest::Approx(0.7 - 1.0));

    CHECK_THROWS_AS(calibrate_threshold(d, labels({1, 1, 1, 1})), std::invalid_argument);
    CHECK_THROWS_AS(calibrate_threshold(d, labels({1, 0})), std::invalid_argument);
  }

  TEST_CASE("threshold calibration matches exhaustive search") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> len(2, 40), coin(0, 1), level(0, 12);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = len(rng);
      std::vector<double> d;
      std::vector<bool> m;
      for (int i = 0; i < n; ++i) {
        d.push_back(level(rng) * 0.25);  // coarse grid forces ties
        m.push_back(coin(rng) == 1);
      }
      m[0] = true;
      m[1] = false;
      const auto [tau, acc] = testing::exhaustive_threshold(d, m);
      const auto c = calibrate_threshold(d, m);
      CHECK(c.tau == tau);
      CHECK(c.accuracy == acc);
    }
  }

  TEST_CASE("AUC matches pairwise brute force and is rank invariant") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> level(0, 20), coin(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> s;
      std::vector<bool> p;
      for (int i = 0; i < 60; ++i) {
        s.push_back(level(rng) / 7.0);
        p.push_back(coin(rng) == 1);
      }
      p[0] = true;
      p[1] = false;
      const double auc = roc_auc(s, p);
      CHECK(std::abs(auc - testing::brute_force_auc(s, p)) < 1e-12);
      std::vector<double> t;
      for (double v : s) t.push_back(std::exp(3 * v) - 5);
      CHECK(roc_auc(t, p) == doctest::Approx(auc).epsilon(1e-12));
    }
    const std::vector<double> s{1, 2, 3, 4};
    CHECK(roc_auc(s, labels({0, 0, 1, 1})) == 1.0);
    CHECK(roc_auc(s, labels({1, 1, 0, 0})) == 0.0);
    CHECK_THROWS_AS(roc_auc(s, labels({1, 1, 1, 1})), std::invalid_argument);
  }

  TEST_CASE("verification metrics at a fixed threshold") {
    const std::vector<double> d{0.1, 0.5, 0.3, 0.9};
    const auto r = verification_metrics(d, labels({1, 1, 0, 0}), 0.4);
    CHECK(r.accuracy == 0.5);
    CHECK(r.far == 0.5);
    CHECK(r.matched == 2);
    CHECK(r.unmatched == 2);
    CHECK(r.auc == doctest::Approx(0.75));
    CHECK(std::isnan(verification_metrics(d, labels({1, 1, 1, 1}), 0.4).auc));
    CHECK_THROWS_AS(verification_metrics(std::vector<double>{}, {}, 0.0), std::invalid_argument);
  }

  TEST_CASE("MS-SSIM agrees with the brute-force reference") {
    torch::manual_seed(9);
    for (int i = 0; i < 5; ++i) {
      const auto x = torch::rand({3, 32, 32}) * 2 - 1;
      const auto y = (x + 0.3 * torch::randn({3, 32, 32})).clamp(-1, 1);
      CHECK(std::abs(msssim(x, y) - testing::reference_msssim(x, y)) < 1e-6);
    }
    const auto g = make_glyphs({2, 1, 2, 64, 3});
    const auto& a = g.records[0].images[0].pixels;
    const auto& b = g.records[1].images[1].pixels;
    CHECK(std::abs(msssim(a, b) - testing::reference_msssim(a, b)) < 1e-6);
  }

  TEST_CASE("MS-SSIM basic properties") {
    torch::manual_seed(1);
    const auto x = torch::rand({3, 32, 32}) * 2 - 1;
    const auto y = torch::rand({3, 32, 32}) * 2 - 1;
    CHECK(msssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(msssim(x, y) == doctest::Approx(msssim(y, x)).epsilon(1e-12));
    CHECK(msssim(x, y) < 0.5);
    const auto flat = torch::full({3, 16, 16}, 0.25f);
    CHECK(msssim(flat, flat) == doctest::Approx(1.0));

    const auto batch = msssim_batch(torch::stack({x, y}), torch::stack({x, x}));
    CHECK(batch.sizes() == torch::IntArrayRef{2});
    CHECK(batch[1].item<double>() == doctest::Approx(msssim(y, x)).epsilon(1e-12));
    CHECK_THROWS(msssim(x, torch::zeros({3, 16, 16})));

    CHECK(msssim_weights(64, 64).size() == 3);
    CHECK(msssim_weights(256, 256).size() == 5);
    double total = 0;
    for (double w : msssim_weights(32, 32)) total += w;
    CHECK(total == doctest::Approx(1.0));
  }

  TEST_CASE("diversity of identical and independent images") {
    torch::manual_seed(2);
    Rng rng(3);
    std::vector<torch::Tensor> same;
    for (int i = 0; i < 4; ++i) same.push_back(torch::rand({1, 3, 32, 32}).expand({5, 3, 32, 32}).clone());
    CHECK(id_div(same, 50, rng) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(all_div(same, 200, rng) > 0.5);

    std::vector<torch::Tensor> noise;
    for (int i = 0; i < 4; ++i) noise.push_back(torch::rand({6, 3, 32, 32}) * 2 - 1);
    double baseline = 0;
    for (int i = 0; i < 6; ++i) baseline += testing::reference_msssim(noise[0][i], noise[1][(i + 1) % 6]) / 6;
    CHECK(id_div(noise, 200, rng) == doctest::Approx(1 - baseline).epsilon(0.02));

    CHECK_THROWS_AS(id_div(std::vector<torch::Tensor>{torch::zeros({1, 3, 8, 8})}, 10, rng), std::invalid_argument);
    CHECK_THROWS_AS(id_div(noise, 0, rng), std::invalid_argument);
  }

  TEST_CASE("glyph identities are less diverse than the whole set") {
    const auto ds = make_glyphs({4, 3, 6, 32, 8});
    std::vector<torch::Tensor> groups;
    for (const auto& rec : ds.records) {
      std::vector<torch::Tensor> imgs;
      for (const auto& img : rec.images) imgs.push_back(img.pixels);
      groups.push_back(torch::stack(imgs));
    }
    Rng rng(1);
    const double id = id_div(groups, 500, rng), all = all_div(groups, 500, rng);
    CHECK(id > 0.05);
    CHECK(all > id);
  }

  TEST_CASE("generator diversity pairs follow the partition") {
    ModelConfig c;
    c.resolution = 32;
    torch::manual_seed(5);
    auto g = build_generator(c);
    g->eval();
    Rng rng(7);
    const double id = id_div(*g, c.partition(), 64, rng);
    const double all = all_div(*g, c.partition(), 64, rng);
    CHECK(id >= 0.0);
    CHECK(all >= 0.0);
    const auto codes = torch::rand({300, 100}) * 2 - 1;
    const auto imgs = generate_images(*g, codes);
    CHECK(imgs.sizes() == torch::IntArrayRef{300, 3, 32, 32});
    CHECK_FALSE(imgs.requires_grad());
    CHECK(torch::allclose(imgs.slice(0, 290), generate_images(*g, codes.slice(0, 290)), 1e-5, 1e-5));
  }
}
