#include "doctest_torch.hpp"

#include <cmath>
#include <map>
#include <nlohmann/json.hpp>

#include "sdgan/latent.hpp"

using namespace sdgan;

TEST_SUITE("latent") {
  TEST_CASE("partition rejects degenerate splits") {
    CHECK_NOTHROW(LatentPartition::make(100, 50));
    CHECK_THROWS_AS(LatentPartition::make(100, 0), std::invalid_argument);
    CHECK_THROWS_AS(LatentPartition::make(100, 100), std::invalid_argument);
    CHECK_THROWS_AS(LatentPartition::make(100, 120), std::invalid_argument);
    CHECK(LatentPartition::make(100, 25).observation_dim() == 75);
  }

  TEST_CASE("codes are uniform on [-1, 1] with the partition sizes") {
    Rng rng(5);
    const auto p = LatentPartition::make(100, 30);
    double sum = 0.0, sq = 0.0;
    int n = 0;
    for (int i = 0; i < 200; ++i) {
      const auto c = sample_code(p, rng);
      REQUIRE(c.identity.size() == 30);
      REQUIRE(c.observation.size() == 70);
      CHECK(c.in_range());
      CHECK(c.matches(p));
      for (float v : c.full()) {
        sum += v;
        sq += v * v;
        ++n;
      }
    }
    // U(-1, 1): mean 0, variance 1/3
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0 / 3.0) < 0.02);
  }

  TEST_CASE("uniform_index frequencies stay within binomial bounds") {
    Rng rng(17);
    const std::size_t bins = 12;
    const int draws = 60000;
    std::vector<int> counts(bins, 0);
    for (int i = 0; i < draws; ++i) ++counts[uniform_index(rng, bins)];
    const double p = 1.0 / bins;
    const double mean = draws * p;
    const double sd = std::sqrt(draws * p * (1 - p));
    for (int c : counts) CHECK(std::abs(c - mean) < 4 * sd);
  }

  TEST_CASE("a group shares z_I and draws distinct z_O") {
    Rng rng(1);
    const auto p = LatentPartition::make(100, 50);
    CHECK_THROWS_AS(sample_group(p, 1, rng), std::invalid_argument);
    const auto g = sample_group(p, 4, rng);
    REQUIRE(g.k() == 4);
    const auto comp = compose(g);
    REQUIRE(comp.vectors.size() == 4);
    CHECK_FALSE(comp.out_of_range);
    for (int i = 0; i < 4; ++i) {
      const auto& v = comp.vectors[i];
      CHECK(std::equal(g.identity.begin(), g.identity.end(), v.begin()));
      CHECK(std::equal(g.observations[i].begin(), g.observations[i].end(), v.begin() + 50));
      for (int j = 0; j < i; ++j) CHECK(g.observations[i] != g.observations[j]);
    }
  }

  TEST_CASE("compose flags out-of-range codes instead of rejecting them") {
    LatentCode c{{0.5f, 1.5f}, {0.0f}};
    const auto comp = compose(std::span<const LatentCode>(&c, 1));
    CHECK(comp.out_of_range);
    CHECK(comp.vectors[0] == std::vector<float>{0.5f, 1.5f, 0.0f});
  }

  TEST_CASE("lerp hits both endpoints and holds the other axis") {
    Rng rng(2);
    const auto p = LatentPartition::make(10, 4);
    const auto a = sample_code(p, rng), b = sample_code(p, rng);
    const auto both = lerp(a, b, 5, LerpAxis::both);
    REQUIRE(both.size() == 5);
    CHECK(both.front() == a);
    CHECK(both.back() == b);
    CHECK(both[2].identity[1] == doctest::Approx((a.identity[1] + b.identity[1]) / 2));

    for (const auto& c : lerp(a, b, 4, LerpAxis::identity)) CHECK(c.observation == a.observation);
    for (const auto& c : lerp(a, b, 4, LerpAxis::observation)) CHECK(c.identity == a.identity);
    CHECK_THROWS_AS(lerp(a, b, 1, LerpAxis::both), std::invalid_argument);
    CHECK_THROWS_AS(parse_lerp_axis("diagonal"), std::invalid_argument);
    CHECK(parse_lerp_axis(to_string(LerpAxis::observation)) == LerpAxis::observation);
  }

  TEST_CASE("codes round-trip through json") {
    Rng rng(3);
    const auto c = sample_code(LatentPartition::make(8, 3), rng);
    nlohmann::json j = c;
    CHECK(j.contains("z_i"));
    CHECK(j.contains("z_o"));
    CHECK(j.get<LatentCode>() == c);
  }
}
