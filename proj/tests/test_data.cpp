#include "doctest_torch.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sdgan/data.hpp"
#include "sdgan/glyphs.hpp"
#include "sdgan/image.hpp"
#include "support.hpp"

using namespace sdgan;

namespace {

Rgb8 solid(int size, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Rgb8 img{size, size, {}};
  for (int i = 0; i < size * size; ++i) img.data.insert(img.data.end(), {r, g, b});
  return img;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("rgb8 conversion round-trips exactly") {
    Rgb8 img{3, 2, {}};
    for (int i = 0; i < 18; ++i) img.data.push_back(static_cast<std::uint8_t>(i * 14));
    const auto t = from_rgb8(img);
    CHECK(t.sizes() == torch::IntArrayRef{3, 2, 3});
    CHECK(t.min().item<float>() >= -1.0f);
    CHECK(t.max().item<float>() <= 1.0f);
    CHECK(to_rgb8(t).data == img.data);

    const auto png = encode_png(img);
    const auto back = decode_image(png);
    REQUIRE(back.has_value());
    CHECK(back->data == img.data);
    CHECK(content_hash(img) == content_hash(*back));
    CHECK(content_hash(img).size() == 64);
    CHECK_FALSE(decode_image({1, 2, 3}).has_value());
  }

  TEST_CASE("base64 matches known vectors") {
    auto b = [](const std::string& s) { return base64_encode({s.begin(), s.end()}); };
    CHECK(b("") == "");
    CHECK(b("f") == "Zg==");
    CHECK(b("fo") == "Zm8=");
    CHECK(b("foobar") == "Zm9vYmFy");
  }

  TEST_CASE("ingest resizes, deduplicates and drops thin identities") {
    testing::TempDir dir("ingest");
    const auto root = dir.path();
    fs::create_directories(root / "alice");
    fs::create_directories(root / "bob");
    fs::create_directories(root / "carol");
    write_png(root / "alice" / "a.png", solid(40, 200, 10, 10));
    write_png(root / "alice" / "b.png", solid(40, 10, 200, 10));
    write_png(root / "alice" / "c.png", solid(40, 200, 10, 10));  // duplicate of a
    write_png(root / "bob" / "a.png", solid(16, 1, 2, 3));
    write_png(root / "bob" / "b.png", solid(16, 1, 2, 3));  // duplicate, leaves one image
    write_png(root / "carol" / "a.png", solid(20, 9, 9, 9));
    write_png(root / "carol" / "b.png", solid(20, 90, 90, 90));
    std::ofstream(root / "carol" / "broken.png") << "not an image";

    const auto ds = ingest(root, 8);
    CHECK(ds.resolution == 8);
    REQUIRE(ds.records.size() == 2);
    const auto* alice = ds.find("alice");
    REQUIRE(alice != nullptr);
    CHECK(alice->images.size() == 2);
    CHECK(alice->images[0].pixels.sizes() == torch::IntArrayRef{3, 8, 8});
    CHECK(ds.find("bob") == nullptr);
    CHECK(ds.find("carol")->images.size() == 2);
    CHECK(ds.num_images() == 4);
  }

  TEST_CASE("ingest of an empty tree is a data error") {
    testing::TempDir dir("empty");
    CHECK_THROWS_AS(ingest(dir.path(), 32), DataError);
    CHECK_THROWS_AS(ingest(dir / "missing", 32), DataError);
  }

  TEST_CASE("splits are disjoint, complete and reproducible") {
    const auto ds = make_glyphs({4, 5, 2, 16, 1});
    const auto s = split(ds, {}, 9);
    CHECK(s.train.size() == 16);
    CHECK(s.validation.size() == 2);
    CHECK(s.test.size() == 2);
    std::set<std::string> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(part->begin(), part->end());
    CHECK(all.size() == 20);
    CHECK(s.which(s.test[0]) == "test");
    CHECK(s.which("nobody").empty());

    const auto again = split(ds, {}, 9);
    CHECK(again.train == s.train);
    CHECK(split(ds, {}, 10).train != s.train);
  }

  TEST_CASE("an image shared by two identities breaks the split") {
    auto ds = make_glyphs({2, 2, 2, 16, 1});
    ds.records[1].images[0].hash = ds.records[0].images[0].hash;
    bool thrown = false;
    for (std::uint64_t seed = 0; seed < 20 && !thrown; ++seed) {
      try {
        split(ds, {0.5, 0.25, 0.25}, seed);
      } catch (const ConsistencyError&) {
        thrown = true;
      }
    }
    CHECK(thrown);
  }

  TEST_CASE("real tuples hold distinct images of one identity") {
    auto ds = make_glyphs({2, 2, 3, 16, 4});
    ds.records[0].images.resize(2);
    Rng rng(8);
    for (int i = 0; i < 500; ++i) {
      const auto t = sample_real_tuple(ds, 3, rng);
      CHECK(t.record != 0);
      CHECK(ds.records[t.record].identity_id == t.identity_id);
      CHECK(std::set<std::size_t>(t.images.begin(), t.images.end()).size() == 3);
    }
    CHECK_THROWS_AS(sample_real_tuple(ds, 4, rng), DataError);
  }

  TEST_CASE("manifest lists every identity with its split") {
    testing::TempDir dir("manifest");
    const auto ds = make_glyphs({2, 2, 2, 16, 1});
    const auto s = split(ds, {0.5, 0.25, 0.25}, 1);
    write_manifest(dir / "manifest.jsonl", ds, &s);
    std::ifstream in(dir / "manifest.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.at("split").get<std::string>() == s.which(j.at("identity_id").get<std::string>()));
      CHECK(j.at("images").size() == 2);
      ++n;
    }
    CHECK(n == 4);
  }
}

TEST_SUITE("glyphs") {
  TEST_CASE("glyph datasets are deterministic under a seed") {
    const auto a = make_glyphs({3, 2, 4, 32, 5});
    const auto b = make_glyphs({3, 2, 4, 32, 5});
    const auto c = make_glyphs({3, 2, 4, 32, 6});
    REQUIRE(a.records.size() == 6);
    for (std::size_t r = 0; r < a.records.size(); ++r) {
      CHECK(a.records[r].identity_id == b.records[r].identity_id);
      for (std::size_t i = 0; i < a.records[r].images.size(); ++i)
        CHECK(a.records[r].images[i].hash == b.records[r].images[i].hash);
    }
    CHECK(a.records[0].images[0].hash != c.records[0].images[0].hash);
  }

  TEST_CASE("glyph specs are validated") {
    CHECK_THROWS_AS(make_glyphs({1, 1, 4, 32, 0}), std::invalid_argument);
    CHECK_THROWS_AS(make_glyphs({2, 2, 1, 32, 0}), std::invalid_argument);
    CHECK_THROWS_AS(make_glyphs({7, 2, 4, 32, 0}), std::invalid_argument);
    CHECK_THROWS_AS(make_glyphs({2, 0, 4, 32, 0}), std::invalid_argument);
  }

  TEST_CASE("foreground hue of every render matches its identity") {
    const int hues = 6;
    const auto ds = make_glyphs({4, hues, 6, 32, 2});
    std::vector<int> histogram(hues, 0);
    for (const auto& rec : ds.records) {
      for (const auto& img : rec.images) {
        REQUIRE(img.factors.has_value());
        CHECK(img.factors->shape_index < 4);
        CHECK(img.factors->scale >= 0.5);
        CHECK(img.factors->scale <= 0.9);
        CHECK(std::abs(img.factors->translation[0]) <= 0.2);
        // Background is gray; the most saturated pixel belongs to the glyph.
        const auto rgb = to_rgb8(img.pixels);
        double best_sat = -1, hue = 0;
        for (std::size_t i = 0; i < rgb.data.size(); i += 3) {
          const double r = rgb.data[i] / 255.0, g = rgb.data[i + 1] / 255.0, b = rgb.data[i + 2] / 255.0;
          const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
          if (mx - mn <= best_sat) continue;
          best_sat = mx - mn;
          const double d = mx - mn;
          double h = mx == r ? std::fmod((g - b) / d, 6.0) : (mx == g ? (b - r) / d + 2 : (r - g) / d + 4);
          h *= 60;
          hue = h < 0 ? h + 360 : h;
        }
        const int bin = static_cast<int>(std::lround(hue / (360.0 / hues))) % hues;
        CHECK(bin == img.factors->hue_index);
        ++histogram[static_cast<std::size_t>(bin)];
      }
    }
    for (int count : histogram) CHECK(count == 4 * 6);
  }

  TEST_CASE("hue wheel colors are fully saturated") {
    const auto red = glyph_hue_rgb(0, 3);
    CHECK(red[0] == doctest::Approx(1.0));
    CHECK(red[1] == doctest::Approx(0.0));
    const auto green = glyph_hue_rgb(1, 3);
    CHECK(green[1] == doctest::Approx(1.0));
    CHECK(green[2] == doctest::Approx(0.0));
  }

  TEST_CASE("written glyph datasets ingest back to the same identities") {
    testing::TempDir dir("glyphs");
    auto ds = make_glyphs({2, 2, 3, 32, 1});
    write_glyph_dataset(dir.path(), ds);
    CHECK(fs::exists(dir / "factors.json"));
    const auto back = ingest(dir.path(), 32);
    REQUIRE(back.records.size() == 4);
    for (const auto& rec : ds.records) {
      const auto* r = back.find(rec.identity_id);
      REQUIRE(r != nullptr);
      CHECK(r->images.size() == rec.images.size());
    }
  }
}
