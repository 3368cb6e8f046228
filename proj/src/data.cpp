#include "sdgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sdgan/image.hpp"

namespace sdgan {

namespace fs = std::filesystem;

std::size_t IdentityDataset::num_images() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.images.size();
  return n;
}

const IdentityRecord* IdentityDataset::find(const std::string& identity_id) const {
  for (const auto& r : records) {
    if (r.identity_id == identity_id) return &r;
  }
  return nullptr;
}

IdentityDataset IdentityDataset::subset(const std::vector<std::string>& ids) const {
  IdentityDataset out;
  out.resolution = resolution;
  for (const auto& id : ids) {
    if (const auto* r = find(id)) out.records.push_back(*r);
  }
  return out;
}

std::vector<ImageRef> dedup(std::vector<ImageRef> images) {
  std::unordered_set<std::string> seen;
  std::vector<ImageRef> out;
  out.reserve(images.size());
  for (auto& img : images) {
    if (seen.insert(img.hash).second) out.push_back(std::move(img));
  }
  return out;
}

namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

IdentityDataset ingest(const fs::path& root, int resolution) {
  if (resolution <= 0) throw std::invalid_argument("resolution must be positive");
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());

  IdentityDataset ds;
  ds.resolution = resolution;
  std::vector<std::pair<std::string, ImageRef>> all;
  for (const auto& dir : sorted_entries(root, true)) {
    const auto id = dir.filename().string();
    for (const auto& file : sorted_entries(dir, false)) {
      if (!is_image_file(file)) continue;
      auto decoded = read_image(file);
      if (!decoded) {
        std::cerr << "[warn] skipping unreadable image " << file << '\n';
        continue;
      }
      auto rgb = resize_square(*decoded, resolution);
      ImageRef ref;
      ref.path = file.string();
      ref.hash = content_hash(rgb);
      ref.pixels = from_rgb8(rgb);
      all.emplace_back(id, std::move(ref));
    }
  }

  // Dedup across the whole dataset, first occurrence (sorted order) wins.
  std::unordered_set<std::string> seen;
  std::map<std::string, IdentityRecord> by_id;
  std::vector<std::string> order;
  for (auto& [id, ref] : all) {
    if (!seen.insert(ref.hash).second) continue;
    auto [it, fresh] = by_id.try_emplace(id);
    if (fresh) {
      it->second.identity_id = id;
      order.push_back(id);
    }
    it->second.images.push_back(std::move(ref));
  }
  for (const auto& id : order) {
    auto& rec = by_id[id];
    if (rec.images.size() >= 2) ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty()) throw DataError("no identity with at least two usable images under " + root.string());
  return ds;
}

std::string DatasetSplit::which(const std::string& identity_id) const {
  auto has = [&](const std::vector<std::string>& v) {
    return std::find(v.begin(), v.end(), identity_id) != v.end();
  };
  if (has(train)) return "train";
  if (has(validation)) return "validation";
  if (has(test)) return "test";
  return {};
}

DatasetSplit split(const IdentityDataset& dataset, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0 || f.validation < 0 || f.test < 0 ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must be non-negative and sum to 1");
  }
  std::vector<std::string> ids;
  for (const auto& r : dataset.records) ids.push_back(r.identity_id);
  {
    std::unordered_set<std::string> uniq(ids.begin(), ids.end());
    if (uniq.size() != ids.size()) throw ConsistencyError("duplicate identity_id in dataset");
  }
  Rng rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[uniform_index(rng, i)]);

  const auto n = ids.size();
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_val = std::min(n - std::min(n, n_train),
                              static_cast<std::size_t>(std::llround(f.validation * static_cast<double>(n))));
  DatasetSplit s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train)));
  s.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(s.train.size()),
                      ids.begin() + static_cast<std::ptrdiff_t>(s.train.size() + n_val));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(s.train.size() + n_val), ids.end());

  // Image-level disjointness.
  std::unordered_map<std::string, std::string> owner;
  for (const auto& rec : dataset.records) {
    const auto part = s.which(rec.identity_id);
    for (const auto& img : rec.images) {
      auto [it, fresh] = owner.emplace(img.hash, part);
      if (!fresh && it->second != part) {
        throw ConsistencyError("image " + img.hash.substr(0, 12) + " of identity " + rec.identity_id +
                               " appears in both " + it->second + " and " + part + " splits");
      }
    }
  }
  return s;
}

RealTuple sample_real_tuple(const IdentityDataset& dataset, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("tuple size must be positive");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    if (dataset.records[i].images.size() >= static_cast<std::size_t>(k)) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw DataError("no identity has at least " + std::to_string(k) + " images");
  }
  RealTuple t;
  t.record = eligible[uniform_index(rng, eligible.size())];
  const auto& rec = dataset.records[t.record];
  t.identity_id = rec.identity_id;
  std::vector<std::size_t> idx(rec.images.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Partial Fisher-Yates: first k slots are a uniform draw without replacement.
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
  }
  t.images.assign(idx.begin(), idx.begin() + k);
  return t;
}

void write_manifest(const fs::path& path, const IdentityDataset& dataset, const DatasetSplit* splits) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  for (const auto& rec : dataset.records) {
    nlohmann::json line;
    line["identity_id"] = rec.identity_id;
    line["split"] = splits ? splits->which(rec.identity_id) : std::string{};
    auto& images = line["images"] = nlohmann::json::array();
    for (const auto& img : rec.images) images.push_back({{"path", img.path}, {"hash", img.hash}});
    out << line.dump() << '\n';
  }
}

}  // namespace sdgan
