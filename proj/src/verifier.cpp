#include "sdgan/verifier.hpp"

#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sdgan/image.hpp"
#include "sdgan/train.hpp"

namespace sdgan {

namespace fs = std::filesystem;
namespace nn = torch::nn;
namespace F = torch::nn::functional;
using torch::Tensor;

// ---------------------------------------------------------------------------
// Pair sets

namespace {

std::pair<std::size_t, std::size_t> distinct_two(Rng& rng, std::size_t n) {
  const auto a = uniform_index(rng, n);
  auto b = uniform_index(rng, n - 1);
  if (b >= a) ++b;
  return {a, b};
}

}  // namespace

PairSet real_pairs(const IdentityDataset& dataset, int n_pairs, Rng& rng) {
  if (n_pairs < 2) throw std::invalid_argument("a balanced pair set needs at least two pairs");
  std::vector<std::size_t> multi;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    if (dataset.records[i].images.size() >= 2) multi.push_back(i);
  }
  if (multi.empty() || dataset.records.size() < 2) {
    throw std::invalid_argument("balanced real pairs need two identities and one with two images");
  }
  std::vector<Tensor> a, b;
  PairSet out;
  const int half = n_pairs / 2;
  for (int p = 0; p < n_pairs; ++p) {
    if (p < half) {
      const auto& rec = dataset.records[multi[uniform_index(rng, multi.size())]];
      const auto [i, j] = distinct_two(rng, rec.images.size());
      a.push_back(rec.images[i].pixels);
      b.push_back(rec.images[j].pixels);
      out.matched.push_back(true);
    } else {
      const auto [r, s] = distinct_two(rng, dataset.records.size());
      const auto& ra = dataset.records[r];
      const auto& rb = dataset.records[s];
      a.push_back(ra.images[uniform_index(rng, ra.images.size())].pixels);
      b.push_back(rb.images[uniform_index(rng, rb.images.size())].pixels);
      out.matched.push_back(false);
    }
  }
  out.first = torch::stack(a);
  out.second = torch::stack(b);
  return out;
}

PairSet generated_pairs(GeneratorNet& generator, const LatentPartition& partition, int n_pairs, Rng& rng) {
  if (n_pairs < 2) throw std::invalid_argument("a balanced pair set needs at least two pairs");
  const int half = n_pairs / 2;
  const int rest = n_pairs - half;
  auto same = latent_tuples(partition, 2, half, rng);
  auto first_codes = latent_tuples(partition, 2, rest, rng).select(1, 0);
  auto second_codes = latent_tuples(partition, 2, rest, rng).select(1, 0);
  auto a = torch::cat({same.select(1, 0), first_codes});
  auto b = torch::cat({same.select(1, 1), second_codes});
  PairSet out;
  out.first = generate_images(generator, a.contiguous());
  out.second = generate_images(generator, b.contiguous());
  out.matched.assign(static_cast<std::size_t>(half), true);
  out.matched.resize(static_cast<std::size_t>(n_pairs), false);
  return out;
}

// ---------------------------------------------------------------------------
// Verifier

std::vector<double> Verifier::distances(const Tensor& a, const Tensor& b) const {
  if (a.sizes() != b.sizes()) throw std::invalid_argument("pair tensors differ in shape");
  constexpr std::int64_t chunk = 512;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(a.size(0)));
  for (std::int64_t i = 0; i < a.size(0); i += chunk) {
    const auto n = std::min(chunk, a.size(0) - i);
    auto d = (embed(a.narrow(0, i, n)).to(torch::kFloat64) - embed(b.narrow(0, i, n)).to(torch::kFloat64))
                 .pow(2)
                 .sum(1)
                 .contiguous();
    out.insert(out.end(), d.data_ptr<double>(), d.data_ptr<double>() + n);
  }
  return out;
}

ThresholdCalibration Verifier::calibrate(const PairSet& pairs) {
  const auto d = distances(pairs.first, pairs.second);
  const auto c = calibrate_threshold(d, pairs.matched);
  tau_ = c.tau;
  return c;
}

double Verifier::threshold() const {
  if (!tau_) throw std::logic_error("verifier threshold is not calibrated");
  return *tau_;
}

VerificationResult Verifier::verify(const PairSet& pairs) const {
  if (pairs.size() == 0) throw std::invalid_argument("empty pair set");
  return verification_metrics(distances(pairs.first, pairs.second), pairs.matched, threshold());
}

// ---------------------------------------------------------------------------
// Glyph verifier

namespace {

void conv_block(nn::Sequential& seq, int in, int out) {
  seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)));
  seq->push_back(nn::BatchNorm2d(out));
  seq->push_back(nn::ReLU());
  seq->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(2)));
}

struct GlyphNetImpl : nn::Module {
  GlyphNetImpl(const std::vector<int>& head_classes, int embedding_dim, double scale)
      : scale(scale), dim(embedding_dim) {
    nn::Sequential seq;
    conv_block(seq, 3, 32);
    conv_block(seq, 32, 64);
    conv_block(seq, 64, 128);
    seq->push_back(nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions({4, 4})));
    seq->push_back(nn::Flatten());
    features = register_module("features", seq);
    const auto heads = static_cast<std::int64_t>(head_classes.size());
    fc = register_module("fc", nn::Linear(128 * 16, embedding_dim * heads));
    for (std::size_t h = 0; h < head_classes.size(); ++h) {
      classes.push_back(register_parameter("classes" + std::to_string(h),
                                           torch::randn({head_classes[h], embedding_dim}) * 0.1));
    }
  }

  // (N, heads, dim), each head unit length.
  Tensor head_embeddings(const Tensor& x) {
    auto e = fc(features->forward(x)).view({x.size(0), static_cast<std::int64_t>(classes.size()), dim});
    return F::normalize(e, F::NormalizeFuncOptions().dim(2));
  }

  Tensor embedding(const Tensor& x) {
    const auto heads = static_cast<double>(classes.size());
    return head_embeddings(x).flatten(1) / std::sqrt(heads);
  }

  std::vector<Tensor> logits(const Tensor& x) {
    auto e = head_embeddings(x);
    std::vector<Tensor> out;
    for (std::size_t h = 0; h < classes.size(); ++h) {
      auto w = F::normalize(classes[h], F::NormalizeFuncOptions().dim(1));
      out.push_back(scale * torch::matmul(e.select(1, static_cast<std::int64_t>(h)), w.t()));
    }
    return out;
  }

  double scale;
  std::int64_t dim;
  nn::Sequential features{nullptr};
  nn::Linear fc{nullptr};
  std::vector<Tensor> classes;
};
TORCH_MODULE(GlyphNet);

}  // namespace

struct GlyphVerifier::Impl {
  std::vector<int> head_classes;
  int resolution;
  GlyphVerifierConfig config;
  GlyphNet net;
  nlohmann::json report = nlohmann::json::object();

  Impl(std::vector<int> h, int r, const GlyphVerifierConfig& c)
      : head_classes(std::move(h)), resolution(r), config(c), net(head_classes, c.embedding_dim, c.scale) {}
};

GlyphVerifier::GlyphVerifier(std::vector<int> head_classes, int resolution, const GlyphVerifierConfig& config) {
  if (head_classes.empty()) throw std::invalid_argument("glyph verifier needs at least one head");
  for (int n : head_classes) {
    if (n < 1) throw std::invalid_argument("every verifier head needs at least one class");
  }
  impl_ = std::make_unique<Impl>(std::move(head_classes), resolution, config);
}

GlyphVerifier::~GlyphVerifier() = default;

Tensor GlyphVerifier::embed(const Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3) throw std::invalid_argument("embed expects (N, 3, R, R) images");
  torch::NoGradGuard no_grad;
  // Embedding runs in eval mode; training toggles the mode itself.
  if (impl_->net->is_training()) impl_->net->eval();
  return impl_->net->embedding(images.to(torch::kFloat32));
}

std::vector<Tensor> GlyphVerifier::class_logits(const Tensor& images) { return impl_->net->logits(images); }

nn::Module& GlyphVerifier::module() { return *impl_->net; }

nlohmann::json& GlyphVerifier::report() { return impl_->report; }
const nlohmann::json& GlyphVerifier::report() const { return impl_->report; }

void GlyphVerifier::save(const fs::path& dir) const {
  fs::create_directories(dir);
  torch::serialize::OutputArchive archive;
  impl_->net->save(archive);
  archive.save_to((dir / "verifier.pt").string());
  const auto& c = impl_->config;
  nlohmann::json j{{"type", "glyph"},
                   {"head_classes", impl_->head_classes},
                   {"resolution", impl_->resolution},
                   {"embedding_dim", c.embedding_dim},
                   {"scale", c.scale},
                   {"tau", tau_ ? nlohmann::json(*tau_) : nlohmann::json(nullptr)},
                   {"report", impl_->report}};
  std::ofstream(dir / "verifier.json") << j.dump(2) << '\n';
}

std::unique_ptr<GlyphVerifier> GlyphVerifier::load(const fs::path& dir) {
  std::ifstream in(dir / "verifier.json");
  if (!in) throw std::runtime_error("no verifier.json in " + dir.string());
  const auto j = nlohmann::json::parse(in);
  if (j.at("type") != "glyph") throw std::runtime_error("not a glyph verifier: " + dir.string());
  GlyphVerifierConfig c;
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.scale = j.at("scale").get<double>();
  auto v = std::make_unique<GlyphVerifier>(j.at("head_classes").get<std::vector<int>>(),
                                           j.at("resolution").get<int>(), c);
  torch::serialize::InputArchive archive;
  archive.load_from((dir / "verifier.pt").string());
  v->impl_->net->load(archive);
  v->impl_->net->eval();
  if (!j.at("tau").is_null()) v->set_threshold(j.at("tau").get<double>());
  v->impl_->report = j.value("report", nlohmann::json::object());
  return v;
}

std::unique_ptr<GlyphVerifier> train_glyph_verifier(const IdentityDataset& dataset,
                                                    const GlyphVerifierConfig& config) {
  const auto parts = split(dataset, SplitFractions{}, config.seed);
  if (parts.train.size() < 2) throw std::invalid_argument("verifier training needs at least two training identities");
  if (parts.validation.size() < 2) {
    throw std::invalid_argument("verifier calibration needs at least two validation identities");
  }
  const auto train_set = dataset.subset(parts.train);

  bool factors = config.factor_heads;
  for (const auto& rec : train_set.records) {
    for (const auto& img : rec.images) factors = factors && img.factors.has_value();
  }
  std::vector<Tensor> images;
  std::vector<std::int64_t> labels;  // (N, heads) row-major
  std::vector<int> head_classes = factors ? std::vector<int>{0, 0} : std::vector<int>{0};
  for (std::size_t r = 0; r < train_set.records.size(); ++r) {
    for (const auto& img : train_set.records[r].images) {
      images.push_back(img.pixels);
      if (factors) {
        labels.push_back(img.factors->shape_index);
        labels.push_back(img.factors->hue_index);
        head_classes[0] = std::max(head_classes[0], img.factors->shape_index + 1);
        head_classes[1] = std::max(head_classes[1], img.factors->num_hues);
      } else {
        labels.push_back(static_cast<std::int64_t>(r));
      }
    }
  }
  if (!factors) head_classes[0] = static_cast<int>(train_set.records.size());
  const auto heads = static_cast<std::int64_t>(head_classes.size());
  const auto x = torch::stack(images);
  const auto y = torch::tensor(labels, torch::kInt64).view({-1, heads});

  torch::manual_seed(config.seed);
  auto verifier = std::make_unique<GlyphVerifier>(head_classes, dataset.resolution, config);
  auto& net = verifier->module();
  torch::optim::Adam opt(net.parameters(), torch::optim::AdamOptions(config.lr));
  Rng rng(config.seed);
  std::vector<std::int64_t> order(static_cast<std::size_t>(x.size(0)));
  double last_loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    net.train();
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    double sum = 0.0;
    int batches = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(config.batch)) {
      const auto e = std::min(order.size(), s + static_cast<std::size_t>(config.batch));
      if (e - s < 2) continue;
      auto idx = torch::tensor(std::vector<std::int64_t>(order.begin() + static_cast<std::ptrdiff_t>(s),
                                                         order.begin() + static_cast<std::ptrdiff_t>(e)));
      const auto logits = verifier->class_logits(x.index_select(0, idx));
      const auto target = y.index_select(0, idx);
      auto loss = torch::zeros({});
      for (std::int64_t h = 0; h < heads; ++h) loss = loss + F::cross_entropy(logits[h], target.select(1, h));
      opt.zero_grad();
      loss.backward();
      opt.step();
      sum += loss.item<double>();
      ++batches;
    }
    last_loss = batches ? sum / batches : 0.0;
  }
  net.eval();

  Rng pair_rng(config.seed ^ 0x5eedULL);
  const auto validation = real_pairs(dataset.subset(parts.validation), config.calibration_pairs, pair_rng);
  const auto cal = verifier->calibrate(validation);
  auto& report = verifier->report();
  report["train_identities"] = parts.train.size();
  report["heads"] = factors ? "shape,hue" : "identity";
  report["validation_ids"] = parts.validation;
  report["test_ids"] = parts.test;
  report["final_train_loss"] = last_loss;
  report["tau"] = cal.tau;
  report["validation_accuracy"] = cal.accuracy;
  if (parts.test.size() >= 2) {
    const auto test = verifier->verify(real_pairs(dataset.subset(parts.test), config.calibration_pairs, pair_rng));
    report["test"] = {{"auc", test.auc}, {"acc", test.accuracy}, {"far", test.far}};
  }
  return verifier;
}

// ---------------------------------------------------------------------------
// Embedding table

std::unique_ptr<EmbeddingTableVerifier> EmbeddingTableVerifier::from_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding table " + path.string());
  auto v = std::make_unique<EmbeddingTableVerifier>();
  v->source_ = path;
  std::string line;
  std::size_t dim = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto emb = j.at("embedding").get<std::vector<float>>();
      if (emb.empty() || (dim && emb.size() != dim)) throw std::runtime_error("inconsistent embedding size");
      dim = emb.size();
      v->table_[j.at("image_hash").get<std::string>()] = std::move(emb);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (v->table_.empty()) throw std::runtime_error("embedding table is empty: " + path.string());
  return v;
}

Tensor EmbeddingTableVerifier::embed(const Tensor& images) const {
  std::vector<Tensor> rows;
  for (std::int64_t i = 0; i < images.size(0); ++i) {
    const auto hash = content_hash(to_rgb8(images[i]));
    const auto it = table_.find(hash);
    if (it == table_.end()) throw std::out_of_range("no embedding for image " + hash);
    rows.push_back(torch::tensor(it->second));
  }
  return torch::stack(rows);
}

void EmbeddingTableVerifier::save(const fs::path& dir) const {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "embeddings.jsonl");
    for (const auto& [hash, emb] : table_) out << nlohmann::json{{"image_hash", hash}, {"embedding", emb}}.dump() << '\n';
  }
  nlohmann::json j{{"type", "embedding_table"},
                   {"table", "embeddings.jsonl"},
                   {"tau", tau_ ? nlohmann::json(*tau_) : nlohmann::json(nullptr)}};
  std::ofstream(dir / "verifier.json") << j.dump(2) << '\n';
}

std::unique_ptr<Verifier> load_verifier(const fs::path& path) {
  if (fs::is_regular_file(path)) return EmbeddingTableVerifier::from_jsonl(path);
  std::ifstream in(path / "verifier.json");
  if (!in) throw std::runtime_error("no verifier at " + path.string());
  const auto j = nlohmann::json::parse(in);
  const auto type = j.at("type").get<std::string>();
  if (type == "glyph") return GlyphVerifier::load(path);
  if (type == "embedding_table") {
    auto v = EmbeddingTableVerifier::from_jsonl(path / j.at("table").get<std::string>());
    if (!j.at("tau").is_null()) v->set_threshold(j.at("tau").get<double>());
    return v;
  }
  throw std::runtime_error("unknown verifier type '" + type + "'");
}

}  // namespace sdgan
