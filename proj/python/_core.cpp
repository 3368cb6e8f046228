#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "sdgan/checkpoint.hpp"
#include "sdgan/evaluate.hpp"
#include "sdgan/glyphs.hpp"
#include "sdgan/image.hpp"
#include "sdgan/inversion.hpp"
#include "sdgan/metrics.hpp"
#include "sdgan/service.hpp"
#include "sdgan/train.hpp"
#include "sdgan/verifier.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

torch::Tensor to_tensor(const FloatArray& a) {
  std::vector<std::int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<float*>(a.data()), shape, torch::kFloat32).clone();
}

FloatArray to_numpy(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat32).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  FloatArray out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<float>(), static_cast<std::size_t>(c.numel()) * sizeof(float));
  return out;
}

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<bool> bools(const std::vector<int>& v) { return {v.begin(), v.end()}; }

py::dict response(const sdgan::HttpResponse& r) {
  py::dict d;
  d["status"] = r.status;
  d["content_type"] = r.content_type;
  d["body"] = py::bytes(r.body);
  return d;
}

// Generator loaded from a checkpoint, kept alive on the Python side.
struct Model {
  sdgan::Checkpoint checkpoint;
  std::shared_ptr<sdgan::GeneratorNet> generator;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semantically decomposed GANs: training, evaluation, inversion and inference";

  // Latent space
  m.def(
      "sample_code",
      [](int total_dim, int identity_dim, std::uint64_t seed) {
        sdgan::Rng rng(seed);
        const auto c = sdgan::sample_code(sdgan::LatentPartition::make(total_dim, identity_dim), rng);
        return py::make_tuple(c.identity, c.observation);
      },
      py::arg("total_dim") = 100, py::arg("identity_dim") = 50, py::arg("seed") = 0,
      "Random (z_I, z_O), uniform on [-1, 1].");
  m.def(
      "lerp",
      [](const py::dict& a, const py::dict& b, int steps, const std::string& axis) {
        const auto path = sdgan::lerp(from_py(a).get<sdgan::LatentCode>(), from_py(b).get<sdgan::LatentCode>(), steps,
                                      sdgan::parse_lerp_axis(axis));
        return to_py(json(path));
      },
      py::arg("a"), py::arg("b"), py::arg("steps"), py::arg("axis") = "both",
      "Interpolate between codes given as {'z_i': [...], 'z_o': [...]}.");

  // Metrics
  m.def(
      "calibrate_threshold",
      [](const std::vector<double>& d, const std::vector<int>& matched) {
        const auto c = sdgan::calibrate_threshold(d, bools(matched));
        return py::make_tuple(c.tau, c.accuracy);
      },
      py::arg("distances"), py::arg("matched"));
  m.def(
      "roc_auc", [](const std::vector<double>& s, const std::vector<int>& p) { return sdgan::roc_auc(s, bools(p)); },
      py::arg("scores"), py::arg("positive"));
  m.def(
      "verification_metrics",
      [](const std::vector<double>& d, const std::vector<int>& matched, double tau) {
        const auto r = sdgan::verification_metrics(d, bools(matched), tau);
        return py::dict(py::arg("auc") = r.auc, py::arg("acc") = r.accuracy, py::arg("far") = r.far);
      },
      py::arg("distances"), py::arg("matched"), py::arg("tau"));
  m.def(
      "msssim",
      [](const FloatArray& x, const FloatArray& y) {
        const auto r = sdgan::msssim_batch(to_tensor(x), to_tensor(y));
        return x.ndim() == 3 ? py::cast(r.item<double>()) : py::cast(std::vector<double>(
                                                                 r.data_ptr<double>(), r.data_ptr<double>() + r.numel()));
      },
      py::arg("x"), py::arg("y"), "MS-SSIM of (3,H,W) or (N,3,H,W) arrays in [-1, 1].");

  // Data
  m.def(
      "make_glyphs",
      [](int shapes, int hues, int per_identity, int resolution, std::uint64_t seed) {
        sdgan::GlyphSpec spec{shapes, hues, per_identity, resolution, seed};
        const auto ds = sdgan::make_glyphs(spec);
        py::dict out;
        for (const auto& rec : ds.records) {
          std::vector<torch::Tensor> imgs;
          for (const auto& img : rec.images) imgs.push_back(img.pixels);
          out[py::str(rec.identity_id)] = to_numpy(torch::stack(imgs));
        }
        return out;
      },
      py::arg("shapes") = 4, py::arg("hues") = 3, py::arg("per_identity") = 8, py::arg("resolution") = 32,
      py::arg("seed") = 0, "Procedural glyph dataset: {identity_id: (n, 3, R, R) array in [-1, 1]}.");

  // Architecture
  m.def(
      "conformance_report",
      [](const py::dict& model) {
        const auto cfg = from_py(model).get<sdgan::ModelConfig>();
        auto g = sdgan::build_generator(cfg);
        auto d = sdgan::build_discriminator(cfg);
        const auto rg = sdgan::shape_conformance_report(g->trace(cfg.k), sdgan::reference_generator_table(cfg));
        const auto rd = sdgan::shape_conformance_report(d->trace(), sdgan::reference_discriminator_table(cfg));
        return py::dict(py::arg("passed") = rg.passed() && rd.passed(), py::arg("generator") = rg.to_text(),
                        py::arg("discriminator") = rd.to_text());
      },
      py::arg("model"));
  m.def(
      "parameter_counts",
      [](const py::dict& model) {
        const auto cfg = from_py(model).get<sdgan::ModelConfig>();
        auto g = sdgan::build_generator(cfg);
        auto d = sdgan::build_discriminator(cfg);
        return py::dict(py::arg("generator") = sdgan::parameter_count(*g),
                        py::arg("discriminator") = sdgan::parameter_count(*d),
                        py::arg("mem_bytes") = sdgan::parameter_footprint(*g, *d));
      },
      py::arg("model"));

  // Training
  m.def(
      "train",
      [](const py::dict& config) {
        const auto cfg = sdgan::train_config_from_json(from_py(config));
        const auto ds = sdgan::load_dataset(cfg.dataset, cfg.model.resolution);
        py::gil_scoped_release release;
        return sdgan::train(cfg, ds).dir;
      },
      py::arg("config"), "Train from a config dict; returns the checkpoint directory.");

  // Trained models
  py::class_<Model>(m, "Model")
      .def(py::init([](const std::filesystem::path& dir) {
             auto ckpt = sdgan::load_checkpoint(dir);
             auto g = sdgan::load_generator(ckpt);
             return Model{std::move(ckpt), std::move(g)};
           }),
           py::arg("checkpoint"))
      .def_property_readonly("id", [](const Model& m) { return m.checkpoint.id(); })
      .def_property_readonly("iteration", [](const Model& m) { return m.checkpoint.iteration; })
      .def_property_readonly("config", [](const Model& m) { return to_py(json(m.checkpoint.model)); })
      .def_property_readonly("parameter_hash", [](const Model& m) { return sdgan::parameter_hash(*m.generator); })
      .def(
          "generate", [](Model& m, const FloatArray& codes) {
            return to_numpy(sdgan::generate_images(*m.generator, to_tensor(codes)));
          },
          py::arg("codes"), "(N, total_dim) codes -> (N, 3, R, R) images in [-1, 1].")
      .def(
          "grid",
          [](Model& m, int rows, int cols, std::uint64_t seed) {
            return to_numpy(sdgan::random_grid(*m.generator, m.checkpoint.model.partition(), rows, cols, seed));
          },
          py::arg("rows") = 4, py::arg("cols") = 8, py::arg("seed") = 0)
      .def(
          "invert",
          [](Model& m, const FloatArray& image, int steps, int restarts, double lr, std::uint64_t seed) {
            sdgan::InversionOptions o;
            o.steps = steps;
            o.restarts = restarts;
            o.lr = lr;
            o.seed = seed;
            const auto r = sdgan::invert(*m.generator, to_tensor(image), m.checkpoint.model.partition(), o);
            return to_py(json(r));
          },
          py::arg("image"), py::arg("steps") = 1000, py::arg("restarts") = 4, py::arg("lr") = 0.05,
          py::arg("seed") = 0);

  // Evaluation
  m.def(
      "train_glyph_verifier",
      [](const std::filesystem::path& out, int shapes, int hues, int per_identity, int resolution, int epochs,
         std::uint64_t seed) {
        sdgan::GlyphSpec spec{shapes, hues, per_identity, resolution, seed};
        sdgan::GlyphVerifierConfig cfg;
        cfg.epochs = epochs;
        cfg.seed = seed;
        const auto v = sdgan::train_glyph_verifier(sdgan::make_glyphs(spec), cfg);
        v->save(out);
        return to_py(v->report());
      },
      py::arg("out"), py::arg("shapes") = 4, py::arg("hues") = 12, py::arg("per_identity") = 64,
      py::arg("resolution") = 32, py::arg("epochs") = 20, py::arg("seed") = 0);
  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& verifier, int n_pairs, int div_pairs,
         std::uint64_t seed) {
        const auto v = sdgan::load_verifier(verifier);
        sdgan::EvalOptions o{n_pairs, div_pairs, seed};
        return to_py(json(sdgan::evaluate_model(sdgan::load_checkpoint(checkpoint), *v, o)));
      },
      py::arg("checkpoint"), py::arg("verifier"), py::arg("n_pairs") = 10000, py::arg("div_pairs") = 10000,
      py::arg("seed") = 0);

  // Inference service handlers, without a socket
  py::class_<sdgan::InferenceService>(m, "InferenceService")
      .def(py::init([](const std::filesystem::path& dir) { return sdgan::InferenceService::open(dir); }),
           py::arg("checkpoint"))
      .def("meta", [](const sdgan::InferenceService& s) { return response(s.meta()); })
      .def("sample", [](const sdgan::InferenceService& s, const std::string& body) { return response(s.sample(body)); })
      .def("interpolate",
           [](const sdgan::InferenceService& s, const std::string& body) { return response(s.interpolate(body)); })
      .def("grid", [](const sdgan::InferenceService& s, const std::map<std::string, std::string>& q) {
        return response(s.grid(q));
      });
}
