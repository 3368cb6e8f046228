#include "sdgan/service.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sdgan/image.hpp"
#include "sdgan/inversion.hpp"
#include "sdgan/metrics.hpp"

namespace sdgan {

using nlohmann::json;
using torch::Tensor;

namespace {

struct RequestError : std::runtime_error {
  RequestError(int status, const std::string& message) : std::runtime_error(message), status(status) {}
  int status;
};

HttpResponse error(int status, const std::string& message) {
  const char* kind = status == 404 ? "not_found" : status == 400 ? "bad_request" : "internal";
  return {status, "application/json", json{{"error", {{"status", status}, {"kind", kind}, {"message", message}}}}.dump()};
}

HttpResponse ok(const json& j) { return {200, "application/json", j.dump()}; }

template <typename Fn>
HttpResponse guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const RequestError& e) {
    return error(e.status, e.what());
  } catch (const json::exception& e) {
    return error(400, std::string("invalid request: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

json parse_body(const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw RequestError(400, "request body must be a JSON object");
  return j;
}

std::vector<float> finite_vector(const json& j, std::size_t n, const char* name) {
  auto v = j.get<std::vector<float>>();
  if (v.size() != n) {
    throw RequestError(400, std::string(name) + " must have " + std::to_string(n) + " entries, got " +
                                std::to_string(v.size()));
  }
  for (float x : v) {
    if (!std::isfinite(x)) throw RequestError(400, std::string(name) + " contains a non-finite value");
  }
  return v;
}

std::uint64_t seed_field(const json& j, const char* name) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
    throw RequestError(400, std::string(name) + " must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

int int_field(const json& j, const char* name, int def) {
  if (!j.contains(name)) return def;
  if (!j.at(name).is_number_integer()) throw RequestError(400, std::string(name) + " must be an integer");
  return j.at(name).get<int>();
}

}  // namespace

InferenceService::InferenceService(Checkpoint checkpoint, std::shared_ptr<GeneratorNet> generator,
                                   ServiceOptions options)
    : checkpoint_(std::move(checkpoint)), generator_(std::move(generator)), options_(options) {
  if (checkpoint_.model.family == Family::ac_dcgan) {
    throw std::invalid_argument("the service needs an identity/observation latent space; AC-DCGAN has none");
  }
  generator_->eval();
}

std::unique_ptr<InferenceService> InferenceService::open(const std::filesystem::path& dir, ServiceOptions options) {
  auto ckpt = load_checkpoint(dir);
  auto g = load_generator(ckpt);
  return std::make_unique<InferenceService>(std::move(ckpt), std::move(g), options);
}

namespace {

void check_checkpoint(const json& req, const Checkpoint& ckpt) {
  if (req.contains("checkpoint_id") && req.at("checkpoint_id").get<std::string>() != ckpt.id()) {
    throw RequestError(404, "unknown checkpoint '" + req.at("checkpoint_id").get<std::string>() + "'");
  }
}

std::string render_png(GeneratorNet& g, const LatentCode& code) {
  auto z = torch::tensor(code.full()).unsqueeze(0);
  const auto img = generate_images(g, z)[0];
  return base64_encode(encode_png(to_rgb8(img)));
}

}  // namespace

HttpResponse InferenceService::meta() const {
  return guarded([&] {
    json j = checkpoint_.model;
    j["checkpoint_id"] = checkpoint_.id();
    j["d_o"] = checkpoint_.model.total_dim - checkpoint_.model.identity_dim;
    j["iteration"] = checkpoint_.iteration;
    j["max_count"] = options_.max_count;
    return ok(j);
  });
}

HttpResponse InferenceService::sample(const std::string& body) const {
  return guarded([&] {
    const auto req = parse_body(body);
    check_checkpoint(req, checkpoint_);
    const auto p = checkpoint_.model.partition();
    const int count = int_field(req, "count", 1);
    if (count < 1 || count > options_.max_count) {
      throw RequestError(400, "count must lie in [1, " + std::to_string(options_.max_count) + "]");
    }
    if (req.contains("z_I") == req.contains("identity_seed")) {
      throw RequestError(400, "provide exactly one of z_I or identity_seed");
    }
    if (req.contains("z_O") == req.contains("observation_seed")) {
      throw RequestError(400, "provide exactly one of z_O or observation_seed");
    }
    std::vector<float> identity;
    if (req.contains("z_I")) {
      identity = finite_vector(req.at("z_I"), static_cast<std::size_t>(p.identity_dim), "z_I");
    } else {
      Rng rng(seed_field(req.at("identity_seed"), "identity_seed"));
      identity = sample_code(p, rng).identity;
    }
    std::optional<std::vector<float>> fixed_obs;
    std::optional<Rng> obs_rng;
    if (req.contains("z_O")) {
      fixed_obs = finite_vector(req.at("z_O"), static_cast<std::size_t>(p.observation_dim()), "z_O");
    } else {
      obs_rng.emplace(seed_field(req.at("observation_seed"), "observation_seed"));
    }
    json codes = json::array(), images = json::array();
    for (int i = 0; i < count; ++i) {
      LatentCode code{identity, fixed_obs ? *fixed_obs : sample_code(p, *obs_rng).observation};
      images.push_back(render_png(*generator_, code));
      codes.push_back(code);
    }
    return ok({{"checkpoint_id", checkpoint_.id()}, {"codes", codes}, {"images", images}});
  });
}

HttpResponse InferenceService::interpolate(const std::string& body) const {
  return guarded([&] {
    const auto req = parse_body(body);
    check_checkpoint(req, checkpoint_);
    const auto p = checkpoint_.model.partition();
    auto read_code = [&](const char* name) {
      if (!req.contains(name)) throw RequestError(400, std::string("missing '") + name + "'");
      const auto& j = req.at(name);
      LatentCode c;
      c.identity = finite_vector(j.at("z_i"), static_cast<std::size_t>(p.identity_dim), "z_i");
      c.observation = finite_vector(j.at("z_o"), static_cast<std::size_t>(p.observation_dim()), "z_o");
      return c;
    };
    const auto a = read_code("a");
    const auto b = read_code("b");
    const int steps = int_field(req, "steps", 8);
    if (steps < 2 || steps > options_.max_steps) {
      throw RequestError(400, "steps must lie in [2, " + std::to_string(options_.max_steps) + "]");
    }
    const auto axis = parse_lerp_axis(req.value("axis", std::string("both")));
    const auto path = lerp(a, b, steps, axis);

    json codes = json::array(), images = json::array();
    std::vector<Tensor> cells;
    for (const auto& code : path) {
      auto z = torch::tensor(code.full()).unsqueeze(0);
      auto img = generate_images(*generator_, z)[0];
      images.push_back(base64_encode(encode_png(to_rgb8(img))));
      codes.push_back(code);
      cells.push_back(img);
    }
    const auto strip = tile(torch::stack(cells).unsqueeze(0));
    return ok({{"checkpoint_id", checkpoint_.id()},
               {"axis", to_string(axis)},
               {"codes", codes},
               {"images", images},
               {"strip", base64_encode(encode_png(strip))}});
  });
}

HttpResponse InferenceService::grid(const std::map<std::string, std::string>& query) const {
  return guarded([&] {
    auto get = [&](const char* name, long def) -> long {
      const auto it = query.find(name);
      if (it == query.end()) return def;
      std::size_t used = 0;
      long v = 0;
      try {
        v = std::stol(it->second, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != it->second.size()) throw RequestError(400, std::string(name) + " must be an integer");
      return v;
    };
    if (query.count("checkpoint_id") && query.at("checkpoint_id") != checkpoint_.id()) {
      throw RequestError(404, "unknown checkpoint '" + query.at("checkpoint_id") + "'");
    }
    const long rows = get("rows", 4), cols = get("cols", 8), seed = get("seed", 0);
    if (rows < 1 || cols < 1 || rows * cols > options_.max_grid_cells) {
      throw RequestError(400, "rows and cols must be positive with rows*cols <= " +
                                  std::to_string(options_.max_grid_cells));
    }
    if (seed < 0) throw RequestError(400, "seed must be non-negative");
    const auto images = random_grid(*generator_, checkpoint_.model.partition(), static_cast<int>(rows),
                                    static_cast<int>(cols), static_cast<std::uint64_t>(seed));
    const auto png = encode_png(tile(images));
    return HttpResponse{200, "image/png", std::string(png.begin(), png.end())};
  });
}

// ---------------------------------------------------------------------------
// HTTP

struct HttpServer::Impl {
  const InferenceService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(const InferenceService& s) : service(s) {
    auto send = [](httplib::Response& res, const HttpResponse& r) {
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Get("/meta", [this, send](const httplib::Request&, httplib::Response& res) { send(res, service.meta()); });
    server.Post("/sample", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.sample(req.body));
    });
    server.Post("/interpolate", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.interpolate(req.body));
    });
    server.Get("/grid", [this, send](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> q;
      for (const auto& [k, v] : req.params) q[k] = v;
      send(res, service.grid(q));
    });
    server.set_error_handler([send](const httplib::Request&, httplib::Response& res) {
      if (res.status == 404 && res.body.empty()) send(res, error(404, "no such endpoint"));
    });
    server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string msg = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      } catch (...) {
      }
      send(res, error(500, msg));
    });
  }
};

HttpServer::HttpServer(const InferenceService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace sdgan
