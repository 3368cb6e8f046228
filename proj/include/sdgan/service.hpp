#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "sdgan/checkpoint.hpp"

namespace sdgan {

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceOptions {
  int max_count = 64;        // images per /sample request
  int max_steps = 64;        // /interpolate strip length
  int max_grid_cells = 256;  // rows * cols for /grid
};

/// Read-only inference over one checkpoint. Handlers take the raw request and
/// never touch the network, so they can be exercised directly. Every image is
/// rendered on its own, so a code always maps to the same pixels regardless of
/// what else is in the request.
class InferenceService {
 public:
  InferenceService(Checkpoint checkpoint, std::shared_ptr<GeneratorNet> generator, ServiceOptions options = {});
  static std::unique_ptr<InferenceService> open(const std::filesystem::path& checkpoint_dir,
                                                ServiceOptions options = {});

  HttpResponse meta() const;
  /// {"checkpoint_id"?, "z_I" | "identity_seed", "z_O" | "observation_seed", "count"}
  /// -> {"checkpoint_id", "codes": [...], "images": [base64 PNG]}.
  HttpResponse sample(const std::string& body) const;
  /// {"checkpoint_id"?, "a": code, "b": code, "steps", "axis"} -> codes, images
  /// and "strip", the cells tiled left to right as one base64 PNG.
  HttpResponse interpolate(const std::string& body) const;
  /// image/png grid; rows share z_I and columns share z_O.
  HttpResponse grid(const std::map<std::string, std::string>& query) const;

  const Checkpoint& checkpoint() const { return checkpoint_; }

 private:
  Checkpoint checkpoint_;
  std::shared_ptr<GeneratorNet> generator_;
  ServiceOptions options_;
};

/// HTTP front end for an InferenceService.
class HttpServer {
 public:
  explicit HttpServer(const InferenceService& service);
  ~HttpServer();

  /// Binds and starts serving on a background thread; port 0 picks a free
  /// port. Returns the bound port. Throws std::runtime_error on bind failure.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sdgan
