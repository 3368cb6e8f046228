#include "sdgan/latent.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace sdgan {

float uniform_pm1(Rng& rng) {
  // 24 high bits -> exactly representable float in [0, 1).
  const auto bits = static_cast<std::uint32_t>(rng() >> 40);
  return static_cast<float>(bits) * (2.0f / 16777216.0f) - 1.0f;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

LatentPartition LatentPartition::make(int total_dim, int identity_dim) {
  LatentPartition p{total_dim, identity_dim};
  p.validate();
  return p;
}

void LatentPartition::validate() const {
  if (total_dim <= 1 || identity_dim <= 0 || identity_dim >= total_dim) {
    throw std::invalid_argument("latent partition requires 0 < d_I < total_dim (got d_I=" +
                                std::to_string(identity_dim) +
                                ", total_dim=" + std::to_string(total_dim) + ")");
  }
}

std::vector<float> LatentCode::full() const {
  std::vector<float> v;
  v.reserve(identity.size() + observation.size());
  v.insert(v.end(), identity.begin(), identity.end());
  v.insert(v.end(), observation.begin(), observation.end());
  return v;
}

bool LatentCode::in_range() const {
  auto ok = [](float x) { return x >= -1.0f && x <= 1.0f; };
  return std::all_of(identity.begin(), identity.end(), ok) &&
         std::all_of(observation.begin(), observation.end(), ok);
}

bool LatentCode::matches(const LatentPartition& p) const {
  return static_cast<int>(identity.size()) == p.identity_dim &&
         static_cast<int>(observation.size()) == p.observation_dim();
}

LerpAxis parse_lerp_axis(const std::string& s) {
  if (s == "identity") return LerpAxis::identity;
  if (s == "observation") return LerpAxis::observation;
  if (s == "both") return LerpAxis::both;
  throw std::invalid_argument("unknown interpolation axis '" + s + "'");
}

std::string to_string(LerpAxis axis) {
  switch (axis) {
    case LerpAxis::identity: return "identity";
    case LerpAxis::observation: return "observation";
    case LerpAxis::both: return "both";
  }
  return "both";
}

namespace {

std::vector<float> draw(int n, Rng& rng) {
  std::vector<float> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = uniform_pm1(rng);
  return v;
}

bool any_out_of_range(const std::vector<float>& v) {
  return std::any_of(v.begin(), v.end(), [](float x) { return x < -1.0f || x > 1.0f; });
}

std::vector<float> mix(const std::vector<float>& a, const std::vector<float>& b, float t) {
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
  return out;
}

}  // namespace

LatentCode sample_code(const LatentPartition& partition, Rng& rng) {
  partition.validate();
  LatentCode code;
  code.identity = draw(partition.identity_dim, rng);
  code.observation = draw(partition.observation_dim(), rng);
  return code;
}

LatentGroup sample_group(const LatentPartition& partition, int k, Rng& rng) {
  partition.validate();
  if (k < 2) throw std::invalid_argument("latent group needs k >= 2, got " + std::to_string(k));
  LatentGroup g;
  g.identity = draw(partition.identity_dim, rng);
  g.observations.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) g.observations.push_back(draw(partition.observation_dim(), rng));
  return g;
}

Composition compose(const LatentGroup& group) {
  Composition c;
  c.out_of_range = any_out_of_range(group.identity);
  for (const auto& obs : group.observations) {
    std::vector<float> v;
    v.reserve(group.identity.size() + obs.size());
    v.insert(v.end(), group.identity.begin(), group.identity.end());
    v.insert(v.end(), obs.begin(), obs.end());
    c.out_of_range = c.out_of_range || any_out_of_range(obs);
    c.vectors.push_back(std::move(v));
  }
  return c;
}

Composition compose(std::span<const LatentCode> codes) {
  Composition c;
  for (const auto& code : codes) {
    c.out_of_range = c.out_of_range || !code.in_range();
    c.vectors.push_back(code.full());
  }
  return c;
}

std::vector<LatentCode> lerp(const LatentCode& a, const LatentCode& b, int steps, LerpAxis axis) {
  if (steps < 2) throw std::invalid_argument("lerp needs steps >= 2, got " + std::to_string(steps));
  if (a.identity.size() != b.identity.size() || a.observation.size() != b.observation.size()) {
    throw std::invalid_argument("lerp endpoints come from different partitions");
  }
  std::vector<LatentCode> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    LatentCode c = a;
    if (i == steps - 1) {
      // Exact endpoint, no rounding from the blend.
      if (axis != LerpAxis::observation) c.identity = b.identity;
      if (axis != LerpAxis::identity) c.observation = b.observation;
    } else if (i > 0) {
      const float t = static_cast<float>(i) / static_cast<float>(steps - 1);
      if (axis != LerpAxis::observation) c.identity = mix(a.identity, b.identity, t);
      if (axis != LerpAxis::identity) c.observation = mix(a.observation, b.observation, t);
    }
    out.push_back(std::move(c));
  }
  return out;
}

void to_json(nlohmann::json& j, const LatentCode& code) {
  j = nlohmann::json{{"d_i", code.identity.size()}, {"z_i", code.identity}, {"z_o", code.observation}};
}

void from_json(const nlohmann::json& j, LatentCode& code) {
  code.identity = j.at("z_i").get<std::vector<float>>();
  code.observation = j.at("z_o").get<std::vector<float>>();
  if (j.contains("d_i") && j.at("d_i").get<std::size_t>() != code.identity.size()) {
    throw std::invalid_argument("latent code: d_i does not match length of z_i");
  }
}

}  // namespace sdgan
