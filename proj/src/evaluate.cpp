#include "sdgan/evaluate.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sdgan {

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"auc", r.auc},         {"acc", r.acc},         {"far", r.far},
                     {"id_div", r.id_div},   {"all_div", r.all_div}, {"mem_bytes", r.mem_bytes}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r = EvalReport{};
  j.at("auc").get_to(r.auc);
  j.at("acc").get_to(r.acc);
  j.at("far").get_to(r.far);
  j.at("id_div").get_to(r.id_div);
  j.at("all_div").get_to(r.all_div);
  j.at("mem_bytes").get_to(r.mem_bytes);
}

EvalReport evaluate_model(GeneratorNet& generator, const DiscriminatorNet& discriminator, const ModelConfig& model,
                          const Verifier& verifier, const EvalOptions& options) {
  if (options.n_pairs < 2) throw std::invalid_argument("n_pairs must be at least 2");
  if (model.family == Family::ac_dcgan) {
    throw std::invalid_argument("evaluate_model draws identities from z_I; AC-DCGAN has no identity code");
  }
  const auto partition = model.partition();
  Rng rng(options.seed);
  const auto pairs = generated_pairs(generator, partition, options.n_pairs, rng);
  const auto v = verifier.verify(pairs);

  EvalReport r;
  r.auc = v.auc;
  r.acc = v.accuracy;
  r.far = v.far;
  r.matched_pairs = v.matched;
  r.unmatched_pairs = v.unmatched;
  r.id_div = id_div(generator, partition, options.div_pairs, rng);
  r.all_div = all_div(generator, partition, options.div_pairs, rng);
  r.mem_bytes = parameter_footprint(generator, discriminator);
  return r;
}

EvalReport evaluate_model(const Checkpoint& checkpoint, const Verifier& verifier, const EvalOptions& options) {
  auto g = load_generator(checkpoint);
  auto d = load_discriminator(checkpoint);
  return evaluate_model(*g, *d, checkpoint.model, verifier, options);
}

}  // namespace sdgan
