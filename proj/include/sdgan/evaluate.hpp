#pragma once

#include <cstdint>

#include <nlohmann/json_fwd.hpp>

#include "sdgan/checkpoint.hpp"
#include "sdgan/verifier.hpp"

namespace sdgan {

struct EvalReport {
  double auc = 0.0;
  double acc = 0.0;
  double far = 0.0;
  double id_div = 0.0;
  double all_div = 0.0;
  std::int64_t mem_bytes = 0;
  std::int64_t matched_pairs = 0;
  std::int64_t unmatched_pairs = 0;
};

/// Exactly {"auc","acc","far","id_div","all_div","mem_bytes"}.
void to_json(nlohmann::json& j, const EvalReport& r);
/// Pair counts are not part of the document and come back as zero.
void from_json(const nlohmann::json& j, EvalReport& r);

struct EvalOptions {
  int n_pairs = 10000;      // verification pairs, half identity-matched
  int div_pairs = 10000;    // pairs for each of ID-Div and All-Div
  std::uint64_t seed = 0;
};

/// Verification metrics at the verifier's calibrated tau on generated pairs,
/// ID-Div / All-Div, and the parameter footprint of both networks.
EvalReport evaluate_model(GeneratorNet& generator, const DiscriminatorNet& discriminator, const ModelConfig& model,
                          const Verifier& verifier, const EvalOptions& options);
EvalReport evaluate_model(const Checkpoint& checkpoint, const Verifier& verifier, const EvalOptions& options);

}  // namespace sdgan
