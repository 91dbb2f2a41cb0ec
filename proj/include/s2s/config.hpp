#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "s2s/datagen.hpp"
#include "s2s/model.hpp"
#include "s2s/stream.hpp"

namespace s2s {

struct StagePlan {
  int steps = 2000;
  double lr = 0.05;
};

struct TrainingConfig {
  int batch_size = 8;
  int continuation_len = 4;
  int stage1_pairs = 16;
  int stage2a_pairs = 32;
  int stage2b_samples = 16;
  int stage3_speech = 16;
  int stage3_text = 16;
  double text_loss_weight = 1.0;
  int max_response_tokens = 6;   // inference budget for the LM reply
  int max_speech_tokens = 96;    // inference budget for the speech decoder
  std::map<std::string, StagePlan> stages;  // keyed 1s/1e/2a/2b/3

  static TrainingConfig defaults();
};

// The single source of truth for every subcommand. Parsed strictly: unknown
// keys anywhere are rejected.
struct RunConfig {
  std::uint64_t seed = 20250101;
  std::string out_dir = "out";
  ModelConfig model;
  TrainingConfig training = TrainingConfig::defaults();
  datagen::DatagenConfig datagen;
  LatencyParams latency{0.010, 0.005, 0.020};

  static RunConfig defaults();
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
};

}  // namespace s2s
