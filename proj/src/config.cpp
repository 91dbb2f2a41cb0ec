#include "s2s/config.hpp"

#include <fstream>
#include <set>

#include "s2s/errors.hpp"

namespace s2s {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  require(j.is_object(), "config: ", where, " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    require(allowed.count(it.key()) == 1, "config: unknown key '", it.key(), "' in ", where);
  }
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainingConfig TrainingConfig::defaults() {
  TrainingConfig t;
  t.stages["1s"] = {2000, 0.05};
  t.stages["1e"] = {2000, 0.05};
  t.stages["2a"] = {2000, 0.10};
  t.stages["2b"] = {1500, 0.10};
  t.stages["3"] = {1500, 0.05};
  return t;
}

RunConfig RunConfig::defaults() { return RunConfig{}; }

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg = defaults();
  reject_unknown(j, {"seed", "out_dir", "rates", "schedule", "model", "training", "datagen",
                     "latency"},
                 "config root");
  get_if(j, "seed", cfg.seed);
  get_if(j, "out_dir", cfg.out_dir);

  if (j.contains("rates")) {
    const auto& r = j.at("rates");
    reject_unknown(r, {"encoder_hz", "adapter_hz", "speech_token_hz", "sample_rate"}, "rates");
    get_if(r, "encoder_hz", cfg.model.rates.encoder_hz);
    get_if(r, "adapter_hz", cfg.model.rates.adapter_hz);
    get_if(r, "speech_token_hz", cfg.model.rates.speech_token_hz);
    get_if(r, "sample_rate", cfg.model.rates.sample_rate);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    reject_unknown(s, {"m_hidden", "n_tokens", "chunk_tokens"}, "schedule");
    get_if(s, "m_hidden", cfg.model.schedule.m_hidden);
    get_if(s, "n_tokens", cfg.model.schedule.n_tokens);
    get_if(s, "chunk_tokens", cfg.model.schedule.chunk_tokens);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m,
                   {"d_enc", "d_llm", "lm_layers", "lm_heads", "max_len", "text_vocab", "d_dec",
                    "dec_layers", "dec_heads", "dec_max_len", "codebook_size", "mel_bands"},
                   "model");
    get_if(m, "d_enc", cfg.model.frontend.d_enc);
    get_if(m, "d_llm", cfg.model.frontend.d_llm);
    cfg.model.lm.d_llm = cfg.model.frontend.d_llm;
    get_if(m, "lm_layers", cfg.model.lm.layers);
    get_if(m, "lm_heads", cfg.model.lm.heads);
    get_if(m, "max_len", cfg.model.lm.max_len);
    get_if(m, "text_vocab", cfg.model.lm.vocab);
    cfg.model.dec.text_vocab = cfg.model.lm.vocab;
    get_if(m, "d_dec", cfg.model.dec.d_dec);
    get_if(m, "dec_layers", cfg.model.dec.layers);
    get_if(m, "dec_heads", cfg.model.dec.heads);
    get_if(m, "dec_max_len", cfg.model.dec.max_len);
    get_if(m, "codebook_size", cfg.model.tok.codebook_size);
    cfg.model.dec.codebook_size = cfg.model.tok.codebook_size;
    get_if(m, "mel_bands", cfg.model.tok.n_bands);
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    reject_unknown(t,
                   {"batch_size", "continuation_len", "stage1_pairs", "stage2a_pairs",
                    "stage2b_samples", "stage3_speech", "stage3_text", "text_loss_weight",
                    "max_response_tokens", "max_speech_tokens", "stages"},
                   "training");
    get_if(t, "batch_size", cfg.training.batch_size);
    get_if(t, "continuation_len", cfg.training.continuation_len);
    get_if(t, "stage1_pairs", cfg.training.stage1_pairs);
    get_if(t, "stage2a_pairs", cfg.training.stage2a_pairs);
    get_if(t, "stage2b_samples", cfg.training.stage2b_samples);
    get_if(t, "stage3_speech", cfg.training.stage3_speech);
    get_if(t, "stage3_text", cfg.training.stage3_text);
    get_if(t, "text_loss_weight", cfg.training.text_loss_weight);
    get_if(t, "max_response_tokens", cfg.training.max_response_tokens);
    get_if(t, "max_speech_tokens", cfg.training.max_speech_tokens);
    if (t.contains("stages")) {
      const auto& stages = t.at("stages");
      reject_unknown(stages, {"1s", "1e", "2a", "2b", "3"}, "training.stages");
      for (auto it = stages.begin(); it != stages.end(); ++it) {
        reject_unknown(it.value(), {"steps", "lr"}, "training.stages." + it.key());
        StagePlan& plan = cfg.training.stages[it.key()];
        get_if(it.value(), "steps", plan.steps);
        get_if(it.value(), "lr", plan.lr);
      }
    }
  }
  if (j.contains("datagen")) {
    const auto& d = j.at("datagen");
    reject_unknown(d,
                   {"seeds_per_language", "n_records", "general_fraction", "t2s_fraction",
                    "reference_voice", "emotion_probs", "age_probs", "gender_probs"},
                   "datagen");
    get_if(d, "seeds_per_language", cfg.datagen.seeds_per_language);
    get_if(d, "n_records", cfg.datagen.n_records);
    get_if(d, "general_fraction", cfg.datagen.general_fraction);
    get_if(d, "t2s_fraction", cfg.datagen.t2s_fraction);
    get_if(d, "reference_voice", cfg.datagen.reference_voice);
    get_if(d, "emotion_probs", cfg.datagen.marginals.emotion);
    get_if(d, "age_probs", cfg.datagen.marginals.age);
    get_if(d, "gender_probs", cfg.datagen.marginals.gender);
  }
  if (j.contains("latency")) {
    const auto& l = j.at("latency");
    reject_unknown(l, {"cost_hidden", "cost_speech_token", "cost_chunk_synth"}, "latency");
    get_if(l, "cost_hidden", cfg.latency.cost_hidden);
    get_if(l, "cost_speech_token", cfg.latency.cost_speech_token);
    get_if(l, "cost_chunk_synth", cfg.latency.cost_chunk_synth);
  }

  cfg.datagen.vocab_size = cfg.model.lm.vocab;
  cfg.datagen.sample_rate = cfg.model.rates.sample_rate;
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  ensure(is.good(), "config: cannot open ", path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(concat("config: ", path, " is not valid JSON: ", e.what()));
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json stages;
  for (const auto& [name, plan] : training.stages) {
    stages[name] = {{"steps", plan.steps}, {"lr", plan.lr}};
  }
  return {
      {"seed", seed},
      {"out_dir", out_dir},
      {"rates",
       {{"encoder_hz", model.rates.encoder_hz},
        {"adapter_hz", model.rates.adapter_hz},
        {"speech_token_hz", model.rates.speech_token_hz},
        {"sample_rate", model.rates.sample_rate}}},
      {"schedule",
       {{"m_hidden", model.schedule.m_hidden},
        {"n_tokens", model.schedule.n_tokens},
        {"chunk_tokens", model.schedule.chunk_tokens}}},
      {"model",
       {{"d_enc", model.frontend.d_enc},
        {"d_llm", model.frontend.d_llm},
        {"lm_layers", model.lm.layers},
        {"lm_heads", model.lm.heads},
        {"max_len", model.lm.max_len},
        {"text_vocab", model.lm.vocab},
        {"d_dec", model.dec.d_dec},
        {"dec_layers", model.dec.layers},
        {"dec_heads", model.dec.heads},
        {"dec_max_len", model.dec.max_len},
        {"codebook_size", model.tok.codebook_size},
        {"mel_bands", model.tok.n_bands}}},
      {"training",
       {{"batch_size", training.batch_size},
        {"continuation_len", training.continuation_len},
        {"stage1_pairs", training.stage1_pairs},
        {"stage2a_pairs", training.stage2a_pairs},
        {"stage2b_samples", training.stage2b_samples},
        {"stage3_speech", training.stage3_speech},
        {"stage3_text", training.stage3_text},
        {"text_loss_weight", training.text_loss_weight},
        {"max_response_tokens", training.max_response_tokens},
        {"max_speech_tokens", training.max_speech_tokens},
        {"stages", stages}}},
      {"datagen",
       {{"seeds_per_language", datagen.seeds_per_language},
        {"n_records", datagen.n_records},
        {"general_fraction", datagen.general_fraction},
        {"t2s_fraction", datagen.t2s_fraction},
        {"reference_voice", datagen.reference_voice},
        {"emotion_probs", datagen.marginals.emotion},
        {"age_probs", datagen.marginals.age},
        {"gender_probs", datagen.marginals.gender}}},
      {"latency",
       {{"cost_hidden", latency.cost_hidden},
        {"cost_speech_token", latency.cost_speech_token},
        {"cost_chunk_synth", latency.cost_chunk_synth}}}};
}

void RunConfig::validate() const {
  require(!out_dir.empty(), "config: out_dir must not be empty");
  model.validate();
  datagen.validate();
  latency.validate();
  require(training.batch_size >= 1, "config: batch_size must be >= 1");
  require(training.continuation_len >= 1, "config: continuation_len must be >= 1");
  require(training.max_response_tokens >= 1 && training.max_speech_tokens >= 0,
          "config: bad inference budgets");
  for (const char* name : {"1s", "1e", "2a", "2b", "3"}) {
    auto it = training.stages.find(name);
    require(it != training.stages.end(), "config: missing training.stages entry for ", name);
    require(it->second.steps >= 0 && it->second.lr >= 0.0, "config: bad plan for stage ", name);
  }
}

}  // namespace s2s
