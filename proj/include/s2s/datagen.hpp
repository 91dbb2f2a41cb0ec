#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace s2s::datagen {

enum class Language { En, Zh };
std::string language_name(Language lang);
Language language_from_name(const std::string& name);

// Emotional tones for synthesized responses (distinct from the query-emotion
// labels; see the mock rulebook in emotion inference).
const std::vector<std::string>& response_emotion_labels();

enum class Sensitivity { Emotion, Age, Gender, None };
std::string sensitivity_name(Sensitivity s);
Sensitivity sensitivity_from_name(const std::string& name);

enum class RecordKind { Empathetic, General, T2S };
std::string kind_name(RecordKind k);
RecordKind kind_from_name(const std::string& name);

// Configured tag distributions for the seed bank, aligned with
// emotion_labels()/age_labels()/gender_labels().
struct TagMarginals {
  std::vector<double> emotion;
  std::vector<double> age;
  std::vector<double> gender;

  static TagMarginals defaults();
  void validate() const;
};

struct SeedAudio {
  std::string id;
  Language language = Language::En;
  std::string transcript;
  std::string emotion;
  std::string gender;
  std::string age;
  std::string audio_path;  // relative to the output root
};

struct InstructionRecord {
  std::string id;
  Language language = Language::En;
  std::string text;
  Sensitivity sensitivity = Sensitivity::None;
  std::string required_value;  // empty when sensitivity == None
};

struct DialogueRecord {
  std::string id;
  RecordKind kind = RecordKind::Empathetic;
  Language language = Language::En;
  std::string instruction_text;
  Sensitivity sensitivity = Sensitivity::None;
  std::string required_value;
  // matched seed and its annotations
  std::string seed_id;
  std::string transcript;
  std::string emotion;
  std::string gender;
  std::string age;
  // audio + response
  std::string instruction_audio;  // empty for T2S records
  std::string response_text;
  std::string response_emotion;
  std::string response_voice;
  std::string response_audio;

  bool operator==(const DialogueRecord&) const = default;
};

nlohmann::json to_json(const SeedAudio& seed);
SeedAudio seed_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DialogueRecord& rec);
DialogueRecord record_from_json(const nlohmann::json& j);

// Manifest: one JSON record per line, UTF-8.
void save_manifest(const std::string& path, const std::vector<DialogueRecord>& records);
std::vector<DialogueRecord> load_manifest(const std::string& path);
void save_seed_bank(const std::string& path, const std::vector<SeedAudio>& seeds);
std::vector<SeedAudio> load_seed_bank(const std::string& path);

// ---------------------------------------------------------------- clients
//
// Request/reply message schemas for the five model backends. Mocks implement
// them deterministically; HTTP-backed clients for real models can implement
// the same interfaces without touching the pipeline.

struct InstructionRequest {
  std::string record_id;
  Language language = Language::En;
  RecordKind kind = RecordKind::Empathetic;
  std::uint64_t seed = 0;
};
struct InstructionReply {
  std::string text;
  Sensitivity sensitivity = Sensitivity::None;
  std::string required_value;
};

struct ResponseRequest {
  std::string record_id;
  std::string instruction;
  std::string transcript;
  std::string emotion;
  std::string gender;
  std::string age;
  std::uint64_t seed = 0;
};
struct ResponseReply {
  std::string text;
};

struct EmotionRequest {
  std::string record_id;
  std::string instruction;
  std::string response;
  std::string emotion;
  std::string gender;
  std::string age;
  std::uint64_t seed = 0;
};
struct EmotionReply {
  std::string emotion;
};

struct CloneSynthRequest {
  std::string record_id;
  std::string text;
  std::string seed_voice;    // seed audio id used as the voice prompt
  std::string seed_emotion;  // preserved paralinguistics of the seed
  std::uint64_t seed = 0;
};
struct InstructedSynthRequest {
  std::string record_id;
  std::string text;
  std::string voice_id;  // fixed reference voice
  std::string emotion;   // instructed delivery emotion
  std::uint64_t seed = 0;
};
struct SynthReply {
  std::vector<double> samples;
  int sample_rate = 16000;
};

nlohmann::json to_json(const InstructionRequest&);
nlohmann::json to_json(const InstructionReply&);
nlohmann::json to_json(const ResponseRequest&);
nlohmann::json to_json(const EmotionRequest&);
nlohmann::json to_json(const CloneSynthRequest&);
nlohmann::json to_json(const InstructedSynthRequest&);

struct InstructionClient {
  virtual ~InstructionClient() = default;
  virtual InstructionReply generate(const InstructionRequest&) = 0;
};
struct ResponseClient {
  virtual ~ResponseClient() = default;
  virtual ResponseReply respond(const ResponseRequest&) = 0;
};
struct EmotionClient {
  virtual ~EmotionClient() = default;
  virtual EmotionReply infer(const EmotionRequest&) = 0;
};
struct CloneSynthClient {
  virtual ~CloneSynthClient() = default;
  virtual SynthReply synth(const CloneSynthRequest&) = 0;
};
struct InstructedSynthClient {
  virtual ~InstructedSynthClient() = default;
  virtual SynthReply synth(const InstructedSynthRequest&) = 0;
};

struct ClientSuite {
  std::unique_ptr<InstructionClient> instruction;
  std::unique_ptr<ResponseClient> response;
  std::unique_ptr<EmotionClient> emotion;
  std::unique_ptr<CloneSynthClient> clone_synth;
  std::unique_ptr<InstructedSynthClient> instructed_synth;
};

// Deterministic rule-based mocks; every draw derives from the request seed.
ClientSuite make_mock_clients(int vocab_size = 128, int sample_rate = 16000);

// Mock rulebook: response emotion chosen from the query emotion.
const std::string& mock_response_emotion(const std::string& query_emotion);

// ------------------------------------------------------------------- config

struct DatagenConfig {
  int seeds_per_language = 40;
  int n_records = 100;           // dialogue records before T2S derivation
  double general_fraction = 0.5; // share of GENERAL vs EMPATHETIC
  double t2s_fraction = 0.25;    // of GENERAL records re-derived as T2S
  TagMarginals marginals = TagMarginals::defaults();
  std::string reference_voice = "ref-voice-f01";
  int vocab_size = 128;
  int sample_rate = 16000;

  void validate() const;
};

// ---------------------------------------------------------------- pipeline

// Seeded seed-audio bank; tags follow the configured marginals (the first few
// seeds per language cycle through every tag value so constrained selection
// cannot dead-end). Audio is synthesized by the clone client and written
// under out_root.
std::vector<SeedAudio> build_seed_bank(int n_per_language, const DatagenConfig& cfg,
                                       ClientSuite& clients, std::uint64_t seed,
                                       const std::string& out_root);

std::vector<InstructionRecord> generate_instructions(int n, Language language, RecordKind kind,
                                                     ClientSuite& clients, std::uint64_t seed);

// Uniform choice among seeds matching (language, required tag value);
// sensitivity None draws uniformly over the language. Deterministic per
// record id.
const SeedAudio& select_seed(const InstructionRecord& rec, const std::vector<SeedAudio>& bank,
                             std::uint64_t seed);

DialogueRecord annotate(const InstructionRecord& rec, const SeedAudio& seed, RecordKind kind);

// Runs the response and emotion-inference clients; validates the emotion
// against the closed response-emotion set.
std::pair<std::string, std::string> generate_response(const DialogueRecord& rec,
                                                      ClientSuite& clients, std::uint64_t seed);

// Writes instruction audio (voice-cloned from the matched seed; skipped for
// T2S) and response audio (instructed synthesis with the fixed reference
// voice) under out_root/audio, content-addressed.
void synthesize_record(DialogueRecord& rec, const SeedAudio& seed, ClientSuite& clients,
                       const DatagenConfig& cfg, std::uint64_t root_seed,
                       const std::string& out_root);

// Seeded subsample of `records`, re-labeled kind=T2S with the instruction
// audio reference removed; returns round(fraction * n) new records.
std::vector<DialogueRecord> derive_t2s(const std::vector<DialogueRecord>& records, double fraction,
                                       std::uint64_t seed);

struct Histogram {
  std::vector<std::string> labels;
  std::vector<std::int64_t> counts;
  std::vector<double> fractions;
};

struct ManifestStats {
  Histogram query_emotion;
  Histogram query_age;
  Histogram query_gender;
  Histogram response_emotion;

  std::string to_text() const;
  nlohmann::json to_json() const;
};

ManifestStats manifest_stats(const std::vector<DialogueRecord>& records);  // error when empty

struct PipelineOutput {
  std::vector<SeedAudio> seeds;
  std::vector<DialogueRecord> records;  // empathetic + general + derived T2S
};

// Full deterministic run: seed bank, instructions, seed matching, responses,
// synthesis, T2S derivation. Audio is written under out_root.
PipelineOutput run_pipeline(const DatagenConfig& cfg, ClientSuite& clients, std::uint64_t seed,
                            const std::string& out_root);

}  // namespace s2s::datagen
