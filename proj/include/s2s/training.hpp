#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "s2s/checkpoint.hpp"
#include "s2s/frontend.hpp"
#include "s2s/model.hpp"
#include "s2s/tokenizer.hpp"

namespace s2s {

enum class Stage { Stage1Semantic, Stage1Emotion, Stage2Offline, Stage2Streaming, Stage3Joint };

// CLI names: 1s, 1e, 2a, 2b, 3.
std::string stage_name(Stage stage);
Stage stage_from_name(const std::string& name);

// Per-stage trainability over the seven components. The encoder stub,
// tokenizer, and vocoder are never trainable.
struct FreezeSchedule {
  std::map<std::string, bool> trainable;

  static FreezeSchedule for_stage(Stage stage);
  bool is_trainable(const std::string& component) const;
  // Sets the trainable flag of every parameter from its component prefix.
  void apply(const std::vector<nn::Parameter*>& params) const;
  void validate() const;
};

// Component prefix of a dotted parameter name ("adapter.conv1.w" -> "adapter").
std::string component_of(const std::string& param_name);

// Names of FROZEN parameters whose bytes changed between the checkpoints.
// Both checkpoints must cover the same parameter names.
std::vector<std::string> assert_freeze(const CheckpointData& before, const CheckpointData& after,
                                       const FreezeSchedule& schedule);

// ---------------------------------------------------------------- corpora

enum class Stage1Variant { Semantic, Emotion };

struct AlignmentPair {
  FeatureFrames features;
  std::vector<int> transcript;
  int emotion_tag = -1;           // vocab tag id, -1 for the semantic variant
  std::vector<int> continuation;  // recorded greedy continuation of the frozen LM
};

struct TtsPair {
  std::vector<int> text;
  SpeechTokenSequence speech;
};

struct StreamSample {
  std::vector<int> prompt;
  std::vector<int> response;
  SpeechTokenSequence speech;
};

enum class Modality { Speech, Text };

struct JointSample {
  Modality modality = Modality::Text;
  FeatureFrames features;          // speech modality only
  std::vector<int> instruction;
  std::vector<int> response;
  SpeechTokenSequence speech;
};

struct CorpusOptions {
  int transcript_min = 3;
  int transcript_max = 5;
  int continuation_len = 4;
  int text_min = 3;
  int text_max = 6;
};

std::vector<AlignmentPair> make_stage1_corpus(S2SModel& model, int n, Stage1Variant variant,
                                              std::uint64_t seed, const CorpusOptions& opts = {});
std::vector<TtsPair> make_stage2_offline_corpus(const S2SModel& model, int n, std::uint64_t seed,
                                                const CorpusOptions& opts = {});
std::vector<StreamSample> make_stage2_streaming_corpus(const S2SModel& model, int n,
                                                       std::uint64_t seed,
                                                       const CorpusOptions& opts = {});
std::vector<JointSample> make_stage3_corpus(S2SModel& model, int n_speech, int n_text,
                                            std::uint64_t seed, const CorpusOptions& opts = {});

// ------------------------------------------------------------- stage runs

struct TrainOptions {
  int steps = 2000;
  double lr = 0.05;
  int batch_size = 8;
  std::uint64_t seed = 0;
  double text_loss_weight = 1.0;  // stage 3 only
};

struct StageReport {
  std::string stage;
  int steps = 0;
  double final_loss = 0.0;
  double teacher_acc = 0.0;
  int freeze_violations = 0;
  std::vector<double> step_losses;

  std::string json_line() const;
};

StageReport run_stage1(S2SModel& model, const std::vector<AlignmentPair>& pairs,
                       Stage1Variant variant, const TrainOptions& opts);
StageReport run_stage2_offline(S2SModel& model, const std::vector<TtsPair>& pairs,
                               const TrainOptions& opts);
StageReport run_stage2_streaming(S2SModel& model, const std::vector<StreamSample>& samples,
                                 const TrainOptions& opts);
StageReport run_stage3(S2SModel& model, const std::vector<JointSample>& samples,
                       const TrainOptions& opts);

// -------------------------------------------------------- behavioral evals

// Fraction of pairs whose greedy continuation from the speech prefix exactly
// matches the recorded transcript-side continuation.
double stage1_exact_match(S2SModel& model, const std::vector<AlignmentPair>& pairs, int max_new);

// Fraction of samples whose streaming decode reproduces the target tokens.
double stage2b_decode_match(S2SModel& model, const std::vector<StreamSample>& samples);

// Fraction of samples whose decode from teacher-forced response hidden states
// reproduces the target tokens.
double stage3_decode_match(S2SModel& model, const std::vector<JointSample>& samples);

// LM input prefix for one sample: [BOS] (+ tag) + adapter(features) for the
// speech side, [BOS] (+ tag) + token ids for the text side. Exposed for the
// inference path and tests.
MixedSequence stage1_speech_prefix(S2SModel& model, const AlignmentPair& pair);

}  // namespace s2s
