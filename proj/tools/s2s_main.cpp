// s2s: streaming speech-to-speech pipeline driver.
//
// Subcommands: datagen, train, infer, profile-latency, gradcheck, stats.
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "s2s/checkpoint.hpp"
#include "s2s/config.hpp"
#include "s2s/datagen.hpp"
#include "s2s/decoder.hpp"
#include "s2s/errors.hpp"
#include "s2s/model.hpp"
#include "s2s/rng.hpp"
#include "s2s/stream.hpp"
#include "s2s/token2wav.hpp"
#include "s2s/training.hpp"
#include "s2s/wav.hpp"

namespace fs = std::filesystem;
using namespace s2s;

namespace {

int verbosity() {
  const char* env = std::getenv("S2S_VERBOSE");
  return env ? std::atoi(env) : 1;
}

// Line-oriented run log under the output directory. No timestamps: logs are
// part of the deterministic output contract.
class RunLog {
 public:
  explicit RunLog(const std::string& out_dir) {
    fs::create_directories(out_dir);
    path_ = (fs::path(out_dir) / "run.log").string();
    os_.open(path_, std::ios::app);
  }

  void line(const std::string& text) {
    if (os_.good()) os_ << text << '\n';
    if (verbosity() >= 1) std::cout << text << '\n';
  }

 private:
  std::string path_;
  std::ofstream os_;
};

struct CliOverrides {
  std::string config_path;
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string out_dir;
};

RunConfig load_config(const CliOverrides& o, RunLog** log_out) {
  RunConfig cfg = o.config_path.empty() ? RunConfig::defaults() : RunConfig::load(o.config_path);
  if (o.has_seed) cfg.seed = o.seed;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  cfg.validate();
  static RunLog* log = nullptr;
  log = new RunLog(cfg.out_dir);
  *log_out = log;
  log->line(concat("config ", o.config_path.empty() ? "<defaults>" : o.config_path));
  if (o.has_seed) log->line(concat("override seed=", o.seed));
  if (!o.out_dir.empty()) log->line(concat("override out=", o.out_dir));
  return cfg;
}

std::string ckpt_path(const RunConfig& cfg, const std::string& stage) {
  return (fs::path(cfg.out_dir) / concat("stage", stage, ".ckpt")).string();
}

TrainOptions plan_for(const RunConfig& cfg, const std::string& stage) {
  TrainOptions opts;
  const StagePlan& plan = cfg.training.stages.at(stage);
  opts.steps = plan.steps;
  opts.lr = plan.lr;
  opts.batch_size = cfg.training.batch_size;
  opts.seed = derive_seed(cfg.seed, "train/" + stage);
  opts.text_loss_weight = cfg.training.text_loss_weight;
  return opts;
}

int cmd_datagen(const RunConfig& cfg, RunLog& log, int n_override) {
  datagen::DatagenConfig dcfg = cfg.datagen;
  if (n_override >= 0) dcfg.n_records = n_override;
  auto clients = datagen::make_mock_clients(dcfg.vocab_size, dcfg.sample_rate);
  auto result = datagen::run_pipeline(dcfg, clients, cfg.seed, cfg.out_dir);

  std::string manifest = (fs::path(cfg.out_dir) / "manifest.jsonl").string();
  std::string seeds = (fs::path(cfg.out_dir) / "seeds.jsonl").string();
  datagen::save_manifest(manifest, result.records);
  datagen::save_seed_bank(seeds, result.seeds);
  log.line(concat("datagen records=", result.records.size(), " seeds=", result.seeds.size(),
                  " manifest=", manifest));

  if (!result.records.empty()) {
    auto stats = datagen::manifest_stats(result.records);
    std::ofstream os(fs::path(cfg.out_dir) / "stats.json");
    os << stats.to_json().dump(2) << '\n';
    if (verbosity() >= 1) std::cout << stats.to_text();
  } else {
    log.line("datagen produced an empty manifest; stats skipped");
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, RunLog& log, const std::string& stage) {
  static const std::map<std::string, std::string> prereq = {
      {"1s", ""}, {"1e", "1s"}, {"2a", "1e"}, {"2b", "2a"}, {"3", "2b"}};
  auto it = prereq.find(stage);
  require(it != prereq.end(), "unknown stage '", stage, "', expected one of 1s 1e 2a 2b 3");

  S2SModel model(cfg.model, cfg.seed);
  if (!it->second.empty()) {
    std::string prev = ckpt_path(cfg, it->second);
    require(fs::exists(prev), "missing prerequisite checkpoint ", prev, "; run --stage ",
            it->second, " first");
    model.load(prev);
  }

  TrainOptions opts = plan_for(cfg, stage);
  CorpusOptions copts;
  copts.continuation_len = cfg.training.continuation_len;
  std::uint64_t corpus_seed = derive_seed(cfg.seed, "corpus/" + stage);

  StageReport report;
  if (stage == "1s" || stage == "1e") {
    Stage1Variant variant = stage == "1s" ? Stage1Variant::Semantic : Stage1Variant::Emotion;
    auto pairs = make_stage1_corpus(model, cfg.training.stage1_pairs, variant, corpus_seed, copts);
    report = run_stage1(model, pairs, variant, opts);
    log.line(concat("stage ", stage, " exact_match=",
                    stage1_exact_match(model, pairs, cfg.training.continuation_len + 2)));
  } else if (stage == "2a") {
    auto pairs = make_stage2_offline_corpus(model, cfg.training.stage2a_pairs, corpus_seed, copts);
    report = run_stage2_offline(model, pairs, opts);
  } else if (stage == "2b") {
    auto samples =
        make_stage2_streaming_corpus(model, cfg.training.stage2b_samples, corpus_seed, copts);
    report = run_stage2_streaming(model, samples, opts);
    log.line(concat("stage 2b decode_match=", stage2b_decode_match(model, samples)));
  } else {
    auto samples = make_stage3_corpus(model, cfg.training.stage3_speech, cfg.training.stage3_text,
                                      corpus_seed, copts);
    report = run_stage3(model, samples, opts);
    log.line(concat("stage 3 decode_match=", stage3_decode_match(model, samples)));
  }

  ensure(report.freeze_violations == 0, "stage ", stage, " violated its freeze schedule");
  std::string out = ckpt_path(cfg, stage);
  model.save(out);
  log.line(report.json_line());
  log.line(concat("checkpoint ", out));
  return 0;
}

int cmd_infer(const RunConfig& cfg, RunLog& log, const std::string& wav_path,
              const std::string& text, bool streaming, std::string ckpt) {
  require(wav_path.empty() != text.empty(), "infer: give exactly one of --wav or --text");
  if (ckpt.empty()) ckpt = ckpt_path(cfg, "3");
  require(fs::exists(ckpt), "missing checkpoint ", ckpt, "; run train --stage 3 first");

  S2SModel model(cfg.model, cfg.seed);
  model.load(ckpt);

  MixedSequence prefix;
  prefix.push_back(MixedItem::tok(Vocab::kBos));
  bool empty_input = false;
  if (!wav_path.empty()) {
    WavData wav = read_wav16(wav_path);
    require(wav.sample_rate == cfg.model.rates.sample_rate, "infer: expected ",
            cfg.model.rates.sample_rate, " Hz input, got ", wav.sample_rate);
    FeatureFrames frames = model.encoder.encode(wav.samples, wav.sample_rate);
    empty_input = frames.count() == 0;
    append_embeddings(prefix, model.adapter.forward(frames.data));
  } else {
    auto ids = model.vocab.encode(text);
    empty_input = ids.empty();
    for (int id : ids) prefix.push_back(MixedItem::tok(id));
  }

  std::vector<int> response;
  SpeechTokenSequence tokens;
  if (!empty_input) {
    response = model.lm.generate(prefix, cfg.training.max_response_tokens);
    Tensor hidden = model.lm.response_hidden_states(prefix, response);
    DecodeLimits limits{cfg.training.max_speech_tokens};
    tokens = streaming
                 ? decode_streaming(model.decoder, model.projection, hidden, cfg.model.schedule,
                                    limits)
                 : decode_offline(model.decoder, model.projection, hidden, cfg.model.schedule,
                                  limits);
  }

  Codebook book = model.codebook();
  auto wave = model.vocoder.synth_stream(tokens, cfg.model.schedule.chunk_tokens, book);

  fs::path out_dir(cfg.out_dir);
  write_wav16((out_dir / "response.wav").string(), wave, cfg.model.rates.sample_rate);
  write_token_dump((out_dir / "response.tokens").string(), tokens);

  // Deterministic timing trace from the latency model (wall-clock timing is
  // not part of the output contract).
  StreamTiming timing = simulate_stream_timing(static_cast<int>(response.size()), tokens.count(),
                                               cfg.model.schedule, cfg.latency);
  {
    std::ofstream os(out_dir / "trace.txt");
    os << "# chunk token_begin token_end tokens_ready synth_start audio_ready\n";
    for (const auto& ev : timing.chunks) {
      os << ev.index << ' ' << ev.token_begin << ' ' << ev.token_end << ' ' << ev.tokens_ready
         << ' ' << ev.synth_start << ' ' << ev.audio_ready << '\n';
    }
  }

  log.line(concat("infer mode=", streaming ? "streaming" : "offline", " response_tokens=",
                  response.size(), " speech_tokens=", tokens.count(), " samples=", wave.size(),
                  " first_audio=", timing.first_audio));
  return 0;
}

int cmd_profile_latency(const RunConfig& cfg, RunLog& log) {
  const LatencyParams& p = cfg.latency;
  std::cout << "M N chunk analytic simulated diff\n";
  double worst = 0.0;
  for (int m : {1, 2, 4, 8}) {
    for (int n : {1, 4, 8, 16}) {
      for (int chunk : {1, 2, 4, 8}) {
        ScheduleConfig sched{m, n, chunk};
        double analytic = first_audio_latency(sched, p);
        StreamTiming t = simulate_stream_timing(4 * m, 4 * n + chunk, sched, p);
        double diff = std::abs(analytic - t.first_audio);
        worst = std::max(worst, diff);
        std::cout << m << ' ' << n << ' ' << chunk << ' ' << analytic << ' ' << t.first_audio
                  << ' ' << diff << '\n';
      }
    }
  }
  log.line(concat("profile-latency worst_diff=", worst));
  ensure(worst <= 1e-9, "latency model mismatch: analytic vs simulated differ by ", worst);
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, RunLog& log) {
  // Reduced dimensions keep the oracle under its parameter-count guard.
  ModelConfig small;
  small.frontend.d_enc = 6;
  small.frontend.d_llm = 10;
  small.lm.d_llm = 10;
  small.lm.layers = 2;
  small.lm.heads = 2;
  small.lm.max_len = 32;
  small.lm.vocab = 24;
  small.dec.d_dec = 8;
  small.dec.layers = 1;
  small.dec.heads = 2;
  small.dec.max_len = 32;
  small.dec.text_vocab = 24;
  small.dec.codebook_size = 12;
  small.tok.codebook_size = 12;
  small.tok.n_bands = 4;

  std::uint64_t seed = derive_seed(cfg.seed, "gradcheck");
  double worst = 0.0;

  {  // adapter
    Adapter adapter(small.frontend, seed);
    std::vector<nn::Parameter*> params;
    adapter.collect(params);
    Rng rng(derive_seed(seed, "adapter.data"));
    Tensor x({9, small.frontend.d_enc});
    for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1, 1);
    auto loss = [&]() {
      Tensor y = adapter.forward(x);
      double s = 0.0;
      for (std::int64_t i = 0; i < y.numel(); ++i) s += y[i] * y[i];
      return 0.5 * s;
    };
    auto loss_grad = [&]() {
      Tensor y = adapter.forward(x);
      double s = 0.0;
      for (std::int64_t i = 0; i < y.numel(); ++i) s += y[i] * y[i];
      adapter.backward(y);
      return 0.5 * s;
    };
    auto report = nn::grad_check(params, loss, loss_grad, 1e-5);
    log.line(concat("gradcheck adapter max_rel_err=", report.max_rel_error, " at ",
                    report.worst_param));
    worst = std::max(worst, report.max_rel_error);
  }
  {  // micro-LM
    MicroLm lm(small.lm, seed);
    std::vector<nn::Parameter*> params;
    lm.collect(params);
    MixedSequence seq;
    seq.push_back(MixedItem::tok(Vocab::kBos));
    Rng rng(derive_seed(seed, "lm.data"));
    for (int i = 0; i < 3; ++i) {
      seq.push_back(MixedItem::tok(Vocab::kFirstWord + static_cast<int>(rng.uniform_int(4))));
    }
    std::vector<int> targets = {Vocab::kFirstWord, Vocab::kFirstWord + 1, Vocab::kFirstWord + 2,
                                Vocab::kEos};
    std::vector<bool> mask(4, true);
    nn::CrossEntropy ce;
    auto loss = [&]() { return ce.forward(lm.forward(seq).logits, targets, mask); };
    auto loss_grad = [&]() {
      double l = ce.forward(lm.forward(seq).logits, targets, mask);
      lm.backward(ce.backward(), Tensor());
      return l;
    };
    auto report = nn::grad_check(params, loss, loss_grad, 1e-5);
    log.line(concat("gradcheck micro-lm max_rel_err=", report.max_rel_error, " at ",
                    report.worst_param));
    worst = std::max(worst, report.max_rel_error);
  }
  {  // projection + decoder
    SpeechDecoder dec(small.dec, seed);
    nn::Linear proj("projection", small.lm.d_llm, small.dec.d_dec, seed);
    std::vector<nn::Parameter*> params;
    proj.collect(params);
    dec.collect(params);
    Rng rng(derive_seed(seed, "dec.data"));
    Tensor hidden({4, small.lm.d_llm});
    for (std::int64_t i = 0; i < hidden.numel(); ++i) hidden[i] = rng.uniform(-1, 1);
    SpeechTokenSequence speech;
    for (int i = 0; i < 6; ++i) speech.ids.push_back(static_cast<int>(rng.uniform_int(12)));
    ScheduleConfig sched{2, 3, 2};
    DecoderTrainSequence seq = build_training_sequence(4, speech, sched, dec.vocab());
    nn::CrossEntropy ce;
    auto loss = [&]() {
      return ce.forward(dec.forward_interleaved(seq, hidden, proj), seq.targets, seq.mask);
    };
    auto loss_grad = [&]() {
      double l = ce.forward(dec.forward_interleaved(seq, hidden, proj), seq.targets, seq.mask);
      dec.backward_interleaved(ce.backward(), proj);
      return l;
    };
    auto report = nn::grad_check(params, loss, loss_grad, 1e-5);
    log.line(concat("gradcheck projection+decoder max_rel_err=", report.max_rel_error, " at ",
                    report.worst_param));
    worst = std::max(worst, report.max_rel_error);
  }

  log.line(concat("gradcheck worst=", worst));
  ensure(worst < 1e-4, "gradient check failed: worst relative error ", worst);
  return 0;
}

int cmd_stats(const RunConfig& cfg, RunLog& log, std::string manifest) {
  if (manifest.empty()) manifest = (fs::path(cfg.out_dir) / "manifest.jsonl").string();
  auto records = datagen::load_manifest(manifest);
  auto stats = datagen::manifest_stats(records);  // errors on empty
  std::cout << stats.to_text();
  log.line(concat("stats manifest=", manifest, " records=", records.size()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming speech-to-speech pipeline"};
  app.require_subcommand(1);

  CliOverrides overrides;
  app.add_option("--config", overrides.config_path, "JSON run configuration");
  auto* seed_opt = app.add_option("--seed", overrides.seed, "root seed override");
  app.add_option("--out", overrides.out_dir, "output directory override");

  auto* datagen_cmd = app.add_subcommand("datagen", "run the data construction pipeline");
  int n_override = -1;
  datagen_cmd->add_option("--n", n_override, "record count override");

  auto* train_cmd = app.add_subcommand("train", "run one training stage");
  std::string stage;
  train_cmd->add_option("--stage", stage, "stage: 1s 1e 2a 2b 3")->required();

  auto* infer_cmd = app.add_subcommand("infer", "run end-to-end inference");
  std::string wav_in, text_in, ckpt_in;
  bool streaming = false;
  infer_cmd->add_option("--wav", wav_in, "input WAV (16 kHz mono PCM16)");
  infer_cmd->add_option("--text", text_in, "input text (toy vocabulary words)");
  infer_cmd->add_flag("--streaming", streaming, "use the streaming decode path");
  infer_cmd->add_option("--ckpt", ckpt_in, "checkpoint path (default out/stage3.ckpt)");

  auto* profile_cmd = app.add_subcommand("profile-latency", "first-audio latency table");
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");

  auto* stats_cmd = app.add_subcommand("stats", "manifest distribution report");
  std::string manifest_in;
  stats_cmd->add_option("--manifest", manifest_in, "manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    overrides.has_seed = seed_opt->count() > 0;
    RunLog* log = nullptr;
    RunConfig cfg = load_config(overrides, &log);
    if (datagen_cmd->parsed()) return cmd_datagen(cfg, *log, n_override);
    if (train_cmd->parsed()) return cmd_train(cfg, *log, stage);
    if (infer_cmd->parsed()) return cmd_infer(cfg, *log, wav_in, text_in, streaming, ckpt_in);
    if (profile_cmd->parsed()) return cmd_profile_latency(cfg, *log);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(cfg, *log);
    if (stats_cmd->parsed()) return cmd_stats(cfg, *log, manifest_in);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 2;
  }
}
