#include "s2s/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "s2s/errors.hpp"
#include "s2s/refsynth.hpp"
#include "s2s/rng.hpp"
#include "s2s/vocab.hpp"
#include "s2s/wav.hpp"

namespace s2s::datagen {

namespace fs = std::filesystem;

std::string language_name(Language lang) { return lang == Language::En ? "en" : "zh"; }

Language language_from_name(const std::string& name) {
  if (name == "en") return Language::En;
  if (name == "zh") return Language::Zh;
  throw ValidationError(concat("unknown language '", name, "', expected en or zh"));
}

const std::vector<std::string>& response_emotion_labels() {
  static const std::vector<std::string> labels = {
      "comforting-calm",   "cheerful-bright", "soothing-soft", "reassuring-steady",
      "excited-energetic", "warm-gentle",     "neutral-even"};
  return labels;
}

std::string sensitivity_name(Sensitivity s) {
  switch (s) {
    case Sensitivity::Emotion: return "emotion";
    case Sensitivity::Age: return "age";
    case Sensitivity::Gender: return "gender";
    case Sensitivity::None: return "none";
  }
  throw ValidationError("bad sensitivity");
}

Sensitivity sensitivity_from_name(const std::string& name) {
  if (name == "emotion") return Sensitivity::Emotion;
  if (name == "age") return Sensitivity::Age;
  if (name == "gender") return Sensitivity::Gender;
  if (name == "none") return Sensitivity::None;
  throw ValidationError(concat("unknown sensitivity '", name, "'"));
}

std::string kind_name(RecordKind k) {
  switch (k) {
    case RecordKind::Empathetic: return "empathetic";
    case RecordKind::General: return "general";
    case RecordKind::T2S: return "t2s";
  }
  throw ValidationError("bad record kind");
}

RecordKind kind_from_name(const std::string& name) {
  if (name == "empathetic") return RecordKind::Empathetic;
  if (name == "general") return RecordKind::General;
  if (name == "t2s") return RecordKind::T2S;
  throw ValidationError(concat("unknown record kind '", name, "'"));
}

TagMarginals TagMarginals::defaults() {
  TagMarginals m;
  m.emotion = {0.18, 0.16, 0.12, 0.22, 0.12, 0.10, 0.10};
  m.age = {0.15, 0.60, 0.25};
  m.gender = {0.5, 0.5};
  return m;
}

void TagMarginals::validate() const {
  auto check = [](const std::vector<double>& p, std::size_t n, const char* what) {
    require(p.size() == n, "TagMarginals: ", what, " needs ", n, " entries, got ", p.size());
    double sum = 0.0;
    for (double v : p) {
      require(v >= 0.0, "TagMarginals: negative ", what, " probability");
      sum += v;
    }
    require(std::abs(sum - 1.0) < 1e-9, "TagMarginals: ", what, " probabilities sum to ", sum);
  };
  check(emotion, emotion_labels().size(), "emotion");
  check(age, age_labels().size(), "age");
  check(gender, gender_labels().size(), "gender");
}

void DatagenConfig::validate() const {
  require(seeds_per_language >= 1, "DatagenConfig: seeds_per_language must be >= 1");
  require(n_records >= 0, "DatagenConfig: n_records must be >= 0");
  require(general_fraction >= 0.0 && general_fraction <= 1.0,
          "DatagenConfig: general_fraction must be in [0, 1]");
  require(t2s_fraction >= 0.0 && t2s_fraction <= 1.0,
          "DatagenConfig: t2s_fraction must be in [0, 1]");
  require(!reference_voice.empty(), "DatagenConfig: reference_voice must be set");
  marginals.validate();
}

// ---------------------------------------------------------------- JSON

nlohmann::json to_json(const SeedAudio& s) {
  return {{"id", s.id},         {"language", language_name(s.language)},
          {"transcript", s.transcript}, {"emotion", s.emotion},
          {"gender", s.gender}, {"age", s.age},
          {"audio", s.audio_path}};
}

SeedAudio seed_from_json(const nlohmann::json& j) {
  SeedAudio s;
  s.id = j.at("id").get<std::string>();
  s.language = language_from_name(j.at("language").get<std::string>());
  s.transcript = j.at("transcript").get<std::string>();
  s.emotion = j.at("emotion").get<std::string>();
  s.gender = j.at("gender").get<std::string>();
  s.age = j.at("age").get<std::string>();
  s.audio_path = j.at("audio").get<std::string>();
  return s;
}

nlohmann::json to_json(const DialogueRecord& r) {
  return {{"id", r.id},
          {"kind", kind_name(r.kind)},
          {"language", language_name(r.language)},
          {"instruction", r.instruction_text},
          {"sensitivity", sensitivity_name(r.sensitivity)},
          {"required_value", r.required_value},
          {"seed_id", r.seed_id},
          {"transcript", r.transcript},
          {"emotion", r.emotion},
          {"gender", r.gender},
          {"age", r.age},
          {"instruction_audio", r.instruction_audio},
          {"response", r.response_text},
          {"response_emotion", r.response_emotion},
          {"response_voice", r.response_voice},
          {"response_audio", r.response_audio}};
}

DialogueRecord record_from_json(const nlohmann::json& j) {
  DialogueRecord r;
  r.id = j.at("id").get<std::string>();
  r.kind = kind_from_name(j.at("kind").get<std::string>());
  r.language = language_from_name(j.at("language").get<std::string>());
  r.instruction_text = j.at("instruction").get<std::string>();
  r.sensitivity = sensitivity_from_name(j.at("sensitivity").get<std::string>());
  r.required_value = j.at("required_value").get<std::string>();
  r.seed_id = j.at("seed_id").get<std::string>();
  r.transcript = j.at("transcript").get<std::string>();
  r.emotion = j.at("emotion").get<std::string>();
  r.gender = j.at("gender").get<std::string>();
  r.age = j.at("age").get<std::string>();
  r.instruction_audio = j.at("instruction_audio").get<std::string>();
  r.response_text = j.at("response").get<std::string>();
  r.response_emotion = j.at("response_emotion").get<std::string>();
  r.response_voice = j.at("response_voice").get<std::string>();
  r.response_audio = j.at("response_audio").get<std::string>();
  return r;
}

nlohmann::json to_json(const InstructionRequest& r) {
  return {{"record_id", r.record_id},
          {"language", language_name(r.language)},
          {"kind", kind_name(r.kind)},
          {"seed", r.seed}};
}
nlohmann::json to_json(const InstructionReply& r) {
  return {{"text", r.text},
          {"sensitivity", sensitivity_name(r.sensitivity)},
          {"required_value", r.required_value}};
}
nlohmann::json to_json(const ResponseRequest& r) {
  return {{"record_id", r.record_id}, {"instruction", r.instruction},
          {"transcript", r.transcript}, {"emotion", r.emotion},
          {"gender", r.gender},       {"age", r.age},
          {"seed", r.seed}};
}
nlohmann::json to_json(const EmotionRequest& r) {
  return {{"record_id", r.record_id}, {"instruction", r.instruction}, {"response", r.response},
          {"emotion", r.emotion},     {"gender", r.gender},           {"age", r.age},
          {"seed", r.seed}};
}
nlohmann::json to_json(const CloneSynthRequest& r) {
  return {{"record_id", r.record_id},
          {"text", r.text},
          {"seed_voice", r.seed_voice},
          {"seed_emotion", r.seed_emotion},
          {"seed", r.seed}};
}
nlohmann::json to_json(const InstructedSynthRequest& r) {
  return {{"record_id", r.record_id},
          {"text", r.text},
          {"voice_id", r.voice_id},
          {"emotion", r.emotion},
          {"seed", r.seed}};
}

void save_manifest(const std::string& path, const std::vector<DialogueRecord>& records) {
  std::ofstream os(path);
  ensure(os.good(), "manifest: cannot open ", path, " for writing");
  for (const auto& r : records) os << to_json(r).dump() << '\n';
  ensure(os.good(), "manifest: write failed for ", path);
}

std::vector<DialogueRecord> load_manifest(const std::string& path) {
  std::ifstream is(path);
  ensure(is.good(), "manifest: cannot open ", path);
  std::vector<DialogueRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(concat("manifest: bad record at ", path, ":", line_no, ": ", e.what()));
    }
  }
  return records;
}

void save_seed_bank(const std::string& path, const std::vector<SeedAudio>& seeds) {
  std::ofstream os(path);
  ensure(os.good(), "seed bank: cannot open ", path, " for writing");
  for (const auto& s : seeds) os << to_json(s).dump() << '\n';
  ensure(os.good(), "seed bank: write failed for ", path);
}

std::vector<SeedAudio> load_seed_bank(const std::string& path) {
  std::ifstream is(path);
  ensure(is.good(), "seed bank: cannot open ", path);
  std::vector<SeedAudio> seeds;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) seeds.push_back(seed_from_json(nlohmann::json::parse(line)));
  }
  return seeds;
}

// ---------------------------------------------------------------- mocks

namespace {

struct Template {
  const char* text;
  const char* value;  // required tag value; nullptr lets the client pick
};

// Paralinguistic-sensitive instruction families. {} in a value-bearing
// template means the tag value itself is the constraint, not part of the text.
const std::vector<Template>& templates(Language lang, Sensitivity s) {
  static const std::vector<Template> en_emotion = {
      {"I just got the news I was waiting for. What should I do now?", nullptr},
      {"Can you tell how my day went from my voice?", nullptr},
      {"I want to talk about what happened at work today.", nullptr},
      {"Say something that fits how I sound right now.", nullptr},
  };
  static const std::vector<Template> en_age = {
      {"Do you think I can run a marathon?", "elderly"},
      {"Explain how rainbows happen, please.", "child"},
      {"What hobby would suit someone like me?", nullptr},
      {"Can you recommend music for my generation?", nullptr},
  };
  static const std::vector<Template> en_gender = {
      {"What would you suggest I wear to the reunion?", nullptr},
      {"Recommend a book a person like me would enjoy.", nullptr},
      {"How should I introduce myself at the club?", nullptr},
  };
  static const std::vector<Template> en_none = {
      {"What is a good way to start learning the piano?", nullptr},
      {"Tell me something interesting about the ocean.", nullptr},
      {"How do I keep my plants alive in winter?", nullptr},
      {"Suggest a weekend plan for bad weather.", nullptr},
  };
  static const std::vector<Template> zh_emotion = {
      {"我刚刚听到了那个消息，你能陪我聊聊吗？", nullptr},
      {"听我的声音，你觉得我今天过得怎么样？", nullptr},
      {"我想说说今天发生的事情。", nullptr},
  };
  static const std::vector<Template> zh_age = {
      {"你觉得我还能去跑马拉松吗？", "elderly"},
      {"可以给我讲讲彩虹是怎么来的吗？", "child"},
      {"有什么适合我这个年纪的爱好吗？", nullptr},
  };
  static const std::vector<Template> zh_gender = {
      {"同学聚会我穿什么比较好？", nullptr},
      {"推荐一本适合我的书吧。", nullptr},
  };
  static const std::vector<Template> zh_none = {
      {"学钢琴应该从哪里开始？", nullptr},
      {"给我讲一个关于海洋的趣事吧。", nullptr},
      {"冬天怎么养好室内植物？", nullptr},
  };
  if (lang == Language::En) {
    switch (s) {
      case Sensitivity::Emotion: return en_emotion;
      case Sensitivity::Age: return en_age;
      case Sensitivity::Gender: return en_gender;
      case Sensitivity::None: return en_none;
    }
  }
  switch (s) {
    case Sensitivity::Emotion: return zh_emotion;
    case Sensitivity::Age: return zh_age;
    case Sensitivity::Gender: return zh_gender;
    case Sensitivity::None: return zh_none;
  }
  throw ValidationError("bad template selector");
}

const std::vector<Template>& general_templates(Language lang) {
  static const std::vector<Template> en = {
      {"Summarize the plot of your favorite folk tale.", nullptr},
      {"Give me three tips for better sleep.", nullptr},
      {"Describe how bread is baked.", nullptr},
      {"What makes a good morning routine?", nullptr},
      {"Explain why the sky looks blue.", nullptr},
  };
  static const std::vector<Template> zh = {
      {"讲讲你最喜欢的民间故事的大意。", nullptr},
      {"给我三个改善睡眠的小建议。", nullptr},
      {"描述一下面包是怎么烤出来的。", nullptr},
      {"怎样才算一个好的晨间习惯？", nullptr},
  };
  return lang == Language::En ? en : zh;
}

class MockInstructionClient : public InstructionClient {
 public:
  InstructionReply generate(const InstructionRequest& req) override {
    Rng rng(derive_seed(req.seed, "instruction/" + req.record_id));
    InstructionReply reply;
    if (req.kind == RecordKind::General) {
      // General records use neutral-emotion seed voices.
      const auto& pool = general_templates(req.language);
      reply.text = pool[static_cast<std::size_t>(rng.uniform_int(
                            static_cast<std::int64_t>(pool.size())))].text;
      reply.sensitivity = Sensitivity::Emotion;
      reply.required_value = "neutral";
      return reply;
    }
    reply.sensitivity = static_cast<Sensitivity>(rng.uniform_int(4));
    const auto& pool = templates(req.language, reply.sensitivity);
    const Template& t =
        pool[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(pool.size())))];
    reply.text = t.text;
    switch (reply.sensitivity) {
      case Sensitivity::Emotion:
        reply.required_value = t.value ? t.value
                                       : emotion_labels()[static_cast<std::size_t>(rng.uniform_int(
                                             static_cast<std::int64_t>(emotion_labels().size())))];
        break;
      case Sensitivity::Age:
        reply.required_value = t.value ? t.value
                                       : age_labels()[static_cast<std::size_t>(rng.uniform_int(
                                             static_cast<std::int64_t>(age_labels().size())))];
        break;
      case Sensitivity::Gender:
        reply.required_value = t.value ? t.value
                                       : gender_labels()[static_cast<std::size_t>(rng.uniform_int(
                                             static_cast<std::int64_t>(gender_labels().size())))];
        break;
      case Sensitivity::None:
        reply.required_value.clear();
        break;
    }
    return reply;
  }
};

class MockResponseClient : public ResponseClient {
 public:
  ResponseReply respond(const ResponseRequest& req) override {
    require(!req.instruction.empty(), "response client: empty instruction for record ",
            req.record_id);
    Rng rng(derive_seed(req.seed, "response/" + req.record_id));
    static const char* en_openers[] = {"I hear you.", "Thanks for sharing that.",
                                       "That sounds important.", "Let me help with that."};
    static const char* zh_openers[] = {"我听到了。", "谢谢你告诉我。", "这听起来很重要。",
                                       "让我来帮你。"};
    bool zh = !req.instruction.empty() && static_cast<unsigned char>(req.instruction[0]) > 127;
    const char* opener = zh ? zh_openers[rng.uniform_int(4)] : en_openers[rng.uniform_int(4)];
    ResponseReply reply;
    if (zh) {
      reply.text = concat(opener, "考虑到你", req.emotion, "的语气，我会温和地这样回答：", req.instruction);
    } else {
      reply.text = concat(opener, " Given your ", req.emotion, " tone as a ", req.age, " ",
                          req.gender, " speaker, here is a gentle answer: ", req.instruction);
    }
    return reply;
  }
};

class MockEmotionClient : public EmotionClient {
 public:
  EmotionReply infer(const EmotionRequest& req) override {
    require(!req.response.empty(), "emotion client: empty response for record ", req.record_id);
    return {mock_response_emotion(req.emotion)};
  }
};

class MockCloneSynthClient : public CloneSynthClient {
 public:
  MockCloneSynthClient(int vocab_size, int sample_rate)
      : vocab_size_(vocab_size), sample_rate_(sample_rate) {}

  SynthReply synth(const CloneSynthRequest& req) override {
    require(!req.text.empty(), "clone synth: empty text for record ", req.record_id);
    RefSynthConfig cfg;
    cfg.sample_rate = sample_rate_;
    VoiceStyle style = style_for_voice_emotion(req.seed_voice, req.seed_emotion);
    return {synth_text(req.text, vocab_size_, style, cfg), sample_rate_};
  }

 private:
  int vocab_size_;
  int sample_rate_;
};

class MockInstructedSynthClient : public InstructedSynthClient {
 public:
  MockInstructedSynthClient(int vocab_size, int sample_rate)
      : vocab_size_(vocab_size), sample_rate_(sample_rate) {}

  SynthReply synth(const InstructedSynthRequest& req) override {
    require(!req.text.empty(), "instructed synth: empty text for record ", req.record_id);
    require(!req.voice_id.empty(), "instructed synth: empty voice id for record ", req.record_id);
    RefSynthConfig cfg;
    cfg.sample_rate = sample_rate_;
    VoiceStyle style = style_for_voice_emotion(req.voice_id, req.emotion);
    return {synth_text(req.text, vocab_size_, style, cfg), sample_rate_};
  }

 private:
  int vocab_size_;
  int sample_rate_;
};

std::uint64_t fnv1a_bytes(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

// Content-addressed WAV under out_root/audio/<h2>/<h16>.wav; returns the
// relative path.
std::string store_wav(const SynthReply& audio, const std::string& out_root) {
  auto bytes = encode_wav16(audio.samples, audio.sample_rate);
  std::string h = hex64(fnv1a_bytes(bytes.data(), bytes.size()));
  fs::path rel = fs::path("audio") / h.substr(0, 2) / (h + ".wav");
  fs::path full = fs::path(out_root) / rel;
  fs::create_directories(full.parent_path());
  std::ofstream os(full, std::ios::binary);
  ensure(os.good(), "datagen: cannot write ", full.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  ensure(os.good(), "datagen: write failed for ", full.string());
  return rel.generic_string();
}

std::string record_id(const char* prefix, Language lang, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%s-%06d", prefix, language_name(lang).c_str(), index);
  return buf;
}

const std::vector<std::string>& seed_words(Language lang) {
  static const std::vector<std::string> en = {
      "morning", "river",  "letter", "garden", "window", "travel", "music",  "coffee",
      "story",   "bridge", "winter", "candle", "market", "forest", "dinner", "repair"};
  static const std::vector<std::string> zh = {
      "早晨", "河流", "信件", "花园", "窗户", "旅行", "音乐", "咖啡",
      "故事", "桥梁", "冬天", "蜡烛", "市场", "森林", "晚餐", "修理"};
  return lang == Language::En ? en : zh;
}

}  // namespace

const std::string& mock_response_emotion(const std::string& query_emotion) {
  static const std::map<std::string, std::string> rulebook = {
      {"happy", "cheerful-bright"},   {"sad", "comforting-calm"},
      {"angry", "soothing-soft"},     {"neutral", "neutral-even"},
      {"surprised", "excited-energetic"}, {"fearful", "reassuring-steady"},
      {"disgusted", "warm-gentle"}};
  auto it = rulebook.find(query_emotion);
  require(it != rulebook.end(), "mock rulebook: unknown query emotion '", query_emotion, "'");
  return it->second;
}

ClientSuite make_mock_clients(int vocab_size, int sample_rate) {
  ClientSuite suite;
  suite.instruction = std::make_unique<MockInstructionClient>();
  suite.response = std::make_unique<MockResponseClient>();
  suite.emotion = std::make_unique<MockEmotionClient>();
  suite.clone_synth = std::make_unique<MockCloneSynthClient>(vocab_size, sample_rate);
  suite.instructed_synth = std::make_unique<MockInstructedSynthClient>(vocab_size, sample_rate);
  return suite;
}

// ---------------------------------------------------------------- pipeline

std::vector<SeedAudio> build_seed_bank(int n_per_language, const DatagenConfig& cfg,
                                       ClientSuite& clients, std::uint64_t seed,
                                       const std::string& out_root) {
  require(n_per_language >= 1, "build_seed_bank: n_per_language must be >= 1");
  cfg.validate();

  std::vector<SeedAudio> bank;
  bank.reserve(2 * static_cast<std::size_t>(n_per_language));
  const auto& emotions = emotion_labels();
  const auto& ages = age_labels();
  const auto& genders = gender_labels();
  int coverage = static_cast<int>(emotions.size() + ages.size() + genders.size());

  for (Language lang : {Language::En, Language::Zh}) {
    for (int i = 0; i < n_per_language; ++i) {
      SeedAudio s;
      s.id = record_id("seed", lang, i);
      s.language = lang;
      Rng rng(derive_seed(seed, "seed-bank/" + s.id));
      s.emotion = emotions[static_cast<std::size_t>(rng.categorical(cfg.marginals.emotion))];
      s.age = ages[static_cast<std::size_t>(rng.categorical(cfg.marginals.age))];
      s.gender = genders[static_cast<std::size_t>(rng.categorical(cfg.marginals.gender))];
      // the first seeds cycle through every tag value so constrained
      // selection always finds a match
      if (i < coverage) {
        if (i < static_cast<int>(emotions.size())) {
          s.emotion = emotions[static_cast<std::size_t>(i)];
        } else if (i < static_cast<int>(emotions.size() + ages.size())) {
          s.age = ages[static_cast<std::size_t>(i) - emotions.size()];
        } else {
          s.gender = genders[static_cast<std::size_t>(i) - emotions.size() - ages.size()];
        }
      }
      const auto& words = seed_words(lang);
      int len = 3 + static_cast<int>(rng.uniform_int(4));
      for (int w = 0; w < len; ++w) {
        if (w) s.transcript += ' ';
        s.transcript += words[static_cast<std::size_t>(rng.uniform_int(
            static_cast<std::int64_t>(words.size())))];
      }
      CloneSynthRequest req{s.id, s.transcript, s.id, s.emotion,
                            derive_seed(seed, "seed-audio/" + s.id)};
      s.audio_path = store_wav(clients.clone_synth->synth(req), out_root);
      bank.push_back(std::move(s));
    }
  }
  return bank;
}

std::vector<InstructionRecord> generate_instructions(int n, Language language, RecordKind kind,
                                                     ClientSuite& clients, std::uint64_t seed) {
  require(n >= 0, "generate_instructions: n must be >= 0");
  require(kind != RecordKind::T2S, "generate_instructions: T2S records are derived, not generated");
  std::vector<InstructionRecord> records;
  records.reserve(static_cast<std::size_t>(n));
  const char* prefix = kind == RecordKind::Empathetic ? "emp" : "gen";
  for (int i = 0; i < n; ++i) {
    InstructionRecord rec;
    rec.id = record_id(prefix, language, i);
    rec.language = language;
    InstructionRequest req{rec.id, language, kind, seed};
    InstructionReply reply;
    try {
      reply = clients.instruction->generate(req);
    } catch (const std::exception& e) {
      throw RuntimeError(concat("instruction client failed for record ", rec.id, ": ", e.what()));
    }
    require(!reply.text.empty(), "instruction client returned empty text for record ", rec.id);
    rec.text = reply.text;
    rec.sensitivity = reply.sensitivity;
    rec.required_value = reply.required_value;
    records.push_back(std::move(rec));
  }
  return records;
}

const SeedAudio& select_seed(const InstructionRecord& rec, const std::vector<SeedAudio>& bank,
                             std::uint64_t seed) {
  std::vector<const SeedAudio*> matching;
  for (const auto& s : bank) {
    if (s.language != rec.language) continue;
    bool ok = true;
    switch (rec.sensitivity) {
      case Sensitivity::Emotion: ok = s.emotion == rec.required_value; break;
      case Sensitivity::Age: ok = s.age == rec.required_value; break;
      case Sensitivity::Gender: ok = s.gender == rec.required_value; break;
      case Sensitivity::None: ok = true; break;
    }
    if (ok) matching.push_back(&s);
  }
  require(!matching.empty(), "select_seed: no seed with ", sensitivity_name(rec.sensitivity),
          rec.sensitivity == Sensitivity::None ? "" : concat("=", rec.required_value),
          " in language ", language_name(rec.language), " for record ", rec.id);
  Rng rng(derive_seed(seed, "seed-select/" + rec.id));
  return *matching[static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(matching.size())))];
}

DialogueRecord annotate(const InstructionRecord& rec, const SeedAudio& seed, RecordKind kind) {
  DialogueRecord d;
  d.id = rec.id;
  d.kind = kind;
  d.language = rec.language;
  d.instruction_text = rec.text;
  d.sensitivity = rec.sensitivity;
  d.required_value = rec.required_value;
  d.seed_id = seed.id;
  d.transcript = seed.transcript;
  d.emotion = seed.emotion;
  d.gender = seed.gender;
  d.age = seed.age;
  return d;
}

std::pair<std::string, std::string> generate_response(const DialogueRecord& rec,
                                                      ClientSuite& clients, std::uint64_t seed) {
  require(!rec.instruction_text.empty(), "generate_response: empty instruction text for record ",
          rec.id);
  require(!rec.seed_id.empty(), "generate_response: record ", rec.id, " has no matched seed");

  ResponseReply response;
  try {
    response = clients.response->respond(
        {rec.id, rec.instruction_text, rec.transcript, rec.emotion, rec.gender, rec.age, seed});
  } catch (const std::exception& e) {
    throw RuntimeError(concat("response client failed for record ", rec.id, ": ", e.what()));
  }

  EmotionReply emotion;
  try {
    emotion = clients.emotion->infer({rec.id, rec.instruction_text, response.text, rec.emotion,
                                      rec.gender, rec.age, seed});
  } catch (const std::exception& e) {
    throw RuntimeError(concat("emotion client failed for record ", rec.id, ": ", e.what()));
  }
  const auto& allowed = response_emotion_labels();
  require(std::find(allowed.begin(), allowed.end(), emotion.emotion) != allowed.end(),
          "emotion client returned unknown label '", emotion.emotion, "' for record ", rec.id);
  return {response.text, emotion.emotion};
}

void synthesize_record(DialogueRecord& rec, const SeedAudio& seed, ClientSuite& clients,
                       const DatagenConfig& cfg, std::uint64_t root_seed,
                       const std::string& out_root) {
  require(!rec.response_text.empty(), "synthesize_record: record ", rec.id, " has no response");
  try {
    if (rec.kind != RecordKind::T2S) {
      CloneSynthRequest req{rec.id, rec.instruction_text, seed.id, seed.emotion,
                            derive_seed(root_seed, "clone/" + rec.id)};
      rec.instruction_audio = store_wav(clients.clone_synth->synth(req), out_root);
    }
    InstructedSynthRequest req{rec.id, rec.response_text, cfg.reference_voice,
                               rec.response_emotion, derive_seed(root_seed, "resp/" + rec.id)};
    rec.response_audio = store_wav(clients.instructed_synth->synth(req), out_root);
    rec.response_voice = cfg.reference_voice;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw RuntimeError(concat("synthesis failed for record ", rec.id, ": ", e.what()));
  }
}

std::vector<DialogueRecord> derive_t2s(const std::vector<DialogueRecord>& records, double fraction,
                                       std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, "derive_t2s: fraction must be in (0, 1], got ",
          fraction);
  int take = static_cast<int>(std::llround(fraction * static_cast<double>(records.size())));

  std::vector<int> order(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(derive_seed(seed, "t2s-subsample"));
  rng.shuffle(order);
  order.resize(static_cast<std::size_t>(take));
  std::sort(order.begin(), order.end());  // keep manifest order stable

  std::vector<DialogueRecord> out;
  out.reserve(order.size());
  for (int idx : order) {
    DialogueRecord r = records[static_cast<std::size_t>(idx)];
    r.id += "-t2s";
    r.kind = RecordKind::T2S;
    r.instruction_audio.clear();
    out.push_back(std::move(r));
  }
  return out;
}

ManifestStats manifest_stats(const std::vector<DialogueRecord>& records) {
  require(!records.empty(), "manifest_stats: empty manifest");

  auto build = [&](const std::vector<std::string>& labels, auto field) {
    Histogram h;
    h.labels = labels;
    h.counts.assign(labels.size(), 0);
    for (const auto& r : records) {
      const std::string& v = field(r);
      auto it = std::find(labels.begin(), labels.end(), v);
      require(it != labels.end(), "manifest_stats: unexpected label '", v, "' in record ", r.id);
      ++h.counts[static_cast<std::size_t>(it - labels.begin())];
    }
    h.fractions.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      h.fractions[i] = static_cast<double>(h.counts[i]) / static_cast<double>(records.size());
    }
    return h;
  };

  ManifestStats stats;
  stats.query_emotion = build(emotion_labels(), [](const DialogueRecord& r) -> const std::string& {
    return r.emotion;
  });
  stats.query_age =
      build(age_labels(), [](const DialogueRecord& r) -> const std::string& { return r.age; });
  stats.query_gender = build(gender_labels(), [](const DialogueRecord& r) -> const std::string& {
    return r.gender;
  });
  stats.response_emotion =
      build(response_emotion_labels(),
            [](const DialogueRecord& r) -> const std::string& { return r.response_emotion; });
  return stats;
}

std::string ManifestStats::to_text() const {
  std::ostringstream os;
  auto dump = [&os](const char* title, const Histogram& h) {
    os << title << ":\n";
    for (std::size_t i = 0; i < h.labels.size(); ++i) {
      os << "  " << h.labels[i] << " " << h.counts[i] << " (" << h.fractions[i] << ")\n";
    }
  };
  dump("query emotion", query_emotion);
  dump("query age", query_age);
  dump("query gender", query_gender);
  dump("response emotion", response_emotion);
  return os.str();
}

nlohmann::json ManifestStats::to_json() const {
  auto hist = [](const Histogram& h) {
    nlohmann::json j;
    for (std::size_t i = 0; i < h.labels.size(); ++i) {
      j[h.labels[i]] = {{"count", h.counts[i]}, {"fraction", h.fractions[i]}};
    }
    return j;
  };
  return {{"query_emotion", hist(query_emotion)},
          {"query_age", hist(query_age)},
          {"query_gender", hist(query_gender)},
          {"response_emotion", hist(response_emotion)}};
}

PipelineOutput run_pipeline(const DatagenConfig& cfg, ClientSuite& clients, std::uint64_t seed,
                            const std::string& out_root) {
  cfg.validate();
  fs::create_directories(out_root);

  PipelineOutput out;
  out.seeds = build_seed_bank(cfg.seeds_per_language, cfg, clients, seed, out_root);

  int n_general = static_cast<int>(std::llround(cfg.general_fraction * cfg.n_records));
  int n_emp = cfg.n_records - n_general;
  std::vector<DialogueRecord> general_records;

  auto run_kind = [&](RecordKind kind, int n_total) {
    int n_en = (n_total + 1) / 2;
    for (Language lang : {Language::En, Language::Zh}) {
      int n = lang == Language::En ? n_en : n_total - n_en;
      auto instructions = generate_instructions(n, lang, kind, clients, seed);
      for (const auto& rec : instructions) {
        const SeedAudio& matched = select_seed(rec, out.seeds, seed);
        DialogueRecord d = annotate(rec, matched, kind);
        auto [text, emotion] = generate_response(d, clients, seed);
        d.response_text = text;
        d.response_emotion = emotion;
        synthesize_record(d, matched, clients, cfg, seed, out_root);
        if (kind == RecordKind::General) general_records.push_back(d);
        out.records.push_back(std::move(d));
      }
    }
  };
  run_kind(RecordKind::Empathetic, n_emp);
  run_kind(RecordKind::General, n_general);

  if (!general_records.empty() && cfg.t2s_fraction > 0.0) {
    auto t2s = derive_t2s(general_records, cfg.t2s_fraction, seed);
    out.records.insert(out.records.end(), t2s.begin(), t2s.end());
  }
  return out;
}

}  // namespace s2s::datagen
