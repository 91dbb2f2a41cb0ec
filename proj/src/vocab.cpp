#include "s2s/vocab.hpp"

#include <fstream>
#include <sstream>

#include "s2s/errors.hpp"

namespace s2s {

const std::vector<std::string>& emotion_labels() {
  static const std::vector<std::string> labels = {"happy",     "sad",     "angry", "neutral",
                                                  "surprised", "fearful", "disgusted"};
  return labels;
}

const std::vector<std::string>& gender_labels() {
  static const std::vector<std::string> labels = {"female", "male"};
  return labels;
}

const std::vector<std::string>& age_labels() {
  static const std::vector<std::string> labels = {"child", "adult", "elderly"};
  return labels;
}

Vocab Vocab::make_default(int size) {
  require(size >= kFirstWord + 1, "Vocab: size must be at least ", kFirstWord + 1, ", got ", size);
  Vocab v;
  v.tokens_.reserve(static_cast<std::size_t>(size));
  v.tokens_.push_back("<pad>");
  v.tokens_.push_back("<bos>");
  v.tokens_.push_back("<eos>");
  for (const auto& e : emotion_labels()) v.tokens_.push_back("<emo:" + e + ">");
  for (const auto& g : gender_labels()) v.tokens_.push_back("<gen:" + g + ">");
  for (const auto& a : age_labels()) v.tokens_.push_back("<age:" + a + ">");
  for (int id = kFirstWord; id < size; ++id) {
    std::ostringstream os;
    os << "w" << (id < 100 ? (id < 10 ? "00" : "0") : "") << id;
    v.tokens_.push_back(os.str());
  }
  return v;
}

const std::string& Vocab::token(int id) const {
  require(id >= 0 && id < size(), "Vocab: id ", id, " out of range [0, ", size(), ")");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocab::id_of(const std::string& token) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i] == token) return static_cast<int>(i);
  }
  return -1;
}

int Vocab::emotion_tag(const std::string& label) const {
  int id = id_of("<emo:" + label + ">");
  require(id >= 0, "Vocab: unknown emotion label '", label, "'");
  return id;
}

int Vocab::gender_tag(const std::string& label) const {
  int id = id_of("<gen:" + label + ">");
  require(id >= 0, "Vocab: unknown gender label '", label, "'");
  return id;
}

int Vocab::age_tag(const std::string& label) const {
  int id = id_of("<age:" + label + ">");
  require(id >= 0, "Vocab: unknown age label '", label, "'");
  return id;
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> ids;
  std::istringstream is(text);
  std::string word;
  while (is >> word) {
    int id = id_of(word);
    require(id >= 0, "Vocab: unknown token '", word, "'");
    ids.push_back(id);
  }
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

void Vocab::save(const std::string& path) const {
  std::ofstream os(path);
  ensure(os.good(), "Vocab: cannot open ", path, " for writing");
  for (const auto& t : tokens_) os << t << '\n';
  ensure(os.good(), "Vocab: write failed for ", path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream is(path);
  ensure(is.good(), "Vocab: cannot open ", path);
  Vocab v;
  std::string line;
  while (std::getline(is, line)) v.tokens_.push_back(line);
  require(v.size() >= kFirstWord + 1, "Vocab: file ", path, " has only ", v.size(), " tokens");
  return v;
}

}  // namespace s2s
