#pragma once

#include <string>
#include <vector>

namespace s2s {

// Closed tag vocabularies shared by the LM prompt format and the data
// pipeline.
const std::vector<std::string>& emotion_labels();  // 7
const std::vector<std::string>& gender_labels();   // 2
const std::vector<std::string>& age_labels();      // 3

// Toy text vocabulary: ids 0..2 are PAD/BOS/EOS, then one tag token per
// emotion/gender/age label, then generic word tokens "w015".."wNNN".
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kFirstEmotion = 3;   // 7 ids
  static constexpr int kFirstGender = 10;   // 2 ids
  static constexpr int kFirstAge = 12;      // 3 ids
  static constexpr int kFirstWord = 15;

  static Vocab make_default(int size = 128);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  int id_of(const std::string& token) const;  // -1 when absent

  int emotion_tag(const std::string& label) const;
  int gender_tag(const std::string& label) const;
  int age_tag(const std::string& label) const;
  bool is_word(int id) const { return id >= kFirstWord && id < size(); }

  // Whitespace tokenization; unknown words raise ValidationError.
  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  // One token string per line, line number = id.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
};

}  // namespace s2s
