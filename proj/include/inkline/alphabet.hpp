#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace inkline {

/// Ordered symbol set plus the padding symbol epsilon.
///
/// Symbol indices are [0, size()); epsilon takes index size(). Recognizer
/// decoders additionally reserve size() + 1 as a start-of-sequence token.
class Alphabet {
 public:
  /// Symbols are the code points of a UTF-8 string, in order.
  explicit Alphabet(std::u32string symbols);
  static Alphabet from_utf8(std::string_view symbols);

  /// Space, IAM punctuation, digits, upper and lower case letters (79 symbols).
  static Alphabet iam();

  int size() const noexcept { return static_cast<int>(symbols_.size()); }
  int epsilon_index() const noexcept { return size(); }
  int start_index() const noexcept { return size() + 1; }

  bool contains(char32_t symbol) const { return index_.contains(symbol); }

  /// Symbol indices for a UTF-8 string; throws EncodingError naming the
  /// first unmapped character.
  std::vector<int> encode(std::string_view utf8) const;
  /// Inverse of encode; epsilon and out-of-range indices are dropped.
  std::string decode(const std::vector<int>& indices) const;

  std::string to_utf8() const;
  const std::u32string& symbols() const noexcept { return symbols_; }

  friend bool operator==(const Alphabet& a, const Alphabet& b) {
    return a.symbols_ == b.symbols_;
  }

 private:
  std::u32string symbols_;
  std::unordered_map<char32_t, int> index_;
};

std::u32string utf8_to_utf32(std::string_view utf8);
std::string utf32_to_utf8(std::u32string_view text);

/// Text padded with epsilon up to a fixed length.
struct PaddedText {
  std::vector<int> symbols;  // length T
  int true_length = 0;
};

/// Encode and pad to `max_length`. Rejects empty strings and strings longer
/// than max_length (AlignmentError).
PaddedText pad_text(const Alphabet& alphabet, std::string_view utf8, int max_length);

}  // namespace inkline
