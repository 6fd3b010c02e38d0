#include "inkline/alphabet.hpp"

#include <cstdint>
#include <cstdio>

#include "inkline/error.hpp"

namespace inkline {

namespace {

std::string describe(char32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "U+%04X", static_cast<unsigned>(cp));
  return "'" + utf32_to_utf8(std::u32string(1, cp)) + "' (" + buf + ")";
}

}  // namespace

std::u32string utf8_to_utf32(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  std::size_t i = 0;
  while (i < utf8.size()) {
    const auto lead = static_cast<std::uint8_t>(utf8[i]);
    int extra = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      cp = lead & 0x1F;
      extra = 1;
    } else if ((lead & 0xF0) == 0xE0) {
      cp = lead & 0x0F;
      extra = 2;
    } else if ((lead & 0xF8) == 0xF0) {
      cp = lead & 0x07;
      extra = 3;
    } else {
      fail(ErrorKind::EncodingError, "malformed UTF-8 at byte " + std::to_string(i));
    }
    if (i + static_cast<std::size_t>(extra) >= utf8.size()) {
      fail(ErrorKind::EncodingError, "truncated UTF-8 sequence at byte " + std::to_string(i));
    }
    for (int k = 1; k <= extra; ++k) {
      const auto cont = static_cast<std::uint8_t>(utf8[i + k]);
      if ((cont & 0xC0) != 0x80) {
        fail(ErrorKind::EncodingError, "malformed UTF-8 at byte " + std::to_string(i + k));
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

std::string utf32_to_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

Alphabet::Alphabet(std::u32string symbols) : symbols_(std::move(symbols)) {
  require(!symbols_.empty(), ErrorKind::ConfigError, "alphabet must not be empty");
  for (int i = 0; i < size(); ++i) {
    const auto [it, inserted] = index_.emplace(symbols_[i], i);
    require(inserted, ErrorKind::ConfigError,
            "duplicate alphabet symbol " + describe(symbols_[i]));
  }
}

Alphabet Alphabet::from_utf8(std::string_view symbols) {
  return Alphabet(utf8_to_utf32(symbols));
}

Alphabet Alphabet::iam() {
  return from_utf8(
      " !\"#&'()*+,-./0123456789:;?"
      "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
      "abcdefghijklmnopqrstuvwxyz");
}

std::vector<int> Alphabet::encode(std::string_view utf8) const {
  std::vector<int> out;
  for (char32_t cp : utf8_to_utf32(utf8)) {
    auto it = index_.find(cp);
    if (it == index_.end()) {
      fail(ErrorKind::EncodingError, "character " + describe(cp) + " is not in the alphabet");
    }
    out.push_back(it->second);
  }
  return out;
}

std::string Alphabet::decode(const std::vector<int>& indices) const {
  std::u32string text;
  for (int idx : indices) {
    if (idx >= 0 && idx < size()) {
      text.push_back(symbols_[idx]);
    }
  }
  return utf32_to_utf8(text);
}

std::string Alphabet::to_utf8() const { return utf32_to_utf8(symbols_); }

PaddedText pad_text(const Alphabet& alphabet, std::string_view utf8, int max_length) {
  auto symbols = alphabet.encode(utf8);
  require(!symbols.empty(), ErrorKind::ContractViolation, "text must not be empty");
  if (static_cast<int>(symbols.size()) > max_length) {
    fail(ErrorKind::AlignmentError, "text of length " + std::to_string(symbols.size()) +
                                        " exceeds maximum length " + std::to_string(max_length));
  }
  PaddedText padded;
  padded.true_length = static_cast<int>(symbols.size());
  padded.symbols = std::move(symbols);
  padded.symbols.resize(max_length, alphabet.epsilon_index());
  return padded;
}

}  // namespace inkline
