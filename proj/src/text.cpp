#include "e11/text.hpp"

#include "e11/common.hpp"

namespace e11 {

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case U'\t':
    case U'\n':
    case U'\v':
    case U'\f':
    case U'\r':
    case U' ':
    case 0x0085:  // NEL
    case 0x00A0:  // NBSP
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

namespace {

// Decodes one UTF-8 code point at `i`, advancing `i`. Malformed bytes are
// treated as Latin-1 so tokenization is total on arbitrary input.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return b0;
  }
  if (i + len > s.size()) {
    ++i;
    return b0;
  }
  for (int k = 1; k < len; ++k) {
    unsigned char bk = byte(i + k);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += len;
  return cp;
}

}  // namespace

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  std::size_t word_start = 0;
  bool in_word = false;
  while (i < text.size()) {
    std::size_t at = i;
    char32_t cp = decode_utf8(text, i);
    if (is_unicode_space(cp)) {
      if (in_word) {
        words.push_back(text.substr(word_start, at - word_start));
        in_word = false;
      }
    } else if (!in_word) {
      word_start = at;
      in_word = true;
    }
  }
  if (in_word) words.push_back(text.substr(word_start));
  return words;
}

std::size_t word_count(std::string_view text) { return split_words(text).size(); }

std::string_view trim(std::string_view text) {
  std::size_t i = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool seen = false;
  while (i < text.size()) {
    std::size_t at = i;
    char32_t cp = decode_utf8(text, i);
    if (!is_unicode_space(cp)) {
      if (!seen) begin = at;
      seen = true;
      end = i;
    }
  }
  if (!seen) return {};
  return text.substr(begin, end - begin);
}

std::vector<std::string> chunk_words(std::string_view text, std::size_t size) {
  if (size < 1) throw DataError("chunk_words: size must be >= 1");
  const auto words = split_words(text);
  if (words.empty()) throw DataError("chunk_words: text has no words");
  std::vector<std::string> chunks;
  chunks.reserve((words.size() + size - 1) / size);
  for (std::size_t begin = 0; begin < words.size(); begin += size) {
    const std::size_t end = std::min(begin + size, words.size());
    std::string chunk;
    for (std::size_t k = begin; k < end; ++k) {
      if (k > begin) chunk += ' ';
      chunk += words[k];
    }
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

}  // namespace e11
