#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace e11 {

// Shared word definition for filtering, chunking and the stub encoder:
// a word is a maximal run of non-whitespace code points, where whitespace
// means the Unicode whitespace set (ASCII space/tab/newlines, NBSP, the
// U+2000 block, ideographic space, ...). Punctuation stays attached.
bool is_unicode_space(char32_t cp);

// Views into `text`; valid only while `text` is alive.
std::vector<std::string_view> split_words(std::string_view text);

std::size_t word_count(std::string_view text);

std::string_view trim(std::string_view text);

// Consecutive non-overlapping windows of `size` words; the final remainder
// window (1..size-1 words) is kept as-is. Words are re-joined with single
// spaces, so the concatenated word sequence equals the original.
// Throws DataError on a zero-word text or size < 1.
std::vector<std::string> chunk_words(std::string_view text, std::size_t size = 100);

}  // namespace e11
