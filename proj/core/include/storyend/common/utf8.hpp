#pragma once

#include <string>
#include <string_view>

namespace storyend::utf8 {

// Invalid bytes decode to U+DC80..U+DCFF and encode back to the raw byte, so
// decode/encode is lossless for arbitrary input.
std::u32string decode(std::string_view bytes);
std::string encode(std::u32string_view code_points);
void append(std::string& out, char32_t cp);

}  // namespace storyend::utf8
