#pragma once

#include <string>
#include <string_view>

namespace storyend::metrics {

/// Porter (1980) suffix-stripping stemmer for lowercase ASCII English words.
/// Words of length <= 2 or containing anything but a-z
/// are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace storyend::metrics
