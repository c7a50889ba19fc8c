#include <fmt/format.h>

#include "storyend/backends/backends.hpp"

namespace storyend::backends {

namespace {

std::size_t count_placeholders(std::string_view pattern) {
  std::size_t n = 0;
  for (auto pos = pattern.find(kBodyPlaceholder); pos != std::string_view::npos;
       pos = pattern.find(kBodyPlaceholder, pos + kBodyPlaceholder.size())) {
    ++n;
  }
  return n;
}

}  // namespace

void PromptTemplate::validate() const {
  const auto n = count_placeholders(pattern);
  if (n != 1) {
    throw ConfigError(fmt::format("prompt template '{}' must contain exactly one {{body}} placeholder, found {}",
                                  name, n));
  }
}

std::optional<PromptTemplate> builtin_template(std::string_view name) {
  if (name == "gpt") return PromptTemplate{"gpt", "Write a conclusion to the following story: {body}"};
  if (name == "mamba") {
    return PromptTemplate{"mamba", "{body} Complete this story by generating its last line to give it a logical ending:"};
  }
  if (name == "plain") return PromptTemplate{"plain", "{body}"};
  return std::nullopt;
}

std::string render_prompt(const PromptTemplate& tmpl, std::string_view body) {
  tmpl.validate();
  if (body.empty()) throw ConfigError("cannot render a prompt for an empty story body");
  std::string out = tmpl.pattern;
  const auto pos = out.find(kBodyPlaceholder);
  out.replace(pos, kBodyPlaceholder.size(), body);
  return out;
}

}  // namespace storyend::backends
