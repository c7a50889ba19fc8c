#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. Deliberately naive: exponential or quadratic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "storyend/common/rng.hpp"
#include "storyend/embeddings/embeddings.hpp"

namespace storyend::testing {

using Toks = std::vector<std::string>;

// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t brute_lcs(const Toks& a, const Toks& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    Toks sub;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) sub.push_back(a[i]);
    }
    std::size_t j = 0;
    for (const auto& tok : b) {
      if (j < sub.size() && sub[j] == tok) ++j;
    }
    if (j == sub.size()) best = std::max(best, sub.size());
  }
  return best;
}

inline Toks random_tokens(SplitMix64& rng, std::size_t max_len, std::size_t alphabet) {
  const auto len = rng.below(max_len + 1);
  Toks out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(std::string(1, static_cast<char>('a' + rng.below(alphabet))));
  return out;
}

// Deterministic pseudo-random vectors with mixed signs, one per distinct token.
class HashEmbedder final : public embeddings::EmbeddingProvider {
 public:
  embeddings::EmbeddingMatrix embed(std::span<const std::string> tokens) override {
    embeddings::EmbeddingMatrix m;
    m.dimension = 5;
    for (const auto& t : tokens) {
      m.tokens.push_back(t);
      m.vectors.push_back(vector_for(t));
    }
    return m;
  }
  std::string name() const override { return "hash"; }

  static std::vector<double> vector_for(const std::string& t) {
    std::uint64_t seed = 1469598103934665603ULL;
    for (unsigned char c : t) seed = (seed ^ c) * 1099511628211ULL;
    SplitMix64 rng(seed);
    std::vector<double> v(5);
    for (auto& x : v) x = rng.uniform01() * 2.0 - 1.0;
    return v;
  }
};

inline double plain_cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / std::sqrt(nu * nv);
}

// Mean over one side of the max cosine against every token of the other side.
inline double brute_directional(const Toks& from, const Toks& to) {
  double sum = 0;
  for (const auto& a : from) {
    double best = -2;
    for (const auto& b : to) best = std::max(best, plain_cosine(HashEmbedder::vector_for(a), HashEmbedder::vector_for(b)));
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

// Share of `from` tokens that also occur in `to`: greedy matching under
// orthogonal one-hot vectors.
inline double onehot_directional(const Toks& from, const Toks& to) {
  const auto hits = std::count_if(from.begin(), from.end(),
                                  [&](const auto& t) { return std::find(to.begin(), to.end(), t) != to.end(); });
  return static_cast<double>(hits) / static_cast<double>(from.size());
}

}  // namespace storyend::testing
