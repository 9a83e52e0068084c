// Copyright 2026 The Agrifed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AGRIFED_RNG_HPP_
#define AGRIFED_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace agrifed::rng {

// Every random decision in the library draws from a substream derived from
// (master seed, purpose, key words). Results therefore do not depend on the
// order in which independent tasks run.

enum class Stream : std::uint64_t {
  model_init = 0x01,
  shuffle = 0x02,
  noise = 0x03,
  select = 0x04,
  gen_federation = 0x05,
  gen_silo = 0x06,
  split = 0x07,
  cell = 0x08,
};

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive(std::uint64_t seed, Stream purpose,
                               std::uint64_t a = 0, std::uint64_t b = 0,
                               std::uint64_t c = 0) {
  std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(purpose)));
  h = mix64(h ^ mix64(a));
  h = mix64(h ^ mix64(b));
  h = mix64(h ^ mix64(c));
  return h;
}

using Engine = std::mt19937_64;

inline Engine engine(std::uint64_t derived_seed) { return Engine(derived_seed); }

}  // namespace agrifed::rng

#endif  // AGRIFED_RNG_HPP_
