#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace dcem {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix64(std::uint64_t x);

// Order-sensitive combination of seed components into one stream seed.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

std::uint64_t hash_double(double v);
std::uint64_t hash_string(std::string_view s);

}  // namespace dcem
