#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace sarnarrator {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Collapses runs of whitespace to single spaces and trims the ends.
std::string normalize_spaces(std::string_view s);

std::vector<std::string> split_ws(std::string_view s);

// "a" / "a and b" / "a, b, and c"
std::string join_with_and(const std::vector<std::string>& items);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
std::vector<std::string> read_lines(const std::string& path);

std::string sha256_hex(std::string_view data);

uint64_t fnv1a64(std::string_view s);

// Bounded draw and shuffle with pinned output sequences. The standard
// distributions are implementation-defined, so seeded runs would not be
// portable across standard libraries.
uint64_t bounded_rand(std::mt19937_64& rng, uint64_t bound);

template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(bounded_rand(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace sarnarrator
