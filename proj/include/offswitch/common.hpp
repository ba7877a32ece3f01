#pragma once

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace offswitch {

/// Bad input: violated precondition, malformed file, invalid config.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: factorization, non-convergence, infeasible sampler start.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// A point of the act space. Coordinates are compared exactly.
struct Act {
  std::vector<double> coords;

  Act() = default;
  Act(std::initializer_list<double> c) : coords(c) {}
  explicit Act(std::vector<double> c) : coords(std::move(c)) {}

  [[nodiscard]] std::size_t dim() const { return coords.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return coords[i]; }

  friend bool operator==(const Act&, const Act&) = default;
  friend auto operator<=>(const Act& a, const Act& b) { return a.coords <=> b.coords; }
};

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw InvalidArgument("cannot format number");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s) {
  // from_chars rejects a leading '+', accept it for hand-written files
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw InvalidArgument("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::string format_act(const Act& a) {
  std::string out;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    if (i) out += ',';
    out += format_double(a[i]);
  }
  return out;
}

/// SplitMix64 step; derives independent stream seeds from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return out;
}

/// Evenly spaced one-dimensional acts on [lo, hi].
inline std::vector<Act> linear_grid(double lo, double hi, std::size_t points) {
  if (points == 0) throw InvalidArgument("grid needs at least one point");
  if (!(lo <= hi)) throw InvalidArgument("grid bounds out of order");
  std::vector<Act> grid;
  grid.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    grid.push_back(Act{lo + t * (hi - lo)});
  }
  return grid;
}

}  // namespace offswitch
