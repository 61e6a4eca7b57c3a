#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace poet {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic RNG wrapper. All draws are derived from the raw mt19937_64
// stream with explicit arithmetic so that results are identical across
// platforms and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t raw() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) { return n == 0 ? 0 : eng_() % n; }

  // standard normal via Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // in-place Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// --- UTF-8 helpers ------------------------------------------------------
// Tokens are single unicode codepoints kept in their UTF-8 encoding.

// Splits a UTF-8 string into codepoint tokens. Malformed bytes raise Error.
std::vector<std::string> utf8_split(const std::string& text);

// Numeric codepoint of a single-codepoint token (used for deterministic
// tie-breaking when ordering characters).
uint32_t utf8_codepoint(const std::string& token);

// Number of codepoints in a UTF-8 string.
size_t utf8_length(const std::string& text);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

// Reads a whole file; throws Error on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace poet
