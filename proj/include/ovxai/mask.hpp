#ifndef OVXAI_MASK_HPP_
#define OVXAI_MASK_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ovxai/common.hpp"

namespace ovxai {

// Fixed-length feature-selection bitset (a GA chromosome).
struct FeatureMask {
  std::vector<std::uint8_t> bits;

  FeatureMask() = default;
  explicit FeatureMask(std::size_t n, bool value = false) : bits(n, value ? 1 : 0) {}

  static FeatureMask all(std::size_t n) { return FeatureMask(n, true); }

  static FeatureMask from_string(const std::string& s) {
    FeatureMask m(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '0' && s[i] != '1') throw InputError("mask string must be 0/1");
      m.bits[i] = s[i] == '1';
    }
    return m;
  }

  std::size_t size() const { return bits.size(); }
  bool test(std::size_t i) const { return bits[i] != 0; }
  void set(std::size_t i, bool v = true) { bits[i] = v ? 1 : 0; }
  void flip(std::size_t i) { bits[i] ^= 1; }

  std::size_t popcount() const {
    std::size_t c = 0;
    for (auto b : bits) c += b;
    return c;
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) out.push_back(i);
    return out;
  }

  std::string to_string() const {
    std::string s(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) s[i] = '1';
    return s;
  }

  friend bool operator==(const FeatureMask&, const FeatureMask&) = default;
};

}  // namespace ovxai

#endif  // OVXAI_MASK_HPP_
