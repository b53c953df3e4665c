#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace darkscan {

namespace detail {
constexpr uint64_t mix64(uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
} // namespace detail

/// An IPv4 address held in host byte order.
class Ipv4 {
public:
  constexpr Ipv4() = default;
  constexpr explicit Ipv4(uint32_t bits) : bits_(bits) {}
  constexpr Ipv4(uint8_t a, uint8_t b, uint8_t c, uint8_t d)
      : bits_((uint32_t{a} << 24) | (uint32_t{b} << 16) | (uint32_t{c} << 8) |
              uint32_t{d}) {}

  constexpr uint32_t bits() const { return bits_; }

  /// The covering /24 network address.
  constexpr Ipv4 slash24() const { return Ipv4(bits_ & 0xFFFFFF00u); }

  static std::optional<Ipv4> parse(std::string_view text);
  std::string str() const;

  friend constexpr auto operator<=>(Ipv4, Ipv4) = default;

private:
  uint32_t bits_ = 0;
};

/// An IPv4 network prefix. The network address is always masked.
class Cidr {
public:
  constexpr Cidr() = default;
  Cidr(Ipv4 network, uint8_t length);

  /// Accepts "a.b.c.d/len" or a bare address (treated as /32).
  static std::optional<Cidr> parse(std::string_view text);

  Ipv4 network() const { return network_; }
  uint8_t length() const { return length_; }
  uint32_t mask() const;
  uint64_t size() const { return uint64_t{1} << (32 - length_); }
  Ipv4 first() const { return network_; }
  Ipv4 last() const { return Ipv4(network_.bits() | ~mask()); }

  bool contains(Ipv4 addr) const { return (addr.bits() & mask()) == network_.bits(); }
  bool overlaps(const Cidr& other) const;

  std::string str() const;

  friend auto operator<=>(const Cidr&, const Cidr&) = default;

private:
  Ipv4 network_;
  uint8_t length_ = 0;
};

} // namespace darkscan

template <>
struct std::hash<darkscan::Ipv4> {
  size_t operator()(darkscan::Ipv4 ip) const noexcept {
    return static_cast<size_t>(darkscan::detail::mix64(ip.bits()));
  }
};
