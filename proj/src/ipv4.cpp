#include "darkscan/ipv4.hpp"

#include <charconv>
#include <cstdio>

namespace darkscan {

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
  uint32_t bits = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (p == end || *p != '.')
        return std::nullopt;
      ++p;
    }
    if (p == end || *p < '0' || *p > '9')
      return std::nullopt;
    unsigned value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc{} || value > 255 || next - p > 3)
      return std::nullopt;
    bits = (bits << 8) | value;
    p = next;
  }
  if (p != end)
    return std::nullopt;
  return Ipv4(bits);
}

std::string Ipv4::str() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (bits_ >> 24) & 0xFF, (bits_ >> 16) & 0xFF,
                (bits_ >> 8) & 0xFF, bits_ & 0xFF);
  return buf;
}

Cidr::Cidr(Ipv4 network, uint8_t length)
    : network_(Ipv4(network.bits() & (length == 0 ? 0u : ~uint32_t{0} << (32 - length)))),
      length_(length) {}

uint32_t Cidr::mask() const {
  return length_ == 0 ? 0u : ~uint32_t{0} << (32 - length_);
}

std::optional<Cidr> Cidr::parse(std::string_view text) {
  auto slash = text.find('/');
  auto addr = Ipv4::parse(text.substr(0, slash));
  if (!addr)
    return std::nullopt;
  if (slash == std::string_view::npos)
    return Cidr(*addr, 32);
  auto len_text = text.substr(slash + 1);
  unsigned len = 0;
  auto [next, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), len);
  if (ec != std::errc{} || next != len_text.data() + len_text.size() || len > 32 ||
      len_text.empty())
    return std::nullopt;
  return Cidr(*addr, static_cast<uint8_t>(len));
}

bool Cidr::overlaps(const Cidr& other) const {
  return contains(other.network_) || other.contains(network_);
}

std::string Cidr::str() const {
  return network_.str() + "/" + std::to_string(length_);
}

} // namespace darkscan
