#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "darkscan/ipv4.hpp"

namespace darkscan {

/// Microseconds since the Unix epoch.
using TimestampUs = int64_t;
/// Days since the Unix epoch (UTC).
using Day = int64_t;

inline constexpr TimestampUs kMicrosPerSecond = 1'000'000;
inline constexpr TimestampUs kMicrosPerDay = 86'400 * kMicrosPerSecond;

constexpr Day utc_day(TimestampUs ts) {
  return ts >= 0 ? ts / kMicrosPerDay : -((-ts + kMicrosPerDay - 1) / kMicrosPerDay);
}
constexpr TimestampUs day_start(Day day) { return day * kMicrosPerDay; }
constexpr TimestampUs seconds_to_us(double s) {
  return static_cast<TimestampUs>(s * static_cast<double>(kMicrosPerSecond) + (s >= 0 ? 0.5 : -0.5));
}

/// "YYYY-MM-DD".
std::string format_day(Day day);
std::optional<Day> parse_day(std::string_view text);

enum class Protocol : uint8_t { Tcp, Udp, Icmp };

std::string_view to_string(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view text);
/// IANA protocol number.
std::optional<Protocol> protocol_from_ip_proto(uint8_t proto);

/// The three classes of packets considered scanning traffic.
enum class TrafficType : uint8_t { TcpSyn, Udp, IcmpEchoRequest };

std::string_view to_string(TrafficType t);
std::optional<TrafficType> parse_traffic_type(std::string_view text);

/// TCP control bits as they appear in the header's flag octet.
class TcpFlags {
public:
  static constexpr uint8_t FIN = 0x01;
  static constexpr uint8_t SYN = 0x02;
  static constexpr uint8_t RST = 0x04;
  static constexpr uint8_t PSH = 0x08;
  static constexpr uint8_t ACK = 0x10;
  static constexpr uint8_t URG = 0x20;

  constexpr TcpFlags() = default;
  constexpr explicit TcpFlags(uint8_t bits) : bits_(bits & 0x3F) {}

  constexpr uint8_t bits() const { return bits_; }
  constexpr bool has(uint8_t flag) const { return (bits_ & flag) != 0; }
  constexpr bool syn_only_handshake() const { return has(SYN) && !has(ACK); }

  /// Concatenated letters from {S,A,F,R,P,U}, in that order.
  std::string letters() const;
  static std::optional<TcpFlags> parse_letters(std::string_view text);

  friend constexpr bool operator==(TcpFlags, TcpFlags) = default;

private:
  uint8_t bits_ = 0;
};

/// Header summary of one captured IPv4 packet.
struct PacketMeta {
  TimestampUs ts = 0;
  Ipv4 src_ip;
  Ipv4 dst_ip;
  Protocol protocol = Protocol::Tcp;
  std::optional<uint16_t> src_port;
  std::optional<uint16_t> dst_port;
  std::optional<TcpFlags> tcp_flags;
  uint16_t ip_id = 0;
  std::optional<uint32_t> tcp_seq;
  std::optional<uint8_t> icmp_type;
  uint32_t pkt_len = 0;

  /// Checks the presence rules for optional fields and ts >= 0.
  bool well_formed() const;

  friend bool operator==(const PacketMeta&, const PacketMeta&) = default;
};

/// Header signatures of common Internet-wide scanning tools.
struct FingerprintRules {
  /// Constant IP ID written by ZMap probes.
  uint16_t zmap_ip_id = 54321;
  /// Masscan: ip_id == low 16 bits of (dst_ip ^ dst_port ^ tcp_seq).
  bool masscan_xor = true;

  friend bool operator==(const FingerprintRules&, const FingerprintRules&) = default;
};

struct DarknetConfig {
  std::vector<Cidr> darknet_prefixes;
  uint64_t darknet_size = 0;
  double event_timeout_s = 600.0;
  double assumed_scan_rate_pps = 100.0;
  double dispersion_fraction = 0.10;
  double alpha = 0.0001;
  double reorder_slack_s = 0.0;
  /// Exact distinct-destination sets are kept up to this darknet size.
  uint64_t exact_threshold = uint64_t{1} << 20;
  FingerprintRules fingerprints;

  bool in_darknet(Ipv4 ip) const;
  TimestampUs timeout_us() const { return seconds_to_us(event_timeout_s); }
  TimestampUs reorder_slack_us() const { return seconds_to_us(reorder_slack_s); }
};

/// Returns cfg with darknet_size recomputed; throws on invalid settings.
DarknetConfig validate_config(DarknetConfig cfg);

/// Parses a flat `key = value` document. Unknown keys are rejected.
DarknetConfig parse_config(std::string_view text);
DarknetConfig load_config(const std::string& path);

/// Quiet period equal to `safety_factor` expected inter-arrival gaps at the
/// darknet for a uniform Internet-wide scan at `rate_pps`.
double compute_timeout(double darknet_size, double total_ipv4, double rate_pps,
                       double safety_factor);

struct EventKey {
  Ipv4 src_ip;
  uint16_t dst_port = 0; // 0 for ICMP
  TrafficType traffic_type = TrafficType::TcpSyn;

  friend auto operator<=>(const EventKey&, const EventKey&) = default;
};

/// One logical scan.
struct DarknetEvent {
  EventKey key;
  TimestampUs start_ts = 0;
  TimestampUs end_ts = 0;
  uint64_t pkt_count = 0;
  uint64_t unique_dst_count = 0;
  uint64_t zmap_pkts = 0;
  uint64_t masscan_pkts = 0;
  uint64_t other_pkts = 0;

  bool satisfies_invariants(uint64_t darknet_size) const;

  friend bool operator==(const DarknetEvent&, const DarknetEvent&) = default;
};

/// One JSON object per line, no trailing newline.
std::string encode_event(const DarknetEvent& ev);
DarknetEvent decode_event(std::string_view line);

enum class Definition : uint8_t { Dispersion = 1, Volume = 2, Ports = 4 };

/// Subset of {D1, D2, D3}.
class DefinitionSet {
public:
  constexpr DefinitionSet() = default;
  constexpr explicit DefinitionSet(uint8_t bits) : bits_(bits & 0x7) {}

  constexpr bool has(Definition d) const { return (bits_ & static_cast<uint8_t>(d)) != 0; }
  constexpr void add(Definition d) { bits_ |= static_cast<uint8_t>(d); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr uint8_t bits() const { return bits_; }
  constexpr DefinitionSet operator|(DefinitionSet o) const { return DefinitionSet(bits_ | o.bits_); }

  /// e.g. ["D1","D3"]
  std::vector<std::string> names() const;

  friend constexpr bool operator==(DefinitionSet, DefinitionSet) = default;

private:
  uint8_t bits_ = 0;
};

struct AhVerdict {
  Ipv4 src_ip;
  Day day = 0;
  DefinitionSet matched_defs;
  double max_dispersion = 0.0;
  uint64_t max_event_pkts = 0;
  uint64_t distinct_ports = 0;
  bool is_daily = false;
  bool is_active = false;
  bool acked = false;
  std::optional<std::string> acked_org;

  friend bool operator==(const AhVerdict&, const AhVerdict&) = default;
};

std::string encode_verdict(const AhVerdict& v);
AhVerdict decode_verdict(std::string_view line);

enum class Direction : uint8_t { Ingress, Egress };

struct FlowRecord {
  std::string router_id;
  TimestampUs ts = 0;
  Direction direction = Direction::Ingress;
  Ipv4 src_ip;
  Ipv4 dst_ip;
  Protocol protocol = Protocol::Tcp;
  std::optional<uint16_t> src_port;
  std::optional<uint16_t> dst_port;
  uint64_t sampled_pkts = 1;
  uint32_t sampling_denominator = 1;
  std::optional<TcpFlags> tcp_flags;

  uint64_t estimated_pkts() const { return sampled_pkts * sampling_denominator; }

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

struct Thresholds {
  uint64_t volume_threshold_pkts = 1;
  uint64_t ports_threshold = 1;
  std::string dataset_label;

  void validate() const;
};

/// Published per-dataset thresholds (2021 darknet and 2022 darknet).
Thresholds darknet1_thresholds();
Thresholds darknet2_thresholds();

} // namespace darkscan

template <>
struct std::hash<darkscan::EventKey> {
  size_t operator()(const darkscan::EventKey& k) const noexcept {
    uint64_t packed = (uint64_t{k.src_ip.bits()} << 24) | (uint64_t{k.dst_port} << 8) |
                      static_cast<uint64_t>(k.traffic_type);
    return static_cast<size_t>(darkscan::detail::mix64(packed));
  }
};
