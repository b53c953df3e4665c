#pragma once

// Shared builders and brute-force oracles for the test suites. Oracles here
// are written independently of the library code they check.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "darkscan/model.hpp"

namespace darkscan::testing {

inline TimestampUs sec(double s) { return static_cast<TimestampUs>(s * 1e6); }

inline PacketMeta tcp_packet(TimestampUs ts, Ipv4 src, Ipv4 dst, uint16_t dport,
                             uint8_t flags = TcpFlags::SYN, uint16_t ip_id = 1, uint32_t seq = 0) {
  PacketMeta p;
  p.ts = ts;
  p.src_ip = src;
  p.dst_ip = dst;
  p.protocol = Protocol::Tcp;
  p.src_port = 40000;
  p.dst_port = dport;
  p.tcp_flags = TcpFlags(flags);
  p.tcp_seq = seq;
  p.ip_id = ip_id;
  p.pkt_len = 40;
  return p;
}

inline PacketMeta udp_packet(TimestampUs ts, Ipv4 src, Ipv4 dst, uint16_t dport, uint16_t ip_id = 1) {
  PacketMeta p;
  p.ts = ts;
  p.src_ip = src;
  p.dst_ip = dst;
  p.protocol = Protocol::Udp;
  p.src_port = 40000;
  p.dst_port = dport;
  p.ip_id = ip_id;
  p.pkt_len = 28;
  return p;
}

inline PacketMeta icmp_packet(TimestampUs ts, Ipv4 src, Ipv4 dst, uint8_t type = 8) {
  PacketMeta p;
  p.ts = ts;
  p.src_ip = src;
  p.dst_ip = dst;
  p.protocol = Protocol::Icmp;
  p.icmp_type = type;
  p.ip_id = 1;
  p.pkt_len = 28;
  return p;
}

inline DarknetConfig config_for(std::vector<std::string> prefixes, double timeout_s = 600.0) {
  DarknetConfig cfg;
  for (const auto& p : prefixes)
    cfg.darknet_prefixes.push_back(*Cidr::parse(p));
  cfg.event_timeout_s = timeout_s;
  return validate_config(cfg);
}

inline DarknetEvent make_event(Ipv4 src, uint16_t port, TrafficType type, TimestampUs start,
                               TimestampUs end, uint64_t pkts, uint64_t dsts) {
  DarknetEvent ev;
  ev.key = {src, type == TrafficType::IcmpEchoRequest ? uint16_t{0} : port, type};
  ev.start_ts = start;
  ev.end_ts = end;
  ev.pkt_count = pkts;
  ev.unique_dst_count = dsts;
  ev.other_pkts = pkts;
  return ev;
}

/// Offline event splitting: cut a sorted timestamp list wherever the gap to
/// the next timestamp exceeds `timeout`. Returns [start, end] pairs.
inline std::vector<std::pair<TimestampUs, TimestampUs>> split_by_gaps(std::vector<TimestampUs> ts,
                                                                     TimestampUs timeout) {
  std::sort(ts.begin(), ts.end());
  std::vector<std::pair<TimestampUs, TimestampUs>> out;
  for (size_t i = 0; i < ts.size(); ++i) {
    if (i == 0 || ts[i] - ts[i - 1] > timeout)
      out.emplace_back(ts[i], ts[i]);
    else
      out.back().second = ts[i];
  }
  return out;
}

/// The (1 - 1/denominator) order statistic by full sort and integer rank.
inline uint64_t order_statistic_oracle(std::vector<uint64_t> values, uint64_t numerator,
                                       uint64_t denominator) {
  // rank = ceil(n * (denominator - numerator) / denominator), 1-based.
  std::sort(values.begin(), values.end());
  uint64_t n = values.size();
  uint64_t num = n * (denominator - numerator);
  uint64_t rank = (num + denominator - 1) / denominator;
  rank = std::clamp<uint64_t>(rank, 1, n);
  return values[rank - 1];
}

/// Masscan probe signature evaluated bit by bit, without the library helper.
inline bool masscan_oracle(uint32_t dst, uint16_t port, uint32_t seq, uint16_t ip_id) {
  for (int bit = 0; bit < 16; ++bit) {
    unsigned a = (dst >> bit) & 1u, b = (port >> bit) & 1u, c = (seq >> bit) & 1u;
    unsigned expect = a ^ b ^ c;
    if (((ip_id >> bit) & 1u) != expect)
      return false;
  }
  return true;
}

class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    path_ = base / ("darkscan-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

  std::string write(const std::string& name, const std::string& content) const {
    auto p = file(name);
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace darkscan::testing
