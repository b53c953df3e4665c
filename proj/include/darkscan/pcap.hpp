#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "darkscan/model.hpp"

namespace darkscan {

enum class LinkType : uint32_t { Ethernet = 1, Raw = 101, Ipv4 = 228 };

struct PcapStats {
  uint64_t frames = 0;      // records in the file
  uint64_t packets = 0;     // decoded IPv4 TCP/UDP/ICMP packets yielded
  uint64_t non_ipv4 = 0;    // skipped: not IPv4, or IPv4 carrying another protocol
  uint64_t fragments = 0;   // skipped: non-first IPv4 fragments
  uint64_t truncated = 0;   // skipped: captured bytes too short
};

/// Decodes a classic (non-ng) pcap file in either byte order, with micro- or
/// nanosecond timestamps. Throws BadMagic / UnsupportedLinkType / IoError on
/// open; per-frame problems are counted in stats().
class PcapReader {
public:
  explicit PcapReader(const std::string& path);

  /// Next decodable packet in file order, or nullopt at end of file.
  std::optional<PacketMeta> next();

  const PcapStats& stats() const { return stats_; }
  LinkType link_type() const { return link_type_; }

private:
  bool read_exact(void* dst, size_t n);
  uint32_t fix32(uint32_t v) const;

  std::string path_;
  std::ifstream in_;
  bool swapped_ = false;
  bool nanos_ = false;
  LinkType link_type_ = LinkType::Ethernet;
  std::vector<uint8_t> frame_;
  PcapStats stats_;
};

/// Decodes one link-layer frame. Returns nullopt and bumps the matching
/// counter in `stats` when the frame is skipped.
std::optional<PacketMeta> decode_frame(std::span<const uint8_t> frame, LinkType link,
                                       TimestampUs ts, uint32_t orig_len, PcapStats& stats);

/// Writes little-endian microsecond pcap with synthesized headers.
class PcapWriter {
public:
  PcapWriter(const std::string& path, LinkType link = LinkType::Ethernet);

  void write(const PacketMeta& p);
  void close();

  static std::vector<uint8_t> build_frame(const PacketMeta& p, LinkType link);

private:
  std::ofstream out_;
  LinkType link_;
  std::vector<uint8_t> buf_;
};

} // namespace darkscan
