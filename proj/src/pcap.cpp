#include "darkscan/pcap.hpp"

#include <cstring>

#include "darkscan/error.hpp"

namespace darkscan {

namespace {

constexpr uint32_t kMagicMicros = 0xa1b2c3d4;
constexpr uint32_t kMagicNanos = 0xa1b23c4d;
constexpr size_t kEthHeader = 14;
constexpr uint16_t kEtherTypeIpv4 = 0x0800;
constexpr uint16_t kEtherTypeVlan = 0x8100;
constexpr uint32_t kMaxFrame = 256 * 1024;

uint16_t be16(const uint8_t* p) { return static_cast<uint16_t>((p[0] << 8) | p[1]); }
uint32_t be32(const uint8_t* p) {
  return (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) | (uint32_t{p[2]} << 8) | p[3];
}
void put16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(static_cast<uint8_t>(v >> 8));
  b.push_back(static_cast<uint8_t>(v));
}
void put32(std::vector<uint8_t>& b, uint32_t v) {
  put16(b, static_cast<uint16_t>(v >> 16));
  put16(b, static_cast<uint16_t>(v));
}
void put32le(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
               static_cast<char>(v >> 24)};
  out.write(b, 4);
}
void put16le(std::ostream& out, uint16_t v) {
  char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

uint16_t ip_checksum(const uint8_t* hdr, size_t len) {
  uint32_t sum = 0;
  for (size_t i = 0; i + 1 < len; i += 2)
    sum += be16(hdr + i);
  while (sum >> 16)
    sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<uint16_t>(~sum);
}

} // namespace

std::optional<PacketMeta> decode_frame(std::span<const uint8_t> frame, LinkType link,
                                       TimestampUs ts, uint32_t orig_len, PcapStats& stats) {
  std::span<const uint8_t> ip = frame;
  if (link == LinkType::Ethernet) {
    if (frame.size() < kEthHeader) {
      ++stats.truncated;
      return std::nullopt;
    }
    uint16_t ether_type = be16(frame.data() + 12);
    size_t offset = kEthHeader;
    if (ether_type == kEtherTypeVlan) {
      if (frame.size() < kEthHeader + 4) {
        ++stats.truncated;
        return std::nullopt;
      }
      ether_type = be16(frame.data() + 16);
      offset += 4;
    }
    if (ether_type != kEtherTypeIpv4) {
      ++stats.non_ipv4;
      return std::nullopt;
    }
    ip = frame.subspan(offset);
  }
  if (ip.empty()) {
    ++stats.truncated;
    return std::nullopt;
  }
  if ((ip[0] >> 4) != 4) {
    ++stats.non_ipv4;
    return std::nullopt;
  }
  size_t ihl = size_t{ip[0] & 0x0Fu} * 4;
  if (ihl < 20 || ip.size() < ihl) {
    ++stats.truncated;
    return std::nullopt;
  }
  auto proto = protocol_from_ip_proto(ip[9]);
  if (!proto) {
    ++stats.non_ipv4;
    return std::nullopt;
  }
  if ((be16(ip.data() + 6) & 0x1FFF) != 0) {
    ++stats.fragments;
    return std::nullopt;
  }

  PacketMeta p;
  p.ts = ts;
  p.ip_id = be16(ip.data() + 4);
  p.src_ip = Ipv4(be32(ip.data() + 12));
  p.dst_ip = Ipv4(be32(ip.data() + 16));
  p.protocol = *proto;
  p.pkt_len = orig_len;
  auto l4 = ip.subspan(ihl);
  switch (*proto) {
  case Protocol::Tcp:
    if (l4.size() < 14) {
      ++stats.truncated;
      return std::nullopt;
    }
    p.src_port = be16(l4.data());
    p.dst_port = be16(l4.data() + 2);
    p.tcp_seq = be32(l4.data() + 4);
    p.tcp_flags = TcpFlags(l4[13]);
    break;
  case Protocol::Udp:
    if (l4.size() < 4) {
      ++stats.truncated;
      return std::nullopt;
    }
    p.src_port = be16(l4.data());
    p.dst_port = be16(l4.data() + 2);
    break;
  case Protocol::Icmp:
    if (l4.empty()) {
      ++stats.truncated;
      return std::nullopt;
    }
    p.icmp_type = l4[0];
    break;
  }
  ++stats.packets;
  return p;
}

PcapReader::PcapReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  uint8_t hdr[24];
  if (!read_exact(hdr, sizeof(hdr)))
    throw Error(ErrorCode::BadMagic, path + ": file shorter than pcap header");
  uint32_t magic;
  std::memcpy(&magic, hdr, 4);
  if (magic == kMagicMicros || magic == kMagicNanos) {
    swapped_ = false;
  } else if (__builtin_bswap32(magic) == kMagicMicros || __builtin_bswap32(magic) == kMagicNanos) {
    swapped_ = true;
    magic = __builtin_bswap32(magic);
  } else {
    throw Error(ErrorCode::BadMagic, path + ": not a classic pcap file");
  }
  nanos_ = magic == kMagicNanos;
  uint32_t link;
  std::memcpy(&link, hdr + 20, 4);
  link = fix32(link) & 0x0FFFFFFF;
  switch (link) {
  case 1: link_type_ = LinkType::Ethernet; break;
  case 101: link_type_ = LinkType::Raw; break;
  case 228: link_type_ = LinkType::Ipv4; break;
  default:
    throw Error(ErrorCode::UnsupportedLinkType, path + ": link type " + std::to_string(link));
  }
}

bool PcapReader::read_exact(void* dst, size_t n) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<size_t>(in_.gcount()) == n;
}

uint32_t PcapReader::fix32(uint32_t v) const { return swapped_ ? __builtin_bswap32(v) : v; }

std::optional<PacketMeta> PcapReader::next() {
  while (true) {
    uint32_t rec[4];
    in_.read(reinterpret_cast<char*>(rec), sizeof(rec));
    auto got = static_cast<size_t>(in_.gcount());
    if (got == 0)
      return std::nullopt;
    if (got < sizeof(rec)) {
      ++stats_.frames;
      ++stats_.truncated;
      return std::nullopt;
    }
    ++stats_.frames;
    uint32_t sec = fix32(rec[0]);
    uint32_t frac = fix32(rec[1]);
    uint32_t incl = fix32(rec[2]);
    uint32_t orig = fix32(rec[3]);
    if (incl > kMaxFrame) {
      // Corrupt length field; the rest of the file cannot be framed.
      ++stats_.truncated;
      return std::nullopt;
    }
    frame_.resize(incl);
    if (!read_exact(frame_.data(), incl)) {
      ++stats_.truncated;
      return std::nullopt;
    }
    TimestampUs ts = TimestampUs{sec} * kMicrosPerSecond + (nanos_ ? frac / 1000 : frac);
    auto p = decode_frame(frame_, link_type_, ts, orig, stats_);
    if (p)
      return p;
  }
}

std::vector<uint8_t> PcapWriter::build_frame(const PacketMeta& p, LinkType link) {
  std::vector<uint8_t> b;
  b.reserve(64);
  if (link == LinkType::Ethernet) {
    const uint8_t macs[12] = {0x02, 0, 0, 0, 0, 0x01, 0x02, 0, 0, 0, 0, 0x02};
    b.insert(b.end(), std::begin(macs), std::end(macs));
    put16(b, kEtherTypeIpv4);
  }
  size_t ip_off = b.size();
  size_t l4_len = p.protocol == Protocol::Tcp ? 20 : 8;
  b.push_back(0x45);
  b.push_back(0);
  put16(b, static_cast<uint16_t>(20 + l4_len));
  put16(b, p.ip_id);
  put16(b, 0);
  b.push_back(64);
  b.push_back(p.protocol == Protocol::Tcp ? 6 : p.protocol == Protocol::Udp ? 17 : 1);
  put16(b, 0);
  put32(b, p.src_ip.bits());
  put32(b, p.dst_ip.bits());
  uint16_t csum = ip_checksum(b.data() + ip_off, 20);
  b[ip_off + 10] = static_cast<uint8_t>(csum >> 8);
  b[ip_off + 11] = static_cast<uint8_t>(csum);
  switch (p.protocol) {
  case Protocol::Tcp:
    put16(b, p.src_port.value_or(0));
    put16(b, p.dst_port.value_or(0));
    put32(b, p.tcp_seq.value_or(0));
    put32(b, 0);
    b.push_back(0x50);
    b.push_back(p.tcp_flags.value_or(TcpFlags{}).bits());
    put16(b, 65535);
    put16(b, 0);
    put16(b, 0);
    break;
  case Protocol::Udp:
    put16(b, p.src_port.value_or(0));
    put16(b, p.dst_port.value_or(0));
    put16(b, 8);
    put16(b, 0);
    break;
  case Protocol::Icmp:
    b.push_back(p.icmp_type.value_or(8));
    b.push_back(0);
    put16(b, 0);
    put32(b, 0);
    break;
  }
  return b;
}

PcapWriter::PcapWriter(const std::string& path, LinkType link)
    : out_(path, std::ios::binary | std::ios::trunc), link_(link) {
  if (!out_)
    throw Error(ErrorCode::IoError, "cannot create " + path);
  put32le(out_, kMagicMicros);
  put16le(out_, 2);
  put16le(out_, 4);
  put32le(out_, 0);
  put32le(out_, 0);
  put32le(out_, 65535);
  put32le(out_, static_cast<uint32_t>(link));
}

void PcapWriter::write(const PacketMeta& p) {
  buf_ = build_frame(p, link_);
  put32le(out_, static_cast<uint32_t>(p.ts / kMicrosPerSecond));
  put32le(out_, static_cast<uint32_t>(p.ts % kMicrosPerSecond));
  put32le(out_, static_cast<uint32_t>(buf_.size()));
  put32le(out_, static_cast<uint32_t>(buf_.size()));
  out_.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
}

void PcapWriter::close() {
  out_.close();
  if (out_.fail())
    throw Error(ErrorCode::IoError, "failed writing pcap");
}

} // namespace darkscan
