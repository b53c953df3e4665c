#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "darkscan/model.hpp"

namespace darkscan {

enum class ScanTool : uint8_t { ZMap, Masscan, Other };

std::string_view to_string(ScanTool t);

/// Label a scanning packet by tool signature. The ZMap rule wins when both
/// match; the Masscan rule needs a TCP sequence number.
ScanTool fingerprint_packet(const PacketMeta& p, const FingerprintRules& rules = {});

struct PortFingerprintRow {
  uint16_t port = 0;
  Protocol protocol = Protocol::Tcp;
  uint64_t zmap_pkts = 0;
  uint64_t masscan_pkts = 0;
  uint64_t other_pkts = 0;

  uint64_t total_pkts() const { return zmap_pkts + masscan_pkts + other_pkts; }

  friend bool operator==(const PortFingerprintRow&, const PortFingerprintRow&) = default;
};

/// Per (port, protocol) fingerprint mix over TCP-SYN and UDP events, ranked
/// by total packets descending, then port ascending, then tcp before udp.
std::vector<PortFingerprintRow> port_fingerprint_table(std::span<const DarknetEvent> events,
                                                       size_t top_n);

} // namespace darkscan
