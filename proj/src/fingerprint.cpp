#include "darkscan/fingerprint.hpp"

#include <algorithm>
#include <map>

namespace darkscan {

std::string_view to_string(ScanTool t) {
  switch (t) {
  case ScanTool::ZMap: return "zmap";
  case ScanTool::Masscan: return "masscan";
  case ScanTool::Other: return "other";
  }
  return "?";
}

ScanTool fingerprint_packet(const PacketMeta& p, const FingerprintRules& rules) {
  if (p.ip_id == rules.zmap_ip_id)
    return ScanTool::ZMap;
  if (rules.masscan_xor && p.protocol == Protocol::Tcp && p.tcp_seq && p.dst_port) {
    uint32_t mixed = p.dst_ip.bits() ^ uint32_t{*p.dst_port} ^ *p.tcp_seq;
    if (p.ip_id == static_cast<uint16_t>(mixed & 0xFFFF))
      return ScanTool::Masscan;
  }
  return ScanTool::Other;
}

std::vector<PortFingerprintRow> port_fingerprint_table(std::span<const DarknetEvent> events,
                                                       size_t top_n) {
  std::map<std::pair<uint16_t, Protocol>, PortFingerprintRow> rows;
  for (const auto& ev : events) {
    Protocol proto;
    if (ev.key.traffic_type == TrafficType::TcpSyn)
      proto = Protocol::Tcp;
    else if (ev.key.traffic_type == TrafficType::Udp)
      proto = Protocol::Udp;
    else
      continue;
    auto& row = rows[{ev.key.dst_port, proto}];
    row.port = ev.key.dst_port;
    row.protocol = proto;
    row.zmap_pkts += ev.zmap_pkts;
    row.masscan_pkts += ev.masscan_pkts;
    row.other_pkts += ev.other_pkts;
  }
  std::vector<PortFingerprintRow> out;
  out.reserve(rows.size());
  for (auto& [_, row] : rows)
    out.push_back(row);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.total_pkts() != b.total_pkts())
      return a.total_pkts() > b.total_pkts();
    if (a.port != b.port)
      return a.port < b.port;
    return a.protocol < b.protocol;
  });
  if (out.size() > top_n)
    out.resize(top_n);
  return out;
}

} // namespace darkscan
