#pragma once

// Writers for the plain-file outputs consumed downstream: blocklists,
// verdict logs and the CSV tables produced by impact and characterization.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "darkscan/detector.hpp"
#include "darkscan/enrichment.hpp"
#include "darkscan/fingerprint.hpp"
#include "darkscan/impact.hpp"

namespace darkscan {

/// One dotted quad per line, ascending numeric order.
void write_blocklist(const std::string& path, const IpSet& ips);
IpSet read_blocklist(const std::string& path);

void write_verdicts(const std::string& path, std::span<const AhVerdict> verdicts);
std::vector<AhVerdict> read_verdicts(const std::string& path);

/// Per-IP JSON lines for a blocklist: matched definitions and statistics.
struct SidecarEntry {
  Ipv4 src_ip;
  DefinitionSet matched_defs;
  double max_dispersion = 0.0;
  uint64_t max_event_pkts = 0;
  uint64_t max_distinct_ports = 0;
  uint64_t events = 0;
  TimestampUs first_seen = 0;
  TimestampUs last_seen = 0;
  bool acked = false;
  std::optional<std::string> acked_org;
};

std::vector<SidecarEntry> build_sidecar(const DetectionResult& result, uint64_t darknet_size);
void write_sidecar(const std::string& path, std::span<const SidecarEntry> entries);

void write_fingerprint_csv(const std::string& path, std::span<const PortFingerprintRow> rows);
void write_impact_csv(const std::string& path, std::span<const RouterImpact> rows, Day day);
void write_series_csv(const std::string& path, std::span<const ImpactPoint> points,
                      std::span<const double> per_slash24);
void write_origin_csv(const std::string& path, std::span<const OriginRow> rows);
void write_intersections_csv(const std::string& path, std::span<const IntersectionRow> rows);
void write_zipf_csv(const std::string& path, std::span<const ZipfPoint> curve);
void write_tag_csvs(const std::string& histogram_path, const std::string& top_path,
                    const TagJoinResult& tags);
void write_protocol_csv(const std::string& path,
                        const std::vector<std::pair<std::string, ProtocolBreakdown>>& columns);
void write_presence_csv(const std::string& path, const std::map<std::string, double>& presence);

/// Shortest round-trip decimal form, as written into every CSV.
std::string format_ratio(double v);

} // namespace darkscan
