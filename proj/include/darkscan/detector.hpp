#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "darkscan/ingest.hpp"
#include "darkscan/model.hpp"

namespace darkscan {

using IpSet = std::set<Ipv4>;

/// Sorted sample of per-event (or per-profile) statistics.
class EcdfSummary {
public:
  explicit EcdfSummary(std::vector<uint64_t> values);

  size_t n() const { return sorted_.size(); }
  const std::vector<uint64_t>& sorted_values() const { return sorted_; }
  /// Fraction of the sample <= x.
  double cdf(uint64_t x) const;
  /// Value at 1-based rank ceil((1 - alpha) * n).
  uint64_t upper_percentile(double alpha) const;

private:
  std::vector<uint64_t> sorted_;
};

/// 1-based rank ceil((1 - alpha) * n), clamped to [1, n].
size_t percentile_rank(size_t n, double alpha);

/// The (1 - alpha) order statistic of `values`. Throws EmptyInput.
uint64_t ecdf_threshold(std::vector<uint64_t> values, double alpha);

bool classify_dispersion(const DarknetEvent& ev, const DarknetConfig& cfg);
bool classify_volume(const DarknetEvent& ev, const Thresholds& th);

struct DailyPortProfile {
  Ipv4 src_ip;
  Day day = 0;
  uint64_t distinct_ports = 0;

  friend bool operator==(const DailyPortProfile&, const DailyPortProfile&) = default;
};

bool classify_ports(const DailyPortProfile& profile, const Thresholds& th);

/// Distinct (port, protocol) pairs per (source, UTC day of event start) over
/// TCP-SYN and UDP events. Sorted by (src_ip, day).
std::vector<DailyPortProfile> build_daily_port_profiles(std::span<const DarknetEvent> events);

/// |a ∩ b| / |a ∪ b|. Throws BothEmpty.
double jaccard(const IpSet& a, const IpSet& b);

/// An event together with the definitions it satisfies.
struct TaggedEvent {
  DarknetEvent event;
  DefinitionSet defs;
};

struct DayActivity {
  IpSet daily;
  IpSet active;
};

/// active: sources with an aggressive event overlapping `day`. daily: sources
/// whose earliest aggressive event starts on `day`.
DayActivity daily_active_sets(std::span<const TaggedEvent> events, Day day);

struct IntersectionRow {
  std::string label; // "D1", "D1&D2", ...
  uint64_t ips = 0;
  uint64_t asns = 0;
  uint64_t orgs = 0;
  uint64_t countries = 0;

  friend bool operator==(const IntersectionRow&, const IntersectionRow&) = default;
};

/// Seven rows: D1, D2, D3, D1&D2, D2&D3, D1&D3, D1&D2&D3. ASN, org and
/// country counts include only IPs covered by `asn_map`.
std::vector<IntersectionRow> definition_intersections(const IpSet& d1, const IpSet& d2,
                                                      const IpSet& d3, const AsnMap& asn_map);

struct ZipfPoint {
  double rank_fraction = 0.0;
  double cumulative_pkt_fraction = 0.0;
};

/// Sources ordered by packets descending (ties by address); point i is the
/// share of all packets sent by the top i+1 sources. Throws EmptyInput.
std::vector<ZipfPoint> zipf_curve(const std::map<Ipv4, uint64_t>& pkts_by_ip);

/// Cumulative packet share of the top `rank_fraction` of sources.
double top_share(std::span<const ZipfPoint> curve, double rank_fraction);

enum class ThresholdMode { TwoPass, Fixed };

struct DetectionResult {
  Thresholds thresholds;
  ThresholdMode mode = ThresholdMode::TwoPass;
  std::vector<TaggedEvent> events;
  std::vector<DailyPortProfile> profiles;
  IpSet d1, d2, d3;
  IpSet all;
  /// One per (source, active day), sorted by (day, src_ip).
  std::vector<AhVerdict> verdicts;
};

/// Thresholds from the empirical distributions: the (1 - alpha) percentile of
/// per-event packet counts and of daily distinct-port counts. A statistic with
/// no samples gets an unreachable threshold.
Thresholds compute_thresholds(std::span<const DarknetEvent> events,
                              std::span<const DailyPortProfile> profiles, double alpha,
                              std::string label = "two-pass");

/// Classifies every event and source. In Fixed mode `fixed` supplies the
/// thresholds; in TwoPass mode they are computed from `events`.
DetectionResult detect(std::span<const DarknetEvent> events, const DarknetConfig& cfg,
                       ThresholdMode mode, const std::optional<Thresholds>& fixed = std::nullopt);

} // namespace darkscan
