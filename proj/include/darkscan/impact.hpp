#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "darkscan/detector.hpp"
#include "darkscan/ingest.hpp"
#include "darkscan/model.hpp"

namespace darkscan {

struct RouterImpact {
  std::string router_id;
  uint64_t ah_pkts_est = 0;
  uint64_t total_pkts_est = 0;
  double fraction = 0.0;

  friend bool operator==(const RouterImpact&, const RouterImpact&) = default;
};

/// Streaming form of flow_impact. Records outside `day` are ignored.
/// Estimates invert sampling as sampled_pkts * sampling_denominator.
class FlowImpactAccumulator {
public:
  FlowImpactAccumulator(const IpSet& ah, Day day) : ah_(ah), day_(day) {}

  void add(const FlowRecord& f);
  uint64_t flows_in_day() const { return flows_in_day_; }
  /// Per router, ordered by router_id. Throws NoFlowsForDay.
  std::vector<RouterImpact> result() const;

private:
  const IpSet& ah_;
  Day day_;
  uint64_t flows_in_day_ = 0;
  std::map<std::string, std::pair<uint64_t, uint64_t>> per_router_;
};

/// Share of estimated packets per router sent by sources in `ah` on `day`.
std::vector<RouterImpact> flow_impact(std::span<const FlowRecord> flows, const IpSet& ah, Day day);

struct ImpactBin {
  TimestampUs bin_start_ts = 0;
  uint64_t ah_pkts = 0;
  uint64_t total_pkts = 0;
};

struct ImpactSeries {
  std::string vantage_id;
  double bin_width_s = 1.0;
  std::vector<ImpactBin> bins; // contiguous, ascending
};

struct ImpactPoint {
  TimestampUs bin_start_ts = 0;
  uint64_t ah_pkts = 0;
  uint64_t total_pkts = 0;
  double inst_fraction = 0.0;
  double cum_fraction = 0.0;
  bool empty_bin = false;
};

/// Streaming form of stream_impact over time-ordered packets.
class StreamImpactAccumulator {
public:
  StreamImpactAccumulator(const IpSet& ah, double bin_width_s, std::string vantage_id = "stream");

  void add(const PacketMeta& p);
  const ImpactSeries& series() const { return series_; }

private:
  const IpSet& ah_;
  TimestampUs width_us_;
  ImpactSeries series_;
};

ImpactSeries stream_impact(std::span<const PacketMeta> pkts, const IpSet& ah, double bin_width_s = 1.0,
                           std::string vantage_id = "stream");

/// Instantaneous and cumulative AH fractions per bin. Empty bins report 0 and
/// set empty_bin; the cumulative ratio carries over unchanged.
std::vector<ImpactPoint> derive_fractions(const ImpactSeries& series);

/// AH packets per second per /24 in each bin.
std::vector<double> normalize_per_slash24(const ImpactSeries& series, uint64_t num_slash24);

/// Indices of bins in the top decile of both total packet rate and
/// instantaneous AH fraction. Top decile: value >= the 90th-percentile order
/// statistic of that column.
std::vector<size_t> high_load_coincidence(std::span<const ImpactPoint> points);

struct ProtocolBreakdown {
  uint64_t tcp_syn_pkts = 0;
  uint64_t udp_pkts = 0;
  uint64_t icmp_pkts = 0;
  uint64_t unclassifiable_pkts = 0; // TCP flows without flag information
  uint64_t other_pkts = 0;          // TCP flows whose flags are not SYN-without-ACK

  uint64_t classified() const { return tcp_syn_pkts + udp_pkts + icmp_pkts; }
  /// Shares of the three scanning types in percent, over classified().
  double tcp_syn_pct() const;
  double udp_pct() const;
  double icmp_pct() const;
};

/// Packet-volume shares from darknet events of AH sources.
ProtocolBreakdown protocol_breakdown(std::span<const DarknetEvent> events, const IpSet& ah);
/// Estimated-packet shares from flow records of AH sources.
ProtocolBreakdown protocol_breakdown(std::span<const FlowRecord> flows, const IpSet& ah);

/// Fraction of AH sources seen as a flow source at each router. Throws EmptyAhSet.
std::map<std::string, double> ah_presence(std::span<const FlowRecord> flows, const IpSet& ah);

/// The acknowledged subset of `ah` (IP list or rDNS keyword match).
IpSet acked_subset(const IpSet& ah, const AckedList& acked, const RdnsMap& rdns);

/// flow_impact restricted to AH sources that are acknowledged scanners.
std::vector<RouterImpact> acked_impact(std::span<const FlowRecord> flows, const IpSet& ah,
                                       const AckedList& acked, const RdnsMap& rdns, Day day);

} // namespace darkscan
