#include "darkscan/impact.hpp"

#include <algorithm>
#include <cmath>

#include "darkscan/enrichment.hpp"
#include "darkscan/error.hpp"

namespace darkscan {

void FlowImpactAccumulator::add(const FlowRecord& f) {
  if (utc_day(f.ts) != day_)
    return;
  ++flows_in_day_;
  auto& [ah, total] = per_router_[f.router_id];
  uint64_t est = f.estimated_pkts();
  total += est;
  if (ah_.count(f.src_ip))
    ah += est;
}

std::vector<RouterImpact> FlowImpactAccumulator::result() const {
  if (flows_in_day_ == 0)
    throw Error(ErrorCode::NoFlowsForDay, "no flow records on " + format_day(day_));
  std::vector<RouterImpact> out;
  out.reserve(per_router_.size());
  for (const auto& [router, counts] : per_router_) {
    RouterImpact r{router, counts.first, counts.second, 0.0};
    if (r.total_pkts_est > 0)
      r.fraction = static_cast<double>(r.ah_pkts_est) / static_cast<double>(r.total_pkts_est);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RouterImpact> flow_impact(std::span<const FlowRecord> flows, const IpSet& ah, Day day) {
  FlowImpactAccumulator acc(ah, day);
  for (const auto& f : flows)
    acc.add(f);
  return acc.result();
}

StreamImpactAccumulator::StreamImpactAccumulator(const IpSet& ah, double bin_width_s,
                                                 std::string vantage_id)
    : ah_(ah), width_us_(std::max<TimestampUs>(1, seconds_to_us(bin_width_s))) {
  series_.vantage_id = std::move(vantage_id);
  series_.bin_width_s = bin_width_s;
}

void StreamImpactAccumulator::add(const PacketMeta& p) {
  TimestampUs start = p.ts - (p.ts % width_us_);
  auto& bins = series_.bins;
  if (bins.empty())
    bins.push_back({start, 0, 0});
  if (start < bins.front().bin_start_ts) {
    std::vector<ImpactBin> front;
    for (TimestampUs t = start; t < bins.front().bin_start_ts; t += width_us_)
      front.push_back({t, 0, 0});
    bins.insert(bins.begin(), front.begin(), front.end());
  }
  while (bins.back().bin_start_ts < start)
    bins.push_back({bins.back().bin_start_ts + width_us_, 0, 0});
  auto& bin = bins[static_cast<size_t>((start - bins.front().bin_start_ts) / width_us_)];
  ++bin.total_pkts;
  if (ah_.count(p.src_ip))
    ++bin.ah_pkts;
}

ImpactSeries stream_impact(std::span<const PacketMeta> pkts, const IpSet& ah, double bin_width_s,
                           std::string vantage_id) {
  StreamImpactAccumulator acc(ah, bin_width_s, std::move(vantage_id));
  for (const auto& p : pkts)
    acc.add(p);
  return acc.series();
}

std::vector<ImpactPoint> derive_fractions(const ImpactSeries& series) {
  std::vector<ImpactPoint> out;
  out.reserve(series.bins.size());
  uint64_t cum_ah = 0;
  uint64_t cum_total = 0;
  for (const auto& b : series.bins) {
    ImpactPoint pt;
    pt.bin_start_ts = b.bin_start_ts;
    pt.ah_pkts = b.ah_pkts;
    pt.total_pkts = b.total_pkts;
    pt.empty_bin = b.total_pkts == 0;
    if (!pt.empty_bin)
      pt.inst_fraction = static_cast<double>(b.ah_pkts) / static_cast<double>(b.total_pkts);
    cum_ah += b.ah_pkts;
    cum_total += b.total_pkts;
    if (cum_total > 0)
      pt.cum_fraction = static_cast<double>(cum_ah) / static_cast<double>(cum_total);
    out.push_back(pt);
  }
  return out;
}

std::vector<double> normalize_per_slash24(const ImpactSeries& series, uint64_t num_slash24) {
  if (num_slash24 < 1)
    throw Error(ErrorCode::InvalidConfig, "num_slash24 must be >= 1");
  std::vector<double> out;
  out.reserve(series.bins.size());
  for (const auto& b : series.bins)
    out.push_back(static_cast<double>(b.ah_pkts) / series.bin_width_s / static_cast<double>(num_slash24));
  return out;
}

namespace {

double top_decile_cut(std::vector<double> values) {
  size_t rank = percentile_rank(values.size(), 0.1);
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

} // namespace

std::vector<size_t> high_load_coincidence(std::span<const ImpactPoint> points) {
  std::vector<size_t> out;
  if (points.empty())
    return out;
  std::vector<double> totals;
  std::vector<double> fractions;
  for (const auto& p : points) {
    totals.push_back(static_cast<double>(p.total_pkts));
    fractions.push_back(p.inst_fraction);
  }
  double total_cut = top_decile_cut(totals);
  double fraction_cut = top_decile_cut(fractions);
  for (size_t i = 0; i < points.size(); ++i)
    if (totals[i] >= total_cut && fractions[i] >= fraction_cut)
      out.push_back(i);
  return out;
}

namespace {

double pct(uint64_t part, uint64_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

} // namespace

double ProtocolBreakdown::tcp_syn_pct() const { return pct(tcp_syn_pkts, classified()); }
double ProtocolBreakdown::udp_pct() const { return pct(udp_pkts, classified()); }
double ProtocolBreakdown::icmp_pct() const { return pct(icmp_pkts, classified()); }

ProtocolBreakdown protocol_breakdown(std::span<const DarknetEvent> events, const IpSet& ah) {
  ProtocolBreakdown out;
  for (const auto& ev : events) {
    if (!ah.count(ev.key.src_ip))
      continue;
    switch (ev.key.traffic_type) {
    case TrafficType::TcpSyn: out.tcp_syn_pkts += ev.pkt_count; break;
    case TrafficType::Udp: out.udp_pkts += ev.pkt_count; break;
    case TrafficType::IcmpEchoRequest: out.icmp_pkts += ev.pkt_count; break;
    }
  }
  return out;
}

ProtocolBreakdown protocol_breakdown(std::span<const FlowRecord> flows, const IpSet& ah) {
  ProtocolBreakdown out;
  for (const auto& f : flows) {
    if (!ah.count(f.src_ip))
      continue;
    uint64_t est = f.estimated_pkts();
    switch (f.protocol) {
    case Protocol::Tcp:
      if (!f.tcp_flags)
        out.unclassifiable_pkts += est;
      else if (f.tcp_flags->syn_only_handshake())
        out.tcp_syn_pkts += est;
      else
        out.other_pkts += est;
      break;
    case Protocol::Udp: out.udp_pkts += est; break;
    case Protocol::Icmp: out.icmp_pkts += est; break;
    }
  }
  return out;
}

std::map<std::string, double> ah_presence(std::span<const FlowRecord> flows, const IpSet& ah) {
  if (ah.empty())
    throw Error(ErrorCode::EmptyAhSet, "ah_presence needs a nonempty AH set");
  std::map<std::string, IpSet> seen;
  for (const auto& f : flows) {
    auto& s = seen[f.router_id];
    if (ah.count(f.src_ip))
      s.insert(f.src_ip);
  }
  std::map<std::string, double> out;
  for (const auto& [router, ips] : seen)
    out[router] = static_cast<double>(ips.size()) / static_cast<double>(ah.size());
  return out;
}

IpSet acked_subset(const IpSet& ah, const AckedList& acked, const RdnsMap& rdns) {
  IpSet out;
  for (Ipv4 ip : ah)
    if (match_acked(ip, acked, rdns).acked)
      out.insert(ip);
  return out;
}

std::vector<RouterImpact> acked_impact(std::span<const FlowRecord> flows, const IpSet& ah,
                                       const AckedList& acked, const RdnsMap& rdns, Day day) {
  return flow_impact(flows, acked_subset(ah, acked, rdns), day);
}

} // namespace darkscan
