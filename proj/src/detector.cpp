#include "darkscan/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "darkscan/error.hpp"

namespace darkscan {

namespace {

// (1 - alpha) * n lands on integers for the usual decimal alphas, where binary
// rounding can push it a hair above; 1e-7 is far below any real fractional
// part for n <= 2^32 and alpha with <= 6 decimal digits.
constexpr double kRankSlack = 1e-7;

constexpr uint64_t kUnreachable = std::numeric_limits<uint64_t>::max();

} // namespace

size_t percentile_rank(size_t n, double alpha) {
  double x = (1.0 - alpha) * static_cast<double>(n);
  auto rank = static_cast<size_t>(std::ceil(x - kRankSlack));
  return std::clamp<size_t>(rank, 1, n);
}

EcdfSummary::EcdfSummary(std::vector<uint64_t> values) : sorted_(std::move(values)) {
  if (sorted_.empty())
    throw Error(ErrorCode::EmptyInput, "ECDF over an empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double EcdfSummary::cdf(uint64_t x) const {
  auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

uint64_t EcdfSummary::upper_percentile(double alpha) const {
  return sorted_[percentile_rank(sorted_.size(), alpha) - 1];
}

uint64_t ecdf_threshold(std::vector<uint64_t> values, double alpha) {
  if (values.empty())
    throw Error(ErrorCode::EmptyInput, "ecdf_threshold over an empty sample");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorCode::InvalidFraction, "alpha must be in (0,1)");
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(percentile_rank(values.size(), alpha) - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

bool classify_dispersion(const DarknetEvent& ev, const DarknetConfig& cfg) {
  double needed = cfg.dispersion_fraction * static_cast<double>(cfg.darknet_size);
  // Absorb the binary representation error of the fraction (0.1 etc).
  return static_cast<double>(ev.unique_dst_count) >= needed * (1.0 - 1e-12);
}

bool classify_volume(const DarknetEvent& ev, const Thresholds& th) {
  return ev.pkt_count >= th.volume_threshold_pkts;
}

bool classify_ports(const DailyPortProfile& profile, const Thresholds& th) {
  return profile.distinct_ports >= th.ports_threshold;
}

namespace {

bool has_ports(TrafficType t) { return t == TrafficType::TcpSyn || t == TrafficType::Udp; }

uint32_t port_entry(const EventKey& key) {
  return (uint32_t{key.dst_port} << 1) | (key.traffic_type == TrafficType::Udp ? 1u : 0u);
}

} // namespace

std::vector<DailyPortProfile> build_daily_port_profiles(std::span<const DarknetEvent> events) {
  std::map<std::pair<Ipv4, Day>, std::set<uint32_t>> ports;
  for (const auto& ev : events) {
    if (!has_ports(ev.key.traffic_type))
      continue;
    ports[{ev.key.src_ip, utc_day(ev.start_ts)}].insert(port_entry(ev.key));
  }
  std::vector<DailyPortProfile> out;
  out.reserve(ports.size());
  for (const auto& [k, set] : ports)
    out.push_back({k.first, k.second, set.size()});
  return out;
}

double jaccard(const IpSet& a, const IpSet& b) {
  if (a.empty() && b.empty())
    throw Error(ErrorCode::BothEmpty, "jaccard of two empty sets");
  size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

DayActivity daily_active_sets(std::span<const TaggedEvent> events, Day day) {
  DayActivity out;
  const TimestampUs lo = day_start(day);
  const TimestampUs hi = day_start(day + 1);
  std::unordered_map<Ipv4, TimestampUs> first_start;
  for (const auto& te : events) {
    if (te.defs.empty())
      continue;
    const auto& ev = te.event;
    if (ev.start_ts < hi && ev.end_ts >= lo)
      out.active.insert(ev.key.src_ip);
    auto [it, inserted] = first_start.emplace(ev.key.src_ip, ev.start_ts);
    if (!inserted)
      it->second = std::min(it->second, ev.start_ts);
  }
  for (const auto& [ip, start] : first_start)
    if (start >= lo && start < hi)
      out.daily.insert(ip);
  return out;
}

namespace {

IpSet intersect(const IpSet& a, const IpSet& b) {
  IpSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

IntersectionRow describe(std::string label, const IpSet& ips, const AsnMap& asn_map) {
  IntersectionRow row{std::move(label), ips.size(), 0, 0, 0};
  std::set<uint32_t> asns;
  std::set<std::string> orgs;
  std::set<std::string> countries;
  for (Ipv4 ip : ips) {
    if (const auto* info = asn_map.lookup(ip)) {
      asns.insert(info->asn);
      orgs.insert(info->org);
      countries.insert(info->country);
    }
  }
  row.asns = asns.size();
  row.orgs = orgs.size();
  row.countries = countries.size();
  return row;
}

} // namespace

std::vector<IntersectionRow> definition_intersections(const IpSet& d1, const IpSet& d2,
                                                      const IpSet& d3, const AsnMap& asn_map) {
  auto d12 = intersect(d1, d2);
  std::vector<IntersectionRow> rows;
  rows.push_back(describe("D1", d1, asn_map));
  rows.push_back(describe("D2", d2, asn_map));
  rows.push_back(describe("D3", d3, asn_map));
  rows.push_back(describe("D1&D2", d12, asn_map));
  rows.push_back(describe("D2&D3", intersect(d2, d3), asn_map));
  rows.push_back(describe("D1&D3", intersect(d1, d3), asn_map));
  rows.push_back(describe("D1&D2&D3", intersect(d12, d3), asn_map));
  return rows;
}

std::vector<ZipfPoint> zipf_curve(const std::map<Ipv4, uint64_t>& pkts_by_ip) {
  if (pkts_by_ip.empty())
    throw Error(ErrorCode::EmptyInput, "zipf_curve over an empty population");
  std::vector<std::pair<uint64_t, Ipv4>> ranked;
  ranked.reserve(pkts_by_ip.size());
  long double total = 0;
  for (const auto& [ip, pkts] : pkts_by_ip) {
    ranked.emplace_back(pkts, ip);
    total += static_cast<long double>(pkts);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<ZipfPoint> curve;
  curve.reserve(ranked.size());
  const auto n = static_cast<double>(ranked.size());
  long double running = 0;
  for (size_t i = 0; i < ranked.size(); ++i) {
    running += static_cast<long double>(ranked[i].first);
    double share = total > 0 ? static_cast<double>(running / total) : 0.0;
    curve.push_back({static_cast<double>(i + 1) / n, share});
  }
  return curve;
}

double top_share(std::span<const ZipfPoint> curve, double rank_fraction) {
  if (curve.empty())
    throw Error(ErrorCode::EmptyInput, "empty curve");
  auto count = static_cast<size_t>(std::ceil(rank_fraction * static_cast<double>(curve.size()) - kRankSlack));
  count = std::clamp<size_t>(count, 1, curve.size());
  return curve[count - 1].cumulative_pkt_fraction;
}

Thresholds compute_thresholds(std::span<const DarknetEvent> events,
                              std::span<const DailyPortProfile> profiles, double alpha,
                              std::string label) {
  Thresholds th;
  th.dataset_label = std::move(label);
  if (events.empty()) {
    th.volume_threshold_pkts = kUnreachable;
  } else {
    std::vector<uint64_t> pkts;
    pkts.reserve(events.size());
    for (const auto& ev : events)
      pkts.push_back(ev.pkt_count);
    th.volume_threshold_pkts = ecdf_threshold(std::move(pkts), alpha);
  }
  if (profiles.empty()) {
    th.ports_threshold = kUnreachable;
  } else {
    std::vector<uint64_t> ports;
    ports.reserve(profiles.size());
    for (const auto& p : profiles)
      ports.push_back(p.distinct_ports);
    th.ports_threshold = ecdf_threshold(std::move(ports), alpha);
  }
  return th;
}

DetectionResult detect(std::span<const DarknetEvent> events, const DarknetConfig& cfg,
                       ThresholdMode mode, const std::optional<Thresholds>& fixed) {
  DetectionResult result;
  result.mode = mode;
  result.profiles = build_daily_port_profiles(events);
  if (mode == ThresholdMode::Fixed) {
    if (!fixed)
      throw Error(ErrorCode::InvalidConfig, "fixed-threshold mode needs thresholds");
    fixed->validate();
    result.thresholds = *fixed;
  } else {
    result.thresholds = compute_thresholds(events, result.profiles, cfg.alpha);
  }
  const auto& th = result.thresholds;

  std::map<std::pair<Ipv4, Day>, uint64_t> ports_by_day;
  for (const auto& prof : result.profiles) {
    ports_by_day[{prof.src_ip, prof.day}] = prof.distinct_ports;
    if (classify_ports(prof, th))
      result.d3.insert(prof.src_ip);
  }

  result.events.reserve(events.size());
  for (const auto& ev : events) {
    TaggedEvent te{ev, {}};
    if (classify_dispersion(ev, cfg))
      te.defs.add(Definition::Dispersion);
    if (classify_volume(ev, th))
      te.defs.add(Definition::Volume);
    if (has_ports(ev.key.traffic_type)) {
      auto it = ports_by_day.find({ev.key.src_ip, utc_day(ev.start_ts)});
      if (it != ports_by_day.end() && it->second >= th.ports_threshold)
        te.defs.add(Definition::Ports);
    }
    if (te.defs.has(Definition::Dispersion))
      result.d1.insert(ev.key.src_ip);
    if (te.defs.has(Definition::Volume))
      result.d2.insert(ev.key.src_ip);
    result.events.push_back(std::move(te));
  }
  for (const auto* set : {&result.d1, &result.d2, &result.d3})
    result.all.insert(set->begin(), set->end());

  // Per (source, day) rollup over aggressive events touching that day.
  std::map<std::pair<Day, Ipv4>, AhVerdict> verdicts;
  std::unordered_map<Ipv4, Day> first_day;
  const double size = static_cast<double>(cfg.darknet_size);
  for (const auto& te : result.events) {
    if (te.defs.empty())
      continue;
    const auto& ev = te.event;
    Day start_day = utc_day(ev.start_ts);
    auto [fd, inserted] = first_day.emplace(ev.key.src_ip, start_day);
    if (!inserted)
      fd->second = std::min(fd->second, start_day);
    for (Day d = start_day; d <= utc_day(ev.end_ts); ++d) {
      auto& v = verdicts[{d, ev.key.src_ip}];
      v.src_ip = ev.key.src_ip;
      v.day = d;
      v.is_active = true;
      v.matched_defs = v.matched_defs | te.defs;
      v.max_dispersion = std::max(v.max_dispersion, static_cast<double>(ev.unique_dst_count) / size);
      v.max_event_pkts = std::max(v.max_event_pkts, ev.pkt_count);
      auto pit = ports_by_day.find({ev.key.src_ip, d});
      if (pit != ports_by_day.end())
        v.distinct_ports = pit->second;
    }
  }
  result.verdicts.reserve(verdicts.size());
  for (auto& [k, v] : verdicts) {
    v.is_daily = first_day.at(v.src_ip) == v.day;
    result.verdicts.push_back(std::move(v));
  }
  return result;
}

} // namespace darkscan
