#include "darkscan/report.hpp"

#include <charconv>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "darkscan/error.hpp"

namespace darkscan {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot create " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out)
    throw Error(ErrorCode::IoError, "failed writing " + path);
}

} // namespace

std::string format_ratio(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc{} ? std::string(buf, p) : std::to_string(v);
}

void write_blocklist(const std::string& path, const IpSet& ips) {
  auto out = open_out(path);
  for (Ipv4 ip : ips)
    out << ip.str() << '\n';
  finish(out, path);
}

IpSet read_blocklist(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  IpSet out;
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line.front() == '#')
      continue;
    auto ip = Ipv4::parse(line);
    if (!ip)
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(n) + ": not an IPv4 address");
    out.insert(*ip);
  }
  return out;
}

void write_verdicts(const std::string& path, std::span<const AhVerdict> verdicts) {
  auto out = open_out(path);
  for (const auto& v : verdicts)
    out << encode_verdict(v) << '\n';
  finish(out, path);
}

std::vector<AhVerdict> read_verdicts(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<AhVerdict> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty())
      out.push_back(decode_verdict(line));
  return out;
}

std::vector<SidecarEntry> build_sidecar(const DetectionResult& result, uint64_t darknet_size) {
  std::map<Ipv4, SidecarEntry> by_ip;
  for (const auto& te : result.events) {
    if (te.defs.empty())
      continue;
    const auto& ev = te.event;
    auto [it, inserted] = by_ip.try_emplace(ev.key.src_ip);
    auto& e = it->second;
    if (inserted) {
      e.src_ip = ev.key.src_ip;
      e.first_seen = ev.start_ts;
      e.last_seen = ev.end_ts;
    }
    e.matched_defs = e.matched_defs | te.defs;
    e.max_dispersion = std::max(e.max_dispersion, static_cast<double>(ev.unique_dst_count) /
                                                      static_cast<double>(darknet_size));
    e.max_event_pkts = std::max(e.max_event_pkts, ev.pkt_count);
    e.first_seen = std::min(e.first_seen, ev.start_ts);
    e.last_seen = std::max(e.last_seen, ev.end_ts);
    ++e.events;
  }
  for (const auto& prof : result.profiles)
    if (auto it = by_ip.find(prof.src_ip); it != by_ip.end())
      it->second.max_distinct_ports = std::max(it->second.max_distinct_ports, prof.distinct_ports);
  std::unordered_map<Ipv4, const AhVerdict*> acked;
  for (const auto& v : result.verdicts)
    if (v.acked)
      acked.emplace(v.src_ip, &v);
  std::vector<SidecarEntry> out;
  out.reserve(by_ip.size());
  for (auto& [ip, e] : by_ip) {
    if (auto it = acked.find(ip); it != acked.end()) {
      e.acked = true;
      e.acked_org = it->second->acked_org;
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_sidecar(const std::string& path, std::span<const SidecarEntry> entries) {
  auto out = open_out(path);
  for (const auto& e : entries) {
    json j = {
        {"src_ip", e.src_ip.str()},
        {"matched_defs", e.matched_defs.names()},
        {"max_dispersion", e.max_dispersion},
        {"max_event_pkts", e.max_event_pkts},
        {"max_distinct_ports", e.max_distinct_ports},
        {"events", e.events},
        {"first_seen_us", e.first_seen},
        {"last_seen_us", e.last_seen},
        {"acked", e.acked},
        {"acked_org", e.acked_org ? json(*e.acked_org) : json(nullptr)},
    };
    out << j.dump() << '\n';
  }
  finish(out, path);
}

void write_fingerprint_csv(const std::string& path, std::span<const PortFingerprintRow> rows) {
  auto out = open_out(path);
  out << "port,protocol,zmap_pkts,masscan_pkts,other_pkts,total_pkts\n";
  for (const auto& r : rows)
    out << r.port << ',' << to_string(r.protocol) << ',' << r.zmap_pkts << ',' << r.masscan_pkts
        << ',' << r.other_pkts << ',' << r.total_pkts() << '\n';
  finish(out, path);
}

void write_impact_csv(const std::string& path, std::span<const RouterImpact> rows, Day day) {
  auto out = open_out(path);
  out << "vantage_id,date,ah_pkts_est,total_pkts_est,fraction\n";
  for (const auto& r : rows)
    out << r.router_id << ',' << format_day(day) << ',' << r.ah_pkts_est << ',' << r.total_pkts_est
        << ',' << format_ratio(r.fraction) << '\n';
  finish(out, path);
}

void write_series_csv(const std::string& path, std::span<const ImpactPoint> points,
                      std::span<const double> per_slash24) {
  auto out = open_out(path);
  out << "bin_start_ts,ah_pkts,total_pkts,inst_fraction,cum_fraction,per_slash24_rate\n";
  for (size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    out << p.bin_start_ts << ',' << p.ah_pkts << ',' << p.total_pkts << ','
        << format_ratio(p.inst_fraction) << ',' << format_ratio(p.cum_fraction) << ','
        << format_ratio(i < per_slash24.size() ? per_slash24[i] : 0.0) << '\n';
  }
  finish(out, path);
}

void write_origin_csv(const std::string& path, std::span<const OriginRow> rows) {
  auto out = open_out(path);
  out << "asn,org,country,unique_32s,unique_24s,pkts,acked_32s,acked_24s\n";
  for (const auto& r : rows)
    out << r.asn << ',' << r.org << ',' << r.country << ',' << r.unique_32s << ',' << r.unique_24s
        << ',' << r.pkts << ',' << r.acked_32s << ',' << r.acked_24s << '\n';
  finish(out, path);
}

void write_intersections_csv(const std::string& path, std::span<const IntersectionRow> rows) {
  auto out = open_out(path);
  out << "combination,ips,asns,orgs,countries\n";
  for (const auto& r : rows)
    out << r.label << ',' << r.ips << ',' << r.asns << ',' << r.orgs << ',' << r.countries << '\n';
  finish(out, path);
}

void write_zipf_csv(const std::string& path, std::span<const ZipfPoint> curve) {
  auto out = open_out(path);
  out << "rank_fraction,cumulative_pkt_fraction\n";
  for (const auto& p : curve)
    out << format_ratio(p.rank_fraction) << ',' << format_ratio(p.cumulative_pkt_fraction) << '\n';
  finish(out, path);
}

void write_tag_csvs(const std::string& histogram_path, const std::string& top_path,
                    const TagJoinResult& tags) {
  auto hist = open_out(histogram_path);
  hist << "classification,ips\n";
  for (const auto& [bucket, count] : tags.histogram)
    hist << to_string(bucket) << ',' << count << '\n';
  finish(hist, histogram_path);
  auto top = open_out(top_path);
  top << "tag,ips\n";
  for (const auto& [tag, count] : tags.top_tags)
    top << tag << ',' << count << '\n';
  finish(top, top_path);
}

void write_protocol_csv(const std::string& path,
                        const std::vector<std::pair<std::string, ProtocolBreakdown>>& columns) {
  auto out = open_out(path);
  out << "source,tcp_syn_pct,udp_pct,icmp_echo_pct,unclassifiable_pkts,other_pkts\n";
  for (const auto& [name, b] : columns)
    out << name << ',' << format_ratio(b.tcp_syn_pct()) << ',' << format_ratio(b.udp_pct()) << ','
        << format_ratio(b.icmp_pct()) << ',' << b.unclassifiable_pkts << ',' << b.other_pkts << '\n';
  finish(out, path);
}

void write_presence_csv(const std::string& path, const std::map<std::string, double>& presence) {
  auto out = open_out(path);
  out << "router_id,ah_fraction_seen\n";
  for (const auto& [router, fraction] : presence)
    out << router << ',' << format_ratio(fraction) << '\n';
  finish(out, path);
}

} // namespace darkscan
