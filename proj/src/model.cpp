#include "darkscan/model.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "darkscan/error.hpp"
#include "darkscan/text.hpp"

namespace darkscan {

using nlohmann::json;

std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::EmptyPrefixList: return "EmptyPrefixList";
  case ErrorCode::OverlappingPrefixes: return "OverlappingPrefixes";
  case ErrorCode::InvalidFraction: return "InvalidFraction";
  case ErrorCode::InvalidConfig: return "InvalidConfig";
  case ErrorCode::ParseError: return "ParseError";
  case ErrorCode::BadMagic: return "BadMagic";
  case ErrorCode::UnsupportedLinkType: return "UnsupportedLinkType";
  case ErrorCode::IoError: return "IoError";
  case ErrorCode::SchemaMismatch: return "SchemaMismatch";
  case ErrorCode::EmptyInput: return "EmptyInput";
  case ErrorCode::BothEmpty: return "BothEmpty";
  case ErrorCode::NoFlowsForDay: return "NoFlowsForDay";
  case ErrorCode::EmptyAhSet: return "EmptyAhSet";
  }
  return "Unknown";
}

std::string format_day(Day day) {
  using namespace std::chrono;
  year_month_day ymd{sys_days{days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::optional<Day> parse_day(std::string_view s) {
  using namespace std::chrono;
  int y = 0;
  unsigned m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    return std::nullopt;
  auto num = [&](size_t pos, size_t len, auto& out) {
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return ec == std::errc{} && p == s.data() + pos + len;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d))
    return std::nullopt;
  year_month_day ymd{year{y}, month{m}, std::chrono::day{d}};
  if (!ymd.ok())
    return std::nullopt;
  return sys_days{ymd}.time_since_epoch().count();
}

std::string_view to_string(Protocol p) {
  switch (p) {
  case Protocol::Tcp: return "tcp";
  case Protocol::Udp: return "udp";
  case Protocol::Icmp: return "icmp";
  }
  return "?";
}

std::optional<Protocol> parse_protocol(std::string_view s) {
  if (s == "tcp") return Protocol::Tcp;
  if (s == "udp") return Protocol::Udp;
  if (s == "icmp") return Protocol::Icmp;
  return std::nullopt;
}

std::optional<Protocol> protocol_from_ip_proto(uint8_t proto) {
  switch (proto) {
  case 1: return Protocol::Icmp;
  case 6: return Protocol::Tcp;
  case 17: return Protocol::Udp;
  default: return std::nullopt;
  }
}

std::string_view to_string(TrafficType t) {
  switch (t) {
  case TrafficType::TcpSyn: return "tcp_syn";
  case TrafficType::Udp: return "udp";
  case TrafficType::IcmpEchoRequest: return "icmp_echo_request";
  }
  return "?";
}

std::optional<TrafficType> parse_traffic_type(std::string_view s) {
  if (s == "tcp_syn") return TrafficType::TcpSyn;
  if (s == "udp") return TrafficType::Udp;
  if (s == "icmp_echo_request") return TrafficType::IcmpEchoRequest;
  return std::nullopt;
}

namespace {
constexpr std::pair<char, uint8_t> kFlagLetters[] = {
    {'S', TcpFlags::SYN}, {'A', TcpFlags::ACK}, {'F', TcpFlags::FIN},
    {'R', TcpFlags::RST}, {'P', TcpFlags::PSH}, {'U', TcpFlags::URG},
};
} // namespace

std::string TcpFlags::letters() const {
  std::string out;
  for (auto [c, bit] : kFlagLetters)
    if (has(bit))
      out.push_back(c);
  return out;
}

std::optional<TcpFlags> TcpFlags::parse_letters(std::string_view s) {
  uint8_t bits = 0;
  for (char c : s) {
    auto it = std::find_if(std::begin(kFlagLetters), std::end(kFlagLetters),
                           [c](auto& e) { return e.first == c; });
    if (it == std::end(kFlagLetters))
      return std::nullopt;
    bits |= it->second;
  }
  return TcpFlags(bits);
}

bool PacketMeta::well_formed() const {
  if (ts < 0)
    return false;
  bool ported = protocol == Protocol::Tcp || protocol == Protocol::Udp;
  bool tcp = protocol == Protocol::Tcp;
  bool icmp = protocol == Protocol::Icmp;
  return src_port.has_value() == ported && dst_port.has_value() == ported &&
         tcp_flags.has_value() == tcp && tcp_seq.has_value() == tcp &&
         icmp_type.has_value() == icmp;
}

bool DarknetConfig::in_darknet(Ipv4 ip) const {
  return std::any_of(darknet_prefixes.begin(), darknet_prefixes.end(),
                     [ip](const Cidr& c) { return c.contains(ip); });
}

DarknetConfig validate_config(DarknetConfig cfg) {
  if (cfg.darknet_prefixes.empty())
    throw Error(ErrorCode::EmptyPrefixList, "darknet_prefixes is empty");
  auto& prefixes = cfg.darknet_prefixes;
  for (size_t i = 0; i < prefixes.size(); ++i)
    for (size_t j = i + 1; j < prefixes.size(); ++j)
      if (prefixes[i].overlaps(prefixes[j]))
        throw Error(ErrorCode::OverlappingPrefixes,
                    prefixes[i].str() + " overlaps " + prefixes[j].str());
  uint64_t size = 0;
  for (auto& p : prefixes)
    size += p.size();
  cfg.darknet_size = size;
  if (!(cfg.dispersion_fraction > 0.0 && cfg.dispersion_fraction <= 1.0))
    throw Error(ErrorCode::InvalidFraction,
                "dispersion_fraction must be in (0,1], got " + std::to_string(cfg.dispersion_fraction));
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw Error(ErrorCode::InvalidFraction, "alpha must be in (0,1), got " + std::to_string(cfg.alpha));
  if (!(cfg.event_timeout_s > 0.0))
    throw Error(ErrorCode::InvalidConfig, "event_timeout_s must be positive");
  if (!(cfg.assumed_scan_rate_pps > 0.0))
    throw Error(ErrorCode::InvalidConfig, "assumed_scan_rate_pps must be positive");
  if (cfg.reorder_slack_s < 0.0)
    throw Error(ErrorCode::InvalidConfig, "reorder_slack_s must be nonnegative");
  if (size < 256)
    throw Error(ErrorCode::InvalidConfig,
                "darknet must contain at least 256 addresses, got " + std::to_string(size));
  return cfg;
}

namespace {

double parse_double_value(std::string_view key, std::string_view value) {
  auto v = text::parse_double(value);
  if (!v)
    throw Error(ErrorCode::ParseError, "bad numeric value for " + std::string(key));
  return *v;
}

} // namespace

DarknetConfig parse_config(std::string_view doc) {
  DarknetConfig cfg;
  std::optional<uint64_t> declared_size;
  size_t line_no = 0;
  for (auto raw : text::split_lines(doc)) {
    ++line_no;
    auto line = text::trim(raw.substr(0, raw.find('#')));
    if (line.empty())
      continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected key = value");
    auto key = text::trim(line.substr(0, eq));
    auto value = text::trim(line.substr(eq + 1));
    if (key == "darknet_prefixes") {
      cfg.darknet_prefixes.clear();
      for (auto item : text::split(value, ',')) {
        item = text::trim(item);
        if (item.empty())
          continue;
        auto cidr = Cidr::parse(item);
        if (!cidr)
          throw Error(ErrorCode::ParseError, "bad CIDR '" + std::string(item) + "'");
        cfg.darknet_prefixes.push_back(*cidr);
      }
    } else if (key == "darknet_size") {
      auto v = text::parse_u64(value);
      if (!v)
        throw Error(ErrorCode::ParseError, "bad darknet_size");
      declared_size = *v;
    } else if (key == "event_timeout_s") {
      cfg.event_timeout_s = parse_double_value(key, value);
    } else if (key == "assumed_scan_rate_pps") {
      cfg.assumed_scan_rate_pps = parse_double_value(key, value);
    } else if (key == "dispersion_fraction") {
      cfg.dispersion_fraction = parse_double_value(key, value);
    } else if (key == "alpha") {
      cfg.alpha = parse_double_value(key, value);
    } else if (key == "reorder_slack_s") {
      cfg.reorder_slack_s = parse_double_value(key, value);
    } else if (key == "exact_threshold") {
      auto v = text::parse_u64(value);
      if (!v)
        throw Error(ErrorCode::ParseError, "bad exact_threshold");
      cfg.exact_threshold = *v;
    } else if (key == "fingerprint_zmap_ip_id") {
      auto v = text::parse_u64(value);
      if (!v || *v > 65535)
        throw Error(ErrorCode::ParseError, "bad fingerprint_zmap_ip_id");
      cfg.fingerprints.zmap_ip_id = static_cast<uint16_t>(*v);
    } else if (key == "fingerprint_masscan_xor") {
      if (value != "true" && value != "false")
        throw Error(ErrorCode::ParseError, "fingerprint_masscan_xor must be true or false");
      cfg.fingerprints.masscan_xor = value == "true";
    } else {
      throw Error(ErrorCode::ParseError, "unknown config key '" + std::string(key) + "'");
    }
  }
  cfg = validate_config(std::move(cfg));
  if (declared_size && *declared_size != cfg.darknet_size)
    throw Error(ErrorCode::InvalidConfig, "darknet_size " + std::to_string(*declared_size) +
                                              " disagrees with prefixes (" +
                                              std::to_string(cfg.darknet_size) + ")");
  return cfg;
}

DarknetConfig load_config(const std::string& path) {
  return parse_config(text::read_file(path));
}

double compute_timeout(double darknet_size, double total_ipv4, double rate_pps,
                       double safety_factor) {
  return safety_factor * (total_ipv4 / darknet_size) / rate_pps;
}

bool DarknetEvent::satisfies_invariants(uint64_t darknet_size) const {
  bool icmp = key.traffic_type == TrafficType::IcmpEchoRequest;
  if (icmp && key.dst_port != 0)
    return false;
  return start_ts <= end_ts && pkt_count >= 1 && unique_dst_count >= 1 &&
         unique_dst_count <= std::min(pkt_count, darknet_size) &&
         zmap_pkts + masscan_pkts + other_pkts == pkt_count;
}

std::string encode_event(const DarknetEvent& ev) {
  json j = {
      {"key",
       {{"src_ip", ev.key.src_ip.str()},
        {"dst_port", ev.key.dst_port},
        {"traffic_type", to_string(ev.key.traffic_type)}}},
      {"start_ts", ev.start_ts},
      {"end_ts", ev.end_ts},
      {"pkt_count", ev.pkt_count},
      {"unique_dst_count", ev.unique_dst_count},
      {"zmap_pkts", ev.zmap_pkts},
      {"masscan_pkts", ev.masscan_pkts},
      {"other_pkts", ev.other_pkts},
  };
  return j.dump();
}

namespace {

Ipv4 ip_field(const json& j, const char* name) {
  auto ip = Ipv4::parse(j.at(name).get<std::string>());
  if (!ip)
    throw Error(ErrorCode::ParseError, std::string("bad IPv4 in field ") + name);
  return *ip;
}

} // namespace

DarknetEvent decode_event(std::string_view line) {
  try {
    json j = json::parse(line);
    DarknetEvent ev;
    const auto& key = j.at("key");
    ev.key.src_ip = ip_field(key, "src_ip");
    ev.key.dst_port = key.at("dst_port").get<uint16_t>();
    auto tt = parse_traffic_type(key.at("traffic_type").get<std::string>());
    if (!tt)
      throw Error(ErrorCode::ParseError, "bad traffic_type");
    ev.key.traffic_type = *tt;
    ev.start_ts = j.at("start_ts").get<TimestampUs>();
    ev.end_ts = j.at("end_ts").get<TimestampUs>();
    ev.pkt_count = j.at("pkt_count").get<uint64_t>();
    ev.unique_dst_count = j.at("unique_dst_count").get<uint64_t>();
    ev.zmap_pkts = j.at("zmap_pkts").get<uint64_t>();
    ev.masscan_pkts = j.at("masscan_pkts").get<uint64_t>();
    ev.other_pkts = j.at("other_pkts").get<uint64_t>();
    return ev;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("event line: ") + e.what());
  }
}

std::vector<std::string> DefinitionSet::names() const {
  std::vector<std::string> out;
  if (has(Definition::Dispersion)) out.emplace_back("D1");
  if (has(Definition::Volume)) out.emplace_back("D2");
  if (has(Definition::Ports)) out.emplace_back("D3");
  return out;
}

std::string encode_verdict(const AhVerdict& v) {
  json j = {
      {"src_ip", v.src_ip.str()},
      {"day", format_day(v.day)},
      {"matched_defs", v.matched_defs.names()},
      {"max_dispersion", v.max_dispersion},
      {"max_event_pkts", v.max_event_pkts},
      {"distinct_ports", v.distinct_ports},
      {"is_daily", v.is_daily},
      {"is_active", v.is_active},
      {"acked", v.acked},
      {"acked_org", v.acked_org ? json(*v.acked_org) : json(nullptr)},
  };
  return j.dump();
}

AhVerdict decode_verdict(std::string_view line) {
  try {
    json j = json::parse(line);
    AhVerdict v;
    v.src_ip = ip_field(j, "src_ip");
    auto day = parse_day(j.at("day").get<std::string>());
    if (!day)
      throw Error(ErrorCode::ParseError, "bad day");
    v.day = *day;
    for (const auto& name : j.at("matched_defs")) {
      auto s = name.get<std::string>();
      if (s == "D1") v.matched_defs.add(Definition::Dispersion);
      else if (s == "D2") v.matched_defs.add(Definition::Volume);
      else if (s == "D3") v.matched_defs.add(Definition::Ports);
      else throw Error(ErrorCode::ParseError, "bad definition name " + s);
    }
    v.max_dispersion = j.at("max_dispersion").get<double>();
    v.max_event_pkts = j.at("max_event_pkts").get<uint64_t>();
    v.distinct_ports = j.at("distinct_ports").get<uint64_t>();
    v.is_daily = j.at("is_daily").get<bool>();
    v.is_active = j.at("is_active").get<bool>();
    v.acked = j.at("acked").get<bool>();
    if (!j.at("acked_org").is_null())
      v.acked_org = j.at("acked_org").get<std::string>();
    return v;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("verdict line: ") + e.what());
  }
}

void Thresholds::validate() const {
  if (volume_threshold_pkts < 1 || ports_threshold < 1)
    throw Error(ErrorCode::InvalidConfig, "thresholds must be >= 1");
}

Thresholds darknet1_thresholds() { return {64'810, 6'542, "darknet-1-2021"}; }
Thresholds darknet2_thresholds() { return {23'491, 57'410, "darknet-2-2022"}; }

} // namespace darkscan
