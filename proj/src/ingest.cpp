#include "darkscan/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "darkscan/error.hpp"
#include "darkscan/text.hpp"

namespace darkscan {

using nlohmann::json;

std::optional<TrafficType> classify_traffic_type(const PacketMeta& p) {
  switch (p.protocol) {
  case Protocol::Tcp:
    if (p.tcp_flags && p.tcp_flags->syn_only_handshake())
      return TrafficType::TcpSyn;
    return std::nullopt;
  case Protocol::Udp:
    return TrafficType::Udp;
  case Protocol::Icmp:
    if (p.icmp_type && *p.icmp_type == 8)
      return TrafficType::IcmpEchoRequest;
    return std::nullopt;
  }
  return std::nullopt;
}

std::vector<PacketMeta> read_pcap(const std::string& path, PcapStats* stats) {
  PcapReader reader(path);
  std::vector<PacketMeta> out;
  while (auto p = reader.next())
    out.push_back(*p);
  if (stats)
    *stats = reader.stats();
  return out;
}

std::optional<FlowFormat> flow_format_for_path(std::string_view path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() && path.substr(path.size() - suffix.size()) == suffix;
  };
  if (ends_with(".csv"))
    return FlowFormat::CsvV1;
  if (ends_with(".jsonl") || ends_with(".json"))
    return FlowFormat::JsonLinesV1;
  return std::nullopt;
}

namespace {

std::optional<uint16_t> parse_port(std::string_view s) {
  auto v = text::parse_u64(s);
  if (!v || *v > 65535)
    return std::nullopt;
  return static_cast<uint16_t>(*v);
}

/// Shared semantic checks for both encodings.
bool flow_valid(const FlowRecord& f) {
  if (f.router_id.empty() || f.ts < 0 || f.sampled_pkts < 1 || f.sampling_denominator < 1)
    return false;
  bool ported = f.protocol != Protocol::Icmp;
  if (f.src_port.has_value() != ported || f.dst_port.has_value() != ported)
    return false;
  if (f.tcp_flags && f.protocol != Protocol::Tcp)
    return false;
  return true;
}

std::optional<FlowRecord> parse_csv_row(std::string_view line) {
  auto cols = text::split(line, ',');
  if (cols.size() != 11)
    return std::nullopt;
  FlowRecord f;
  f.router_id = std::string(cols[0]);
  auto ts = text::parse_u64(cols[1]);
  if (!ts)
    return std::nullopt;
  f.ts = static_cast<TimestampUs>(*ts);
  if (cols[2] == "I")
    f.direction = Direction::Ingress;
  else if (cols[2] == "E")
    f.direction = Direction::Egress;
  else
    return std::nullopt;
  auto src = Ipv4::parse(cols[3]);
  auto dst = Ipv4::parse(cols[4]);
  auto proto = parse_protocol(cols[5]);
  if (!src || !dst || !proto)
    return std::nullopt;
  f.src_ip = *src;
  f.dst_ip = *dst;
  f.protocol = *proto;
  if (!cols[6].empty()) {
    f.src_port = parse_port(cols[6]);
    if (!f.src_port)
      return std::nullopt;
  }
  if (!cols[7].empty()) {
    f.dst_port = parse_port(cols[7]);
    if (!f.dst_port)
      return std::nullopt;
  }
  auto sampled = text::parse_u64(cols[8]);
  auto denom = text::parse_u64(cols[9]);
  if (!sampled || !denom || *denom > UINT32_MAX)
    return std::nullopt;
  f.sampled_pkts = *sampled;
  f.sampling_denominator = static_cast<uint32_t>(*denom);
  if (!cols[10].empty()) {
    f.tcp_flags = TcpFlags::parse_letters(cols[10]);
    if (!f.tcp_flags)
      return std::nullopt;
  }
  if (!flow_valid(f))
    return std::nullopt;
  return f;
}

const std::set<std::string> kJsonRequired = {"router_id", "ts_us",        "direction",
                                             "src_ip",    "dst_ip",       "protocol",
                                             "sampled_pkts", "sampling_denominator"};
const std::set<std::string> kJsonOptional = {"src_port", "dst_port", "tcp_flags"};

void check_json_schema(const json& j) {
  if (!j.is_object())
    throw Error(ErrorCode::SchemaMismatch, "flow line is not a JSON object");
  for (auto& [key, _] : j.items())
    if (!kJsonRequired.count(key) && !kJsonOptional.count(key))
      throw Error(ErrorCode::SchemaMismatch, "unexpected flow field '" + key + "'");
  for (auto& key : kJsonRequired)
    if (!j.contains(key))
      throw Error(ErrorCode::SchemaMismatch, "missing flow field '" + key + "'");
}

std::optional<FlowRecord> parse_json_row(const json& j) {
  try {
    FlowRecord f;
    f.router_id = j.at("router_id").get<std::string>();
    f.ts = j.at("ts_us").get<TimestampUs>();
    auto dir = j.at("direction").get<std::string>();
    if (dir == "I")
      f.direction = Direction::Ingress;
    else if (dir == "E")
      f.direction = Direction::Egress;
    else
      return std::nullopt;
    auto src = Ipv4::parse(j.at("src_ip").get<std::string>());
    auto dst = Ipv4::parse(j.at("dst_ip").get<std::string>());
    auto proto = parse_protocol(j.at("protocol").get<std::string>());
    if (!src || !dst || !proto)
      return std::nullopt;
    f.src_ip = *src;
    f.dst_ip = *dst;
    f.protocol = *proto;
    auto port = [&](const char* name) -> std::optional<std::optional<uint16_t>> {
      if (!j.contains(name) || j.at(name).is_null())
        return std::optional<uint16_t>{};
      auto v = j.at(name).get<int64_t>();
      if (v < 0 || v > 65535)
        return std::nullopt;
      return std::optional<uint16_t>(static_cast<uint16_t>(v));
    };
    auto sp = port("src_port");
    auto dp = port("dst_port");
    if (!sp || !dp)
      return std::nullopt;
    f.src_port = *sp;
    f.dst_port = *dp;
    auto sampled = j.at("sampled_pkts").get<int64_t>();
    auto denom = j.at("sampling_denominator").get<int64_t>();
    if (sampled < 0 || denom < 0 || denom > UINT32_MAX)
      return std::nullopt;
    f.sampled_pkts = static_cast<uint64_t>(sampled);
    f.sampling_denominator = static_cast<uint32_t>(denom);
    if (j.contains("tcp_flags") && !j.at("tcp_flags").is_null()) {
      auto letters = j.at("tcp_flags").get<std::string>();
      if (!letters.empty()) {
        f.tcp_flags = TcpFlags::parse_letters(letters);
        if (!f.tcp_flags)
          return std::nullopt;
      }
    }
    if (!flow_valid(f))
      return std::nullopt;
    return f;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

FlowReadStats scan_flow_stream(std::istream& in, FlowFormat format,
                               const std::function<void(const FlowRecord&)>& sink) {
  FlowReadStats stats;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (text::trim(line).empty())
      continue;
    if (format == FlowFormat::CsvV1) {
      if (!header_seen) {
        if (line != kFlowCsvHeader)
          throw Error(ErrorCode::SchemaMismatch, "flow CSV header mismatch: '" + line + "'");
        header_seen = true;
        continue;
      }
      ++stats.rows;
      if (auto f = parse_csv_row(line))
        sink(*f);
      else
        ++stats.invalid_rows;
    } else {
      ++stats.rows;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        ++stats.invalid_rows;
        continue;
      }
      check_json_schema(j);
      if (auto f = parse_json_row(j))
        sink(*f);
      else
        ++stats.invalid_rows;
    }
  }
  if (format == FlowFormat::CsvV1 && !header_seen)
    throw Error(ErrorCode::SchemaMismatch, "flow CSV is missing its header");
  return stats;
}

} // namespace

FlowReadStats scan_flows(const std::string& path, FlowFormat format,
                         const std::function<void(const FlowRecord&)>& sink) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  return scan_flow_stream(in, format, sink);
}

FlowReadStats scan_flow_text(std::string_view content, FlowFormat format,
                             const std::function<void(const FlowRecord&)>& sink) {
  std::istringstream in{std::string(content)};
  return scan_flow_stream(in, format, sink);
}

FlowReadResult read_flows(const std::string& path, FlowFormat format) {
  FlowReadResult result;
  result.stats = scan_flows(path, format, [&](const FlowRecord& f) { result.records.push_back(f); });
  return result;
}

std::string format_flow_csv(const FlowRecord& f) {
  std::string out;
  out.reserve(96);
  auto opt_port = [](const std::optional<uint16_t>& p) { return p ? std::to_string(*p) : std::string(); };
  out += f.router_id;
  out += ',' + std::to_string(f.ts);
  out += f.direction == Direction::Ingress ? ",I," : ",E,";
  out += f.src_ip.str() + ',' + f.dst_ip.str() + ',';
  out += to_string(f.protocol);
  out += ',' + opt_port(f.src_port) + ',' + opt_port(f.dst_port);
  out += ',' + std::to_string(f.sampled_pkts) + ',' + std::to_string(f.sampling_denominator) + ',';
  if (f.tcp_flags)
    out += f.tcp_flags->letters();
  return out;
}

std::string format_flow_jsonl(const FlowRecord& f) {
  json j = {
      {"router_id", f.router_id},
      {"ts_us", f.ts},
      {"direction", f.direction == Direction::Ingress ? "I" : "E"},
      {"src_ip", f.src_ip.str()},
      {"dst_ip", f.dst_ip.str()},
      {"protocol", to_string(f.protocol)},
      {"src_port", f.src_port ? json(*f.src_port) : json(nullptr)},
      {"dst_port", f.dst_port ? json(*f.dst_port) : json(nullptr)},
      {"sampled_pkts", f.sampled_pkts},
      {"sampling_denominator", f.sampling_denominator},
      {"tcp_flags", f.tcp_flags ? json(f.tcp_flags->letters()) : json(nullptr)},
  };
  return j.dump();
}

namespace {

bool skippable(std::string_view line) {
  line = text::trim(line);
  return line.empty() || line.front() == '#';
}

bool has_space(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

} // namespace

Loaded<AckedList> parse_acked(std::string_view ips_text, std::string_view keywords_text) {
  Loaded<AckedList> out;
  auto& list = out.value;
  for (auto line : text::split_lines(ips_text)) {
    if (skippable(line))
      continue;
    line = text::trim(line);
    auto comma = line.find(',');
    auto ip = Ipv4::parse(text::trim(line.substr(0, comma)));
    if (!ip) {
      ++out.malformed_lines;
      continue;
    }
    if (!list.ips.insert(*ip).second)
      continue;
    if (comma != std::string_view::npos) {
      auto org = text::trim(line.substr(comma + 1));
      if (!org.empty())
        list.org_by_ip.emplace(*ip, std::string(org));
    }
  }
  for (auto line : text::split_lines(keywords_text)) {
    if (skippable(line))
      continue;
    line = text::trim(line);
    auto comma = line.find(',');
    if (comma == std::string_view::npos) {
      ++out.malformed_lines;
      continue;
    }
    auto keyword = text::to_lower(text::trim(line.substr(0, comma)));
    auto org = text::trim(line.substr(comma + 1));
    if (keyword.empty() || has_space(keyword) || org.empty()) {
      ++out.malformed_lines;
      continue;
    }
    if (list.org_by_keyword.emplace(keyword, std::string(org)).second)
      list.keywords.push_back(keyword);
  }
  return out;
}

Loaded<AckedList> load_acked(const std::string& ips_path, const std::string& keywords_path) {
  return parse_acked(text::read_file(ips_path),
                     keywords_path.empty() ? std::string() : text::read_file(keywords_path));
}

Loaded<RdnsMap> parse_rdns(std::string_view content) {
  Loaded<RdnsMap> out;
  for (auto line : text::split_lines(content)) {
    if (skippable(line))
      continue;
    auto cols = text::split(text::trim(line), ',');
    if (cols.size() != 2) {
      ++out.malformed_lines;
      continue;
    }
    auto ip = Ipv4::parse(text::trim(cols[0]));
    auto name = text::trim(cols[1]);
    if (!ip || name.empty() || has_space(name)) {
      ++out.malformed_lines;
      continue;
    }
    out.value.emplace(*ip, text::to_lower(name));
  }
  return out;
}

Loaded<RdnsMap> load_rdns(const std::string& path) { return parse_rdns(text::read_file(path)); }

std::string_view to_string(TagClass c) {
  switch (c) {
  case TagClass::Benign: return "benign";
  case TagClass::Malicious: return "malicious";
  case TagClass::Unknown: return "unknown";
  }
  return "?";
}

Loaded<TagDb> parse_tags(std::string_view content) {
  Loaded<TagDb> out;
  for (auto line : text::split_lines(content)) {
    if (skippable(line))
      continue;
    line = text::trim(line);
    auto first = line.find(',');
    auto second = first == std::string_view::npos ? first : line.find(',', first + 1);
    if (first == std::string_view::npos) {
      ++out.malformed_lines;
      continue;
    }
    auto ip = Ipv4::parse(text::trim(line.substr(0, first)));
    auto cls_text = text::to_lower(text::trim(
        line.substr(first + 1, second == std::string_view::npos ? std::string_view::npos
                                                                : second - first - 1)));
    TagEntry entry;
    if (cls_text == "benign")
      entry.classification = TagClass::Benign;
    else if (cls_text == "malicious")
      entry.classification = TagClass::Malicious;
    else if (cls_text == "unknown")
      entry.classification = TagClass::Unknown;
    else
      ip.reset();
    if (!ip) {
      ++out.malformed_lines;
      continue;
    }
    if (second != std::string_view::npos) {
      for (auto tag : text::split(line.substr(second + 1), '|')) {
        tag = text::trim(tag);
        if (!tag.empty())
          entry.tags.emplace_back(tag);
      }
    }
    out.value.emplace(*ip, std::move(entry));
  }
  return out;
}

Loaded<TagDb> load_tags(const std::string& path) { return parse_tags(text::read_file(path)); }

void AsnMap::insert(const Cidr& prefix, AsnInfo info) {
  auto& bucket = by_length_[prefix.length()];
  if (bucket.emplace(prefix.network().bits(), std::move(info)).second)
    ++size_;
  if (std::find(lengths_.begin(), lengths_.end(), prefix.length()) == lengths_.end()) {
    lengths_.push_back(prefix.length());
    std::sort(lengths_.begin(), lengths_.end(), std::greater<>());
  }
}

const AsnInfo* AsnMap::lookup(Ipv4 ip) const {
  for (uint8_t len : lengths_) {
    uint32_t mask = len == 0 ? 0u : ~uint32_t{0} << (32 - len);
    const auto& bucket = by_length_[len];
    auto it = bucket.find(ip.bits() & mask);
    if (it != bucket.end())
      return &it->second;
  }
  return nullptr;
}

Loaded<AsnMap> parse_asn_map(std::string_view content) {
  Loaded<AsnMap> out;
  for (auto line : text::split_lines(content)) {
    if (skippable(line))
      continue;
    line = text::trim(line);
    auto first = line.find(',');
    auto last = line.rfind(',');
    auto second = first == std::string_view::npos ? first : line.find(',', first + 1);
    if (first == std::string_view::npos || second == std::string_view::npos || second >= last) {
      ++out.malformed_lines;
      continue;
    }
    auto cidr = Cidr::parse(text::trim(line.substr(0, first)));
    auto asn = text::parse_u64(text::trim(line.substr(first + 1, second - first - 1)));
    if (!cidr || !asn || *asn > UINT32_MAX) {
      ++out.malformed_lines;
      continue;
    }
    AsnInfo info;
    info.asn = static_cast<uint32_t>(*asn);
    info.org = std::string(text::trim(line.substr(second + 1, last - second - 1)));
    info.country = std::string(text::trim(line.substr(last + 1)));
    out.value.insert(*cidr, std::move(info));
  }
  return out;
}

Loaded<AsnMap> load_asn_map(const std::string& path) {
  return parse_asn_map(text::read_file(path));
}

} // namespace darkscan
