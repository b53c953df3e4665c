#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "darkscan/model.hpp"
#include "darkscan/pcap.hpp"

namespace darkscan {

/// TCP SYN without ACK, any UDP, or ICMP echo request; everything else
/// (including SYN-ACK backscatter) is not scanning traffic.
std::optional<TrafficType> classify_traffic_type(const PacketMeta& p);

/// Convenience: decode a whole capture into memory.
std::vector<PacketMeta> read_pcap(const std::string& path, PcapStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Flow records

enum class FlowFormat { CsvV1, JsonLinesV1 };

inline constexpr std::string_view kFlowCsvHeader =
    "router_id,ts_us,direction,src_ip,dst_ip,protocol,src_port,dst_port,sampled_pkts,"
    "sampling_denominator,tcp_flags";

/// Picks the format from the file extension (.csv or .jsonl/.json).
std::optional<FlowFormat> flow_format_for_path(std::string_view path);

struct FlowReadStats {
  uint64_t rows = 0;
  uint64_t invalid_rows = 0;
};

/// Streams validated records to `sink`. Throws SchemaMismatch on a wrong
/// header (CSV) or an object with the wrong key set (JSONL).
FlowReadStats scan_flows(const std::string& path, FlowFormat format,
                         const std::function<void(const FlowRecord&)>& sink);
/// Same as scan_flows over in-memory content.
FlowReadStats scan_flow_text(std::string_view content, FlowFormat format,
                             const std::function<void(const FlowRecord&)>& sink);

struct FlowReadResult {
  std::vector<FlowRecord> records;
  FlowReadStats stats;
};

FlowReadResult read_flows(const std::string& path, FlowFormat format);

std::string format_flow_csv(const FlowRecord& f);
std::string format_flow_jsonl(const FlowRecord& f);

// ---------------------------------------------------------------------------
// Auxiliary tables

template <class T>
struct Loaded {
  T value;
  uint64_t malformed_lines = 0;
};

struct AckedList {
  std::unordered_set<Ipv4> ips;
  /// Matching precedence is list order.
  std::vector<std::string> keywords;
  std::unordered_map<Ipv4, std::string> org_by_ip;
  std::unordered_map<std::string, std::string> org_by_keyword;
};

/// An empty `keywords_path` means no keyword file.
Loaded<AckedList> load_acked(const std::string& ips_path, const std::string& keywords_path);
Loaded<AckedList> parse_acked(std::string_view ips_text, std::string_view keywords_text);

using RdnsMap = std::unordered_map<Ipv4, std::string>;

/// `ip,fqdn` per line; names are lowercased, first entry per IP wins.
Loaded<RdnsMap> load_rdns(const std::string& path);
Loaded<RdnsMap> parse_rdns(std::string_view content);

enum class TagClass { Benign, Malicious, Unknown };

std::string_view to_string(TagClass c);

struct TagEntry {
  TagClass classification = TagClass::Unknown;
  std::vector<std::string> tags;
};

using TagDb = std::unordered_map<Ipv4, TagEntry>;

/// `ip,classification,tag1|tag2|...` per line.
Loaded<TagDb> load_tags(const std::string& path);
Loaded<TagDb> parse_tags(std::string_view content);

struct AsnInfo {
  uint32_t asn = 0;
  std::string org;
  std::string country;

  friend bool operator==(const AsnInfo&, const AsnInfo&) = default;
};

/// Longest-prefix-match table from CIDR to origin network.
class AsnMap {
public:
  void insert(const Cidr& prefix, AsnInfo info);
  const AsnInfo* lookup(Ipv4 ip) const;
  size_t size() const { return size_; }

private:
  std::array<std::unordered_map<uint32_t, AsnInfo>, 33> by_length_;
  std::vector<uint8_t> lengths_; // populated lengths, longest first
  size_t size_ = 0;
};

/// `cidr,asn,org,country` per line. Commas inside org are kept.
Loaded<AsnMap> load_asn_map(const std::string& path);
Loaded<AsnMap> parse_asn_map(std::string_view content);

} // namespace darkscan
