#include "darkscan/enrichment.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "darkscan/error.hpp"

namespace darkscan {

std::string_view to_string(MatchVia v) {
  switch (v) {
  case MatchVia::IpMatch: return "ip";
  case MatchVia::DomainMatch: return "domain";
  case MatchVia::None: return "none";
  }
  return "?";
}

AckedMatch match_acked(Ipv4 ip, const AckedList& acked, const RdnsMap& rdns) {
  if (acked.ips.count(ip)) {
    AckedMatch m{true, std::nullopt, MatchVia::IpMatch};
    if (auto it = acked.org_by_ip.find(ip); it != acked.org_by_ip.end())
      m.org = it->second;
    return m;
  }
  auto name = rdns.find(ip);
  if (name == rdns.end())
    return {};
  for (const auto& keyword : acked.keywords) {
    if (name->second.find(keyword) != std::string::npos) {
      AckedMatch m{true, std::nullopt, MatchVia::DomainMatch};
      if (auto it = acked.org_by_keyword.find(keyword); it != acked.org_by_keyword.end())
        m.org = it->second;
      return m;
    }
  }
  return {};
}

std::vector<OriginRow> origin_table(const IpSet& ah, const std::map<Ipv4, uint64_t>& pkts_by_ip,
                                    const AsnMap& asn_map, const IpSet& acked) {
  struct Group {
    OriginRow row;
    std::set<uint32_t> slash24s;
    std::set<uint32_t> acked_slash24s;
  };
  std::map<uint32_t, Group> groups;
  for (Ipv4 ip : ah) {
    const AsnInfo* info = asn_map.lookup(ip);
    uint32_t asn = info ? info->asn : 0;
    auto [it, inserted] = groups.try_emplace(asn);
    auto& g = it->second;
    if (inserted) {
      g.row.asn = asn;
      g.row.org = info ? info->org : "unknown";
      g.row.country = info ? info->country : "";
    }
    ++g.row.unique_32s;
    g.slash24s.insert(ip.slash24().bits());
    if (auto p = pkts_by_ip.find(ip); p != pkts_by_ip.end())
      g.row.pkts += p->second;
    if (acked.count(ip)) {
      ++g.row.acked_32s;
      g.acked_slash24s.insert(ip.slash24().bits());
    }
  }
  std::vector<OriginRow> rows;
  rows.reserve(groups.size());
  for (auto& [_, g] : groups) {
    g.row.unique_24s = g.slash24s.size();
    g.row.acked_24s = g.acked_slash24s.size();
    rows.push_back(std::move(g.row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const OriginRow& a, const OriginRow& b) {
    return a.unique_32s != b.unique_32s ? a.unique_32s > b.unique_32s : a.asn < b.asn;
  });
  return rows;
}

void anonymize_origins(std::vector<OriginRow>& rows) {
  for (size_t i = 0; i < rows.size(); ++i) {
    rows[i].asn = static_cast<uint32_t>(i + 1);
    rows[i].org = "AS-" + std::to_string(i + 1);
  }
}

std::string_view to_string(TagBucket b) {
  switch (b) {
  case TagBucket::Benign: return "benign";
  case TagBucket::Malicious: return "malicious";
  case TagBucket::Unknown: return "unknown";
  case TagBucket::NotPresent: return "not_present";
  }
  return "?";
}

TagJoinResult tag_join(const IpSet& ah, const TagDb& tags, size_t top_n, const IpSet& exclude) {
  TagJoinResult out;
  for (auto b : {TagBucket::Benign, TagBucket::Malicious, TagBucket::Unknown, TagBucket::NotPresent})
    out.histogram[b] = 0;
  std::unordered_map<std::string, uint64_t> tag_counts;
  uint64_t considered = 0;
  uint64_t present = 0;
  for (Ipv4 ip : ah) {
    if (exclude.count(ip))
      continue;
    ++considered;
    auto it = tags.find(ip);
    if (it == tags.end()) {
      ++out.histogram[TagBucket::NotPresent];
      continue;
    }
    ++present;
    switch (it->second.classification) {
    case TagClass::Benign: ++out.histogram[TagBucket::Benign]; break;
    case TagClass::Malicious: ++out.histogram[TagBucket::Malicious]; break;
    case TagClass::Unknown: ++out.histogram[TagBucket::Unknown]; break;
    }
    // An IP listing a tag twice still counts once for it.
    std::set<std::string_view> distinct(it->second.tags.begin(), it->second.tags.end());
    for (auto tag : distinct)
      ++tag_counts[std::string(tag)];
  }
  if (considered == 0)
    throw Error(ErrorCode::EmptyAhSet, "tag_join over an empty AH set");
  out.overlap_fraction = static_cast<double>(present) / static_cast<double>(considered);
  out.top_tags.assign(tag_counts.begin(), tag_counts.end());
  std::sort(out.top_tags.begin(), out.top_tags.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (out.top_tags.size() > top_n)
    out.top_tags.resize(top_n);
  return out;
}

} // namespace darkscan
