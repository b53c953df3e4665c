#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "darkscan/detector.hpp"
#include "darkscan/ingest.hpp"

namespace darkscan {

enum class MatchVia { IpMatch, DomainMatch, None };

std::string_view to_string(MatchVia v);

struct AckedMatch {
  bool acked = false;
  std::optional<std::string> org;
  MatchVia via = MatchVia::None;

  friend bool operator==(const AckedMatch&, const AckedMatch&) = default;
};

/// IP list membership first; otherwise the first keyword (list order) that is
/// a substring of the source's reverse-DNS name.
AckedMatch match_acked(Ipv4 ip, const AckedList& acked, const RdnsMap& rdns);

struct OriginRow {
  uint32_t asn = 0;
  std::string org;
  std::string country;
  uint64_t unique_32s = 0;
  uint64_t unique_24s = 0;
  uint64_t pkts = 0;
  uint64_t acked_32s = 0;
  uint64_t acked_24s = 0;

  friend bool operator==(const OriginRow&, const OriginRow&) = default;
};

/// Groups AH sources by origin ASN; unmapped sources fall into ASN 0
/// "unknown". Ranked by unique /32s descending, then ASN ascending. The
/// acked_* columns count the subset in `acked` (may be empty).
std::vector<OriginRow> origin_table(const IpSet& ah, const std::map<Ipv4, uint64_t>& pkts_by_ip,
                                    const AsnMap& asn_map, const IpSet& acked = {});

/// Replaces ASN and org with the row rank ("AS-1", ...), keeping country.
void anonymize_origins(std::vector<OriginRow>& rows);

enum class TagBucket { Benign, Malicious, Unknown, NotPresent };

std::string_view to_string(TagBucket b);

struct TagJoinResult {
  std::map<TagBucket, uint64_t> histogram;
  /// (tag, IP count), count descending then tag ascending, at most top_n.
  std::vector<std::pair<std::string, uint64_t>> top_tags;
  double overlap_fraction = 0.0;
};

/// Joins AH sources (minus `exclude`, e.g. the acknowledged subset) against
/// the tag database. Throws EmptyAhSet when nothing remains.
TagJoinResult tag_join(const IpSet& ah, const TagDb& tags, size_t top_n, const IpSet& exclude = {});

} // namespace darkscan
