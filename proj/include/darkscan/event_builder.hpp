#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "darkscan/distinct_counter.hpp"
#include "darkscan/model.hpp"

namespace darkscan {

/// Bookkeeping for an event that has not yet timed out.
struct OpenEventState {
  EventKey key;
  TimestampUs start_ts = 0;
  TimestampUs last_ts = 0;
  uint64_t pkt_count = 0;
  DistinctCounter dst_seen;
  uint64_t zmap_pkts = 0;
  uint64_t masscan_pkts = 0;
  uint64_t other_pkts = 0;

  uint64_t unique_dst_count() const { return dst_seen.count(); }
  DarknetEvent close() const;
};

struct BuilderStats {
  uint64_t packets_in = 0;
  uint64_t non_scanning = 0;     // not TCP-SYN / UDP / ICMP echo request
  uint64_t outside_darknet = 0;  // destination not in a darknet prefix
  uint64_t out_of_order = 0;     // older than watermark - reorder slack
  uint64_t events_emitted = 0;
  uint64_t pkts_emitted = 0;     // sum of pkt_count over emitted events

  uint64_t dropped() const { return non_scanning + outside_darknet; }

  BuilderStats& operator+=(const BuilderStats& o);
};

/// Streaming reconstruction of logical scans keyed by (source, destination
/// port, traffic type). An event closes once the stream has moved more than
/// `event_timeout_s` past its last packet.
///
/// Single-writer. For parallel capture processing see ShardedEventBuilder.
class EventBuilder {
public:
  explicit EventBuilder(const DarknetConfig& cfg);

  /// Folds one packet in; appends any events closed by its arrival to `out`.
  void ingest(const PacketMeta& p, std::vector<DarknetEvent>& out);
  std::vector<DarknetEvent> ingest(const PacketMeta& p);

  /// Closes everything still open, ordered by ascending key.
  std::vector<DarknetEvent> flush();

  size_t open_events() const { return open_.size(); }
  TimestampUs watermark() const { return watermark_; }
  const BuilderStats& stats() const { return stats_; }

private:
  void expire(TimestampUs horizon, std::vector<DarknetEvent>& out);
  void emit(const OpenEventState& state, std::vector<DarknetEvent>& out);

  DarknetConfig cfg_;
  TimestampUs timeout_us_;
  TimestampUs slack_us_;
  bool exact_counts_;
  bool started_ = false;
  TimestampUs watermark_ = 0;
  std::unordered_map<EventKey, OpenEventState> open_;
  std::set<std::pair<TimestampUs, EventKey>> by_last_ts_;
  BuilderStats stats_;
};

/// Partitions the state store by hash(src_ip). Each shard is driven by its
/// own thread inside ingest_batch(); results are merged deterministically.
class ShardedEventBuilder {
public:
  ShardedEventBuilder(const DarknetConfig& cfg, size_t shards);

  static size_t shard_of(Ipv4 src, size_t shards);

  /// Events closed while processing `batch`, sorted by (start_ts, key).
  std::vector<DarknetEvent> ingest_batch(std::span<const PacketMeta> batch);
  /// Remaining events sorted by key.
  std::vector<DarknetEvent> flush();

  BuilderStats stats() const;
  size_t shard_count() const { return shards_.size(); }

private:
  std::vector<EventBuilder> shards_;
};

// Event log: JSON lines, one DarknetEvent per line.
void write_event_log(const std::string& path, std::span<const DarknetEvent> events);
std::vector<DarknetEvent> read_event_log(const std::string& path);

} // namespace darkscan
