#include "darkscan/event_builder.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "darkscan/error.hpp"
#include "darkscan/fingerprint.hpp"
#include "darkscan/ingest.hpp"

namespace darkscan {

DarknetEvent OpenEventState::close() const {
  DarknetEvent ev;
  ev.key = key;
  ev.start_ts = start_ts;
  ev.end_ts = last_ts;
  ev.pkt_count = pkt_count;
  ev.unique_dst_count = std::clamp<uint64_t>(unique_dst_count(), 1, pkt_count);
  ev.zmap_pkts = zmap_pkts;
  ev.masscan_pkts = masscan_pkts;
  ev.other_pkts = other_pkts;
  return ev;
}

BuilderStats& BuilderStats::operator+=(const BuilderStats& o) {
  packets_in += o.packets_in;
  non_scanning += o.non_scanning;
  outside_darknet += o.outside_darknet;
  out_of_order += o.out_of_order;
  events_emitted += o.events_emitted;
  pkts_emitted += o.pkts_emitted;
  return *this;
}

EventBuilder::EventBuilder(const DarknetConfig& cfg)
    : cfg_(cfg),
      timeout_us_(cfg.timeout_us()),
      slack_us_(cfg.reorder_slack_us()),
      exact_counts_(cfg.darknet_size <= cfg.exact_threshold) {}

void EventBuilder::emit(const OpenEventState& state, std::vector<DarknetEvent>& out) {
  out.push_back(state.close());
  ++stats_.events_emitted;
  stats_.pkts_emitted += state.pkt_count;
}

void EventBuilder::expire(TimestampUs horizon, std::vector<DarknetEvent>& out) {
  while (!by_last_ts_.empty() && by_last_ts_.begin()->first < horizon) {
    auto it = open_.find(by_last_ts_.begin()->second);
    emit(it->second, out);
    open_.erase(it);
    by_last_ts_.erase(by_last_ts_.begin());
  }
}

void EventBuilder::ingest(const PacketMeta& p, std::vector<DarknetEvent>& out) {
  ++stats_.packets_in;
  if (started_ && p.ts < watermark_ - slack_us_) {
    ++stats_.out_of_order;
    return;
  }
  auto type = classify_traffic_type(p);
  if (!type) {
    ++stats_.non_scanning;
    return;
  }
  if (!cfg_.in_darknet(p.dst_ip)) {
    ++stats_.outside_darknet;
    return;
  }
  if (!started_ || p.ts > watermark_) {
    watermark_ = p.ts;
    started_ = true;
  }
  expire(watermark_ - slack_us_ - timeout_us_, out);

  EventKey key{p.src_ip, type == TrafficType::IcmpEchoRequest ? uint16_t{0} : p.dst_port.value_or(0),
               *type};
  auto it = open_.find(key);
  if (it != open_.end() && p.ts - it->second.last_ts > timeout_us_) {
    // Only reachable with reorder slack: the watermark lags this key's gap.
    by_last_ts_.erase({it->second.last_ts, key});
    emit(it->second, out);
    open_.erase(it);
    it = open_.end();
  }
  if (it == open_.end()) {
    OpenEventState state{key, p.ts, p.ts, 0, DistinctCounter(exact_counts_)};
    it = open_.emplace(key, std::move(state)).first;
    by_last_ts_.emplace(p.ts, key);
  }
  auto& state = it->second;
  if (p.ts > state.last_ts) {
    by_last_ts_.erase({state.last_ts, key});
    by_last_ts_.emplace(p.ts, key);
    state.last_ts = p.ts;
  }
  state.start_ts = std::min(state.start_ts, p.ts);
  ++state.pkt_count;
  state.dst_seen.insert(p.dst_ip.bits());
  switch (fingerprint_packet(p, cfg_.fingerprints)) {
  case ScanTool::ZMap: ++state.zmap_pkts; break;
  case ScanTool::Masscan: ++state.masscan_pkts; break;
  case ScanTool::Other: ++state.other_pkts; break;
  }
}

std::vector<DarknetEvent> EventBuilder::ingest(const PacketMeta& p) {
  std::vector<DarknetEvent> out;
  ingest(p, out);
  return out;
}

std::vector<DarknetEvent> EventBuilder::flush() {
  std::vector<const OpenEventState*> states;
  states.reserve(open_.size());
  for (auto& [_, state] : open_)
    states.push_back(&state);
  std::sort(states.begin(), states.end(),
            [](const auto* a, const auto* b) { return a->key < b->key; });
  std::vector<DarknetEvent> out;
  out.reserve(states.size());
  for (const auto* state : states)
    emit(*state, out);
  open_.clear();
  by_last_ts_.clear();
  return out;
}

ShardedEventBuilder::ShardedEventBuilder(const DarknetConfig& cfg, size_t shards) {
  shards_.reserve(std::max<size_t>(shards, 1));
  for (size_t i = 0; i < std::max<size_t>(shards, 1); ++i)
    shards_.emplace_back(cfg);
}

size_t ShardedEventBuilder::shard_of(Ipv4 src, size_t shards) {
  return std::hash<Ipv4>{}(src) % shards;
}

namespace {

void sort_by_start(std::vector<DarknetEvent>& events) {
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.start_ts, a.key) < std::tie(b.start_ts, b.key);
  });
}

} // namespace

std::vector<DarknetEvent> ShardedEventBuilder::ingest_batch(std::span<const PacketMeta> batch) {
  const size_t n = shards_.size();
  std::vector<std::vector<const PacketMeta*>> parts(n);
  for (const auto& p : batch)
    parts[shard_of(p.src_ip, n)].push_back(&p);
  std::vector<std::vector<DarknetEvent>> emitted(n);
  {
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (size_t i = 0; i < n; ++i)
      workers.emplace_back([&, i] {
        for (const auto* p : parts[i])
          shards_[i].ingest(*p, emitted[i]);
      });
  }
  std::vector<DarknetEvent> out;
  for (auto& e : emitted)
    out.insert(out.end(), e.begin(), e.end());
  sort_by_start(out);
  return out;
}

std::vector<DarknetEvent> ShardedEventBuilder::flush() {
  std::vector<DarknetEvent> out;
  for (auto& shard : shards_) {
    auto part = shard.flush();
    out.insert(out.end(), part.begin(), part.end());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return out;
}

BuilderStats ShardedEventBuilder::stats() const {
  BuilderStats total;
  for (const auto& shard : shards_)
    total += shard.stats();
  return total;
}

void write_event_log(const std::string& path, std::span<const DarknetEvent> events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot create " + path);
  for (const auto& ev : events)
    out << encode_event(ev) << '\n';
  if (!out)
    throw Error(ErrorCode::IoError, "failed writing " + path);
}

std::vector<DarknetEvent> read_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<DarknetEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    out.push_back(decode_event(line));
  }
  return out;
}

} // namespace darkscan
