#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <unordered_set>

#include "darkscan/distinct_counter.hpp"
#include "darkscan/event_builder.hpp"
#include "test_support.hpp"

using namespace darkscan;
using namespace darkscan::testing;

namespace {

const Ipv4 kSrc(198, 51, 100, 7);

DarknetConfig cfg22() { return config_for({"10.0.0.0/22"}); }

std::vector<DarknetEvent> run_all(EventBuilder& b, const std::vector<PacketMeta>& pkts) {
  std::vector<DarknetEvent> out;
  for (const auto& p : pkts)
    b.ingest(p, out);
  auto rest = b.flush();
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

} // namespace

TEST_CASE("gap below timeout keeps one open event") {
  EventBuilder b(cfg22());
  CHECK(b.ingest(tcp_packet(sec(0), kSrc, Ipv4(10, 0, 0, 1), 23)).empty());
  CHECK(b.ingest(tcp_packet(sec(300), kSrc, Ipv4(10, 0, 0, 2), 23)).empty());
  CHECK(b.open_events() == 1);
}

TEST_CASE("gap above timeout closes the event on arrival") {
  EventBuilder b(cfg22());
  CHECK(b.ingest(tcp_packet(sec(0), kSrc, Ipv4(10, 0, 0, 1), 23)).empty());
  auto closed = b.ingest(tcp_packet(sec(1200), kSrc, Ipv4(10, 0, 0, 1), 23));
  REQUIRE(closed.size() == 1);
  CHECK(closed[0].start_ts == 0);
  CHECK(closed[0].end_ts == 0);
  CHECK(closed[0].pkt_count == 1);
  CHECK(b.open_events() == 1);
  auto rest = b.flush();
  REQUIRE(rest.size() == 1);
  CHECK(rest[0].start_ts == sec(1200));
}

TEST_CASE("gap exactly equal to the timeout continues the event") {
  EventBuilder b(cfg22());
  b.ingest(tcp_packet(sec(0), kSrc, Ipv4(10, 0, 0, 1), 23));
  CHECK(b.ingest(tcp_packet(sec(600), kSrc, Ipv4(10, 0, 0, 1), 23)).empty());
  auto ev = b.flush();
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].pkt_count == 2);
  CHECK(ev[0].end_ts == sec(600));
}

TEST_CASE("destination port is part of the key") {
  EventBuilder b(cfg22());
  b.ingest(tcp_packet(sec(5), kSrc, Ipv4(10, 0, 0, 1), 22));
  b.ingest(tcp_packet(sec(5), kSrc, Ipv4(10, 0, 0, 1), 23));
  CHECK(b.open_events() == 2);
}

TEST_CASE("flush behaviour") {
  EventBuilder empty(cfg22());
  CHECK(empty.flush().empty());

  EventBuilder one(cfg22());
  for (int i = 0; i < 5; ++i)
    one.ingest(tcp_packet(sec(i), kSrc, Ipv4(10, 0, 0, static_cast<uint8_t>(i % 2)), 23));
  auto ev = one.flush();
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].pkt_count == 5);
  CHECK(ev[0].unique_dst_count == 2);

  EventBuilder three(cfg22());
  three.ingest(udp_packet(sec(1), Ipv4(9, 9, 9, 9), Ipv4(10, 0, 0, 1), 53));
  three.ingest(tcp_packet(sec(2), Ipv4(1, 1, 1, 1), Ipv4(10, 0, 0, 1), 443));
  three.ingest(tcp_packet(sec(3), Ipv4(1, 1, 1, 1), Ipv4(10, 0, 0, 1), 80));
  auto sorted = three.flush();
  REQUIRE(sorted.size() == 3);
  CHECK(std::is_sorted(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.key < b.key; }));
  CHECK(sorted[0].key.dst_port == 80);
  CHECK(sorted[2].key.src_ip == Ipv4(9, 9, 9, 9));
  CHECK(three.open_events() == 0);
}

TEST_CASE("non-scanning, outside and late packets are accounted") {
  EventBuilder b(cfg22());
  b.ingest(tcp_packet(sec(10), kSrc, Ipv4(10, 0, 0, 1), 23, TcpFlags::SYN | TcpFlags::ACK));
  b.ingest(icmp_packet(sec(10), kSrc, Ipv4(10, 0, 0, 1), 0));
  b.ingest(tcp_packet(sec(10), kSrc, Ipv4(10, 0, 9, 1), 23));
  b.ingest(tcp_packet(sec(10), kSrc, Ipv4(10, 0, 0, 1), 23));
  b.ingest(tcp_packet(sec(9), kSrc, Ipv4(10, 0, 0, 1), 23));
  b.flush();
  const auto& st = b.stats();
  CHECK(st.packets_in == 5);
  CHECK(st.non_scanning == 2);
  CHECK(st.outside_darknet == 1);
  CHECK(st.out_of_order == 1);
  CHECK(st.pkts_emitted == 1);
  CHECK(st.pkts_emitted + st.dropped() + st.out_of_order == st.packets_in);
}

TEST_CASE("reorder slack admits slightly late packets") {
  auto cfg = cfg22();
  cfg.reorder_slack_s = 2.0;
  EventBuilder b(cfg);
  b.ingest(tcp_packet(sec(10), kSrc, Ipv4(10, 0, 0, 1), 23));
  b.ingest(tcp_packet(sec(9), kSrc, Ipv4(10, 0, 0, 2), 23));
  b.ingest(tcp_packet(sec(5), kSrc, Ipv4(10, 0, 0, 3), 23));
  auto ev = b.flush();
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].pkt_count == 2);
  CHECK(ev[0].start_ts == sec(9));
  CHECK(b.stats().out_of_order == 1);
}

TEST_CASE("icmp events use port zero and fingerprints are tallied") {
  EventBuilder b(cfg22());
  auto z = icmp_packet(sec(1), kSrc, Ipv4(10, 0, 0, 1));
  z.ip_id = 54321;
  b.ingest(z);
  b.ingest(icmp_packet(sec(2), kSrc, Ipv4(10, 0, 0, 2)));
  auto ev = b.flush();
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].key.dst_port == 0);
  CHECK(ev[0].key.traffic_type == TrafficType::IcmpEchoRequest);
  CHECK(ev[0].zmap_pkts == 1);
  CHECK(ev[0].other_pkts == 1);
}

TEST_CASE("splitting matches the offline gap oracle") {
  std::mt19937_64 rng(2024);
  const TimestampUs timeout = sec(600);
  for (int trial = 0; trial < 2000; ++trial) {
    int n = 1 + static_cast<int>(rng() % 40);
    std::vector<TimestampUs> ts;
    TimestampUs t = static_cast<TimestampUs>(rng() % 1'000'000);
    std::uniform_int_distribution<TimestampUs> gap(timeout - 5, timeout + 5);
    std::uniform_int_distribution<TimestampUs> wide(0, 2 * timeout);
    for (int i = 0; i < n; ++i) {
      ts.push_back(t);
      t += (rng() % 2) ? gap(rng) : wide(rng);
    }
    EventBuilder b(cfg22());
    std::vector<PacketMeta> pkts;
    for (auto x : ts)
      pkts.push_back(tcp_packet(x, kSrc, Ipv4(10, 0, 0, 1), 23));
    auto got = run_all(b, pkts);
    auto want = split_by_gaps(ts, timeout);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].start_ts == want[i].first);
      CHECK(got[i].end_ts == want[i].second);
    }
  }
}

TEST_CASE("random streams conserve packets and satisfy invariants") {
  std::mt19937_64 rng(77);
  auto cfg = config_for({"10.0.0.0/24", "10.0.2.0/24"}, 60);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PacketMeta> pkts;
    TimestampUs t = 0;
    for (int i = 0; i < 3000; ++i) {
      t += static_cast<TimestampUs>(rng() % sec(5));
      Ipv4 src(198, 51, 100, static_cast<uint8_t>(rng() % 8));
      Ipv4 dst(10, 0, static_cast<uint8_t>(rng() % 4), static_cast<uint8_t>(rng()));
      uint16_t port = static_cast<uint16_t>(rng() % 5);
      TimestampUs ts = (rng() % 50 == 0 && t >= sec(1)) ? t - sec(1) : t;
      switch (rng() % 4) {
      case 0: pkts.push_back(udp_packet(ts, src, dst, port)); break;
      case 1: pkts.push_back(icmp_packet(ts, src, dst, rng() % 2 ? 8 : 0)); break;
      default:
        pkts.push_back(tcp_packet(ts, src, dst, port, rng() % 5 ? TcpFlags::SYN : TcpFlags::SYN | TcpFlags::ACK,
                                  static_cast<uint16_t>(rng() % 3 == 0 ? 54321 : rng()),
                                  static_cast<uint32_t>(rng())));
      }
    }
    EventBuilder b(cfg);
    auto events = run_all(b, pkts);
    uint64_t sum = 0;
    for (const auto& ev : events) {
      CHECK(ev.satisfies_invariants(cfg.darknet_size));
      sum += ev.pkt_count;
    }
    const auto& st = b.stats();
    CHECK(st.packets_in == pkts.size());
    CHECK(sum + st.dropped() + st.out_of_order == pkts.size());
    CHECK(st.events_emitted == events.size());
  }
}

TEST_CASE("sharded builder produces the same events") {
  std::mt19937_64 rng(8);
  auto cfg = config_for({"10.0.0.0/22"}, 30);
  std::vector<PacketMeta> pkts;
  TimestampUs t = 0;
  for (int i = 0; i < 20000; ++i) {
    t += static_cast<TimestampUs>(rng() % sec(1));
    pkts.push_back(tcp_packet(t, Ipv4(203, 0, 113, static_cast<uint8_t>(rng() % 64)),
                              Ipv4(10, 0, static_cast<uint8_t>(rng() % 4), static_cast<uint8_t>(rng())),
                              static_cast<uint16_t>(rng() % 4)));
  }
  EventBuilder single(cfg);
  auto want = run_all(single, pkts);
  ShardedEventBuilder sharded(cfg, 4);
  auto got = sharded.ingest_batch(std::span<const PacketMeta>(pkts).subspan(0, 10000));
  auto more = sharded.ingest_batch(std::span<const PacketMeta>(pkts).subspan(10000));
  got.insert(got.end(), more.begin(), more.end());
  auto rest = sharded.flush();
  got.insert(got.end(), rest.begin(), rest.end());
  auto order = [](const DarknetEvent& a, const DarknetEvent& b) {
    return std::tie(a.key, a.start_ts) < std::tie(b.key, b.start_ts);
  };
  std::sort(want.begin(), want.end(), order);
  std::sort(got.begin(), got.end(), order);
  CHECK(got == want);
  CHECK(sharded.stats().packets_in == pkts.size());
  CHECK(ShardedEventBuilder::shard_of(Ipv4(1, 2, 3, 4), 4) < 4);
}

TEST_CASE("distinct counter") {
  DistinctCounter exact;
  for (uint32_t v : {0x0A000001u, 0x0A000001u, 0x0A000002u})
    exact.insert(v);
  CHECK(exact.count() == 2);

  DistinctCounter k(true);
  for (uint32_t i = 0; i < 1024; ++i)
    k.insert(0x0A000000u + i);
  CHECK(k.count() == 1024);
  CHECK_FALSE(k.estimating());

  std::mt19937_64 rng(99);
  DistinctCounter est(false);
  std::unordered_set<uint32_t> truth;
  while (truth.size() < 100000) {
    auto v = static_cast<uint32_t>(rng());
    truth.insert(v);
    est.insert(v);
  }
  CHECK(est.estimating());
  double err = std::abs(static_cast<double>(est.count()) - static_cast<double>(truth.size())) /
               static_cast<double>(truth.size());
  CHECK(err < 0.03);

  DistinctCounter small(false);
  for (uint32_t i = 0; i < 100; ++i)
    small.insert(i);
  CHECK(small.count() == 100);
}

TEST_CASE("estimate mode keeps unique_dst_count within invariants") {
  auto cfg = config_for({"10.0.0.0/16"});
  cfg.exact_threshold = 1024;
  EventBuilder b(cfg);
  for (uint32_t i = 0; i < 20000; ++i)
    b.ingest(tcp_packet(static_cast<TimestampUs>(i), kSrc, Ipv4(0x0A000000u + i % 60000), 80));
  auto ev = b.flush();
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].satisfies_invariants(cfg.darknet_size));
  CHECK(std::abs(static_cast<double>(ev[0].unique_dst_count) - 20000.0) < 600.0);
}

TEST_CASE("event log round trip") {
  TempDir dir;
  std::vector<DarknetEvent> events = {
      make_event(Ipv4(1, 2, 3, 4), 80, TrafficType::TcpSyn, 1, 2, 3, 2),
      make_event(Ipv4(1, 2, 3, 5), 0, TrafficType::IcmpEchoRequest, 5, 9, 1, 1),
  };
  write_event_log(dir.file("e.jsonl"), events);
  CHECK(read_event_log(dir.file("e.jsonl")) == events);
  CHECK_THROWS(read_event_log(dir.file("missing.jsonl")));
}
