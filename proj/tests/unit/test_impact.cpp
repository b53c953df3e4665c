#include <doctest.h>

#include <cmath>
#include <random>

#include "darkscan/error.hpp"
#include "darkscan/impact.hpp"
#include "darkscan/synth.hpp"
#include "test_support.hpp"

using namespace darkscan;
using namespace darkscan::testing;

namespace {

const Day kDay = 19266;

FlowRecord flow(std::string router, Ipv4 src, uint64_t sampled, uint32_t denom = 1000,
                Protocol proto = Protocol::Tcp, std::optional<uint8_t> flags = TcpFlags::SYN) {
  FlowRecord f;
  f.router_id = std::move(router);
  f.ts = day_start(kDay) + 1000;
  f.src_ip = src;
  f.dst_ip = Ipv4(192, 0, 2, 1);
  f.protocol = proto;
  if (proto != Protocol::Icmp) {
    f.src_port = 1;
    f.dst_port = 2;
  }
  if (proto == Protocol::Tcp && flags)
    f.tcp_flags = TcpFlags(*flags);
  f.sampled_pkts = sampled;
  f.sampling_denominator = denom;
  return f;
}

ImpactSeries series_of(std::vector<std::pair<uint64_t, uint64_t>> bins, double width = 1.0) {
  ImpactSeries s;
  s.bin_width_s = width;
  TimestampUs t = 0;
  for (auto [ah, total] : bins) {
    s.bins.push_back({t, ah, total});
    t += seconds_to_us(width);
  }
  return s;
}

} // namespace

TEST_CASE("flow impact arithmetic at the published scale") {
  const Ipv4 ah_ip(1, 1, 1, 1), other(2, 2, 2, 2);
  // 20.4e9 AH and 348.7e9 total estimated packets at 1:1000 sampling.
  std::vector<FlowRecord> flows = {flow("r", ah_ip, 20'400'000),
                                   flow("r", other, 348'700'000 - 20'400'000)};
  auto r = flow_impact(flows, IpSet{ah_ip}, kDay);
  REQUIRE(r.size() == 1);
  CHECK(r[0].ah_pkts_est == 20'400'000'000ull);
  CHECK(r[0].total_pkts_est == 348'700'000'000ull);
  CHECK(r[0].fraction == doctest::Approx(20.4 / 348.7));
  CHECK(r[0].fraction == doctest::Approx(0.0585).epsilon(0.001));
}

TEST_CASE("flow impact per router and day") {
  const Ipv4 a(1, 1, 1, 1), b(2, 2, 2, 2);
  std::vector<FlowRecord> flows = {flow("r2", a, 1), flow("r1", a, 3), flow("r1", b, 1)};
  auto other_day = flow("r1", b, 1000);
  other_day.ts += kMicrosPerDay;
  flows.push_back(other_day);
  auto r = flow_impact(flows, IpSet{a, b}, kDay);
  REQUIRE(r.size() == 2);
  CHECK(r[0].router_id == "r1");
  CHECK(r[0].fraction == 1.0);
  CHECK(r[0].total_pkts_est == 4000);
  auto partial = flow_impact(flows, IpSet{a}, kDay);
  CHECK(partial[0].fraction == 0.75);
  CHECK_THROWS_AS(flow_impact(flows, IpSet{a}, kDay + 5), Error);
  CHECK(flow_impact(flows, IpSet{}, kDay)[0].fraction == 0.0);
}

TEST_CASE("sampled flows recover a ten percent share") {
  std::mt19937_64 rng(1);
  std::vector<Ipv4> ah, others;
  for (uint32_t i = 0; i < 50; ++i)
    ah.push_back(Ipv4(0x01000000u + i));
  for (uint32_t i = 0; i < 450; ++i)
    others.push_back(Ipv4(0x02000000u + i));
  std::vector<std::string> routers = {"r"};
  int within = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto t = simulate_sampled_flows(ah, others, 10'000'000, 0.10, 1000, 1000, kDay, routers, rng);
    CHECK(t.true_ah_pkts * 10 == t.true_total_pkts);
    auto r = flow_impact(t.flows, IpSet(ah.begin(), ah.end()), kDay);
    uint64_t sampled = r[0].total_pkts_est / 1000;
    double sd = std::sqrt(0.1 * 0.9 / static_cast<double>(sampled));
    within += std::abs(r[0].fraction - 0.10) <= 3 * sd;
  }
  CHECK(within >= 19);
}

TEST_CASE("stream impact fractions") {
  auto flat = derive_fractions(series_of({{2, 100}, {4, 200}, {1, 50}}));
  for (const auto& p : flat) {
    CHECK(p.inst_fraction == doctest::Approx(0.02));
    CHECK(p.cum_fraction == doctest::Approx(0.02));
  }

  std::vector<std::pair<uint64_t, uint64_t>> bins(10, {0, 100});
  bins[0] = {30, 100};
  auto spike = derive_fractions(series_of(bins));
  CHECK(spike[0].inst_fraction == 0.3);
  for (size_t i = 1; i < spike.size(); ++i) {
    CHECK(spike[i].inst_fraction == 0.0);
    CHECK(spike[i].cum_fraction < spike[i - 1].cum_fraction);
    CHECK(spike[i].cum_fraction == doctest::Approx(30.0 / (100.0 * static_cast<double>(i + 1))));
  }
  CHECK(spike.back().cum_fraction == doctest::Approx(0.03));

  auto gap = derive_fractions(series_of({{1, 2}, {0, 0}, {1, 2}}));
  CHECK(gap[1].empty_bin);
  CHECK(gap[1].inst_fraction == 0.0);
  CHECK(gap[1].cum_fraction == 0.5);
  CHECK_FALSE(gap[0].empty_bin);
}

TEST_CASE("stream accumulator bins packets contiguously") {
  const Ipv4 ah_ip(1, 1, 1, 1), other(2, 2, 2, 2);
  IpSet ah{ah_ip};
  std::vector<PacketMeta> pkts = {
      tcp_packet(sec(10.2), ah_ip, Ipv4(10, 0, 0, 1), 80),
      tcp_packet(sec(10.7), other, Ipv4(10, 0, 0, 1), 80),
      tcp_packet(sec(13.1), ah_ip, Ipv4(10, 0, 0, 1), 80),
      tcp_packet(sec(8.5), other, Ipv4(10, 0, 0, 1), 80),
  };
  auto s = stream_impact(pkts, ah, 1.0, "v");
  REQUIRE(s.bins.size() == 6);
  CHECK(s.bins[0].bin_start_ts == sec(8));
  CHECK(s.bins[2].ah_pkts == 1);
  CHECK(s.bins[2].total_pkts == 2);
  CHECK(s.bins[3].total_pkts == 0);
  CHECK(s.bins[5].ah_pkts == 1);
  CHECK(s.vantage_id == "v");
}

TEST_CASE("cumulative fraction equals total ratio arithmetic") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<uint64_t, uint64_t>> bins;
    uint64_t ah = 0, total = 0;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 300); ++i) {
      uint64_t t = rng() % 5 ? rng() % 100000 : 0;
      uint64_t a = t ? rng() % (t + 1) : 0;
      bins.emplace_back(a, t);
      ah += a;
      total += t;
    }
    auto pts = derive_fractions(series_of(bins));
    double want = total ? static_cast<double>(ah) / static_cast<double>(total) : 0.0;
    CHECK(std::abs(pts.back().cum_fraction - want) <= 1e-12 * std::max(want, 1e-300));
  }
}

TEST_CASE("per /24 normalization") {
  CHECK(normalize_per_slash24(series_of({{28561, 30000}}), 28561)[0] == 1.0);
  CHECK(normalize_per_slash24(series_of({{2910, 3000}}), 291)[0] == doctest::Approx(10.0));
  CHECK(normalize_per_slash24(series_of({{0, 0}}), 291)[0] == 0.0);
  CHECK(normalize_per_slash24(series_of({{20, 20}}, 2.0), 10)[0] == 1.0);
  CHECK_THROWS_AS(normalize_per_slash24(series_of({{1, 1}}), 0), Error);
}

TEST_CASE("high load coincidence") {
  std::vector<std::pair<uint64_t, uint64_t>> bins;
  for (uint64_t i = 0; i < 20; ++i)
    bins.emplace_back(i, 100 + i);
  auto pts = derive_fractions(series_of(bins));
  auto hits = high_load_coincidence(pts);
  // Top decile of 20 bins: rank ceil(0.9 * 20) = 18, so bins 17..19.
  CHECK(hits == std::vector<size_t>{17, 18, 19});
  CHECK(high_load_coincidence({}).empty());
}

TEST_CASE("protocol breakdown") {
  const Ipv4 a(1, 1, 1, 1);
  IpSet ah{a};
  std::vector<DarknetEvent> all_syn = {make_event(a, 80, TrafficType::TcpSyn, 0, 0, 10, 1)};
  auto b = protocol_breakdown(std::span<const DarknetEvent>(all_syn), ah);
  CHECK(b.tcp_syn_pct() == 100.0);
  CHECK(b.udp_pct() == 0.0);
  CHECK(b.icmp_pct() == 0.0);

  std::vector<DarknetEvent> mixed = {make_event(a, 80, TrafficType::TcpSyn, 0, 0, 904, 1),
                                     make_event(a, 53, TrafficType::Udp, 0, 0, 94, 1),
                                     make_event(a, 0, TrafficType::IcmpEchoRequest, 0, 0, 2, 1),
                                     make_event(Ipv4(9, 9, 9, 9), 53, TrafficType::Udp, 0, 0, 500, 1)};
  b = protocol_breakdown(std::span<const DarknetEvent>(mixed), ah);
  CHECK(b.tcp_syn_pct() == doctest::Approx(90.4));
  CHECK(b.udp_pct() == doctest::Approx(9.4));
  CHECK(b.icmp_pct() == doctest::Approx(0.2));

  std::vector<FlowRecord> flows = {flow("r", a, 5), flow("r", a, 3, 1000, Protocol::Tcp, std::nullopt),
                                   flow("r", a, 2, 1000, Protocol::Tcp, TcpFlags::PSH | TcpFlags::ACK),
                                   flow("r", a, 5, 1000, Protocol::Udp)};
  b = protocol_breakdown(std::span<const FlowRecord>(flows), ah);
  CHECK(b.unclassifiable_pkts == 3000);
  CHECK(b.other_pkts == 2000);
  CHECK(b.tcp_syn_pct() == 50.0);
  CHECK(b.udp_pct() == 50.0);
}

TEST_CASE("ah presence") {
  const Ipv4 a(1, 1, 1, 1), b(2, 2, 2, 2), c(3, 3, 3, 3);
  std::vector<FlowRecord> flows = {flow("r1", a, 1), flow("r1", b, 1), flow("r2", c, 1), flow("r2", a, 1)};
  auto all = ah_presence(flows, IpSet{a, b});
  CHECK(all.at("r1") == 1.0);
  CHECK(all.at("r2") == 0.5);
  auto none = ah_presence(flows, IpSet{Ipv4(7, 7, 7, 7)});
  CHECK(none.at("r1") == 0.0);
  CHECK_THROWS_AS(ah_presence(flows, IpSet{}), Error);

  std::mt19937_64 rng(2);
  IpSet ah;
  for (uint32_t i = 0; i < 200; ++i)
    ah.insert(Ipv4(i));
  std::vector<FlowRecord> many;
  std::map<std::string, IpSet> brute;
  for (uint32_t i = 0; i < 200; ++i) {
    std::string router = "r" + std::to_string(std::hash<uint32_t>{}(i * 2654435761u) % 4);
    if (rng() % 3) {
      many.push_back(flow(router, Ipv4(i), 1));
      brute[router].insert(Ipv4(i));
    }
  }
  auto got = ah_presence(many, ah);
  for (const auto& [router, ips] : brute)
    CHECK(got.at(router) == static_cast<double>(ips.size()) / 200.0);
}

TEST_CASE("acknowledged impact") {
  const Ipv4 a(1, 1, 1, 1), b(2, 2, 2, 2);
  std::vector<FlowRecord> flows = {flow("r", a, 1), flow("r", b, 1)};
  IpSet ah{a, b};
  AckedList none;
  auto r = acked_impact(flows, ah, none, {}, kDay);
  CHECK(r[0].ah_pkts_est == 0);
  CHECK(r[0].fraction == 0.0);

  AckedList everyone;
  everyone.ips = {a, b};
  CHECK(acked_impact(flows, ah, everyone, {}, kDay) == flow_impact(flows, ah, kDay));

  // 30 of 100 AH sources acknowledged, equal per-IP rates.
  std::vector<FlowRecord> split;
  IpSet big;
  AckedList thirty;
  for (uint32_t i = 0; i < 100; ++i) {
    big.insert(Ipv4(i));
    split.push_back(flow("r", Ipv4(i), 7));
    if (i < 30)
      thirty.ips.insert(Ipv4(i));
  }
  split.push_back(flow("r", Ipv4(5000), 700));
  double ah_fraction = flow_impact(split, big, kDay)[0].fraction;
  double acked_fraction = acked_impact(split, big, thirty, {}, kDay)[0].fraction;
  CHECK(acked_fraction == doctest::Approx(0.3 * ah_fraction));
}
