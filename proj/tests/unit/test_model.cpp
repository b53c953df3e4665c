#include <doctest.h>

#include <cmath>
#include <random>
#include <unordered_set>

#include "darkscan/error.hpp"
#include "darkscan/model.hpp"
#include "test_support.hpp"

using namespace darkscan;
using darkscan::testing::config_for;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected darkscan::Error");
  return ErrorCode::IoError;
}

} // namespace

TEST_CASE("ipv4 and cidr parsing") {
  auto ip = Ipv4::parse("10.1.2.3");
  REQUIRE(ip);
  CHECK(ip->bits() == 0x0A010203u);
  CHECK(ip->str() == "10.1.2.3");
  CHECK(ip->slash24() == Ipv4(10, 1, 2, 0));
  CHECK_FALSE(Ipv4::parse("10.1.2"));
  CHECK_FALSE(Ipv4::parse("10.1.2.256"));
  CHECK_FALSE(Ipv4::parse("10.1.2.3 "));

  auto c = Cidr::parse("10.0.1.77/22");
  REQUIRE(c);
  CHECK(c->network() == Ipv4(10, 0, 0, 0));
  CHECK(c->size() == 1024);
  CHECK(c->last() == Ipv4(10, 0, 3, 255));
  CHECK(c->contains(Ipv4(10, 0, 3, 1)));
  CHECK_FALSE(c->contains(Ipv4(10, 0, 4, 0)));
  CHECK(Cidr::parse("192.0.2.1")->length() == 32);
  CHECK(Cidr::parse("0.0.0.0/0")->size() == (uint64_t{1} << 32));
  CHECK_FALSE(Cidr::parse("10.0.0.0/33"));
}

TEST_CASE("validate_config examples") {
  CHECK(config_for({"10.0.0.0/22"}).darknet_size == 1024);
  CHECK(config_for({"10.0.0.0/24", "10.0.1.0/24"}).darknet_size == 512);
  CHECK(code_of([] { config_for({"10.0.0.0/24", "10.0.0.0/25"}); }) == ErrorCode::OverlappingPrefixes);
  CHECK(code_of([] { validate_config(DarknetConfig{}); }) == ErrorCode::EmptyPrefixList);

  auto bad_fraction = [](double f) {
    DarknetConfig cfg;
    cfg.darknet_prefixes = {*Cidr::parse("10.0.0.0/24")};
    cfg.dispersion_fraction = f;
    return code_of([&] { validate_config(cfg); });
  };
  CHECK(bad_fraction(0.0) == ErrorCode::InvalidFraction);
  CHECK(bad_fraction(1.5) == ErrorCode::InvalidFraction);
  CHECK_NOTHROW(config_for({"10.0.0.0/24"}));

  DarknetConfig small;
  small.darknet_prefixes = {*Cidr::parse("10.0.0.0/25")};
  CHECK(code_of([&] { validate_config(small); }) == ErrorCode::InvalidConfig);

  DarknetConfig alpha;
  alpha.darknet_prefixes = {*Cidr::parse("10.0.0.0/24")};
  alpha.alpha = 1.0;
  CHECK(code_of([&] { validate_config(alpha); }) == ErrorCode::InvalidFraction);
}

TEST_CASE("parse_config reads key = value documents") {
  auto cfg = parse_config("# darknet\n"
                          "darknet_prefixes = 10.0.0.0/24, 10.0.1.0/24\n"
                          "event_timeout_s = 300   # shorter\n"
                          "alpha = 0.01\n"
                          "fingerprint_zmap_ip_id = 1234\n");
  CHECK(cfg.darknet_size == 512);
  CHECK(cfg.event_timeout_s == 300.0);
  CHECK(cfg.alpha == 0.01);
  CHECK(cfg.fingerprints.zmap_ip_id == 1234);
  CHECK(cfg.timeout_us() == 300'000'000);
  CHECK(cfg.in_darknet(Ipv4(10, 0, 1, 9)));
  CHECK_FALSE(cfg.in_darknet(Ipv4(10, 0, 2, 9)));

  CHECK(code_of([] { parse_config("darknet_prefixes = 10.0.0.0/24\nbogus = 1\n"); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([] { parse_config("darknet_prefixes = 10.0.0.0/24\ndarknet_size = 100\n"); }) ==
        ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config("darknet_prefixes 10.0.0.0/24\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_config("darknet_prefixes = 10.0.0.0/24\nalpha = abc\n"); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([] { load_config("/nonexistent/darkscan.conf"); }) == ErrorCode::IoError);
}

TEST_CASE("compute_timeout examples") {
  const double v4 = 4294967296.0;
  // Direct formula: 6.64 * (2^32 / 475000) / 100.
  CHECK(compute_timeout(475000, v4, 100, 6.64) == doctest::Approx(6.64 * v4 / 475000.0 / 100.0));
  CHECK(compute_timeout(475000, v4, 100, 6.64) == doctest::Approx(600.0).epsilon(0.01));
  CHECK(compute_timeout(v4, v4, 1, 1.0) == doctest::Approx(1.0));
  CHECK(compute_timeout(1024, v4, 100, 1.0) == doctest::Approx(41943.04));
}

TEST_CASE("compute_timeout monotonicity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> size(256, 1e7), rate(1, 1e5), safety(0.1, 20);
  for (int i = 0; i < 2000; ++i) {
    double s = size(rng), r = rate(rng), f = safety(rng);
    double base = compute_timeout(s, 4294967296.0, r, f);
    CHECK(compute_timeout(s * 1.5, 4294967296.0, r, f) < base);
    CHECK(compute_timeout(s, 4294967296.0, r * 1.5, f) < base);
    CHECK(compute_timeout(s, 4294967296.0, r, f * 1.5) > base);
  }
}

TEST_CASE("utc days") {
  CHECK(utc_day(0) == 0);
  CHECK(utc_day(kMicrosPerDay - 1) == 0);
  CHECK(utc_day(kMicrosPerDay) == 1);
  CHECK(utc_day(-1) == -1);
  CHECK(format_day(19266) == "2022-10-01");
  CHECK(parse_day("2022-10-01") == 19266);
  CHECK_FALSE(parse_day("2022-02-30"));
  CHECK_FALSE(parse_day("2022-1-01"));
  CHECK(day_start(19266) == 19266 * kMicrosPerDay);
}

TEST_CASE("tcp flags letters") {
  TcpFlags f(TcpFlags::SYN | TcpFlags::ACK);
  CHECK(f.letters() == "SA");
  CHECK_FALSE(f.syn_only_handshake());
  CHECK(TcpFlags(TcpFlags::SYN).syn_only_handshake());
  CHECK(TcpFlags::parse_letters("PA") == TcpFlags(TcpFlags::PSH | TcpFlags::ACK));
  CHECK(TcpFlags::parse_letters("") == TcpFlags(0));
  CHECK_FALSE(TcpFlags::parse_letters("SX"));
}

TEST_CASE("packet meta presence rules") {
  using namespace darkscan::testing;
  auto tcp = tcp_packet(0, Ipv4(1, 2, 3, 4), Ipv4(10, 0, 0, 1), 80);
  CHECK(tcp.well_formed());
  auto bad = tcp;
  bad.tcp_seq.reset();
  CHECK_FALSE(bad.well_formed());
  auto udp = udp_packet(0, Ipv4(1, 2, 3, 4), Ipv4(10, 0, 0, 1), 53);
  CHECK(udp.well_formed());
  udp.tcp_flags = TcpFlags(TcpFlags::SYN);
  CHECK_FALSE(udp.well_formed());
  auto icmp = icmp_packet(0, Ipv4(1, 2, 3, 4), Ipv4(10, 0, 0, 1));
  CHECK(icmp.well_formed());
  icmp.dst_port = 0;
  CHECK_FALSE(icmp.well_formed());
  auto neg = tcp;
  neg.ts = -1;
  CHECK_FALSE(neg.well_formed());
}

TEST_CASE("event invariants and round trip") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5000; ++i) {
    DarknetEvent ev;
    auto type = static_cast<TrafficType>(rng() % 3);
    ev.key = {Ipv4(static_cast<uint32_t>(rng())),
              type == TrafficType::IcmpEchoRequest ? uint16_t{0} : static_cast<uint16_t>(rng()), type};
    ev.start_ts = static_cast<TimestampUs>(rng() % (uint64_t{1} << 52));
    ev.end_ts = ev.start_ts + static_cast<TimestampUs>(rng() % 1'000'000'000);
    ev.pkt_count = 1 + rng() % 100000;
    ev.unique_dst_count = 1 + rng() % std::min<uint64_t>(ev.pkt_count, 1024);
    ev.zmap_pkts = rng() % (ev.pkt_count + 1);
    ev.masscan_pkts = rng() % (ev.pkt_count - ev.zmap_pkts + 1);
    ev.other_pkts = ev.pkt_count - ev.zmap_pkts - ev.masscan_pkts;
    REQUIRE(ev.satisfies_invariants(1024));
    REQUIRE(decode_event(encode_event(ev)) == ev);
  }
}

TEST_CASE("event invariant violations") {
  auto ev = darkscan::testing::make_event(Ipv4(1, 1, 1, 1), 80, TrafficType::TcpSyn, 10, 20, 5, 3);
  CHECK(ev.satisfies_invariants(1024));
  auto e = ev;
  e.end_ts = 5;
  CHECK_FALSE(e.satisfies_invariants(1024));
  e = ev;
  e.unique_dst_count = 6;
  CHECK_FALSE(e.satisfies_invariants(1024));
  e = ev;
  e.other_pkts = 4;
  CHECK_FALSE(e.satisfies_invariants(1024));
  e = ev;
  e.key.traffic_type = TrafficType::IcmpEchoRequest;
  CHECK_FALSE(e.satisfies_invariants(1024));
  CHECK_FALSE(ev.satisfies_invariants(2));
  CHECK_THROWS_AS(decode_event("{\"start_ts\": 1}"), Error);
  CHECK_THROWS_AS(decode_event("not json"), Error);
}

TEST_CASE("verdict round trip") {
  AhVerdict v;
  v.src_ip = Ipv4(192, 0, 2, 1);
  v.day = 19266;
  v.matched_defs.add(Definition::Dispersion);
  v.matched_defs.add(Definition::Ports);
  v.max_dispersion = 0.25;
  v.max_event_pkts = 12345;
  v.distinct_ports = 77;
  v.is_daily = true;
  v.is_active = true;
  CHECK(v.matched_defs.names() == std::vector<std::string>{"D1", "D3"});
  CHECK(decode_verdict(encode_verdict(v)) == v);
  v.acked = true;
  v.acked_org = "OrgA";
  CHECK(decode_verdict(encode_verdict(v)) == v);
}

TEST_CASE("event key equality matches hashing") {
  std::mt19937_64 rng(9);
  std::hash<EventKey> h;
  for (int i = 0; i < 10000; ++i) {
    EventKey a{Ipv4(static_cast<uint32_t>(rng() % 4)), static_cast<uint16_t>(rng() % 3),
               static_cast<TrafficType>(rng() % 3)};
    EventKey b{Ipv4(static_cast<uint32_t>(rng() % 4)), static_cast<uint16_t>(rng() % 3),
               static_cast<TrafficType>(rng() % 3)};
    bool fields = a.src_ip == b.src_ip && a.dst_port == b.dst_port && a.traffic_type == b.traffic_type;
    CHECK((a == b) == fields);
    if (a == b)
      CHECK(h(a) == h(b));
  }
  // Packing is injective over the full field ranges, so distinct keys on a
  // small grid never collide.
  std::unordered_set<size_t> seen;
  for (uint32_t ip = 0; ip < 16; ++ip)
    for (uint16_t port = 0; port < 16; ++port)
      for (int t = 0; t < 3; ++t)
        seen.insert(h(EventKey{Ipv4(ip), port, static_cast<TrafficType>(t)}));
  CHECK(seen.size() == 16 * 16 * 3);
}

TEST_CASE("published thresholds") {
  auto d1 = darknet1_thresholds();
  auto d2 = darknet2_thresholds();
  CHECK(d1.volume_threshold_pkts == 64810);
  CHECK(d1.ports_threshold == 6542);
  CHECK(d2.volume_threshold_pkts == 23491);
  CHECK(d2.ports_threshold == 57410);
  Thresholds zero{0, 5, "x"};
  CHECK_THROWS_AS(zero.validate(), Error);
}

TEST_CASE("flow estimate") {
  FlowRecord f;
  f.sampled_pkts = 5;
  f.sampling_denominator = 1000;
  CHECK(f.estimated_pkts() == 5000);
}
