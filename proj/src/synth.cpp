#include "darkscan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "darkscan/error.hpp"
#include "darkscan/ingest.hpp"
#include "darkscan/pcap.hpp"
#include "darkscan/text.hpp"

namespace darkscan {

using nlohmann::json;

Scenario parse_scenario(std::string_view doc) {
  Scenario s;
  for (auto raw : text::split_lines(doc)) {
    auto line = text::trim(raw.substr(0, raw.find('#')));
    if (line.empty())
      continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ParseError, "scenario: expected key = value: '" + std::string(line) + "'");
    auto key = text::trim(line.substr(0, eq));
    auto value = text::trim(line.substr(eq + 1));
    auto u64 = [&](uint64_t& out) {
      auto v = text::parse_u64(value);
      if (!v)
        throw Error(ErrorCode::ParseError, "scenario: bad integer for " + std::string(key));
      out = *v;
    };
    auto dbl = [&](double& out) {
      auto v = text::parse_double(value);
      if (!v)
        throw Error(ErrorCode::ParseError, "scenario: bad number for " + std::string(key));
      out = *v;
    };
    if (key == "start_ts_us") {
      uint64_t v = 0;
      u64(v);
      s.start_ts = static_cast<TimestampUs>(v);
    } else if (key == "duration_s") dbl(s.duration_s);
    else if (key == "full_coverage_scanners") u64(s.full_coverage_scanners);
    else if (key == "partial_scanners") u64(s.partial_scanners);
    else if (key == "partial_coverage") dbl(s.partial_coverage);
    else if (key == "port_sweepers") u64(s.port_sweepers);
    else if (key == "sweep_ports") u64(s.sweep_ports);
    else if (key == "background_pkts") u64(s.background_pkts);
    else if (key == "backscatter_fraction") dbl(s.backscatter_fraction);
    else if (key == "udp_scanner_fraction") dbl(s.udp_scanner_fraction);
    else if (key == "volume_threshold_pkts") u64(s.volume_threshold_pkts);
    else if (key == "ports_threshold") u64(s.ports_threshold);
    else if (key == "flow_total_pkts") u64(s.flow_total_pkts);
    else if (key == "flow_ah_share") dbl(s.flow_ah_share);
    else if (key == "flow_pkts_per_flow") u64(s.flow_pkts_per_flow);
    else if (key == "flow_sampling") {
      uint64_t v = 0;
      u64(v);
      s.flow_sampling = static_cast<uint32_t>(v);
    } else if (key == "routers") {
      s.routers.clear();
      for (auto r : text::split(value, ','))
        if (!text::trim(r).empty())
          s.routers.emplace_back(text::trim(r));
    } else {
      throw Error(ErrorCode::ParseError, "scenario: unknown key '" + std::string(key) + "'");
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(text::read_file(path)); }

std::string_view to_string(ScannerRole r) {
  switch (r) {
  case ScannerRole::FullCoverage: return "full_coverage";
  case ScannerRole::Partial: return "partial";
  case ScannerRole::PortSweeper: return "port_sweeper";
  }
  return "?";
}

std::string GroundTruth::to_json() const {
  auto ips = [](const std::vector<Ipv4>& v) {
    json arr = json::array();
    for (auto ip : v)
      arr.push_back(ip.str());
    return arr;
  };
  json sources_json = json::array();
  for (const auto& s : sources) {
    sources_json.push_back({
        {"ip", s.ip.str()},
        {"role", to_string(s.role)},
        {"traffic_type", to_string(s.traffic_type)},
        {"tool", to_string(s.tool)},
        {"ports", s.ports},
        {"dsts_per_event", s.dsts_per_event},
        {"pkts_per_event", s.pkts_per_event},
        {"defs", s.defs.names()},
    });
  }
  json j = {
      {"seed", seed},
      {"darknet_size", darknet_size},
      {"thresholds",
       {{"volume_threshold_pkts", thresholds.volume_threshold_pkts},
        {"ports_threshold", thresholds.ports_threshold}}},
      {"darknet_packets", darknet_packets},
      {"sources", sources_json},
      {"d1", ips(d1)},
      {"d2", ips(d2)},
      {"d3", ips(d3)},
      {"flows",
       {{"sampling_denominator", flow_sampling},
        {"true_ah_pkts", flow_true_ah_pkts},
        {"true_total_pkts", flow_true_total_pkts}}},
  };
  return j.dump(2);
}

namespace {

constexpr uint16_t kCommonPorts[] = {22, 23, 80, 443, 445, 1433, 2323, 3389, 5555, 6379, 8080, 8443};

class Generator {
public:
  Generator(const DarknetConfig& cfg, const Scenario& sc, uint64_t seed)
      : cfg_(cfg), sc_(sc), rng_(seed) {
    for (const auto& p : cfg_.darknet_prefixes)
      offsets_.push_back(p.size());
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  }

  Ipv4 dark_ip(uint64_t index) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
    size_t k = static_cast<size_t>(it - offsets_.begin());
    uint64_t base = k == 0 ? 0 : offsets_[k - 1];
    return Ipv4(cfg_.darknet_prefixes[k].network().bits() + static_cast<uint32_t>(index - base));
  }

  Ipv4 fresh_source() {
    std::uniform_int_distribution<uint32_t> dist(0x01000000u, 0xDFFFFFFFu);
    while (true) {
      Ipv4 ip(dist(rng_));
      if (cfg_.in_darknet(ip) || !used_.insert(ip).second)
        continue;
      return ip;
    }
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  uint32_t u32() { return static_cast<uint32_t>(rng_()); }
  std::mt19937_64& rng() { return rng_; }

  /// Evenly spaced timestamps with sub-spacing jitter inside [start, start+span].
  std::vector<TimestampUs> schedule(uint64_t n, TimestampUs window_lo, TimestampUs window_hi) {
    std::vector<TimestampUs> out;
    if (n == 0)
      return out;
    const double window = static_cast<double>(window_hi - window_lo);
    // Keep the widest inter-packet gap well under the event timeout.
    double max_span = 0.5 * static_cast<double>(cfg_.timeout_us()) * static_cast<double>(n);
    double span = std::min(window * uniform(0.3, 0.5), max_span);
    double start = static_cast<double>(window_lo) + uniform(0.0, window - span);
    double step = span / static_cast<double>(n);
    out.reserve(n);
    for (uint64_t i = 0; i < n; ++i)
      out.push_back(static_cast<TimestampUs>(start + step * (static_cast<double>(i) + uniform(0.0, 0.5))));
    return out;
  }

  PacketMeta probe(const SyntheticSource& src, TimestampUs ts, Ipv4 dst, uint16_t port) {
    PacketMeta p;
    p.ts = ts;
    p.src_ip = src.ip;
    p.dst_ip = dst;
    switch (src.traffic_type) {
    case TrafficType::TcpSyn:
      p.protocol = Protocol::Tcp;
      p.src_port = static_cast<uint16_t>(32768 + (u32() % 28000));
      p.dst_port = port;
      p.tcp_flags = TcpFlags(TcpFlags::SYN);
      p.tcp_seq = u32();
      p.pkt_len = 54;
      break;
    case TrafficType::Udp:
      p.protocol = Protocol::Udp;
      p.src_port = static_cast<uint16_t>(32768 + (u32() % 28000));
      p.dst_port = port;
      p.pkt_len = 42;
      break;
    case TrafficType::IcmpEchoRequest:
      p.protocol = Protocol::Icmp;
      p.icmp_type = 8;
      p.pkt_len = 42;
      break;
    }
    p.ip_id = ip_id_for(src.tool, p);
    return p;
  }

  uint16_t ip_id_for(ScanTool tool, const PacketMeta& p) {
    const auto zmap_id = cfg_.fingerprints.zmap_ip_id;
    switch (tool) {
    case ScanTool::ZMap:
      return zmap_id;
    case ScanTool::Masscan:
      return static_cast<uint16_t>((p.dst_ip.bits() ^ uint32_t{*p.dst_port} ^ *p.tcp_seq) & 0xFFFF);
    case ScanTool::Other:
      break;
    }
    while (true) {
      auto id = static_cast<uint16_t>(u32());
      PacketMeta probe = p;
      probe.ip_id = id;
      if (fingerprint_packet(probe, cfg_.fingerprints) == ScanTool::Other)
        return id;
    }
  }

  ScanTool pick_tool(TrafficType type) {
    double u = uniform(0.0, 1.0);
    if (u < 0.4)
      return ScanTool::ZMap;
    if (u < 0.7 && type == TrafficType::TcpSyn)
      return ScanTool::Masscan;
    return ScanTool::Other;
  }

  const DarknetConfig& cfg_;
  const Scenario& sc_;
  std::mt19937_64 rng_;
  std::vector<uint64_t> offsets_;
  std::unordered_set<Ipv4> used_;
};

} // namespace

SampledFlowTrial simulate_sampled_flows(std::span<const Ipv4> ah, std::span<const Ipv4> others,
                                        uint64_t total_pkts, double ah_share, uint32_t k,
                                        uint64_t pkts_per_flow, Day day,
                                        std::span<const std::string> routers, std::mt19937_64& rng) {
  SampledFlowTrial trial;
  if (routers.empty() || k == 0 || pkts_per_flow == 0)
    throw Error(ErrorCode::InvalidConfig, "flow simulation needs routers, k >= 1, flow size >= 1");
  uint64_t ah_pkts = ah.empty() ? 0 : static_cast<uint64_t>(std::llround(static_cast<double>(total_pkts) * ah_share));
  if (others.empty())
    ah_pkts = total_pkts;
  trial.true_total_pkts = total_pkts;
  trial.true_ah_pkts = ah_pkts;
  const double p = 1.0 / static_cast<double>(k);
  std::uniform_int_distribution<TimestampUs> when(day_start(day), day_start(day + 1) - 1);
  std::uniform_int_distribution<size_t> which_router(0, routers.size() - 1);

  auto emit_population = [&](std::span<const Ipv4> sources, uint64_t budget, bool aggressive) {
    if (sources.empty() || budget == 0)
      return;
    uint64_t per_source = budget / sources.size();
    uint64_t remainder = budget % sources.size();
    for (size_t i = 0; i < sources.size(); ++i) {
      uint64_t left = per_source + (i < remainder ? 1 : 0);
      while (left > 0) {
        uint64_t n = std::min(left, pkts_per_flow);
        left -= n;
        std::binomial_distribution<uint64_t> thin(n, p);
        uint64_t sampled = thin(rng);
        if (sampled == 0)
          continue;
        FlowRecord f;
        f.router_id = routers[which_router(rng)];
        f.ts = when(rng);
        f.direction = Direction::Ingress;
        f.src_ip = sources[i];
        f.dst_ip = Ipv4(static_cast<uint32_t>(rng()));
        f.sampled_pkts = sampled;
        f.sampling_denominator = k;
        if (aggressive) {
          f.protocol = Protocol::Tcp;
          f.src_port = static_cast<uint16_t>(40000 + rng() % 20000);
          f.dst_port = kCommonPorts[rng() % std::size(kCommonPorts)];
          f.tcp_flags = TcpFlags(TcpFlags::SYN);
        } else if (rng() % 4 == 0) {
          f.protocol = Protocol::Udp;
          f.src_port = 53;
          f.dst_port = static_cast<uint16_t>(1024 + rng() % 60000);
        } else {
          f.protocol = Protocol::Tcp;
          f.src_port = 443;
          f.dst_port = static_cast<uint16_t>(1024 + rng() % 60000);
          f.tcp_flags = TcpFlags(TcpFlags::ACK | TcpFlags::PSH);
        }
        trial.flows.push_back(std::move(f));
      }
    }
  };
  emit_population(ah, ah_pkts, true);
  emit_population(others, total_pkts - ah_pkts, false);
  std::stable_sort(trial.flows.begin(), trial.flows.end(),
                   [](const FlowRecord& a, const FlowRecord& b) { return a.ts < b.ts; });
  return trial;
}

SyntheticDataset generate(const DarknetConfig& cfg, const Scenario& sc, uint64_t seed) {
  if (sc.duration_s <= 0)
    throw Error(ErrorCode::InvalidConfig, "scenario duration_s must be positive");
  const TimestampUs lo = sc.start_ts;
  const TimestampUs hi = sc.start_ts + seconds_to_us(sc.duration_s);
  if (utc_day(lo) != utc_day(hi - 1))
    throw Error(ErrorCode::InvalidConfig, "scenario window must fit inside one UTC day");
  if (sc.partial_coverage < 0 || sc.partial_coverage > 1)
    throw Error(ErrorCode::InvalidConfig, "partial_coverage must be in [0,1]");

  Generator gen(cfg, sc, seed);
  SyntheticDataset data;
  auto& truth = data.truth;
  truth.seed = seed;
  truth.darknet_size = cfg.darknet_size;
  truth.thresholds = {sc.volume_threshold_pkts, sc.ports_threshold, "synthetic"};
  truth.flow_sampling = sc.flow_sampling;
  const uint64_t size = cfg.darknet_size;
  const double d1_need = cfg.dispersion_fraction * static_cast<double>(size);

  std::vector<uint64_t> all_dark(size);
  std::iota(all_dark.begin(), all_dark.end(), 0);

  auto finish_source = [&](SyntheticSource& s) {
    if (static_cast<double>(s.dsts_per_event) >= d1_need)
      s.defs.add(Definition::Dispersion);
    if (s.pkts_per_event >= sc.volume_threshold_pkts)
      s.defs.add(Definition::Volume);
    if (s.traffic_type != TrafficType::IcmpEchoRequest && s.ports >= sc.ports_threshold)
      s.defs.add(Definition::Ports);
    truth.sources.push_back(s);
  };
  auto scan_type = [&] {
    return gen.uniform(0.0, 1.0) < sc.udp_scanner_fraction ? TrafficType::Udp : TrafficType::TcpSyn;
  };

  auto targeted_scan = [&](ScannerRole role, uint64_t targets) {
    SyntheticSource s;
    s.ip = gen.fresh_source();
    s.role = role;
    s.traffic_type = role == ScannerRole::FullCoverage ? TrafficType::TcpSyn : scan_type();
    s.tool = gen.pick_tool(s.traffic_type);
    s.ports = 1;
    s.dsts_per_event = targets;
    s.pkts_per_event = targets;
    uint16_t port = kCommonPorts[gen.u32() % std::size(kCommonPorts)];
    std::vector<uint64_t> picks;
    if (targets == size) {
      picks = all_dark;
      std::shuffle(picks.begin(), picks.end(), gen.rng());
    } else {
      std::sample(all_dark.begin(), all_dark.end(), std::back_inserter(picks), targets, gen.rng());
      std::shuffle(picks.begin(), picks.end(), gen.rng());
    }
    auto times = gen.schedule(targets, lo, hi);
    for (uint64_t i = 0; i < targets; ++i)
      data.packets.push_back(gen.probe(s, times[i], gen.dark_ip(picks[i]), port));
    if (targets > 0)
      finish_source(s);
  };

  for (uint64_t i = 0; i < sc.full_coverage_scanners; ++i)
    targeted_scan(ScannerRole::FullCoverage, size);
  const auto partial_targets = static_cast<uint64_t>(std::floor(sc.partial_coverage * static_cast<double>(size)));
  for (uint64_t i = 0; i < sc.partial_scanners; ++i)
    targeted_scan(ScannerRole::Partial, std::max<uint64_t>(1, partial_targets));

  for (uint64_t i = 0; i < sc.port_sweepers; ++i) {
    SyntheticSource s;
    s.ip = gen.fresh_source();
    s.role = ScannerRole::PortSweeper;
    s.traffic_type = scan_type();
    s.tool = gen.pick_tool(s.traffic_type);
    s.ports = std::min<uint64_t>(sc.sweep_ports, 65535);
    s.dsts_per_event = 1;
    s.pkts_per_event = 1;
    auto first_port = static_cast<uint16_t>(1 + gen.u32() % (65536 - s.ports));
    auto times = gen.schedule(s.ports, lo, hi);
    for (uint64_t k = 0; k < s.ports; ++k) {
      Ipv4 dst = gen.dark_ip(gen.u32() % size);
      data.packets.push_back(gen.probe(s, times[k], dst, static_cast<uint16_t>(first_port + k)));
    }
    if (s.ports > 0)
      finish_source(s);
  }

  // Background: unique sources with up to four packets each.
  std::uniform_int_distribution<TimestampUs> anytime(lo, hi - 1);
  uint64_t produced = 0;
  while (produced < sc.background_pkts) {
    Ipv4 src = gen.fresh_source();
    uint64_t n = std::min<uint64_t>(1 + gen.u32() % 4, sc.background_pkts - produced);
    for (uint64_t k = 0; k < n; ++k, ++produced) {
      PacketMeta p;
      p.ts = anytime(gen.rng());
      p.src_ip = src;
      p.dst_ip = gen.dark_ip(gen.u32() % size);
      p.ip_id = static_cast<uint16_t>(gen.u32());
      bool backscatter = gen.uniform(0.0, 1.0) < sc.backscatter_fraction;
      uint32_t kind = gen.u32() % 3;
      if (kind == 0) {
        p.protocol = Protocol::Tcp;
        p.src_port = static_cast<uint16_t>(1 + gen.u32() % 65535);
        p.dst_port = static_cast<uint16_t>(1 + gen.u32() % 65535);
        p.tcp_seq = gen.u32();
        p.tcp_flags = TcpFlags(backscatter ? (TcpFlags::SYN | TcpFlags::ACK) : TcpFlags::SYN);
        p.pkt_len = 54;
      } else if (kind == 1 && !backscatter) {
        p.protocol = Protocol::Udp;
        p.src_port = static_cast<uint16_t>(1 + gen.u32() % 65535);
        p.dst_port = static_cast<uint16_t>(1 + gen.u32() % 65535);
        p.pkt_len = 42;
      } else {
        p.protocol = Protocol::Icmp;
        p.icmp_type = backscatter ? 0 : 8;
        p.pkt_len = 42;
      }
      data.packets.push_back(p);
    }
  }

  std::stable_sort(data.packets.begin(), data.packets.end(),
                   [](const PacketMeta& a, const PacketMeta& b) { return a.ts < b.ts; });
  truth.darknet_packets = data.packets.size();

  for (const auto& s : truth.sources) {
    if (s.defs.has(Definition::Dispersion)) truth.d1.push_back(s.ip);
    if (s.defs.has(Definition::Volume)) truth.d2.push_back(s.ip);
    if (s.defs.has(Definition::Ports)) truth.d3.push_back(s.ip);
  }
  for (auto* v : {&truth.d1, &truth.d2, &truth.d3})
    std::sort(v->begin(), v->end());

  std::vector<Ipv4> ah;
  for (const auto& s : truth.sources)
    if (!s.defs.empty())
      ah.push_back(s.ip);
  std::sort(ah.begin(), ah.end());
  std::vector<Ipv4> benign;
  for (int i = 0; i < 200; ++i)
    benign.push_back(gen.fresh_source());
  if (sc.flow_total_pkts > 0) {
    auto trial = simulate_sampled_flows(ah, benign, sc.flow_total_pkts, sc.flow_ah_share,
                                        sc.flow_sampling, sc.flow_pkts_per_flow, utc_day(lo),
                                        sc.routers, gen.rng());
    data.flows = std::move(trial.flows);
    truth.flow_true_ah_pkts = trial.true_ah_pkts;
    truth.flow_true_total_pkts = trial.true_total_pkts;
  }
  return data;
}

void write_dataset(const SyntheticDataset& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  PcapWriter pcap(dir + "/darknet.pcap");
  for (const auto& p : data.packets)
    pcap.write(p);
  pcap.close();

  std::ofstream manifest(dir + "/manifest.json", std::ios::trunc);
  manifest << data.truth.to_json() << '\n';
  std::ofstream flows(dir + "/flows.csv", std::ios::trunc);
  flows << kFlowCsvHeader << '\n';
  for (const auto& f : data.flows)
    flows << format_flow_csv(f) << '\n';
  if (!manifest || !flows)
    throw Error(ErrorCode::IoError, "failed writing synthetic dataset to " + dir);
}

} // namespace darkscan
