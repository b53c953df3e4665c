#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "darkscan/fingerprint.hpp"
#include "darkscan/model.hpp"

namespace darkscan {

/// Parameters for a reproducible synthetic darknet + ISP workload.
struct Scenario {
  TimestampUs start_ts = 1'664'582'400LL * kMicrosPerSecond; // 2022-10-01T00:00:00Z
  double duration_s = 3600.0;
  /// Each probes every dark IP once on one port.
  uint64_t full_coverage_scanners = 5;
  /// Each probes `partial_coverage` of the dark IPs on one port.
  uint64_t partial_scanners = 40;
  double partial_coverage = 0.05;
  /// Each probes `sweep_ports` ports, one dark IP per port.
  uint64_t port_sweepers = 5;
  uint64_t sweep_ports = 2000;
  /// One-off noise packets from unique sources, at most 4 per source, with a
  /// `backscatter_fraction` share of non-scanning response packets.
  uint64_t background_pkts = 2000;
  double backscatter_fraction = 0.2;
  double udp_scanner_fraction = 0.2;
  /// Thresholds the manifest's D2/D3 ground truth is computed against.
  uint64_t volume_threshold_pkts = 1000;
  uint64_t ports_threshold = 1000;
  /// Synthetic ISP flows: pre-sampling packet budget, AH share, 1:k sampling.
  uint64_t flow_total_pkts = 1'000'000;
  double flow_ah_share = 0.10;
  uint32_t flow_sampling = 1000;
  uint64_t flow_pkts_per_flow = 1000;
  std::vector<std::string> routers = {"router-1", "router-2", "router-3"};
};

Scenario parse_scenario(std::string_view doc);
Scenario load_scenario(const std::string& path);

enum class ScannerRole { FullCoverage, Partial, PortSweeper };

std::string_view to_string(ScannerRole r);

struct SyntheticSource {
  Ipv4 ip;
  ScannerRole role = ScannerRole::Partial;
  TrafficType traffic_type = TrafficType::TcpSyn;
  ScanTool tool = ScanTool::Other;
  uint64_t ports = 1;
  uint64_t dsts_per_event = 1;
  uint64_t pkts_per_event = 1;
  DefinitionSet defs;
};

struct GroundTruth {
  uint64_t seed = 0;
  uint64_t darknet_size = 0;
  Thresholds thresholds;
  std::vector<SyntheticSource> sources;
  std::vector<Ipv4> d1, d2, d3; // ascending
  uint64_t darknet_packets = 0;
  uint32_t flow_sampling = 1;
  uint64_t flow_true_ah_pkts = 0;
  uint64_t flow_true_total_pkts = 0;

  std::string to_json() const;
};

struct SyntheticDataset {
  std::vector<PacketMeta> packets; // time-ordered
  std::vector<FlowRecord> flows;
  GroundTruth truth;
};

/// Everything is a pure function of (cfg, scenario, seed).
SyntheticDataset generate(const DarknetConfig& cfg, const Scenario& scenario, uint64_t seed);

/// Writes `<dir>/darknet.pcap`, `<dir>/manifest.json`, `<dir>/flows.csv`.
void write_dataset(const SyntheticDataset& data, const std::string& dir);

struct SampledFlowTrial {
  std::vector<FlowRecord> flows;
  uint64_t true_ah_pkts = 0;
  uint64_t true_total_pkts = 0;
};

/// Thins a ground-truth packet stream split into flows of `pkts_per_flow`
/// packets: each packet survives independently with probability 1/k, which
/// makes each flow's exported count Binomial(n, 1/k). Flows with no surviving
/// packet are not exported. `ah` sources carry `ah_share` of the packets.
SampledFlowTrial simulate_sampled_flows(std::span<const Ipv4> ah, std::span<const Ipv4> others,
                                        uint64_t total_pkts, double ah_share, uint32_t k,
                                        uint64_t pkts_per_flow, Day day,
                                        std::span<const std::string> routers, std::mt19937_64& rng);

} // namespace darkscan
