#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "darkscan/detector.hpp"
#include "darkscan/enrichment.hpp"
#include "darkscan/error.hpp"
#include "darkscan/event_builder.hpp"
#include "darkscan/fingerprint.hpp"
#include "darkscan/impact.hpp"
#include "darkscan/ingest.hpp"
#include "darkscan/pcap.hpp"
#include "darkscan/report.hpp"
#include "darkscan/synth.hpp"
#include "darkscan/text.hpp"

namespace darkscan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::string out_dir = ".";
  uint64_t seed = 1;
};

/// Files a command creates; removed again unless the command commits.
class Outputs {
public:
  explicit Outputs(std::string dir) : dir_(std::move(dir)) {}
  Outputs(const Outputs&) = delete;
  Outputs& operator=(const Outputs&) = delete;
  ~Outputs() {
    if (committed_)
      return;
    std::error_code ec;
    for (const auto& p : paths_)
      fs::remove(p, ec);
  }

  std::string path(const std::string& name) {
    if (!dir_created_) {
      fs::create_directories(dir_);
      dir_created_ = true;
    }
    auto p = (fs::path(dir_) / name).string();
    paths_.push_back(p);
    return p;
  }

  void commit() { committed_ = true; }

private:
  std::string dir_;
  std::vector<std::string> paths_;
  bool dir_created_ = false;
  bool committed_ = false;
};

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path))
    throw Error(ErrorCode::IoError, "input file not found: " + path);
}

DarknetConfig require_config(const Globals& g) {
  if (g.config.empty())
    throw Error(ErrorCode::InvalidConfig, "--config <path> is required for this command");
  require_file(g.config);
  return load_config(g.config);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out)
    throw Error(ErrorCode::IoError, "failed writing " + path);
}

struct AckedInputs {
  std::string ips;
  std::string keywords;
  std::string rdns;

  bool any() const { return !ips.empty() || !keywords.empty(); }
};

void add_acked_options(CLI::App* cmd, AckedInputs& in) {
  cmd->add_option("--acked-ips", in.ips, "acknowledged scanner IP list (ip[,org] per line)");
  cmd->add_option("--acked-keywords", in.keywords, "acknowledged scanner rDNS keywords (keyword,org)");
  cmd->add_option("--rdns", in.rdns, "precomputed reverse DNS map (ip,fqdn)");
}

struct AckedTables {
  AckedList acked;
  RdnsMap rdns;
  uint64_t malformed = 0;
};

AckedTables load_acked_tables(const AckedInputs& in) {
  AckedTables t;
  for (const auto* p : {&in.ips, &in.keywords, &in.rdns})
    if (!p->empty())
      require_file(*p);
  if (in.any()) {
    auto loaded = in.ips.empty() ? parse_acked("", text::read_file(in.keywords))
                                 : load_acked(in.ips, in.keywords);
    t.acked = std::move(loaded.value);
    t.malformed += loaded.malformed_lines;
  }
  if (!in.rdns.empty()) {
    auto loaded = load_rdns(in.rdns);
    t.rdns = std::move(loaded.value);
    t.malformed += loaded.malformed_lines;
  }
  return t;
}

// ---------------------------------------------------------------------------

int cmd_events(const Globals& g, const std::vector<std::string>& pcaps, const std::string& output,
               std::ostream& out) {
  auto cfg = require_config(g);
  for (const auto& p : pcaps)
    require_file(p);
  Outputs outputs(g.out_dir);
  const auto log_path = outputs.path(output);
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log)
    throw Error(ErrorCode::IoError, "cannot create " + log_path);

  EventBuilder builder(cfg);
  PcapStats totals;
  std::vector<DarknetEvent> closed;
  for (const auto& path : pcaps) {
    PcapReader reader(path);
    while (auto p = reader.next()) {
      closed.clear();
      builder.ingest(*p, closed);
      for (const auto& ev : closed)
        log << encode_event(ev) << '\n';
    }
    const auto& s = reader.stats();
    totals.frames += s.frames;
    totals.packets += s.packets;
    totals.non_ipv4 += s.non_ipv4;
    totals.fragments += s.fragments;
    totals.truncated += s.truncated;
  }
  for (const auto& ev : builder.flush())
    log << encode_event(ev) << '\n';
  log.close();
  if (!log)
    throw Error(ErrorCode::IoError, "failed writing " + log_path);

  const auto& st = builder.stats();
  out << "events: frames=" << totals.frames << " packets_read=" << totals.packets
      << " skipped_non_ipv4=" << totals.non_ipv4 << " skipped_fragments=" << totals.fragments
      << " truncated=" << totals.truncated << " dropped=" << st.dropped()
      << " (non_scanning=" << st.non_scanning << " outside_darknet=" << st.outside_darknet << ")"
      << " out_of_order=" << st.out_of_order << " events_emitted=" << st.events_emitted
      << " event_pkts=" << st.pkts_emitted << '\n';
  outputs.commit();
  return st.events_emitted == 0 ? kExitEmpty : kExitOk;
}

// ---------------------------------------------------------------------------

struct DetectOptions {
  std::string event_log;
  bool fixed = false;
  std::string dataset;
  uint64_t volume_threshold = 0;
  uint64_t ports_threshold = 0;
  AckedInputs acked;
};

json thresholds_json(const DetectionResult& r) {
  return {{"mode", r.mode == ThresholdMode::Fixed ? "fixed" : "two-pass"},
          {"dataset_label", r.thresholds.dataset_label},
          {"volume_threshold_pkts", r.thresholds.volume_threshold_pkts},
          {"ports_threshold", r.thresholds.ports_threshold}};
}

json output_metadata() {
  return {
      {"day_boundary", "UTC"},
      {"ports_definition_identity", "distinct (port, protocol) pairs over tcp_syn and udp events"},
      {"threshold_comparison", "inclusive (>=)"},
      {"udp_fingerprint", "non-ZMap UDP probes are labeled other; the Masscan rule is TCP-only"},
  };
}

int cmd_detect(const Globals& g, const DetectOptions& opt, std::ostream& out) {
  auto cfg = require_config(g);
  require_file(opt.event_log);
  auto tables = load_acked_tables(opt.acked);
  auto events = read_event_log(opt.event_log);

  std::optional<Thresholds> fixed;
  if (opt.fixed) {
    Thresholds th;
    if (opt.dataset == "darknet-1")
      th = darknet1_thresholds();
    else if (opt.dataset == "darknet-2")
      th = darknet2_thresholds();
    else if (!opt.dataset.empty())
      throw Error(ErrorCode::InvalidConfig, "unknown --dataset '" + opt.dataset + "'");
    else if (opt.volume_threshold == 0 || opt.ports_threshold == 0)
      throw Error(ErrorCode::InvalidConfig,
                  "--fixed-thresholds needs --dataset or both --volume-threshold and --ports-threshold");
    else
      th.dataset_label = "fixed";
    if (opt.volume_threshold > 0)
      th.volume_threshold_pkts = opt.volume_threshold;
    if (opt.ports_threshold > 0)
      th.ports_threshold = opt.ports_threshold;
    fixed = th;
  }
  auto result = detect(events, cfg, opt.fixed ? ThresholdMode::Fixed : ThresholdMode::TwoPass, fixed);
  if (opt.acked.any()) {
    for (auto& v : result.verdicts) {
      auto m = match_acked(v.src_ip, tables.acked, tables.rdns);
      v.acked = m.acked;
      v.acked_org = m.org;
    }
  }

  Outputs outputs(g.out_dir);
  write_verdicts(outputs.path("verdicts.jsonl"), result.verdicts);
  write_blocklist(outputs.path("blocklist_d1.txt"), result.d1);
  write_blocklist(outputs.path("blocklist_d2.txt"), result.d2);
  write_blocklist(outputs.path("blocklist_d3.txt"), result.d3);
  write_blocklist(outputs.path("blocklist.txt"), result.all);
  write_sidecar(outputs.path("blocklist.jsonl"), build_sidecar(result, cfg.darknet_size));
  write_json(outputs.path("thresholds.json"), thresholds_json(result));
  write_json(outputs.path("metadata.json"), output_metadata());

  out << "detect: events=" << events.size() << " mode="
      << (opt.fixed ? "fixed" : "two-pass") << " volume_threshold=" << result.thresholds.volume_threshold_pkts
      << " ports_threshold=" << result.thresholds.ports_threshold << '\n';
  out << "D1=" << result.d1.size() << " D2=" << result.d2.size() << " D3=" << result.d3.size()
      << " union=" << result.all.size() << '\n';
  const std::pair<const char*, std::pair<const IpSet*, const IpSet*>> pairs[] = {
      {"D1-D2", {&result.d1, &result.d2}},
      {"D2-D3", {&result.d2, &result.d3}},
      {"D1-D3", {&result.d1, &result.d3}},
  };
  for (const auto& [name, sets] : pairs) {
    out << "jaccard " << name << '=';
    if (sets.first->empty() && sets.second->empty())
      out << "n/a";
    else
      out << format_ratio(jaccard(*sets.first, *sets.second));
    out << '\n';
  }
  outputs.commit();
  return result.all.empty() ? kExitEmpty : kExitOk;
}

// ---------------------------------------------------------------------------

struct ImpactOptions {
  std::vector<std::string> flows;
  std::string blocklist;
  std::string day;
  std::string pcap;
  std::string events;
  double bin_width_s = 1.0;
  uint64_t slash24 = 1;
  AckedInputs acked;
};

int cmd_impact(const Globals& g, const ImpactOptions& opt, std::ostream& out) {
  require_file(opt.blocklist);
  for (const auto& f : opt.flows)
    require_file(f);
  if (!opt.pcap.empty())
    require_file(opt.pcap);
  if (!opt.events.empty())
    require_file(opt.events);
  auto tables = load_acked_tables(opt.acked);
  auto ah = read_blocklist(opt.blocklist);

  std::vector<FlowRecord> flows;
  uint64_t invalid = 0;
  for (const auto& path : opt.flows) {
    auto format = flow_format_for_path(path);
    if (!format)
      throw Error(ErrorCode::SchemaMismatch, path + ": expected a .csv or .jsonl flow file");
    auto stats = scan_flows(path, *format, [&](const FlowRecord& f) { flows.push_back(f); });
    invalid += stats.invalid_rows;
  }

  std::set<Day> days;
  if (!opt.day.empty()) {
    auto d = parse_day(opt.day);
    if (!d)
      throw Error(ErrorCode::ParseError, "bad --day '" + opt.day + "' (want YYYY-MM-DD)");
    days.insert(*d);
  } else {
    for (const auto& f : flows)
      days.insert(utc_day(f.ts));
  }

  Outputs outputs(g.out_dir);
  if (!opt.flows.empty()) {
    std::vector<std::pair<Day, std::vector<RouterImpact>>> all;
    std::vector<std::pair<Day, std::vector<RouterImpact>>> acked_rows;
    for (Day d : days) {
      all.emplace_back(d, flow_impact(flows, ah, d));
      if (opt.acked.any())
        acked_rows.emplace_back(d, acked_impact(flows, ah, tables.acked, tables.rdns, d));
    }
    auto write_rows = [&](const std::string& name, const auto& rows) {
      auto path = outputs.path(name);
      std::ofstream f(path, std::ios::trunc);
      f << "vantage_id,date,ah_pkts_est,total_pkts_est,fraction\n";
      for (const auto& [d, routers] : rows)
        for (const auto& r : routers)
          f << r.router_id << ',' << format_day(d) << ',' << r.ah_pkts_est << ',' << r.total_pkts_est
            << ',' << format_ratio(r.fraction) << '\n';
      if (!f)
        throw Error(ErrorCode::IoError, "failed writing " + path);
    };
    write_rows("impact.csv", all);
    if (opt.acked.any())
      write_rows("impact_acked.csv", acked_rows);
    if (!ah.empty())
      write_presence_csv(outputs.path("presence.csv"), ah_presence(flows, ah));
    for (const auto& [d, routers] : all)
      for (const auto& r : routers)
        out << "impact " << format_day(d) << ' ' << r.router_id << " ah_pkts_est=" << r.ah_pkts_est
            << " total_pkts_est=" << r.total_pkts_est << " fraction=" << format_ratio(r.fraction) << '\n';
  }

  std::vector<std::pair<std::string, ProtocolBreakdown>> columns;
  if (!opt.events.empty()) {
    auto events = read_event_log(opt.events);
    columns.emplace_back("darknet", protocol_breakdown(std::span<const DarknetEvent>(events), ah));
  }
  if (!opt.flows.empty())
    columns.emplace_back("flow", protocol_breakdown(std::span<const FlowRecord>(flows), ah));
  if (!columns.empty())
    write_protocol_csv(outputs.path("protocol.csv"), columns);

  if (!opt.pcap.empty()) {
    StreamImpactAccumulator acc(ah, opt.bin_width_s, fs::path(opt.pcap).stem().string());
    PcapReader reader(opt.pcap);
    while (auto p = reader.next())
      acc.add(*p);
    auto points = derive_fractions(acc.series());
    auto rates = normalize_per_slash24(acc.series(), opt.slash24);
    write_series_csv(outputs.path("series.csv"), points, rates);
    auto flagged = high_load_coincidence(points);
    auto path = outputs.path("high_load.csv");
    std::ofstream f(path, std::ios::trunc);
    f << "bin_start_ts,total_pkts,inst_fraction\n";
    for (size_t i : flagged)
      f << points[i].bin_start_ts << ',' << points[i].total_pkts << ','
        << format_ratio(points[i].inst_fraction) << '\n';
    if (!points.empty())
      out << "stream bins=" << points.size() << " final_cum_fraction="
          << format_ratio(points.back().cum_fraction) << " high_load_bins=" << flagged.size() << '\n';
  }
  if (invalid > 0)
    out << "impact: skipped " << invalid << " invalid flow rows\n";
  outputs.commit();
  return ah.empty() ? kExitEmpty : kExitOk;
}

// ---------------------------------------------------------------------------

struct ReportOptions {
  std::string events;
  std::string verdicts;
  std::string asn_map;
  std::string tags;
  AckedInputs acked;
  size_t top_ports = 25;
  size_t top_tags = 20;
  std::string origin_definition = "D1";
  bool anonymize = false;
};

int cmd_report(const Globals& g, const ReportOptions& opt, std::ostream& out) {
  require_file(opt.events);
  require_file(opt.verdicts);
  if (!opt.asn_map.empty())
    require_file(opt.asn_map);
  if (!opt.tags.empty())
    require_file(opt.tags);
  auto tables = load_acked_tables(opt.acked);
  auto events = read_event_log(opt.events);
  auto verdicts = read_verdicts(opt.verdicts);
  AsnMap asn_map;
  if (!opt.asn_map.empty())
    asn_map = load_asn_map(opt.asn_map).value;

  IpSet d1, d2, d3, all;
  for (const auto& v : verdicts) {
    if (v.matched_defs.has(Definition::Dispersion)) d1.insert(v.src_ip);
    if (v.matched_defs.has(Definition::Volume)) d2.insert(v.src_ip);
    if (v.matched_defs.has(Definition::Ports)) d3.insert(v.src_ip);
    all.insert(v.src_ip);
  }
  const IpSet* origin_set = &all;
  if (opt.origin_definition == "D1") origin_set = &d1;
  else if (opt.origin_definition == "D2") origin_set = &d2;
  else if (opt.origin_definition == "D3") origin_set = &d3;
  else if (opt.origin_definition != "all")
    throw Error(ErrorCode::InvalidConfig, "--origin-definition must be D1, D2, D3 or all");

  std::map<Ipv4, uint64_t> pkts_by_ip;
  std::vector<DarknetEvent> ah_events;
  for (const auto& ev : events) {
    if (!all.count(ev.key.src_ip))
      continue;
    pkts_by_ip[ev.key.src_ip] += ev.pkt_count;
    ah_events.push_back(ev);
  }
  IpSet acked = opt.acked.any() ? acked_subset(all, tables.acked, tables.rdns) : IpSet{};

  Outputs outputs(g.out_dir);
  json summary = {{"ah", all.size()}, {"d1", d1.size()}, {"d2", d2.size()}, {"d3", d3.size()},
                  {"acked", acked.size()}, {"metadata", output_metadata()}};

  write_fingerprint_csv(outputs.path("ports.csv"), port_fingerprint_table(ah_events, opt.top_ports));
  write_intersections_csv(outputs.path("intersections.csv"), definition_intersections(d1, d2, d3, asn_map));
  auto origins = origin_table(*origin_set, pkts_by_ip, asn_map, acked);
  if (opt.anonymize)
    anonymize_origins(origins);
  write_origin_csv(outputs.path("origins.csv"), origins);
  if (!pkts_by_ip.empty()) {
    auto curve = zipf_curve(pkts_by_ip);
    write_zipf_csv(outputs.path("zipf.csv"), curve);
    summary["top_1pct_pkt_share"] = top_share(curve, 0.01);
  }
  if (!opt.tags.empty()) {
    auto tags = load_tags(opt.tags).value;
    IpSet remaining;
    std::set_difference(all.begin(), all.end(), acked.begin(), acked.end(),
                        std::inserter(remaining, remaining.end()));
    if (!remaining.empty()) {
      auto joined = tag_join(all, tags, opt.top_tags, acked);
      write_tag_csvs(outputs.path("tags_histogram.csv"), outputs.path("tags_top.csv"), joined);
      summary["tag_overlap_fraction"] = joined.overlap_fraction;
    }
  }
  write_json(outputs.path("summary.json"), summary);
  out << "report: ah=" << all.size() << " d1=" << d1.size() << " d2=" << d2.size()
      << " d3=" << d3.size() << " acked=" << acked.size() << " origin_rows=" << origins.size() << '\n';
  outputs.commit();
  return all.empty() ? kExitEmpty : kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Globals& g, const std::string& scenario_path, std::ostream& out) {
  auto cfg = require_config(g);
  Scenario sc;
  if (!scenario_path.empty()) {
    require_file(scenario_path);
    sc = load_scenario(scenario_path);
  }
  auto data = generate(cfg, sc, g.seed);
  Outputs outputs(g.out_dir);
  // Register the names so a failed write cleans up after itself.
  outputs.path("darknet.pcap");
  outputs.path("manifest.json");
  outputs.path("flows.csv");
  write_dataset(data, g.out_dir);
  out << "synth: seed=" << g.seed << " packets=" << data.packets.size()
      << " sources=" << data.truth.sources.size() << " d1=" << data.truth.d1.size()
      << " d2=" << data.truth.d2.size() << " d3=" << data.truth.d3.size()
      << " flows=" << data.flows.size() << '\n';
  outputs.commit();
  return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"darkscan: darknet scan-event analytics and aggressive-scanner feeds"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "darknet configuration file (key = value)");
  app.add_option("--out-dir", g.out_dir, "directory for output files");
  app.add_option("--seed", g.seed, "random seed (synth)");

  auto* events_cmd = app.add_subcommand("events", "reconstruct darknet events from pcap captures");
  std::vector<std::string> pcaps;
  std::string events_output = "events.jsonl";
  events_cmd->add_option("pcap", pcaps, "classic pcap files, time-ordered")->required();
  events_cmd->add_option("--output", events_output, "event log file name inside --out-dir");

  auto* detect_cmd = app.add_subcommand("detect", "classify aggressive scanners and emit blocklists");
  DetectOptions dopt;
  detect_cmd->add_option("event_log", dopt.event_log, "event log (JSON lines)")->required();
  detect_cmd->add_flag("--fixed-thresholds", dopt.fixed, "streaming mode with frozen thresholds");
  detect_cmd->add_option("--dataset", dopt.dataset, "published thresholds: darknet-1 or darknet-2");
  detect_cmd->add_option("--volume-threshold", dopt.volume_threshold, "packets per event");
  detect_cmd->add_option("--ports-threshold", dopt.ports_threshold, "distinct ports per day");
  add_acked_options(detect_cmd, dopt.acked);

  auto* impact_cmd = app.add_subcommand("impact", "estimate AH traffic share at vantage points");
  ImpactOptions iopt;
  impact_cmd->add_option("--blocklist", iopt.blocklist, "AH blocklist (one IPv4 per line)")->required();
  impact_cmd->add_option("--flows", iopt.flows, "sampled flow files (.csv or .jsonl)");
  impact_cmd->add_option("--day", iopt.day, "restrict to one UTC day (YYYY-MM-DD)");
  impact_cmd->add_option("--pcap", iopt.pcap, "unsampled packet stream for time series");
  impact_cmd->add_option("--events", iopt.events, "darknet event log for the protocol comparison");
  impact_cmd->add_option("--bin-width", iopt.bin_width_s, "series bin width in seconds");
  impact_cmd->add_option("--slash24", iopt.slash24, "number of /24 networks at the vantage point");
  add_acked_options(impact_cmd, iopt.acked);

  auto* report_cmd = app.add_subcommand("report", "characterization tables for detected AH");
  ReportOptions ropt;
  report_cmd->add_option("--events", ropt.events, "darknet event log")->required();
  report_cmd->add_option("--verdicts", ropt.verdicts, "verdicts from detect")->required();
  report_cmd->add_option("--asn-map", ropt.asn_map, "cidr,asn,org,country table");
  report_cmd->add_option("--tags", ropt.tags, "ip,classification,tags table");
  report_cmd->add_option("--top-ports", ropt.top_ports, "rows in the port table");
  report_cmd->add_option("--top-tags", ropt.top_tags, "rows in the tag table");
  report_cmd->add_option("--origin-definition", ropt.origin_definition, "D1, D2, D3 or all");
  report_cmd->add_flag("--anonymize", ropt.anonymize, "replace ASN/org with rank labels");
  add_acked_options(report_cmd, ropt.acked);

  auto* synth_cmd = app.add_subcommand("synth", "generate a seeded synthetic darknet + flow dataset");
  std::string scenario;
  synth_cmd->add_option("--scenario", scenario, "scenario file (key = value)");

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("darkscan");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage)
    argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "darkscan: " << e.what() << '\n';
    return kExitFatal;
  }

  try {
    if (*events_cmd)
      return cmd_events(g, pcaps, events_output, out);
    if (*detect_cmd)
      return cmd_detect(g, dopt, out);
    if (*impact_cmd)
      return cmd_impact(g, iopt, out);
    if (*report_cmd)
      return cmd_report(g, ropt, out);
    if (*synth_cmd)
      return cmd_synth(g, scenario, out);
  } catch (const Error& e) {
    err << "darkscan: " << e.what() << '\n';
    return kExitFatal;
  } catch (const std::exception& e) {
    err << "darkscan: " << e.what() << '\n';
    return kExitFatal;
  }
  return kExitFatal;
}

} // namespace darkscan::cli
