#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.hpp"
#include "darkscan/detector.hpp"
#include "darkscan/error.hpp"
#include "darkscan/event_builder.hpp"
#include "darkscan/fingerprint.hpp"
#include "darkscan/impact.hpp"
#include "darkscan/ingest.hpp"
#include "darkscan/pcap.hpp"
#include "darkscan/synth.hpp"

namespace py = pybind11;
using namespace darkscan;

namespace {

Ipv4 to_ip(const std::string& s) {
  auto ip = Ipv4::parse(s);
  if (!ip)
    throw Error(ErrorCode::ParseError, "not an IPv4 address: " + s);
  return *ip;
}

IpSet to_set(const std::vector<std::string>& ips) {
  IpSet out;
  for (const auto& s : ips)
    out.insert(to_ip(s));
  return out;
}

std::vector<std::string> from_set(const IpSet& ips) {
  std::vector<std::string> out;
  for (Ipv4 ip : ips)
    out.push_back(ip.str());
  return out;
}

Day to_day(const std::string& s) {
  auto d = parse_day(s);
  if (!d)
    throw Error(ErrorCode::ParseError, "bad date '" + s + "' (want YYYY-MM-DD)");
  return *d;
}

DarknetConfig make_config(const std::vector<std::string>& prefixes, double event_timeout_s,
                          double dispersion_fraction, double alpha) {
  DarknetConfig cfg;
  for (const auto& p : prefixes) {
    auto c = Cidr::parse(p);
    if (!c)
      throw Error(ErrorCode::ParseError, "bad CIDR '" + p + "'");
    cfg.darknet_prefixes.push_back(*c);
  }
  cfg.event_timeout_s = event_timeout_s;
  cfg.dispersion_fraction = dispersion_fraction;
  cfg.alpha = alpha;
  return validate_config(cfg);
}

py::dict verdict_dict(const AhVerdict& v) {
  py::dict d;
  d["src_ip"] = v.src_ip.str();
  d["day"] = format_day(v.day);
  d["matched_defs"] = v.matched_defs.names();
  d["max_dispersion"] = v.max_dispersion;
  d["max_event_pkts"] = v.max_event_pkts;
  d["distinct_ports"] = v.distinct_ports;
  d["is_daily"] = v.is_daily;
  d["is_active"] = v.is_active;
  return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "darknet scan-event analytics";

  auto err = py::register_exception<Error>(m, "DarkscanError", PyExc_RuntimeError);
  (void)err;

  py::class_<DarknetConfig>(m, "Config")
      .def(py::init(&make_config), py::arg("prefixes"), py::arg("event_timeout_s") = 600.0,
           py::arg("dispersion_fraction") = 0.10, py::arg("alpha") = 0.0001)
      .def_static("parse", &parse_config, py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def_property_readonly("darknet_size", [](const DarknetConfig& c) { return c.darknet_size; })
      .def_property_readonly("prefixes",
                             [](const DarknetConfig& c) {
                               std::vector<std::string> out;
                               for (const auto& p : c.darknet_prefixes)
                                 out.push_back(p.str());
                               return out;
                             })
      .def_readwrite("event_timeout_s", &DarknetConfig::event_timeout_s)
      .def_readwrite("dispersion_fraction", &DarknetConfig::dispersion_fraction)
      .def_readwrite("alpha", &DarknetConfig::alpha)
      .def_readwrite("reorder_slack_s", &DarknetConfig::reorder_slack_s);

  py::class_<DarknetEvent>(m, "Event")
      .def_property_readonly("src_ip", [](const DarknetEvent& e) { return e.key.src_ip.str(); })
      .def_property_readonly("dst_port", [](const DarknetEvent& e) { return e.key.dst_port; })
      .def_property_readonly("traffic_type",
                             [](const DarknetEvent& e) { return std::string(to_string(e.key.traffic_type)); })
      .def_readonly("start_ts", &DarknetEvent::start_ts)
      .def_readonly("end_ts", &DarknetEvent::end_ts)
      .def_readonly("pkt_count", &DarknetEvent::pkt_count)
      .def_readonly("unique_dst_count", &DarknetEvent::unique_dst_count)
      .def_readonly("zmap_pkts", &DarknetEvent::zmap_pkts)
      .def_readonly("masscan_pkts", &DarknetEvent::masscan_pkts)
      .def_readonly("other_pkts", &DarknetEvent::other_pkts)
      .def("to_json", &encode_event)
      .def_static("from_json", [](const std::string& s) { return decode_event(s); })
      .def("__repr__", [](const DarknetEvent& e) { return "Event(" + encode_event(e) + ")"; });

  py::class_<Thresholds>(m, "Thresholds")
      .def(py::init([](uint64_t volume, uint64_t ports, std::string label) {
             Thresholds t{volume, ports, std::move(label)};
             t.validate();
             return t;
           }),
           py::arg("volume_threshold_pkts"), py::arg("ports_threshold"), py::arg("label") = "fixed")
      .def_readonly("volume_threshold_pkts", &Thresholds::volume_threshold_pkts)
      .def_readonly("ports_threshold", &Thresholds::ports_threshold)
      .def_readonly("dataset_label", &Thresholds::dataset_label);
  m.def("darknet1_thresholds", &darknet1_thresholds);
  m.def("darknet2_thresholds", &darknet2_thresholds);

  m.def("compute_timeout", &compute_timeout, py::arg("darknet_size"), py::arg("total_ipv4"),
        py::arg("rate_pps"), py::arg("safety_factor"));
  m.def("ecdf_threshold", &ecdf_threshold, py::arg("values"), py::arg("alpha"));
  m.def("percentile_rank", &percentile_rank, py::arg("n"), py::arg("alpha"));

  m.def(
      "build_events",
      [](const std::vector<std::string>& pcaps, const DarknetConfig& cfg) {
        EventBuilder builder(cfg);
        std::vector<DarknetEvent> events;
        uint64_t read = 0;
        {
          py::gil_scoped_release release;
          for (const auto& path : pcaps) {
            PcapReader reader(path);
            while (auto p = reader.next())
              builder.ingest(*p, events);
            read += reader.stats().packets;
          }
          auto rest = builder.flush();
          events.insert(events.end(), rest.begin(), rest.end());
        }
        const auto& st = builder.stats();
        py::dict stats;
        stats["packets_read"] = read;
        stats["dropped"] = st.dropped();
        stats["out_of_order"] = st.out_of_order;
        stats["events"] = st.events_emitted;
        return py::make_tuple(events, stats);
      },
      py::arg("pcaps"), py::arg("config"),
      "Reconstructs events from pcap files; returns (events, stats).");

  m.def(
      "detect",
      [](const std::vector<DarknetEvent>& events, const DarknetConfig& cfg,
         std::optional<Thresholds> fixed) {
        auto r = detect(events, cfg, fixed ? ThresholdMode::Fixed : ThresholdMode::TwoPass, fixed);
        py::dict out;
        out["thresholds"] = r.thresholds;
        out["d1"] = from_set(r.d1);
        out["d2"] = from_set(r.d2);
        out["d3"] = from_set(r.d3);
        out["all"] = from_set(r.all);
        py::list verdicts;
        for (const auto& v : r.verdicts)
          verdicts.append(verdict_dict(v));
        out["verdicts"] = verdicts;
        return out;
      },
      py::arg("events"), py::arg("config"), py::arg("fixed_thresholds") = std::nullopt);

  m.def(
      "jaccard", [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
        return jaccard(to_set(a), to_set(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "fingerprint",
      [](const std::string& protocol, const std::string& dst_ip, uint16_t dst_port, uint16_t ip_id,
         std::optional<uint32_t> tcp_seq) {
        PacketMeta p;
        auto proto = parse_protocol(protocol);
        if (!proto)
          throw Error(ErrorCode::ParseError, "protocol must be tcp, udp or icmp");
        p.protocol = *proto;
        p.dst_ip = to_ip(dst_ip);
        if (p.protocol != Protocol::Icmp)
          p.dst_port = dst_port;
        p.ip_id = ip_id;
        p.tcp_seq = tcp_seq;
        return std::string(to_string(fingerprint_packet(p)));
      },
      py::arg("protocol"), py::arg("dst_ip"), py::arg("dst_port"), py::arg("ip_id"),
      py::arg("tcp_seq") = std::nullopt);

  m.def(
      "flow_impact",
      [](const std::string& flows_path, const std::vector<std::string>& ah, const std::string& day) {
        auto fmt = flow_format_for_path(flows_path);
        if (!fmt)
          throw Error(ErrorCode::SchemaMismatch, flows_path + ": expected .csv or .jsonl");
        auto set = to_set(ah);
        FlowImpactAccumulator acc(set, to_day(day));
        scan_flows(flows_path, *fmt, [&](const FlowRecord& f) { acc.add(f); });
        py::list out;
        for (const auto& r : acc.result()) {
          py::dict d;
          d["vantage_id"] = r.router_id;
          d["ah_pkts_est"] = r.ah_pkts_est;
          d["total_pkts_est"] = r.total_pkts_est;
          d["fraction"] = r.fraction;
          out.append(d);
        }
        return out;
      },
      py::arg("flows_path"), py::arg("ah"), py::arg("day"));

  m.def(
      "zipf_curve",
      [](const std::map<std::string, uint64_t>& pkts) {
        std::map<Ipv4, uint64_t> by_ip;
        for (const auto& [ip, n] : pkts)
          by_ip[to_ip(ip)] = n;
        std::vector<std::pair<double, double>> out;
        for (const auto& p : zipf_curve(by_ip))
          out.emplace_back(p.rank_fraction, p.cumulative_pkt_fraction);
        return out;
      },
      py::arg("pkts_by_ip"));

  m.def(
      "synth",
      [](const DarknetConfig& cfg, const std::string& out_dir, uint64_t seed) {
        auto data = generate(cfg, Scenario{}, seed);
        write_dataset(data, out_dir);
        return data.truth.to_json();
      },
      py::arg("config"), py::arg("out_dir"), py::arg("seed") = 1,
      "Writes a synthetic dataset and returns its manifest as JSON text.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
