// Command-line front end: scenario runs, benchmarks, diagnostics and a
// real-UDP node. Logs go to stderr, data to stdout or --out.

#include "ipop/node/ipop_node.hpp"
#include "ipop/node/udp_runtime.hpp"
#include "ipop/resolver/direct_map.hpp"
#include "ipop/sim/simulator.hpp"
#include "ipop/transport/brunet_packet.hpp"
#include "ipop/vnet/host_stack.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>

namespace {

using namespace ipop;
using ordered = nlohmann::ordered_json;
using vnet::VirtualIp;

enum Exit : int { kOk = 0, kInternal = 1, kUsage = 2, kNotFound = 3 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

node::ResolutionMode parse_mode(const std::string& text)
{
    if (text == "direct") return node::ResolutionMode::Direct;
    if (text == "brunet-arp" || text == "brunet_arp") return node::ResolutionMode::BrunetArp;
    throw UsageError("--mode must be direct or brunet-arp");
}

VirtualIp parse_vip(const std::string& text, const char* flag)
{
    auto ip = Ipv4Address::parse(text);
    if (!ip) throw UsageError(std::string(flag) + ": invalid IPv4 address '" + text + "'");
    return *ip;
}

transport::Endpoint parse_endpoint(const std::string& text, const char* flag)
{
    auto ep = transport::Endpoint::parse(text);
    if (!ep) throw UsageError(std::string(flag) + ": expected ip:port, got '" + text + "'");
    return *ep;
}

// Like parse_endpoint, but port 0 asks the kernel for a free port.
transport::Endpoint parse_bind(const std::string& text, const char* flag)
{
    if (text.size() > 2 && text.ends_with(":0")) {
        auto ip = Ipv4Address::parse(std::string_view(text).substr(0, text.size() - 2));
        if (ip) return transport::Endpoint{*ip, 0};
    }
    return parse_endpoint(text, flag);
}

// n public nodes with consecutive virtual IPs starting at .0.2; node 0
// bootstraps.
sim::Scenario generated_ring(std::uint32_t n, std::uint64_t seed, double latency_ms)
{
    sim::Scenario s;
    s.seed = seed;
    s.default_link.latency = transport::LatencyModel::constant(Micros{static_cast<std::int64_t>(latency_ms * 1000)});
    for (std::uint32_t i = 0; i < n; ++i) {
        sim::NodeSpec spec;
        spec.bootstrap = i == 0;
        spec.vips.push_back(VirtualIp(s.subnet.base.value() + 2 + i));
        s.nodes.push_back(std::move(spec));
    }
    return s;
}

void write_output(const std::string& out, const std::string& data)
{
    if (out.empty() || out == "-") {
        std::cout << data;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    f << data;
}

ordered summary_of(const sim::MetricsLog& log)
{
    auto rows = log.of_type("summary");
    return rows.empty() ? ordered::object() : *rows.back();
}

// ---------------------------------------------------------------- commands

int sim_run(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out,
            const std::string& format)
{
    auto scenario = sim::Scenario::from_file(config);
    if (seed) scenario.seed = *seed;
    sim::Simulator sim(std::move(scenario));
    const auto& log = sim.run();
    write_output(out, format == "csv" ? log.to_csv_summary() : log.to_jsonl());
    return kOk;
}

int bench_ping(std::uint32_t nodes, std::uint32_t pairs, std::uint32_t count, std::uint64_t seed,
               double interval_ms, double latency_ms)
{
    if (nodes < 2) throw UsageError("--nodes must be at least 2");
    if (pairs < 1) throw UsageError("--pairs must be at least 1");
    if (count < 1) throw UsageError("--count must be at least 1");
    auto s = generated_ring(nodes, seed, latency_ms);
    s.log_packets = false;
    Rng pick(seed ^ 0x70696e67);
    for (std::uint32_t p = 0; p < pairs; ++p) {
        auto a = static_cast<std::size_t>(pick.uniform_int(0, nodes - 1));
        auto b = static_cast<std::size_t>(pick.uniform_int(0, nodes - 2));
        if (b >= a) ++b;
        sim::PingWorkload w;
        w.src = s.nodes[a].vips.front();
        w.dst = s.nodes[b].vips.front();
        w.count = count;
        w.interval = Micros{static_cast<std::int64_t>(interval_ms * 1000)};
        s.workloads.push_back(w);
    }
    sim::Simulator sim(std::move(s));
    auto summary = summary_of(sim.run());
    ordered out;
    out["nodes"] = nodes;
    out["pairs"] = pairs;
    out["count"] = count;
    out["samples"] = summary["pings_ok"];
    out["loss_pct"] = 100.0 * (1.0 - summary["delivery_ratio"].get<double>());
    out["rtt_mean_ms"] = summary["rtt_mean_us"].get<double>() / 1000.0;
    out["rtt_stddev_ms"] = summary["rtt_stddev_us"].get<double>() / 1000.0;
    out["hop_mean"] = summary["hop_mean"];
    out["hop_histogram"] = summary["hop_histogram"];
    std::cout << out.dump() << '\n';
    return kOk;
}

int bench_bulk(std::uint32_t nodes, std::uint64_t bytes, std::size_t chunk, double bandwidth, double latency_ms,
               std::uint64_t seed)
{
    if (nodes < 2) throw UsageError("--nodes must be at least 2");
    if (bandwidth <= 0) throw UsageError("--bandwidth must be positive");
    auto s = generated_ring(nodes, seed, latency_ms);
    s.log_packets = false;
    s.default_link.bandwidth = bandwidth;
    sim::BulkWorkload w;
    w.src = s.nodes[nodes - 1].vips.front();
    w.dst = s.nodes[0].vips.front();
    w.bytes = bytes;
    w.chunk = chunk;
    s.workloads.push_back(w);
    sim::Simulator sim(std::move(s));
    sim.run();
    const auto& r = sim.bulk_results().front();
    ordered out;
    out["bytes_requested"] = r.bytes_requested;
    out["bytes_delivered"] = r.bytes_delivered;
    out["complete"] = r.complete;
    out["duration_s"] = to_seconds(r.last_delivery - r.first_send);
    out["throughput_Bps"] = r.throughput_Bps;
    out["bandwidth_Bps"] = bandwidth;
    out["ratio"] = r.throughput_Bps / bandwidth;
    std::cout << out.dump() << '\n';
    return kOk;
}

const char* edge_kind(const overlay::ConnectionTable& t, const overlay::NodeAddress& peer)
{
    if (t.is_near(peer)) return "near";
    if (t.find(peer)->shortcut) return "shortcut";
    return "other";
}

int topo_snapshot(const std::string& config)
{
    sim::Simulator sim(sim::Scenario::from_file(config));
    sim.build();
    sim.run_until(sim.warmup_end());
    for (std::size_t i = 0; i < sim.node_count(); ++i) {
        if (!sim.alive(i)) continue;
        const auto& ov = sim.node(i).overlay();
        for (const auto& [peer, conn] : ov.table().entries())
            std::cout << ov.address().to_hex() << ' ' << peer.to_hex() << ' ' << edge_kind(ov.table(), peer) << ' '
                      << (conn.direct() ? "direct" : "relayed") << '\n';
    }
    return kOk;
}

int print_lookup(const resolver::LookupResult& r)
{
    if (r.status == resolver::LookupStatus::Found) {
        std::cout << r.owner.to_hex() << '\n';
        return kOk;
    }
    std::cerr << "resolve: " << resolver::to_string(r.status) << '\n';
    return r.status == resolver::LookupStatus::NotFound ? kNotFound : kInternal;
}

int resolve_cmd(const std::string& vip_text, const std::string& mode_text, const std::string& config,
                const std::string& bootstrap, const std::string& bind)
{
    const VirtualIp vip = parse_vip(vip_text, "--vip");
    const auto mode = parse_mode(mode_text);
    if (mode == node::ResolutionMode::Direct) {
        std::cout << resolver::direct_map(vip).to_hex() << '\n';
        return kOk;
    }
    if (!config.empty()) {
        // Ask node 0 of the scenario once its overlay has settled.
        auto scenario = sim::Scenario::from_file(config);
        if (scenario.mode != node::ResolutionMode::BrunetArp)
            throw sim::ConfigError("resolution", "resolve --mode brunet-arp needs a brunet_arp scenario");
        sim::Simulator sim(std::move(scenario));
        sim.build();
        sim.run_until(sim.warmup_end());
        std::optional<resolver::LookupResult> result;
        sim.lookup(0, vip, [&](const sim::LookupSample& s) { result = s.result; });
        while (!result) sim.run_for(seconds(1));
        return print_lookup(*result);
    }
    if (!bootstrap.empty()) {
        node::UdpRuntime rt(parse_bind(bind, "--bind"), 1);
        node::IpopConfig cfg;
        cfg.mode = mode;
        node::IpopNode client(overlay::NodeAddress::random(rt.rng()), rt, cfg);
        rt.set_receiver([&](const transport::Endpoint& from, ByteView b) { client.on_datagram(from, b); });
        client.start(parse_endpoint(bootstrap, "--bootstrap"));
        rt.run_for(seconds(30), [&] { return client.overlay().joined(); });
        if (!client.overlay().joined()) {
            std::cerr << "resolve: could not join through " << bootstrap << '\n';
            return kInternal;
        }
        std::optional<resolver::LookupResult> result;
        client.dht().lookup(vip, [&](const resolver::LookupResult& r) { result = r; });
        rt.run_for(seconds(30), [&] { return result.has_value(); });
        client.stop();
        return print_lookup(result.value_or(resolver::LookupResult{}));
    }
    throw UsageError("brunet-arp resolution needs --config or --bootstrap");
}

struct NodeRunOptions {
    std::string bind;
    std::string bootstrap;
    std::string vip;
    std::string mode = "direct";
    std::string ping;
    std::uint32_t count = 100;
    double interval_ms = 100;
    double duration_s = 0;
    std::string trace;
    std::uint64_t seed = 1;
};

int node_run(const NodeRunOptions& o)
{
    const VirtualIp vip = parse_vip(o.vip, "--vip");
    node::IpopConfig cfg;
    cfg.mode = parse_mode(o.mode);
    if (!cfg.subnet.contains(vip) || vip == cfg.subnet.gateway())
        throw UsageError("--vip must be a host address inside " + cfg.subnet.to_string());
    std::optional<VirtualIp> target;
    if (!o.ping.empty()) target = parse_vip(o.ping, "--ping");
    std::optional<transport::Endpoint> bootstrap;
    if (!o.bootstrap.empty()) bootstrap = parse_endpoint(o.bootstrap, "--bootstrap");
    const auto bind = parse_bind(o.bind, "--bind");

    std::unique_ptr<node::UdpRuntime> rt;
    try {
        rt = std::make_unique<node::UdpRuntime>(bind, o.seed);
    } catch (const std::system_error& e) {
        std::cerr << "node-run: " << e.what() << '\n';
        return kInternal;
    }

    std::ofstream trace;
    if (!o.trace.empty()) {
        trace.open(o.trace, std::ios::binary);
        if (!trace) throw std::runtime_error("cannot write '" + o.trace + "'");
    }

    const auto address = cfg.mode == node::ResolutionMode::Direct ? resolver::direct_map(vip)
                                                                  : overlay::NodeAddress::random(rt->rng());
    node::IpopNode ipop(address, *rt, cfg);
    auto& iface = ipop.add_host(vip);
    vnet::HostStack host(iface, cfg.subnet);

    std::function<void()> pump = [&] {
        while (!iface.to_host.empty() || !iface.from_host.empty()) {
            host.process_inbound(rt->now());
            ipop.poll_hosts();
        }
    };
    ipop.inject = [&](vnet::HostInterface& to, Bytes frame) {
        to.to_host.push_back(std::move(frame));
        rt->schedule(Micros{0}, pump);
    };
    ipop.on_tunnel = [&](const transport::BrunetPacket& pkt) {
        if (!trace) return;
        static constexpr char kHex[] = "0123456789abcdef";
        for (auto b : transport::encode(pkt)) trace << kHex[b >> 4] << kHex[b & 15];
        trace << '\n';
        trace.flush();
    };
    ipop.overlay().on_joined = [&, prev = ipop.overlay().on_joined] {
        if (prev) prev();
        std::cerr << "node-run: joined as " << address.to_hex() << " at " << rt->local_endpoint().to_string() << '\n';
    };
    rt->set_receiver([&](const transport::Endpoint& from, ByteView b) { ipop.on_datagram(from, b); });
    ipop.start(bootstrap);
    std::cerr << "node-run: " << o.vip << " listening on " << rt->local_endpoint().to_string() << '\n';

    const Micros duration{static_cast<std::int64_t>(o.duration_s * 1e6)};
    if (!target) {
        rt->run_for(duration.count() > 0 ? duration : seconds(365LL * 24 * 3600));
        ipop.stop();
        return kOk;
    }

    rt->run_for(seconds(60), [&] { return ipop.overlay().joined(); });
    if (!ipop.overlay().joined()) {
        std::cerr << "node-run: not joined after 60 s\n";
        return kInternal;
    }
    // Let the resolver settle (registration, neighbor exchange).
    rt->run_for(seconds(1));

    std::map<std::uint16_t, TimePoint> sent;
    std::map<std::uint16_t, Micros> rtts;
    host.on_echo_reply = [&](const vnet::EchoReply& r) {
        auto it = sent.find(r.seq);
        if (it != sent.end() && !rtts.count(r.seq)) rtts[r.seq] = r.received_at - it->second;
    };
    const Micros interval{static_cast<std::int64_t>(o.interval_ms * 1000)};
    for (std::uint32_t i = 0; i < o.count; ++i) {
        rt->schedule(interval * static_cast<std::int64_t>(i), [&, i] {
            const auto seq = static_cast<std::uint16_t>(i);
            sent[seq] = rt->now();
            host.ping(*target, seq, rt->now());
            pump();
        });
    }
    const Micros budget = interval * static_cast<std::int64_t>(o.count) + seconds(3);
    rt->run_for(duration.count() > 0 ? std::min(duration, budget) : budget,
                [&] { return rtts.size() == o.count; });
    ipop.stop();

    double mean = 0;
    for (const auto& [seq, r] : rtts) mean += static_cast<double>(r.count());
    if (!rtts.empty()) mean /= static_cast<double>(rtts.size());
    ordered out;
    out["target"] = o.ping;
    out["sent"] = o.count;
    out["received"] = rtts.size();
    out["loss_pct"] = 100.0 * (1.0 - static_cast<double>(rtts.size()) / static_cast<double>(o.count));
    out["rtt_mean_ms"] = mean / 1000.0;
    std::cout << out.dump() << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"IP-over-P2P overlay: simulator, benchmarks and node runner"};
    app.require_subcommand(1);

    std::string config, out, format = "jsonl";
    std::optional<std::uint64_t> seed;
    auto* sim_cmd = app.add_subcommand("sim-run", "Run a scenario file and write its metrics log");
    sim_cmd->add_option("--config", config, "Scenario JSON file")->required();
    sim_cmd->add_option("--seed", seed, "Override the scenario seed");
    sim_cmd->add_option("--out", out, "Output path (default stdout)");
    sim_cmd->add_option("--format", format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));

    std::uint32_t nodes = 2, pairs = 1, count = 1000;
    std::uint64_t bench_seed = 1;
    double interval_ms = 100, latency_ms = 5;
    auto* ping_cmd = app.add_subcommand("bench-ping", "Ping random pairs on a generated ring and summarize RTT");
    ping_cmd->add_option("--nodes", nodes, "Overlay size");
    ping_cmd->add_option("--pairs", pairs, "Random (src, dst) pairs");
    ping_cmd->add_option("--count", count, "Pings per pair");
    ping_cmd->add_option("--seed", bench_seed, "Seed");
    ping_cmd->add_option("--interval-ms", interval_ms, "Gap between pings of one pair");
    ping_cmd->add_option("--latency-ms", latency_ms, "One-way latency of every link");

    std::uint32_t bulk_nodes = 2;
    std::uint64_t bytes = 13'090'000;
    std::size_t chunk = 1332;
    double bandwidth = 1e6, bulk_latency = 5;
    std::uint64_t bulk_seed = 1;
    auto* bulk_cmd = app.add_subcommand("bench-bulk", "Stream bytes between two virtual IPs and report throughput");
    bulk_cmd->add_option("--nodes", bulk_nodes, "Overlay size");
    bulk_cmd->add_option("--bytes", bytes, "Bytes to transfer");
    bulk_cmd->add_option("--chunk", chunk, "Payload bytes per packet");
    bulk_cmd->add_option("--bandwidth", bandwidth, "Link bandwidth cap, bytes per second");
    bulk_cmd->add_option("--latency-ms", bulk_latency, "One-way latency of every link");
    bulk_cmd->add_option("--seed", bulk_seed, "Seed");

    std::string topo_config;
    auto* topo_cmd = app.add_subcommand("topo-snapshot", "Print every connection table as an edge list");
    topo_cmd->add_option("--config", topo_config, "Scenario JSON file")->required();

    std::string vip, mode = "direct", resolve_config, resolve_bootstrap, resolve_bind = "127.0.0.1:0";
    auto* resolve = app.add_subcommand("resolve", "Print the overlay address owning a virtual IP");
    resolve->add_option("--vip", vip, "Virtual IP")->required();
    resolve->add_option("--mode", mode, "direct or brunet-arp");
    resolve->add_option("--config", resolve_config, "Scenario to simulate for brunet-arp lookups");
    resolve->add_option("--bootstrap", resolve_bootstrap, "Live node to join for brunet-arp lookups");
    resolve->add_option("--bind", resolve_bind, "Local UDP endpoint when joining a live overlay");

    NodeRunOptions nr;
    auto* run_cmd = app.add_subcommand("node-run", "Run one overlay node on a real UDP socket");
    run_cmd->add_option("--bind", nr.bind, "Local UDP endpoint, ip:port")->required();
    run_cmd->add_option("--bootstrap", nr.bootstrap, "Endpoint of a node already in the overlay");
    run_cmd->add_option("--vip", nr.vip, "Virtual IP of the built-in host")->required();
    run_cmd->add_option("--mode", nr.mode, "direct or brunet-arp");
    run_cmd->add_option("--ping", nr.ping, "Virtual IP to ping once joined");
    run_cmd->add_option("--count", nr.count, "Number of pings");
    run_cmd->add_option("--interval-ms", nr.interval_ms, "Gap between pings");
    run_cmd->add_option("--duration", nr.duration_s, "Seconds to run (default: until pings finish, or forever)");
    run_cmd->add_option("--trace", nr.trace, "Write every delivered tunnel envelope, hex, one per line");
    run_cmd->add_option("--seed", nr.seed, "Seed for this node's generator");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*sim_cmd) return sim_run(config, seed, out, format);
        if (*ping_cmd) return bench_ping(nodes, pairs, count, bench_seed, interval_ms, latency_ms);
        if (*bulk_cmd) return bench_bulk(bulk_nodes, bytes, chunk, bandwidth, bulk_latency, bulk_seed);
        if (*topo_cmd) return topo_snapshot(topo_config);
        if (*resolve) return resolve_cmd(vip, mode, resolve_config, resolve_bootstrap, resolve_bind);
        if (*run_cmd) return node_run(nr);
    } catch (const sim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInternal;
    }
    return kUsage;
}
