// Acceptance gate: one PASS/FAIL line per criterion. Tolerances are fixed
// here; expected values come from the reference models in oracles.hpp or
// from arithmetic over the configured scenario, never from the code under
// test.
//
// Usage: ipop_acceptance <path to the ipop CLI>

#include "oracles.hpp"

#include "ipop/common/random.hpp"
#include "ipop/nat/simultaneous_open.hpp"
#include "ipop/resolver/direct_map.hpp"
#include "ipop/sim/simulator.hpp"
#include "ipop/transport/brunet_packet.hpp"
#include "ipop/transport/udp_channel.hpp"
#include "ipop/vnet/ethernet.hpp"
#include "ipop/vnet/ipv4.hpp"
#include "ipop/vnet/tunnel.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

namespace {

using namespace ipop;
using sim::Scenario;
using sim::Simulator;
using vnet::VirtualIp;

// ---------------------------------------------------------------- tolerances

constexpr std::size_t kOverlayNodes = 118;
constexpr std::uint32_t kRandomPings = 10000;
constexpr double kMaxMeanHops = 10.0;
constexpr double kMaxWallSeconds = 60.0;

constexpr std::size_t kRttNodes = 8;
constexpr std::uint32_t kRttPings = 10000;
constexpr Micros kProcessing{500};

constexpr std::size_t kEncapsulationSamples = 10000;
constexpr std::size_t kChecksumSamples = 1000;

constexpr int kPunchAttempts = 5;
constexpr int kPunchSeeds = 3;
constexpr std::uint32_t kNatPingsEachWay = 50;

constexpr std::size_t kArpNodes = 50;
constexpr std::uint32_t kArpIpsPerNode = 4; // 200 registrations
constexpr std::size_t kArpMigrations = 20;
constexpr double kArpFailFraction = 0.10;

constexpr std::uint32_t kSmokePings = 100;
constexpr std::uint32_t kSmokeMinReceived = 99;

// ---------------------------------------------------------------- helpers

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 3)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

VirtualIp vip(std::size_t i) { return VirtualIp(10, 128, 0, static_cast<std::uint8_t>(2 + i)); }

// Public nodes with consecutive addresses from 10.128.0.2; node 0
// bootstraps.
Scenario public_ring(std::size_t n, std::uint64_t seed)
{
    Scenario s;
    s.seed = seed;
    s.log_packets = false;
    for (std::size_t i = 0; i < n; ++i) {
        sim::NodeSpec spec;
        spec.vips.push_back(VirtualIp(VirtualIp(10, 128, 0, 2).value() + static_cast<std::uint32_t>(i)));
        spec.bootstrap = i == 0;
        s.nodes.push_back(spec);
    }
    return s;
}

// Independent watch on the host boundary, accumulated over every
// simulation in the gate: tunnel payloads must be IPv4 (never ARP), and
// every frame handed to a host must come from the gateway MAC with a
// valid inner header checksum.
struct Containment {
    std::uint64_t tunnel_payloads = 0;
    std::uint64_t tunnel_not_ip = 0;
    std::uint64_t injected = 0;
    std::uint64_t injected_bad = 0;
    std::uint64_t sim_non_ip = 0;
    std::uint64_t sim_bad_injections = 0;
    std::uint64_t runs = 0;

    static bool valid_ipv4(ByteView p)
    {
        if (p.size() < 20 || (p[0] >> 4) != 4) return false;
        const std::size_t ihl = std::size_t{p[0] & 0x0fu} * 4;
        if (ihl < 20 || ihl > p.size()) return false;
        return oracle::ones_complement_checksum(p.first(ihl)) == 0;
    }

    void instrument(Simulator& sim)
    {
        sim.build();
        ++runs;
        for (std::size_t i = 0; i < sim.node_count(); ++i) {
            auto& node = sim.node(i);
            node.on_tunnel = [this, prev = node.on_tunnel](const transport::BrunetPacket& pkt) {
                ++tunnel_payloads;
                if (!valid_ipv4(pkt.payload)) ++tunnel_not_ip;
                if (prev) prev(pkt);
            };
            node.inject = [this, prev = node.inject](vnet::HostInterface& iface, Bytes frame) {
                ++injected;
                const bool gateway = frame.size() >= 14 &&
                                     std::equal(frame.begin() + 6, frame.begin() + 12, vnet::kGatewayMac.octets.begin());
                // ARP replies to the host's own queries carry no inner checksum.
                const std::uint16_t type = frame.size() >= 14 ? static_cast<std::uint16_t>(frame[12] << 8 | frame[13]) : 0;
                const bool body_ok = type == vnet::kEtherTypeArp ||
                                     (type == vnet::kEtherTypeIpv4 && valid_ipv4(ByteView(frame).subspan(14)));
                if (!gateway || !body_ok) ++injected_bad;
                prev(iface, std::move(frame));
            };
        }
    }

    void absorb(const Simulator& sim)
    {
        const auto c = sim.counters();
        sim_non_ip += c.overlay_non_ip_payloads;
        sim_bad_injections += c.bad_injections;
    }
};

Containment containment;

// Every path must strictly approach its destination at each overlay hop,
// and never revisit a node.
bool path_monotone(const Simulator& sim, const sim::TraceRecord& tr)
{
    if (!tr.delivered_to) return true;
    const auto dest = sim.node(*tr.delivered_to).overlay().address();
    std::size_t at = tr.origin;
    std::set<std::size_t> seen{at};
    for (const auto& hop : tr.hops) {
        if (!seen.insert(hop.node).second) return false;
        const auto before = oracle::ring_gap(sim.node(at).overlay().address(), dest);
        const auto after = oracle::ring_gap(sim.node(hop.node).overlay().address(), dest);
        if (!(after < before)) return false;
        at = hop.node;
    }
    return at == *tr.delivered_to;
}

bool near_sets_match_oracle(const Simulator& sim, std::size_t k, std::size_t* mismatched = nullptr)
{
    std::vector<overlay::NodeAddress> ring;
    for (std::size_t i = 0; i < sim.node_count(); ++i)
        if (sim.alive(i)) ring.push_back(sim.node(i).overlay().address());
    const auto expected = oracle::ring_adjacency(ring, k);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < sim.node_count(); ++i) {
        if (!sim.alive(i)) continue;
        const auto& table = sim.node(i).overlay().table();
        const auto& want = expected.at(table.owner());
        std::set<overlay::NodeAddress> left(table.near_left().begin(), table.near_left().end());
        std::set<overlay::NodeAddress> right(table.near_right().begin(), table.near_right().end());
        if (left != want.left || right != want.right) ++bad;
    }
    if (mismatched) *mismatched = bad;
    return bad == 0;
}

// ---------------------------------------------------------------- criteria

Outcome overlay_118()
{
    const auto wall_start = std::chrono::steady_clock::now();
    Scenario s = public_ring(kOverlayNodes, 118);
    sim::RandomPingsWorkload w;
    w.count = kRandomPings;
    w.interval = millis(1);
    s.workloads.push_back(w);
    Simulator sim(s);
    containment.instrument(sim);
    sim.run_until(sim.warmup_end());
    std::size_t ring_bad = 0;
    const bool ring_ok = near_sets_match_oracle(sim, s.overlay.k, &ring_bad);
    sim.run();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    containment.absorb(sim);

    std::size_t ok = 0, paths = 0, hops = 0, bad_paths = 0;
    for (const auto& e : sim.echoes()) {
        if (e.timed_out) continue;
        ++ok;
        for (auto id : {e.request_trace, e.reply_trace}) {
            const auto& tr = sim.traces().at(id);
            ++paths;
            hops += tr.hops.size();
            if (!path_monotone(sim, tr)) ++bad_paths;
        }
    }
    const double delivery = static_cast<double>(ok) / kRandomPings;
    const double mean_hops = paths == 0 ? 0.0 : static_cast<double>(hops) / static_cast<double>(paths);
    const auto violations = sim.counters().monotone_violations;
    const bool pass = sim.echoes().size() == kRandomPings && ok == kRandomPings && ring_ok && bad_paths == 0 &&
                      violations == 0 && mean_hops <= kMaxMeanHops && wall < kMaxWallSeconds;
    return {pass, "nodes=118 pings=" + std::to_string(sim.echoes().size()) + " delivery=" + fmt(delivery, 4) +
                      " ring_mismatch=" + std::to_string(ring_bad) + " non_monotone_paths=" +
                      std::to_string(bad_paths) + " router_violations=" + std::to_string(violations) +
                      " mean_hops=" + fmt(mean_hops) + " wall_s=" + fmt(wall, 1)};
}

Outcome rtt_two_hops()
{
    Scenario s = public_ring(kRttNodes, 7);
    s.overlay.small_world_shortcuts = false;
    s.overlay.shortcut_threshold = 0;
    s.processing_delay = kProcessing;
    // Outlast the bootstrap's temporary leaf links so only ring links remain.
    s.settle = s.overlay.leaf_lifetime + s.overlay.stabilize_interval * 2;
    // Distinct fixed latency on every pair.
    std::map<std::pair<std::size_t, std::size_t>, Micros> latency;
    for (std::size_t a = 0; a < kRttNodes; ++a)
        for (std::size_t b = a + 1; b < kRttNodes; ++b) {
            const Micros l{2000 + static_cast<std::int64_t>(211 * a + 37 * b)};
            latency[{a, b}] = latency[{b, a}] = l;
            s.links.push_back({vip(a), vip(b), {transport::LatencyModel::constant(l), 0.0, 0.0, std::nullopt}});
        }
    Simulator sim(s);
    containment.instrument(sim);
    sim.run_until(sim.warmup_end());
    const bool ring_ok = near_sets_match_oracle(sim, s.overlay.k);

    // With two neighbors per side, the node three places along the sorted
    // ring is two overlay hops away in either direction.
    std::vector<std::size_t> order(kRttNodes);
    for (std::size_t i = 0; i < kRttNodes; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) {
        return sim.node(x).overlay().address() < sim.node(y).overlay().address();
    });
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < kRttNodes; ++i) pairs.emplace_back(order[i], order[(i + 3) % kRttNodes]);

    const std::uint32_t rounds = kRttPings / static_cast<std::uint32_t>(pairs.size());
    for (std::uint32_t r = 0; r < rounds; ++r) {
        for (auto [a, b] : pairs) sim.ping(vip(a), vip(b));
        sim.run_for(millis(10));
    }
    sim.run_for(seconds(10));
    containment.absorb(sim);

    auto index_of = [](VirtualIp ip) { return static_cast<std::size_t>(ip.value() - vip(0).value()); };
    auto leg = [&](const sim::TraceRecord& tr, bool& exact) {
        Micros sum{};
        std::size_t at = tr.origin;
        for (const auto& hop : tr.hops) {
            const Micros configured = latency.at({at, hop.node});
            if (hop.latency != configured || hop.queueing != Micros{0} || hop.held != Micros{0}) exact = false;
            sum += configured;
            at = hop.node;
        }
        return sum + kProcessing * static_cast<std::int64_t>(tr.hops.size() + 1);
    };

    std::size_t matched = 0, not_two_hops = 0, mismatched = 0, timed_out = 0;
    std::set<std::pair<std::size_t, std::size_t>> answered;
    Micros worst{};
    for (const auto& e : sim.echoes()) {
        if (e.timed_out) {
            ++timed_out;
            continue;
        }
        const auto& fwd = sim.traces().at(e.request_trace);
        const auto& rev = sim.traces().at(e.reply_trace);
        if (fwd.hops.size() != 2 || rev.hops.size() != 2) ++not_two_hops;
        bool exact = true;
        Micros expected = leg(fwd, exact) + leg(rev, exact);
        // The responder resolves the requester's MAC before its first reply,
        // which costs one local round through the router.
        if (answered.insert({index_of(e.dst), index_of(e.src)}).second) expected += kProcessing;
        if (exact && e.rtt == expected) ++matched;
        else {
            ++mismatched;
            worst = std::max(worst, e.rtt > expected ? e.rtt - expected : expected - e.rtt);
        }
    }
    const bool pass = ring_ok && sim.echoes().size() == kRttPings && matched == kRttPings && not_two_hops == 0;
    return {pass, "pings=" + std::to_string(sim.echoes().size()) + " exact=" + std::to_string(matched) +
                      " mismatched=" + std::to_string(mismatched) + " timeouts=" + std::to_string(timed_out) +
                      " not_two_hops=" + std::to_string(not_two_hops) + " worst_error_us=" +
                      std::to_string(worst.count()) + " tolerance_us=0"};
}

Outcome encapsulation()
{
    Rng rng(48);
    std::size_t identical = 0, overhead_ok = 0;
    for (std::size_t i = 0; i < kEncapsulationSamples; ++i) {
        Bytes payload(static_cast<std::size_t>(rng.uniform_int(0, 1380)));
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng.next());
        const auto pkt = vnet::Ipv4Packet::make(VirtualIp(static_cast<std::uint32_t>(rng.next())),
                                                VirtualIp(static_cast<std::uint32_t>(rng.next())),
                                                static_cast<std::uint8_t>(rng.next()), std::move(payload),
                                                static_cast<std::uint16_t>(rng.next()),
                                                static_cast<std::uint8_t>(rng.uniform_int(1, 255)));
        const Bytes raw = vnet::serialize_ipv4(pkt);
        const auto src = overlay::NodeAddress::random(rng);
        const auto dst = overlay::NodeAddress::random(rng);
        const Bytes wire = transport::encode(vnet::encapsulate(pkt, src, dst));
        if (wire.size() == raw.size() + 48) ++overhead_ok;
        const auto back = vnet::decapsulate(transport::decode(wire));
        if (vnet::serialize_ipv4(back) == raw && back == vnet::parse_ipv4(raw)) ++identical;
    }

    // Every single-byte change to magic or version.
    const Bytes wire = transport::encode(
        vnet::encapsulate(vnet::Ipv4Packet::make(VirtualIp(10, 128, 0, 2), VirtualIp(10, 128, 0, 3), 1, Bytes(8)),
                          overlay::NodeAddress::from_u64(1), overlay::NodeAddress::from_u64(2)));
    std::size_t mutations = 0, rejected = 0;
    for (std::size_t pos = 0; pos < 5; ++pos)
        for (int v = 0; v < 256; ++v) {
            if (v == wire[pos]) continue;
            Bytes m = wire;
            m[pos] = static_cast<std::uint8_t>(v);
            ++mutations;
            try {
                transport::decode(m);
            } catch (const transport::DecodeError& e) {
                const auto want = pos < 4 ? transport::DecodeErrc::BadMagic : transport::DecodeErrc::BadVersion;
                if (e.code() == want) ++rejected;
            }
        }
    const bool pass = identical == kEncapsulationSamples && overhead_ok == kEncapsulationSamples &&
                      mutations == 5 * 255 && rejected == mutations;
    return {pass, "round_trips=" + std::to_string(identical) + "/" + std::to_string(kEncapsulationSamples) +
                      " overhead_48=" + std::to_string(overhead_ok) + " header_mutations_rejected=" +
                      std::to_string(rejected) + "/" + std::to_string(mutations)};
}

Outcome checksum()
{
    Rng rng(1071);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < kChecksumSamples; ++i) {
        // Random header of 5 to 15 words, checksum field included.
        Bytes header(4 * static_cast<std::size_t>(rng.uniform_int(5, 15)));
        for (auto& b : header) b = static_cast<std::uint8_t>(rng.next());
        if (vnet::ipv4_checksum(header) == oracle::ones_complement_checksum(header)) ++agree;
    }
    const Bytes zero(20, 0);
    const auto z = vnet::ipv4_checksum(zero);
    const bool pass = agree == kChecksumSamples && z == 0xFFFF;
    std::ostringstream os;
    os << "agree=" << agree << "/" << kChecksumSamples << " zero_header=0x" << std::hex << std::uppercase << z;
    return {pass, os.str()};
}

Outcome nat_matrix()
{
    using nat::NatType;
    const std::vector<std::optional<NatType>> types = {std::nullopt, NatType::FullCone, NatType::RestrictedCone,
                                                       NatType::PortRestrictedCone, NatType::Symmetric};
    auto name = [](std::optional<NatType> t) { return t ? std::string(nat::to_string(*t)) : std::string("none"); };
    auto spec_relayed = [](std::optional<NatType> a, std::optional<NatType> b) {
        auto sym = [](auto t) { return t == NatType::Symmetric; };
        auto prc = [](auto t) { return t == NatType::PortRestrictedCone; };
        return (sym(a) && (sym(b) || prc(b))) || (sym(b) && prc(a));
    };

    std::size_t pairs = 0, oracle_agrees_matrix = 0, punch_agrees = 0, overlay_ok = 0;
    std::uint64_t pings = 0, delivered = 0;
    std::vector<std::string> failures;
    for (std::size_t ia = 0; ia < types.size(); ++ia)
        for (std::size_t ib = 0; ib < types.size(); ++ib) {
            const auto a = types[ia], b = types[ib];
            ++pairs;
            const std::string label = name(a) + "x" + name(b);
            const auto j = oracle::PunchOracle::judge(a, b, kPunchAttempts);
            const bool connected = j.verdict == oracle::PunchOracle::Verdict::Connected;
            if (j.verdict != oracle::PunchOracle::Verdict::Ambiguous && connected != spec_relayed(a, b))
                ++oracle_agrees_matrix;
            else
                failures.push_back(label + ":oracle");

            bool punch_ok = true;
            for (int seed = 1; seed <= kPunchSeeds; ++seed) {
                const auto r = nat::simultaneous_open(a, b, static_cast<std::uint64_t>(seed));
                if ((r.outcome == nat::OpenOutcome::Connected) != connected) punch_ok = false;
            }
            if (punch_ok) ++punch_agrees;
            else failures.push_back(label + ":punch");

            // The same pair behind a public bootstrap, pinging both ways.
            Scenario s = public_ring(3, 100 + pairs);
            s.nodes[1].nat = a;
            s.nodes[2].nat = b;
            Simulator sim(s);
            containment.instrument(sim);
            sim.run_until(sim.warmup_end());
            for (std::uint32_t i = 0; i < kNatPingsEachWay; ++i) {
                sim.ping(vip(1), vip(2));
                sim.ping(vip(2), vip(1));
                sim.run_for(millis(20));
            }
            sim.run_for(seconds(10));
            containment.absorb(sim);
            std::uint64_t ok = 0;
            for (const auto& e : sim.echoes()) ok += !e.timed_out;
            pings += sim.echoes().size();
            delivered += ok;
            const auto* ab = sim.node(1).overlay().table().find(sim.node(2).overlay().address());
            const auto* ba = sim.node(2).overlay().table().find(sim.node(1).overlay().address());
            const bool kind_ok = ab && ba && ab->direct() == connected && ba->direct() == connected;
            if (ok == 2 * kNatPingsEachWay && sim.echoes().size() == 2 * kNatPingsEachWay && kind_ok) ++overlay_ok;
            else failures.push_back(label + ":overlay");
        }
    const bool pass = pairs == 25 && oracle_agrees_matrix == 25 && punch_agrees == 25 && overlay_ok == 25 &&
                      delivered == pings;
    std::string detail = "pairs=" + std::to_string(pairs) + " oracle_matches_matrix=" +
                         std::to_string(oracle_agrees_matrix) + " punch_matches_oracle=" +
                         std::to_string(punch_agrees) + " overlay_links_as_predicted=" + std::to_string(overlay_ok) +
                         " ping_delivery=" + std::to_string(delivered) + "/" + std::to_string(pings);
    for (const auto& f : failures) detail += " fail=" + f;
    return {pass, detail};
}

Outcome brunet_arp()
{
    Scenario s;
    s.seed = 50;
    s.mode = node::ResolutionMode::BrunetArp;
    s.log_packets = false;
    std::map<VirtualIp, std::size_t> owner; // the test's own view of who hosts what
    for (std::size_t i = 0; i < kArpNodes; ++i) {
        sim::NodeSpec spec;
        spec.bootstrap = i == 0;
        for (std::uint32_t j = 0; j < kArpIpsPerNode; ++j) {
            VirtualIp ip(VirtualIp(10, 128, 1, 0).value() + static_cast<std::uint32_t>(i * kArpIpsPerNode + j));
            spec.vips.push_back(ip);
            owner[ip] = i;
        }
        s.nodes.push_back(spec);
    }
    Simulator sim(s);
    containment.instrument(sim);
    sim.run_until(sim.warmup_end());

    std::set<std::size_t> failed;
    // Lookups from every live node for every ip hosted by a live node.
    auto round = [&](bool clear_caches) {
        if (clear_caches)
            for (std::size_t i = 0; i < sim.node_count(); ++i)
                if (sim.alive(i)) sim.node(i).dht().cache().clear();
        auto issued = std::make_shared<std::size_t>(0);
        auto good = std::make_shared<std::size_t>(0);
        for (std::size_t q = 0; q < sim.node_count(); ++q) {
            if (failed.count(q)) continue;
            for (const auto& [ip, host] : owner) {
                if (failed.count(host)) continue;
                ++*issued;
                const auto want = sim.node(host).overlay().address();
                sim.lookup(q, ip, [good, want](const sim::LookupSample& l) {
                    if (l.result.status == resolver::LookupStatus::Found && l.result.owner == want) ++*good;
                });
            }
        }
        sim.run_for(seconds(20)); // three attempts of five seconds each, with margin
        return std::pair{*good, *issued};
    };

    const auto [initial_ok, initial_n] = round(false);

    // Move 20 ips to new hosts, wait one cache lifetime, look again.
    Rng pick(2020);
    std::vector<VirtualIp> ips;
    for (const auto& [ip, host] : owner) ips.push_back(ip);
    std::set<VirtualIp> moved;
    while (moved.size() < kArpMigrations) {
        const auto ip = ips[static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(ips.size()) - 1))];
        if (moved.count(ip)) continue;
        std::size_t to = owner[ip];
        while (to == owner[ip]) to = static_cast<std::size_t>(pick.uniform_int(0, kArpNodes - 1));
        sim.migrate(ip, to);
        owner[ip] = to;
        moved.insert(ip);
    }
    sim.run_for(s.dht.cache_ttl);
    const auto [migrated_ok, migrated_n] = round(false);

    // Fail 10% of the nodes (never the bootstrap). Caches are emptied before
    // each probe so that every answer comes from the ring.
    const auto failures = static_cast<std::size_t>(kArpFailFraction * kArpNodes);
    while (failed.size() < failures) {
        const auto i = static_cast<std::size_t>(pick.uniform_int(1, kArpNodes - 1));
        if (failed.insert(i).second) sim.fail_node(i);
    }
    const TimePoint failed_at = sim.now();
    const auto [early_ok, early_n] = round(true);
    sim.run_until(failed_at + s.dht.reregister_interval);
    const auto [recovered_ok, recovered_n] = round(true);
    containment.absorb(sim);

    const bool pass = initial_n == kArpNodes * kArpNodes * kArpIpsPerNode && initial_ok == initial_n &&
                      migrated_ok == migrated_n && recovered_ok == recovered_n && recovered_n > 0;
    return {pass, "initial=" + std::to_string(initial_ok) + "/" + std::to_string(initial_n) +
                      " after_migrating_20=" + std::to_string(migrated_ok) + "/" + std::to_string(migrated_n) +
                      " just_after_failing_" + std::to_string(failures) + "=" + std::to_string(early_ok) + "/" +
                      std::to_string(early_n) + " one_reregistration_later=" + std::to_string(recovered_ok) + "/" +
                      std::to_string(recovered_n)};
}

Outcome arp_containment()
{
    const bool pass = containment.runs > 0 && containment.tunnel_payloads > 0 && containment.injected > 0 &&
                      containment.tunnel_not_ip == 0 && containment.injected_bad == 0 &&
                      containment.sim_non_ip == 0 && containment.sim_bad_injections == 0;
    return {pass, "runs=" + std::to_string(containment.runs) + " tunnel_payloads=" +
                      std::to_string(containment.tunnel_payloads) + " non_ip=" +
                      std::to_string(containment.tunnel_not_ip + containment.sim_non_ip) + " injected=" +
                      std::to_string(containment.injected) + " bad_injections=" +
                      std::to_string(containment.injected_bad + containment.sim_bad_injections)};
}

// ---------------------------------------------------------------- processes

struct Child {
    pid_t pid = -1;
};

Child spawn(const std::vector<std::string>& args, const std::string& stdout_path)
{
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    const pid_t pid = fork();
    if (pid == 0) {
        if (std::freopen(stdout_path.c_str(), "w", stdout) == nullptr) _exit(127);
        if (std::freopen((stdout_path + ".err").c_str(), "w", stderr) == nullptr) _exit(127);
        execv(argv[0], argv.data());
        _exit(127);
    }
    return {pid};
}

// Exit status, or -1 if the child was still running at the deadline (it
// is then killed).
int wait_for(Child c, std::chrono::seconds limit)
{
    const auto deadline = std::chrono::steady_clock::now() + limit;
    int status = 0;
    while (std::chrono::steady_clock::now() < deadline) {
        if (waitpid(c.pid, &status, WNOHANG) == c.pid) return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    kill(c.pid, SIGKILL);
    waitpid(c.pid, &status, 0);
    return -1;
}

void stop(Child c)
{
    kill(c.pid, SIGTERM);
    int status = 0;
    waitpid(c.pid, &status, 0);
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

Scenario determinism_scenario()
{
    // Loss, reordering and jitter so that the generator is exercised.
    Scenario s = public_ring(12, 99);
    s.mode = node::ResolutionMode::BrunetArp;
    s.log_packets = true;
    s.default_link = {transport::LatencyModel::uniform(millis(2), millis(9)), 0.01, 0.02, std::nullopt};
    s.nodes[4].nat = nat::NatType::Symmetric;
    s.nodes[5].nat = nat::NatType::PortRestrictedCone;
    s.nodes[6].nat = nat::NatType::Symmetric;
    sim::RandomPingsWorkload w;
    w.count = 500;
    w.interval = millis(5);
    s.workloads.push_back(w);
    sim::ChurnWorkload churn;
    churn.fraction = 0.1;
    churn.at = seconds(1);
    s.workloads.push_back(churn);
    return s;
}

Outcome determinism(const std::string& cli, const std::filesystem::path& dir)
{
    auto once = [](std::uint64_t seed) {
        Scenario s = determinism_scenario();
        s.seed = seed;
        Simulator sim(s);
        containment.instrument(sim);
        const std::string out = sim.run().to_jsonl();
        containment.absorb(sim);
        return out;
    };
    const std::string first = once(99);
    const std::string second = once(99);
    const std::string other = once(100);

    const auto config = dir / "determinism.json";
    std::ofstream(config) << R"({"seed": 3, "resolution": "brunet_arp",
  "default_link": {"latency": {"kind": "normal", "mean_ms": 6, "stddev_ms": 2}, "drop": 0.01, "reorder": 0.01},
  "nodes": [{"vip": "10.128.0.2", "bootstrap": true}, {"vip": "10.128.0.3", "nat": "symmetric"},
            {"vip": "10.128.0.4", "nat": "full_cone"}, {"vip": "10.128.0.5"}, {"vip": "10.128.0.6"},
            {"vip": "10.128.0.7", "nat": "port_restricted"}],
  "workloads": [{"type": "random_pings", "count": 300, "interval_ms": 10},
                {"type": "bulk", "src": "10.128.0.3", "dst": "10.128.0.6", "bytes": 200000}]})";
    auto cli_run = [&](const std::string& name) {
        const auto path = (dir / name).string();
        auto c = spawn({cli, "sim-run", "--config", config.string(), "--out", path}, path + ".stdout");
        const int rc = wait_for(c, std::chrono::seconds(120));
        return std::pair{rc, slurp(path)};
    };
    const auto [rc1, cli1] = cli_run("run1.jsonl");
    const auto [rc2, cli2] = cli_run("run2.jsonl");

    const bool pass = !first.empty() && first == second && first != other && rc1 == 0 && rc2 == 0 &&
                      !cli1.empty() && cli1 == cli2;
    return {pass, "library_runs_identical=" + std::string(first == second ? "yes" : "no") +
                      " bytes=" + std::to_string(first.size()) + " other_seed_differs=" +
                      std::string(first != other ? "yes" : "no") + " cli_runs_identical=" +
                      std::string(rc1 == 0 && rc2 == 0 && !cli1.empty() && cli1 == cli2 ? "yes" : "no") +
                      " cli_bytes=" + std::to_string(cli1.size())};
}

std::uint16_t free_udp_port()
{
    transport::UdpChannel probe(transport::Endpoint{Ipv4Address(127, 0, 0, 1), 0});
    return probe.local().port;
}

Outcome udp_smoke(const std::string& cli, const std::filesystem::path& dir)
{
    const auto port = free_udp_port();
    const std::string bind_b = "127.0.0.1:" + std::to_string(port);
    const auto trace_a = (dir / "trace_a.hex").string();
    const auto trace_b = (dir / "trace_b.hex").string();

    auto b = spawn({cli, "node-run", "--bind", bind_b, "--vip", "10.128.0.2", "--duration", "30", "--trace", trace_b},
                   (dir / "node_b.out").string());
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    auto a = spawn({cli, "node-run", "--bind", "127.0.0.1:0", "--bootstrap", bind_b, "--vip", "10.128.0.3", "--ping",
                    "10.128.0.2", "--count", std::to_string(kSmokePings), "--interval-ms", "20", "--trace", trace_a},
                   (dir / "node_a.out").string());
    const int rc = wait_for(a, std::chrono::seconds(60));
    stop(b);

    std::uint64_t received = 0;
    try {
        const auto doc = nlohmann::json::parse(slurp((dir / "node_a.out").string()));
        received = doc.at("received").get<std::uint64_t>();
    } catch (const std::exception&) {
    }

    // The same two nodes and pings in simulation, recording every envelope
    // delivered to either node.
    Scenario s = public_ring(2, 1);
    sim::PingWorkload w;
    w.src = vip(1);
    w.dst = vip(0);
    w.count = kSmokePings;
    w.interval = millis(20);
    s.workloads.push_back(w);
    Simulator sim(s);
    containment.instrument(sim);
    std::set<std::string> simulated;
    for (std::size_t i = 0; i < 2; ++i) {
        auto& node = sim.node(i);
        node.on_tunnel = [&simulated, prev = node.on_tunnel](const transport::BrunetPacket& pkt) {
            simulated.insert(to_hex(transport::encode(pkt)));
            if (prev) prev(pkt);
        };
    }
    sim.run();
    containment.absorb(sim);

    std::size_t real = 0, matched = 0;
    for (const auto& path : {trace_a, trace_b})
        for (const auto& line : lines(slurp(path))) {
            ++real;
            matched += simulated.count(line);
        }
    const bool pass = rc == 0 && received >= kSmokeMinReceived && real >= 2 * kSmokeMinReceived && matched == real;
    return {pass, "exit=" + std::to_string(rc) + " received=" + std::to_string(received) + "/" +
                      std::to_string(kSmokePings) + " real_envelopes=" + std::to_string(real) +
                      " identical_to_simulated=" + std::to_string(matched)};
}

} // namespace

int main(int argc, char** argv)
{
    if (argc < 2) {
        std::cerr << "usage: ipop_acceptance <ipop cli>\n";
        return 2;
    }
    const std::string cli = std::filesystem::absolute(argv[1]).string();
    const auto dir = std::filesystem::temp_directory_path() / ("ipop_acceptance_" + std::to_string(getpid()));
    std::filesystem::create_directories(dir);

    struct Criterion {
        const char* name;
        std::function<Outcome()> check;
    };
    // Containment is reported after every other simulation has run.
    const std::vector<Criterion> criteria = {
        {"overlay-118-random-pings", overlay_118},
        {"two-hop-rtt-accounting", rtt_two_hops},
        {"encapsulation-round-trip", encapsulation},
        {"ipv4-checksum", checksum},
        {"nat-traversal-matrix", nat_matrix},
        {"brunet-arp-resolution", brunet_arp},
        {"determinism", [&] { return determinism(cli, dir); }},
        {"real-udp-smoke", [&] { return udp_smoke(cli, dir); }},
        {"arp-containment", arp_containment},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << "  " << o.detail << "  (" << fmt(secs, 1) << " s)"
                  << std::endl;
    }
    std::filesystem::remove_all(dir);
    std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << std::endl;
    return failed == 0 ? 0 : 1;
}
