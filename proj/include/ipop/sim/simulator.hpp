#pragma once

#include "ipop/nat/nat_device.hpp"
#include "ipop/node/ipop_node.hpp"
#include "ipop/sim/metrics.hpp"
#include "ipop/sim/scenario.hpp"
#include "ipop/transport/event_queue.hpp"
#include "ipop/transport/simulated_channel.hpp"
#include "ipop/vnet/host_stack.hpp"

#include <map>
#include <memory>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace ipop::sim {

struct PathHop {
    std::size_t node = 0; // node that received this transmission
    Micros latency{};
    Micros queueing{};
    Micros held{};
};

/// The life of one IP packet handed to IPOP by a host.
struct TraceRecord {
    std::uint64_t id = 0;
    std::size_t origin = 0;
    TimePoint sent_at{};
    std::uint8_t protocol = 0;
    std::vector<PathHop> hops;
    std::optional<std::size_t> delivered_to;
    TimePoint delivered_at{};
    std::optional<std::string> dropped;
};

struct EchoSample {
    VirtualIp src;
    VirtualIp dst;
    std::uint16_t seq = 0;
    bool timed_out = false;
    Micros rtt{};
    std::uint64_t request_trace = 0; // 0 for loopback pings
    std::uint64_t reply_trace = 0;
};

struct BulkResult {
    VirtualIp src;
    VirtualIp dst;
    std::uint64_t bytes_requested = 0;
    std::uint64_t bytes_delivered = 0;
    std::uint64_t chunks = 0;
    TimePoint first_send{};
    TimePoint last_delivery{};
    bool complete = false;
    double throughput_Bps = 0.0; // delivered bytes / (last delivery - first send)
};

struct LookupSample {
    TimePoint finished_at{};
    std::size_t querier = 0;
    VirtualIp ip;
    resolver::LookupResult result;
    std::optional<overlay::NodeAddress> expected; // current owner's address
    bool matches = false;
};

struct RingReport {
    std::size_t nodes = 0;
    std::size_t consistent = 0;
    std::vector<std::size_t> inconsistent;
    double fraction() const { return nodes == 0 ? 1.0 : static_cast<double>(consistent) / static_cast<double>(nodes); }
};

struct ChurnReport {
    TimePoint failed_at{};
    TimePoint reported_at{};
    std::vector<std::size_t> failed;
    RingReport ring;
    std::size_t lookups = 0;
    std::size_t lookups_ok = 0;
    double lookup_success() const { return lookups == 0 ? 1.0 : static_cast<double>(lookups_ok) / static_cast<double>(lookups); }
};

struct SimCounters {
    std::uint64_t channel_sent = 0;
    std::uint64_t channel_delivered = 0;
    std::uint64_t channel_dropped = 0;
    std::uint64_t channel_in_flight = 0;
    std::uint64_t nat_filtered = 0;
    std::uint64_t unroutable = 0;
    std::uint64_t dead_drops = 0;
    std::uint64_t oversize = 0;
    std::uint64_t monotone_violations = 0;
    std::uint64_t forward_decisions = 0;
    std::uint64_t overlay_non_ip_payloads = 0; // tunnel payloads that are not IPv4 (ARP would land here)
    std::uint64_t tunnel_payloads_checked = 0;
    std::uint64_t injections = 0;
    std::uint64_t bad_injections = 0; // wrong source MAC or failed inner checksum
};

/// Deterministic discrete-event run of a scenario: nodes, NAT boxes and
/// links in simulated time, with workloads driving real host stacks.
///
/// Every node output (datagram or frame injection) leaves after the
/// per-node processing delay, so a packet crossing h overlay links spends
/// the sum of its link delays plus (h + 1) processing delays in transit.
class Simulator {
public:
    explicit Simulator(Scenario scenario);
    ~Simulator();
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    // Full run: build, warm up, drive every workload to completion (or the
    // configured duration) and append the summary.
    const MetricsLog& run();

    // Step-wise control for tests and tools.
    void build();
    void run_until(TimePoint t);
    void run_for(Micros d) { run_until(now() + d); }
    TimePoint now() const { return queue_.now(); }
    TimePoint warmup_end() const { return warmup_end_; }

    const Scenario& scenario() const { return scenario_; }
    std::size_t node_count() const { return nodes_.size(); }
    node::IpopNode& node(std::size_t i);
    const node::IpopNode& node(std::size_t i) const;
    bool alive(std::size_t i) const;
    std::optional<std::size_t> owner_of(VirtualIp ip) const;
    const nat::NatDevice* nat_of(std::size_t i) const;
    transport::Endpoint local_endpoint(std::size_t i) const;

    void fail_node(std::size_t i);
    void migrate(VirtualIp ip, std::size_t to);
    void ping(VirtualIp src, VirtualIp dst, Micros timeout = seconds(5));
    void lookup(std::size_t from, VirtualIp ip, std::function<void(const LookupSample&)> done = {});

    RingReport ring_report() const;
    MetricsLog::Record snapshot_record() const;

    const MetricsLog& log() const { return log_; }
    const std::vector<EchoSample>& echoes() const { return echoes_; }
    const std::vector<BulkResult>& bulk_results() const { return bulk_results_; }
    const std::vector<LookupSample>& lookups() const { return lookups_; }
    const std::vector<ChurnReport>& churn_reports() const { return churn_reports_; }
    const std::map<std::uint64_t, TraceRecord>& traces() const { return traces_; }
    SimCounters counters() const;
    std::size_t outstanding() const { return outstanding_; }

private:
    class Env;
    struct SimNode;
    struct Meta {
        transport::Endpoint from;
        transport::Endpoint to;
        std::uint64_t trace = 0;
    };
    struct EchoPending {
        TimePoint requested_at{};
        std::optional<TimePoint> emitted_at;
        std::uint64_t request_trace = 0;
        std::uint64_t reply_trace = 0;
    };
    struct BulkState {
        BulkResult result;
        std::size_t chunk = 0;
        std::size_t window = 0;
        Micros stall_timeout{};
        std::uint64_t bytes_sent = 0;
        std::size_t in_flight = 0;
        TimePoint last_progress{};
        bool done = false;
    };
    using EchoKey = std::tuple<std::uint32_t, std::uint32_t, std::uint16_t>;

    void add_host(std::size_t idx, VirtualIp ip);
    void remove_host(std::size_t idx, VirtualIp ip);
    void schedule_workload(const Workload& w);

    void transmit(std::size_t from, const transport::Endpoint& to, Bytes datagram);
    void depart(std::size_t from, const transport::Endpoint& to, Bytes datagram);
    void arrive(std::size_t at, Bytes datagram, const transport::DeliveryInfo& info);
    transport::SimulatedChannel& channel(std::size_t from, std::size_t to);
    std::optional<std::size_t> node_at(Ipv4Address ip) const;

    void inject(std::size_t idx, VirtualIp ip, Bytes frame);
    void drain_host(std::size_t idx);
    void note_host_frame(std::size_t idx, ByteView frame);
    std::uint64_t trace_of(ByteView datagram) const;
    void mark_dropped(std::uint64_t trace, const char* reason);

    void start_echo(VirtualIp src, VirtualIp dst, Micros timeout);
    void finish_echo(const EchoKey& key, std::optional<TimePoint> received_at);
    void start_bulk(const BulkWorkload& w);
    void pump_bulk(std::size_t index);
    void check_bulk(std::size_t index);
    void bulk_received(VirtualIp src, VirtualIp dst, std::size_t bytes, TimePoint now);
    void finish_bulk(std::size_t index);
    void finish_lookup(std::size_t from, VirtualIp ip, const resolver::LookupResult& result,
                       const std::function<void(const LookupSample&)>& done);
    void start_churn(const ChurnWorkload& w);
    void start_lookups(const LookupWorkload& w);
    void start_migrations(const MigrateWorkload& w);
    std::vector<std::size_t> alive_nodes() const;
    std::vector<VirtualIp> live_vips() const;

    void append_summary();

    Scenario scenario_;
    transport::EventQueue queue_;
    Rng rng_;
    Rng workload_rng_;
    MetricsLog log_;
    bool built_ = false;
    TimePoint warmup_end_{};

    std::vector<std::unique_ptr<SimNode>> nodes_;
    std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<transport::SimulatedChannel>> channels_;
    std::map<std::pair<std::size_t, std::size_t>, transport::ChannelProfile> overrides_;
    std::map<std::uint32_t, std::size_t> by_public_ip_;
    std::map<VirtualIp, std::size_t> vip_owner_;

    std::unordered_map<std::uint64_t, Meta> meta_;
    std::uint64_t next_meta_ = 0;
    std::map<std::uint64_t, TraceRecord> traces_;
    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint16_t>, std::uint64_t> origin_keys_;
    std::uint64_t next_trace_ = 0;

    std::map<EchoKey, EchoPending> echo_pending_;
    std::map<VirtualIp, std::uint16_t> next_seq_;
    std::vector<EchoSample> echoes_;
    std::vector<BulkState> bulks_;
    std::vector<BulkResult> bulk_results_;
    std::vector<LookupSample> lookups_;
    std::vector<ChurnReport> churn_reports_;
    std::size_t outstanding_ = 0;
    SimCounters counters_;
};

} // namespace ipop::sim
