#include "ipop/sim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace ipop::sim {

using nlohmann::json;

namespace {

template <class T>
T get(const json& obj, const char* key, const std::string& path, T fallback)
{
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + "." + key, "has the wrong type");
    }
}

std::string join_path(const std::string& base, const char* key)
{
    return base.empty() ? std::string(key) : base + "." + key;
}

Micros get_seconds(const json& obj, const char* key, const std::string& path, Micros fallback)
{
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    if (!it->is_number()) throw ConfigError(join_path(path, key), "must be a number of seconds");
    double s = it->get<double>();
    if (!(s >= 0) || !std::isfinite(s)) throw ConfigError(join_path(path, key), "must be non-negative");
    return Micros{std::llround(s * 1e6)};
}

Micros get_millis(const json& obj, const char* key, const std::string& path, Micros fallback)
{
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    if (!it->is_number()) throw ConfigError(join_path(path, key), "must be a number of milliseconds");
    double ms = it->get<double>();
    if (!(ms >= 0) || !std::isfinite(ms)) throw ConfigError(join_path(path, key), "must be non-negative");
    return Micros{std::llround(ms * 1e3)};
}

VirtualIp get_ip(const json& obj, const char* key, const std::string& path)
{
    auto it = obj.find(key);
    const std::string field = join_path(path, key);
    if (it == obj.end() || !it->is_string()) throw ConfigError(field, "missing IPv4 address");
    auto ip = Ipv4Address::parse(it->get<std::string>());
    if (!ip) throw ConfigError(field, "invalid IPv4 address '" + it->get<std::string>() + "'");
    return *ip;
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known)
{
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError(join_path(path, key.c_str()), "unknown field");
    }
}

Workload parse_workload(const json& w, const std::string& path)
{
    if (!w.is_object()) throw ConfigError(path, "must be an object");
    const std::string type = get<std::string>(w, "type", path, "");
    if (type == "ping") {
        reject_unknown(w, path, {"type", "src", "dst", "count", "interval_ms", "start_s", "timeout_s"});
        PingWorkload p;
        p.src = get_ip(w, "src", path);
        p.dst = get_ip(w, "dst", path);
        p.count = get<std::uint32_t>(w, "count", path, p.count);
        p.interval = get_millis(w, "interval_ms", path, p.interval);
        p.start = get_seconds(w, "start_s", path, p.start);
        p.timeout = get_seconds(w, "timeout_s", path, p.timeout);
        return p;
    }
    if (type == "random_pings") {
        reject_unknown(w, path, {"type", "count", "interval_ms", "start_s", "timeout_s"});
        RandomPingsWorkload p;
        p.count = get<std::uint32_t>(w, "count", path, p.count);
        p.interval = get_millis(w, "interval_ms", path, p.interval);
        p.start = get_seconds(w, "start_s", path, p.start);
        p.timeout = get_seconds(w, "timeout_s", path, p.timeout);
        return p;
    }
    if (type == "bulk") {
        reject_unknown(w, path, {"type", "src", "dst", "bytes", "chunk", "window", "start_s", "stall_timeout_s"});
        BulkWorkload b;
        b.src = get_ip(w, "src", path);
        b.dst = get_ip(w, "dst", path);
        b.bytes = get<std::uint64_t>(w, "bytes", path, b.bytes);
        b.chunk = get<std::size_t>(w, "chunk", path, b.chunk);
        b.window = get<std::size_t>(w, "window", path, b.window);
        b.start = get_seconds(w, "start_s", path, b.start);
        b.stall_timeout = get_seconds(w, "stall_timeout_s", path, b.stall_timeout);
        return b;
    }
    if (type == "churn") {
        reject_unknown(w, path, {"type", "fraction", "at_s", "report_after_s"});
        ChurnWorkload c;
        c.fraction = get<double>(w, "fraction", path, c.fraction);
        c.at = get_seconds(w, "at_s", path, c.at);
        if (w.contains("report_after_s")) c.report_after = get_seconds(w, "report_after_s", path, {});
        return c;
    }
    if (type == "lookup") {
        reject_unknown(w, path, {"type", "at_s", "spacing_ms", "sample"});
        LookupWorkload l;
        l.at = get_seconds(w, "at_s", path, l.at);
        l.spacing = get_millis(w, "spacing_ms", path, l.spacing);
        if (w.contains("sample")) l.sample = get<std::uint32_t>(w, "sample", path, 0);
        return l;
    }
    if (type == "migrate") {
        reject_unknown(w, path, {"type", "count", "moves", "at_s"});
        MigrateWorkload m;
        m.count = get<std::uint32_t>(w, "count", path, 0);
        m.at = get_seconds(w, "at_s", path, m.at);
        if (auto it = w.find("moves"); it != w.end()) {
            if (!it->is_array()) throw ConfigError(path + ".moves", "must be an array");
            for (std::size_t i = 0; i < it->size(); ++i) {
                const std::string mp = path + ".moves[" + std::to_string(i) + "]";
                m.moves.emplace_back(get_ip((*it)[i], "ip", mp), get_ip((*it)[i], "to", mp));
            }
        }
        return m;
    }
    if (type == "snapshot") {
        reject_unknown(w, path, {"type", "at_s", "every_s", "repeat"});
        SnapshotWorkload s;
        s.at = get_seconds(w, "at_s", path, s.at);
        if (w.contains("every_s")) s.every = get_seconds(w, "every_s", path, {});
        s.repeat = get<std::uint32_t>(w, "repeat", path, s.repeat);
        return s;
    }
    throw ConfigError(path + ".type", "unknown workload type '" + type + "'");
}

} // namespace

transport::ChannelProfile parse_profile(const json& doc, const std::string& path)
{
    if (!doc.is_object()) throw ConfigError(path, "must be an object");
    transport::ChannelProfile p;
    if (doc.contains("latency_ms")) {
        p.latency = transport::LatencyModel::constant(get_millis(doc, "latency_ms", path, {}));
    } else if (doc.contains("latency_us")) {
        p.latency = transport::LatencyModel::constant(Micros{get<std::int64_t>(doc, "latency_us", path, 0)});
    } else if (auto it = doc.find("latency"); it != doc.end()) {
        const std::string lp = path + ".latency";
        const std::string kind = get<std::string>(*it, "kind", lp, "fixed");
        if (kind == "fixed") {
            p.latency = transport::LatencyModel::constant(get_millis(*it, "ms", lp, millis(5)));
        } else if (kind == "uniform") {
            p.latency = transport::LatencyModel::uniform(get_millis(*it, "min_ms", lp, {}),
                                                         get_millis(*it, "max_ms", lp, {}));
            if (p.latency.max < p.latency.min) throw ConfigError(lp + ".max_ms", "must be at least min_ms");
        } else if (kind == "normal") {
            p.latency = transport::LatencyModel::normal(get_millis(*it, "mean_ms", lp, {}),
                                                        get_millis(*it, "stddev_ms", lp, {}));
        } else {
            throw ConfigError(lp + ".kind", "unknown latency model '" + kind + "'");
        }
    }
    p.drop = get<double>(doc, "drop", path, 0.0);
    p.reorder = get<double>(doc, "reorder", path, 0.0);
    if (doc.contains("bandwidth_Bps") && !doc["bandwidth_Bps"].is_null())
        p.bandwidth = get<double>(doc, "bandwidth_Bps", path, 0.0);
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    return p;
}

Scenario Scenario::from_json(const json& doc)
{
    if (!doc.is_object()) throw ConfigError("$", "scenario must be a JSON object");
    reject_unknown(doc, "", {"seed", "resolution", "subnet", "payload_mtu", "k", "small_world", "shortcut_threshold",
                             "processing_us", "join_interval_ms", "settle_s", "duration_s", "log_packets",
                             "default_link", "links", "nodes", "generate", "workloads", "keepalive_s"});
    Scenario s;
    s.seed = get<std::uint64_t>(doc, "seed", "", s.seed);
    const std::string mode = get<std::string>(doc, "resolution", "", "direct");
    if (mode == "direct") s.mode = node::ResolutionMode::Direct;
    else if (mode == "brunet_arp" || mode == "brunet-arp") s.mode = node::ResolutionMode::BrunetArp;
    else throw ConfigError("resolution", "must be direct or brunet_arp");

    if (doc.contains("subnet")) {
        auto subnet = vnet::Subnet::parse(get<std::string>(doc, "subnet", "", ""));
        if (!subnet) throw ConfigError("subnet", "invalid CIDR");
        s.subnet = *subnet;
    }
    s.payload_mtu = get<std::size_t>(doc, "payload_mtu", "", s.payload_mtu);
    s.overlay.k = get<std::size_t>(doc, "k", "", s.overlay.k);
    s.overlay.small_world_shortcuts = get<bool>(doc, "small_world", "", s.overlay.small_world_shortcuts);
    s.overlay.shortcut_threshold = get<std::size_t>(doc, "shortcut_threshold", "", s.overlay.shortcut_threshold);
    s.overlay.keepalive_interval = get_seconds(doc, "keepalive_s", "", s.overlay.keepalive_interval);
    s.processing_delay = Micros{get<std::int64_t>(doc, "processing_us", "", s.processing_delay.count())};
    s.join_interval = get_millis(doc, "join_interval_ms", "", s.join_interval);
    s.settle = get_seconds(doc, "settle_s", "", s.settle);
    if (doc.contains("duration_s")) s.duration = get_seconds(doc, "duration_s", "", {});
    s.log_packets = get<bool>(doc, "log_packets", "", s.log_packets);

    if (doc.contains("default_link")) s.default_link = parse_profile(doc["default_link"], "default_link");
    if (auto it = doc.find("links"); it != doc.end()) {
        if (!it->is_array()) throw ConfigError("links", "must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string path = "links[" + std::to_string(i) + "]";
            const json& l = (*it)[i];
            json profile = l;
            profile.erase("a");
            profile.erase("b");
            s.links.push_back(LinkOverride{get_ip(l, "a", path), get_ip(l, "b", path), parse_profile(profile, path)});
        }
    }

    if (auto it = doc.find("nodes"); it != doc.end()) {
        if (!it->is_array()) throw ConfigError("nodes", "must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string path = "nodes[" + std::to_string(i) + "]";
            const json& n = (*it)[i];
            if (!n.is_object()) throw ConfigError(path, "must be an object");
            reject_unknown(n, path, {"vip", "vips", "nat", "bootstrap", "public_ip"});
            NodeSpec spec;
            if (n.contains("vip")) spec.vips.push_back(get_ip(n, "vip", path));
            if (auto v = n.find("vips"); v != n.end()) {
                if (!v->is_array()) throw ConfigError(path + ".vips", "must be an array");
                for (std::size_t j = 0; j < v->size(); ++j) {
                    const std::string vp = path + ".vips[" + std::to_string(j) + "]";
                    if (!(*v)[j].is_string()) throw ConfigError(vp, "must be a string");
                    auto ip = Ipv4Address::parse((*v)[j].get<std::string>());
                    if (!ip) throw ConfigError(vp, "invalid IPv4 address '" + (*v)[j].get<std::string>() + "'");
                    spec.vips.push_back(*ip);
                }
            }
            const std::string nat = get<std::string>(n, "nat", path, "none");
            if (nat != "none") {
                spec.nat = nat::parse_nat_type(nat);
                if (!spec.nat) throw ConfigError(path + ".nat", "unknown NAT type '" + nat + "'");
            }
            spec.bootstrap = get<bool>(n, "bootstrap", path, false);
            if (n.contains("public_ip")) spec.public_ip = get_ip(n, "public_ip", path);
            s.nodes.push_back(std::move(spec));
        }
    }

    if (auto g = doc.find("generate"); g != doc.end()) {
        // Convenience: count public nodes with consecutive virtual IPs; the
        // first one bootstraps the ring.
        reject_unknown(*g, "generate", {"count", "first_vip", "vips_per_node"});
        const auto count = get<std::uint32_t>(*g, "count", "generate", 0);
        const auto per_node = get<std::uint32_t>(*g, "vips_per_node", "generate", 1);
        VirtualIp next = g->contains("first_vip") ? get_ip(*g, "first_vip", "generate")
                                                  : VirtualIp(s.subnet.base.value() + 2);
        const bool had_bootstrap = !s.nodes.empty();
        for (std::uint32_t i = 0; i < count; ++i) {
            NodeSpec spec;
            spec.bootstrap = !had_bootstrap && i == 0;
            for (std::uint32_t j = 0; j < per_node; ++j) {
                spec.vips.push_back(next);
                next = VirtualIp(next.value() + 1);
            }
            s.nodes.push_back(std::move(spec));
        }
    }

    if (auto it = doc.find("workloads"); it != doc.end()) {
        if (!it->is_array()) throw ConfigError("workloads", "must be an array");
        for (std::size_t i = 0; i < it->size(); ++i)
            s.workloads.push_back(parse_workload((*it)[i], "workloads[" + std::to_string(i) + "]"));
    }

    s.validate();
    return s;
}

Scenario Scenario::from_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return from_json(doc);
}

void Scenario::validate() const
{
    if (nodes.empty()) throw ConfigError("nodes", "at least one node is required");
    if (overlay.k == 0) throw ConfigError("k", "must be at least 1");
    if (payload_mtu < 128 || payload_mtu > 1400) throw ConfigError("payload_mtu", "must be between 128 and 1400");
    if (processing_delay.count() < 0) throw ConfigError("processing_us", "must be non-negative");

    std::set<VirtualIp> seen;
    bool public_bootstrap = false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string path = "nodes[" + std::to_string(i) + "]";
        const auto& n = nodes[i];
        if (n.bootstrap && !n.nat) public_bootstrap = true;
        if (n.bootstrap && n.nat) throw ConfigError(path + ".bootstrap", "a bootstrap node must not be behind a NAT");
        if (mode == node::ResolutionMode::Direct && n.vips.size() != 1)
            throw ConfigError(path + ".vips", "direct resolution needs exactly one virtual IP per node");
        for (const auto& ip : n.vips) {
            if (!subnet.contains(ip))
                throw ConfigError(path + ".vip", "virtual IP " + ip.to_string() + " is outside " + subnet.to_string());
            if (ip == subnet.gateway())
                throw ConfigError(path + ".vip", "virtual IP " + ip.to_string() + " is the gateway address");
            if (!seen.insert(ip).second)
                throw ConfigError(path + ".vip", "duplicate virtual IP " + ip.to_string());
        }
    }
    if (!public_bootstrap) throw ConfigError("nodes", "at least one bootstrap node with nat none is required");

    auto known = [&](VirtualIp ip) { return seen.count(ip) != 0; };
    for (std::size_t i = 0; i < links.size(); ++i) {
        const std::string path = "links[" + std::to_string(i) + "]";
        if (!known(links[i].a)) throw ConfigError(path + ".a", "unknown virtual IP " + links[i].a.to_string());
        if (!known(links[i].b)) throw ConfigError(path + ".b", "unknown virtual IP " + links[i].b.to_string());
    }
    for (std::size_t i = 0; i < workloads.size(); ++i) {
        const std::string path = "workloads[" + std::to_string(i) + "]";
        std::visit(
            [&](const auto& w) {
                using W = std::decay_t<decltype(w)>;
                if constexpr (std::is_same_v<W, PingWorkload> || std::is_same_v<W, BulkWorkload>) {
                    if (!known(w.src)) throw ConfigError(path + ".src", "unknown virtual IP " + w.src.to_string());
                    if (!known(w.dst)) throw ConfigError(path + ".dst", "unknown virtual IP " + w.dst.to_string());
                }
                if constexpr (std::is_same_v<W, PingWorkload>) {
                    if (w.interval.count() <= 0 && w.count > 1) throw ConfigError(path + ".interval_ms", "must be positive");
                }
                if constexpr (std::is_same_v<W, RandomPingsWorkload>) {
                    if (seen.size() < 2) throw ConfigError(path, "needs at least two virtual IPs");
                }
                if constexpr (std::is_same_v<W, BulkWorkload>) {
                    const std::size_t max_chunk = payload_mtu - transport::kHeaderSize - 20;
                    if (w.chunk == 0 || w.chunk > max_chunk)
                        throw ConfigError(path + ".chunk", "must be between 1 and " + std::to_string(max_chunk));
                    if (w.window == 0) throw ConfigError(path + ".window", "must be at least 1");
                }
                if constexpr (std::is_same_v<W, ChurnWorkload>) {
                    if (!(w.fraction >= 0.0 && w.fraction < 1.0))
                        throw ConfigError(path + ".fraction", "must be in [0, 1)");
                }
                if constexpr (std::is_same_v<W, MigrateWorkload>) {
                    if (mode != node::ResolutionMode::BrunetArp)
                        throw ConfigError(path + ".type", "migration needs brunet_arp resolution");
                    for (const auto& [ip, to] : w.moves) {
                        if (!known(ip)) throw ConfigError(path + ".moves", "unknown virtual IP " + ip.to_string());
                        if (!known(to)) throw ConfigError(path + ".moves", "unknown virtual IP " + to.to_string());
                    }
                }
                if constexpr (std::is_same_v<W, LookupWorkload>) {
                    if (mode != node::ResolutionMode::BrunetArp)
                        throw ConfigError(path + ".type", "lookups need brunet_arp resolution");
                }
            },
            workloads[i]);
    }
}

} // namespace ipop::sim
