#ifndef CARSHARE_NET_HPP
#define CARSHARE_NET_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace carshare {

// Dense 0-based indices into NetworkSpec::stations / NetworkSpec::links.
using StationId = std::int32_t;
using LinkId = std::int32_t;

// A queue of the closed network is either a station (single server) or a
// travel delay link (infinite server).
struct QueueRef {
    enum class Kind { station, link };
    Kind kind = Kind::station;
    std::int32_t index = 0;

    static QueueRef station(StationId i) { return {Kind::station, i}; }
    static QueueRef link(LinkId l) { return {Kind::link, l}; }
    std::string label() const;
    friend bool operator==(const QueueRef&, const QueueRef&) = default;
};

// A service centre: parked cars wait here for customers. Customer arrivals
// headed for destination j form a Poisson stream of rate mu_per_dest[j]
// (customers/hour). alpha_per_dest[j] is the stackable-relocation
// probability toward j (absent = 0).
struct StationSpec {
    StationId id = 0;
    std::map<StationId, double> mu_per_dest;
    std::map<StationId, double> alpha_per_dest;
    // Set when the data source provided only the aggregate pickup rate;
    // derive_mu_split() turns it into mu_per_dest.
    std::optional<double> mu_aggregate;

    double mu_total() const;
    double alpha_for(StationId dest) const;
};

// Travel from origin to dest: each car is delayed Exp with the given mean,
// independently of the others. routing_prob is the probability a customer
// picking up at origin heads for dest.
struct DelayLink {
    LinkId id = 0;
    StationId origin = 0;
    StationId dest = 0;
    double mean_travel_time_h = 0.0;
    double routing_prob = 0.0;
};

// One closed-network instance: a fixed fleet circulates between stations
// and links. Immutable after construction; safe to share across readers.
struct NetworkSpec {
    std::vector<StationSpec> stations;
    std::vector<DelayLink> links;
    int fleet_size = 0;

    std::size_t station_count() const { return stations.size(); }
    std::size_t link_count() const { return links.size(); }
};

enum class Rule {
    station_id_dense,
    link_endpoint,
    positive_rate,
    alpha_range,
    alpha_without_rate,
    travel_time,
    routing_prob_range,
    duplicate_link,
    row_stochastic,
    per_dest_rate_missing,
    rate_without_link,
    routing_rate_mismatch,
    irreducibility,
    fleet_size,
};

const char* rule_name(Rule r);

struct Violation {
    Rule rule;
    QueueRef where;
    std::string detail;

    std::string to_string() const;
};

// Checks every structural invariant of the spec. Violations are data, not
// failures; an empty result means every solver and simulator accepts the
// spec.
std::vector<Violation> validate(const NetworkSpec& spec);

// For stations carrying only an aggregate rate, splits it across the
// outgoing routing row: mu_ij = mu_i * p_ij. Throws ConsistencyError when a
// station has an aggregate rate but no routing row.
NetworkSpec derive_mu_split(const NetworkSpec& spec);

// Strongly connected components of the station routing graph (edges where
// p_ij > 0), largest first; deterministic order.
std::vector<std::vector<StationId>> station_sccs(const NetworkSpec& spec);

// Generic SCC helper on an adjacency list, largest component first.
std::vector<std::vector<std::int32_t>>
strongly_connected_components(const std::vector<std::vector<std::int32_t>>& adj);

} // namespace carshare

#endif
