#include "carshare/net.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "carshare/errors.hpp"

namespace carshare {

std::string QueueRef::label() const {
    std::ostringstream os;
    os << (kind == Kind::station ? "station " : "link ") << index;
    return os.str();
}

double StationSpec::mu_total() const {
    double s = 0.0;
    for (const auto& [dest, mu] : mu_per_dest) {
        (void)dest;
        s += mu;
    }
    return s;
}

double StationSpec::alpha_for(StationId dest) const {
    auto it = alpha_per_dest.find(dest);
    return it == alpha_per_dest.end() ? 0.0 : it->second;
}

const char* rule_name(Rule r) {
    switch (r) {
    case Rule::station_id_dense: return "StationIdDense";
    case Rule::link_endpoint: return "LinkEndpoint";
    case Rule::positive_rate: return "PositiveRate";
    case Rule::alpha_range: return "AlphaRange";
    case Rule::alpha_without_rate: return "AlphaWithoutRate";
    case Rule::travel_time: return "TravelTime";
    case Rule::routing_prob_range: return "RoutingProbRange";
    case Rule::duplicate_link: return "DuplicateLink";
    case Rule::row_stochastic: return "RowStochastic";
    case Rule::per_dest_rate_missing: return "PerDestRateMissing";
    case Rule::rate_without_link: return "RateWithoutLink";
    case Rule::routing_rate_mismatch: return "RoutingRateMismatch";
    case Rule::irreducibility: return "Irreducibility";
    case Rule::fleet_size: return "FleetSize";
    }
    return "Unknown";
}

std::string Violation::to_string() const {
    std::ostringstream os;
    os << rule_name(rule) << " at " << where.label();
    if (!detail.empty()) os << ": " << detail;
    return os.str();
}

namespace {

constexpr double kRowSumTol = 1e-9;
constexpr double kRateRoutingTol = 1e-6;

// Iterative Tarjan; recursion depth would be a liability on big station sets.
struct TarjanState {
    const std::vector<std::vector<std::int32_t>>& adj;
    std::vector<std::int32_t> index, lowlink;
    std::vector<bool> on_stack;
    std::vector<std::int32_t> stack;
    std::int32_t next_index = 0;
    std::vector<std::vector<std::int32_t>> comps;

    explicit TarjanState(const std::vector<std::vector<std::int32_t>>& a)
        : adj(a), index(a.size(), -1), lowlink(a.size(), 0), on_stack(a.size(), false) {}

    void run(std::int32_t root) {
        struct Frame {
            std::int32_t v;
            std::size_t child;
        };
        std::vector<Frame> frames{{root, 0}};
        index[root] = lowlink[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            auto& [v, child] = frames.back();
            if (child < adj[v].size()) {
                std::int32_t w = adj[v][child++];
                if (index[w] < 0) {
                    index[w] = lowlink[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.push_back({w, 0});
                } else if (on_stack[w]) {
                    lowlink[v] = std::min(lowlink[v], index[w]);
                }
            } else {
                if (lowlink[v] == index[v]) {
                    std::vector<std::int32_t> comp;
                    std::int32_t w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp.push_back(w);
                    } while (w != v);
                    std::sort(comp.begin(), comp.end());
                    comps.push_back(std::move(comp));
                }
                std::int32_t done = v;
                frames.pop_back();
                if (!frames.empty())
                    lowlink[frames.back().v] = std::min(lowlink[frames.back().v], lowlink[done]);
            }
        }
    }
};

} // namespace

std::vector<std::vector<std::int32_t>>
strongly_connected_components(const std::vector<std::vector<std::int32_t>>& adj) {
    TarjanState t(adj);
    for (std::int32_t v = 0; v < static_cast<std::int32_t>(adj.size()); ++v)
        if (t.index[v] < 0) t.run(v);
    std::stable_sort(t.comps.begin(), t.comps.end(),
                     [](const auto& a, const auto& b) {
                         if (a.size() != b.size()) return a.size() > b.size();
                         return a.front() < b.front();
                     });
    return t.comps;
}

std::vector<std::vector<StationId>> station_sccs(const NetworkSpec& spec) {
    std::vector<std::vector<std::int32_t>> adj(spec.station_count());
    for (const auto& l : spec.links) {
        if (l.origin >= 0 && l.origin < static_cast<StationId>(adj.size()) &&
            l.dest >= 0 && l.dest < static_cast<StationId>(adj.size()) && l.routing_prob > 0)
            adj[l.origin].push_back(l.dest);
    }
    return strongly_connected_components(adj);
}

std::vector<Violation> validate(const NetworkSpec& spec) {
    std::vector<Violation> out;
    const auto S = static_cast<StationId>(spec.station_count());

    if (spec.fleet_size < 1)
        out.push_back({Rule::fleet_size, QueueRef::station(0),
                       "fleet_size must be >= 1, got " + std::to_string(spec.fleet_size)});

    for (StationId i = 0; i < S; ++i) {
        if (spec.stations[i].id != i) {
            out.push_back({Rule::station_id_dense, QueueRef::station(i),
                           "expected id " + std::to_string(i) + ", got " +
                               std::to_string(spec.stations[i].id)});
        }
    }

    // Link-level checks plus per-origin routing rows.
    std::set<std::pair<StationId, StationId>> seen_pairs;
    std::vector<double> row_sum(S, 0.0);
    std::vector<std::map<StationId, double>> row_p(S);
    for (LinkId l = 0; l < static_cast<LinkId>(spec.link_count()); ++l) {
        const auto& lk = spec.links[l];
        bool endpoints_ok = lk.origin >= 0 && lk.origin < S && lk.dest >= 0 && lk.dest < S;
        if (!endpoints_ok) {
            out.push_back({Rule::link_endpoint, QueueRef::link(l),
                           "origin/dest must name existing stations"});
            continue;
        }
        if (!(lk.mean_travel_time_h > 0) || !std::isfinite(lk.mean_travel_time_h))
            out.push_back({Rule::travel_time, QueueRef::link(l),
                           "mean travel time must be > 0"});
        if (!(lk.routing_prob > 0) || lk.routing_prob > 1 || !std::isfinite(lk.routing_prob))
            out.push_back({Rule::routing_prob_range, QueueRef::link(l),
                           "p must lie in (0, 1]"});
        if (!seen_pairs.insert({lk.origin, lk.dest}).second)
            out.push_back({Rule::duplicate_link, QueueRef::link(l),
                           "second link for the same origin/dest pair"});
        row_sum[lk.origin] += lk.routing_prob;
        row_p[lk.origin][lk.dest] = lk.routing_prob;
    }

    for (StationId i = 0; i < S; ++i) {
        const auto& st = spec.stations[i];
        double mu_i = 0.0;
        for (const auto& [dest, mu] : st.mu_per_dest) {
            if (!(mu > 0) || !std::isfinite(mu))
                out.push_back({Rule::positive_rate, QueueRef::station(i),
                               "mu toward " + std::to_string(dest) + " must be > 0"});
            mu_i += mu;
        }
        if (st.mu_aggregate) {
            if (!(*st.mu_aggregate > 0) || !std::isfinite(*st.mu_aggregate))
                out.push_back({Rule::positive_rate, QueueRef::station(i),
                               "aggregate mu must be > 0"});
        } else if (!(mu_i > 0)) {
            out.push_back({Rule::positive_rate, QueueRef::station(i),
                           "total pickup rate must be > 0"});
        }
        for (const auto& [dest, a] : st.alpha_per_dest) {
            if (a < 0 || a > 1 || !std::isfinite(a))
                out.push_back({Rule::alpha_range, QueueRef::station(i),
                               "alpha toward " + std::to_string(dest) + " outside [0, 1]"});
            if (!st.mu_per_dest.count(dest) && !st.mu_aggregate)
                out.push_back({Rule::alpha_without_rate, QueueRef::station(i),
                               "alpha toward " + std::to_string(dest) + " has no matching mu"});
        }

        if (std::abs(row_sum[i] - 1.0) > kRowSumTol)
            out.push_back({Rule::row_stochastic, QueueRef::station(i),
                           "outgoing p sums to " + std::to_string(row_sum[i])});

        // Per-destination rates and the routing row must tell the same story.
        if (!st.mu_aggregate) {
            for (const auto& [dest, p] : row_p[i]) {
                auto it = st.mu_per_dest.find(dest);
                if (it == st.mu_per_dest.end()) {
                    out.push_back({Rule::per_dest_rate_missing, QueueRef::station(i),
                                   "link toward " + std::to_string(dest) + " has no mu"});
                } else if (mu_i > 0 &&
                           std::abs(it->second / mu_i - p) > kRateRoutingTol) {
                    out.push_back({Rule::routing_rate_mismatch, QueueRef::station(i),
                                   "mu_ij/mu_i disagrees with p toward " +
                                       std::to_string(dest)});
                }
            }
            for (const auto& [dest, mu] : st.mu_per_dest) {
                (void)mu;
                if (!row_p[i].count(dest))
                    out.push_back({Rule::rate_without_link, QueueRef::station(i),
                                   "mu toward " + std::to_string(dest) +
                                       " has no matching link"});
            }
        }
    }

    // A closed irreducible chain needs every station in one SCC.
    if (S > 0) {
        auto comps = station_sccs(spec);
        if (comps.size() != 1 || comps.front().size() != static_cast<std::size_t>(S)) {
            std::ostringstream os;
            os << comps.size() << " strongly connected components";
            for (std::size_t c = 1; c < comps.size() && c < 4; ++c)
                os << "; stations " << comps[c].front() << ".. outside the largest";
            out.push_back({Rule::irreducibility, QueueRef::station(comps.size() > 1 ? comps[1].front() : 0),
                           os.str()});
        }
    }
    return out;
}

NetworkSpec derive_mu_split(const NetworkSpec& spec) {
    NetworkSpec out = spec;
    std::vector<std::map<StationId, double>> rows(spec.station_count());
    for (const auto& l : spec.links)
        if (l.origin >= 0 && l.origin < static_cast<StationId>(rows.size()))
            rows[l.origin][l.dest] = l.routing_prob;

    for (auto& st : out.stations) {
        if (!st.mu_aggregate) continue;
        if (!st.mu_per_dest.empty())
            throw ConsistencyError("station " + std::to_string(st.id) +
                                   " carries both aggregate and per-destination rates");
        const auto& row = rows[st.id];
        if (row.empty())
            throw ConsistencyError("station " + std::to_string(st.id) +
                                   " has an aggregate rate but no routing row");
        for (const auto& [dest, p] : row)
            st.mu_per_dest[dest] = *st.mu_aggregate * p;
        st.mu_aggregate.reset();
    }
    return out;
}

} // namespace carshare
