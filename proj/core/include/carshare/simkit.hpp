#ifndef CARSHARE_SIMKIT_HPP
#define CARSHARE_SIMKIT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "carshare/net.hpp"
#include "carshare/relocq.hpp"

namespace carshare::sim {

struct RelocationPolicy {
    enum class Kind { none, uniform, backpressure, per_pair };
    Kind kind = Kind::none;
    double alpha = 0.0; // uniform only

    static RelocationPolicy none() { return {}; }
    static RelocationPolicy uniform(double a) { return {Kind::uniform, a}; }
    static RelocationPolicy backpressure() { return {Kind::backpressure, 0.0}; }
    // Per-pair alphas come from the spec's alpha_per_dest.
    static RelocationPolicy per_pair() { return {Kind::per_pair, 0.0}; }

    std::string name() const;
    friend bool operator==(const RelocationPolicy&, const RelocationPolicy&) = default;
};

// Decision kernel: should this customer couple a second car? Counts are
// read at the pickup instant, before any car leaves. Only called when the
// origin holds at least two cars.
bool takes_second_car(const RelocationPolicy& policy, double alpha_ij,
                      int parked_origin, int parked_dest, double coin);

struct SimConfig {
    NetworkSpec spec;
    double horizon_h = 1000.0;
    // Discarded transient; < 0 means the default 20% of the horizon.
    double warmup_h = -1.0;
    std::uint64_t seed = 1;
    RelocationPolicy policy;
    int replications = 10;
    // One shared travel draw per coupled train; false redraws per car.
    bool shared_train_travel_draw = true;

    double effective_warmup() const { return warmup_h < 0 ? 0.2 * horizon_h : warmup_h; }
};

struct StationReport {
    double availability = 0.0; // time fraction with >= 1 parked car
    double availability_se = 0.0;
    double throughput = 0.0; // served customers per hour
    double throughput_se = 0.0;
    double avg_parked = 0.0;
    double avg_parked_se = 0.0;
    double lost_per_hour = 0.0;
};

struct SimReport {
    std::vector<StationReport> stations;
    std::vector<double> link_avg_in_transit;
    // Fraction of departing cars headed for each destination, pooled over
    // replications, plus the replication-level standard error.
    std::vector<std::map<StationId, double>> routing_fraction;
    std::vector<std::map<StationId, double>> routing_fraction_se;
    int replications = 0;
    double horizon_h = 0.0;
    double warmup_h = 0.0;
    std::uint64_t seed = 0;

    double total_avg_population() const;
};

// Raw per-car event for trace dumps (first replication only).
struct CarEvent {
    bool pickup = false;
    double t_h = 0.0;
    std::int32_t vehicle = 0;
    StationId station = 0;
};

SimReport run_network(const SimConfig& cfg, std::vector<CarEvent>* trace = nullptr);

struct SingleQueueReport {
    double utilization = 0.0;
    double utilization_se = 0.0;
    double avg_cars = 0.0;
    double avg_cars_se = 0.0;
    std::map<StationId, double> routing_fraction;
    std::map<StationId, double> routing_fraction_se;
    double lost_per_hour = 0.0;
    int replications = 0;
};

// Exact simulation of the isolated relocation queue with true batch
// pickups; the reference the approximate model is judged against.
SingleQueueReport run_single_relocation_queue(const relocq::Params& params, double horizon_h,
                                              double warmup_h, std::uint64_t seed,
                                              int replications);

struct PolicyRun {
    RelocationPolicy policy;
    SimReport report;
};

struct PolicyComparison {
    std::vector<PolicyRun> runs;
    // Percent availability change per station, relative to runs[0].
    std::vector<std::vector<double>> availability_delta_pct;
};

// Runs every policy under common random numbers (identical seed, hence
// identical arrival streams) and tabulates availability deltas against the
// first policy.
PolicyComparison compare_policies(const SimConfig& base,
                                  const std::vector<RelocationPolicy>& policies);

} // namespace carshare::sim

#endif
