#ifndef CARSHARE_PFSOLVER_HPP
#define CARSHARE_PFSOLVER_HPP

#include <optional>
#include <vector>

#include "carshare/net.hpp"

namespace carshare::pf {

// Relative arrival rates solving the traffic equations, normalized so the
// station entries sum to 1. e_link[l] = e_station[origin(l)] * p_l.
struct VisitRatios {
    std::vector<double> e_station;
    std::vector<double> e_link;
};

VisitRatios solve_traffic(const NetworkSpec& spec);

// One queue's contribution to the product form: a station contributes
// x^n with x = e_i/mu_i, a delay link contributes x^n/n! with x = e_l*T_l.
struct QueueFactor {
    bool infinite_server = false;
    double x = 0.0;
};

std::vector<QueueFactor> queue_factors(const NetworkSpec& spec, const VisitRatios& e);

// G(0..N) kept as scaled doubles sharing one log-scale exponent; the
// convolution rescales whenever values drift out of [1e-100, 1e100].
class NormalizationTable {
public:
    NormalizationTable(std::vector<double> scaled, double log_scale);

    int population() const { return static_cast<int>(scaled_.size()) - 1; }
    // log G(n); -inf when the entry underflowed the shared scale.
    double log_g(int n) const;
    // G(num)/G(den); well conditioned for neighbouring populations.
    double ratio(int num, int den) const;

private:
    std::vector<double> scaled_;
    double log_scale_;
};

// Sequential convolution of the per-queue factor sequences. skip rebuilds
// the complement table G_i used by the mean-car formula.
NormalizationTable convolve_factors(const std::vector<QueueFactor>& factors, int population,
                                    std::optional<std::size_t> skip = std::nullopt);

NormalizationTable convolution(const NetworkSpec& spec, const VisitRatios& e);
NormalizationTable convolution(const NetworkSpec& spec, const VisitRatios& e, int population);

struct NetworkMetrics {
    int population = 0;
    std::vector<double> throughput_station; // pickups/hour
    std::vector<double> throughput_link;
    std::vector<double> utilization;        // P(station has >= 1 car)
    std::vector<double> avg_cars;           // parked at station
    std::vector<double> avg_in_transit;     // on the link

    double total_population() const;
};

NetworkMetrics metrics(const NetworkSpec& spec, const VisitRatios& e,
                       const NormalizationTable& table);

// Exact stationary distribution by direct normalization over all states
// with a fixed total population; the oracle for the convolution path.
// Queues are ordered stations first, then links.
struct BruteForceDistribution {
    std::vector<std::vector<double>> marginal; // [queue][n] = P(n_q = n)
    std::uint64_t states = 0;

    double utilization(std::size_t queue) const; // P(n_q >= 1)
    double mean(std::size_t queue) const;
};

BruteForceDistribution brute_force_distribution(const NetworkSpec& spec);

std::vector<NetworkMetrics> fleet_sweep(const NetworkSpec& spec,
                                        const std::vector<int>& fleet_sizes);

} // namespace carshare::pf

#endif
