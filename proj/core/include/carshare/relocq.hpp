#ifndef CARSHARE_RELOCQ_HPP
#define CARSHARE_RELOCQ_HPP

#include <cstdint>
#include <map>
#include <vector>

#include "carshare/net.hpp"

namespace carshare::relocq {

// An isolated station with stackable pickups: cars arrive Poisson(lambda),
// customers headed for destination j arrive Poisson(mu_per_dest[j]) and,
// when at least two cars are parked, take a second one with probability
// alpha_per_dest[j].
struct Params {
    double lambda = 0.0;
    std::map<StationId, double> mu_per_dest;
    std::map<StationId, double> alpha_per_dest;

    double mu_total() const;
    // Effective per-destination rate of the exponential service model.
    double gamma_for(StationId dest) const;
    double gamma_total() const;
    double rho() const;  // lambda / mu_total
    double zeta() const; // lambda / gamma_total; equilibrium needs < 1
    double alpha_for(StationId dest) const;

    // Throws DomainError on malformed rates/probabilities.
    void check() const;
};

// 2*mu/(2 - alpha): rate of the exponential matched to the mixture service
// mean (2 - alpha)/(2*mu).
double gamma(double mu, double alpha);

// Mean of the two-point service mixture (1-alpha)Exp(mu) + alpha Exp(2mu).
double mixture_mean(double mu, double alpha);

struct Solution {
    std::vector<double> pi; // pi[0..truncation]
    double tail_bound = 0.0;
    double utilization = 0.0;   // 1 - pi0
    double expected_cars = 0.0; // mean queue length
    double zeta = 0.0;
    double rho = 0.0;
};

// Closed-form stationary distribution of the modified birth-death chain:
// pi0 = (1-zeta)/(1-zeta+rho), pi_n = pi0 * rho * zeta^(n-1). Throws
// UnstableQueueError when zeta >= 1.
Solution stationary(const Params& p);

// Numeric stationary vector of the truncated chain, solved as a linear
// system; the independent oracle for stationary().
std::vector<double> chain_solve(const Params& p, int truncation);

// Truncation level at which the geometric tail mass drops below the bound.
int truncation_for_tail(const Params& p, double tail_bound = 1e-12);

struct RoutingProbs {
    // Closed form: mu_ij/mu_i + lambda*(gamma_ij/gamma_i^2 - mu_ij/(gamma_i*mu_i)).
    std::map<StationId, double> direct;
    // Equivalent busy-period form: (1-xi1)*gamma_ij/gamma_i + xi1*mu_ij/mu_i.
    std::map<StationId, double> via_xi;
};

// Per-destination probability that a departing vehicle heads for j under
// the relocation policy. Both algebraic forms are returned; they agree to
// rounding error by construction.
RoutingProbs routing_prob(const Params& p);

// Largest achievable increase of the routing probability toward a single
// boosted destination, in the limit of full load: f(x) = 2x/(1+x) - x with
// x = mu_iz/mu_i. Never exceeds 3 - 2*sqrt(2).
double max_flow_gain(double mu_i, double mu_iz);

struct BoundSweep {
    double max_increment = 0.0;     // max over draws of p_iz - mu_iz/mu_i
    double max_relative_gain = 0.0; // same increment relative to mu_iz/mu_i
    std::uint64_t draws = 0;
};

// Randomized sweep over stable parameter sets; exercises the increment
// bound 3 - 2*sqrt(2) empirically.
BoundSweep bound_check(std::uint64_t draws, std::uint64_t seed);

} // namespace carshare::relocq

#endif
