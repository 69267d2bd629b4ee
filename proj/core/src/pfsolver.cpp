#include "carshare/pfsolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "carshare/errors.hpp"

namespace carshare::pf {

namespace {

constexpr double kRescaleHigh = 1e100;
constexpr double kRescaleLow = 1e-100;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

} // namespace

VisitRatios solve_traffic(const NetworkSpec& spec) {
    const auto S = static_cast<Eigen::Index>(spec.station_count());
    if (S == 0) throw ErgodicityError("network has no stations");

    auto comps = station_sccs(spec);
    if (comps.size() != 1 || comps.front().size() != spec.station_count())
        throw ErgodicityError("station routing chain is not irreducible");

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
    for (const auto& l : spec.links) P(l.origin, l.dest) += l.routing_prob;

    // Flow balance e_j = sum_i e_i p_ij: left eigenvector of P. Replace one
    // balance row (they are dependent) with the normalization sum(e) = 1.
    Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(S, S);
    A.row(0).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
    b(0) = 1.0;
    Eigen::VectorXd e = A.partialPivLu().solve(b);

    VisitRatios out;
    out.e_station.resize(static_cast<std::size_t>(S));
    double sum = 0.0;
    for (Eigen::Index i = 0; i < S; ++i) {
        if (!(e(i) > 0) || !std::isfinite(e(i)))
            throw ErgodicityError("traffic equations produced a non-positive visit ratio");
        sum += e(i);
    }
    for (Eigen::Index i = 0; i < S; ++i)
        out.e_station[static_cast<std::size_t>(i)] = e(i) / sum;

    out.e_link.reserve(spec.link_count());
    for (const auto& l : spec.links)
        out.e_link.push_back(out.e_station[static_cast<std::size_t>(l.origin)] * l.routing_prob);
    return out;
}

std::vector<QueueFactor> queue_factors(const NetworkSpec& spec, const VisitRatios& e) {
    std::vector<QueueFactor> f;
    f.reserve(spec.station_count() + spec.link_count());
    for (std::size_t i = 0; i < spec.station_count(); ++i) {
        double mu = spec.stations[i].mu_total();
        if (!(mu > 0))
            throw ConsistencyError("station " + std::to_string(i) + " has no pickup rate");
        f.push_back({false, e.e_station[i] / mu});
    }
    for (std::size_t l = 0; l < spec.link_count(); ++l)
        f.push_back({true, e.e_link[l] * spec.links[l].mean_travel_time_h});
    return f;
}

NormalizationTable::NormalizationTable(std::vector<double> scaled, double log_scale)
    : scaled_(std::move(scaled)), log_scale_(log_scale) {}

double NormalizationTable::log_g(int n) const {
    double v = scaled_.at(static_cast<std::size_t>(n));
    return v > 0 ? std::log(v) + log_scale_ : kNegInf;
}

double NormalizationTable::ratio(int num, int den) const {
    return std::exp(log_g(num) - log_g(den));
}

NormalizationTable convolve_factors(const std::vector<QueueFactor>& factors, int population,
                                    std::optional<std::size_t> skip) {
    if (population < 0) throw DomainError("population must be >= 0");
    const auto N = static_cast<std::size_t>(population);

    std::vector<double> g(N + 1, 0.0);
    g[0] = 1.0;
    double log_scale = 0.0;
    std::vector<double> f(N + 1), next(N + 1);

    for (std::size_t q = 0; q < factors.size(); ++q) {
        if (skip && *skip == q) continue;
        f[0] = 1.0;
        for (std::size_t n = 1; n <= N; ++n)
            f[n] = factors[q].infinite_server ? f[n - 1] * factors[q].x / static_cast<double>(n)
                                              : f[n - 1] * factors[q].x;
        for (std::size_t n = 0; n <= N; ++n) {
            double acc = 0.0;
            for (std::size_t k = 0; k <= n; ++k) acc += g[n - k] * f[k];
            next[n] = acc;
        }
        g.swap(next);

        double mx = *std::max_element(g.begin(), g.end());
        if (!std::isfinite(mx) || mx <= 0.0)
            throw NumericalRangeError("convolution left the representable range");
        if (mx > kRescaleHigh || mx < kRescaleLow) {
            for (double& v : g) v /= mx;
            log_scale += std::log(mx);
        }
    }

    for (double v : g)
        if (!std::isfinite(v))
            throw NumericalRangeError("convolution produced a non-finite value");
    return NormalizationTable(std::move(g), log_scale);
}

NormalizationTable convolution(const NetworkSpec& spec, const VisitRatios& e) {
    return convolution(spec, e, spec.fleet_size);
}

NormalizationTable convolution(const NetworkSpec& spec, const VisitRatios& e, int population) {
    if (population < 0)
        throw DomainError("population must be >= 0");
    return convolve_factors(queue_factors(spec, e), population);
}

double NetworkMetrics::total_population() const {
    double t = 0.0;
    for (double v : avg_cars) t += v;
    for (double v : avg_in_transit) t += v;
    return t;
}

namespace {

// sum over n of exp(terms[n]) computed stably.
double log_sum_exp_value(const std::vector<double>& terms) {
    double mx = kNegInf;
    for (double t : terms) mx = std::max(mx, t);
    if (mx == kNegInf) return 0.0;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    return std::exp(mx) * s;
}

} // namespace

NetworkMetrics metrics(const NetworkSpec& spec, const VisitRatios& e,
                       const NormalizationTable& table) {
    const int N = table.population();
    if (N < 1) throw DomainError("metrics need a population of at least 1");

    NetworkMetrics m;
    m.population = N;
    const double scale = table.ratio(N - 1, N); // G(N-1)/G(N)

    auto factors = queue_factors(spec, e);
    const double log_gN = table.log_g(N);

    m.throughput_station.resize(spec.station_count());
    m.utilization.resize(spec.station_count());
    m.avg_cars.resize(spec.station_count());
    for (std::size_t i = 0; i < spec.station_count(); ++i) {
        m.throughput_station[i] = e.e_station[i] * scale;
        m.utilization[i] = factors[i].x * scale;

        // Mean parked cars from the marginal P(n_i = n) = x^n G_i(N-n)/G(N),
        // with G_i the complement table that removes queue i.
        NormalizationTable gi = convolve_factors(factors, N, i);
        const double log_x = std::log(factors[i].x);
        std::vector<double> terms;
        terms.reserve(static_cast<std::size_t>(N));
        for (int n = 1; n <= N; ++n)
            terms.push_back(std::log(static_cast<double>(n)) + static_cast<double>(n) * log_x +
                            gi.log_g(N - n) - log_gN);
        m.avg_cars[i] = log_sum_exp_value(terms);
    }

    m.throughput_link.resize(spec.link_count());
    m.avg_in_transit.resize(spec.link_count());
    for (std::size_t l = 0; l < spec.link_count(); ++l) {
        m.throughput_link[l] = e.e_link[l] * scale;
        m.avg_in_transit[l] = m.throughput_link[l] * spec.links[l].mean_travel_time_h;
    }
    return m;
}

double BruteForceDistribution::utilization(std::size_t queue) const {
    return 1.0 - marginal.at(queue).at(0);
}

double BruteForceDistribution::mean(std::size_t queue) const {
    const auto& m = marginal.at(queue);
    double s = 0.0;
    for (std::size_t n = 1; n < m.size(); ++n) s += static_cast<double>(n) * m[n];
    return s;
}

namespace {

std::uint64_t state_count(int population, std::size_t queues) {
    // C(N + K - 1, K - 1), capped to signal CapacityError.
    long double c = 1.0L;
    for (std::size_t j = 1; j < queues; ++j) {
        c *= static_cast<long double>(population + j) / static_cast<long double>(j);
        if (c > 1e18L) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(c + 0.5L);
}

} // namespace

BruteForceDistribution brute_force_distribution(const NetworkSpec& spec) {
    auto e = solve_traffic(spec);
    auto factors = queue_factors(spec, e);
    const std::size_t K = factors.size();
    const int N = spec.fleet_size;
    if (K == 0) throw ConsistencyError("network has no queues");

    const std::uint64_t states = state_count(N, K);
    if (states > 10'000'000ULL)
        throw CapacityError("state space has " + std::to_string(states) +
                            " states; exact enumeration capped at 1e7");

    // Per-queue factor terms f_q(n), straight from the product form.
    std::vector<std::vector<double>> f(K, std::vector<double>(static_cast<std::size_t>(N) + 1));
    for (std::size_t q = 0; q < K; ++q) {
        for (int n = 0; n <= N; ++n) {
            double v = std::pow(factors[q].x, n);
            if (factors[q].infinite_server) v /= std::tgamma(static_cast<double>(n) + 1.0);
            f[q][static_cast<std::size_t>(n)] = v;
        }
    }

    BruteForceDistribution out;
    out.marginal.assign(K, std::vector<double>(static_cast<std::size_t>(N) + 1, 0.0));

    std::vector<int> state(K, 0);
    double total = 0.0;
    std::uint64_t visited = 0;

    // Depth-first enumeration of all allocations of N across K queues.
    auto recurse = [&](auto&& self, std::size_t q, int remaining, double weight) -> void {
        if (q + 1 == K) {
            state[q] = remaining;
            double w = weight * f[q][static_cast<std::size_t>(remaining)];
            total += w;
            ++visited;
            for (std::size_t j = 0; j < K; ++j)
                out.marginal[j][static_cast<std::size_t>(state[j])] += w;
            return;
        }
        for (int n = 0; n <= remaining; ++n) {
            state[q] = n;
            self(self, q + 1, remaining - n, weight * f[q][static_cast<std::size_t>(n)]);
        }
    };
    recurse(recurse, 0, N, 1.0);

    if (!(total > 0) || !std::isfinite(total))
        throw NumericalRangeError("direct normalization left the representable range");
    for (auto& m : out.marginal)
        for (double& v : m) v /= total;
    out.states = visited;
    return out;
}

std::vector<NetworkMetrics> fleet_sweep(const NetworkSpec& spec,
                                        const std::vector<int>& fleet_sizes) {
    auto e = solve_traffic(spec);
    std::vector<NetworkMetrics> out;
    out.reserve(fleet_sizes.size());
    for (int n : fleet_sizes) {
        if (n < 1) throw DomainError("fleet sizes must be >= 1");
        out.push_back(metrics(spec, e, convolution(spec, e, n)));
    }
    return out;
}

} // namespace carshare::pf
