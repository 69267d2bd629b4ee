#include "carshare/relocq.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "carshare/errors.hpp"
#include "carshare/rng.hpp"

namespace carshare::relocq {

namespace {
constexpr double kStabilityMargin = 1e-9;
}

double gamma(double mu, double alpha) {
    if (!(mu > 0)) throw DomainError("gamma: mu must be > 0");
    if (alpha < 0 || alpha > 1) throw DomainError("gamma: alpha must lie in [0, 1]");
    return 2.0 * mu / (2.0 - alpha);
}

double mixture_mean(double mu, double alpha) {
    if (!(mu > 0)) throw DomainError("mixture_mean: mu must be > 0");
    if (alpha < 0 || alpha > 1) throw DomainError("mixture_mean: alpha must lie in [0, 1]");
    return (2.0 - alpha) / (2.0 * mu);
}

double Params::mu_total() const {
    double s = 0.0;
    for (const auto& [dest, mu] : mu_per_dest) {
        (void)dest;
        s += mu;
    }
    return s;
}

double Params::alpha_for(StationId dest) const {
    auto it = alpha_per_dest.find(dest);
    return it == alpha_per_dest.end() ? 0.0 : it->second;
}

double Params::gamma_for(StationId dest) const {
    auto it = mu_per_dest.find(dest);
    if (it == mu_per_dest.end()) throw DomainError("gamma_for: unknown destination");
    return gamma(it->second, alpha_for(dest));
}

double Params::gamma_total() const {
    double s = 0.0;
    for (const auto& [dest, mu] : mu_per_dest) s += gamma(mu, alpha_for(dest));
    return s;
}

double Params::rho() const { return lambda / mu_total(); }
double Params::zeta() const { return lambda / gamma_total(); }

void Params::check() const {
    if (lambda < 0 || !std::isfinite(lambda))
        throw DomainError("lambda must be >= 0");
    if (mu_per_dest.empty())
        throw DomainError("at least one destination rate is required");
    for (const auto& [dest, mu] : mu_per_dest)
        if (!(mu > 0) || !std::isfinite(mu))
            throw DomainError("mu toward " + std::to_string(dest) + " must be > 0");
    for (const auto& [dest, a] : alpha_per_dest) {
        if (a < 0 || a > 1 || !std::isfinite(a))
            throw DomainError("alpha toward " + std::to_string(dest) + " outside [0, 1]");
        if (!mu_per_dest.count(dest))
            throw DomainError("alpha toward " + std::to_string(dest) + " has no matching mu");
    }
}

namespace {

void require_stable(const Params& p) {
    double z = p.zeta();
    if (!(z < 1.0 - kStabilityMargin))
        throw UnstableQueueError("relocation queue unstable: zeta = " + std::to_string(z));
}

} // namespace

int truncation_for_tail(const Params& p, double tail_bound) {
    p.check();
    require_stable(p);
    const double z = p.zeta();
    const double r = p.rho();
    if (r == 0.0) return 1;
    // Tail mass beyond level m: pi0 * rho * zeta^m / (1 - zeta).
    const double pi0 = (1.0 - z) / (1.0 - z + r);
    double m = 1.0;
    if (z > 0.0)
        m = (std::log(tail_bound) + std::log1p(-z) - std::log(pi0 * r)) / std::log(z);
    int level = static_cast<int>(std::ceil(std::max(1.0, m))) + 2;
    return std::clamp(level, 4, 2'000'000);
}

Solution stationary(const Params& p) {
    p.check();
    require_stable(p);

    Solution s;
    s.zeta = p.zeta();
    s.rho = p.rho();
    const double pi0 = (1.0 - s.zeta) / (1.0 - s.zeta + s.rho);
    s.utilization = 1.0 - pi0; // equals rho/(1 - zeta + rho)
    const double one_minus_zeta = 1.0 - s.zeta;
    s.expected_cars = pi0 * s.rho / (one_minus_zeta * one_minus_zeta);

    const int m = truncation_for_tail(p);
    s.pi.resize(static_cast<std::size_t>(m) + 1);
    s.pi[0] = pi0;
    double cur = pi0 * s.rho;
    for (int n = 1; n <= m; ++n) {
        s.pi[static_cast<std::size_t>(n)] = cur;
        cur *= s.zeta;
    }
    // Remaining geometric mass past the truncation level.
    s.tail_bound = s.zeta > 0 ? pi0 * s.rho * std::pow(s.zeta, m) / one_minus_zeta : 0.0;
    return s;
}

std::vector<double> chain_solve(const Params& p, int truncation) {
    p.check();
    if (truncation < 1) throw DomainError("truncation must be >= 1");
    const double lambda = p.lambda;
    const double mu = p.mu_total();
    const double gam = p.gamma_total();
    const int n = truncation + 1;

    // Global balance of the truncated chain, solved as a generic sparse
    // linear system rather than by the geometric recursion the closed form
    // rests on.
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * 3 + n);
    auto down_rate = [&](int state) { return state == 1 ? mu : gam; };
    // Row s of Q^T pi = 0 collects flows into state s minus flows out.
    for (int s = 0; s < n; ++s) {
        if (s == 0) continue; // replaced by the normalization row
        double out = 0.0;
        if (s < truncation) out += lambda;
        if (s >= 1) out += down_rate(s);
        trips.emplace_back(s, s, -out);
        if (s >= 1 && s - 1 < truncation) trips.emplace_back(s, s - 1, lambda);
        if (s + 1 < n) trips.emplace_back(s, s + 1, down_rate(s + 1));
    }
    for (int c = 0; c < n; ++c) trips.emplace_back(0, c, 1.0);

    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(0) = 1.0;

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
        throw NumericalRangeError("chain_solve: factorization failed");
    Eigen::VectorXd pi = lu.solve(b);

    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::max(0.0, pi(i));
    return out;
}

RoutingProbs routing_prob(const Params& p) {
    p.check();
    require_stable(p);

    const double mu_i = p.mu_total();
    const double gamma_i = p.gamma_total();
    const double zeta = p.zeta();
    const double xi1 = 1.0 - zeta; // pi1/(1 - pi0) under the closed form

    RoutingProbs out;
    for (const auto& [dest, mu] : p.mu_per_dest) {
        const double g = gamma(mu, p.alpha_for(dest));
        out.direct[dest] =
            mu / mu_i + p.lambda * (g / (gamma_i * gamma_i) - mu / (gamma_i * mu_i));
        out.via_xi[dest] = (1.0 - xi1) * g / gamma_i + xi1 * mu / mu_i;
    }
    return out;
}

double max_flow_gain(double mu_i, double mu_iz) {
    if (!(mu_i > 0) || !(mu_iz > 0))
        throw DomainError("max_flow_gain: rates must be > 0");
    if (mu_iz > mu_i)
        throw DomainError("max_flow_gain: boosted flow cannot exceed the total rate");
    const double x = mu_iz / mu_i;
    return 2.0 * x / (1.0 + x) - x;
}

BoundSweep bound_check(std::uint64_t draws, std::uint64_t seed) {
    Pcg32 rng = substream(seed, {0x626f756e64ULL});
    BoundSweep sweep;
    sweep.draws = draws;
    for (std::uint64_t d = 0; d < draws; ++d) {
        Params p;
        const int k = 2 + static_cast<int>(rng.below(4));
        for (int j = 0; j < k; ++j) {
            p.mu_per_dest[j] = rng.uniform(0.05, 2.0);
            const double a = rng.next_double();
            if (a > 0.2) p.alpha_per_dest[j] = std::min(1.0, (a - 0.2) * 1.25);
        }
        p.lambda = rng.uniform(0.0, 0.999) * p.gamma_total();
        if (!(p.zeta() < 1.0 - kStabilityMargin)) continue;

        auto probs = routing_prob(p);
        const double mu_i = p.mu_total();
        for (const auto& [dest, mu] : p.mu_per_dest) {
            const double baseline = mu / mu_i;
            const double inc = probs.direct[dest] - baseline;
            sweep.max_increment = std::max(sweep.max_increment, inc);
            if (baseline > 0)
                sweep.max_relative_gain = std::max(sweep.max_relative_gain, inc / baseline);
        }
    }
    return sweep;
}

} // namespace carshare::relocq
