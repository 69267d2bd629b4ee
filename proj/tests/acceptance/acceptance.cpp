// Acceptance suite: every criterion prints one [PASS]/[FAIL] line; the
// binary exits nonzero if any executed criterion fails. Run a single
// criterion with --criterion N.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "carshare/errors.hpp"
#include "carshare/net.hpp"
#include "carshare/net_io.hpp"
#include "carshare/pfsolver.hpp"
#include "carshare/relocq.hpp"
#include "carshare/rng.hpp"
#include "carshare/simkit.hpp"
#include "carshare/tracekit.hpp"
#include "../testutil.hpp"

using namespace carshare;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string summary;
    std::string detail; // printed on failure (or when verbose)
};

double now_s() {
    using clock = std::chrono::steady_clock;
    static const auto t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------- 1

Outcome criterion1() {
    const double t0 = now_s();
    Pcg32 rng(101, 0);
    double max_err = 0.0;
    int instances = 0;
    for (int rep = 0; rep < 120; ++rep) {
        auto spec = testutil::random_small_network(rng);
        auto e = pf::solve_traffic(spec);
        auto m = pf::metrics(spec, e, pf::convolution(spec, e));
        auto bf = pf::brute_force_distribution(spec);
        ++instances;
        for (std::size_t i = 0; i < spec.station_count(); ++i) {
            max_err = std::max(max_err, std::abs(m.utilization[i] - bf.utilization(i)));
            max_err = std::max(max_err, std::abs(m.avg_cars[i] - bf.mean(i)));
            const double bf_thr = spec.stations[i].mu_total() * bf.utilization(i);
            max_err = std::max(max_err, std::abs(m.throughput_station[i] - bf_thr));
        }
        for (std::size_t l = 0; l < spec.link_count(); ++l) {
            const std::size_t q = spec.station_count() + l;
            max_err = std::max(max_err, std::abs(m.avg_in_transit[l] - bf.mean(q)));
            const double bf_thr = bf.mean(q) / spec.links[l].mean_travel_time_h;
            max_err = std::max(max_err, std::abs(m.throughput_link[l] - bf_thr));
        }
    }
    const double dur = now_s() - t0;
    Outcome o;
    o.pass = max_err <= 1e-9 && dur < 10.0;
    o.summary = "convolution matches brute-force enumeration on " +
                std::to_string(instances) + " random networks (max err " + fmt(max_err) +
                ", " + fmt(dur) + " s)";
    return o;
}

// ---------------------------------------------------------------------- 2

Outcome criterion2() {
    Pcg32 rng(202, 0);
    double worst_cons = 0.0, worst_flow = 0.0;
    for (int rep = 0; rep < 60; ++rep) {
        auto spec = testutil::random_network(rng, 2 + static_cast<int>(rng.below(7)),
                                             1 + static_cast<int>(rng.below(60)), true);
        auto e = pf::solve_traffic(spec);
        auto m = pf::metrics(spec, e, pf::convolution(spec, e));
        worst_cons = std::max(worst_cons, std::abs(m.total_population() - spec.fleet_size) /
                                              spec.fleet_size);
        for (std::size_t i = 0; i < spec.station_count(); ++i) {
            double in = 0.0;
            for (std::size_t l = 0; l < spec.link_count(); ++l)
                if (spec.links[l].dest == static_cast<StationId>(i)) in += m.throughput_link[l];
            worst_flow = std::max(worst_flow, std::abs(in - m.throughput_station[i]) /
                                                  m.throughput_station[i]);
        }
    }
    Outcome o;
    o.pass = worst_cons <= 1e-6 && worst_flow <= 1e-9;
    o.summary = "conservation (worst rel " + fmt(worst_cons) + ") and flow balance (worst rel " +
                fmt(worst_flow) + ") on 60 solved instances";
    return o;
}

// ---------------------------------------------------------------------- 3

Outcome criterion3() {
    const double t0 = now_s();
    Pcg32 rng(303, 0);
    double max_err = 0.0;
    int draws = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        relocq::Params p;
        const int k = 1 + static_cast<int>(rng.below(4));
        for (int j = 0; j < k; ++j) {
            p.mu_per_dest[j] = rng.uniform(0.05, 2.0);
            if (rng.next_double() < 0.7) p.alpha_per_dest[j] = rng.next_double();
        }
        p.lambda = rng.uniform(0.0, 0.97) * p.gamma_total();
        auto s = relocq::stationary(p);
        auto pi = relocq::chain_solve(p, relocq::truncation_for_tail(p));
        ++draws;
        double mean = 0.0;
        for (std::size_t n = 1; n < pi.size(); ++n) mean += static_cast<double>(n) * pi[n];
        max_err = std::max(max_err, std::abs(s.pi[0] - pi[0]));
        max_err = std::max(max_err, std::abs(s.expected_cars - mean));
        for (std::size_t n = 0; n < std::min<std::size_t>(s.pi.size(), 40); ++n)
            max_err = std::max(max_err, std::abs(s.pi[n] - pi[n]));
    }
    // alpha = 0 must reduce to the plain M/M/1 geometric law.
    double mm1_err = 0.0;
    for (double rho : {0.1, 0.5, 0.9}) {
        relocq::Params p;
        p.mu_per_dest[0] = 1.0;
        p.lambda = rho;
        auto s = relocq::stationary(p);
        for (int n = 0; n < 30; ++n)
            mm1_err = std::max(mm1_err,
                               std::abs(s.pi[n] - (1.0 - rho) * std::pow(rho, n)));
    }
    const double dur = now_s() - t0;
    Outcome o;
    o.pass = max_err <= 1e-10 && mm1_err <= 1e-12 && dur < 5.0;
    o.summary = "closed form vs chain oracle on " + std::to_string(draws) +
                " stable draws (max err " + fmt(max_err) + ", M/M/1 reduction err " +
                fmt(mm1_err) + ", " + fmt(dur) + " s)";
    return o;
}

// ---------------------------------------------------------------------- 4

Outcome criterion4() {
    const std::vector<double> rhos = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    const std::vector<double> alphas = {0.25, 0.5, 0.75, 1.0};
    std::ostringstream table;
    table << "  alpha  rho   util_sim  util_apx  |du|     cars_sim  cars_apx  rel_dc\n";
    bool tol_ok = true, trend_ok = true;
    double worst_du = 0.0, worst_dc = 0.0;
    for (double alpha : alphas) {
        double prev_err = -1.0, prev_se = 0.0;
        for (double rho : rhos) {
            relocq::Params p;
            p.mu_per_dest[0] = 0.35;
            p.mu_per_dest[1] = 0.65;
            p.alpha_per_dest[0] = alpha;
            p.alpha_per_dest[1] = alpha;
            p.lambda = rho; // mu_i = 1
            auto approx = relocq::stationary(p);
            auto sim = sim::run_single_relocation_queue(p, 30000.0, 3000.0,
                                                        0xC4C4 + static_cast<int>(rho * 100) +
                                                            static_cast<int>(alpha * 1000),
                                                        10);
            const double du = std::abs(sim.utilization - approx.utilization);
            const double dc = std::abs(sim.avg_cars - approx.expected_cars) /
                              approx.expected_cars;
            worst_du = std::max(worst_du, du);
            worst_dc = std::max(worst_dc, dc);
            if (du > 0.05 || dc > 0.05) tol_ok = false;
            char row[160];
            std::snprintf(row, sizeof row,
                          "  %4.2f  %4.1f   %.5f   %.5f   %.5f  %8.4f  %8.4f  %.4f%s\n",
                          alpha, rho, sim.utilization, approx.utilization, du, sim.avg_cars,
                          approx.expected_cars, dc, (du > 0.05 || dc > 0.05) ? "  <-- out" : "");
            table << row;
            // Discrepancy should not shrink as rho grows (up to CI noise).
            if (prev_err >= 0 &&
                du < prev_err - (3.0 * (sim.utilization_se + prev_se) + 0.003))
                trend_ok = false;
            prev_err = du;
            prev_se = sim.utilization_se;
        }
    }
    Outcome o;
    o.pass = tol_ok && trend_ok;
    o.summary = "exact batch DES vs approximate model on the 9x4 grid (worst |d util| " +
                fmt(worst_du) + ", worst rel d cars " + fmt(worst_dc) + ", trend " +
                (trend_ok ? "ok" : "violated") + ")";
    o.detail = table.str();
    if (!tol_ok)
        o.detail += "  note: the 5% tolerance is exceeded at high rho; the gap is intrinsic\n"
                    "  to the exponential approximation (confirmed against an independent\n"
                    "  truncated-chain solve of the exact batch system), not DES noise.\n";
    return o;
}

// ---------------------------------------------------------------------- 5

Outcome criterion5() {
    // (a) the two algebraic forms agree everywhere.
    Pcg32 rng(505, 0);
    double form_err = 0.0;
    for (int rep = 0; rep < 500; ++rep) {
        relocq::Params p;
        const int k = 2 + static_cast<int>(rng.below(3));
        for (int j = 0; j < k; ++j) {
            p.mu_per_dest[j] = rng.uniform(0.05, 2.0);
            if (rng.next_double() < 0.7) p.alpha_per_dest[j] = rng.next_double();
        }
        p.lambda = rng.uniform(0.0, 0.98) * p.gamma_total();
        auto probs = relocq::routing_prob(p);
        for (const auto& [dest, v] : probs.direct)
            form_err = std::max(form_err, std::abs(v - probs.via_xi.at(dest)));
    }

    // (b) DES routing fractions against the closed form, 8 random draws.
    bool des_ok = true;
    std::ostringstream detail;
    double worst_gap = 0.0;
    for (int rep = 0; rep < 8; ++rep) {
        relocq::Params p;
        const int k = 2 + static_cast<int>(rng.below(2));
        for (int j = 0; j < k; ++j) {
            p.mu_per_dest[j] = rng.uniform(0.1, 1.5);
            if (rng.next_double() < 0.7) p.alpha_per_dest[j] = rng.next_double();
        }
        p.lambda = rng.uniform(0.2, 0.9) * p.gamma_total();
        auto probs = relocq::routing_prob(p);
        auto sim = sim::run_single_relocation_queue(p, 1500.0, 150.0, 9900 + rep, 8);
        for (const auto& [dest, want] : probs.direct) {
            const double got = sim.routing_fraction.at(dest);
            const double se = sim.routing_fraction_se.at(dest);
            const double gap = std::abs(got - want);
            worst_gap = std::max(worst_gap, gap);
            if (gap > 3.0 * se + 1e-4) {
                des_ok = false;
                detail << "  draw " << rep << " dest " << dest << ": sim " << fmt(got)
                       << " vs eq " << fmt(want) << " se " << fmt(se) << "\n";
            }
        }
    }

    // (c) the worked two-destination example: 0.3 analytically and in sim.
    relocq::Params ex;
    ex.lambda = 0.9;
    ex.mu_per_dest[1] = 0.2;
    ex.mu_per_dest[2] = 0.8;
    ex.alpha_per_dest[1] = 1.0;
    auto probs = relocq::routing_prob(ex);
    const bool exact_ok = std::abs(probs.direct.at(1) - 0.3) <= 1e-12;
    auto exsim = sim::run_single_relocation_queue(ex, 3000.0, 300.0, 515, 10);
    const double exgap = std::abs(exsim.routing_fraction.at(1) - 0.3);
    const bool exsim_ok = exgap <= 3.0 * exsim.routing_fraction_se.at(1) + 1e-4;

    Outcome o;
    o.pass = form_err <= 1e-12 && des_ok && exact_ok && exsim_ok;
    o.summary = "Lemma routing: form equivalence (max " + fmt(form_err) +
                "), DES within 3 se (worst gap " + fmt(worst_gap) +
                "), worked example p=0.3 analytic and simulated (sim " +
                fmt(exsim.routing_fraction.at(1)) + ")";
    o.detail = detail.str();
    return o;
}

// ---------------------------------------------------------------------- 6

Outcome criterion6() {
    Pcg32 rng(606, 0);
    double max_err = 0.0;
    for (double c : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) {
        for (int rep = 0; rep < 40; ++rep) {
            relocq::Params p;
            const int k = 2 + static_cast<int>(rng.below(4));
            for (int j = 0; j < k; ++j) {
                p.mu_per_dest[j] = rng.uniform(0.05, 2.0);
                p.alpha_per_dest[j] = c;
            }
            p.lambda = rng.uniform(0.0, 0.98) * p.gamma_total();
            auto probs = relocq::routing_prob(p);
            const double mu_i = p.mu_total();
            for (const auto& [dest, v] : probs.direct)
                max_err = std::max(max_err, std::abs(v - p.mu_per_dest.at(dest) / mu_i));
        }
    }
    Outcome o;
    o.pass = max_err <= 1e-12;
    o.summary = "uniform-alpha invariance: routing equals the baseline (max err " +
                fmt(max_err) + ")";
    return o;
}

// ---------------------------------------------------------------------- 7

Outcome criterion7() {
    const double cap = 3.0 - 2.0 * std::sqrt(2.0);
    auto sweep = relocq::bound_check(100'000, 707);

    // Independent grid search + refinement over the single-boost gain.
    double best_x = 0.0, best_f = -1.0;
    for (int k = 1; k <= 10000; ++k) {
        const double x = static_cast<double>(k) / 10000.0;
        const double f = relocq::max_flow_gain(1.0, x);
        if (f > best_f) {
            best_f = f;
            best_x = x;
        }
    }
    double lo = std::max(1e-9, best_x - 2e-4), hi = std::min(1.0, best_x + 2e-4);
    for (int it = 0; it < 200; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (relocq::max_flow_gain(1.0, m1) < relocq::max_flow_gain(1.0, m2))
            lo = m1;
        else
            hi = m2;
    }
    best_x = 0.5 * (lo + hi);
    best_f = relocq::max_flow_gain(1.0, best_x);

    Outcome o;
    const bool sweep_ok = sweep.max_increment <= cap + 1e-12;
    const bool max_ok =
        std::abs(best_x - (std::sqrt(2.0) - 1.0)) <= 1e-6 && std::abs(best_f - cap) <= 1e-6;
    o.pass = sweep_ok && max_ok;
    o.summary = "increment bound: 1e5 draws max " + fmt(sweep.max_increment) + " <= " +
                fmt(cap) + "; search maximizer x=" + fmt(best_x) + " f=" + fmt(best_f);
    return o;
}

// ---------------------------------------------------------------------- 8

Outcome criterion8() {
    Pcg32 rng(808, 0);
    bool ok = true;
    std::ostringstream detail;
    int comparisons = 0;
    double worst_pull = 0.0;
    for (int net = 0; net < 10; ++net) {
        const int stations = 5 + static_cast<int>(rng.below(16)); // 5..20
        const int fleet = 20 + static_cast<int>(rng.below(181));  // 20..200
        auto spec = testutil::random_network(rng, stations, fleet, true);
        auto e = pf::solve_traffic(spec);
        auto m = pf::metrics(spec, e, pf::convolution(spec, e));

        sim::SimConfig cfg;
        cfg.spec = spec;
        cfg.horizon_h = 1500.0;
        cfg.seed = 8800 + net;
        cfg.replications = 10;
        auto rep = sim::run_network(cfg);
        for (std::size_t i = 0; i < spec.station_count(); ++i) {
            const double gap = std::abs(rep.stations[i].availability - m.utilization[i]);
            const double tol = std::max(3.0 * rep.stations[i].availability_se, 5e-4);
            worst_pull = std::max(worst_pull, gap / tol);
            ++comparisons;
            if (gap > tol) {
                ok = false;
                detail << "  net " << net << " station " << i << ": sim "
                       << fmt(rep.stations[i].availability) << " vs rho "
                       << fmt(m.utilization[i]) << " (3se " << fmt(tol) << ")\n";
            }
        }
    }
    Outcome o;
    o.pass = ok;
    o.summary = "DES availability vs analytic rho on 10 random networks (" +
                std::to_string(comparisons) + " stations, worst gap/tol " + fmt(worst_pull) +
                ")";
    o.detail = detail.str();
    return o;
}

// ---------------------------------------------------------------------- 9

Outcome criterion9() {
    auto spec = testutil::unbalanced_network(1);
    auto e = pf::solve_traffic(spec);
    const std::vector<int> fleets = {1, 2, 4, 8, 16, 32, 64, 128, 256};
    auto sweep = pf::fleet_sweep(spec, fleets);

    bool scaling_ok = true;
    double prev = 0.0;
    for (const auto& m : sweep) {
        const double scale = m.throughput_station[0] / e.e_station[0];
        if (scale < prev - 1e-12) scaling_ok = false;
        prev = scale;
    }
    const auto& last = sweep.back();
    const auto& prev_m = sweep[sweep.size() - 2];
    double max_rho = 0.0, min_rho_last = 1.0, min_rho_prev = 1.0;
    for (std::size_t i = 0; i < last.utilization.size(); ++i) {
        max_rho = std::max(max_rho, last.utilization[i]);
        min_rho_last = std::min(min_rho_last, last.utilization[i]);
        min_rho_prev = std::min(min_rho_prev, prev_m.utilization[i]);
    }
    const bool saturation_ok = max_rho > 0.99;
    const bool plateau_ok = min_rho_last < 0.9 &&
                            std::abs(min_rho_last - min_rho_prev) < 0.01;
    Outcome o;
    o.pass = scaling_ok && saturation_ok && plateau_ok;
    o.summary = "fleet sweep: G-ratio monotone " + std::string(scaling_ok ? "yes" : "no") +
                ", bottleneck rho " + fmt(max_rho) + ", low-demand plateau " +
                fmt(min_rho_last) + " (prev " + fmt(min_rho_prev) + ")";
    return o;
}

// --------------------------------------------------------------------- 10

Outcome criterion10() {
    sim::SimConfig cfg;
    cfg.spec = testutil::unbalanced_network(14);
    cfg.horizon_h = 3000.0;
    cfg.seed = 1010;
    cfg.replications = 10;
    auto cmp = sim::compare_policies(cfg, {sim::RelocationPolicy::none(),
                                           sim::RelocationPolicy::uniform(0.5),
                                           sim::RelocationPolicy::backpressure()});
    const auto& base = cmp.runs[0].report;
    const auto& uni = cmp.runs[1].report;
    const auto& bp = cmp.runs[2].report;
    const std::size_t S = base.stations.size();

    double mean_avail = 0.0;
    for (const auto& s : base.stations) mean_avail += s.availability / static_cast<double>(S);

    int low_total = 0, low_gaining = 0;
    double best_rel_gain = 0.0, uni_delta = 0.0, bp_delta = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
        const double a0 = base.stations[i].availability;
        const double a_uni = uni.stations[i].availability;
        const double a_bp = bp.stations[i].availability;
        uni_delta += (a_uni - a0) / static_cast<double>(S);
        bp_delta += (a_bp - a0) / static_cast<double>(S);
        if (a0 < mean_avail) {
            ++low_total;
            if (a_bp > a0) ++low_gaining;
        }
        if (a0 > 0) best_rel_gain = std::max(best_rel_gain, (a_bp - a0) / a0);
    }
    const bool majority_ok = low_total > 0 && 2 * low_gaining > low_total;
    const bool big_gain_ok = best_rel_gain >= 0.5;
    const bool uniform_flat = std::abs(uni_delta) <= 0.01;
    const bool bp_beats_uniform = bp_delta > uni_delta + 0.01;

    Outcome o;
    o.pass = majority_ok && big_gain_ok && uniform_flat && bp_beats_uniform;
    o.summary = "backpressure lifts " + std::to_string(low_gaining) + "/" +
                std::to_string(low_total) + " low-availability stations, best gain " +
                fmt(100.0 * best_rel_gain) + "%; uniform mean delta " + fmt(uni_delta) +
                ", backpressure mean delta " + fmt(bp_delta);
    return o;
}

// --------------------------------------------------------------------- 11

Outcome criterion11() {
    Pcg32 rng(1111, 0);
    auto spec = testutil::random_network(rng, 5, 25);
    auto events = trace::generate_trace(spec, 5000.0, 1111);
    auto grid = trace::CellGrid::around_events(500.0, events);
    auto ex = trace::extract_trips(events, grid);
    auto stats = trace::clarke_estimate(ex);
    auto est = trace::build_network(ex, stats, static_cast<int>(ex.distinct_vehicles));

    Outcome o;
    if (est.spec.station_count() != 5) {
        o.summary = "round trip lost stations: got " +
                    std::to_string(est.spec.station_count()) + " of 5";
        return o;
    }

    // Precondition of the criterion: enough signal per station.
    for (const auto& [cell, n] : ex.pickups)
        if (n < 500) {
            o.summary = "insufficient departures for the round-trip check (" +
                        std::to_string(n) + " at one cell)";
            return o;
        }

    std::vector<int> back(5, -1);
    for (std::size_t s = 0; s < est.station_cells.size(); ++s)
        for (std::size_t k = 0; k < spec.station_count(); ++k) {
            auto [lat, lon] =
                trace::synthetic_station_position(static_cast<StationId>(k), 5);
            if (grid.cell_of(lat, lon) == est.station_cells[s]) back[s] = static_cast<int>(k);
        }

    double worst_mu = 0.0, worst_tv = 0.0, worst_t = 0.0;
    std::map<std::pair<StationId, StationId>, double> true_T;
    for (const auto& l : spec.links) true_T[{l.origin, l.dest}] = l.mean_travel_time_h;

    for (std::size_t s = 0; s < 5; ++s) {
        if (back[s] < 0) {
            o.summary = "could not map an estimated station back to the lattice";
            return o;
        }
        const auto& orig = spec.stations[static_cast<std::size_t>(back[s])];
        const double mu_est = est.spec.stations[s].mu_total();
        worst_mu = std::max(worst_mu,
                            std::abs(mu_est - orig.mu_total()) / orig.mu_total());
        double tv = 0.0;
        for (const auto& lk : est.spec.links) {
            if (lk.origin != static_cast<StationId>(s)) continue;
            const int dest_orig = back[static_cast<std::size_t>(lk.dest)];
            auto it = orig.mu_per_dest.find(dest_orig);
            const double p_orig = it == orig.mu_per_dest.end()
                                      ? 0.0
                                      : it->second / orig.mu_total();
            tv += std::abs(lk.routing_prob - p_orig);
            auto itT = true_T.find({static_cast<StationId>(back[s]), dest_orig});
            if (itT != true_T.end())
                worst_t = std::max(worst_t, std::abs(lk.mean_travel_time_h - itT->second) /
                                                itT->second);
        }
        // Destinations missing from the estimate count toward the distance.
        for (const auto& [dest_orig, mu] : orig.mu_per_dest) {
            bool found = false;
            for (const auto& lk : est.spec.links)
                if (lk.origin == static_cast<StationId>(s) &&
                    back[static_cast<std::size_t>(lk.dest)] == dest_orig)
                    found = true;
            if (!found) tv += mu / orig.mu_total();
        }
        worst_tv = std::max(worst_tv, tv / 2.0);
    }
    o.pass = worst_mu < 0.10 && worst_tv < 0.05 && worst_t < 0.10;
    o.summary = "round trip on a 5-station spec: worst mu err " + fmt(worst_mu) +
                ", worst routing TV " + fmt(worst_tv) + ", worst T err " + fmt(worst_t);
    return o;
}

// --------------------------------------------------------------------- 12

#ifndef CARSHARE_CLI_BIN
#error "CARSHARE_CLI_BIN must point at the carshare binary"
#endif

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CARSHARE_CLI_BIN) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) { return testutil::slurp(p); }

Outcome criterion12() {
    testutil::TempDir tmp("acceptance_det");
    auto spec_path = tmp.path() / "net.json";
    save_network_file(spec_path.string(), testutil::unbalanced_network(10));

    Outcome o;
    std::ostringstream detail;
    bool ok = true;
    auto expect_same = [&](const fs::path& a, const fs::path& b, const std::string& what) {
        if (slurp(a) != slurp(b)) {
            ok = false;
            detail << "  " << what << " differs between reruns\n";
        }
    };

    // gen-trace twice.
    for (const char* d : {"g1", "g2"})
        if (run_cli("gen-trace " + spec_path.string() + " --horizon 400 --seed 9 --out " +
                    (tmp.path() / d).string()) != 0) {
            o.summary = "gen-trace failed";
            return o;
        }
    expect_same(tmp.path() / "g1/trace.csv", tmp.path() / "g2/trace.csv", "trace.csv");
    expect_same(tmp.path() / "g1/manifest.json", tmp.path() / "g2/manifest.json",
                "gen-trace manifest");

    // estimate twice on the same trace.
    for (const char* d : {"e1", "e2"})
        if (run_cli("estimate " + (tmp.path() / "g1/trace.csv").string() +
                    " --cell-side 250,1000 --out " + (tmp.path() / d).string()) != 0) {
            o.summary = "estimate failed";
            return o;
        }
    for (const char* f : {"spec_cell250m.json", "cells_cell250m.csv", "ccdf_cell1000m.csv",
                          "anomalies.ndjson", "manifest.json"})
        expect_same(tmp.path() / "e1" / f, tmp.path() / "e2" / f, f);

    // simulate twice, multiple policies.
    for (const char* d : {"s1", "s2"})
        if (run_cli("simulate " + spec_path.string() +
                    " --policy none,backpressure --horizon 250 --seed 3 --reps 3 --out " +
                    (tmp.path() / d).string()) != 0) {
            o.summary = "simulate failed";
            return o;
        }
    for (const char* f :
         {"report_none.csv", "report_backpressure.csv", "variation.csv", "manifest.json"})
        expect_same(tmp.path() / "s1" / f, tmp.path() / "s2" / f, f);

    // solve twice (deterministic analytics).
    for (const char* d : {"v1", "v2"})
        if (run_cli("solve " + spec_path.string() + " --fleet 10 --out " +
                    (tmp.path() / d).string()) != 0) {
            o.summary = "solve failed";
            return o;
        }
    expect_same(tmp.path() / "v1/metrics_N10.csv", tmp.path() / "v2/metrics_N10.csv",
                "metrics_N10.csv");

    o.pass = ok;
    o.summary = "repeated runs produce byte-identical outputs across gen-trace, estimate, "
                "simulate and solve";
    o.detail = detail.str();
    return o;
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--criterion" && i + 1 < argc) only = std::atoi(argv[++i]);
    }

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, criterion1},  {2, criterion2},  {3, criterion3},  {4, criterion4},
        {5, criterion5},  {6, criterion6},  {7, criterion7},  {8, criterion8},
        {9, criterion9},  {10, criterion10}, {11, criterion11}, {12, criterion12},
    };

    int failures = 0;
    for (const auto& [num, fn] : criteria) {
        if (only != 0 && num != only) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.summary = std::string("threw: ") + e.what();
        }
        std::printf("[%s] criterion %2d: %s\n", o.pass ? "PASS" : "FAIL", num,
                    o.summary.c_str());
        if (!o.pass && !o.detail.empty()) std::fputs(o.detail.c_str(), stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
