#include "carshare/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <sstream>

#include "carshare/errors.hpp"
#include "carshare/rng.hpp"

namespace carshare::sim {

namespace {

// Substream domains; combined with replication and queue indices.
constexpr std::uint64_t kArrivalDomain = 0x61727276ULL;
constexpr std::uint64_t kTravelDomain = 0x7472766cULL;
constexpr std::uint64_t kPolicyDomain = 0x706f6c63ULL;
constexpr std::uint64_t kCarDomain = 0x63617273ULL;
constexpr std::uint64_t kCustomerDomain = 0x63757374ULL;

struct Event {
    double t = 0.0;
    std::uint64_t seq = 0;
    enum class Kind : std::uint8_t { arrival, trip_end, stats_reset } kind = Kind::arrival;
    std::int32_t idx = 0;  // arrival: station; trip_end: link
    std::int32_t ncars = 0;
    std::int32_t car1 = -1;
    std::int32_t car2 = -1;
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t != b.t) return a.t > b.t;
        return a.seq > b.seq;
    }
};

using EventQueue = std::priority_queue<Event, std::vector<Event>, EventLater>;

struct Destination {
    StationId dest = 0;
    LinkId link = 0;
    double cum_mu = 0.0; // cumulative customer rate
    double alpha = 0.0;
};

struct CompiledNet {
    int stations = 0;
    std::vector<double> mu_total;
    std::vector<std::vector<Destination>> dests; // per origin, cum_mu ascending
    std::vector<double> travel_mean;             // per link
    std::vector<StationId> link_dest;

    explicit CompiledNet(const NetworkSpec& spec) {
        stations = static_cast<int>(spec.station_count());
        mu_total.resize(spec.station_count());
        dests.resize(spec.station_count());
        travel_mean.reserve(spec.link_count());
        link_dest.reserve(spec.link_count());
        std::vector<std::map<StationId, LinkId>> link_of(spec.station_count());
        for (LinkId l = 0; l < static_cast<LinkId>(spec.link_count()); ++l) {
            const auto& lk = spec.links[l];
            travel_mean.push_back(lk.mean_travel_time_h);
            link_dest.push_back(lk.dest);
            link_of[lk.origin][lk.dest] = l;
        }
        for (std::size_t i = 0; i < spec.station_count(); ++i) {
            const auto& st = spec.stations[i];
            double cum = 0.0;
            for (const auto& [dest, mu] : st.mu_per_dest) {
                auto it = link_of[i].find(dest);
                if (it == link_of[i].end())
                    throw ConsistencyError("station " + std::to_string(i) +
                                           ": rate toward " + std::to_string(dest) +
                                           " has no link");
                cum += mu;
                dests[i].push_back({dest, it->second, cum, st.alpha_for(dest)});
            }
            mu_total[i] = cum;
            if (!(cum > 0))
                throw ConsistencyError("station " + std::to_string(i) + " has no pickup rate");
        }
    }

    const Destination& draw_dest(StationId origin, double u) const {
        const auto& ds = dests[origin];
        const double target = u * mu_total[origin];
        for (const auto& d : ds)
            if (target < d.cum_mu) return d;
        return ds.back();
    }
};

// Piecewise-constant time integrals for one counter.
struct Integrator {
    double last_t = 0.0;
    double busy = 0.0;
    double area = 0.0;

    void advance(double t, int level) {
        const double dt = t - last_t;
        if (dt > 0) {
            if (level >= 1) busy += dt;
            area += dt * static_cast<double>(level);
        }
        last_t = t;
    }
    void reset(double t) {
        last_t = t;
        busy = 0.0;
        area = 0.0;
    }
};

struct RepResult {
    std::vector<double> availability, throughput, avg_parked, lost_rate;
    std::vector<double> link_avg;
    std::vector<std::map<StationId, std::uint64_t>> cars_out;
};

struct Accumulator {
    std::vector<double> sum, sum_sq;
    void init(std::size_t n) {
        sum.assign(n, 0.0);
        sum_sq.assign(n, 0.0);
    }
    void add(const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            sum[i] += v[i];
            sum_sq[i] += v[i] * v[i];
        }
    }
    double mean(std::size_t i, int reps) const { return sum[i] / reps; }
    double se(std::size_t i, int reps) const {
        if (reps < 2) return 0.0;
        const double m = mean(i, reps);
        double var = (sum_sq[i] - reps * m * m) / (reps - 1);
        return var > 0 ? std::sqrt(var / reps) : 0.0;
    }
};

RepResult run_one_network_rep(const CompiledNet& net, const SimConfig& cfg, int rep,
                              std::vector<CarEvent>* trace) {
    const int S = net.stations;
    const auto L = net.travel_mean.size();
    const double horizon = cfg.horizon_h;
    const double warmup = cfg.effective_warmup();
    const int N = cfg.spec.fleet_size;

    std::vector<Pcg32> arr_rng;
    arr_rng.reserve(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i)
        arr_rng.push_back(substream(cfg.seed, {kArrivalDomain, static_cast<std::uint64_t>(rep),
                                               static_cast<std::uint64_t>(i)}));
    Pcg32 travel_rng = substream(cfg.seed, {kTravelDomain, static_cast<std::uint64_t>(rep)});
    Pcg32 policy_rng = substream(cfg.seed, {kPolicyDomain, static_cast<std::uint64_t>(rep)});

    std::vector<std::deque<std::int32_t>> parked(static_cast<std::size_t>(S));
    for (std::int32_t car = 0; car < N; ++car)
        parked[static_cast<std::size_t>(car % S)].push_back(car);

    std::vector<Integrator> st_int(static_cast<std::size_t>(S));
    std::vector<Integrator> ln_int(L);
    std::vector<std::int64_t> served(static_cast<std::size_t>(S), 0);
    std::vector<std::int64_t> lost(static_cast<std::size_t>(S), 0);
    std::vector<std::map<StationId, std::uint64_t>> cars_out(static_cast<std::size_t>(S));
    std::vector<int> in_transit(L, 0);
    long parked_total = N;
    long transit_total = 0;

    EventQueue queue;
    std::uint64_t seq = 0;
    for (int i = 0; i < S; ++i) {
        Event ev;
        ev.t = arr_rng[static_cast<std::size_t>(i)].exponential(net.mu_total[static_cast<std::size_t>(i)]);
        ev.seq = seq++;
        ev.kind = Event::Kind::arrival;
        ev.idx = i;
        queue.push(ev);
    }
    if (warmup > 0) {
        Event ev;
        ev.t = warmup;
        ev.seq = seq++;
        ev.kind = Event::Kind::stats_reset;
        queue.push(ev);
    }

    auto emit = [&](bool pickup, double t, std::int32_t car, StationId station) {
        if (trace) trace->push_back({pickup, t, car, station});
    };

    while (!queue.empty()) {
        Event ev = queue.top();
        if (ev.t > horizon) break;
        queue.pop();

        switch (ev.kind) {
        case Event::Kind::stats_reset: {
            for (std::size_t i = 0; i < st_int.size(); ++i) st_int[i].reset(ev.t);
            for (std::size_t l = 0; l < ln_int.size(); ++l) ln_int[l].reset(ev.t);
            std::fill(served.begin(), served.end(), 0);
            std::fill(lost.begin(), lost.end(), 0);
            for (auto& m : cars_out) m.clear();
            break;
        }
        case Event::Kind::arrival: {
            const auto i = static_cast<std::size_t>(ev.idx);
            auto& rng = arr_rng[i];
            // Two draws per arrival, policy-independent: destination and the
            // next interarrival gap.
            const double u_dest = rng.next_double();
            const double gap = rng.exponential(net.mu_total[i]);
            Event next;
            next.t = ev.t + gap;
            next.seq = seq++;
            next.kind = Event::Kind::arrival;
            next.idx = ev.idx;
            queue.push(next);

            const auto& d = net.draw_dest(ev.idx, u_dest);
            const int avail = static_cast<int>(parked[i].size());
            if (avail == 0) {
                ++lost[i];
                break;
            }
            int take = 1;
            if (avail >= 2) {
                double coin = 0.0;
                if (cfg.policy.kind == RelocationPolicy::Kind::uniform ||
                    cfg.policy.kind == RelocationPolicy::Kind::per_pair)
                    coin = policy_rng.next_double();
                if (takes_second_car(cfg.policy, d.alpha, avail,
                                     static_cast<int>(parked[static_cast<std::size_t>(d.dest)].size()),
                                     coin))
                    take = 2;
            }

            st_int[i].advance(ev.t, avail);
            std::int32_t car_a = parked[i].front();
            parked[i].pop_front();
            std::int32_t car_b = -1;
            if (take == 2) {
                car_b = parked[i].front();
                parked[i].pop_front();
            }
            parked_total -= take;
            transit_total += take;
            ++served[i];
            cars_out[i][d.dest] += static_cast<std::uint64_t>(take);

            const auto l = static_cast<std::size_t>(d.link);
            ln_int[l].advance(ev.t, in_transit[l]);
            in_transit[l] += take;

            emit(true, ev.t, car_a, ev.idx);
            if (car_b >= 0) emit(true, ev.t, car_b, ev.idx);

            const double rate = 1.0 / net.travel_mean[l];
            if (take == 2 && !cfg.shared_train_travel_draw) {
                for (std::int32_t car : {car_a, car_b}) {
                    Event arrive;
                    arrive.t = ev.t + travel_rng.exponential(rate);
                    arrive.seq = seq++;
                    arrive.kind = Event::Kind::trip_end;
                    arrive.idx = d.link;
                    arrive.ncars = 1;
                    arrive.car1 = car;
                    queue.push(arrive);
                }
            } else {
                Event arrive;
                arrive.t = ev.t + travel_rng.exponential(rate);
                arrive.seq = seq++;
                arrive.kind = Event::Kind::trip_end;
                arrive.idx = d.link;
                arrive.ncars = take;
                arrive.car1 = car_a;
                arrive.car2 = car_b;
                queue.push(arrive);
            }
            break;
        }
        case Event::Kind::trip_end: {
            const auto l = static_cast<std::size_t>(ev.idx);
            const auto j = static_cast<std::size_t>(net.link_dest[l]);
            ln_int[l].advance(ev.t, in_transit[l]);
            in_transit[l] -= ev.ncars;
            st_int[j].advance(ev.t, static_cast<int>(parked[j].size()));
            parked[j].push_back(ev.car1);
            emit(false, ev.t, ev.car1, net.link_dest[l]);
            if (ev.ncars == 2) {
                parked[j].push_back(ev.car2);
                emit(false, ev.t, ev.car2, net.link_dest[l]);
            }
            parked_total += ev.ncars;
            transit_total -= ev.ncars;
            break;
        }
        }

        if (parked_total + transit_total != N)
            throw std::logic_error("car conservation violated during simulation");
    }

    for (std::size_t i = 0; i < st_int.size(); ++i)
        st_int[i].advance(horizon, static_cast<int>(parked[i].size()));
    for (std::size_t l = 0; l < ln_int.size(); ++l) ln_int[l].advance(horizon, in_transit[l]);

    const double dur = horizon - warmup;
    RepResult r;
    r.availability.resize(static_cast<std::size_t>(S));
    r.throughput.resize(static_cast<std::size_t>(S));
    r.avg_parked.resize(static_cast<std::size_t>(S));
    r.lost_rate.resize(static_cast<std::size_t>(S));
    for (std::size_t i = 0; i < static_cast<std::size_t>(S); ++i) {
        r.availability[i] = st_int[i].busy / dur;
        r.throughput[i] = static_cast<double>(served[i]) / dur;
        r.avg_parked[i] = st_int[i].area / dur;
        r.lost_rate[i] = static_cast<double>(lost[i]) / dur;
    }
    r.link_avg.resize(L);
    for (std::size_t l = 0; l < L; ++l) r.link_avg[l] = ln_int[l].area / dur;
    r.cars_out = std::move(cars_out);
    return r;
}

} // namespace

std::string RelocationPolicy::name() const {
    switch (kind) {
    case Kind::none: return "none";
    case Kind::uniform: {
        std::ostringstream os;
        os << "uniform:" << alpha;
        return os.str();
    }
    case Kind::backpressure: return "backpressure";
    case Kind::per_pair: return "perpair";
    }
    return "unknown";
}

bool takes_second_car(const RelocationPolicy& policy, double alpha_ij, int parked_origin,
                      int parked_dest, double coin) {
    switch (policy.kind) {
    case RelocationPolicy::Kind::none:
        return false;
    case RelocationPolicy::Kind::uniform:
        return coin < policy.alpha;
    case RelocationPolicy::Kind::backpressure:
        // Strictly smaller: equal backlogs do not trigger a relocation.
        return parked_dest < parked_origin;
    case RelocationPolicy::Kind::per_pair:
        return coin < alpha_ij;
    }
    return false;
}

double SimReport::total_avg_population() const {
    double t = 0.0;
    for (const auto& s : stations) t += s.avg_parked;
    for (double v : link_avg_in_transit) t += v;
    return t;
}

SimReport run_network(const SimConfig& cfg, std::vector<CarEvent>* trace) {
    if (!(cfg.horizon_h > 0)) throw DomainError("horizon must be > 0");
    if (cfg.effective_warmup() >= cfg.horizon_h)
        throw DomainError("warmup must be smaller than the horizon");
    if (cfg.replications < 1) throw DomainError("at least one replication is required");
    if (cfg.spec.fleet_size < 1) throw DomainError("fleet_size must be >= 1");
    {
        auto violations = validate(cfg.spec);
        if (!violations.empty())
            throw ConsistencyError("invalid network spec: " + violations.front().to_string());
    }

    const CompiledNet net(cfg.spec);
    const auto S = cfg.spec.station_count();
    const auto L = cfg.spec.link_count();
    const int R = cfg.replications;

    Accumulator avail, thr, avg, lost_acc, link_acc;
    avail.init(S);
    thr.init(S);
    avg.init(S);
    lost_acc.init(S);
    link_acc.init(L);

    std::vector<std::map<StationId, std::uint64_t>> pooled_out(S);
    std::vector<std::map<StationId, Accumulator>> frac_acc(S);
    for (std::size_t i = 0; i < S; ++i)
        for (const auto& d : net.dests[i]) {
            frac_acc[i][d.dest].init(1);
            pooled_out[i][d.dest] = 0;
        }

    for (int rep = 0; rep < R; ++rep) {
        RepResult r = run_one_network_rep(net, cfg, rep, rep == 0 ? trace : nullptr);
        avail.add(r.availability);
        thr.add(r.throughput);
        avg.add(r.avg_parked);
        lost_acc.add(r.lost_rate);
        link_acc.add(r.link_avg);
        for (std::size_t i = 0; i < S; ++i) {
            std::uint64_t total = 0;
            for (const auto& [dest, n] : r.cars_out[i]) total += n;
            for (auto& [dest, acc] : frac_acc[i]) {
                auto it = r.cars_out[i].find(dest);
                const double n = it == r.cars_out[i].end() ? 0.0 : static_cast<double>(it->second);
                acc.add({total > 0 ? n / static_cast<double>(total) : 0.0});
                if (it != r.cars_out[i].end()) pooled_out[i][dest] += it->second;
            }
        }
    }

    SimReport rep;
    rep.replications = R;
    rep.horizon_h = cfg.horizon_h;
    rep.warmup_h = cfg.effective_warmup();
    rep.seed = cfg.seed;
    rep.stations.resize(S);
    for (std::size_t i = 0; i < S; ++i) {
        rep.stations[i].availability = avail.mean(i, R);
        rep.stations[i].availability_se = avail.se(i, R);
        rep.stations[i].throughput = thr.mean(i, R);
        rep.stations[i].throughput_se = thr.se(i, R);
        rep.stations[i].avg_parked = avg.mean(i, R);
        rep.stations[i].avg_parked_se = avg.se(i, R);
        rep.stations[i].lost_per_hour = lost_acc.mean(i, R);
    }
    rep.link_avg_in_transit.resize(L);
    for (std::size_t l = 0; l < L; ++l) rep.link_avg_in_transit[l] = link_acc.mean(l, R);

    rep.routing_fraction.resize(S);
    rep.routing_fraction_se.resize(S);
    for (std::size_t i = 0; i < S; ++i) {
        std::uint64_t total = 0;
        for (const auto& [dest, n] : pooled_out[i]) total += n;
        for (const auto& [dest, n] : pooled_out[i]) {
            rep.routing_fraction[i][dest] =
                total > 0 ? static_cast<double>(n) / static_cast<double>(total) : 0.0;
            rep.routing_fraction_se[i][dest] = frac_acc[i][dest].se(0, R);
        }
    }
    return rep;
}

SingleQueueReport run_single_relocation_queue(const relocq::Params& params, double horizon_h,
                                              double warmup_h, std::uint64_t seed,
                                              int replications) {
    params.check();
    if (!(horizon_h > 0) || warmup_h < 0 || warmup_h >= horizon_h)
        throw DomainError("bad horizon/warmup");
    if (replications < 1) throw DomainError("at least one replication is required");

    const double mu_total = params.mu_total();
    std::vector<std::pair<StationId, double>> cum; // destination draw by mu
    {
        double c = 0.0;
        for (const auto& [dest, mu] : params.mu_per_dest) {
            c += mu;
            cum.emplace_back(dest, c);
        }
    }
    const double dur = horizon_h - warmup_h;

    Accumulator util_acc, cars_acc;
    util_acc.init(1);
    cars_acc.init(1);
    std::map<StationId, std::uint64_t> pooled;
    std::map<StationId, Accumulator> frac_acc;
    for (const auto& [dest, mu] : params.mu_per_dest) {
        (void)mu;
        pooled[dest] = 0;
        frac_acc[dest].init(1);
    }
    std::uint64_t lost_total = 0;

    for (int rep = 0; rep < replications; ++rep) {
        Pcg32 car_rng = substream(seed, {kCarDomain, static_cast<std::uint64_t>(rep)});
        Pcg32 cust_rng = substream(seed, {kCustomerDomain, static_cast<std::uint64_t>(rep)});
        Pcg32 coin_rng = substream(seed, {kPolicyDomain, static_cast<std::uint64_t>(rep)});

        double t_car = params.lambda > 0 ? car_rng.exponential(params.lambda)
                                         : horizon_h * 2;
        double t_cust = cust_rng.exponential(mu_total);
        int n = 0;
        Integrator integ;
        std::map<StationId, std::uint64_t> out;
        std::uint64_t lost = 0;
        bool reset_done = warmup_h == 0;

        while (true) {
            const double t = std::min(t_car, t_cust);
            if (t > horizon_h) break;
            if (!reset_done && t >= warmup_h) {
                integ.reset(warmup_h);
                out.clear();
                lost = 0;
                reset_done = true;
            }
            if (t_car <= t_cust) {
                integ.advance(t, n);
                ++n;
                t_car = t + car_rng.exponential(params.lambda);
            } else {
                const double u = cust_rng.next_double() * mu_total;
                StationId dest = cum.back().first;
                for (const auto& [d, c] : cum)
                    if (u < c) {
                        dest = d;
                        break;
                    }
                if (n == 0) {
                    ++lost;
                } else {
                    int take = 1;
                    if (n >= 2 && coin_rng.next_double() < params.alpha_for(dest)) take = 2;
                    integ.advance(t, n);
                    n -= take;
                    out[dest] += static_cast<std::uint64_t>(take);
                }
                t_cust = t + cust_rng.exponential(mu_total);
            }
        }
        if (!reset_done) {
            integ.reset(warmup_h);
            out.clear();
            lost = 0;
        }
        integ.advance(horizon_h, n);

        util_acc.add({integ.busy / dur});
        cars_acc.add({integ.area / dur});
        std::uint64_t total = 0;
        for (const auto& [dest, c] : out) total += c;
        for (auto& [dest, acc] : frac_acc) {
            auto it = out.find(dest);
            const double c = it == out.end() ? 0.0 : static_cast<double>(it->second);
            acc.add({total > 0 ? c / static_cast<double>(total) : 0.0});
            if (it != out.end()) pooled[dest] += it->second;
        }
        lost_total += lost;
    }

    SingleQueueReport r;
    r.replications = replications;
    r.utilization = util_acc.mean(0, replications);
    r.utilization_se = util_acc.se(0, replications);
    r.avg_cars = cars_acc.mean(0, replications);
    r.avg_cars_se = cars_acc.se(0, replications);
    r.lost_per_hour = static_cast<double>(lost_total) / (dur * replications);
    std::uint64_t total = 0;
    for (const auto& [dest, c] : pooled) total += c;
    for (const auto& [dest, c] : pooled) {
        r.routing_fraction[dest] =
            total > 0 ? static_cast<double>(c) / static_cast<double>(total) : 0.0;
        r.routing_fraction_se[dest] = frac_acc[dest].se(0, replications);
    }
    return r;
}

PolicyComparison compare_policies(const SimConfig& base,
                                  const std::vector<RelocationPolicy>& policies) {
    if (policies.empty()) throw DomainError("at least one policy is required");
    PolicyComparison cmp;
    for (const auto& pol : policies) {
        SimConfig cfg = base;
        cfg.policy = pol;
        cmp.runs.push_back({pol, run_network(cfg)});
    }
    const auto& ref = cmp.runs.front().report;
    cmp.availability_delta_pct.resize(cmp.runs.size());
    for (std::size_t p = 0; p < cmp.runs.size(); ++p) {
        const auto& rep = cmp.runs[p].report;
        cmp.availability_delta_pct[p].resize(rep.stations.size());
        for (std::size_t i = 0; i < rep.stations.size(); ++i) {
            const double a0 = ref.stations[i].availability;
            const double a1 = rep.stations[i].availability;
            cmp.availability_delta_pct[p][i] = a0 > 0 ? 100.0 * (a1 - a0) / a0
                                              : (a1 > 0 ? std::numeric_limits<double>::infinity()
                                                        : 0.0);
        }
    }
    return cmp;
}

} // namespace carshare::sim
