#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "carshare/errors.hpp"
#include "carshare/net.hpp"
#include "carshare/net_io.hpp"
#include "carshare/pfsolver.hpp"
#include "carshare/relocq.hpp"
#include "carshare/simkit.hpp"
#include "carshare/tracekit.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace carshare;

namespace {

// Exit codes are a stable contract: 0 ok, 2 input/validation, 3 numeric,
// 4 estimation, 5 unstable queue.
struct ExitWith {
    int code;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

fs::path resolve_outdir(const std::string& flag_value, bool flag_set) {
    if (flag_set) return flag_value;
    if (const char* env = std::getenv("CARSHARE_OUTDIR"); env && *env) return env;
    if (!flag_value.empty()) return flag_value;
    return ".";
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("config is not valid JSON: ") + e.what());
    }
    // A manifest doubles as a config: its params object is the schema.
    if (j.is_object() && j.contains("params")) return j["params"];
    if (!j.is_object()) throw FormatError("config must be a JSON object");
    return j;
}

template <typename T>
void cfg_fill(const json& cfg, const char* key, const CLI::Option* opt, T& target) {
    if (opt->count() == 0 && cfg.contains(key)) {
        try {
            target = cfg.at(key).get<T>();
        } catch (const json::exception&) {
            throw FormatError(std::string("config key \"") + key + "\" has the wrong type");
        }
    }
}

NetworkSpec load_spec_checked(const std::string& path) {
    NetworkSpec spec = load_network_file(path);
    auto violations = validate(spec);
    if (!violations.empty()) {
        std::cerr << "invalid network spec (" << violations.size() << " violation"
                  << (violations.size() == 1 ? "" : "s") << "):\n";
        for (const auto& v : violations) std::cerr << "  " << v.to_string() << "\n";
        throw ExitWith{2};
    }
    return spec;
}

sim::RelocationPolicy parse_policy(const std::string& s) {
    if (s == "none") return sim::RelocationPolicy::none();
    if (s == "backpressure") return sim::RelocationPolicy::backpressure();
    if (s == "perpair") return sim::RelocationPolicy::per_pair();
    if (s.rfind("uniform:", 0) == 0) {
        const std::string num = s.substr(8);
        std::size_t pos = 0;
        double a = 0;
        try {
            a = std::stod(num, &pos);
        } catch (const std::exception&) {
            pos = std::string::npos;
        }
        if (pos != num.size() || a < 0 || a > 1)
            throw FormatError("uniform policy needs alpha in [0, 1], got \"" + num + "\"");
        return sim::RelocationPolicy::uniform(a);
    }
    throw FormatError("unknown policy \"" + s + "\" (none|uniform:a|backpressure|perpair)");
}

std::string policy_file_tag(const sim::RelocationPolicy& p) {
    std::string n = p.name();
    for (char& c : n)
        if (c == ':') c = '_';
    return n;
}

std::map<StationId, double> parse_dest_map(const std::vector<std::string>& items,
                                           const char* what) {
    std::map<StationId, double> out;
    for (const auto& item : items) {
        auto colon = item.find(':');
        if (colon == std::string::npos)
            throw FormatError(std::string(what) + " entries must look like dest:value, got \"" +
                              item + "\"");
        try {
            std::size_t p1 = 0, p2 = 0;
            int dest = std::stoi(item.substr(0, colon), &p1);
            double val = std::stod(item.substr(colon + 1), &p2);
            if (p1 != colon || p2 != item.size() - colon - 1)
                throw std::invalid_argument("trailing");
            out[dest] = val;
        } catch (const std::exception&) {
            throw FormatError(std::string("cannot parse ") + what + " entry \"" + item + "\"");
        }
    }
    return out;
}

// ---------------------------------------------------------------- solve --

void write_metrics_csv(const fs::path& p, const NetworkSpec& spec, const pf::VisitRatios& e,
                       const pf::NetworkMetrics& m) {
    auto out = open_out(p);
    out << "id,type,e,throughput,utilization,avg_population\n";
    for (std::size_t i = 0; i < spec.station_count(); ++i)
        out << i << ",station," << fmt(e.e_station[i]) << ',' << fmt(m.throughput_station[i])
            << ',' << fmt(m.utilization[i]) << ',' << fmt(m.avg_cars[i]) << "\n";
    for (std::size_t l = 0; l < spec.link_count(); ++l)
        out << l << ",link," << fmt(e.e_link[l]) << ',' << fmt(m.throughput_link[l]) << ",,"
            << fmt(m.avg_in_transit[l]) << "\n";
}

json metrics_json(const NetworkSpec& spec, const pf::VisitRatios& e,
                  const pf::NetworkMetrics& m) {
    json doc;
    doc["population"] = m.population;
    doc["stations"] = json::array();
    for (std::size_t i = 0; i < spec.station_count(); ++i)
        doc["stations"].push_back({{"id", i},
                                   {"e", e.e_station[i]},
                                   {"throughput", m.throughput_station[i]},
                                   {"utilization", m.utilization[i]},
                                   {"avg_cars", m.avg_cars[i]}});
    doc["links"] = json::array();
    for (std::size_t l = 0; l < spec.link_count(); ++l)
        doc["links"].push_back({{"id", l},
                                {"origin", spec.links[l].origin},
                                {"dest", spec.links[l].dest},
                                {"e", e.e_link[l]},
                                {"throughput", m.throughput_link[l]},
                                {"avg_in_transit", m.avg_in_transit[l]}});
    doc["total_population"] = m.total_population();
    return doc;
}

int cmd_solve(const std::string& spec_path, std::vector<int> fleets, const fs::path& outdir,
              tools::RunManifest manifest) {
    NetworkSpec spec = load_spec_checked(spec_path);
    if (fleets.empty()) fleets = {spec.fleet_size};
    for (int n : fleets)
        if (n < 1) throw FormatError("fleet sizes must be >= 1");

    auto e = pf::solve_traffic(spec);
    fs::create_directories(outdir);
    for (int n : fleets) {
        auto table = pf::convolution(spec, e, n);
        auto m = pf::metrics(spec, e, table);
        const std::string base = "metrics_N" + std::to_string(n);
        write_metrics_csv(outdir / (base + ".csv"), spec, e, m);
        auto out = open_out(outdir / (base + ".json"));
        out << metrics_json(spec, e, m).dump(2) << "\n";
        manifest.outputs.push_back(base + ".csv");
        manifest.outputs.push_back(base + ".json");
        std::cout << "N=" << n << ": wrote " << base << ".{csv,json}\n";
    }
    manifest.write(outdir);
    return 0;
}

// ------------------------------------------------------------- estimate --

int cmd_estimate(const std::string& trace_path, const std::vector<double>& sides,
                 const fs::path& outdir, tools::RunManifest manifest) {
    auto parsed = trace::parse_events_file(trace_path);
    fs::create_directories(outdir);

    bool any_failed = false;
    bool anomalies_written = false;
    for (double side : sides) {
        if (!(side > 0)) throw FormatError("cell side must be > 0");
        const std::string tag = "cell" + std::to_string(static_cast<long long>(side)) + "m";
        auto grid = trace::CellGrid::around_events(side, parsed.events);
        auto extraction = trace::extract_trips(parsed.events, grid);
        auto stats = trace::clarke_estimate(extraction);

        if (!anomalies_written) {
            auto out = open_out(outdir / "anomalies.ndjson");
            for (const auto& a : extraction.anomalies)
                out << json{{"vehicle", a.vehicle},
                            {"t", trace::format_iso8601_us(a.t_us)},
                            {"reason", a.reason}}
                           .dump()
                    << "\n";
            if (!parsed.rejects.empty()) {
                auto rej = open_out(outdir / "rejects.ndjson");
                for (const auto& r : parsed.rejects)
                    rej << json{{"line", r.line_no}, {"reason", r.reason}}.dump() << "\n";
                manifest.outputs.push_back("rejects.ndjson");
            }
            manifest.outputs.push_back("anomalies.ndjson");
            anomalies_written = true;
        }

        // CCDF of the estimated service rates, one row per active cell.
        std::vector<double> mus;
        for (const auto& st : stats)
            if (st.mu) mus.push_back(*st.mu);
        std::sort(mus.begin(), mus.end());
        {
            auto out = open_out(outdir / ("ccdf_" + tag + ".csv"));
            out << "mu,ccdf\n";
            for (std::size_t k = 0; k < mus.size(); ++k)
                out << fmt(mus[k]) << ','
                    << fmt(static_cast<double>(mus.size() - k) / static_cast<double>(mus.size()))
                    << "\n";
            manifest.outputs.push_back("ccdf_" + tag + ".csv");
        }

        std::optional<trace::EstimatedNetwork> net;
        try {
            net = trace::build_network(extraction, stats,
                                       static_cast<int>(extraction.distinct_vehicles));
        } catch (const EmptyNetworkError& e) {
            std::cerr << "cell side " << side << ": " << e.what() << "\n";
            any_failed = true;
        }

        {
            auto out = open_out(outdir / ("cells_" + tag + ".csv"));
            out << "cell_ix,cell_iy,center_lat,center_lon,station_id,n_dep,n_init,t_busy_h,mu,"
                   "status\n";
            for (const auto& st : stats) {
                auto [clat, clon] = grid.cell_center(st.cell);
                int station = -1;
                if (net) {
                    auto it = net->cell_station.find(st.cell);
                    if (it != net->cell_station.end()) station = it->second;
                }
                const char* status = st.status == trace::CellStats::Status::active
                                         ? "active"
                                         : (st.status == trace::CellStats::Status::low_signal
                                                ? "low_signal"
                                                : "inactive");
                out << st.cell.ix << ',' << st.cell.iy << ',' << fmt(clat) << ',' << fmt(clon)
                    << ',' << station << ',' << st.n_dep << ',' << st.n_init << ','
                    << fmt(st.t_busy_h) << ',' << (st.mu ? fmt(*st.mu) : std::string()) << ','
                    << status << "\n";
            }
            manifest.outputs.push_back("cells_" + tag + ".csv");
        }

        if (net) {
            save_network_file((outdir / ("spec_" + tag + ".json")).string(), net->spec);
            manifest.outputs.push_back("spec_" + tag + ".json");
            std::cout << "cell side " << side << " m: " << net->spec.station_count()
                      << " stations, " << net->spec.link_count() << " links, fleet "
                      << net->spec.fleet_size << "\n";
        }
    }
    manifest.write(outdir);
    if (any_failed) throw ExitWith{4};
    return 0;
}

// ------------------------------------------------------------- simulate --

void write_sim_csv(const fs::path& p, const sim::SimReport& r) {
    auto out = open_out(p);
    out << "station,availability,availability_se,throughput,throughput_se,avg_parked,"
           "avg_parked_se,lost_per_hour\n";
    for (std::size_t i = 0; i < r.stations.size(); ++i) {
        const auto& s = r.stations[i];
        out << i << ',' << fmt(s.availability) << ',' << fmt(s.availability_se) << ','
            << fmt(s.throughput) << ',' << fmt(s.throughput_se) << ',' << fmt(s.avg_parked)
            << ',' << fmt(s.avg_parked_se) << ',' << fmt(s.lost_per_hour) << "\n";
    }
}

json sim_report_json(const sim::SimReport& r, const NetworkSpec& spec,
                     const sim::RelocationPolicy& policy) {
    json doc;
    doc["policy"] = policy.name();
    doc["replications"] = r.replications;
    doc["horizon_h"] = r.horizon_h;
    doc["warmup_h"] = r.warmup_h;
    doc["seed"] = r.seed;
    doc["stations"] = json::array();
    for (std::size_t i = 0; i < r.stations.size(); ++i) {
        const auto& s = r.stations[i];
        json routing = json::object();
        for (const auto& [dest, f] : r.routing_fraction[i])
            routing[std::to_string(dest)] = f;
        doc["stations"].push_back({{"id", i},
                                   {"availability", s.availability},
                                   {"availability_se", s.availability_se},
                                   {"throughput", s.throughput},
                                   {"throughput_se", s.throughput_se},
                                   {"avg_parked", s.avg_parked},
                                   {"avg_parked_se", s.avg_parked_se},
                                   {"lost_per_hour", s.lost_per_hour},
                                   {"routing_fraction", routing}});
    }
    doc["links"] = json::array();
    for (std::size_t l = 0; l < r.link_avg_in_transit.size(); ++l)
        doc["links"].push_back({{"id", l},
                                {"origin", spec.links[l].origin},
                                {"dest", spec.links[l].dest},
                                {"avg_in_transit", r.link_avg_in_transit[l]}});
    doc["total_population"] = r.total_avg_population();
    return doc;
}

int cmd_simulate(const std::string& spec_path, const std::vector<std::string>& policy_names,
                 double horizon, double warmup, std::uint64_t seed, int reps, bool emit_trace,
                 const fs::path& outdir, tools::RunManifest manifest) {
    NetworkSpec spec = load_spec_checked(spec_path);
    std::vector<sim::RelocationPolicy> policies;
    for (const auto& n : policy_names) policies.push_back(parse_policy(n));
    if (policies.empty()) policies.push_back(sim::RelocationPolicy::none());

    sim::SimConfig cfg;
    cfg.spec = spec;
    cfg.horizon_h = horizon;
    cfg.warmup_h = warmup;
    cfg.seed = seed;
    cfg.replications = reps;
    if (!(cfg.horizon_h > 0) || cfg.effective_warmup() >= cfg.horizon_h)
        throw FormatError("need 0 <= warmup < horizon");
    if (reps < 1) throw FormatError("need at least one replication");

    fs::create_directories(outdir);
    std::vector<sim::SimReport> reports;
    for (const auto& pol : policies) {
        cfg.policy = pol;
        std::vector<sim::CarEvent> raw;
        sim::SimReport rep = sim::run_network(cfg, emit_trace ? &raw : nullptr);
        const std::string tag = policy_file_tag(pol);
        write_sim_csv(outdir / ("report_" + tag + ".csv"), rep);
        auto out = open_out(outdir / ("report_" + tag + ".json"));
        out << sim_report_json(rep, spec, pol).dump(2) << "\n";
        manifest.outputs.push_back("report_" + tag + ".csv");
        manifest.outputs.push_back("report_" + tag + ".json");
        if (emit_trace) {
            trace::write_events_file((outdir / ("trace_" + tag + ".csv")).string(),
                                     trace::from_sim_events(raw, spec));
            manifest.outputs.push_back("trace_" + tag + ".csv");
        }
        std::cout << "policy " << pol.name() << ": mean availability " << fmt([&] {
            double s = 0;
            for (const auto& st : rep.stations) s += st.availability;
            return s / static_cast<double>(rep.stations.size());
        }()) << "\n";
        reports.push_back(std::move(rep));
    }

    if (reports.size() >= 2) {
        auto out = open_out(outdir / "variation.csv");
        out << "station,policy,availability_delta_pct\n";
        const auto& ref = reports.front();
        for (std::size_t p = 1; p < reports.size(); ++p)
            for (std::size_t i = 0; i < ref.stations.size(); ++i) {
                const double a0 = ref.stations[i].availability;
                const double a1 = reports[p].stations[i].availability;
                const double delta = a0 > 0 ? 100.0 * (a1 - a0) / a0 : 0.0;
                out << i << ',' << policies[p].name() << ',' << fmt(delta) << "\n";
            }
        manifest.outputs.push_back("variation.csv");
    }
    manifest.write(outdir);
    return 0;
}

// --------------------------------------------------------------- relocq --

int cmd_relocq(double lambda, const std::vector<std::string>& mu_items,
               const std::vector<std::string>& alpha_items, const fs::path& outdir,
               tools::RunManifest manifest) {
    relocq::Params params;
    params.lambda = lambda;
    params.mu_per_dest = parse_dest_map(mu_items, "--mu");

    bool alpha_uniform_flag = false;
    double alpha_uniform_value = 0.0;
    if (alpha_items.size() == 1 && alpha_items[0].rfind("uniform:", 0) == 0) {
        alpha_uniform_flag = true;
        const std::string num = alpha_items[0].substr(8);
        try {
            alpha_uniform_value = std::stod(num);
        } catch (const std::exception&) {
            throw FormatError("cannot parse --alpha " + alpha_items[0]);
        }
        for (const auto& [dest, mu] : params.mu_per_dest) {
            (void)mu;
            params.alpha_per_dest[dest] = alpha_uniform_value;
        }
    } else {
        params.alpha_per_dest = parse_dest_map(alpha_items, "--alpha");
    }

    try {
        params.check();
    } catch (const DomainError& e) {
        throw FormatError(e.what());
    }
    const double zeta = params.zeta();
    if (!(zeta < 1.0 - 1e-9)) {
        std::cerr << "unstable queue: zeta = " << fmt(zeta) << " (needs zeta < 1)\n";
        throw ExitWith{5};
    }

    auto sol = relocq::stationary(params);
    const int trunc = relocq::truncation_for_tail(params);
    auto chain = relocq::chain_solve(params, trunc);
    auto routing = relocq::routing_prob(params);

    double chain_util = 1.0 - chain[0];
    double chain_mean = 0.0;
    for (std::size_t n = 1; n < chain.size(); ++n)
        chain_mean += static_cast<double>(n) * chain[n];

    // Detect a uniform alpha vector: it provably leaves routing untouched.
    bool uniform_alpha = true;
    {
        std::optional<double> first;
        for (const auto& [dest, mu] : params.mu_per_dest) {
            (void)mu;
            const double a = params.alpha_for(dest);
            if (!first)
                first = a;
            else if (std::abs(*first - a) > 1e-15)
                uniform_alpha = false;
        }
    }

    const double mu_i = params.mu_total();
    json doc;
    doc["params"] = {{"lambda", params.lambda}};
    for (const auto& [dest, mu] : params.mu_per_dest)
        doc["params"]["mu"][std::to_string(dest)] = mu;
    for (const auto& [dest, a] : params.alpha_per_dest)
        doc["params"]["alpha"][std::to_string(dest)] = a;
    doc["zeta"] = zeta;
    doc["rho"] = params.rho();
    doc["closed_form"] = {{"pi0", sol.pi[0]},
                          {"utilization", sol.utilization},
                          {"expected_cars", sol.expected_cars},
                          {"tail_bound", sol.tail_bound}};
    doc["chain"] = {{"truncation", trunc},
                    {"pi0", chain[0]},
                    {"utilization", chain_util},
                    {"expected_cars", chain_mean}};
    doc["routing"] = json::array();
    double max_increment = 0.0;
    for (const auto& [dest, p] : routing.direct) {
        const double baseline = params.mu_per_dest.at(dest) / mu_i;
        doc["routing"].push_back({{"dest", dest},
                                  {"p", p},
                                  {"p_xi_form", routing.via_xi.at(dest)},
                                  {"baseline", baseline},
                                  {"increment", p - baseline}});
        max_increment = std::max(max_increment, p - baseline);
    }
    doc["bound"] = {{"max_observed_increment", max_increment},
                    {"increment_cap", 3.0 - 2.0 * std::sqrt(2.0)}};
    json sup = json::object();
    for (const auto& [dest, mu] : params.mu_per_dest)
        sup[std::to_string(dest)] = relocq::max_flow_gain(mu_i, mu);
    doc["bound"]["sup_increment_single_boost"] = sup;
    if (uniform_alpha)
        doc["notes"] = json::array({"uniform alpha: relocation has no effect on the routing "
                                    "probability"});

    fs::create_directories(outdir);
    auto out = open_out(outdir / "relocq.json");
    out << doc.dump(2) << "\n";
    manifest.outputs.push_back("relocq.json");
    manifest.write(outdir);

    std::cout << "zeta=" << fmt(zeta) << " rho=" << fmt(params.rho()) << "\n"
              << "            closed-form   chain-solve\n"
              << "pi0         " << fmt(sol.pi[0]) << "  " << fmt(chain[0]) << "\n"
              << "utilization " << fmt(sol.utilization) << "  " << fmt(chain_util) << "\n"
              << "mean cars   " << fmt(sol.expected_cars) << "  " << fmt(chain_mean) << "\n"
              << "routing (dest: p, xi-form, baseline):\n";
    for (const auto& [dest, p] : routing.direct)
        std::cout << "  " << dest << ": " << fmt(p) << ", " << fmt(routing.via_xi.at(dest))
                  << ", " << fmt(params.mu_per_dest.at(dest) / mu_i) << "\n";
    if (uniform_alpha) std::cout << "note: uniform alpha has no relocation effect on routing\n";
    return 0;
}

// ------------------------------------------------------------ gen-trace --

int cmd_gen_trace(const std::string& spec_path, double horizon, std::uint64_t seed,
                  const fs::path& outdir, tools::RunManifest manifest) {
    NetworkSpec spec = load_spec_checked(spec_path);
    if (horizon < 0) throw FormatError("horizon must be >= 0");
    auto events = trace::generate_trace(spec, horizon, seed);
    fs::create_directories(outdir);
    trace::write_events_file((outdir / "trace.csv").string(), events);
    manifest.outputs.push_back("trace.csv");
    manifest.write(outdir);
    std::cout << "wrote trace.csv with " << events.size() << " events\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"closed queueing network toolkit for one-way car sharing with stackable "
                 "vehicles"};
    app.require_subcommand(1);

    // ---- solve ----
    auto* solve = app.add_subcommand("solve", "product-form solution and fleet sweeps");
    std::string solve_spec, solve_out, solve_config;
    std::vector<int> solve_fleets;
    auto* solve_spec_opt = solve->add_option("spec", solve_spec, "network spec JSON");
    auto* solve_fleet_opt =
        solve->add_option("--fleet", solve_fleets, "fleet sizes (comma separated)")
            ->delimiter(',');
    auto* solve_out_opt = solve->add_option("--out", solve_out, "output directory");
    solve->add_option("--config", solve_config, "JSON config or manifest to replay");

    // ---- estimate ----
    auto* estimate = app.add_subcommand("estimate", "network estimation from an event trace");
    std::string est_trace, est_out, est_config;
    std::vector<double> est_sides;
    auto* est_trace_opt = estimate->add_option("trace", est_trace, "event trace CSV");
    auto* est_side_opt =
        estimate->add_option("--cell-side", est_sides, "cell side lengths in meters")
            ->delimiter(',');
    auto* est_out_opt = estimate->add_option("--out", est_out, "output directory");
    estimate->add_option("--config", est_config, "JSON config or manifest to replay");

    // ---- simulate ----
    auto* simulate = app.add_subcommand("simulate", "discrete-event relocation study");
    std::string sim_spec, sim_out, sim_config;
    std::vector<std::string> sim_policies;
    double sim_horizon = 1000.0, sim_warmup = -1.0;
    std::uint64_t sim_seed = 1;
    int sim_reps = 10;
    bool sim_emit_trace = false;
    auto* sim_spec_opt = simulate->add_option("spec", sim_spec, "network spec JSON");
    auto* sim_policy_opt =
        simulate
            ->add_option("--policy", sim_policies, "none|uniform:a|backpressure|perpair list")
            ->delimiter(',');
    auto* sim_horizon_opt = simulate->add_option("--horizon", sim_horizon, "horizon in hours");
    auto* sim_warmup_opt =
        simulate->add_option("--warmup", sim_warmup, "discarded transient in hours");
    auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "RNG seed");
    auto* sim_reps_opt = simulate->add_option("--reps", sim_reps, "replications");
    auto* sim_trace_opt =
        simulate->add_flag("--emit-trace", sim_emit_trace, "dump the event trace CSV");
    auto* sim_out_opt = simulate->add_option("--out", sim_out, "output directory");
    simulate->add_option("--config", sim_config, "JSON config or manifest to replay");

    // ---- relocq ----
    auto* relocq_cmd = app.add_subcommand("relocq", "isolated relocation queue analytics");
    std::string rq_out, rq_config;
    double rq_lambda = 0.0;
    std::vector<std::string> rq_mu, rq_alpha;
    auto* rq_lambda_opt = relocq_cmd->add_option("--lambda", rq_lambda, "car arrival rate");
    auto* rq_mu_opt = relocq_cmd->add_option("--mu", rq_mu, "dest:rate list")->delimiter(',');
    auto* rq_alpha_opt =
        relocq_cmd->add_option("--alpha", rq_alpha, "dest:prob list or uniform:c")
            ->delimiter(',');
    auto* rq_out_opt = relocq_cmd->add_option("--out", rq_out, "output directory");
    relocq_cmd->add_option("--config", rq_config, "JSON config or manifest to replay");

    // ---- gen-trace ----
    auto* gen = app.add_subcommand("gen-trace", "synthetic event trace from a spec");
    std::string gen_spec, gen_out, gen_config;
    double gen_horizon = 1000.0;
    std::uint64_t gen_seed = 1;
    auto* gen_spec_opt = gen->add_option("spec", gen_spec, "network spec JSON");
    auto* gen_horizon_opt = gen->add_option("--horizon", gen_horizon, "horizon in hours");
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "RNG seed");
    auto* gen_out_opt = gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--config", gen_config, "JSON config or manifest to replay");

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e);
            return rc == 0 ? 0 : 2;
        }

        if (solve->parsed()) {
            json cfg = solve_config.empty() ? json::object() : load_config(solve_config);
            cfg_fill(cfg, "spec", solve_spec_opt, solve_spec);
            cfg_fill(cfg, "fleet", solve_fleet_opt, solve_fleets);
            cfg_fill(cfg, "out", solve_out_opt, solve_out);
            if (solve_spec.empty()) throw FormatError("solve needs a spec file");
            tools::RunManifest manifest;
            manifest.subcommand = "solve";
            manifest.params = {{"spec", solve_spec}, {"fleet", solve_fleets}};
            manifest.add_input(solve_spec);
            return cmd_solve(solve_spec, solve_fleets,
                             resolve_outdir(solve_out, solve_out_opt->count() > 0), manifest);
        }
        if (estimate->parsed()) {
            json cfg = est_config.empty() ? json::object() : load_config(est_config);
            cfg_fill(cfg, "trace", est_trace_opt, est_trace);
            cfg_fill(cfg, "cell_side", est_side_opt, est_sides);
            cfg_fill(cfg, "out", est_out_opt, est_out);
            if (est_trace.empty()) throw FormatError("estimate needs a trace file");
            if (est_sides.empty()) est_sides = {500.0};
            tools::RunManifest manifest;
            manifest.subcommand = "estimate";
            manifest.params = {{"trace", est_trace}, {"cell_side", est_sides}};
            manifest.add_input(est_trace);
            return cmd_estimate(est_trace, est_sides,
                                resolve_outdir(est_out, est_out_opt->count() > 0), manifest);
        }
        if (simulate->parsed()) {
            json cfg = sim_config.empty() ? json::object() : load_config(sim_config);
            cfg_fill(cfg, "spec", sim_spec_opt, sim_spec);
            cfg_fill(cfg, "policy", sim_policy_opt, sim_policies);
            cfg_fill(cfg, "horizon", sim_horizon_opt, sim_horizon);
            cfg_fill(cfg, "warmup", sim_warmup_opt, sim_warmup);
            cfg_fill(cfg, "seed", sim_seed_opt, sim_seed);
            cfg_fill(cfg, "reps", sim_reps_opt, sim_reps);
            cfg_fill(cfg, "emit_trace", sim_trace_opt, sim_emit_trace);
            cfg_fill(cfg, "out", sim_out_opt, sim_out);
            if (sim_spec.empty()) throw FormatError("simulate needs a spec file");
            if (sim_policies.empty()) sim_policies = {"none"};
            tools::RunManifest manifest;
            manifest.subcommand = "simulate";
            manifest.params = {{"spec", sim_spec},     {"policy", sim_policies},
                               {"horizon", sim_horizon}, {"warmup", sim_warmup},
                               {"seed", sim_seed},     {"reps", sim_reps},
                               {"emit_trace", sim_emit_trace}};
            manifest.add_input(sim_spec);
            return cmd_simulate(sim_spec, sim_policies, sim_horizon, sim_warmup, sim_seed,
                                sim_reps, sim_emit_trace,
                                resolve_outdir(sim_out, sim_out_opt->count() > 0), manifest);
        }
        if (relocq_cmd->parsed()) {
            json cfg = rq_config.empty() ? json::object() : load_config(rq_config);
            cfg_fill(cfg, "lambda", rq_lambda_opt, rq_lambda);
            cfg_fill(cfg, "mu", rq_mu_opt, rq_mu);
            cfg_fill(cfg, "alpha", rq_alpha_opt, rq_alpha);
            cfg_fill(cfg, "out", rq_out_opt, rq_out);
            if (rq_mu.empty()) throw FormatError("relocq needs --mu dest:rate entries");
            tools::RunManifest manifest;
            manifest.subcommand = "relocq";
            manifest.params = {{"lambda", rq_lambda}, {"mu", rq_mu}, {"alpha", rq_alpha}};
            return cmd_relocq(rq_lambda, rq_mu, rq_alpha,
                              resolve_outdir(rq_out, rq_out_opt->count() > 0), manifest);
        }
        if (gen->parsed()) {
            json cfg = gen_config.empty() ? json::object() : load_config(gen_config);
            cfg_fill(cfg, "spec", gen_spec_opt, gen_spec);
            cfg_fill(cfg, "horizon", gen_horizon_opt, gen_horizon);
            cfg_fill(cfg, "seed", gen_seed_opt, gen_seed);
            cfg_fill(cfg, "out", gen_out_opt, gen_out);
            if (gen_spec.empty()) throw FormatError("gen-trace needs a spec file");
            tools::RunManifest manifest;
            manifest.subcommand = "gen-trace";
            manifest.params = {{"spec", gen_spec}, {"horizon", gen_horizon}, {"seed", gen_seed}};
            manifest.add_input(gen_spec);
            return cmd_gen_trace(gen_spec, gen_horizon, gen_seed,
                                 resolve_outdir(gen_out, gen_out_opt->count() > 0), manifest);
        }
        return 2;
    } catch (const ExitWith& e) {
        return e.code;
    } catch (const UnstableQueueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const EmptyNetworkError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const NumericalRangeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const CapacityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 70;
    }
}
