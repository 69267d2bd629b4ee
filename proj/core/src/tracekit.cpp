#include "carshare/tracekit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "carshare/errors.hpp"
#include "carshare/simkit.hpp"

namespace carshare::trace {

namespace {

constexpr double kEarthRadiusM = 6371000.0;
constexpr double kLatticeSpacingM = 1000.0;
constexpr double kLatticeLat = 52.0;
constexpr double kLatticeLon = 4.5;

constexpr const char* kHeader = "event_type,timestamp,vehicle_id,lat,lon";

// Days between 1970-01-01 and y-m-d in the proleptic Gregorian calendar.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const auto yr = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yr + (m <= 2));
}

const std::int64_t kGenerateEpochUs =
    days_from_civil(2026, 1, 1) * 86400LL * 1'000'000LL;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

} // namespace

std::int64_t parse_iso8601_us(const std::string& s) {
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%n", &y, &mo, &d, &h, &mi, &sec,
                    &consumed) != 6)
        throw FormatError("bad timestamp: " + s);
    std::size_t pos = static_cast<std::size_t>(consumed);
    std::int64_t frac_us = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t digits = 0;
        std::int64_t frac = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9' && digits < 6) {
            frac = frac * 10 + (s[pos] - '0');
            ++pos;
            ++digits;
        }
        if (digits == 0) throw FormatError("bad timestamp fraction: " + s);
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos; // beyond 1us
        for (std::size_t k = digits; k < 6; ++k) frac *= 10;
        frac_us = frac;
    }
    if (pos + 1 != s.size() || s[pos] != 'Z')
        throw FormatError("timestamp must end in Z: " + s);
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60)
        throw FormatError("timestamp field out of range: " + s);
    std::int64_t days = days_from_civil(y, mo, d);
    return ((days * 24 + h) * 3600 + mi * 60 + sec) * 1'000'000LL + frac_us;
}

std::string format_iso8601_us(std::int64_t t_us) {
    std::int64_t secs = t_us / 1'000'000;
    std::int64_t frac = t_us % 1'000'000;
    if (frac < 0) {
        frac += 1'000'000;
        secs -= 1;
    }
    std::int64_t days = secs / 86400;
    std::int64_t sod = secs % 86400;
    if (sod < 0) {
        sod += 86400;
        days -= 1;
    }
    int y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%06lldZ", y, mo, d,
                  static_cast<long long>(sod / 3600), static_cast<long long>((sod / 60) % 60),
                  static_cast<long long>(sod % 60), static_cast<long long>(frac));
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

ParseResult parse_events(std::istream& in) {
    if (!in) throw IoError("trace stream is not readable");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("trace is empty; header expected");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        throw FormatError("trace header must be exactly \"" + std::string(kHeader) + "\"");

    ParseResult res;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        auto reject = [&](const std::string& reason) {
            res.rejects.push_back({line_no, line, reason});
        };
        if (fields.size() != 5) {
            reject("expected 5 fields, got " + std::to_string(fields.size()));
            continue;
        }
        TraceEvent ev;
        if (fields[0] == "pickup") {
            ev.type = EventType::pickup;
        } else if (fields[0] == "dropoff") {
            ev.type = EventType::dropoff;
        } else {
            reject("unknown event_type \"" + fields[0] + "\"");
            continue;
        }
        try {
            ev.t_us = parse_iso8601_us(fields[1]);
        } catch (const FormatError& e) {
            reject(e.what());
            continue;
        }
        if (fields[2].empty()) {
            reject("empty vehicle_id");
            continue;
        }
        ev.vehicle = fields[2];
        try {
            std::size_t p1 = 0, p2 = 0;
            ev.lat = std::stod(fields[3], &p1);
            ev.lon = std::stod(fields[4], &p2);
            if (p1 != fields[3].size() || p2 != fields[4].size())
                throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            reject("bad coordinates");
            continue;
        }
        if (std::abs(ev.lat) > 90 || std::abs(ev.lon) > 180) {
            reject("coordinates out of range");
            continue;
        }
        res.events.push_back(std::move(ev));
    }
    if (in.bad()) throw IoError("trace stream failed mid-read");

    std::stable_sort(res.events.begin(), res.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) {
                         if (a.vehicle != b.vehicle) return a.vehicle < b.vehicle;
                         if (a.t_us != b.t_us) return a.t_us < b.t_us;
                         // A drop-off can precede a pickup at the same instant.
                         return a.type == EventType::dropoff && b.type == EventType::pickup;
                     });
    return res;
}

ParseResult parse_events_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path);
    return parse_events(in);
}

void write_events(std::ostream& out, const std::vector<TraceEvent>& events) {
    out << kHeader << "\n";
    char buf[64];
    for (const auto& ev : events) {
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", ev.lat, ev.lon);
        out << (ev.type == EventType::pickup ? "pickup," : "dropoff,")
            << format_iso8601_us(ev.t_us) << ',' << ev.vehicle << buf;
    }
}

void write_events_file(const std::string& path, const std::vector<TraceEvent>& events) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write trace file: " + path);
    write_events(out, events);
}

CellGrid::CellGrid(double side_m, double ref_lat, double ref_lon)
    : side_m_(side_m), ref_lat_(ref_lat), ref_lon_(ref_lon) {
    if (!(side_m > 0)) throw DomainError("cell side must be > 0");
    meters_per_deg_lat_ = kEarthRadiusM * std::numbers::pi / 180.0;
    meters_per_deg_lon_ = meters_per_deg_lat_ * std::cos(deg2rad(ref_lat));
}

CellGrid CellGrid::around_events(double side_m, const std::vector<TraceEvent>& events) {
    if (events.empty()) return CellGrid(side_m, 0.0, 0.0);
    double lat = 0.0, lon = 0.0;
    for (const auto& ev : events) {
        lat += ev.lat;
        lon += ev.lon;
    }
    const auto n = static_cast<double>(events.size());
    return CellGrid(side_m, lat / n, lon / n);
}

CellId CellGrid::cell_of(double lat, double lon) const {
    const double x = (lon - ref_lon_) * meters_per_deg_lon_;
    const double y = (lat - ref_lat_) * meters_per_deg_lat_;
    return {static_cast<std::int32_t>(std::floor(x / side_m_)),
            static_cast<std::int32_t>(std::floor(y / side_m_))};
}

std::pair<double, double> CellGrid::cell_center(CellId c) const {
    const double x = (static_cast<double>(c.ix) + 0.5) * side_m_;
    const double y = (static_cast<double>(c.iy) + 0.5) * side_m_;
    return {ref_lat_ + y / meters_per_deg_lat_, ref_lon_ + x / meters_per_deg_lon_};
}

TripExtraction extract_trips(const std::vector<TraceEvent>& events, const CellGrid& grid) {
    TripExtraction out;
    if (events.empty()) return out;

    out.window_start_us = events.front().t_us;
    out.window_end_us = events.front().t_us;
    for (const auto& ev : events) {
        out.window_start_us = std::min(out.window_start_us, ev.t_us);
        out.window_end_us = std::max(out.window_end_us, ev.t_us);
    }

    // Walk each vehicle's event sequence (input is sorted by vehicle, time).
    std::size_t i = 0;
    while (i < events.size()) {
        std::size_t j = i;
        while (j < events.size() && events[j].vehicle == events[i].vehicle) ++j;
        ++out.distinct_vehicles;

        bool parked = false;
        CellId parked_cell{};
        std::int64_t parked_since = 0;
        bool pending = false;
        CellId pending_cell{};
        std::int64_t pending_t = 0;

        for (std::size_t k = i; k < j; ++k) {
            const auto& ev = events[k];
            const CellId cell = grid.cell_of(ev.lat, ev.lon);
            const bool first = k == i;
            if (ev.type == EventType::pickup) {
                ++out.pickups[cell];
                if (first) {
                    // Parked since the window opened.
                    ++out.initial_inventory[cell];
                    out.parked.push_back({ev.vehicle, cell, out.window_start_us, ev.t_us});
                } else if (parked) {
                    if (cell != parked_cell)
                        out.anomalies.push_back(
                            {ev.vehicle, ev.t_us, "pickup cell differs from parked cell"});
                    out.parked.push_back({ev.vehicle, parked_cell, parked_since, ev.t_us});
                } else {
                    // Two pickups in a row: the earlier one opened a trip that
                    // never ended; keep the newer pickup.
                    out.anomalies.push_back(
                        {ev.vehicle, pending_t, "pickup followed by another pickup"});
                }
                parked = false;
                pending = true;
                pending_cell = cell;
                pending_t = ev.t_us;
            } else { // dropoff
                if (pending) {
                    if (ev.t_us > pending_t) {
                        Trip t;
                        t.vehicle = ev.vehicle;
                        t.origin_cell = pending_cell;
                        t.dest_cell = cell;
                        t.start_us = pending_t;
                        t.end_us = ev.t_us;
                        t.duration_h = static_cast<double>(ev.t_us - pending_t) / 3.6e9;
                        out.trips.push_back(std::move(t));
                    } else {
                        out.anomalies.push_back(
                            {ev.vehicle, ev.t_us, "trip with non-positive duration"});
                    }
                    pending = false;
                } else if (parked) {
                    out.anomalies.push_back({ev.vehicle, ev.t_us, "dropoff while parked"});
                    out.parked.push_back({ev.vehicle, parked_cell, parked_since, ev.t_us});
                }
                // A leading dropoff starts inventory here, not at the window
                // start: the car was in transit before it.
                parked = true;
                parked_cell = cell;
                parked_since = ev.t_us;
            }
        }
        if (pending)
            out.anomalies.push_back({events[i].vehicle, pending_t, "unmatched trailing pickup"});
        if (parked)
            out.parked.push_back(
                {events[i].vehicle, parked_cell, parked_since, out.window_end_us});
        i = j;
    }
    return out;
}

std::vector<CellStats> clarke_estimate(const TripExtraction& extraction) {
    std::map<CellId, CellStats> cells;
    auto touch = [&](CellId c) -> CellStats& {
        auto& st = cells[c];
        st.cell = c;
        return st;
    };
    for (const auto& [cell, n] : extraction.pickups) touch(cell).n_dep = n;
    for (const auto& [cell, n] : extraction.initial_inventory) touch(cell).n_init = n;

    // Busy time: measure of instants with at least one parked car.
    std::map<CellId, std::vector<std::pair<std::int64_t, int>>> deltas;
    for (const auto& iv : extraction.parked) {
        if (iv.to_us <= iv.from_us) continue;
        touch(iv.cell);
        deltas[iv.cell].push_back({iv.from_us, +1});
        deltas[iv.cell].push_back({iv.to_us, -1});
    }
    for (auto& [cell, ds] : deltas) {
        std::sort(ds.begin(), ds.end());
        int level = 0;
        std::int64_t busy_us = 0;
        std::int64_t last = 0;
        for (const auto& [t, d] : ds) {
            if (level >= 1) busy_us += t - last;
            level += d;
            last = t;
        }
        touch(cell).t_busy_h = static_cast<double>(busy_us) / 3.6e9;
    }

    std::vector<CellStats> out;
    out.reserve(cells.size());
    for (auto& [cell, st] : cells) {
        if (st.t_busy_h <= 0) {
            st.status = CellStats::Status::inactive;
        } else if (st.n_dep <= st.n_init) {
            st.status = CellStats::Status::low_signal;
        } else {
            st.status = CellStats::Status::active;
            st.mu = static_cast<double>(st.n_dep - st.n_init) / st.t_busy_h;
        }
        out.push_back(std::move(st));
    }
    return out;
}

EstimatedNetwork build_network(const TripExtraction& extraction,
                               const std::vector<CellStats>& stats, int fleet_size) {
    std::map<CellId, double> mu_of;
    for (const auto& st : stats)
        if (st.status == CellStats::Status::active && st.mu) mu_of[st.cell] = *st.mu;
    if (mu_of.empty()) throw EmptyNetworkError("no active cell carries a usable estimate");

    std::vector<CellId> cand;
    std::map<CellId, std::int32_t> index;
    for (const auto& [cell, mu] : mu_of) {
        (void)mu;
        index[cell] = static_cast<std::int32_t>(cand.size());
        cand.push_back(cell);
    }

    // Trip-count graph over candidate cells.
    std::map<std::pair<std::int32_t, std::int32_t>, std::pair<std::int64_t, double>> edges;
    std::vector<std::vector<std::int32_t>> adj(cand.size());
    for (const auto& t : extraction.trips) {
        auto io = index.find(t.origin_cell);
        auto id = index.find(t.dest_cell);
        if (io == index.end() || id == index.end()) continue;
        auto& [count, dur] = edges[{io->second, id->second}];
        if (count == 0) adj[static_cast<std::size_t>(io->second)].push_back(id->second);
        ++count;
        dur += t.duration_h;
    }

    auto comps = strongly_connected_components(adj);
    if (comps.empty()) throw EmptyNetworkError("no trips between estimated cells");
    const auto& keep = comps.front();
    if (keep.size() == 1) {
        const auto only = keep.front();
        if (!edges.count({only, only}))
            throw EmptyNetworkError("largest component is a single station with no trips");
    }

    std::map<std::int32_t, StationId> remap;
    EstimatedNetwork out;
    for (std::int32_t old : keep) {
        remap[old] = static_cast<StationId>(out.station_cells.size());
        out.station_cells.push_back(cand[static_cast<std::size_t>(old)]);
    }
    for (std::size_t s = 0; s < out.station_cells.size(); ++s)
        out.cell_station[out.station_cells[s]] = static_cast<StationId>(s);

    out.spec.fleet_size = fleet_size;
    out.spec.stations.resize(out.station_cells.size());
    std::vector<std::int64_t> row_total(out.station_cells.size(), 0);
    for (const auto& [key, val] : edges) {
        auto io = remap.find(key.first);
        auto id = remap.find(key.second);
        if (io == remap.end() || id == remap.end()) continue;
        row_total[static_cast<std::size_t>(io->second)] += val.first;
    }
    for (const auto& [key, val] : edges) {
        auto io = remap.find(key.first);
        auto id = remap.find(key.second);
        if (io == remap.end() || id == remap.end()) continue;
        DelayLink lk;
        lk.id = static_cast<LinkId>(out.spec.links.size());
        lk.origin = io->second;
        lk.dest = id->second;
        lk.routing_prob = static_cast<double>(val.first) /
                          static_cast<double>(row_total[static_cast<std::size_t>(io->second)]);
        lk.mean_travel_time_h = val.second / static_cast<double>(val.first);
        out.spec.links.push_back(lk);
    }
    for (std::size_t s = 0; s < out.station_cells.size(); ++s) {
        out.spec.stations[s].id = static_cast<StationId>(s);
        out.spec.stations[s].mu_aggregate = mu_of.at(out.station_cells[s]);
    }
    out.spec = derive_mu_split(out.spec);
    return out;
}

std::pair<double, double> synthetic_station_position(StationId id, std::size_t station_count) {
    const auto width = static_cast<std::int32_t>(
        std::ceil(std::sqrt(static_cast<double>(std::max<std::size_t>(station_count, 1)))));
    const double x = static_cast<double>(id % width) * kLatticeSpacingM;
    const double y = static_cast<double>(id / width) * kLatticeSpacingM;
    const double lat = kLatticeLat + rad2deg(y / kEarthRadiusM);
    const double lon = kLatticeLon + rad2deg(x / (kEarthRadiusM * std::cos(deg2rad(kLatticeLat))));
    return {lat, lon};
}

std::vector<TraceEvent> from_sim_events(const std::vector<sim::CarEvent>& events,
                                        const NetworkSpec& spec) {
    int digits = 1;
    for (int n = spec.fleet_size; n >= 10; n /= 10) ++digits;
    digits = std::max(digits, 4);

    std::vector<TraceEvent> out;
    out.reserve(events.size());
    char name[32];
    for (const auto& ev : events) {
        TraceEvent te;
        te.type = ev.pickup ? EventType::pickup : EventType::dropoff;
        te.t_us = kGenerateEpochUs + std::llround(ev.t_h * 3.6e9);
        std::snprintf(name, sizeof name, "veh-%0*d", digits, ev.vehicle);
        te.vehicle = name;
        auto [lat, lon] = synthetic_station_position(ev.station, spec.station_count());
        te.lat = lat;
        te.lon = lon;
        out.push_back(std::move(te));
    }
    return out;
}

std::vector<TraceEvent> generate_trace(const NetworkSpec& spec, double horizon_h,
                                       std::uint64_t seed) {
    if (horizon_h < 0) throw DomainError("horizon must be >= 0");
    if (horizon_h == 0) return {};

    sim::SimConfig cfg;
    cfg.spec = spec;
    cfg.horizon_h = horizon_h;
    cfg.warmup_h = 0.0;
    cfg.seed = seed;
    cfg.policy = sim::RelocationPolicy::none();
    cfg.replications = 1;

    std::vector<sim::CarEvent> raw;
    sim::run_network(cfg, &raw);
    return from_sim_events(raw, spec);
}

} // namespace carshare::trace
