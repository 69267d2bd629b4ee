#ifndef CARSHARE_TRACEKIT_HPP
#define CARSHARE_TRACEKIT_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "carshare/net.hpp"
#include "carshare/simkit.hpp"

namespace carshare::trace {

enum class EventType { pickup, dropoff };

// One observed car event. Times are microseconds since the Unix epoch, UTC.
struct TraceEvent {
    EventType type = EventType::pickup;
    std::int64_t t_us = 0;
    std::string vehicle;
    double lat = 0.0;
    double lon = 0.0;
};

// Strict "YYYY-MM-DDTHH:MM:SS[.ffffff]Z"; throws FormatError otherwise.
std::int64_t parse_iso8601_us(const std::string& s);
std::string format_iso8601_us(std::int64_t t_us);

struct ParseResult {
    std::vector<TraceEvent> events; // sorted by (vehicle, time)
    struct Reject {
        std::size_t line_no = 0;
        std::string line;
        std::string reason;
    };
    std::vector<Reject> rejects;
};

// CSV with header exactly `event_type,timestamp,vehicle_id,lat,lon`.
// Malformed rows land in the rejects report instead of being dropped.
ParseResult parse_events(std::istream& in);
ParseResult parse_events_file(const std::string& path);
void write_events(std::ostream& out, const std::vector<TraceEvent>& events);
void write_events_file(const std::string& path, const std::vector<TraceEvent>& events);

// Square-cell partition of the study area under a local equirectangular
// projection anchored at a reference point.
struct CellId {
    std::int32_t ix = 0;
    std::int32_t iy = 0;
    friend auto operator<=>(const CellId&, const CellId&) = default;
};

class CellGrid {
public:
    CellGrid(double side_m, double ref_lat, double ref_lon);
    static CellGrid around_events(double side_m, const std::vector<TraceEvent>& events);

    double side_m() const { return side_m_; }
    double ref_lat() const { return ref_lat_; }
    double ref_lon() const { return ref_lon_; }

    CellId cell_of(double lat, double lon) const;
    // Geographic centre of a cell (inverse projection).
    std::pair<double, double> cell_center(CellId c) const;

private:
    double side_m_;
    double ref_lat_;
    double ref_lon_;
    double meters_per_deg_lat_;
    double meters_per_deg_lon_;
};

struct Trip {
    std::string vehicle;
    CellId origin_cell;
    CellId dest_cell;
    std::int64_t start_us = 0;
    std::int64_t end_us = 0;
    double duration_h = 0.0;
};

struct Anomaly {
    std::string vehicle;
    std::int64_t t_us = 0;
    std::string reason;
};

struct ParkedInterval {
    std::string vehicle;
    CellId cell;
    std::int64_t from_us = 0;
    std::int64_t to_us = 0;
};

struct TripExtraction {
    std::vector<Trip> trips;
    std::vector<Anomaly> anomalies;
    std::vector<ParkedInterval> parked;
    std::map<CellId, std::int64_t> pickups;  // departures per cell
    std::map<CellId, int> initial_inventory; // cars parked at window start
    std::int64_t window_start_us = 0;
    std::int64_t window_end_us = 0;
    std::int64_t distinct_vehicles = 0;
};

// Pairs each pickup with the vehicle's next dropoff. A vehicle whose first
// event is a pickup was parked from the window start (initial inventory); a
// leading dropoff means the car only enters inventory at that instant.
TripExtraction extract_trips(const std::vector<TraceEvent>& events, const CellGrid& grid);

struct CellStats {
    CellId cell;
    std::int64_t n_dep = 0;
    int n_init = 0;
    double t_busy_h = 0.0;
    std::optional<double> mu; // set only when status == active
    enum class Status { active, inactive, low_signal } status = Status::inactive;
};

// Service-rate estimate mu = (n_dep - n_init)/T_busy per cell. Cells with
// no busy time are inactive; cells with n_dep <= n_init carry no usable
// signal and are excluded from estimation.
std::vector<CellStats> clarke_estimate(const TripExtraction& extraction);

struct EstimatedNetwork {
    NetworkSpec spec;
    std::vector<CellId> station_cells;        // station index -> cell
    std::map<CellId, StationId> cell_station; // inverse
};

// Stations are the active cells restricted to the largest strongly
// connected component of the trip graph; p from trip-count fractions, T
// from sample-mean durations, mu split over the routing row.
EstimatedNetwork build_network(const TripExtraction& extraction,
                               const std::vector<CellStats>& stats, int fleet_size);

// Synthetic lattice placement used when emitting traces from an abstract
// spec: stations sit 1 km apart on a square grid.
std::pair<double, double> synthetic_station_position(StationId id, std::size_t station_count);

// Raw simulator events rendered as trace rows on the synthetic lattice.
std::vector<TraceEvent> from_sim_events(const std::vector<sim::CarEvent>& events,
                                        const NetworkSpec& spec);

// Simulates the closed network without relocation and emits the pickup/
// drop-off log; byte-deterministic per seed.
std::vector<TraceEvent> generate_trace(const NetworkSpec& spec, double horizon_h,
                                       std::uint64_t seed);

} // namespace carshare::trace

#endif
