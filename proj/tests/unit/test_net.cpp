#include <doctest.h>

#include <sstream>

#include "carshare/errors.hpp"
#include "carshare/net.hpp"
#include "carshare/net_io.hpp"
#include "carshare/pfsolver.hpp"
#include "carshare/rng.hpp"
#include "../testutil.hpp"

using namespace carshare;

namespace {

bool has_rule(const std::vector<Violation>& vs, Rule r) {
    for (const auto& v : vs)
        if (v.rule == r) return true;
    return false;
}

} // namespace

TEST_SUITE_BEGIN("net");

TEST_CASE("symmetric two-station spec validates clean") {
    auto spec = testutil::two_station(1.0, 1.0, 0.5, 0.5, 3);
    CHECK(validate(spec).empty());
}

TEST_CASE("routing row not summing to one is flagged") {
    auto spec = testutil::two_station(1.0, 1.0, 0.5, 0.5, 3);
    spec.links[0].routing_prob = 0.8;
    spec.stations[0].mu_per_dest[1] = 0.8; // keep rates proportional
    auto vs = validate(spec);
    REQUIRE(!vs.empty());
    CHECK(has_rule(vs, Rule::row_stochastic));
}

TEST_CASE("station without incoming links breaks irreducibility") {
    // 0 <-> 1 while 2 only sends; nothing ever reaches 2.
    NetworkSpec spec;
    spec.fleet_size = 2;
    for (StationId i = 0; i < 3; ++i) {
        StationSpec st;
        st.id = i;
        spec.stations.push_back(st);
    }
    spec.stations[0].mu_per_dest[1] = 1.0;
    spec.stations[1].mu_per_dest[0] = 1.0;
    spec.stations[2].mu_per_dest[0] = 1.0;
    spec.links = {{0, 0, 1, 0.3, 1.0}, {1, 1, 0, 0.3, 1.0}, {2, 2, 0, 0.3, 1.0}};
    auto vs = validate(spec);
    CHECK(has_rule(vs, Rule::irreducibility));
}

TEST_CASE("per-destination and routing inconsistencies are flagged") {
    auto spec = testutil::two_station(1.0, 1.0, 0.5, 0.5, 3);
    SUBCASE("missing rate for a linked destination") {
        spec.stations[0].mu_per_dest.clear();
        spec.stations[0].mu_per_dest[0] = 1.0; // rate points at a non-link
        auto vs = validate(spec);
        CHECK(has_rule(vs, Rule::per_dest_rate_missing));
        CHECK(has_rule(vs, Rule::rate_without_link));
    }
    SUBCASE("rates not proportional to routing") {
        spec.stations[0].mu_per_dest[0] = 1.0;
        spec.links.push_back({2, 0, 0, 0.2, 0.5});
        spec.links[0].routing_prob = 0.5;
        auto vs = validate(spec);
        CHECK(has_rule(vs, Rule::routing_rate_mismatch));
    }
    SUBCASE("alpha outside range and without rate") {
        spec.stations[0].alpha_per_dest[1] = 1.5;
        spec.stations[1].alpha_per_dest[1] = 0.5; // station 1 has no rate to 1
        auto vs = validate(spec);
        CHECK(has_rule(vs, Rule::alpha_range));
        CHECK(has_rule(vs, Rule::alpha_without_rate));
    }
}

TEST_CASE("derive_mu_split splits proportionally") {
    NetworkSpec spec;
    spec.fleet_size = 1;
    StationSpec s0, s1, s2;
    s0.id = 0;
    s0.mu_aggregate = 1.0;
    s1.id = 1;
    s1.mu_aggregate = 1.0;
    s2.id = 2;
    s2.mu_aggregate = 0.5;
    spec.stations = {s0, s1, s2};
    spec.links = {{0, 0, 1, 0.1, 0.2}, {1, 0, 2, 0.1, 0.8}, {2, 1, 0, 0.1, 1.0},
                  {3, 2, 1, 0.1, 0.5}, {4, 2, 0, 0.1, 0.5}};
    auto out = derive_mu_split(spec);
    CHECK(out.stations[0].mu_per_dest.at(1) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(out.stations[0].mu_per_dest.at(2) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(out.stations[1].mu_per_dest.at(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.stations[2].mu_per_dest.at(1) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out.stations[2].mu_per_dest.at(0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(!out.stations[0].mu_aggregate);
}

TEST_CASE("derive_mu_split totals reproduce the aggregate rate") {
    Pcg32 rng(42, 1);
    for (int rep = 0; rep < 50; ++rep) {
        auto spec = testutil::random_network(rng, 2 + static_cast<int>(rng.below(5)), 3);
        NetworkSpec agg = spec;
        for (std::size_t i = 0; i < agg.stations.size(); ++i) {
            agg.stations[i].mu_aggregate = spec.stations[i].mu_total();
            agg.stations[i].mu_per_dest.clear();
        }
        auto split = derive_mu_split(agg);
        for (std::size_t i = 0; i < split.stations.size(); ++i)
            CHECK(split.stations[i].mu_total() ==
                  doctest::Approx(spec.stations[i].mu_total()).epsilon(1e-12));
    }
}

TEST_CASE("derive_mu_split without a routing row fails") {
    NetworkSpec spec;
    spec.fleet_size = 1;
    StationSpec s0;
    s0.id = 0;
    s0.mu_aggregate = 1.0;
    spec.stations = {s0};
    CHECK_THROWS_AS(derive_mu_split(spec), ConsistencyError);
}

TEST_CASE("clean validation implies the solver accepts the spec") {
    Pcg32 rng(7, 9);
    for (int rep = 0; rep < 30; ++rep) {
        auto spec = testutil::random_network(rng, 2 + static_cast<int>(rng.below(4)), 4, true);
        REQUIRE(validate(spec).empty());
        auto e = pf::solve_traffic(spec);
        auto table = pf::convolution(spec, e);
        CHECK_NOTHROW(pf::metrics(spec, e, table));
    }
}

TEST_CASE("network JSON round-trips") {
    Pcg32 rng(3, 3);
    auto spec = testutil::random_network(rng, 3, 5, true);
    std::ostringstream os;
    save_network(os, spec);
    std::istringstream is(os.str());
    auto back = load_network(is);
    REQUIRE(back.station_count() == spec.station_count());
    REQUIRE(back.link_count() == spec.link_count());
    CHECK(back.fleet_size == spec.fleet_size);
    for (std::size_t i = 0; i < spec.station_count(); ++i)
        for (const auto& [dest, mu] : spec.stations[i].mu_per_dest)
            CHECK(back.stations[i].mu_per_dest.at(dest) == doctest::Approx(mu).epsilon(1e-15));
}

TEST_CASE("network parser rejects malformed documents") {
    SUBCASE("unknown key") {
        std::istringstream is(R"({"fleet_size":1,"stations":[],"links":[],"extra":1})");
        CHECK_THROWS_AS(load_network(is), FormatError);
    }
    SUBCASE("station with both mu forms") {
        std::istringstream is(
            R"({"fleet_size":1,"stations":[{"id":0,"mu":1.0,"mu_per_dest":{"0":1.0}}],"links":[]})");
        CHECK_THROWS_AS(load_network(is), FormatError);
    }
    SUBCASE("not JSON at all") {
        std::istringstream is("garbage");
        CHECK_THROWS_AS(load_network(is), FormatError);
    }
}

TEST_CASE("aggregate-rate documents are split on load") {
    std::istringstream is(R"({
      "fleet_size": 2,
      "stations": [{"id": 0, "mu": 1.0}, {"id": 1, "mu": 2.0}],
      "links": [
        {"origin": 0, "dest": 1, "mean_travel_time_h": 0.5, "p": 1.0},
        {"origin": 1, "dest": 0, "mean_travel_time_h": 0.5, "p": 1.0}
      ]})");
    auto spec = load_network(is);
    CHECK(spec.stations[0].mu_per_dest.at(1) == doctest::Approx(1.0));
    CHECK(spec.stations[1].mu_per_dest.at(0) == doctest::Approx(2.0));
    CHECK(validate(spec).empty());
}

TEST_SUITE_END();
