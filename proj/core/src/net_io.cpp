#include "carshare/net_io.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "carshare/errors.hpp"

namespace carshare {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw FormatError("unknown key \"" + it.key() + "\" in " + where);
}

double as_number(const json& v, const std::string& where) {
    if (!v.is_number())
        throw FormatError(where + " must be a number");
    return v.get<double>();
}

std::map<StationId, double> parse_rate_map(const json& obj, const std::string& where) {
    if (!obj.is_object())
        throw FormatError(where + " must be an object keyed by destination id");
    std::map<StationId, double> out;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        StationId dest;
        try {
            std::size_t pos = 0;
            dest = static_cast<StationId>(std::stol(it.key(), &pos));
            if (pos != it.key().size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw FormatError(where + " key \"" + it.key() + "\" is not a station id");
        }
        out[dest] = as_number(it.value(), where + "[" + it.key() + "]");
    }
    return out;
}

} // namespace

NetworkSpec load_network(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("network spec is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw FormatError("network spec must be a JSON object");
    require_keys(doc, {"stations", "links", "fleet_size"}, "network spec");
    if (!doc.contains("stations") || !doc.contains("links") || !doc.contains("fleet_size"))
        throw FormatError("network spec needs \"stations\", \"links\" and \"fleet_size\"");

    NetworkSpec spec;
    if (!doc["fleet_size"].is_number_integer())
        throw FormatError("\"fleet_size\" must be an integer");
    spec.fleet_size = doc["fleet_size"].get<int>();

    if (!doc["stations"].is_array() || !doc["links"].is_array())
        throw FormatError("\"stations\" and \"links\" must be arrays");

    bool any_aggregate = false;
    for (const auto& s : doc["stations"]) {
        require_keys(s, {"id", "mu", "mu_per_dest", "alpha_per_dest"}, "station entry");
        if (!s.contains("id") || !s["id"].is_number_integer())
            throw FormatError("station entry needs an integer \"id\"");
        StationSpec st;
        st.id = s["id"].get<StationId>();
        const bool has_agg = s.contains("mu");
        const bool has_split = s.contains("mu_per_dest");
        if (has_agg == has_split)
            throw FormatError("station " + std::to_string(st.id) +
                              " must carry exactly one of \"mu\" or \"mu_per_dest\"");
        if (has_agg) {
            st.mu_aggregate = as_number(s["mu"], "station mu");
            any_aggregate = true;
        } else {
            st.mu_per_dest = parse_rate_map(s["mu_per_dest"], "mu_per_dest");
        }
        if (s.contains("alpha_per_dest"))
            st.alpha_per_dest = parse_rate_map(s["alpha_per_dest"], "alpha_per_dest");
        spec.stations.push_back(std::move(st));
    }

    for (const auto& l : doc["links"]) {
        require_keys(l, {"origin", "dest", "mean_travel_time_h", "p"}, "link entry");
        for (const char* k : {"origin", "dest", "mean_travel_time_h", "p"})
            if (!l.contains(k))
                throw FormatError(std::string("link entry needs \"") + k + "\"");
        DelayLink lk;
        lk.id = static_cast<LinkId>(spec.links.size());
        if (!l["origin"].is_number_integer() || !l["dest"].is_number_integer())
            throw FormatError("link origin/dest must be integers");
        lk.origin = l["origin"].get<StationId>();
        lk.dest = l["dest"].get<StationId>();
        lk.mean_travel_time_h = as_number(l["mean_travel_time_h"], "mean_travel_time_h");
        lk.routing_prob = as_number(l["p"], "p");
        spec.links.push_back(lk);
    }

    return any_aggregate ? derive_mu_split(spec) : spec;
}

NetworkSpec load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open network spec file: " + path);
    return load_network(in);
}

void save_network(std::ostream& out, const NetworkSpec& spec) {
    json doc;
    doc["fleet_size"] = spec.fleet_size;
    doc["stations"] = json::array();
    for (const auto& st : spec.stations) {
        json s;
        s["id"] = st.id;
        if (st.mu_aggregate) {
            s["mu"] = *st.mu_aggregate;
        } else {
            json m = json::object();
            for (const auto& [dest, mu] : st.mu_per_dest)
                m[std::to_string(dest)] = mu;
            s["mu_per_dest"] = std::move(m);
        }
        if (!st.alpha_per_dest.empty()) {
            json a = json::object();
            for (const auto& [dest, al] : st.alpha_per_dest)
                a[std::to_string(dest)] = al;
            s["alpha_per_dest"] = std::move(a);
        }
        doc["stations"].push_back(std::move(s));
    }
    doc["links"] = json::array();
    for (const auto& lk : spec.links) {
        json l;
        l["origin"] = lk.origin;
        l["dest"] = lk.dest;
        l["mean_travel_time_h"] = lk.mean_travel_time_h;
        l["p"] = lk.routing_prob;
        doc["links"].push_back(std::move(l));
    }
    out << doc.dump(2) << "\n";
}

void save_network_file(const std::string& path, const NetworkSpec& spec) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write network spec file: " + path);
    save_network(out, spec);
}

} // namespace carshare
