#ifndef CARSHARE_NET_IO_HPP
#define CARSHARE_NET_IO_HPP

#include <iosfwd>
#include <string>

#include "carshare/net.hpp"

namespace carshare {

// Network spec document, JSON syntax. Top-level keys: "stations", "links",
// "fleet_size". A station carries "id" and either "mu" (aggregate, split
// over the routing row on load) or "mu_per_dest", plus optional
// "alpha_per_dest". A link carries "origin", "dest", "mean_travel_time_h",
// "p". Unknown keys are rejected.
NetworkSpec load_network(std::istream& in);
NetworkSpec load_network_file(const std::string& path);

void save_network(std::ostream& out, const NetworkSpec& spec);
void save_network_file(const std::string& path, const NetworkSpec& spec);

} // namespace carshare

#endif
