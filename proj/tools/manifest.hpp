#ifndef CARSHARE_TOOLS_MANIFEST_HPP
#define CARSHARE_TOOLS_MANIFEST_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace carshare::tools {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a over the file bytes, hex encoded; cheap input fingerprint.
std::string fnv1a_file_hex(const std::filesystem::path& path);

// Every subcommand drops one of these next to its outputs. Output paths are
// stored relative to the output directory so that re-running the same
// manifest elsewhere reproduces byte-identical files.
struct RunManifest {
    std::string subcommand;
    nlohmann::json params; // config-file schema of the subcommand
    std::vector<std::pair<std::string, std::string>> inputs; // path, digest
    std::vector<std::string> outputs;                        // relative names

    void add_input(const std::filesystem::path& path);
    void write(const std::filesystem::path& outdir) const;
};

} // namespace carshare::tools

#endif
