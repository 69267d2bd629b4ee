#include "manifest.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>

#include "carshare/errors.hpp"

namespace carshare::tools {

std::string fnv1a_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open input file: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void RunManifest::add_input(const std::filesystem::path& path) {
    inputs.emplace_back(path.string(), fnv1a_file_hex(path));
}

void RunManifest::write(const std::filesystem::path& outdir) const {
    nlohmann::json doc;
    doc["subcommand"] = subcommand;
    doc["params"] = params;
    doc["tool_version"] = kToolVersion;
    doc["inputs"] = nlohmann::json::array();
    for (const auto& [path, digest] : inputs)
        doc["inputs"].push_back({{"path", path}, {"fnv1a", digest}});
    doc["outputs"] = outputs;

    std::ofstream out(outdir / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write manifest in " + outdir.string());
    out << doc.dump(2) << "\n";
}

} // namespace carshare::tools
