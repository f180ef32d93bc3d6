#include "bdr/manifest.hpp"

#include "bdr/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace bdr {

namespace {
constexpr const char* kVersion = "bdr 0.1.0";
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

RunManifest::RunManifest(std::string command, std::string_view config_text, std::uint64_t seed)
    : command_(std::move(command)), seed_(seed), version_(kVersion) {
    config_hash_ = hex64(fnv1a64(config_text));
    digest_ = hex64(fnv1a64(command_ + "|" + config_hash_ + "|" + std::to_string(seed_)));
}

void RunManifest::record_output(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("manifest: cannot read output file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();
    outputs_.push_back(Output{path.filename().string(), bytes.size(), hex64(fnv1a64(bytes))});
}

void RunManifest::write(const std::filesystem::path& dir) const {
    nlohmann::json doc;
    doc["command"] = command_;
    doc["config_hash"] = config_hash_;
    doc["seed"] = seed_;
    doc["git_describe"] = version_;
    doc["digest"] = digest_;
    doc["outputs"] = nlohmann::json::array();
    for (const auto& out : outputs_) {
        doc["outputs"].push_back(
            {{"path", out.path}, {"bytes", out.bytes}, {"digest", out.digest}});
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error("manifest: cannot write manifest.json in " + dir.string());
    out << doc.dump(2) << "\n";
}

}  // namespace bdr
