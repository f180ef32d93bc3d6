#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bdr {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Record of one run: what was executed, a digest of its inputs, and every
/// file it produced. Reruns with identical inputs reproduce identical digests.
class RunManifest {
public:
    RunManifest(std::string command, std::string_view config_text, std::uint64_t seed);

    /// Digest over (command, config hash, seed); stamped into every CSV.
    const std::string& digest() const { return digest_; }
    const std::string& config_hash() const { return config_hash_; }

    /// Hashes the file's bytes and appends it to the outputs list.
    void record_output(const std::filesystem::path& path);

    /// Writes manifest.json into dir (and records it is NOT self-listed).
    void write(const std::filesystem::path& dir) const;

private:
    struct Output {
        std::string path;
        std::uintmax_t bytes = 0;
        std::string digest;
    };

    std::string command_;
    std::string config_hash_;
    std::uint64_t seed_ = 0;
    std::string version_;
    std::string digest_;
    std::vector<Output> outputs_;
};

}  // namespace bdr
