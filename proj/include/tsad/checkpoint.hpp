#pragma once

#include "tsad/nn.hpp"

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

namespace tsad {

// Binary model container:
//   8-byte magic "TSADCKPT", u32 format version, u64 header length,
//   JSON header (metadata, specs, seeds, tensor shapes), then every tensor as
//   raw little-endian IEEE-754 doubles in header order, then a u64 FNV-1a
//   checksum of the header and tensor bytes.
// Values round-trip bit-exactly.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedNetwork {
    std::string name;
    nn::NetworkSpec spec;
    nn::ParameterStore store;
};

struct Checkpoint {
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<NamedNetwork> networks;

    const NamedNetwork& network(const std::string& name) const;
};

nlohmann::json spec_to_json(const nn::NetworkSpec& spec);
nn::NetworkSpec spec_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tsad
