#include "tsad/checkpoint.hpp"

#include "tsad/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace tsad {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

namespace {

constexpr char kMagic[8] = {'T', 'S', 'A', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError("truncated checkpoint");
    return v;
}

// FNV-1a over the header text and tensor bytes, stored after the last tensor.
class Fnv1a {
public:
    void feed(const void* data, std::size_t size) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            hash_ ^= bytes[i];
            hash_ *= 1099511628211ULL;
        }
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 14695981039346656037ULL;
};

}  // namespace

const NamedNetwork& Checkpoint::network(const std::string& name) const {
    for (const auto& n : networks)
        if (n.name == name) return n;
    throw VersionError("checkpoint has no network named '" + name + "'");
}

nlohmann::json spec_to_json(const nn::NetworkSpec& spec) {
    auto layers = nlohmann::json::array();
    for (const auto& l : spec.layers) {
        layers.push_back({{"kind", nn::to_string(l.kind)},
                          {"in", l.in},
                          {"out", l.out},
                          {"activation", nn::to_string(l.activation)}});
    }
    return {{"layers", layers}};
}

nn::NetworkSpec spec_from_json(const nlohmann::json& j) {
    nn::NetworkSpec spec;
    for (const auto& l : j.at("layers")) {
        spec.layers.push_back({nn::parse_layer_kind(l.at("kind").get<std::string>()),
                               l.at("in").get<int>(), l.at("out").get<int>(),
                               nn::parse_activation(l.at("activation").get<std::string>())});
    }
    spec.validate();
    return spec;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    nlohmann::json header;
    header["format"] = "tsad-checkpoint";
    header["metadata"] = checkpoint.metadata;
    header["networks"] = nlohmann::json::array();
    for (const auto& net : checkpoint.networks) {
        nlohmann::json tensors = nlohmann::json::array();
        for (const auto& [name, p] : net.store) {
            tensors.push_back({{"name", name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
        }
        header["networks"].push_back({{"name", net.name},
                                      {"spec", spec_to_json(net.spec)},
                                      {"seed", net.store.seed},
                                      {"tensors", tensors}});
    }
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::uint64_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    Fnv1a sum;
    sum.feed(text.data(), text.size());
    for (const auto& net : checkpoint.networks) {
        for (const auto& [name, p] : net.store) {
            const auto bytes = sizeof(double) * static_cast<std::size_t>(p.value.size());
            out.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(bytes));
            sum.feed(p.value.data(), bytes);
        }
    }
    write_pod(out, sum.value());
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw VersionError("not a tsad checkpoint: " + path.string());
    }
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw VersionError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto header_len = read_pod<std::uint64_t>(in);
    if (header_len > (1ULL << 30)) throw ParseError("corrupt checkpoint header length");
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw ParseError("truncated checkpoint header");
    Fnv1a sum;
    sum.feed(text.data(), text.size());

    Checkpoint ckpt;
    try {
        const auto header = nlohmann::json::parse(text);
        if (header.at("format") != "tsad-checkpoint") throw VersionError("unknown checkpoint format");
        ckpt.metadata = header.at("metadata");
        for (const auto& net : header.at("networks")) {
            NamedNetwork nn_entry;
            nn_entry.name = net.at("name").get<std::string>();
            nn_entry.spec = spec_from_json(net.at("spec"));
            nn_entry.store.seed = net.at("seed").get<std::uint64_t>();
            for (const auto& t : net.at("tensors")) {
                auto& p = nn_entry.store.add(t.at("name").get<std::string>(), t.at("rows").get<Eigen::Index>(),
                                             t.at("cols").get<Eigen::Index>());
                (void)p;
            }
            ckpt.networks.push_back(std::move(nn_entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("corrupt checkpoint header: ") + e.what());
    } catch (const SpecError& e) {
        throw ParseError(std::string("corrupt checkpoint spec: ") + e.what());
    }
    for (auto& net : ckpt.networks) {
        for (auto& [name, p] : net.store) {
            const auto bytes = sizeof(double) * static_cast<std::size_t>(p.value.size());
            in.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(bytes));
            if (!in) throw ParseError("truncated checkpoint tensor data (" + name + ")");
            sum.feed(p.value.data(), bytes);
        }
        // The tensor layout must agree with what the spec would create.
        const auto fresh = nn::init_network(net.spec, 0);
        if (fresh.tensor_count() != net.store.tensor_count()) {
            throw VersionError("checkpoint tensors do not match network spec for " + net.name);
        }
        for (const auto& [name, p] : fresh) {
            if (!net.store.contains(name) || net.store.at(name).value.rows() != p.value.rows() ||
                net.store.at(name).value.cols() != p.value.cols()) {
                throw VersionError("checkpoint tensor " + name + " does not match network spec");
            }
        }
    }
    if (read_pod<std::uint64_t>(in) != sum.value()) throw ParseError("checkpoint checksum mismatch");
    if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes in checkpoint");
    return ckpt;
}

}  // namespace tsad
