#include "softseg/checkpoint.hpp"

#include <bit>
#include <filesystem>
#include <fstream>

#include <json.hpp>

// checkpoint payloads are little-endian by contract
static_assert(std::endian::native == std::endian::little);

namespace softseg::nn {

namespace {
constexpr char kMagic[] = "SSCKPT1";

void write_u32(std::ofstream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("checkpoint: truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
}  // namespace

void save_checkpoint(UNet<float>& model, uint64_t seed, const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + path);

    const UNetConfig& c = model.config();
    nlohmann::json hdr = {
        {"depth", c.depth},
        {"in_channels", c.in_channels},
        {"base_filters", c.base_filters},
        {"dropout_rate", c.dropout_rate},
        {"seed", seed},
    };
    out << kMagic << "\n" << hdr.dump() << "\n";

    auto params = model.params();
    write_u32(out, static_cast<uint32_t>(params.size()));
    for (auto& pr : params) {
        write_u32(out, static_cast<uint32_t>(pr.name.size()));
        out.write(pr.name.data(), static_cast<std::streamsize>(pr.name.size()));
        write_u32(out, static_cast<uint32_t>(pr.tensor->shape.size()));
        for (int d : pr.tensor->shape) write_u32(out, static_cast<uint32_t>(d));
        static_assert(sizeof(float) == 4);
        out.write(reinterpret_cast<const char*>(pr.tensor->values.data()),
                  static_cast<std::streamsize>(pr.tensor->values.size() * sizeof(float)));
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("missing checkpoint " + path);
    std::string magic, hdr_line;
    if (!std::getline(in, magic) || magic != kMagic) throw FormatError("checkpoint: bad magic");
    if (!std::getline(in, hdr_line)) throw FormatError("checkpoint: missing header");
    nlohmann::json hdr = nlohmann::json::parse(hdr_line);

    LoadedCheckpoint lc;
    lc.config.depth = hdr.at("depth").get<int>();
    lc.config.in_channels = hdr.at("in_channels").get<int>();
    lc.config.base_filters = hdr.at("base_filters").get<int>();
    lc.config.dropout_rate = hdr.at("dropout_rate").get<double>();
    lc.seed = hdr.at("seed").get<uint64_t>();
    lc.model = std::make_unique<UNet<float>>(lc.config, lc.seed);

    auto params = lc.model->params();
    const uint32_t count = read_u32(in);
    if (count != params.size()) throw FormatError("checkpoint: array count mismatch");
    for (auto& pr : params) {
        const uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (name != pr.name) throw FormatError("checkpoint: expected array " + pr.name + ", found " + name);
        const uint32_t ndim = read_u32(in);
        if (ndim != pr.tensor->shape.size()) throw FormatError("checkpoint: rank mismatch for " + name);
        for (size_t d = 0; d < ndim; ++d)
            if (read_u32(in) != static_cast<uint32_t>(pr.tensor->shape[d]))
                throw FormatError("checkpoint: shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(pr.tensor->values.data()),
                static_cast<std::streamsize>(pr.tensor->values.size() * sizeof(float)));
        if (!in) throw FormatError("checkpoint: truncated payload in " + name);
    }
    return lc;
}

}  // namespace softseg::nn
