#pragma once

#include <cstring>
#include <fstream>
#include <string>

#include "cnsnet/network.hpp"
#include "cnsnet/serialize.hpp"

namespace cnsnet {

// Checkpoint layout:
//   "CNSN" | version byte (1) | u32 LE descriptor length | descriptor text |
//   per-tensor records: u32 LE rank, rank x u32 LE dims, numel x f32 LE values.
// Tensor order is classifier, generator, discriminator, each weight/bias in
// plan order. The descriptor is JSON carrying the architecture, k and the
// resolved-config digest; the tensor count is derivable from it alone.

constexpr char kCheckpointMagic[4] = {'C', 'N', 'S', 'N'};
constexpr unsigned char kCheckpointVersion = 1;

namespace detail {

inline void put_tensor(std::ostream& out, const Tensor<float>& t) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (std::int64_t i = 0; i < t.numel(); ++i) put_f32(out, t[i]);
}

inline Tensor<float> get_tensor(std::istream& in, const std::string& name) {
    const std::uint32_t rank = get_u32(in, "tensor rank");
    if (rank == 0 || rank > 8) throw FormatError(name + ": implausible tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::int64_t>(get_u32(in, "tensor dim"));
    Tensor<float> t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = get_f32(in, "tensor value");
    return t;
}

} // namespace detail

inline std::string checkpoint_descriptor(const ModelTriple<float>& model,
                                         const std::string& config_digest) {
    return json{{"arch", to_json(model.config)}, {"k", model.k}, {"config_digest", config_digest}}
        .dump();
}

inline void save_checkpoint(const std::string& path, const ModelTriple<float>& model,
                            const std::string& config_digest = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    out.write(kCheckpointMagic, 4);
    out.put(static_cast<char>(kCheckpointVersion));
    const std::string desc = checkpoint_descriptor(model, config_digest);
    detail::put_u32(out, static_cast<std::uint32_t>(desc.size()));
    out.write(desc.data(), static_cast<std::streamsize>(desc.size()));
    for (const Network<float>* net : {&model.classifier, &model.generator, &model.discriminator})
        for (const auto& p : net->params) detail::put_tensor(out, p);
    if (!out) throw IoError("failed while writing checkpoint '" + path + "'");
}

inline ModelTriple<float> load_checkpoint(const std::string& path,
                                          std::string* config_digest = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError(path + ": bad magic, not a CNSN checkpoint");
    const int version = in.get();
    if (version != kCheckpointVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t desc_len = detail::get_u32(in, "descriptor length");
    std::string desc(desc_len, '\0');
    if (!in.read(desc.data(), desc_len)) throw FormatError(path + ": truncated descriptor");

    json j;
    try {
        j = json::parse(desc);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": descriptor is not valid JSON: " + e.what());
    }
    ArchitectureConfig config;
    int k = 0;
    try {
        config = arch_from_json(j.at("arch"));
        k = j.at("k").get<int>();
        if (config_digest) *config_digest = j.value("config_digest", std::string{});
    } catch (const json::exception& e) {
        throw FormatError(path + ": bad descriptor: " + e.what());
    }

    ModelTriple<float> model = init_model<float>(config, k, 0);
    for (Network<float>* net : {&model.classifier, &model.generator, &model.discriminator})
        for (auto& p : net->params) {
            Tensor<float> loaded = detail::get_tensor(in, path);
            if (loaded.shape() != p.shape())
                throw FormatError(path + ": tensor shape " + shape_str(loaded.shape()) +
                                  " conflicts with descriptor-derived " + shape_str(p.shape()));
            p = std::move(loaded);
        }
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError(path + ": trailing bytes after the last tensor record");
    return model;
}

} // namespace cnsnet
