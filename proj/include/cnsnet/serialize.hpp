#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "cnsnet/data.hpp"
#include "cnsnet/network.hpp"
#include "cnsnet/training.hpp"

namespace cnsnet {

using json = nlohmann::json;

inline json to_json(const ArchitectureConfig& c) {
    return json{{"variant", to_string(c.variant)},
                {"classifier_hidden", c.classifier_hidden},
                {"generator_hidden", c.generator_hidden},
                {"discriminator_hidden", c.discriminator_hidden},
                {"latent_dim", c.latent_dim},
                {"feature_dim", c.feature_dim},
                {"image_height", c.image_height},
                {"image_width", c.image_width}};
}

inline ArchitectureConfig arch_from_json(const json& j) {
    ArchitectureConfig c;
    c.variant = arch_variant_from(j.at("variant").get<std::string>());
    c.classifier_hidden = j.at("classifier_hidden").get<std::vector<int>>();
    c.generator_hidden = j.at("generator_hidden").get<std::vector<int>>();
    c.discriminator_hidden = j.at("discriminator_hidden").get<std::vector<int>>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.feature_dim = j.at("feature_dim").get<std::int64_t>();
    c.image_height = j.at("image_height").get<std::int64_t>();
    c.image_width = j.at("image_width").get<std::int64_t>();
    return c;
}

inline void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

// ---- split manifest ---------------------------------------------------------

inline void save_split_manifest(const std::string& path, const OpenSetSplit& split) {
    save_json(path, json{{"known_ids", split.known_ids},
                         {"unknown_ids", split.unknown_ids},
                         {"train", split.train},
                         {"validation", split.validation},
                         {"test", split.test},
                         {"unknown_test", split.unknown_test},
                         {"seed", split.seed},
                         {"dataset_digest", split.dataset_digest}});
}

inline OpenSetSplit load_split_manifest(const std::string& path) {
    const json j = load_json(path);
    OpenSetSplit s;
    try {
        s.known_ids = j.at("known_ids").get<std::vector<int>>();
        s.unknown_ids = j.at("unknown_ids").get<std::vector<int>>();
        s.train = j.at("train").get<std::vector<std::int64_t>>();
        s.validation = j.at("validation").get<std::vector<std::int64_t>>();
        s.test = j.at("test").get<std::vector<std::int64_t>>();
        s.unknown_test = j.at("unknown_test").get<std::vector<std::int64_t>>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.dataset_digest = j.at("dataset_digest").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return s;
}

// ---- normalization stats ------------------------------------------------------

inline void save_norm_stats(const std::string& path, const NormStats& st) {
    save_json(path, json{{"min", st.min}, {"max", st.max}});
}

inline NormStats load_norm_stats(const std::string& path) {
    const json j = load_json(path);
    NormStats st;
    try {
        st.min = j.at("min").get<std::vector<float>>();
        st.max = j.at("max").get<std::vector<float>>();
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (st.min.size() != st.max.size()) throw ParseError(path + ": min/max width mismatch");
    return st;
}

inline std::string digest_of_json(const json& j) {
    const std::string text = j.dump();
    return to_hex(fnv1a64(text.data(), text.size()));
}

} // namespace cnsnet
