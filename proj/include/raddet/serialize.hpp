// On-disk formats: the model checkpoint container plus small binary/text
// helpers shared by the dataset container and report writers. All round
// trips are bit-exact; text doubles use %.17g so they reparse exactly.

#ifndef RADDET_SERIALIZE_HPP
#define RADDET_SERIALIZE_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "raddet/common.hpp"
#include "raddet/model.hpp"

namespace raddet {

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

namespace detail {

inline void append_f64_le(std::string& out, double x) {
    uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double read_f64_le(const char* p) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    double x;
    std::memcpy(&x, &bits, sizeof(x));
    return x;
}

inline void append_f32_le(std::string& out, float x) {
    uint32_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline float read_f32_le(const char* p) {
    uint32_t bits = 0;
    for (int i = 0; i < 4; ++i)
        bits |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    float x;
    std::memcpy(&x, &bits, sizeof(x));
    return x;
}

}  // namespace detail

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

// Binary PGM (P5), one byte per cell.
inline void write_pgm(const std::string& path, int rows, int cols,
                      const std::vector<uint8_t>& bytes) {
    require(static_cast<size_t>(rows) * cols == bytes.size(), "write_pgm: size mismatch");
    std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    write_file_bytes(path, out);
}

// ---------------------------------------------------------------------------
// Checkpoint container
//
//   raddet-checkpoint v1\n
//   <json header size in bytes>\n
//   <json header>\n
//   <little-endian float64 payload, arrays in registry order, then extras>
//
// The header records the model config and each array's name, shape and
// offset (in doubles) into the payload.

struct ExtraArray {
    std::string name;
    std::vector<double> data;
};

inline void save_checkpoint(const DetectorModel& model, const std::string& path,
                            const std::vector<ExtraArray>& extras = {}) {
    nlohmann::json header;
    header["format_version"] = 1;
    header["config"] = {{"L", model.cfg.L},       {"N", model.cfg.N},
                        {"H", model.cfg.H},       {"num_blocks", model.cfg.num_blocks},
                        {"dt_min", model.cfg.dt_min}, {"dt_max", model.cfg.dt_max},
                        {"seed", model.cfg.seed}};

    std::string payload;
    size_t offset = 0;
    nlohmann::json params = nlohmann::json::array();
    for (auto& [name, t] : model.params()) {
        params.push_back({{"name", name}, {"shape", t->shape}, {"offset", offset},
                          {"count", t->size()}});
        for (double x : t->v) detail::append_f64_le(payload, x);
        offset += t->size();
    }
    header["params"] = params;
    nlohmann::json extra_list = nlohmann::json::array();
    for (const auto& e : extras) {
        extra_list.push_back({{"name", e.name}, {"offset", offset}, {"count", e.data.size()}});
        for (double x : e.data) detail::append_f64_le(payload, x);
        offset += e.data.size();
    }
    header["extras"] = extra_list;

    std::string json_text = header.dump();
    std::string out = "raddet-checkpoint v1\n" + std::to_string(json_text.size()) + "\n" +
                      json_text + "\n" + payload;
    write_file_bytes(path, out);
}

struct Checkpoint {
    DetectorModel model;
    std::vector<ExtraArray> extras;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::string bytes = read_file_bytes(path);
    size_t p1 = bytes.find('\n');
    if (p1 == std::string::npos || bytes.substr(0, p1) != "raddet-checkpoint v1")
        throw IoError("not a raddet checkpoint: " + path);
    size_t p2 = bytes.find('\n', p1 + 1);
    if (p2 == std::string::npos) throw IoError("truncated checkpoint header: " + path);
    size_t json_size = std::stoull(bytes.substr(p1 + 1, p2 - p1 - 1));
    if (p2 + 1 + json_size + 1 > bytes.size()) throw IoError("truncated checkpoint: " + path);
    nlohmann::json header = nlohmann::json::parse(bytes.substr(p2 + 1, json_size));
    const char* payload = bytes.data() + p2 + 1 + json_size + 1;
    size_t payload_doubles = (bytes.size() - (p2 + 1 + json_size + 1)) / 8;

    DetectorConfig cfg;
    const auto& jc = header.at("config");
    cfg.L = jc.at("L").get<int>();
    cfg.N = jc.at("N").get<int>();
    cfg.H = jc.at("H").get<int>();
    cfg.num_blocks = jc.at("num_blocks").get<int>();
    cfg.dt_min = jc.at("dt_min").get<double>();
    cfg.dt_max = jc.at("dt_max").get<double>();
    cfg.seed = jc.at("seed").get<uint64_t>();

    Checkpoint ck{init_model(cfg), {}};
    auto registry = ck.model.params();
    const auto& jp = header.at("params");
    require(jp.size() == registry.size(), "checkpoint: registry size mismatch");
    for (size_t i = 0; i < registry.size(); ++i) {
        const auto& entry = jp.at(i);
        if (entry.at("name").get<std::string>() != registry[i].first)
            throw IoError("checkpoint: parameter name mismatch at index " + std::to_string(i));
        size_t offset = entry.at("offset").get<size_t>();
        size_t count = entry.at("count").get<size_t>();
        require(count == registry[i].second->size(), "checkpoint: parameter size mismatch");
        require(offset + count <= payload_doubles, "checkpoint: payload out of range");
        for (size_t k = 0; k < count; ++k)
            registry[i].second->v[k] = detail::read_f64_le(payload + 8 * (offset + k));
    }
    for (const auto& entry : header.at("extras")) {
        ExtraArray e;
        e.name = entry.at("name").get<std::string>();
        size_t offset = entry.at("offset").get<size_t>();
        size_t count = entry.at("count").get<size_t>();
        require(offset + count <= payload_doubles, "checkpoint: extras out of range");
        e.data.resize(count);
        for (size_t k = 0; k < count; ++k) e.data[k] = detail::read_f64_le(payload + 8 * (offset + k));
        ck.extras.push_back(std::move(e));
    }
    return ck;
}

}  // namespace raddet

#endif  // RADDET_SERIALIZE_HPP
