#pragma once

// Self-describing binary checkpoint: magic, format version, embedded model
// config (JSON), then named parameter tensors as row-major little-endian
// 64-bit floats. save -> load -> save round-trips bitwise.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lipt/common.hpp"
#include "lipt/config.hpp"
#include "lipt/model.hpp"

namespace lipt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace detail {

constexpr char kCheckpointMagic[8] = {'L', 'I', 'P', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
void read_pod(std::istream& is, T& value, const std::string& context) {
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw ParseError(concat("checkpoint: truncated while reading ", context));
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod(os, static_cast<uint64_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const std::string& context) {
    uint64_t len = 0;
    read_pod(is, len, context);
    if (len > (1ull << 30)) throw ParseError(concat("checkpoint: absurd length in ", context));
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw ParseError(concat("checkpoint: truncated while reading ", context));
    return s;
}

} // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, Model& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(concat("cannot write checkpoint: ", path.string()));
    os.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    detail::write_pod(os, detail::kCheckpointVersion);
    detail::write_string(os, model_config_to_json(m.cfg).dump());
    auto params = m.parameters();
    detail::write_pod(os, static_cast<uint64_t>(params.size()));
    for (Param* p : params) {
        detail::write_string(os, p->name);
        detail::write_pod(os, static_cast<uint32_t>(p->w.shape.size()));
        for (size_t d : p->w.shape) detail::write_pod(os, static_cast<uint64_t>(d));
        os.write(reinterpret_cast<const char*>(p->w.data()),
                 static_cast<std::streamsize>(p->w.numel() * sizeof(double)));
    }
    if (!os) throw Error(concat("write failed: ", path.string()));
}

inline Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(concat("cannot open checkpoint: ", path.string()));
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0)
        throw ParseError(concat(path.string(), ": not a lipt checkpoint"));
    uint32_t version = 0;
    detail::read_pod(is, version, "version");
    if (version != detail::kCheckpointVersion)
        throw ParseError(concat(path.string(), ": unsupported checkpoint version ", version));

    nlohmann::json cfg_json =
        nlohmann::json::parse(detail::read_string(is, "config"), nullptr, false);
    if (cfg_json.is_discarded())
        throw ParseError(concat(path.string(), ": malformed config block"));
    Model m = init_model(model_config_from_json(cfg_json));

    uint64_t n_tensors = 0;
    detail::read_pod(is, n_tensors, "tensor count");
    auto params = m.parameters();
    if (n_tensors != params.size())
        throw ParseError(concat(path.string(), ": expected ", params.size(),
                                " tensors, found ", n_tensors));
    std::map<std::string, Param*> by_name;
    for (Param* p : params) by_name[p->name] = p;

    for (uint64_t ti = 0; ti < n_tensors; ++ti) {
        std::string name = detail::read_string(is, "tensor name");
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw ParseError(concat(path.string(), ": unknown tensor '", name, "'"));
        Param* p = it->second;
        uint32_t ndim = 0;
        detail::read_pod(is, ndim, "tensor rank");
        std::vector<size_t> shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) {
            uint64_t dim = 0;
            detail::read_pod(is, dim, "tensor shape");
            shape[d] = static_cast<size_t>(dim);
        }
        if (shape != p->w.shape)
            throw ParseError(concat(path.string(), ": shape mismatch for tensor '", name, "'"));
        is.read(reinterpret_cast<char*>(p->w.data()),
                static_cast<std::streamsize>(p->w.numel() * sizeof(double)));
        if (!is) throw ParseError(concat(path.string(), ": truncated tensor data in '",
                                         name, "'"));
        by_name.erase(it);
    }
    if (!by_name.empty())
        throw ParseError(concat(path.string(), ": missing tensor '",
                                by_name.begin()->first, "'"));
    return m;
}

} // namespace lipt
