#pragma once

#include "phi3/common.hpp"
#include "phi3/map_field.hpp"

#include <cstring>
#include <fstream>

namespace phi3 {

// Versioned binary dump of a sampled map: header, grid id string, config
// hash, then the nodal values as little-endian 64-bit floats. Round-trips
// bitwise exactly.
struct RunArtifact {
    std::string grid_id;
    std::uint64_t config_hash = 0;
    int ambient_dim = 0;
    std::vector<Vec> values;

    static constexpr char kMagic[9] = "PHI3MAP1";

    void write(std::ostream& os) const {
        os.write(kMagic, 8);
        write_u64(os, config_hash);
        write_u64(os, std::uint64_t(grid_id.size()));
        os.write(grid_id.data(), std::streamsize(grid_id.size()));
        write_u64(os, std::uint64_t(ambient_dim));
        write_u64(os, std::uint64_t(values.size()));
        for (const Vec& v : values)
            for (int j = 0; j < v.size(); ++j) write_f64(os, v[j]);
    }

    void write_file(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        require(os.good(), "cannot write artifact: " + path);
        write(os);
    }

    static RunArtifact read(std::istream& is) {
        char magic[8];
        is.read(magic, 8);
        require(is.good() && std::memcmp(magic, kMagic, 8) == 0,
                "artifact: bad magic header");
        RunArtifact a;
        a.config_hash = read_u64(is);
        const auto idlen = read_u64(is);
        a.grid_id.resize(idlen);
        is.read(a.grid_id.data(), std::streamsize(idlen));
        a.ambient_dim = int(read_u64(is));
        const auto count = read_u64(is);
        a.values.resize(count, Vec(a.ambient_dim));
        for (auto& v : a.values)
            for (int j = 0; j < a.ambient_dim; ++j) v[j] = read_f64(is);
        require(is.good(), "artifact: truncated file");
        return a;
    }

    static RunArtifact read_file(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        require(is.good(), "cannot read artifact: " + path);
        return read(is);
    }

    static RunArtifact from_map(const MapField& u, std::string grid_id,
                                std::uint64_t config_hash) {
        RunArtifact a;
        a.grid_id = std::move(grid_id);
        a.config_hash = config_hash;
        a.ambient_dim = u.ambient_dim();
        a.values.reserve(std::size_t(u.grid().node_count()));
        for (Index i = 0; i < u.grid().node_count(); ++i) a.values.push_back(u.value(i));
        return a;
    }

    MapField restore(const DomainGrid& grid, const EmbeddedTarget& target) const {
        require(Index(values.size()) == grid.node_count(),
                "artifact node count does not match the grid");
        require(ambient_dim == target.ambient_dim(),
                "artifact ambient dimension does not match the target");
        return MapField::from_values(grid, target, values);
    }

  private:
    static void write_u64(std::ostream& os, std::uint64_t x) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = (x >> (8 * i)) & 0xffu;
        os.write(reinterpret_cast<const char*>(b), 8);
    }
    static std::uint64_t read_u64(std::istream& is) {
        unsigned char b[8];
        is.read(reinterpret_cast<char*>(b), 8);
        std::uint64_t x = 0;
        for (int i = 0; i < 8; ++i) x |= std::uint64_t(b[i]) << (8 * i);
        return x;
    }
    static void write_f64(std::ostream& os, double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        write_u64(os, bits);
    }
    static double read_f64(std::istream& is) {
        const std::uint64_t bits = read_u64(is);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

}  // namespace phi3
