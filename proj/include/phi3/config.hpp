#pragma once

#include "phi3/common.hpp"
#include "phi3/grid.hpp"
#include "phi3/map_field.hpp"
#include "phi3/targets.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace phi3 {

// Flat sectioned key-value configuration: `[section]` headers, `key = value`
// lines, `#` comments. No nesting. Values keep their raw text; typed
// accessors parse on demand and name the offending field on failure.
class Config {
  public:
    static Config parse(std::istream& in) {
        Config c;
        std::string line, section = "run";
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t\r");
                if (a == std::string::npos) return std::string();
                const auto b = s.find_last_not_of(" \t\r");
                return s.substr(a, b - a + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                const auto close = line.find(']');
                require(close != std::string::npos,
                        "config line " + std::to_string(lineno) + ": unterminated section");
                section = trim(line.substr(1, close - 1));
                continue;
            }
            const auto eq = line.find('=');
            require(eq != std::string::npos,
                    "config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            require(!key.empty(), "config line " + std::to_string(lineno) + ": empty key");
            c.kv_[section + "." + key] = value;
        }
        return c;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        require(in.good(), "cannot open config file: " + path);
        return parse(in);
    }

    static Config parse_string(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string str(const std::string& key) const {
        auto it = kv_.find(key);
        require(it != kv_.end(), "missing config field: " + key);
        return it->second;
    }
    std::string str_or(const std::string& key, const std::string& dflt) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : it->second;
    }

    double number(const std::string& key) const {
        const std::string v = str(key);
        try {
            std::size_t used = 0;
            const double x = std::stod(v, &used);
            require(used == v.size(), "");
            return x;
        } catch (...) {
            throw Error("config field " + key + ": not a number: '" + v + "'");
        }
    }
    double number_or(const std::string& key, double dflt) const {
        return has(key) ? number(key) : dflt;
    }

    long integer(const std::string& key) const {
        const double x = number(key);
        require(x == std::floor(x), "config field " + key + ": expected an integer");
        return long(x);
    }
    long integer_or(const std::string& key, long dflt) const {
        return has(key) ? integer(key) : dflt;
    }

    std::vector<double> numbers(const std::string& key) const {
        std::istringstream in(str(key));
        std::vector<double> out;
        double x;
        while (in >> x) out.push_back(x);
        require(!out.empty(), "config field " + key + ": expected numbers");
        return out;
    }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    // Canonical text (sorted keys) used for hashing and determinism checks.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : kv_) {
            out += k;
            out += '=';
            out += v;
            out += '\n';
        }
        return out;
    }

    std::uint64_t hash() const {
        // FNV-1a
        std::uint64_t h = 1469598103934665603ull;
        for (char ch : canonical()) {
            h ^= std::uint64_t(static_cast<unsigned char>(ch));
            h *= 1099511628211ull;
        }
        return h;
    }

  private:
    std::map<std::string, std::string> kv_;
};

// --- object construction from config sections ------------------------------

inline CurvatureProfile profile_from_config(const Config& c, const std::string& prefix) {
    const std::string kind = c.str_or(prefix + ".profile", "flat");
    if (kind == "flat") return CurvatureProfile::flat();
    if (kind == "pinched_negative")
        return CurvatureProfile::pinched_negative(c.number(prefix + ".alpha"),
                                                  c.number(prefix + ".beta"));
    if (kind == "power_decay")
        return CurvatureProfile::power_decay(c.number(prefix + ".A"), c.number(prefix + ".B"),
                                             c.number(prefix + ".eps"));
    if (kind == "inverse_square")
        return CurvatureProfile::inverse_square(c.number(prefix + ".a"),
                                                c.number(prefix + ".b"));
    throw Error("config field " + prefix + ".profile: unknown profile '" + kind + "'");
}

inline DomainGrid grid_from_config(const Config& c) {
    const std::string model = c.str("domain.model");
    const int m = int(c.integer("domain.m"));
    const int nodes = int(c.integer("domain.nodes"));
    if (model == "flat_box") return DomainGrid::flat_box(m, c.number("domain.side"), nodes);
    if (model == "flat_torus") return DomainGrid::flat_torus(m, nodes);
    if (model == "round_sphere")
        return DomainGrid::round_sphere(m, c.number_or("domain.radius", 1.0), nodes,
                                        int(c.integer_or("domain.margin_layers", 2)));
    if (model == "rotational_pole")
        return DomainGrid::rotational_pole(m, profile_from_config(c, "domain"),
                                           c.number("domain.r_max"), nodes);
    throw Error("config field domain.model: unknown model '" + model + "'");
}

inline std::shared_ptr<EmbeddedTarget> target_from_config(const Config& c) {
    const std::string kind = c.str("target.kind");
    if (kind == "euclidean")
        return std::make_shared<EuclideanTarget>(int(c.integer("target.q")));
    if (kind == "sphere")
        return std::make_shared<SphereTarget>(int(c.integer("target.n")),
                                              c.number_or("target.radius", 1.0));
    if (kind == "ellipsoid") {
        const auto axes = c.numbers("target.axes");
        Vec a(int(axes.size()));
        for (std::size_t i = 0; i < axes.size(); ++i) a[int(i)] = axes[i];
        return std::make_shared<EllipsoidTarget>(a);
    }
    throw Error("config field target.kind: unknown target '" + kind + "'");
}

}  // namespace phi3
