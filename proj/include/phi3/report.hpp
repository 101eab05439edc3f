#pragma once

#include "phi3/common.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

namespace phi3 {

using Json = nlohmann::ordered_json;

// All floating-point output carries 17 significant digits so reports are
// reproducible inputs for downstream comparison.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Serialize with doubles rendered through format_double.
inline std::string json_to_string(const Json& j) {
    Json copy = j;
    std::function<void(Json&)> walk = [&](Json& node) {
        if (node.is_number_float()) {
            node = format_double(node.get<double>());
        } else if (node.is_object() || node.is_array()) {
            for (auto& item : node) walk(item);
        }
    };
    walk(copy);
    return copy.dump(2);
}

inline void write_json_file(const std::string& path, const Json& j) {
    std::ofstream os(path);
    require(os.good(), "cannot write " + path);
    os << json_to_string(j) << "\n";
}

// Headered CSV with 17-digit floats.
class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(const std::vector<double>& row) {
        require(row.size() == header_.size(), "csv row width mismatch");
        rows_.push_back(row);
    }

    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < header_.size(); ++i) {
            out += header_[i];
            out += (i + 1 < header_.size()) ? ',' : '\n';
        }
        for (const auto& row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                out += format_double(row[i]);
                out += (i + 1 < row.size()) ? ',' : '\n';
            }
        }
        return out;
    }

    void write_file(const std::string& path) const {
        std::ofstream os(path);
        require(os.good(), "cannot write " + path);
        os << str();
    }

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

inline void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, "cannot create output directory: " + dir);
}

}  // namespace phi3
