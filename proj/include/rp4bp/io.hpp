#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace rp4bp {

inline constexpr const char* kCodeVersion = "rp4bp 0.1.0";

/// FNV-1a over a canonical string; used to content-address outputs.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string config_hash(const nlohmann::json& j) { return fnv1a_hex(j.dump()); }

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// CSV with '#'-prefixed metadata lines before the header, t first column.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns,
              const std::vector<std::pair<std::string, std::string>>& metadata)
        : out_(path) {
        if (!out_) throw std::runtime_error("cannot open " + path);
        for (const auto& [k, v] : metadata) out_ << "# " << k << ": " << v << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
    }
    void row(const std::vector<double>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i) out_ << (i ? "," : "") << format_g17(vals[i]);
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << j.dump(1) << "\n";
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

}  // namespace rp4bp
