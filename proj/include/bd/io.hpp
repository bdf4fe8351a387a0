#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bd/errors.hpp"
#include "bd/util.hpp"

namespace bd {

using json = nlohmann::json;

// %.17g round-trips doubles and is locale-independent under the "C" locale.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Write-temp-then-rename so concurrent readers never see a partial report.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot open " + tmp.string() + " for writing");
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

inline void save_json(const std::filesystem::path& path, const json& j) {
    atomic_write(path, j.dump(2) + "\n");
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) {
        append_row(header);
    }

    void append_row(const std::vector<std::string>& cells) {
        if (cells.size() != cols_) throw ValidationError("CSV row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) body_ += ',';
            body_ += cells[i];
        }
        body_ += "\r\n";
    }

    void append_row(const std::vector<double>& cells) {
        std::vector<std::string> s;
        s.reserve(cells.size());
        for (double v : cells) s.push_back(format_double(v));
        append_row(s);
    }

    void save(const std::filesystem::path& path) const { atomic_write(path, body_); }

private:
    std::size_t cols_;
    std::string body_;
};

// Content hash of the resolved configuration (stable key order via nlohmann's
// sorted maps); the output directory itself is excluded by the caller.
inline std::string config_hash(const json& resolved) { return hex64(fnv1a64(resolved.dump())); }

}  // namespace bd
