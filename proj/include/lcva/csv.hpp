#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lcva/dataset.hpp"
#include "lcva/errors.hpp"

namespace lcva {

// Shortest round-trip decimal form; parsing it back recovers the exact double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
    const char* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, out);
    return res.ec == std::errc{} && res.ptr == end;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            cells.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return cells;
}

inline std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t line_no,
                                    const std::string& msg) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + msg);
}

}  // namespace detail

// Expectations the caller can impose on a units file. Column layout itself
// (presence of y_cf / rand, feature count) is detected from the header:
//   id,t,y[,y_cf][,rand],f0..f{d-1}
struct UnitsCsvSchema {
    std::optional<std::size_t> expect_feature_dim;
    bool require_counterfactual = false;
};

inline std::vector<UnitRecord> load_units_csv(const std::string& path,
                                              const UnitsCsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open units file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: missing header");
    line = detail::strip_cr(line);
    auto header = detail::split_csv_line(line);

    std::size_t col = 0;
    auto expect = [&](std::string_view name) {
        if (col >= header.size() || header[col] != name) {
            detail::parse_fail(path, 1, "expected column '" + std::string(name) + "' at position " +
                                            std::to_string(col));
        }
        ++col;
    };
    expect("id");
    expect("t");
    expect("y");
    bool has_cf = false;
    bool has_rand = false;
    if (col < header.size() && header[col] == "y_cf") {
        has_cf = true;
        ++col;
    }
    if (col < header.size() && header[col] == "rand") {
        has_rand = true;
        ++col;
    }
    const std::size_t feature_dim = header.size() - col;
    for (std::size_t j = 0; j < feature_dim; ++j) {
        expect("f" + std::to_string(j));
    }
    if (schema.expect_feature_dim && feature_dim != *schema.expect_feature_dim) {
        detail::parse_fail(path, 1,
                           "expected " + std::to_string(*schema.expect_feature_dim) +
                               " feature columns, found " + std::to_string(feature_dim));
    }
    if (schema.require_counterfactual && !has_cf) {
        detail::parse_fail(path, 1, "schema requires a y_cf column");
    }

    std::vector<UnitRecord> units;
    std::unordered_map<std::string, std::size_t> seen_ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            detail::parse_fail(path, line_no,
                               "expected " + std::to_string(header.size()) + " cells, found " +
                                   std::to_string(cells.size()));
        }
        UnitRecord u;
        std::size_t c = 0;
        u.id = std::string(cells[c++]);
        if (u.id.empty()) detail::parse_fail(path, line_no, "empty id");
        if (auto [it, inserted] = seen_ids.emplace(u.id, line_no); !inserted) {
            detail::parse_fail(path, line_no,
                               "duplicate id '" + u.id + "' (first seen at line " +
                                   std::to_string(it->second) + ")");
        }
        if (cells[c] == "0") {
            u.treatment = 0;
        } else if (cells[c] == "1") {
            u.treatment = 1;
        } else {
            detail::parse_fail(path, line_no, "treatment must be 0 or 1");
        }
        ++c;
        if (!parse_double(cells[c], u.outcome)) {
            detail::parse_fail(path, line_no, "non-numeric outcome '" + std::string(cells[c]) + "'");
        }
        ++c;
        if (has_cf) {
            if (!cells[c].empty()) {
                double y_cf = 0.0;
                if (!parse_double(cells[c], y_cf)) {
                    detail::parse_fail(path, line_no, "non-numeric y_cf");
                }
                u.counterfactual_outcome = y_cf;
            }
            ++c;
        }
        if (has_rand) {
            if (cells[c] == "0") {
                u.randomized_subset = false;
            } else if (cells[c] == "1") {
                u.randomized_subset = true;
            } else {
                detail::parse_fail(path, line_no, "rand flag must be 0 or 1");
            }
            ++c;
        }
        u.covariates.resize(feature_dim);
        for (std::size_t j = 0; j < feature_dim; ++j, ++c) {
            if (!parse_double(cells[c], u.covariates[j]) || !std::isfinite(u.covariates[j])) {
                detail::parse_fail(path, line_no, "non-numeric feature f" + std::to_string(j));
            }
        }
        units.push_back(std::move(u));
    }
    return units;
}

inline void save_units_csv(const std::string& path, const std::vector<UnitRecord>& units,
                           std::size_t feature_dim) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write units file: " + path);

    bool any_cf = false;
    bool any_rand = false;
    for (const auto& u : units) {
        any_cf = any_cf || u.counterfactual_outcome.has_value();
        any_rand = any_rand || u.randomized_subset;
    }
    out << "id,t,y";
    if (any_cf) out << ",y_cf";
    if (any_rand) out << ",rand";
    for (std::size_t j = 0; j < feature_dim; ++j) out << ",f" << j;
    out << "\n";
    for (const auto& u : units) {
        out << u.id << ',' << u.treatment << ',' << format_double(u.outcome);
        if (any_cf) {
            out << ',';
            if (u.counterfactual_outcome) out << format_double(*u.counterfactual_outcome);
        }
        if (any_rand) out << ',' << (u.randomized_subset ? 1 : 0);
        for (std::size_t j = 0; j < feature_dim; ++j) out << ',' << format_double(u.covariates[j]);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

// Pairs file: header `ego_id,peer_id`, one directed pair per row.
inline std::vector<PairSample> load_pairs_csv(const std::string& path,
                                              const std::vector<UnitRecord>& units) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pairs file: " + path);

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < units.size(); ++i) index.emplace(units[i].id, i);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: missing header");
    if (detail::strip_cr(line) != "ego_id,peer_id") {
        detail::parse_fail(path, 1, "expected header 'ego_id,peer_id'");
    }
    std::vector<PairSample> pairs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 2) detail::parse_fail(path, line_no, "expected 2 cells");
        auto lookup = [&](std::string_view id) {
            auto it = index.find(std::string(id));
            if (it == index.end()) {
                detail::parse_fail(path, line_no, "unknown unit id '" + std::string(id) + "'");
            }
            return it->second;
        };
        PairSample p{lookup(cells[0]), lookup(cells[1])};
        if (p.ego == p.peer) detail::parse_fail(path, line_no, "self-pair");
        pairs.push_back(p);
    }
    return pairs;
}

inline void save_pairs_csv(const std::string& path, const std::vector<UnitRecord>& units,
                           const std::vector<PairSample>& pairs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write pairs file: " + path);
    out << "ego_id,peer_id\n";
    for (const auto& p : pairs) {
        out << units[p.ego].id << ',' << units[p.peer].id << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

// FNV-1a 64-bit content hash used for provenance manifests.
inline std::string file_fnv1a64(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash file: " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return "fnv1a64:" + os.str();
}

}  // namespace lcva
