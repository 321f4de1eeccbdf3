#pragma once
/**
 * Text serialization. Numbers are written in the shortest form that parses
 * back to the same double, so a write/read cycle is lossless.
 *
 * Field file layout:
 *
 *   GTWFIELD 1
 *   metadata {...one-line JSON...}
 *   components rho u
 *   extras residual
 *   nx 201
 *   nt 101
 *   columns x t rho u residual
 *   <nx * nt rows, t-major, x fastest>
 *   end
 */

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gtw/field.hpp"

namespace gtw::io {

inline constexpr const char* field_magic = "GTWFIELD";
inline constexpr int field_version = 1;

inline std::string format(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
    if (s == "nan") {
        out = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    if (s == "inf" || s == "-inf") {
        out = s[0] == '-' ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        return true;
    }
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

inline void write_field(std::ostream& os, const GridField& g) {
    g.validate();
    os << field_magic << ' ' << field_version << '\n';
    os << "metadata " << g.metadata.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    os << "components";
    for (const auto& c : g.components) os << ' ' << c;
    os << "\nextras";
    for (const auto& [name, col] : g.extras) os << ' ' << name;
    os << "\nnx " << g.nx() << "\nnt " << g.nt() << "\ncolumns x t";
    for (const auto& c : g.components) os << ' ' << c;
    for (const auto& [name, col] : g.extras) os << ' ' << name;
    os << '\n';
    for (std::size_t j = 0; j < g.nt(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            os << format(g.x[i]) << ' ' << format(g.t[j]);
            for (std::size_t k = 0; k < g.ncomp(); ++k) os << ' ' << format(g.values[g.point(i, j) * g.ncomp() + k]);
            for (const auto& [name, col] : g.extras) os << ' ' << format(col[g.point(i, j)]);
            os << '\n';
        }
    os << "end\n";
}

inline void write_field(const std::string& path, const GridField& g) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open '" + path + "' for writing");
    write_field(f, g);
}

inline GridField read_field(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&](const char* expect) -> std::string {
        if (!std::getline(is, line)) throw ParseError(lineno + 1, std::string("unexpected end of file, expected ") + expect);
        ++lineno;
        return line;
    };
    auto keyword = [&](const char* key) {
        const std::string l = next(key);
        const auto views = split_ws(l);
        if (views.empty() || views[0] != key) throw ParseError(lineno, std::string("expected '") + key + "'");
        return std::vector<std::string>(views.begin(), views.end());
    };
    auto count = [&](const char* key) {
        const auto toks = keyword(key);
        std::size_t v = 0;
        if (toks.size() != 2 || std::from_chars(toks[1].data(), toks[1].data() + toks[1].size(), v).ec != std::errc() ||
            toks[1].find_first_not_of("0123456789") != std::string::npos)
            throw ParseError(lineno, std::string("malformed '") + key + "' line");
        return v;
    };

    {
        const std::string l = next(field_magic);
        const auto toks = split_ws(l);
        if (toks.size() != 2 || toks[0] != field_magic) throw ParseError(lineno, "not a field file (missing magic)");
        if (toks[1] != std::to_string(field_version))
            throw ParseError(lineno, "unsupported field format version " + std::string(toks[1]));
    }
    GridField g;
    {
        const std::string l = next("metadata");
        if (l.rfind("metadata ", 0) != 0) throw ParseError(lineno, "expected 'metadata'");
        try {
            g.metadata = json::parse(l.substr(9));
        } catch (const json::parse_error& e) {
            throw ParseError(lineno, std::string("metadata is not valid JSON: ") + e.what());
        }
    }
    for (auto tok : keyword("components")) g.components.emplace_back(tok);
    g.components.erase(g.components.begin());
    std::vector<std::string> extras;
    for (auto tok : keyword("extras")) extras.emplace_back(tok);
    extras.erase(extras.begin());
    if (g.components.empty()) throw ParseError(lineno - 1, "no components declared");
    const std::size_t nx = count("nx"), nt = count("nt");
    if (nx == 0 || nt == 0) throw ParseError(lineno, "empty grid");
    const auto cols = keyword("columns");
    const std::size_t ncol = 2 + g.components.size() + extras.size();
    if (cols.size() != ncol + 1) throw ParseError(lineno, "column list does not match components and extras");

    g.x.assign(nx, 0.0);
    g.t.assign(nt, 0.0);
    g.values.assign(nx * nt * g.components.size(), 0.0);
    for (const auto& e : extras) g.extras[e].assign(nx * nt, 0.0);
    std::vector<double> row(ncol);
    for (std::size_t j = 0; j < nt; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const std::string l = next("data row");
            const auto toks = split_ws(l);
            if (toks.size() != ncol)
                throw ParseError(lineno, "expected " + std::to_string(ncol) + " values, found " + std::to_string(toks.size()));
            for (std::size_t c = 0; c < ncol; ++c)
                if (!parse_double(toks[c], row[c])) throw ParseError(lineno, "malformed number '" + std::string(toks[c]) + "'");
            if (j == 0) g.x[i] = row[0];
            if (i == 0) g.t[j] = row[1];
            if (row[0] != g.x[i] || row[1] != g.t[j]) throw ParseError(lineno, "row is not on the tensor grid");
            for (std::size_t k = 0; k < g.components.size(); ++k) g.values[g.point(i, j) * g.ncomp() + k] = row[2 + k];
            for (std::size_t e = 0; e < extras.size(); ++e) g.extras[extras[e]][g.point(i, j)] = row[2 + g.ncomp() + e];
        }
    const std::string last = next("'end'");
    if (split_ws(last) != std::vector<std::string_view>{"end"}) throw ParseError(lineno, "expected 'end'");
    try {
        g.validate();
    } catch (const DomainError& e) {
        throw ParseError(lineno, e.what());
    }
    return g;
}

inline GridField read_field(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open field file '" + path + "'");
    return read_field(f);
}

/** Plain CSV: a header line, then one row per entry. */
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void row(const std::vector<double>& values) {
        if (values.size() != header_.size()) throw ConfigError("CSV row width does not match header");
        rows_.push_back(values);
    }

    std::size_t size() const { return rows_.size(); }

    void write(std::ostream& os) const {
        for (std::size_t c = 0; c < header_.size(); ++c) os << (c ? "," : "") << header_[c];
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << format(r[c]);
            os << '\n';
        }
    }

    void write(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot open '" + path + "' for writing");
        write(f);
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

inline void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open '" + path + "' for writing");
    f << j.dump(2) << '\n';
}

}  // namespace gtw::io
