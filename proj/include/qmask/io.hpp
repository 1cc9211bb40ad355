#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "checks.hpp"
#include "decoupling.hpp"
#include "harness.hpp"
#include "regions.hpp"
#include "version.hpp"

namespace qmask::io {

using json = nlohmann::ordered_json;

// 12 significant digits, C locale.
inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x == 0.0 ? 0.0 : x);
    return buf;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline std::string join_numbers(const std::vector<double>& xs, const std::string& sep = " ") {
    std::vector<std::string> parts;
    for (double x : xs) parts.push_back(fmt(x));
    return join(parts, sep);
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void comment(const std::string& line) { comments_.push_back(line); }

    void row(std::vector<std::string> cells) {
        if (cells.size() != columns_.size()) throw std::logic_error("CSV row width mismatch");
        rows_.push_back(std::move(cells));
    }

    std::string str() const {
        std::ostringstream os;
        for (const auto& c : comments_) os << "# " << c << '\n';
        write_line(os, columns_);
        for (const auto& r : rows_) write_line(os, r);
        return os.str();
    }

    std::size_t size() const { return rows_.size(); }

private:
    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + '"';
    }
    static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << escape(cells[i]);
        os << '\n';
    }

    std::vector<std::string> columns_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> rows_;
};

// ---------------------------------------------------------------------------
// JSON <-> numbers

inline json number(double x) {
    if (std::isfinite(x)) return x;
    return fmt(x);
}

inline json complex_to_json(cplx z) {
    if (z.imag() == 0.0) return z.real();
    return json::array({z.real(), z.imag()});
}

inline json matrix_to_json(const ComplexMatrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(complex_to_json(m(i, j)));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline json shape_to_json(const SubsystemShape& s) { return {{"labels", s.labels}, {"dims", s.dims}}; }

inline json entropies_to_json(const RegionEntropies& e) {
    return {{"H_A_given_EC", number(e.H_A_given_EC)}, {"Icoh", number(e.Icoh)},
            {"I_AB", number(e.I_AB)},                 {"I_A_EC", number(e.I_A_EC)},
            {"I_C_AB", number(e.I_C_AB)},             {"H_C", number(e.H_C)},
            {"H_A_given_CK", number(e.H_A_given_CK)}};
}

inline json point_to_json(const RateLeakagePoint& p) {
    json params = json::array();
    for (double x : p.params) params.push_back(number(x));
    return {{"kind", p.kind},
            {"rate", number(p.rate)},
            {"leakage", number(p.leakage)},
            {"R_e", p.re ? number(*p.re) : json(nullptr)},
            {"entropies", entropies_to_json(p.entropies)},
            {"family", p.family},
            {"params", std::move(params)},
            {"flag", p.flag}};
}

inline json report_to_json(const CodeReport& r) {
    json msgs = json::array();
    for (const auto& m : r.messages)
        msgs.push_back({{"name", m.name},
                        {"error", number(m.error)},
                        {"leakage", number(m.leakage)},
                        {"fidelity_distance", number(m.fidelity_distance)}});
    return {{"error", number(r.error)},     {"leakage", number(r.leakage)},
            {"Q", number(r.Q)},             {"R_e", number(r.R_e)},
            {"n", r.n},                     {"leakage_ceiling", number(r.leakage_ceiling)},
            {"label", r.label},             {"messages", std::move(msgs)}};
}

inline json decoupling_to_json(const DecouplingReport& r) {
    json rows = json::array();
    for (const auto& x : r.rows)
        rows.push_back({{"n", x.n},
                        {"samples", x.samples},
                        {"mean", number(x.mean)},
                        {"stderr", number(x.stderr_)},
                        {"mean_g", number(x.mean_g)},
                        {"stderr_g", number(x.stderr_g)},
                        {"bound", number(x.bound)},
                        {"bound_g", number(x.bound_g)},
                        {"bound_eps_slope", number(x.bound_eps_slope)},
                        {"vacuous", x.vacuous},
                        {"vacuous_g", x.vacuous_g},
                        {"pass", x.pass},
                        {"pass_g", x.pass_g}});
    return {{"h_a_given_k", number(r.h_a_given_k)},
            {"epsilon", number(r.epsilon)},
            {"t_tp_residual", number(r.t_tp_residual)},
            {"dim_s", r.dim_s},
            {"dim_g", r.dim_g},
            {"rows", std::move(rows)}};
}

inline json trial_to_json(const TrialSummary& s) {
    return {{"name", s.name},        {"trials", s.trials}, {"worst", number(s.worst)},
            {"tolerance", number(s.tolerance)}, {"pass", s.pass},     {"note", s.note}};
}

// Region CSV columns shared by the CLI and tests.
inline CsvTable region_table() {
    return CsvTable({"family", "params", "Q_or_R", "L", "R_e", "H_A_given_EC", "Icoh", "I_C_AB", "flag"});
}

inline void region_row(CsvTable& t, const RateLeakagePoint& p) {
    t.row({p.family, join_numbers(p.params), fmt(p.rate), fmt(p.leakage), p.re ? fmt(*p.re) : "",
           fmt(p.entropies.H_A_given_EC), fmt(p.entropies.Icoh), fmt(p.entropies.I_C_AB), p.flag});
}

inline std::string header_line(const std::string& command, std::optional<std::uint64_t> seed,
                               const std::string& extra = "") {
    std::string s = std::string("qmask ") + kVersion + " command=" + command +
                    " seed=" + (seed ? std::to_string(*seed) : std::string("none"));
    if (!extra.empty()) s += " " + extra;
    return s;
}

}  // namespace qmask::io
