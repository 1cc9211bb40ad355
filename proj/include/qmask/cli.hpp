#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "io.hpp"

namespace qmask::cli {

using io::json;

enum ExitCode : int { kOk = 0, kInternal = 1, kValidation = 2, kDimension = 3, kNumerical = 4 };

class FieldError : public ConfigError {
public:
    FieldError(std::string field, const std::string& msg) : ConfigError(field + ": " + msg), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Parsed JSON stores positive integers as unsigned; literals built in code are signed.
inline bool is_count(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Reads one JSON object, recording every value (defaults included) and
// rejecting keys that were never read.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw FieldError(path_.empty() ? "manifest" : path_, "expected an object");
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }
    const json& resolved() const { return resolved_; }

    const json& raw(const std::string& key) {
        if (!has(key)) throw FieldError(child(key), "required field is missing");
        used_.insert(key);
        return j_.at(key);
    }

    double num(const std::string& key, double lo, double hi, std::optional<double> def = std::nullopt) {
        if (!has(key)) {
            if (!def) throw FieldError(child(key), "required field is missing");
            resolved_[key] = *def;
            return *def;
        }
        const json& v = raw(key);
        if (!v.is_number()) throw FieldError(child(key), "expected a number");
        const double x = v.get<double>();
        if (!(x >= lo && x <= hi)) throw FieldError(child(key), "value outside [" + io::fmt(lo) + ", " + io::fmt(hi) + "]");
        resolved_[key] = x;
        return x;
    }

    std::size_t count(const std::string& key, std::size_t lo, std::size_t hi, std::optional<std::size_t> def = std::nullopt) {
        if (!has(key)) {
            if (!def) throw FieldError(child(key), "required field is missing");
            resolved_[key] = *def;
            return *def;
        }
        const json& v = raw(key);
        if (!is_count(v)) throw FieldError(child(key), "expected a nonnegative integer");
        const auto x = v.get<std::uint64_t>();
        if (x < lo || x > hi)
            throw FieldError(child(key), "value outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        resolved_[key] = x;
        return static_cast<std::size_t>(x);
    }

    std::string str(const std::string& key, const std::vector<std::string>& allowed,
                    std::optional<std::string> def = std::nullopt) {
        std::string s;
        if (!has(key)) {
            if (!def) throw FieldError(child(key), "required field is missing");
            s = *def;
        } else {
            const json& v = raw(key);
            if (!v.is_string()) throw FieldError(child(key), "expected a string");
            s = v.get<std::string>();
        }
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end())
            throw FieldError(child(key), "'" + s + "' is not one of: " + io::join(allowed, ", "));
        resolved_[key] = s;
        return s;
    }

    bool boolean(const std::string& key, bool def) {
        if (!has(key)) {
            resolved_[key] = def;
            return def;
        }
        const json& v = raw(key);
        if (!v.is_boolean()) throw FieldError(child(key), "expected true or false");
        resolved_[key] = v.get<bool>();
        return v.get<bool>();
    }

    std::vector<double> num_list(const std::string& key, double lo, double hi,
                                 std::optional<std::vector<double>> def = std::nullopt) {
        if (!has(key)) {
            if (!def) throw FieldError(child(key), "required field is missing");
            resolved_[key] = *def;
            return *def;
        }
        const json& v = raw(key);
        if (!v.is_array()) throw FieldError(child(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string f = child(key) + "[" + std::to_string(i) + "]";
            if (!v[i].is_number()) throw FieldError(f, "expected a number");
            const double x = v[i].get<double>();
            if (!(x >= lo && x <= hi)) throw FieldError(f, "value outside [" + io::fmt(lo) + ", " + io::fmt(hi) + "]");
            out.push_back(x);
        }
        resolved_[key] = out;
        return out;
    }

    std::vector<std::size_t> count_list(const std::string& key, std::size_t lo, std::size_t hi) {
        const json& v = raw(key);
        if (!v.is_array() || v.empty()) throw FieldError(child(key), "expected a nonempty array of integers");
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string f = child(key) + "[" + std::to_string(i) + "]";
            if (!is_count(v[i])) throw FieldError(f, "expected a nonnegative integer");
            const auto x = v[i].get<std::uint64_t>();
            if (x < lo || x > hi) throw FieldError(f, "value outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
            out.push_back(static_cast<std::size_t>(x));
        }
        resolved_[key] = out;
        return out;
    }

    std::vector<std::string> str_list(const std::string& key, const std::vector<std::string>& allowed = {},
                                      std::optional<std::vector<std::string>> def = std::nullopt) {
        if (!has(key)) {
            if (!def) throw FieldError(child(key), "required field is missing");
            resolved_[key] = *def;
            return *def;
        }
        const json& v = raw(key);
        if (!v.is_array()) throw FieldError(child(key), "expected an array of strings");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string f = child(key) + "[" + std::to_string(i) + "]";
            if (!v[i].is_string()) throw FieldError(f, "expected a string");
            std::string s = v[i].get<std::string>();
            if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end())
                throw FieldError(f, "'" + s + "' is not one of: " + io::join(allowed, ", "));
            out.push_back(std::move(s));
        }
        resolved_[key] = out;
        return out;
    }

    // Record a nested object that was read by another reader.
    void adopt(const std::string& key, const ObjectReader& sub) {
        used_.insert(key);
        resolved_[key] = sub.resolved();
    }
    void record(const std::string& key, json value) {
        used_.insert(key);
        resolved_[key] = std::move(value);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw FieldError(child(it.key()), "unknown field");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
    json resolved_ = json::object();
};

// ---------------------------------------------------------------------------
// JSON -> library objects

inline cplx parse_complex(const json& v, const std::string& field) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    throw FieldError(field, "expected a number or a [re, im] pair");
}

inline ComplexMatrix parse_matrix(const json& v, const std::string& field, std::size_t rows, std::size_t cols) {
    if (!v.is_array() || v.size() != rows) throw FieldError(field, "expected " + std::to_string(rows) + " rows");
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const std::string fr = field + "[" + std::to_string(i) + "]";
        if (!v[i].is_array() || v[i].size() != cols) throw FieldError(fr, "expected " + std::to_string(cols) + " entries");
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = parse_complex(v[i][j], fr + "[" + std::to_string(j) + "]");
    }
    return m;
}

inline std::vector<cplx> parse_vector(const json& v, const std::string& field, std::size_t size) {
    if (!v.is_array() || v.size() != size) throw FieldError(field, "expected " + std::to_string(size) + " entries");
    std::vector<cplx> out;
    for (std::size_t i = 0; i < size; ++i) out.push_back(parse_complex(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

inline SubsystemShape parse_shape(ObjectReader& r, const std::string& key) {
    ObjectReader s(r.raw(key), r.child(key));
    const json& labels = s.raw("labels");
    if (!labels.is_array()) throw FieldError(s.child("labels"), "expected an array of strings");
    Labels l;
    for (const auto& x : labels) {
        if (!x.is_string()) throw FieldError(s.child("labels"), "expected an array of strings");
        l.push_back(x.get<std::string>());
    }
    s.record("labels", l);
    const auto dims = s.count_list("dims", 1, dim_cap());
    s.finish();
    r.adopt(key, s);
    try {
        SubsystemShape shape(l, dims);
        shape.validate();
        return shape;
    } catch (const ValidationError& e) {
        throw FieldError(r.child(key), e.what());
    }
}

inline KrausChannel parse_kraus(ObjectReader& r, const std::string& key) {
    ObjectReader c(r.raw(key), r.child(key));
    const SubsystemShape in = parse_shape(c, "in");
    const SubsystemShape out = parse_shape(c, "out");
    const json& ops = c.raw("kraus");
    if (!ops.is_array() || ops.empty()) throw FieldError(c.child("kraus"), "expected a nonempty array of matrices");
    std::vector<ComplexMatrix> mats;
    for (std::size_t i = 0; i < ops.size(); ++i)
        mats.push_back(parse_matrix(ops[i], c.child("kraus") + "[" + std::to_string(i) + "]", out.total(), in.total()));
    c.record("kraus", ops);
    c.finish();
    r.adopt(key, c);
    try {
        return KrausChannel(std::move(mats), in, out);
    } catch (const ValidationError& e) {
        throw FieldError(r.child(key), e.what());
    }
}

struct InstanceInfo {
    std::string kind;
    MaskingInstance instance;
    std::optional<HadamardSpec> hadamard;
};

inline const std::vector<std::string>& instance_kinds() {
    static const std::vector<std::string> k{"dephasing", "erasure", "qubit-dephasing", "hadamard-dephasing",
                                            "hadamard-random", "kraus"};
    return k;
}

inline InstanceInfo parse_instance(ObjectReader& top, std::optional<std::uint64_t> seed) {
    ObjectReader r(top.raw("instance"), "instance");
    InstanceInfo info;
    info.kind = r.str("channel", instance_kinds());
    auto with_dilation = [](ChannelWithState cws) {
        IsometricDilation dil = stinespring(cws.channel);
        return MaskingInstance(std::move(cws), std::move(dil));
    };
    if (info.kind == "dephasing") {
        DephasingSpec spec{r.num("q", 0, 1), r.num("eps0", 0, 1), r.num("eps1", 0, 1)};
        info.instance = with_dilation(dephasing_channel(spec));
    } else if (info.kind == "erasure") {
        info.instance = with_dilation(without_state(erasure_channel(r.num("eps", 0, 1))));
    } else if (info.kind == "qubit-dephasing") {
        info.instance = with_dilation(without_state(dephasing_qubit(r.num("eps", 0, 1))));
    } else if (info.kind == "hadamard-dephasing") {
        info.hadamard = dephasing_hadamard_spec(r.num("eps", 0, 1));
    } else if (info.kind == "hadamard-random") {
        if (!seed) throw FieldError("seed", "hadamard-random instances need a seed");
        ObjectReader d(r.raw("dims"), r.child("dims"));
        const std::size_t de = d.count("E", 1, 8), dap = d.count("A'", 1, 8), dc1 = d.count("C1", 1, 8),
                          dk = d.count("K", 1, 8), db = d.count("B", 1, 64);
        d.finish();
        r.adopt("dims", d);
        if (db < de * dap) throw FieldError(r.child("dims.B"), "dim B must be at least dim E * dim A'");
        Rng rng(mix_seed(*seed, 0x4AD));
        info.hadamard = random_hadamard_spec(de, dap, dc1, dk, db, rng);
    } else {
        const KrausChannel ch = parse_kraus(r, "kraus");
        const auto& in = ch.in_shape();
        if (in.labels != Labels{lbl::E, lbl::Ap} || ch.out_shape().labels != Labels{lbl::B})
            throw FieldError(r.child("kraus"), "channel must map (E, A') -> B");
        const std::size_t de = in.dim(lbl::E);
        std::vector<double> q = r.num_list("q", 0, 1, std::vector<double>(de, 1.0 / static_cast<double>(de)));
        if (q.size() != de) throw FieldError(r.child("q"), "needs one probability per value of E");
        try {
            info.instance = with_dilation({ch, maximally_correlated(q)});
        } catch (const ValidationError& e) {
            throw FieldError(r.child("q"), e.what());
        }
    }
    if (info.hadamard) {
        const HadamardChannel h = hadamard_channel(*info.hadamard);
        info.instance = MaskingInstance(h.channel, default_triple_for(*info.hadamard), h.dilation);
    }
    if (r.boolean("lift", false)) info.instance = lift_instance(info.instance);
    r.finish();
    top.adopt("instance", r);
    return info;
}

// ---------------------------------------------------------------------------
// Commands

struct Artifacts {
    io::CsvTable csv{{}};
    json result = json::object();
};

struct CommandContext {
    ObjectReader& top;
    std::optional<std::uint64_t> seed;
    std::string command;
};

inline std::uint64_t require_seed(const CommandContext& ctx) {
    if (!ctx.seed) throw FieldError("seed", "seed is mandatory for the '" + ctx.command + "' command");
    return *ctx.seed;
}

inline DensityOperator parse_state(ObjectReader& top) {
    ObjectReader r(top.raw("instance"), "instance");
    const std::string kind = r.str("state", {"maximally-entangled", "product-mixed", "matrix"});
    DensityOperator rho;
    if (kind == "maximally-entangled") {
        rho = maximally_entangled(r.count("dim", 1, 64)).density();
    } else if (kind == "product-mixed") {
        const std::size_t da = r.count("dim_a", 1, 64), db = r.count("dim_b", 1, 64);
        rho = DensityOperator::maximally_mixed(SubsystemShape({lbl::A, lbl::B}, {da, db}));
    } else {
        const SubsystemShape shape = parse_shape(r, "shape");
        const ComplexMatrix m = parse_matrix(r.raw("matrix"), r.child("matrix"), shape.total(), shape.total());
        r.record("matrix", io::matrix_to_json(m));
        try {
            rho = DensityOperator::checked(m, shape);
        } catch (const ValidationError& e) {
            throw FieldError(r.child("matrix"), e.what());
        }
    }
    r.finish();
    top.adopt("instance", r);
    return rho;
}

inline Artifacts run_entropy(CommandContext& ctx, ObjectReader& p) {
    const DensityOperator rho = parse_state(ctx.top);
    const std::string quantity = p.str("quantity", {"entropy", "conditional", "mutual", "coherent", "min-entropy"});
    auto group = [&](const std::string& key, bool required) {
        const auto g = required ? p.str_list(key) : p.str_list(key, {}, std::vector<std::string>{});
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!rho.shape().contains(g[i]))
                throw FieldError(p.child(key) + "[" + std::to_string(i) + "]", "'" + g[i] + "' is not a subsystem");
        return g;
    };
    const Labels a = group("a", true);
    const bool two = quantity != "entropy";
    const Labels b = group("b", two);
    const Labels c = group("c", false);
    double value = 0;
    std::string label = "exact";
    json extra = json::object();
    if (quantity == "entropy") {
        value = entropy(rho, a);
    } else if (quantity == "conditional") {
        value = conditional_entropy(rho, a, b);
    } else if (quantity == "mutual") {
        value = mutual_information(rho, a, b, c);
    } else if (quantity == "coherent") {
        value = coherent_information(rho, a, b);
    } else {
        MinEntropyOptions o;
        o.seed = require_seed(ctx);
        o.restarts = p.count("restarts", 1, 256, 8);
        Labels ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        const MinEntropyResult r = min_entropy(rho.reduce(ab), b, o);
        value = r.value;
        label = r.label;
        extra = {{"lower_bracket", io::number(r.lower_bracket)}, {"upper_bracket", io::number(r.upper_bracket)}};
    }
    Artifacts out;
    out.csv = io::CsvTable({"quantity", "a", "b", "c", "value", "label"});
    out.csv.row({quantity, io::join(a, " "), io::join(b, " "), io::join(c, " "), io::fmt(value), label});
    out.result = {{"quantity", quantity}, {"value", io::number(value)}, {"label", label}};
    if (!extra.empty()) out.result["brackets"] = extra;
    return out;
}

inline Artifacts run_dephasing(CommandContext&, ObjectReader& p) {
    DephasingSpec spec{p.num("q", 0, 1), p.num("eps0", 0, 1), p.num("eps1", 0, 1)};
    std::vector<double> grid = p.num_list("lambda_grid", 0, 1);
    if (grid.empty()) throw FieldError(p.child("lambda_grid"), "needs at least one value");
    const DephasingClosedForm cf = dephasing_closed_form(spec, grid);
    const MaskingInstance inst(dephasing_channel(spec));
    Artifacts out;
    out.csv = io::CsvTable({"frontier", "lambda", "rate", "leakage", "candidate_rate", "candidate_leakage"});
    json rows = json::array();
    double worst = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto r0 = eval_ea_point(inst, dephasing_r0_candidate(spec, grid[i]), true);
        const auto r1 = eval_ea_point(inst, dephasing_r1_candidate(spec, grid[i]), true);
        const auto rq = eval_unassisted_inner(inst, dephasing_r1_candidate(spec, grid[i]));
        const std::pair<const ClosedFormRow*, const RateLeakagePoint*> items[] = {
            {&cf.r0[i], &r0}, {&cf.r1[i], &r1}, {&cf.quantum[i], &rq}};
        const char* names[] = {"R0", "R1", "Q"};
        for (std::size_t k = 0; k < 3; ++k) {
            const auto& [row, pt] = items[k];
            out.csv.row({names[k], io::fmt(row->lambda), io::fmt(row->rate), io::fmt(row->leakage), io::fmt(pt->rate),
                         io::fmt(pt->leakage)});
            worst = std::max({worst, std::abs(row->rate - pt->rate), std::abs(row->leakage - pt->leakage)});
            rows.push_back({{"frontier", names[k]},
                            {"lambda", row->lambda},
                            {"rate", io::number(row->rate)},
                            {"leakage", io::number(row->leakage)}});
        }
    }
    out.result = {{"in_regime", cf.in_regime}, {"flag", cf.flag}, {"max_candidate_deviation", io::number(worst)},
                  {"rows", std::move(rows)}};
    if (!cf.flag.empty()) out.csv.comment("flag: " + cf.flag);
    return out;
}

inline RegionObjective parse_objective(const std::string& s) {
    if (s == "ea") return RegionObjective::ea_quantum;
    if (s == "ea-classical") return RegionObjective::ea_classical;
    if (s == "unassisted-inner") return RegionObjective::unassisted_inner;
    return RegionObjective::hadamard_outer;
}

inline CandidateFamily parse_family(const std::string& s) {
    if (s == "controlled") return CandidateFamily::controlled;
    if (s == "product") return CandidateFamily::product;
    return CandidateFamily::free;
}

inline Artifacts run_region(CommandContext& ctx, ObjectReader& p) {
    const std::uint64_t seed = require_seed(ctx);
    const InstanceInfo info = parse_instance(ctx.top, seed);
    OptimizeRequest req;
    req.objective = parse_objective(p.str("objective", {"ea", "ea-classical", "unassisted-inner", "hadamard-outer"}));
    req.family = parse_family(p.str("family", {"controlled", "product", "free"}, "product"));
    req.leakage_grid = p.num_list("leakage_grid", 0, 1e6, std::vector<double>{});
    req.budget.restarts = p.count("restarts", 1, 1000, 8);
    req.budget.max_evals = p.count("max_evals", 10, 10'000'000, 6000);
    req.budget.initial_step = p.num("initial_step", 1e-6, 10, 0.25);
    req.budget.decay = p.num("decay", 0.01, 0.99, 0.5);
    req.budget.floor = p.num("floor", 1e-12, 1, 1e-4);
    req.budget.seed = seed;
    req.k = p.count("k", 1, 2, 1);
    if (p.has("dim_a")) req.budget.dim_a = p.count("dim_a", 1, 64);
    if (req.objective == RegionObjective::hadamard_outer && !info.hadamard)
        throw FieldError("parameters.objective", "hadamard-outer needs a Hadamard instance");
    const RegionFrontier fr = optimize_region(info.instance, req);
    Artifacts out;
    out.csv = io::region_table();
    out.csv.comment("label=" + fr.label + " dim_a=" + std::to_string(fr.dim_a) + " k=" + std::to_string(fr.k) +
                    " restarts=" + std::to_string(req.budget.restarts) +
                    " max_evals=" + std::to_string(req.budget.max_evals) +
                    (fr.budget_exhausted ? " budget_exhausted=1" : ""));
    json points = json::array();
    for (std::size_t i = 0; i < fr.points.size(); ++i) {
        io::region_row(out.csv, fr.points[i]);
        json pj = io::point_to_json(fr.points[i]);
        pj["level"] = io::number(fr.levels[i]);
        points.push_back(std::move(pj));
    }
    out.result = {{"label", fr.label},
                  {"dim_a", fr.dim_a},
                  {"k", fr.k},
                  {"budget_exhausted", fr.budget_exhausted},
                  {"points", std::move(points)}};
    return out;
}

inline Artifacts run_decouple(CommandContext& ctx, ObjectReader& p) {
    DecouplingConfig cfg;
    cfg.seed = require_seed(ctx);
    const std::string omega = p.str("omega", {"flat", "instance"}, "flat");
    if (omega == "flat") {
        cfg.omega = flat_omega();
    } else {
        const InstanceInfo info = parse_instance(ctx.top, cfg.seed);
        const auto& ch = info.instance.channel;
        if (info.instance.triple.has_purifier() || ch.in_shape().dim(lbl::E) != 1)
            throw FieldError("instance", "omega from an instance needs a channel without state");
        const KrausChannel plain(ch.kraus_ops(), ch.in_shape().restrict_to({lbl::Ap}), ch.out_shape());
        cfg.omega = omega_from_dilation(stinespring(plain));
    }
    cfg.dim_s = p.count("dim_s", 1, 64, 1);
    cfg.dim_g = p.count("dim_g", 1, 64, 1);
    cfg.blocklengths = p.count_list("n", 1, 8);
    cfg.samples = p.count("samples", 2, 1'000'000, 200);
    cfg.epsilon = p.num("epsilon", 0, 1, 0.0);
    const DecouplingReport rep = run_iid_decoupling(cfg);
    Artifacts out;
    out.csv = io::CsvTable({"n", "samples", "mean", "stderr", "bound", "vacuous", "pass", "mean_g", "stderr_g",
                            "bound_g", "vacuous_g", "pass_g"});
    out.csv.comment("dim_s=" + std::to_string(rep.dim_s) + " dim_g=" + std::to_string(rep.dim_g) +
                    " h_a_given_k=" + io::fmt(rep.h_a_given_k) + " epsilon=" + io::fmt(rep.epsilon));
    for (const auto& r : rep.rows)
        out.csv.row({std::to_string(r.n), std::to_string(r.samples), io::fmt(r.mean), io::fmt(r.stderr_),
                     io::fmt(r.bound), r.vacuous ? "1" : "0", r.pass ? "1" : "0", io::fmt(r.mean_g),
                     io::fmt(r.stderr_g), io::fmt(r.bound_g), r.vacuous_g ? "1" : "0", r.pass_g ? "1" : "0"});
    out.result = io::decoupling_to_json(rep);
    return out;
}

inline const std::vector<std::string>& check_names() {
    static const std::vector<std::string> k{"less-noisy", "degradable", "hadamard-L", "op-swap", "op-transfer",
                                            "min-entropy-bracket", "csiszar", "uhlmann", "uhlmann-equal-marginals",
                                            "pure-candidate-identity"};
    return k;
}

inline Artifacts run_classcheck(CommandContext& ctx, ObjectReader& p) {
    const std::uint64_t seed = require_seed(ctx);
    const auto checks = p.str_list("checks", check_names());
    if (checks.empty()) throw FieldError(p.child("checks"), "needs at least one check");
    const std::size_t trials = p.count("trials", 1, 100000, 50);
    std::optional<InstanceInfo> info;
    auto need_instance = [&](const std::string& check) -> const InstanceInfo& {
        if (!info) {
            if (!ctx.top.has("instance")) throw FieldError("instance", "check '" + check + "' needs an instance");
            info = parse_instance(ctx.top, seed);
        }
        return *info;
    };
    std::vector<TrialSummary> results;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const std::string& c = checks[i];
        const std::uint64_t s = mix_seed(seed, i);
        if (c == "less-noisy") {
            const auto& in = need_instance(c);
            if (!in.instance.dilation) throw FieldError("instance", "less-noisy needs a dilation");
            const auto rep = check_less_noisy(*in.instance.dilation, in.instance.triple, trials, s);
            TrialSummary t{c, trials, rep.worst_margin, 1e-8, rep.violations == 0,
                           "violations=" + std::to_string(rep.violations) + "; " + rep.caveat};
            results.push_back(t);
        } else if (c == "degradable" || c == "hadamard-L") {
            const auto& in = need_instance(c);
            if (!in.hadamard) throw FieldError("instance", "check '" + c + "' needs a Hadamard instance");
            results.push_back(c == "degradable" ? hadamard_degrader_trials(*in.hadamard, trials, s, c)
                                                : hadamard_L_trials(*in.hadamard, trials, s, c));
        } else if (c == "op-swap") {
            results.push_back(op_swap_trials(trials, s));
        } else if (c == "op-transfer") {
            results.push_back(op_transfer_trials(trials, s));
        } else if (c == "min-entropy-bracket") {
            results.push_back(min_entropy_bracket_trials(trials, s));
        } else if (c == "csiszar") {
            results.push_back(csiszar_trials(trials, s));
        } else if (c == "uhlmann") {
            results.push_back(uhlmann_trials(trials, s));
        } else if (c == "uhlmann-equal-marginals") {
            results.push_back(uhlmann_equal_marginal_trials(trials, s));
        } else {
            results.push_back(pure_candidate_identity_trials(trials, s));
        }
    }
    if (!info && ctx.top.has("instance")) parse_instance(ctx.top, seed);
    Artifacts out;
    out.csv = io::CsvTable({"check", "trials", "worst", "tolerance", "pass", "note"});
    json arr = json::array();
    for (const auto& r : results) {
        out.csv.row({r.name, std::to_string(r.trials), io::fmt(r.worst), io::fmt(r.tolerance), r.pass ? "1" : "0",
                     r.note});
        arr.push_back(io::trial_to_json(r));
    }
    out.result = {{"checks", std::move(arr)}};
    return out;
}

inline CodeSpec parse_custom_code(ObjectReader& p) {
    ObjectReader c(p.raw("code"), p.child("code"));
    CodeSpec code;
    code.n = c.count("n", 1, 4, 1);
    const std::size_t dg = c.count("entangled_dim", 0, 64, 0);
    if (dg > 0) code.entangled_state = maximally_entangled(dg, lbl::GA, lbl::GB);
    code.encoder = parse_kraus(c, "encoder");
    code.decoder = parse_kraus(c, "decoder");
    c.finish();
    p.adopt("code", c);
    return code;
}

inline Artifacts run_code(CommandContext& ctx, ObjectReader& p) {
    const std::uint64_t seed = require_seed(ctx);
    const std::string protocol = p.str("protocol", {"controlled-z", "superdense", "teleportation", "custom"});
    CodeReport rep;
    if (protocol == "controlled-z") {
        const InstanceInfo info = parse_instance(ctx.top, seed);
        if (info.kind != "dephasing") throw FieldError("instance.channel", "controlled-z needs a dephasing instance");
        rep = evaluate_code(info.instance, superdense_code(true), classical_messages(4));
    } else if (protocol == "superdense") {
        MaskingInstance inst(without_state(noiseless_qubit()));
        if (ctx.top.has("instance")) inst = parse_instance(ctx.top, seed).instance;
        rep = evaluate_code(inst, superdense_code(false), classical_messages(4));
    } else if (protocol == "teleportation") {
        const std::size_t count = p.count("haar_states", 0, 10000, 20);
        std::vector<NamedMessage> msgs;
        const SubsystemShape s({lbl::M}, {2});
        msgs.push_back({"zero", DensityOperator::basis_state(s, 0)});
        const double r = 1.0 / std::sqrt(2.0);
        msgs.push_back({"plus", PureState({r, r}, s).density()});
        for (std::size_t k = 0; k < count; ++k) {
            Rng rng(mix_seed(seed, k));
            msgs.push_back({"haar_" + std::to_string(k), PureState(haar_state(2, rng), s).density()});
        }
        rep = evaluate_code(MaskingInstance(without_state(two_classical_bits())), teleportation_code(), msgs);
    } else {
        const InstanceInfo info = parse_instance(ctx.top, seed);
        CodeSpec code = parse_custom_code(p);
        const std::string set = p.str("messages", {"default", "classical"}, "default");
        std::vector<NamedMessage> msgs;
        if (set == "classical") msgs = classical_messages(code.dim_m());
        try {
            rep = evaluate_code(info.instance, code, msgs, seed);
        } catch (const ValidationError& e) {
            throw FieldError("parameters.code", e.what());
        }
    }
    Artifacts out;
    out.csv = io::CsvTable({"message", "error", "leakage", "fidelity_distance"});
    out.csv.comment("label=" + rep.label + " messages=" + std::to_string(rep.messages.size()) + " n=" +
                    std::to_string(rep.n) + " Q=" + io::fmt(rep.Q) + " R_e=" + io::fmt(rep.R_e));
    for (const auto& m : rep.messages)
        out.csv.row({m.name, io::fmt(m.error), io::fmt(m.leakage), io::fmt(m.fidelity_distance)});
    out.result = io::report_to_json(rep);
    out.result["protocol"] = protocol;
    return out;
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"entropy", "region", "decouple", "dephasing", "classcheck", "code"};
    return c;
}

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  // overrides output.dir
    std::optional<std::uint64_t> seed;             // overrides the manifest seed
    std::optional<std::string> command;            // must match the manifest command
    bool write = true;
};

struct RunOutcome {
    int exit_code = kOk;
    json error;          // set on failure
    json resolved;       // manifest with defaults filled in
    std::string csv;
    json result;
    std::vector<std::filesystem::path> written;
};

inline json error_json(const std::string& kind, const std::string& type, const std::string& field,
                       const std::string& message) {
    json e = {{"error", kind}, {"type", type}, {"message", message}};
    if (!field.empty()) e["field"] = field;
    return e;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + p.string());
    f << content;
}

inline RunOutcome run_manifest_json(const json& manifest, const RunOptions& opt = {}) {
    RunOutcome out;
    try {
        ObjectReader top(manifest, "");
        const std::string command = top.str("command", commands());
        if (opt.command && *opt.command != command)
            throw FieldError("command", "manifest command '" + command + "' differs from '" + *opt.command + "'");
        if (top.has("description")) {
            if (!top.raw("description").is_string()) throw FieldError("description", "expected a string");
            top.record("description", top.raw("description"));
        }
        std::optional<std::uint64_t> seed;
        if (top.has("seed")) {
            const json& s = top.raw("seed");
            if (!is_count(s)) throw FieldError("seed", "expected an unsigned 64-bit integer");
            seed = s.get<std::uint64_t>();
        }
        if (opt.seed) seed = opt.seed;
        if (seed) top.record("seed", *seed);

        std::filesystem::path dir = "qmask-out";
        if (top.has("output")) {
            ObjectReader o(top.raw("output"), "output");
            dir = o.str("dir", {}, "qmask-out");
            o.finish();
            top.adopt("output", o);
        }
        if (opt.out_dir) dir = *opt.out_dir;

        static const json empty = json::object();
        const json& pj = top.has("parameters") ? top.raw("parameters") : empty;
        ObjectReader params(pj, "parameters");
        CommandContext ctx{top, seed, command};
        Artifacts art;
        if (command == "entropy") art = run_entropy(ctx, params);
        else if (command == "dephasing") art = run_dephasing(ctx, params);
        else if (command == "region") art = run_region(ctx, params);
        else if (command == "decouple") art = run_decouple(ctx, params);
        else if (command == "classcheck") art = run_classcheck(ctx, params);
        else art = run_code(ctx, params);
        params.finish();
        top.adopt("parameters", params);
        top.finish();

        std::string extra;
        if (params.resolved().contains("samples")) extra += "samples=" + params.resolved()["samples"].dump();
        if (params.resolved().contains("trials"))
            extra += std::string(extra.empty() ? "" : " ") + "trials=" + params.resolved()["trials"].dump();
        io::CsvTable csv = art.csv;
        std::string body = csv.str();
        const std::string head = "# " + io::header_line(command, seed, extra) + "\n";
        out.csv = head + body;
        out.result = art.result;
        out.resolved = top.resolved();
        if (opt.write) {
            std::filesystem::create_directories(dir);
            const auto csv_path = dir / (command + ".csv");
            const auto json_path = dir / (command + ".json");
            const auto man_path = dir / "manifest.resolved.json";
            write_file(csv_path, out.csv);
            json res = {{"version", kVersion}, {"command", command}, {"seed", seed ? json(*seed) : json(nullptr)},
                        {"result", out.result}};
            write_file(json_path, res.dump(2) + "\n");
            write_file(man_path, out.resolved.dump(2) + "\n");
            out.written = {csv_path, json_path, man_path};
        }
    } catch (const FieldError& e) {
        out.exit_code = kValidation;
        out.error = error_json("validation", "FieldError", e.field(), e.what());
    } catch (const ValidationError& e) {
        out.exit_code = kValidation;
        out.error = error_json("validation", "ValidationError", "", e.what());
    } catch (const DimensionLimitError& e) {
        out.exit_code = kDimension;
        out.error = error_json("dimension", "DimensionLimitError", "", e.what());
    } catch (const NumericalError& e) {
        out.exit_code = kNumerical;
        out.error = error_json("numerical", "NumericalError", "", e.what());
    } catch (const json::exception& e) {
        out.exit_code = kValidation;
        out.error = error_json("validation", "JsonError", "manifest", e.what());
    } catch (const std::exception& e) {
        out.exit_code = kInternal;
        out.error = error_json("internal", "Exception", "", e.what());
    }
    return out;
}

inline RunOutcome run_manifest_text(const std::string& text, const RunOptions& opt = {}) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        RunOutcome out;
        out.exit_code = kValidation;
        out.error = error_json("validation", "ParseError", "manifest",
                               "malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
        return out;
    }
    return run_manifest_json(j, opt);
}

// ---------------------------------------------------------------------------
// Bundled manifests, one or more per acceptance criterion.

struct CatalogEntry {
    std::string name;
    std::string criterion;
    json manifest;
};

inline std::vector<CatalogEntry> catalog() {
    std::vector<double> lambdas;
    for (int i = 0; i <= 10; ++i) lambdas.push_back(0.05 * i);
    return {
        {"dephasing-closed-form", "1",
         {{"command", "dephasing"},
          {"description", "R0/R1/quantum frontiers vs explicit candidates"},
          {"parameters", {{"q", 0.3}, {"eps0", 0.1}, {"eps1", 0.8}, {"lambda_grid", lambdas}}}}},
        {"controlled-z-code", "2",
         {{"command", "code"},
          {"seed", 1},
          {"instance", {{"channel", "dephasing"}, {"q", 0.5}, {"eps0", 0.0}, {"eps1", 1.0}}},
          {"parameters", {{"protocol", "controlled-z"}}}}},
        {"erasure-ea-capacity", "3",
         {{"command", "region"},
          {"seed", 3},
          {"instance", {{"channel", "erasure"}, {"eps", 0.25}}},
          {"parameters", {{"objective", "ea"}, {"family", "product"}}}}},
        {"erasure-unassisted-capacity", "3",
         {{"command", "region"},
          {"seed", 3},
          {"instance", {{"channel", "erasure"}, {"eps", 0.25}}},
          {"parameters", {{"objective", "unassisted-inner"}, {"family", "product"}}}}},
        {"maximally-entangled-baseline", "4",
         {{"command", "entropy"},
          {"instance", {{"state", "maximally-entangled"}, {"dim", 3}}},
          {"parameters", {{"quantity", "mutual"}, {"a", {"A"}}, {"b", {"B"}}}}}},
        {"decoupling-monte-carlo", "5",
         {{"command", "decouple"},
          {"seed", 7},
          {"parameters", {{"omega", "flat"}, {"dim_s", 1}, {"dim_g", 4}, {"n", {1, 2, 3}}, {"samples", 200}}}}},
        {"op-identities", "6",
         {{"command", "classcheck"},
          {"seed", 6},
          {"parameters", {{"checks", {"op-swap", "op-transfer"}}, {"trials", 100}}}}},
        {"min-entropy-bracket", "7",
         {{"command", "classcheck"},
          {"seed", 7},
          {"parameters", {{"checks", {"min-entropy-bracket"}}, {"trials", 200}}}}},
        {"csiszar-sum", "8",
         {{"command", "classcheck"}, {"seed", 8}, {"parameters", {{"checks", {"csiszar"}}, {"trials", 100}}}}},
        {"hadamard-structure", "9",
         {{"command", "classcheck"},
          {"seed", 9},
          {"instance", {{"channel", "hadamard-random"}, {"dims", {{"E", 2}, {"A'", 2}, {"C1", 2}, {"K", 2}, {"B", 4}}}}},
          {"parameters", {{"checks", {"hadamard-L", "degradable", "pure-candidate-identity"}}, {"trials", 50}}}}},
        {"uhlmann-recovery", "10",
         {{"command", "classcheck"},
          {"seed", 10},
          {"parameters", {{"checks", {"uhlmann", "uhlmann-equal-marginals"}}, {"trials", 50}}}}},
        {"determinism", "11",
         {{"command", "decouple"},
          {"seed", 11},
          {"parameters", {{"omega", "flat"}, {"dim_s", 4}, {"dim_g", 1}, {"n", {1, 2}}, {"samples", 50}}}}},
    };
}

}  // namespace qmask::cli
