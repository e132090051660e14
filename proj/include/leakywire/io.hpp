#ifndef LEAKYWIRE_IO_HPP
#define LEAKYWIRE_IO_HPP

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "birman_schwinger.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "spectral.hpp"
#include "trace.hpp"

namespace leakywire {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

struct LemmaConfig {
    std::vector<double> kappa{0.5, 1.0, 2.0};
    std::vector<double> distance{0.0, 0.5, 1.0, 3.0};
    double tolerance = 1e-6;
};

struct HsConfig {
    double kappa = 1.0;
    std::vector<double> L_schedule{20.0, 40.0};
    double tolerance = 1e-8;
};

struct BoundaryConfig {
    std::vector<double> s_samples{0.0, 0.5, 1.5, 3.0};
    std::vector<double> r_sequence = default_r_sequence();
    double window = 0.0;
    double tolerance = 1e-2;
};

struct TraceConfig {
    std::vector<double> kappa{2.0};
    bool cutoff_quadrature = false;
    std::vector<double> delta_factors{5, 10, 20, 40};
};

/// Grid origin + a/(nu-1) u + b/(nv-1) v, a < nu, b < nv.
struct FieldPlane {
    Vec3 origin = Vec3::Zero();
    Vec3 u = Vec3(8, 0, 0);
    Vec3 v = Vec3(0, 8, 0);
    int nu = 41, nv = 41;
};

enum class Format { json, csv, both };

struct RunConfig {
    CurveSpec curve;
    double curve_spacing = 0.05;
    std::vector<double> alpha{0.0};
    double L = 48.0;
    std::size_t N = 1024;
    SearchOptions spectrum;
    std::vector<FieldPlane> planes;
    LemmaConfig lemma;
    std::vector<double> positivity_kappa{0.5, 1.0, 2.0};
    double positivity_tolerance = 1e-10;
    std::vector<double> lower_bound_kappa{std::exp(2.0), std::exp(3.0), std::exp(4.0)};
    HsConfig hs;
    BoundaryConfig boundary;
    TraceConfig trace;
    std::string out_dir = "out";
    Format format = Format::json;
    int workers = 1;
};

namespace detail {

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }

inline void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    if (!obj.is_object())
        throw config_error(path + ": expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw config_error(child(path, it.key()) + ": unknown field");
}

inline double number_at(const json& v, const std::string& path) {
    if (!v.is_number())
        throw config_error(path + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        throw config_error(path + ": must be finite");
    return x;
}

inline void read_number(const json& obj, const std::string& path, const char* key, double& out) {
    if (obj.contains(key))
        out = number_at(obj.at(key), child(path, key));
}

inline void read_positive(const json& obj, const std::string& path, const char* key, double& out) {
    read_number(obj, path, key, out);
    if (obj.contains(key) && !(out > 0))
        throw config_error(child(path, key) + ": must be positive");
}

inline void read_list(const json& obj, const std::string& path, const char* key, std::vector<double>& out,
                      bool positive = false, bool increasing = false) {
    if (!obj.contains(key))
        return;
    const json& v = obj.at(key);
    const std::string p = child(path, key);
    if (!v.is_array() || v.empty())
        throw config_error(p + ": expected a non-empty array of numbers");
    std::vector<double> xs;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string pi_ = p + "/" + std::to_string(i);
        const double x = number_at(v[i], pi_);
        if (positive && !(x > 0))
            throw config_error(pi_ + ": must be positive");
        if (increasing && !xs.empty() && !(x > xs.back()))
            throw config_error(pi_ + ": list must be increasing");
        xs.push_back(x);
    }
    out = std::move(xs);
}

inline int read_int(const json& obj, const std::string& path, const char* key, int def, int lo) {
    if (!obj.contains(key))
        return def;
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        throw config_error(child(path, key) + ": expected an integer");
    const auto x = v.get<long long>();
    if (x < lo || x > 1'000'000)
        throw config_error(child(path, key) + ": out of range");
    return static_cast<int>(x);
}

/// Sampled user curve: uniform samples of the map on [t_begin, t_end],
/// joined by a cubic B-spline with end slopes along +x1, continued straight
/// outside the window.
inline UserParametric sampled_curve(const std::vector<Vec3>& samples, double t_begin, double t_end) {
    const auto n = samples.size();
    const double step = (t_end - t_begin) / static_cast<double>(n - 1);
    using spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
    std::array<std::shared_ptr<spline>, 3> c;
    for (int k = 0; k < 3; ++k) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = samples[i](k);
        // end slope: (dx/dt, 0, 0) matching the chord of the last cell
        const double d0 = k == 0 ? (samples[1](0) - samples[0](0)) / step : 0.0;
        const double d1 = k == 0 ? (samples[n - 1](0) - samples[n - 2](0)) / step : 0.0;
        c[static_cast<std::size_t>(k)] = std::make_shared<spline>(v.begin(), v.end(), t_begin, step, d0, d1);
    }
    auto eval = [c, t_begin, t_end](double t, int order) {
        const double tc = std::clamp(t, t_begin, t_end);
        Vec3 p;
        for (int k = 0; k < 3; ++k) {
            const auto& s = *c[static_cast<std::size_t>(k)];
            p(k) = order == 0 ? s(tc) : (order == 1 ? s.prime(tc) : s.double_prime(tc));
        }
        if (order == 0 && t != tc)
            p += (t - tc) * Vec3(c[0]->prime(tc), 0, 0);
        if (order == 2 && t != tc)
            p.setZero();
        return p;
    };
    UserParametric u;
    u.map = [eval](double t) { return eval(t, 0); };
    u.derivative = [eval](double t) { return eval(t, 1); };
    u.second_derivative = [eval](double t) { return eval(t, 2); };
    u.t_begin = t_begin;
    u.t_end = t_end;
    return u;
}

inline Vec3 read_vec3(const json& obj, const std::string& path, const char* key, const Vec3& def) {
    if (!obj.contains(key))
        return def;
    const json& v = obj.at(key);
    const std::string p = child(path, key);
    if (!v.is_array() || v.size() != 3)
        throw config_error(p + ": expected [x, y, z]");
    return {number_at(v[0], p + "/0"), number_at(v[1], p + "/1"), number_at(v[2], p + "/2")};
}

inline FieldPlane parse_plane(const json& j, const std::string& path) {
    only_keys(j, path, {"origin", "u", "v", "n"});
    FieldPlane f;
    f.origin = read_vec3(j, path, "origin", f.origin);
    f.u = read_vec3(j, path, "u", f.u);
    f.v = read_vec3(j, path, "v", f.v);
    if (!(f.u.cross(f.v).norm() > 0))
        throw config_error(child(path, "v") + ": must not be parallel to u");
    if (j.contains("n")) {
        const json& n = j.at("n");
        const std::string p = child(path, "n");
        if (!n.is_array() || n.size() != 2)
            throw config_error(p + ": expected [nu, nv]");
        for (std::size_t k = 0; k < 2; ++k) {
            const std::string pk = p + "/" + std::to_string(k);
            if (!n[k].is_number_integer() || n[k].get<long long>() < 2 || n[k].get<long long>() > 2000)
                throw config_error(pk + ": expected an integer in [2, 2000]");
        }
        f.nu = n[0].get<int>();
        f.nv = n[1].get<int>();
    }
    return f;
}

inline void parse_curve(const json& j, const std::string& path, RunConfig& cfg) {
    if (!j.is_object() || !j.contains("family") || !j.at("family").is_string())
        throw config_error(child(path, "family") + ": required string");
    const std::string family = j.at("family").get<std::string>();
    if (family == "straight_line") {
        only_keys(j, path, {"family", "spacing", "deformation_bound"});
        cfg.curve.family = StraightLine{};
    } else if (family == "planar_bump") {
        only_keys(j, path, {"family", "amplitude", "width", "spacing", "deformation_bound"});
        PlanarBump b;
        read_number(j, path, "amplitude", b.amplitude);
        read_positive(j, path, "width", b.width);
        cfg.curve.family = b;
    } else if (family == "circular_arc_joint") {
        only_keys(j, path, {"family", "bend_angle", "radius", "spacing", "deformation_bound"});
        CircularArcJoint a;
        read_number(j, path, "bend_angle", a.bend_angle);
        read_positive(j, path, "radius", a.radius);
        cfg.curve.family = a;
    } else if (family == "user_parametric") {
        only_keys(j, path, {"family", "t_begin", "t_end", "samples", "spacing", "deformation_bound"});
        double tb = -1, te = 1;
        read_number(j, path, "t_begin", tb);
        read_number(j, path, "t_end", te);
        if (!(te > tb))
            throw config_error(child(path, "t_end") + ": must exceed t_begin");
        const std::string sp = child(path, "samples");
        if (!j.contains("samples") || !j.at("samples").is_array() || j.at("samples").size() < 4)
            throw config_error(sp + ": expected at least four [x, y, z] samples");
        std::vector<Vec3> pts;
        for (std::size_t i = 0; i < j.at("samples").size(); ++i) {
            const json& row = j.at("samples")[i];
            const std::string rp = sp + "/" + std::to_string(i);
            if (!row.is_array() || row.size() != 3)
                throw config_error(rp + ": expected [x, y, z]");
            pts.emplace_back(number_at(row[0], rp + "/0"), number_at(row[1], rp + "/1"), number_at(row[2], rp + "/2"));
        }
        cfg.curve.family = sampled_curve(pts, tb, te);
    } else {
        throw config_error(child(path, "family") + ": unknown family '" + family + "'");
    }
    read_positive(j, path, "spacing", cfg.curve_spacing);
    if (j.contains("deformation_bound")) {
        double r = 0;
        read_positive(j, path, "deformation_bound", r);
        cfg.curve.deformation_bound = r;
    }
}

} // namespace detail

/// Validates and converts a config document. Errors name the offending
/// field as a JSON pointer.
inline RunConfig parse_config(const json& j) {
    using namespace detail;
    RunConfig cfg;
    only_keys(j, "", {"curve", "alpha", "disc", "spectrum", "verify", "trace", "output", "workers"});
    if (j.contains("curve"))
        parse_curve(j.at("curve"), "/curve", cfg);

    if (j.contains("alpha")) {
        const json& a = j.at("alpha");
        if (a.is_array()) {
            read_list(j, "", "alpha", cfg.alpha);
        } else {
            cfg.alpha = {number_at(a, "/alpha")};
        }
    }
    if (j.contains("disc")) {
        const json& d = j.at("disc");
        only_keys(d, "/disc", {"L", "N"});
        read_positive(d, "/disc", "L", cfg.L);
        const int n = read_int(d, "/disc", "N", static_cast<int>(cfg.N), 8);
        if (!is_power_of_two(static_cast<std::size_t>(n)))
            throw config_error("/disc/N: must be a power of two");
        cfg.N = static_cast<std::size_t>(n);
    }
    if (j.contains("spectrum")) {
        const json& s = j.at("spectrum");
        only_keys(s, "/spectrum", {"kappa_max", "root_tol", "margin", "branches", "planes"});
        if (s.contains("kappa_max")) {
            double k = 0;
            read_positive(s, "/spectrum", "kappa_max", k);
            cfg.spectrum.kappa_max = k;
        }
        read_positive(s, "/spectrum", "root_tol", cfg.spectrum.root_tol);
        read_positive(s, "/spectrum", "margin", cfg.spectrum.margin);
        cfg.spectrum.branches = read_int(s, "/spectrum", "branches", cfg.spectrum.branches, 1);
        if (s.contains("planes")) {
            if (!s.at("planes").is_array())
                throw config_error("/spectrum/planes: expected an array");
            for (std::size_t i = 0; i < s.at("planes").size(); ++i)
                cfg.planes.push_back(parse_plane(s.at("planes")[i], "/spectrum/planes/" + std::to_string(i)));
        }
    }
    if (j.contains("verify")) {
        const json& v = j.at("verify");
        only_keys(v, "/verify", {"lemma", "positivity", "lower_bound", "hs", "boundary"});
        if (v.contains("lemma")) {
            const json& l = v.at("lemma");
            only_keys(l, "/verify/lemma", {"kappa", "distance", "tolerance"});
            read_list(l, "/verify/lemma", "kappa", cfg.lemma.kappa, true);
            read_list(l, "/verify/lemma", "distance", cfg.lemma.distance);
            for (double d : cfg.lemma.distance)
                if (d < 0)
                    throw config_error("/verify/lemma/distance: entries must be nonnegative");
            read_positive(l, "/verify/lemma", "tolerance", cfg.lemma.tolerance);
        }
        if (v.contains("positivity")) {
            const json& p = v.at("positivity");
            only_keys(p, "/verify/positivity", {"kappa", "tolerance"});
            read_list(p, "/verify/positivity", "kappa", cfg.positivity_kappa, true);
            read_positive(p, "/verify/positivity", "tolerance", cfg.positivity_tolerance);
        }
        if (v.contains("lower_bound")) {
            const json& p = v.at("lower_bound");
            only_keys(p, "/verify/lower_bound", {"kappa"});
            read_list(p, "/verify/lower_bound", "kappa", cfg.lower_bound_kappa, true, true);
        }
        if (v.contains("hs")) {
            const json& p = v.at("hs");
            only_keys(p, "/verify/hs", {"kappa", "L_schedule", "tolerance"});
            read_positive(p, "/verify/hs", "kappa", cfg.hs.kappa);
            read_list(p, "/verify/hs", "L_schedule", cfg.hs.L_schedule, true, true);
            read_positive(p, "/verify/hs", "tolerance", cfg.hs.tolerance);
        }
        if (v.contains("boundary")) {
            const json& p = v.at("boundary");
            only_keys(p, "/verify/boundary", {"s_samples", "r_sequence", "window", "tolerance"});
            read_list(p, "/verify/boundary", "s_samples", cfg.boundary.s_samples);
            read_list(p, "/verify/boundary", "r_sequence", cfg.boundary.r_sequence, true);
            read_number(p, "/verify/boundary", "window", cfg.boundary.window);
            read_positive(p, "/verify/boundary", "tolerance", cfg.boundary.tolerance);
        }
    }
    if (j.contains("trace")) {
        const json& t = j.at("trace");
        only_keys(t, "/trace", {"kappa", "cutoff_quadrature", "delta_factors"});
        read_list(t, "/trace", "kappa", cfg.trace.kappa, true);
        if (t.contains("cutoff_quadrature")) {
            if (!t.at("cutoff_quadrature").is_boolean())
                throw config_error("/trace/cutoff_quadrature: expected a boolean");
            cfg.trace.cutoff_quadrature = t.at("cutoff_quadrature").get<bool>();
        }
        read_list(t, "/trace", "delta_factors", cfg.trace.delta_factors, true, true);
    }
    if (j.contains("output")) {
        const json& o = j.at("output");
        only_keys(o, "/output", {"dir", "formats"});
        if (o.contains("dir")) {
            if (!o.at("dir").is_string() || o.at("dir").get<std::string>().empty())
                throw config_error("/output/dir: expected a non-empty string");
            cfg.out_dir = o.at("dir").get<std::string>();
        }
        if (o.contains("formats")) {
            const json& f = o.at("formats");
            if (!f.is_array() || f.empty())
                throw config_error("/output/formats: expected a non-empty array");
            bool js = false, csv = false;
            for (std::size_t i = 0; i < f.size(); ++i) {
                const std::string p = "/output/formats/" + std::to_string(i);
                if (!f[i].is_string())
                    throw config_error(p + ": expected a string");
                const auto name = f[i].get<std::string>();
                if (name == "json")
                    js = true;
                else if (name == "csv")
                    csv = true;
                else
                    throw config_error(p + ": unknown format '" + name + "'");
            }
            cfg.format = js && csv ? Format::both : (csv ? Format::csv : Format::json);
        }
    }
    cfg.workers = read_int(j, "", "workers", cfg.workers, 1);
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j);
}

inline Format parse_format(const std::string& s) {
    if (s == "json")
        return Format::json;
    if (s == "csv")
        return Format::csv;
    if (s == "both")
        return Format::both;
    throw config_error("--format: expected json, csv or both");
}

inline bool wants_json(Format f) { return f != Format::csv; }
inline bool wants_csv(Format f) { return f != Format::json; }

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal, '.' separator regardless of locale.
inline std::string format_number(double x) {
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

/// Non-finite values become null; JSON has no representation for them.
inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Writes to a sibling temporary and renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw config_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw config_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw config_error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    CsvTable& row(const std::vector<double>& values) {
        if (values.size() != header_.size())
            throw contract_error("csv row width does not match header");
        rows_.push_back(values);
        return *this;
    }

    const std::vector<std::vector<double>>& rows() const { return rows_; }

    std::string str() const {
        std::string out;
        for (std::size_t k = 0; k < header_.size(); ++k)
            out += (k ? "," : "") + header_[k];
        out += '\n';
        for (const auto& r : rows_) {
            for (std::size_t k = 0; k < r.size(); ++k)
                out += (k ? "," : "") + format_number(r[k]);
            out += '\n';
        }
        return out;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

inline json curve_json(const RunConfig& cfg) {
    json c;
    c["family"] = family_name(cfg.curve);
    std::visit(
        [&c](const auto& f) {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, PlanarBump>) {
                c["amplitude"] = f.amplitude;
                c["width"] = f.width;
            } else if constexpr (std::is_same_v<F, CircularArcJoint>) {
                c["bend_angle"] = f.bend_angle;
                c["radius"] = f.radius;
            } else if constexpr (std::is_same_v<F, UserParametric>) {
                c["t_begin"] = f.t_begin;
                c["t_end"] = f.t_end;
            }
        },
        cfg.curve.family);
    c["spacing"] = cfg.curve_spacing;
    return c;
}

inline json threshold_json(double alpha) {
    return {{"alpha", alpha}, {"xi_alpha", threshold(alpha)}, {"kappa_alpha", kappa_alpha(alpha)}};
}

inline json bound_states_json(const BoundStateSearch& r) {
    json states = json::array();
    for (const auto& s : r.states)
        states.push_back({{"kappa", s.kappa_star},
                          {"energy", s.energy},
                          {"residual", s.residual},
                          {"branch", s.branch_index},
                          {"bracket", {s.bracket_lo, s.bracket_hi}},
                          {"iterations", s.iterations}});
    return {{"alpha", r.alpha},
            {"xi_alpha", r.xi_alpha},
            {"kappa_alpha", r.kappa_alpha},
            {"kappa_range", {r.kappa_lo, r.kappa_hi}},
            {"states", states},
            {"notices", r.notices}};
}

inline CsvTable phi_csv(const Discretization& disc, const BoundState& st) {
    CsvTable t({"s", "phi"});
    for (std::size_t i = 0; i < disc.N; ++i)
        t.row({disc.s[i], st.phi(static_cast<Eigen::Index>(i))});
    return t;
}

/// Normalized eigenfunction on a plane grid; nan where the point is too
/// close to the curve for the single layer to be evaluated.
inline CsvTable plane_csv(const Eigenfunction& f, const FieldPlane& p) {
    CsvTable t({"a", "b", "x", "y", "z", "f"});
    for (int a = 0; a < p.nu; ++a)
        for (int b = 0; b < p.nv; ++b) {
            const double ta = a / double(p.nu - 1), tb = b / double(p.nv - 1);
            const Vec3 x = p.origin + ta * p.u + tb * p.v;
            double v;
            try {
                v = f(x);
            } catch (const contract_error&) {
                v = std::nan("");
            }
            t.row({ta, tb, x(0), x(1), x(2), v});
        }
    return t;
}

inline json trace_report_json(const TraceReport& r) {
    json blocks = json::array();
    for (const auto& b : r.blocks) {
        json e = {{"i", block_name(b.i)},
                  {"j", block_name(b.j)},
                  {"limit_q", b.limit_q},
                  {"limit_t", b.limit_t},
                  {"limit", b.limit_difference},
                  {"bound_q", number_or_null(b.bound_q.value)},
                  {"bound_t", number_or_null(b.bound_t.value)},
                  {"bound_kind", b.bound_q.kind},
                  {"within_bound", b.within_bound},
                  {"hs_norm", b.norms_difference.hilbert_schmidt},
                  {"trace_norm", b.norms_difference.trace_norm}};
        if (b.cutoff) {
            e["cutoff"] = {{"delta", b.cutoff->delta},
                           {"values", b.cutoff->values},
                           {"limit", b.cutoff->limit},
                           {"gap", b.cutoff->gap},
                           {"monotone", b.cutoff->monotone},
                           {"method", b.cutoff->method}};
        }
        blocks.push_back(e);
    }
    return {{"kappa", r.kappa},
            {"alpha", r.alpha},
            {"blocks", blocks},
            {"cancellation_residual", {{"plus", r.cancellation.plus}, {"minus", r.cancellation.minus}}},
            {"prefactor", r.prefactor},
            {"prefactor_annotation", {{"value", r.annotated_prefactor}, {"note", r.prefactor_note}}},
            {"min_eigenvalue", r.min_eigenvalue},
            {"positive", r.positive},
            {"kappa_check", r.kappa_check ? json(*r.kappa_check) : json(nullptr)},
            {"symmetry_defect", r.symmetry_defect},
            {"all_within_bounds", r.all_within_bounds},
            {"notices", r.notices}};
}

} // namespace leakywire

#endif
