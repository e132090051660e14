// leakywire command-line driver.
//
// Exit codes: 0 success, 1 a verification suite reported a failure,
// 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <leakywire/leakywire.hpp>

#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <string>
#include <vector>

namespace lw = leakywire;
namespace fs = std::filesystem;
using lw::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_verify_failed = 1;
constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

struct Context {
    lw::RunConfig cfg;
    fs::path out;
    lw::Format format = lw::Format::json;
    int workers = 1;
};

/// Runs f(0..n-1) on up to `workers` threads; results keep index order.
template <class F>
auto parallel_map(std::size_t n, int workers, F&& f) {
    using R = decltype(f(std::size_t{0}));
    std::vector<R> out;
    out.reserve(n);
    const auto w = static_cast<std::size_t>(std::max(1, workers));
    for (std::size_t start = 0; start < n; start += w) {
        std::vector<std::future<R>> batch;
        for (std::size_t i = start; i < std::min(n, start + w); ++i)
            batch.push_back(std::async(w == 1 ? std::launch::deferred : std::launch::async, f, i));
        for (auto& fu : batch)
            out.push_back(fu.get());
    }
    return out;
}

lw::ArcLengthCurve make_curve(const lw::RunConfig& cfg) {
    lw::ReparamOptions opt;
    if (cfg.curve.family.index() == 0)
        opt.half_length = cfg.L;
    return lw::reparametrize_arclength(cfg.curve, cfg.curve_spacing, opt);
}

void emit(const Context& ctx, const std::string& stem, const json& doc) {
    const std::string text = lw::dump(doc);
    if (lw::wants_json(ctx.format))
        lw::write_file_atomic(ctx.out / (stem + ".json"), text);
    std::cout << text;
}

void emit_csv(const Context& ctx, const std::string& name, const lw::CsvTable& table) {
    if (lw::wants_csv(ctx.format))
        lw::write_file_atomic(ctx.out / name, table.str());
}

json header(const Context& ctx, const char* command) {
    return {{"command", command},
            {"curve", lw::curve_json(ctx.cfg)},
            {"disc", {{"L", ctx.cfg.L}, {"N", ctx.cfg.N}}}};
}

int cmd_threshold(const Context& ctx) {
    json doc = {{"command", "threshold"}, {"records", json::array()}};
    lw::CsvTable csv({"alpha", "xi_alpha", "kappa_alpha"});
    for (double a : ctx.cfg.alpha) {
        doc["records"].push_back(lw::threshold_json(a));
        csv.row({a, lw::threshold(a), lw::kappa_alpha(a)});
    }
    emit(ctx, "threshold", doc);
    emit_csv(ctx, "threshold.csv", csv);
    return exit_ok;
}

int cmd_spectrum(const Context& ctx) {
    const auto curve = make_curve(ctx.cfg);
    const auto disc = lw::make_discretization(curve, ctx.cfg.L, ctx.cfg.N);
    const auto runs = parallel_map(ctx.cfg.alpha.size(), ctx.workers, [&](std::size_t i) {
        return lw::find_bound_states(disc, ctx.cfg.alpha[i], ctx.cfg.spectrum);
    });
    json doc = header(ctx, "spectrum");
    doc["records"] = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        doc["records"].push_back(lw::bound_states_json(runs[i]));
        for (std::size_t k = 0; k < runs[i].states.size(); ++k) {
            const std::string tag = "_alpha" + std::to_string(i) + "_state" + std::to_string(k);
            emit_csv(ctx, "phi" + tag + ".csv", lw::phi_csv(disc, runs[i].states[k]));
            if (ctx.cfg.planes.empty())
                continue;
            // planes are written whatever the format: they have no JSON form
            const lw::Eigenfunction f(disc, runs[i].states[k]);
            for (std::size_t p = 0; p < ctx.cfg.planes.size(); ++p)
                lw::write_file_atomic(ctx.out / ("f" + tag + "_plane" + std::to_string(p) + ".csv"),
                                      lw::plane_csv(f, ctx.cfg.planes[p]).str());
        }
    }
    emit(ctx, "spectrum", doc);
    return exit_ok;
}

// -- verification suites -----------------------------------------------------

json suite_lemma(const Context& ctx) {
    json checks = json::array();
    for (double kappa : ctx.cfg.lemma.kappa)
        for (double d : ctx.cfg.lemma.distance) {
            const lw::KernelParams p{kappa, 1e-3};
            const lw::Vec3 y(0, 0, 0), z(d, 0, 0);
            const double exact = lw::green_convolution(p, y, z, lw::ConvolutionMode::closed_form);
            const double quad = lw::green_convolution(p, y, z, lw::ConvolutionMode::quadrature);
            const double rel = std::abs(quad - exact) / exact;
            checks.push_back({{"kappa", kappa},
                              {"distance", d},
                              {"closed_form", exact},
                              {"quadrature", quad},
                              {"relative_error", rel},
                              {"pass", rel < ctx.cfg.lemma.tolerance}});
        }
    return checks;
}

json suite_positivity(const Context& ctx) {
    const auto curve = make_curve(ctx.cfg);
    const auto disc = lw::make_discretization(curve, ctx.cfg.L, ctx.cfg.N);
    json checks = json::array();
    for (double kappa : ctx.cfg.positivity_kappa) {
        const lw::Matrix B = lw::assemble_B(disc, {kappa, lw::default_diagonal_cutoff(disc.h)});
        const double lo = lw::symmetric_eigenvalues(lw::symmetrized(B, disc)).minCoeff();
        checks.push_back({{"kappa", kappa},
                          {"min_eigenvalue", lo},
                          {"pass", lo >= -ctx.cfg.positivity_tolerance}});
    }
    return checks;
}

json suite_lower_bound(const Context& ctx) {
    const auto curve = make_curve(ctx.cfg);
    const auto disc = lw::make_discretization(curve, ctx.cfg.L, ctx.cfg.N);
    const double c_line = 1 / (2 * lw::pi);
    json checks = json::array();
    for (double alpha : ctx.cfg.alpha) {
        const auto r = lw::lower_bound_check(disc, alpha, ctx.cfg.lower_bound_kappa, lw::default_diagonal_cutoff(disc.h));
        bool increasing = true;
        for (std::size_t i = 1; i < r.sigma_min.size(); ++i)
            increasing = increasing && r.sigma_min[i] > r.sigma_min[i - 1];
        json c = {{"alpha", alpha},
                  {"kappa", r.kappas},
                  {"sigma_min", r.sigma_min},
                  {"excluded", r.excluded},
                  {"fitted_c", r.fitted_c},
                  {"fit_residual", r.fit_residual},
                  {"increasing", increasing},
                  {"notices", r.notices}};
        bool pass = r.pass && increasing && r.excluded.empty();
        if (disc.straight) {
            const double dev = std::abs(r.fitted_c - c_line) / c_line;
            c["expected_c"] = c_line;
            c["relative_deviation"] = dev;
            pass = pass && dev < 0.1;
        }
        c["pass"] = pass;
        checks.push_back(c);
    }
    return checks;
}

json suite_hs(const Context& ctx) {
    const auto curve = make_curve(ctx.cfg);
    const double spacing = 2 * ctx.cfg.L / static_cast<double>(ctx.cfg.N);
    const auto sweep = lw::hs_norm_B(curve, ctx.cfg.hs.kappa, ctx.cfg.hs.L_schedule, spacing);
    json checks = json::array();
    for (std::size_t i = 1; i < sweep.L.size(); ++i)
        checks.push_back({{"kappa", ctx.cfg.hs.kappa},
                          {"L", {sweep.L[i - 1], sweep.L[i]}},
                          {"hs_norm", {sweep.hs_norm[i - 1], sweep.hs_norm[i]}},
                          {"decrement", sweep.decrement[i - 1]},
                          {"pass", sweep.decrement[i - 1] < ctx.cfg.hs.tolerance}});
    return checks;
}

json suite_boundary(const Context& ctx) {
    const auto curve = make_curve(ctx.cfg);
    const auto disc = lw::make_discretization(curve, ctx.cfg.L, ctx.cfg.N);
    json checks = json::array();
    for (double alpha : ctx.cfg.alpha) {
        const auto search = lw::find_bound_states(disc, alpha, ctx.cfg.spectrum);
        if (search.states.empty()) {
            checks.push_back({{"alpha", alpha}, {"pass", false}, {"notices", {"no bound state to check"}}});
            continue;
        }
        lw::BoundaryCheckOptions opt;
        opt.window = ctx.cfg.boundary.window;
        const auto bc = lw::verify_boundary_condition(curve, disc, search.states.front(), alpha,
                                                      ctx.cfg.boundary.s_samples, ctx.cfg.boundary.r_sequence, opt);
        json samples = json::array();
        for (const auto& s : bc.samples)
            samples.push_back({{"s", s.s},
                               {"xi", {s.binormal.xi, s.normal.xi}},
                               {"omega", {s.binormal.omega, s.normal.omega}},
                               {"relative_residual", s.relative_residual},
                               {"direction_spread", s.direction_spread}});
        const double tol = ctx.cfg.boundary.tolerance;
        checks.push_back({{"alpha", alpha},
                          {"energy", search.states.front().energy},
                          {"samples", samples},
                          {"max_relative_residual", bc.max_relative_residual},
                          {"max_direction_spread", bc.max_direction_spread},
                          {"pass", bc.max_relative_residual < tol && bc.max_direction_spread < tol}});
    }
    return checks;
}

int cmd_verify(const Context& ctx, const std::string& suite) {
    json checks;
    if (suite == "lemma")
        checks = suite_lemma(ctx);
    else if (suite == "positivity")
        checks = suite_positivity(ctx);
    else if (suite == "lower_bound")
        checks = suite_lower_bound(ctx);
    else if (suite == "hs")
        checks = suite_hs(ctx);
    else
        checks = suite_boundary(ctx);
    bool pass = true;
    for (const auto& c : checks)
        pass = pass && c.at("pass").get<bool>();
    json doc = header(ctx, "verify");
    doc["suite"] = suite;
    doc["checks"] = checks;
    doc["pass"] = pass;
    emit(ctx, "verify_" + suite, doc);
    return pass ? exit_ok : exit_verify_failed;
}

int cmd_trace(const Context& ctx) {
    const auto curve = make_curve(ctx.cfg);
    const auto disc = lw::make_discretization(curve, ctx.cfg.L, ctx.cfg.N);
    lw::TraceOptions opt;
    opt.cutoff_quadrature = ctx.cfg.trace.cutoff_quadrature;
    opt.cutoff.delta_factors = ctx.cfg.trace.delta_factors;

    struct Job {
        double alpha, kappa;
    };
    std::vector<Job> jobs;
    for (double a : ctx.cfg.alpha)
        for (double k : ctx.cfg.trace.kappa)
            jobs.push_back({a, k});
    struct Outcome {
        std::optional<lw::TraceReport> report;
        std::string notice;
    };
    const auto results = parallel_map(jobs.size(), ctx.workers, [&](std::size_t i) {
        Outcome o;
        try {
            o.report = lw::trace_bound_report(disc, jobs[i].alpha, jobs[i].kappa, opt);
        } catch (const lw::singular_error& e) {
            o.notice = "alpha = " + lw::format_number(jobs[i].alpha) + ", kappa = " + lw::format_number(jobs[i].kappa) +
                       " excluded: " + e.what();
        }
        return o;
    });
    json doc = header(ctx, "trace");
    doc["records"] = json::array();
    doc["notices"] = json::array();
    lw::CsvTable csv({"kappa", "block_i", "block_j", "delta", "value", "limit"});
    std::size_t done = 0;
    for (const auto& r : results) {
        if (!r.report) {
            doc["notices"].push_back(r.notice);
            continue;
        }
        ++done;
        doc["records"].push_back(lw::trace_report_json(*r.report));
        for (const auto& b : r.report->blocks)
            if (b.cutoff)
                for (std::size_t k = 0; k < b.cutoff->delta.size(); ++k)
                    csv.row({r.report->kappa, static_cast<double>(b.i), static_cast<double>(b.j), b.cutoff->delta[k],
                             b.cutoff->values[k], b.cutoff->limit});
    }
    emit(ctx, "trace", doc);
    emit_csv(ctx, "trace_cutoff.csv", csv);
    if (done == 0) {
        std::cerr << "error: every kappa was singular\n";
        return exit_numeric;
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bound states and trace diagnostics for leaky wires in three dimensions"};
    app.require_subcommand(1);
    std::string config_path, out_dir, format;
    int workers = 0;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory (overrides LEAKYWIRE_OUT and the config)");
    app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--format", format, "json, csv or both")->check(CLI::IsMember({"json", "csv", "both"}));

    auto* threshold = app.add_subcommand("threshold", "Threshold xi_alpha and kappa_alpha");
    auto* spectrum = app.add_subcommand("spectrum", "Bound states below the threshold");
    auto* verify = app.add_subcommand("verify", "Run one verification suite");
    std::string suite;
    verify->add_option("--suite", suite, "Suite name")
        ->required()
        ->check(CLI::IsMember({"lemma", "positivity", "hs", "lower_bound", "boundary"}));
    auto* trace = app.add_subcommand("trace", "Block trace report of the resolvent difference");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        Context ctx;
        if (!config_path.empty())
            ctx.cfg = lw::load_config(config_path);
        ctx.out = ctx.cfg.out_dir;
        if (const char* env = std::getenv("LEAKYWIRE_OUT"); env && *env)
            ctx.out = env;
        if (!out_dir.empty())
            ctx.out = out_dir;
        ctx.format = format.empty() ? ctx.cfg.format : lw::parse_format(format);
        ctx.workers = workers > 0 ? workers : ctx.cfg.workers;

        if (*threshold)
            return cmd_threshold(ctx);
        if (*spectrum)
            return cmd_spectrum(ctx);
        if (*verify)
            return cmd_verify(ctx, suite);
        if (*trace)
            return cmd_trace(ctx);
    } catch (const lw::config_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_config;
    } catch (const lw::error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numeric;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numeric;
    }
    return exit_ok;
}
