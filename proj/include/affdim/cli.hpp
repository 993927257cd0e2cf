#ifndef AFFDIM_CLI_HPP
#define AFFDIM_CLI_HPP

//
// affdim command-line front end.
//
// exit codes: 0 success / pass, 1 Fail verdict or hypothesis violated at run
// time, 2 invalid input
//

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <affdim/code_tree.hpp>
#include <affdim/dimension.hpp>
#include <affdim/exterior_algebra.hpp>
#include <affdim/fs_checker.hpp>
#include <affdim/io.hpp>

namespace affdim::cli {

enum exit_code : int { ok = 0, failed = 1, bad_input = 2 };

using io::json;

// thrown for hypothesis violations detected while running (exit 1)
struct hypothesis_violation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string blade_name(const MultiIndex& idx)
{
    if (idx.grade() == 0)
        return "1";
    std::string s;
    for (int k = 0; k < idx.grade(); ++k) {
        if (k)
            s += "^";
        s += "e" + std::to_string(idx[std::size_t(k)] + 1);
    }
    return s;
}

// "0.7071*e1^e2 - 0.7071*e1^e3", tiny coordinates dropped
inline std::string expression(const ExteriorVector& v)
{
    const auto& bl = blades(v.dim(), v.grade());
    const double scale = std::max(v.coords().cwiseAbs().maxCoeff(), 1e-300);
    std::ostringstream os;
    os.precision(6);
    bool first = true;
    for (std::size_t i = 0; i < bl.size(); ++i) {
        const double c = v[i];
        if (std::abs(c) <= 1e-12 * scale)
            continue;
        if (!first)
            os << (c < 0 ? " - " : " + ");
        else if (c < 0)
            os << "-";
        first = false;
        if (std::abs(std::abs(c) - 1.0) > 1e-12)
            os << std::abs(c) << "*";
        os << blade_name(bl[i]);
    }
    return first ? "0" : os.str();
}

inline json to_json(const Vector& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

inline json to_json(const Matrix& t)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < t.rows(); ++r)
        rows.push_back(to_json(Vector(t.row(r).transpose())));
    return rows;
}

inline json to_json(const ExteriorVector& v)
{
    return {{"grade", v.grade()}, {"coords", to_json(v.coords())}, {"expr", expression(v)}};
}

inline json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const Verdict& v)
{
    json j;
    j["verdict"] = to_string(v.kind);
    j["grade"] = v.grade;
    j["reason"] = v.reason;
    j["samples"] = v.samples;
    j["margin"] = finite_or_null(v.margin);
    j["family_size"] = v.family_size;
    j["required_size"] = v.required_size;
    j["cardinality_fail"] = v.cardinality_fail;
    if (v.witness) {
        json w;
        w["v"] = to_json(v.witness->v);
        w["w"] = to_json(v.witness->w);
        if (v.witness->v_ext)
            w["v_ext"] = to_json(*v.witness->v_ext);
        if (v.witness->w_ext)
            w["w_ext"] = to_json(*v.witness->w_ext);
        w["max_pairing"] = v.witness->max_pairing;
        j["witness"] = w;
    }
    if (v.certificate)
        j["rank_certificate"] = {{"v", to_json(v.certificate->v)},
                                 {"rank", v.certificate->rank},
                                 {"required", v.certificate->required},
                                 {"ratio", v.certificate->ratio}};
    return j;
}

inline json to_json(const CriterionReport& r)
{
    json j;
    j["pass"] = r.pass;
    if (!r.pass)
        j["failed_stage"] = r.failed_stage;
    j["d"] = r.d;
    j["eigenvalues_f"] = to_json(r.eigenvalues_f);
    j["eigenvalues_g"] = to_json(r.eigenvalues_g);
    j["eigenbasis_f"] = to_json(r.eigenbasis_f);
    j["eigenbasis_g"] = to_json(r.eigenbasis_g);
    j["product_margin_f"] = r.product_margin_f;
    j["product_margin_g"] = r.product_margin_g;
    if (r.change_of_basis.size())
        j["change_of_basis"] = to_json(r.change_of_basis);
    j["min_minor"] = r.min_minor;
    j["smallest_minor"] = r.smallest_minor;
    j["n0"] = r.n0;
    j["certified_depth"] = r.certified_depth;
    return j;
}

inline json to_json(const DimensionReport& r)
{
    json j;
    j["d"] = r.d;
    j["s0"] = r.s0;
    j["min_s0_d"] = r.min_s0_d;
    j["pressure"] = {{"k", r.zero.k},
                     {"bracket", {r.zero.bracket_lo, r.zero.bracket_hi}},
                     {"p_at_s0", r.zero.p_at_s0},
                     {"iterations", r.zero.iterations},
                     {"nonpositive_at_zero", r.zero.nonpositive_at_zero},
                     {"capped", r.zero.capped}};
    j["box_estimate"] = r.box_estimate;
    j["box_band"] = r.box_band;
    j["box_fit"] = {{"slope", r.box.slope},
                    {"intercept", r.box.intercept},
                    {"residual", r.box.residual},
                    {"std_error", r.box.std_error},
                    {"j_min", r.box.j_min},
                    {"j_max", r.box.j_max},
                    {"counts", r.box.counts}};
    j["point_count"] = r.point_count;
    j["depth"] = r.depth;
    j["sigma_hi"] = r.sigma_hi;
    j["agreement_tol"] = r.agreement_tol;
    j["agrees"] = r.agrees;
    j["note"] = r.note;
    return j;
}

inline json to_json(const BoxFit& f, std::size_t points, int d)
{
    return {{"estimate", std::clamp(f.slope, 0.0, double(d))},
            {"slope", f.slope},
            {"intercept", f.intercept},
            {"residual", f.residual},
            {"std_error", f.std_error},
            {"j_min", f.j_min},
            {"j_max", f.j_max},
            {"counts", f.counts},
            {"points", points}};
}

}  // namespace detail

struct GlobalOptions {
    std::uint64_t seed = 0;
    std::optional<int> depth;
    std::optional<int> k;
    std::optional<std::size_t> samples;
    std::optional<double> tol;
    std::string out;
    int threads = 1;
};

//
// Runs one invocation. argv[0] is the program name.
//
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"affinity dimension toolkit for affine code tree fractals", "affdim"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--seed", g.seed, "seed for every randomized step");
    app.add_option("--depth", g.depth, "tree depth / iterate depth / sequence length");
    app.add_option("--k", g.k, "composition level for pressure");
    app.add_option("--samples", g.samples, "sample count");
    app.add_option("--tol", g.tol, "tolerance");
    app.add_option("--out", g.out, "write the result to this file instead of stdout");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1, 1024));

    std::string system_path;
    auto add_system = [&](CLI::App* sub) {
        sub->add_option("system", system_path, "JSON system document")->required()->check(CLI::ExistingFile);
        sub->fallthrough();
    };

    std::size_t family = 0;
    double s_value = 1.0;
    auto* check_fs = app.add_subcommand("check-fs", "decide the Falconer-Sloan condition C(s) for a family");
    add_system(check_fs);
    check_fs->add_option("--family", family, "family index");
    check_fs->add_option("--s", s_value, "exponent s in [0, d]; integer s checks C(m)");

    std::vector<std::size_t> pair{0, 1};
    auto* certify = app.add_subcommand("certify", "two-map eigenbasis criterion");
    add_system(certify);
    certify->add_option("--family", family, "family index");
    certify->add_option("--maps", pair, "two map indices in the family")->expected(2);

    double s_min = 0.0, s_step = 0.05;
    std::optional<double> s_max;
    auto* pressure = app.add_subcommand("pressure", "finite-k pressure curve as CSV s,p,diag");
    add_system(pressure);
    pressure->add_option("--s-min", s_min, "first grid point");
    pressure->add_option("--s-max", s_max, "last grid point (default d)");
    pressure->add_option("--s-step", s_step, "grid spacing")->check(CLI::PositiveNumber);

    auto* dim = app.add_subcommand("dim", "affinity dimension and box-count cross-check as JSON");
    add_system(dim);

    int thinning = 1;
    auto* simulate = app.add_subcommand("simulate", "sample a graph sequence; neck gaps as CSV index,gap");
    add_system(simulate);
    simulate->add_option("--thinning", thinning, "keep every thinning-th raw neck")->check(CLI::PositiveNumber);

    std::string points_path;
    std::optional<int> j_min, j_max;
    auto* boxdim = app.add_subcommand("boxdim", "box-counting dimension of a CSV point cloud");
    boxdim->add_option("points", points_path, "CSV x1,..,xd[,weight]")->required()->check(CLI::ExistingFile);
    boxdim->add_option("--j-min", j_min, "coarsest scale 2^-j");
    boxdim->add_option("--j-max", j_max, "finest scale 2^-j");
    boxdim->fallthrough();

    std::optional<double> weight_s;
    int neck = 1;
    auto* points = app.add_subcommand("points", "attractor points as CSV x1,..,xd,weight");
    add_system(points);
    points->add_option("--s", weight_s, "weight cylinders by Phi^s (uniform if omitted)");
    points->add_option("--neck", neck, "with --samples: draw from the measure at neck N_m")->check(CLI::PositiveNumber);

    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "affdim: " << e.what() << "\n";
        return bad_input;
    }

    std::ostringstream result;
    int code = ok;
    try {
        EnumerationOptions enumeration;
        enumeration.threads = g.threads;
        enumeration.mc_seed = g.seed;
        if (g.samples)
            enumeration.mc_samples = *g.samples;

        if (check_fs->parsed()) {
            const auto spec = io::load_system(system_path);
            auto fam = io::linear_family(spec, family);
            if (g.depth)
                fam = iterate_closure(fam, *g.depth);
            CheckOptions opt;
            opt.samples = g.samples.value_or(opt.samples);
            opt.tol = g.tol.value_or(opt.tol);
            opt.seed = g.seed;
            opt.threads = g.threads;
            const auto v = check_condition(fam, s_value, opt);
            result << detail::to_json(v).dump(2) << "\n";
            if (!v.passed()) {
                err << "Fail at grade " << v.grade << ": " << v.reason << "\n";
                if (v.witness)
                    err << "witness v = " << detail::expression(v.witness->v)
                        << ", w = " << detail::expression(v.witness->w) << "\n";
                code = failed;
            }
        } else if (certify->parsed()) {
            const auto spec = io::load_system(system_path);
            const auto fam = io::linear_family(spec, family);
            require(pair.size() == 2 && pair[0] < fam.size() && pair[1] < fam.size(),
                    "--maps: indices out of range for family " + std::to_string(family));
            try {
                const auto rep = criterion_cscm(fam[pair[0]], fam[pair[1]], g.tol.value_or(1e-9));
                result << detail::to_json(rep).dump(2) << "\n";
                if (!rep.pass) {
                    err << "criterion not satisfied: " << rep.failed_stage << "\n";
                    code = failed;
                }
            } catch (const unsupported& e) {
                result << json{{"pass", false}, {"failed_stage", e.what()}}.dump(2) << "\n";
                err << "criterion not applicable: " << e.what() << "\n";
                code = failed;
            }
        } else if (pressure->parsed()) {
            const auto spec = io::load_system(system_path);
            const int k = g.k.value_or(4);
            const int depth = std::max(g.depth.value_or(k), k);
            const auto tree = io::make_tree(spec, depth, g.seed);
            const double hi = s_max.value_or(double(spec.d));
            require(s_min >= 0.0 && hi >= s_min, "pressure: need 0 <= s-min <= s-max");
            std::vector<double> grid;
            const auto steps = std::size_t(std::floor((hi - s_min) / s_step + 1e-9));
            for (std::size_t i = 0; i <= steps; ++i)
                grid.push_back(s_min + double(i) * s_step);
            const auto curve = pressure_curve(tree, grid, k, enumeration);
            result << "s,p,diag\n";
            for (std::size_t i = 0; i < grid.size(); ++i)
                result << io::format_double(curve.s[i]) << ',' << io::format_double(curve.p[i]) << ','
                       << (std::isnan(curve.diagnostic[i]) ? std::string("nan") : io::format_double(curve.diagnostic[i]))
                       << '\n';
        } else if (dim->parsed()) {
            const auto spec = io::load_system(system_path);
            if (spec.bounds && !(spec.bounds->sigma_hi < 0.5))
                throw invalid_input("bounds.sigma_hi = " + std::to_string(spec.bounds->sigma_hi)
                                    + ": the dimension formula requires 0 < sigma_lo <= sigma_hi < 1/2");
            const int k = g.k.value_or(6);
            const int depth = std::max(g.depth.value_or(10), k);
            const auto tree = io::make_tree(spec, depth, g.seed);
            const auto [lo, hi] = tree.sigma_range();
            if (!(hi < 0.5))
                throw hypothesis_violation("maps have sigma_1 = " + std::to_string(hi)
                                           + ": the dimension formula requires 0 < sigma_lo <= sigma_hi < 1/2");
            DimensionOptions opt;
            opt.zero_tol = g.tol.value_or(opt.zero_tol);
            opt.enumeration = enumeration;
            const auto rep = dimension_report(tree, k, depth, opt);
            result << detail::to_json(rep).dump(2) << "\n";
            if (!rep.agrees)
                err << rep.note << "\n";
        } else if (simulate->parsed()) {
            const auto spec = io::load_system(system_path);
            require(spec.graph.has_value(), "simulate: the system has no graph");
            const auto gs = io::graph_system(spec, g.seed);
            const auto length = std::size_t(g.depth.value_or(10000));
            const auto seq = sample_graph_sequence(gs, g.seed, length);
            const auto necks = detect_necks(seq, gs, thinning);
            const auto gaps = neck_gaps(necks);
            const auto tree = build_code_tree(gs, seq, gs.v0(), int(length), thinning);
            std::size_t max_kinds = 0;
            for (const auto& level : tree.levels())
                max_kinds = std::max(max_kinds, level.size());
            result << "index,gap\n";
            double mean = 0.0;
            for (std::size_t i = 0; i < gaps.size(); ++i) {
                result << i << ',' << gaps[i] << '\n';
                mean += gaps[i];
            }
            mean = gaps.empty() ? 0.0 : mean / double(gaps.size());
            err << "length " << length << ", necks " << necks.size() << ", mean gap " << mean
                << " (expected " << double(thinning) / gs.neck_probability() << "), distinct subtrees per level <= "
                << max_kinds << "\n";
        } else if (boxdim->parsed()) {
            std::ifstream in(points_path);
            const auto pts = io::read_points_csv(in);
            require(!pts.empty(), "boxdim: no points in " + points_path);
            const auto window = cloud_window(pts.size(), int(pts.front().size()));
            const auto fit = box_dimension(pts, j_min.value_or(window.first), j_max.value_or(window.second));
            result << detail::to_json(fit, pts.size(), int(pts.front().size())).dump(2) << "\n";
        } else if (points->parsed()) {
            const auto spec = io::load_system(system_path);
            const int depth = g.depth.value_or(8);
            const auto tree = io::make_tree(spec, depth, g.seed);
            std::vector<WeightedPoint> pts;
            if (g.samples)
                pts = sample_measure_points(tree, neck, weight_s.value_or(tree.dim()), *g.samples, g.seed, enumeration);
            else
                pts = attractor_points(tree, depth, weight_s, enumeration);
            io::write_points_csv(result, pts, spec.d);
        }
    } catch (const invalid_input& e) {
        err << "affdim: invalid input: " << e.what() << "\n";
        return bad_input;
    } catch (const hypothesis_violation& e) {
        err << "affdim: hypothesis violated: " << e.what() << "\n";
        return failed;
    } catch (const std::exception& e) {
        err << "affdim: " << e.what() << "\n";
        return failed;
    }

    if (g.out.empty()) {
        out << result.str();
    } else {
        std::ofstream f(g.out, std::ios::binary);
        if (!f) {
            err << "affdim: cannot write " << g.out << "\n";
            return bad_input;
        }
        f << result.str();
    }
    return code;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace affdim::cli

#endif  // AFFDIM_CLI_HPP
