#ifndef AFFDIM_IO_HPP
#define AFFDIM_IO_HPP

//
// JSON system documents and CSV helpers.
//
// {
//   "d": 2,
//   "families": [{"label": 0, "maps": [{"T": [[..],[..]], "translation_class": 1}, ...]}],
//   "translations": {"1": [0.0, 0.5], ...},              optional
//   "graph": {"V": 2, "v0": 0,                             optional
//             "labels": [{"prob": 0.3, "family": 0,
//                         "edges": [{"from": 0, "to": 0, "map": 1}, ...]}]},
//   "bounds": {"sigma_lo": 0.1, "sigma_hi": 0.45}          optional
// }
//
// Vertices and map indices are 0-based. A graph label uses the family with
// the same position unless "family" is given.
//

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <affdim/code_tree.hpp>
#include <affdim/common.hpp>
#include <affdim/random.hpp>

namespace affdim::io {

using json = nlohmann::ordered_json;

struct MapSpec {
    Matrix T;
    int translation_class = 0;
    bool operator==(const MapSpec&) const = default;
};

struct FamilySpec {
    int label = 0;
    std::vector<MapSpec> maps;
    bool operator==(const FamilySpec&) const = default;
};

struct EdgeSpec {
    int from = 0;
    int to = 0;
    int map = 0;
    bool operator==(const EdgeSpec&) const = default;
};

struct GraphLabelSpec {
    double prob = 0.0;
    int family = 0;
    std::vector<EdgeSpec> edges;
    bool operator==(const GraphLabelSpec&) const = default;
};

struct GraphSpec {
    int V = 1;
    int v0 = 0;
    std::vector<GraphLabelSpec> labels;
    bool operator==(const GraphSpec&) const = default;
};

struct BoundsSpec {
    double sigma_lo = 0.0;
    double sigma_hi = 1.0;
    bool operator==(const BoundsSpec&) const = default;
};

struct SystemSpec {
    int d = 0;
    std::vector<FamilySpec> families;
    std::map<int, Vector> translations;  // empty: assigned from the seed
    std::optional<GraphSpec> graph;
    std::optional<BoundsSpec> bounds;

    bool operator==(const SystemSpec& o) const
    {
        if (d != o.d || families != o.families || graph != o.graph || bounds != o.bounds
            || translations.size() != o.translations.size())
            return false;
        for (const auto& [c, a] : translations) {
            auto it = o.translations.find(c);
            if (it == o.translations.end() || it->second != a)
                return false;
        }
        return true;
    }

    ContractionBounds contraction_bounds() const
    {
        return bounds ? ContractionBounds{bounds->sigma_lo, bounds->sigma_hi} : ContractionBounds{};
    }

    std::vector<int> translation_classes() const
    {
        std::vector<int> out;
        for (const auto& f : families)
            for (const auto& m : f.maps)
                out.push_back(m.translation_class);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

namespace detail {

[[noreturn]] inline void field_error(const std::string& path, const std::string& msg)
{
    throw invalid_input(path + ": " + msg);
}

inline const json& member(const json& j, const std::string& path, const char* key)
{
    if (!j.is_object())
        field_error(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end())
        field_error(path, std::string("missing required field \"") + key + "\"");
    return *it;
}

inline int as_int(const json& j, const std::string& path)
{
    if (!j.is_number_integer())
        field_error(path, "expected an integer");
    return j.get<int>();
}

inline double as_number(const json& j, const std::string& path)
{
    if (!j.is_number())
        field_error(path, "expected a number");
    return j.get<double>();
}

inline Vector as_vector(const json& j, const std::string& path, int d)
{
    if (!j.is_array() || int(j.size()) != d)
        field_error(path, "expected an array of " + std::to_string(d) + " numbers");
    Vector v(d);
    for (int i = 0; i < d; ++i)
        v[i] = as_number(j[std::size_t(i)], path + "[" + std::to_string(i) + "]");
    return v;
}

inline Matrix as_matrix(const json& j, const std::string& path, int d)
{
    if (!j.is_array() || int(j.size()) != d)
        field_error(path, "expected " + std::to_string(d) + " rows (row-major " + std::to_string(d) + "x"
                              + std::to_string(d) + " array)");
    Matrix t(d, d);
    for (int r = 0; r < d; ++r)
        t.row(r) = as_vector(j[std::size_t(r)], path + "[" + std::to_string(r) + "]", d).transpose();
    return t;
}

inline void check_known(const json& j, const std::string& path, std::initializer_list<const char*> keys)
{
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            known = known || it.key() == k;
        if (!known)
            field_error(path, "unknown field \"" + it.key() + "\"");
    }
}

}  // namespace detail

inline Vector translation_for(const SystemSpec& spec, int cls, std::uint64_t seed);
inline IfsFamily family_of(const SystemSpec& spec, std::size_t index, std::uint64_t seed);

//
// checks every invariant of the document; throws invalid_input naming the field
//
inline void validate(const SystemSpec& spec)
{
    using detail::field_error;
    if (spec.d < 1 || spec.d > max_dimension)
        field_error("d", "dimension must lie in [1, " + std::to_string(max_dimension) + "]");
    if (spec.families.empty())
        field_error("families", "at least one family is required");
    if (spec.bounds) {
        const auto& b = *spec.bounds;
        if (!(b.sigma_lo >= 0.0 && b.sigma_lo <= b.sigma_hi && b.sigma_hi < 1.0))
            field_error("bounds", "need 0 <= sigma_lo <= sigma_hi < 1");
    }
    const auto cb = spec.contraction_bounds();
    for (std::size_t f = 0; f < spec.families.size(); ++f) {
        const std::string fp = "families[" + std::to_string(f) + "]";
        const auto& fam = spec.families[f];
        if (fam.maps.empty())
            field_error(fp + ".maps", "at least one map is required");
        if (fam.maps.size() > 64)
            field_error(fp + ".maps", "more than 64 maps");
        for (std::size_t i = 0; i < fam.maps.size(); ++i) {
            const std::string mp = fp + ".maps[" + std::to_string(i) + "]";
            const auto& t = fam.maps[i].T;
            if (t.rows() != spec.d || t.cols() != spec.d)
                field_error(mp + ".T", "expected a " + std::to_string(spec.d) + "x" + std::to_string(spec.d) + " matrix");
            SingularSpectrum sp = [&] {
                try {
                    return affdim::detail::spectrum_unchecked(t);
                } catch (const singular_map&) {
                    field_error(mp + ".T", "matrix is singular");
                }
            }();
            // declared bounds are enforced here; contraction itself is checked
            // when a code tree is built
            if (spec.bounds) {
                if (sp.largest() > cb.sigma_hi * (1.0 + 1e-12))
                    field_error(mp + ".T", "sigma_1 = " + std::to_string(sp.largest()) + " exceeds bounds.sigma_hi");
                if (sp.smallest() < cb.sigma_lo * (1.0 - 1e-12))
                    field_error(mp + ".T", "sigma_d = " + std::to_string(sp.smallest()) + " is below bounds.sigma_lo");
            }
            for (std::size_t j = 0; j < i; ++j)
                if (fam.maps[j].translation_class == fam.maps[i].translation_class)
                    field_error(mp + ".translation_class", "duplicates the class of map " + std::to_string(j)
                                                               + " in the same family");
        }
    }
    for (const auto& [c, a] : spec.translations)
        if (a.size() != spec.d)
            field_error("translations." + std::to_string(c), "wrong dimension");
    if (!spec.translations.empty())
        for (int c : spec.translation_classes())
            if (!spec.translations.count(c))
                field_error("translations", "no vector for translation class " + std::to_string(c));

    if (spec.graph) {
        const auto& g = *spec.graph;
        if (g.V < 1)
            field_error("graph.V", "needs at least one vertex");
        if (g.v0 < 0 || g.v0 >= g.V)
            field_error("graph.v0", "vertex out of range");
        if (g.labels.empty())
            field_error("graph.labels", "at least one labeled graph is required");
        double total = 0.0;
        double neck = 0.0;
        for (std::size_t l = 0; l < g.labels.size(); ++l) {
            const std::string lp = "graph.labels[" + std::to_string(l) + "]";
            const auto& lab = g.labels[l];
            if (!(lab.prob >= 0.0))
                field_error(lp + ".prob", "probability must be >= 0");
            total += lab.prob;
            if (lab.family < 0 || std::size_t(lab.family) >= spec.families.size())
                field_error(lp + ".family", "family index out of range");
            const auto nmaps = spec.families[std::size_t(lab.family)].maps.size();
            std::vector<int> out_deg(static_cast<std::size_t>(g.V), 0);
            bool all_to_v0 = true;
            for (std::size_t e = 0; e < lab.edges.size(); ++e) {
                const std::string ep = lp + ".edges[" + std::to_string(e) + "]";
                const auto& edge = lab.edges[e];
                if (edge.from < 0 || edge.from >= g.V)
                    field_error(ep + ".from", "vertex out of range");
                if (edge.to < 0 || edge.to >= g.V)
                    field_error(ep + ".to", "vertex out of range");
                if (edge.map < 0 || std::size_t(edge.map) >= nmaps)
                    field_error(ep + ".map", "map index out of range for family " + std::to_string(lab.family));
                ++out_deg[std::size_t(edge.from)];
                all_to_v0 = all_to_v0 && edge.to == g.v0;
            }
            if (lab.prob > 0.0)
                for (int v = 0; v < g.V; ++v)
                    if (out_deg[std::size_t(v)] == 0)
                        field_error(lp + ".edges", "vertex " + std::to_string(v) + " has no outgoing edge");
            if (all_to_v0)
                neck += lab.prob;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            std::ostringstream os;
            os.precision(17);
            os << "probabilities must sum to 1 within 1e-9 (sum is " << total << ")";
            field_error("graph.labels[*].prob", os.str());
        }
        if (!(neck > 0.0))
            field_error("graph.labels", "the neck graphs (every edge ending at v0) must have positive probability");
    }
}

inline SystemSpec parse_system_json(const json& j)
{
    using namespace detail;
    if (!j.is_object())
        field_error("$", "the system document must be a JSON object");
    check_known(j, "$", {"d", "families", "translations", "graph", "bounds"});
    SystemSpec spec;
    spec.d = as_int(member(j, "$", "d"), "d");
    if (spec.d < 1 || spec.d > max_dimension)
        field_error("d", "dimension must lie in [1, " + std::to_string(max_dimension) + "]");
    const int d = spec.d;

    const auto& fams = member(j, "$", "families");
    if (!fams.is_array())
        field_error("families", "expected an array");
    for (std::size_t f = 0; f < fams.size(); ++f) {
        const std::string fp = "families[" + std::to_string(f) + "]";
        check_known(fams[f], fp, {"label", "maps"});
        FamilySpec fs;
        fs.label = fams[f].contains("label") ? as_int(fams[f]["label"], fp + ".label") : int(f);
        const auto& maps = member(fams[f], fp, "maps");
        if (!maps.is_array())
            field_error(fp + ".maps", "expected an array");
        for (std::size_t i = 0; i < maps.size(); ++i) {
            const std::string mp = fp + ".maps[" + std::to_string(i) + "]";
            check_known(maps[i], mp, {"T", "translation_class"});
            MapSpec ms;
            ms.T = as_matrix(member(maps[i], mp, "T"), mp + ".T", d);
            ms.translation_class = as_int(member(maps[i], mp, "translation_class"), mp + ".translation_class");
            fs.maps.push_back(std::move(ms));
        }
        spec.families.push_back(std::move(fs));
    }

    if (j.contains("translations")) {
        const auto& tr = j["translations"];
        if (!tr.is_object())
            field_error("translations", "expected an object mapping class ids to vectors");
        for (auto it = tr.begin(); it != tr.end(); ++it) {
            const std::string tp = "translations." + it.key();
            int cls = 0;
            try {
                std::size_t used = 0;
                cls = std::stoi(it.key(), &used);
                if (used != it.key().size())
                    throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                field_error(tp, "class id must be an integer");
            }
            spec.translations[cls] = as_vector(it.value(), tp, d);
        }
    }

    if (j.contains("bounds")) {
        const auto& b = j["bounds"];
        check_known(b, "bounds", {"sigma_lo", "sigma_hi"});
        BoundsSpec bs;
        bs.sigma_lo = b.contains("sigma_lo") ? as_number(b["sigma_lo"], "bounds.sigma_lo") : 0.0;
        bs.sigma_hi = b.contains("sigma_hi") ? as_number(b["sigma_hi"], "bounds.sigma_hi") : 1.0;
        spec.bounds = bs;
    }

    if (j.contains("graph")) {
        const auto& g = j["graph"];
        check_known(g, "graph", {"V", "v0", "labels"});
        GraphSpec gs;
        gs.V = as_int(member(g, "graph", "V"), "graph.V");
        gs.v0 = g.contains("v0") ? as_int(g["v0"], "graph.v0") : 0;
        const auto& labels = member(g, "graph", "labels");
        if (!labels.is_array())
            field_error("graph.labels", "expected an array");
        for (std::size_t l = 0; l < labels.size(); ++l) {
            const std::string lp = "graph.labels[" + std::to_string(l) + "]";
            check_known(labels[l], lp, {"prob", "family", "edges"});
            GraphLabelSpec ls;
            ls.prob = as_number(member(labels[l], lp, "prob"), lp + ".prob");
            ls.family = labels[l].contains("family") ? as_int(labels[l]["family"], lp + ".family") : int(l);
            const auto& edges = member(labels[l], lp, "edges");
            if (!edges.is_array())
                field_error(lp + ".edges", "expected an array");
            for (std::size_t e = 0; e < edges.size(); ++e) {
                const std::string ep = lp + ".edges[" + std::to_string(e) + "]";
                check_known(edges[e], ep, {"from", "to", "map"});
                EdgeSpec es;
                es.from = as_int(member(edges[e], ep, "from"), ep + ".from");
                es.to = as_int(member(edges[e], ep, "to"), ep + ".to");
                es.map = as_int(member(edges[e], ep, "map"), ep + ".map");
                ls.edges.push_back(es);
            }
            gs.labels.push_back(std::move(ls));
        }
        spec.graph = std::move(gs);
    }

    validate(spec);
    return spec;
}

inline SystemSpec parse_system(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // report line and column of the byte offset
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw invalid_input("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col)
                            + ": " + e.what());
    }
    return parse_system_json(j);
}

inline SystemSpec load_system(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw invalid_input("cannot open system file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_system(ss.str());
}

inline json to_json(const SystemSpec& spec)
{
    auto row_major = [](const Matrix& t) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < t.cols(); ++c)
                row.push_back(t(r, c));
            rows.push_back(row);
        }
        return rows;
    };
    auto vec = [](const Vector& v) {
        json a = json::array();
        for (Eigen::Index i = 0; i < v.size(); ++i)
            a.push_back(v[i]);
        return a;
    };
    json j;
    j["d"] = spec.d;
    j["families"] = json::array();
    for (const auto& f : spec.families) {
        json fj;
        fj["label"] = f.label;
        fj["maps"] = json::array();
        for (const auto& m : f.maps)
            fj["maps"].push_back({{"T", row_major(m.T)}, {"translation_class", m.translation_class}});
        j["families"].push_back(fj);
    }
    if (!spec.translations.empty()) {
        j["translations"] = json::object();
        for (const auto& [c, a] : spec.translations)
            j["translations"][std::to_string(c)] = vec(a);
    }
    if (spec.graph) {
        json g;
        g["V"] = spec.graph->V;
        g["v0"] = spec.graph->v0;
        g["labels"] = json::array();
        for (const auto& l : spec.graph->labels) {
            json lj;
            lj["prob"] = l.prob;
            lj["family"] = l.family;
            lj["edges"] = json::array();
            for (const auto& e : l.edges)
                lj["edges"].push_back({{"from", e.from}, {"to", e.to}, {"map", e.map}});
            g["labels"].push_back(lj);
        }
        j["graph"] = g;
    }
    if (spec.bounds)
        j["bounds"] = {{"sigma_lo", spec.bounds->sigma_lo}, {"sigma_hi", spec.bounds->sigma_hi}};
    return j;
}

inline std::string serialize(const SystemSpec& spec) { return to_json(spec).dump(2); }

//
// binding to library objects
//

// explicit translation, or a uniform draw in [0,1]^d from (seed, class)
inline Vector translation_for(const SystemSpec& spec, int cls, std::uint64_t seed)
{
    auto it = spec.translations.find(cls);
    if (it != spec.translations.end())
        return it->second;
    auto rng = stream(seed, std::uint64_t(std::int64_t(cls)));
    return uniform_vector(rng, spec.d, 0.0, 1.0);
}

inline IfsFamily family_of(const SystemSpec& spec, std::size_t index, std::uint64_t seed)
{
    require(index < spec.families.size(), "family index " + std::to_string(index) + " out of range");
    const auto& fs = spec.families[index];
    IfsFamily fam;
    fam.label = fs.label;
    for (const auto& m : fs.maps)
        fam.maps.push_back({m.T, m.translation_class, translation_for(spec, m.translation_class, seed)});
    return fam;
}

inline LinearFamily linear_family(const SystemSpec& spec, std::size_t index)
{
    require(index < spec.families.size(), "family index " + std::to_string(index) + " out of range");
    std::vector<Matrix> maps;
    for (const auto& m : spec.families[index].maps)
        maps.push_back(m.T);
    return LinearFamily(spec.d, std::move(maps));
}

inline GraphSystem graph_system(const SystemSpec& spec, std::uint64_t seed)
{
    require(spec.graph.has_value(), "the system has no graph");
    const auto& g = *spec.graph;
    std::vector<LabeledGraph> labels;
    std::vector<double> mu;
    for (const auto& l : g.labels) {
        const auto fam = family_of(spec, std::size_t(l.family), seed);
        LabeledGraph lg;
        for (const auto& e : l.edges)
            lg.edges.push_back({e.from, e.to, fam.maps[std::size_t(e.map)]});
        labels.push_back(std::move(lg));
        mu.push_back(l.prob);
    }
    return GraphSystem(spec.d, g.V, g.v0, std::move(labels), std::move(mu), spec.contraction_bounds());
}

// constant tree of family 0, or the graph-directed tree from v0 for the
// label sequence drawn from `seed`
inline CodeTree make_tree(const SystemSpec& spec, int depth, std::uint64_t seed, int thinning = 1)
{
    if (!spec.graph)
        return deterministic_tree(family_of(spec, 0, seed), depth, spec.contraction_bounds());
    const auto gs = graph_system(spec, seed);
    const auto g = sample_graph_sequence(gs, seed, std::size_t(depth));
    return build_code_tree(gs, g, gs.v0(), depth, thinning);
}

//
// CSV
//
// shortest representation that reads back to the same double
inline std::string format_double(double x)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline void write_points_csv(std::ostream& os, const std::vector<WeightedPoint>& pts, int d)
{
    for (int i = 1; i <= d; ++i)
        os << 'x' << i << ',';
    os << "weight\n";
    for (const auto& p : pts) {
        for (int i = 0; i < d; ++i)
            os << format_double(p.point[i]) << ',';
        os << format_double(p.weight) << '\n';
    }
}

// reads x1,..,xd rows; an optional header whose last column is "weight"
// marks a trailing weight column, which is ignored
inline std::vector<Vector> read_points_csv(std::istream& is)
{
    std::vector<Vector> pts;
    std::string line;
    std::size_t lineno = 0;
    bool weighted = false;
    int d = -1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        std::vector<double> vals;
        bool numeric = true;
        for (const auto& c : cells) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(c, &used));
                numeric = numeric && used == c.size();
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (pts.empty() && d < 0 && lineno == 1) {
                weighted = !cells.empty() && cells.back() == "weight";
                continue;
            }
            throw invalid_input("points CSV line " + std::to_string(lineno) + ": non-numeric value");
        }
        if (weighted)
            vals.pop_back();
        if (d < 0)
            d = int(vals.size());
        if (int(vals.size()) != d || d < 1)
            throw invalid_input("points CSV line " + std::to_string(lineno) + ": expected " + std::to_string(d)
                                + " coordinates");
        pts.push_back(Eigen::Map<const Vector>(vals.data(), d));
    }
    return pts;
}

}  // namespace affdim::io

#endif  // AFFDIM_IO_HPP
