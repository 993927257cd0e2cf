#ifndef AFFDIM_CODE_TREE_HPP
#define AFFDIM_CODE_TREE_HPP

//
// Affine code trees realized to a finite depth.
//
// A node of a code tree carries an IFS family; its children correspond to
// the maps of that family. Trees produced here have at most a handful of
// distinct sub code trees per level (one for deterministic trees, at most V
// for graph-directed ones), so a realization stores, per level, the list of
// node kinds: the family at the node and the kind of each child one level
// down. Every node at the same level with the same kind roots the same sub
// code tree; a neck level is a level with exactly one reachable kind.
//
// Words are 0-based child indices. Level-k words have length k.
//

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <affdim/common.hpp>
#include <affdim/fs_checker.hpp>
#include <affdim/parallel.hpp>
#include <affdim/random.hpp>
#include <affdim/singular_values.hpp>

namespace affdim {

// f(x) = T x + a
struct AffineMap {
    Matrix linear;
    int translation_class = 0;
    Vector translation;

    int dim() const { return int(linear.rows()); }
    Vector operator()(const Vector& x) const { return linear * x + translation; }
};

// singular-value window every map must respect
struct ContractionBounds {
    double sigma_lo = 0.0;  // sigma_d(T) >= sigma_lo
    double sigma_hi = 1.0;  // sigma_1(T) <= sigma_hi, and always < 1
};

inline void validate_map(const AffineMap& f, const ContractionBounds& b, const std::string& where)
{
    require_square(f.linear, (where + ": linear part").c_str());
    require(f.translation.size() == f.linear.rows(), where + ": translation has the wrong dimension");
    const auto sp = detail::spectrum_unchecked(f.linear);
    require(sp.largest() < 1.0, where + ": map is not a contraction (sigma_1 = " + std::to_string(sp.largest()) + ")");
    require(sp.largest() <= b.sigma_hi * (1.0 + 1e-12),
            where + ": sigma_1 = " + std::to_string(sp.largest()) + " exceeds the bound sigma_hi = " + std::to_string(b.sigma_hi));
    require(sp.smallest() >= b.sigma_lo * (1.0 - 1e-12),
            where + ": sigma_d = " + std::to_string(sp.smallest()) + " is below the bound sigma_lo = " + std::to_string(b.sigma_lo));
}

struct IfsFamily {
    int label = 0;
    std::vector<AffineMap> maps;

    std::size_t size() const { return maps.size(); }
};

inline void validate_family(const IfsFamily& fam, int d, const ContractionBounds& b, std::size_t max_maps = 64)
{
    const std::string where = "family " + std::to_string(fam.label);
    require(!fam.maps.empty(), where + ": needs at least one map");
    require(fam.maps.size() <= max_maps, where + ": more maps than the global cap M");
    for (std::size_t i = 0; i < fam.maps.size(); ++i) {
        require(fam.maps[i].dim() == d, where + ": map " + std::to_string(i) + " has the wrong dimension");
        validate_map(fam.maps[i], b, where + " map " + std::to_string(i));
        for (std::size_t j = 0; j < i; ++j)
            require(fam.maps[i].translation_class != fam.maps[j].translation_class,
                    where + ": maps " + std::to_string(j) + " and " + std::to_string(i)
                        + " share a translation class");
    }
}

//
// graph-directed random system: i.i.d. labeled multigraphs on V vertices
//
struct GraphEdge {
    int from = 0;
    int to = 0;
    AffineMap map;
};

struct LabeledGraph {
    std::vector<GraphEdge> edges;
};

class GraphSystem {
public:
    GraphSystem(int d, int vertices, int v0, std::vector<LabeledGraph> labels, std::vector<double> mu,
                ContractionBounds bounds = {})
        : d_(d), vertices_(vertices), v0_(v0), labels_(std::move(labels)), mu_(std::move(mu)), bounds_(bounds)
    {
        require_dimension(d_);
        require(vertices_ >= 1, "graph system: needs at least one vertex");
        require(v0_ >= 0 && v0_ < vertices_, "graph system: v0 out of range");
        require(!labels_.empty(), "graph system: needs at least one labeled graph");
        require(mu_.size() == labels_.size(), "graph system: one probability per labeled graph required");
        double total = 0.0;
        for (double p : mu_) {
            require(p >= 0.0, "graph system: negative probability");
            total += p;
        }
        require(std::abs(total - 1.0) <= 1e-9, "graph system: probabilities must sum to 1 (got " + std::to_string(total) + ")");

        double neck_mass = 0.0;
        for (std::size_t l = 0; l < labels_.size(); ++l) {
            const auto& g = labels_[l];
            std::vector<int> out_deg(static_cast<std::size_t>(vertices_), 0);
            for (std::size_t e = 0; e < g.edges.size(); ++e) {
                const auto& edge = g.edges[e];
                const std::string where = "graph " + std::to_string(l) + " edge " + std::to_string(e);
                require(edge.from >= 0 && edge.from < vertices_ && edge.to >= 0 && edge.to < vertices_,
                        where + ": vertex out of range");
                require(edge.map.dim() == d_, where + ": map has the wrong dimension");
                validate_map(edge.map, bounds_, where);
                ++out_deg[std::size_t(edge.from)];
            }
            if (mu_[l] > 0.0)
                for (int v = 0; v < vertices_; ++v)
                    require(out_deg[std::size_t(v)] > 0, "graph " + std::to_string(l) + ": vertex " + std::to_string(v)
                                                             + " has no outgoing edge");
            max_out_ = std::max(max_out_, *std::max_element(out_deg.begin(), out_deg.end()));
            if (is_neck_label(l))
                neck_mass += mu_[l];
            // translation classes of edges leaving the same vertex must differ
            for (int v = 0; v < vertices_; ++v) {
                const auto fam = family(int(l), v);
                for (std::size_t i = 0; i < fam.maps.size(); ++i)
                    for (std::size_t j = 0; j < i; ++j)
                        require(fam.maps[i].translation_class != fam.maps[j].translation_class,
                                "graph " + std::to_string(l) + ": edges leaving vertex " + std::to_string(v)
                                    + " share a translation class");
            }
        }
        require(neck_mass > 0.0, "graph system: the neck graphs (all edges ending at v0) have zero probability");
        neck_mass_ = neck_mass;
    }

    int dim() const { return d_; }
    int vertices() const { return vertices_; }
    int v0() const { return v0_; }
    const std::vector<LabeledGraph>& labels() const { return labels_; }
    const std::vector<double>& mu() const { return mu_; }
    int max_out_degree() const { return max_out_; }
    double neck_probability() const { return neck_mass_; }

    // every edge of graph l terminates at v0
    bool is_neck_label(std::size_t l) const
    {
        const auto& g = labels_[l];
        return std::all_of(g.edges.begin(), g.edges.end(), [&](const GraphEdge& e) { return e.to == v0_; });
    }

    // the family F_v^l: maps of the edges leaving v, in edge order
    IfsFamily family(int l, int v) const
    {
        IfsFamily fam;
        fam.label = l * vertices_ + v;
        for (const auto& e : labels_[std::size_t(l)].edges)
            if (e.from == v)
                fam.maps.push_back(e.map);
        return fam;
    }

    std::vector<int> child_vertices(int l, int v) const
    {
        std::vector<int> out;
        for (const auto& e : labels_[std::size_t(l)].edges)
            if (e.from == v)
                out.push_back(e.to);
        return out;
    }

private:
    int d_;
    int vertices_;
    int v0_;
    std::vector<LabeledGraph> labels_;
    std::vector<double> mu_;
    ContractionBounds bounds_;
    int max_out_ = 0;
    double neck_mass_ = 0.0;
};

class CodeTree;
CodeTree shift_first_neck(const CodeTree& tree);

//
// finite-depth code tree realization
//
class CodeTree {
public:
    struct Kind {
        std::size_t family = 0;       // index into families()
        std::vector<int> child_kind;  // kind index at the next level, -1 below the realized depth
    };

    CodeTree(int d, std::vector<IfsFamily> families, std::vector<std::vector<Kind>> levels, std::vector<int> necks)
        : d_(d), families_(std::move(families)), levels_(std::move(levels)), necks_(std::move(necks))
    {
        require_dimension(d_);
        require(!levels_.empty(), "code tree: depth must be >= 1");
        require(levels_.front().size() == 1, "code tree: the root level has exactly one node");
        for (std::size_t n = 0; n < levels_.size(); ++n) {
            require(!levels_[n].empty(), "code tree: empty level");
            for (const auto& k : levels_[n]) {
                require(k.family < families_.size(), "code tree: family index out of range");
                require(k.child_kind.size() == families_[k.family].maps.size(),
                        "code tree: node must have one child per map");
                for (int c : k.child_kind)
                    require(n + 1 == levels_.size() ? c == -1 : (c >= 0 && std::size_t(c) < levels_[n + 1].size()),
                            "code tree: child kind out of range");
            }
        }
        for (std::size_t i = 0; i < necks_.size(); ++i) {
            require(necks_[i] >= 1 && necks_[i] <= depth(), "code tree: neck level outside the realized depth");
            require(i == 0 || necks_[i - 1] < necks_[i], "code tree: neck list must be strictly increasing");
            require(necks_[i] == depth() || levels_[std::size_t(necks_[i])].size() == 1,
                    "code tree: level " + std::to_string(necks_[i]) + " is listed as a neck but roots distinct sub code trees");
        }
    }

    int dim() const { return d_; }
    int depth() const { return int(levels_.size()); }
    const std::vector<IfsFamily>& families() const { return families_; }
    const std::vector<std::vector<Kind>>& levels() const { return levels_; }
    const std::vector<int>& necks() const { return necks_; }

    const Kind& kind(int level, int k) const { return levels_[std::size_t(level)][std::size_t(k)]; }
    const IfsFamily& family_of(int level, int k) const { return families_[kind(level, k).family]; }

    // kind of the node reached by `word`, validated
    int kind_of(std::span<const int> word) const
    {
        require(int(word.size()) < depth() + 1, "word longer than the realized depth");
        int k = 0;
        for (std::size_t l = 0; l < word.size(); ++l) {
            const auto& node = kind(int(l), k);
            require(word[l] >= 0 && std::size_t(word[l]) < node.child_kind.size(),
                    "word is not in the tree: letter " + std::to_string(word[l]) + " at position " + std::to_string(l));
            k = node.child_kind[std::size_t(word[l])];
        }
        return k;
    }

    // label omega(word) of an internal node
    int label_at(std::span<const int> word) const
    {
        require(int(word.size()) < depth(), "label_at: word reaches below the realized depth");
        return family_of(int(word.size()), kind_of(word)).label;
    }

    // largest sigma_1 and smallest sigma_d over all maps in the tree
    std::pair<double, double> sigma_range() const
    {
        double hi = 0.0, lo = std::numeric_limits<double>::infinity();
        for (const auto& f : families_)
            for (const auto& m : f.maps) {
                const auto sp = detail::spectrum_unchecked(m.linear);
                hi = std::max(hi, sp.largest());
                lo = std::min(lo, sp.smallest());
            }
        return {lo, hi};
    }

    // number of level-k words (as a double, may be huge)
    double word_count(int k) const
    {
        require(k >= 0 && k <= depth(), "word_count: level outside the realized depth");
        std::vector<double> count(levels_[0].size(), 1.0);
        for (int n = 0; n < k; ++n) {
            std::vector<double> next(n + 1 < depth() ? levels_[std::size_t(n + 1)].size() : 1, 0.0);
            double leaves = 0.0;
            for (std::size_t i = 0; i < levels_[std::size_t(n)].size(); ++i)
                for (int c : levels_[std::size_t(n)][i].child_kind) {
                    if (c >= 0)
                        next[std::size_t(c)] += count[i];
                    leaves += count[i];
                }
            if (n + 1 == depth())
                return leaves;
            count = std::move(next);
        }
        return std::accumulate(count.begin(), count.end(), 0.0);
    }

    friend bool operator==(const CodeTree& a, const CodeTree& b)
    {
        return a.d_ == b.d_ && a.necks_ == b.necks_ && a.structure_key() == b.structure_key();
    }

private:
    // labels and maps, level by level, in a canonical traversal
    std::vector<double> structure_key() const
    {
        std::vector<double> key;
        for (const auto& lvl : levels_)
            for (const auto& k : lvl) {
                const auto& fam = families_[k.family];
                key.push_back(double(fam.label));
                for (const auto& m : fam.maps) {
                    key.insert(key.end(), m.linear.data(), m.linear.data() + m.linear.size());
                    key.insert(key.end(), m.translation.data(), m.translation.data() + m.translation.size());
                    key.push_back(double(m.translation_class));
                }
                key.insert(key.end(), k.child_kind.begin(), k.child_kind.end());
            }
        return key;
    }

    int d_;
    std::vector<IfsFamily> families_;
    std::vector<std::vector<Kind>> levels_;
    std::vector<int> necks_;
};

//
// constant code tree: the same family at every node
//
inline CodeTree deterministic_tree(const IfsFamily& family, int depth, const ContractionBounds& bounds = {})
{
    require(depth >= 1, "deterministic_tree: depth must be >= 1");
    require(!family.maps.empty(), "deterministic_tree: empty family");
    const int d = family.maps.front().dim();
    require_dimension(d);
    validate_family(family, d, bounds);
    std::vector<std::vector<CodeTree::Kind>> levels(static_cast<std::size_t>(depth));
    for (int n = 0; n < depth; ++n)
        levels[std::size_t(n)].push_back({0, std::vector<int>(family.size(), n + 1 < depth ? 0 : -1)});
    std::vector<int> necks(static_cast<std::size_t>(depth));
    std::iota(necks.begin(), necks.end(), 1);
    return CodeTree(d, {family}, std::move(levels), std::move(necks));
}

// i.i.d. draws from mu
inline std::vector<int> sample_graph_sequence(const GraphSystem& gs, std::uint64_t seed, std::size_t n)
{
    require(n >= 1, "sample_graph_sequence: length must be >= 1");
    Engine rng(splitmix64(seed ^ 0x67726170ull));
    std::discrete_distribution<int> pick(gs.mu().begin(), gs.mu().end());
    std::vector<int> g(n);
    for (auto& x : g)
        x = pick(rng);
    return g;
}

//
// Raw necks: N~_1 = min{n >= 0 : g_n is a neck graph} + 1,
//            N~_{k+1} = min{n >= N~_k : g_n is a neck graph} + 1.
// Returned list: N_k = N~_{thinning * k}. An exhausted sequence simply yields
// fewer necks.
//
inline std::vector<int> detect_necks(std::span<const int> g, const GraphSystem& gs, int thinning = 1)
{
    require(thinning >= 1, "detect_necks: thinning must be >= 1");
    std::vector<int> raw;
    for (std::size_t n = 0; n < g.size(); ++n) {
        require(g[n] >= 0 && std::size_t(g[n]) < gs.labels().size(), "detect_necks: label out of range");
        if (gs.is_neck_label(std::size_t(g[n])))
            raw.push_back(int(n) + 1);
    }
    std::vector<int> out;
    for (std::size_t k = std::size_t(thinning); k <= raw.size(); k += std::size_t(thinning))
        out.push_back(raw[k - 1]);
    return out;
}

// gaps between consecutive raw necks, first gap measured from level 0
inline std::vector<int> neck_gaps(const std::vector<int>& necks)
{
    std::vector<int> gaps;
    int prev = 0;
    for (int n : necks) {
        gaps.push_back(n - prev);
        prev = n;
    }
    return gaps;
}

//
// code tree omega_v generated by the graph sequence g from vertex v:
// a node at level n walking vertex w carries F_w^{g_n}; its l-th child walks
// the terminal vertex of the l-th edge leaving w.
//
inline CodeTree build_code_tree(const GraphSystem& gs, std::span<const int> g, int start_vertex, int depth,
                                int thinning = 1)
{
    require(depth >= 1, "build_code_tree: depth must be >= 1");
    require(std::size_t(depth) <= g.size(), "build_code_tree: depth exceeds the graph sequence length");
    require(start_vertex >= 0 && start_vertex < gs.vertices(), "build_code_tree: start vertex out of range");

    std::vector<IfsFamily> families;
    std::map<std::pair<int, int>, std::size_t> family_index;  // (label, vertex)
    auto family_for = [&](int l, int v) {
        auto [it, fresh] = family_index.try_emplace({l, v}, families.size());
        if (fresh)
            families.push_back(gs.family(l, v));
        return it->second;
    };

    std::vector<std::vector<CodeTree::Kind>> levels(static_cast<std::size_t>(depth));
    std::vector<int> vertex_of_kind{start_vertex};
    for (int n = 0; n < depth; ++n) {
        const int l = g[std::size_t(n)];
        require(l >= 0 && std::size_t(l) < gs.labels().size(), "build_code_tree: label out of range");
        std::vector<int> next_vertices;
        std::map<int, int> kind_of_vertex;
        for (int w : vertex_of_kind) {
            CodeTree::Kind k;
            k.family = family_for(l, w);
            const auto children = gs.child_vertices(l, w);
            if (children.empty())
                throw invalid_input("build_code_tree: vertex " + std::to_string(w) + " has no outgoing edge in graph "
                                    + std::to_string(l));
            for (int c : children) {
                if (n + 1 == depth) {
                    k.child_kind.push_back(-1);
                    continue;
                }
                auto [it, fresh] = kind_of_vertex.try_emplace(c, int(next_vertices.size()));
                if (fresh)
                    next_vertices.push_back(c);
                k.child_kind.push_back(it->second);
            }
            levels[std::size_t(n)].push_back(std::move(k));
        }
        vertex_of_kind = std::move(next_vertices);
    }

    std::vector<int> necks;
    for (int nk : detect_necks(g.first(std::size_t(depth)), gs, thinning))
        if (nk <= depth)
            necks.push_back(nk);
    return CodeTree(gs.dim(), std::move(families), std::move(levels), std::move(necks));
}

//
// T_w = T_{i_1} T_{i_2} ... T_{i_k} and f_w(0) = f_{i_1} o ... o f_{i_k}(0)
//
inline std::pair<Matrix, Vector> compose(const CodeTree& tree, std::span<const int> word)
{
    const int d = tree.dim();
    tree.kind_of(word);  // validates
    Matrix t = Matrix::Identity(d, d);
    Vector p = Vector::Zero(d);
    int k = 0;
    for (std::size_t l = 0; l < word.size(); ++l) {
        const auto& node = tree.kind(int(l), k);
        const auto& f = tree.families()[node.family].maps[std::size_t(word[l])];
        p += t * f.translation;
        t = t * f.linear;
        k = node.child_kind[std::size_t(word[l])];
    }
    return {t, p};
}

//
// enumeration
//

struct EnumerationOptions {
    double cap = 1e7;               // max words enumerated exactly
    int threads = 1;
    std::size_t mc_samples = 1u << 16;  // random paths in Monte-Carlo mode
    std::uint64_t mc_seed = 0;
    bool allow_monte_carlo = true;
};

namespace detail {

struct Prefix {
    int kind = 0;
    Matrix linear;
    Vector point;
    std::vector<int> word;
};

// prefixes at the shallowest level with at least `want` nodes (or level k)
inline std::vector<Prefix> split_prefixes(const CodeTree& tree, int k, std::size_t want)
{
    const int d = tree.dim();
    std::vector<Prefix> cur{{0, Matrix::Identity(d, d), Vector::Zero(d), {}}};
    for (int l = 0; l < k && cur.size() < want; ++l) {
        std::vector<Prefix> next;
        for (const auto& p : cur) {
            const auto& node = tree.kind(l, p.kind);
            const auto& fam = tree.families()[node.family];
            for (std::size_t i = 0; i < fam.maps.size(); ++i) {
                Prefix q;
                q.kind = node.child_kind[i];
                q.point = p.point + p.linear * fam.maps[i].translation;
                q.linear = p.linear * fam.maps[i].linear;
                q.word = p.word;
                q.word.push_back(int(i));
                next.push_back(std::move(q));
            }
        }
        cur = std::move(next);
    }
    return cur;
}

// depth-first walk below a prefix down to level k; visit(linear, point, word)
template <typename Visit>
void walk(const CodeTree& tree, int k, int level, int kind, const Matrix& linear, const Vector& point,
          std::vector<int>& word, Visit& visit)
{
    if (level == k) {
        visit(linear, point, word);
        return;
    }
    const auto& node = tree.kind(level, kind);
    const auto& fam = tree.families()[node.family];
    for (std::size_t i = 0; i < fam.maps.size(); ++i) {
        word.push_back(int(i));
        walk(tree, k, level + 1, node.child_kind[i], linear * fam.maps[i].linear,
             point + linear * fam.maps[i].translation, word, visit);
        word.pop_back();
    }
}

}  // namespace detail

//
// Visit every level-k word (in lexicographic order within each prefix
// block) as visit(block, linear, point, word). Blocks are processed in
// parallel; `block` indexes the prefix so callers can keep per-block state
// and reduce it in order.
//
template <typename Visit>
std::size_t for_each_word_blocked(const CodeTree& tree, int k, int threads, Visit&& visit)
{
    require(k >= 0 && k <= tree.depth(), "enumeration level outside the realized depth");
    const auto prefixes = detail::split_prefixes(tree, k, 256);
    const int split_level = prefixes.empty() ? 0 : int(prefixes.front().word.size());
    parallel_for(prefixes.size(), threads, [&](std::size_t b) {
        const auto& p = prefixes[b];
        std::vector<int> word = p.word;
        auto v = [&](const Matrix& t, const Vector& x, const std::vector<int>& w) { visit(b, t, x, w); };
        detail::walk(tree, k, split_level, p.kind, p.linear, p.point, word, v);
    });
    return prefixes.size();
}

struct PartitionSum {
    double value = 0.0;
    bool exact = true;
    double std_error = 0.0;
    double words = 0.0;
};

//
// S(k, s) = sum over level-k words of Phi^s(T_w); S(0, s) = 1.
// Exact streamed enumeration up to opt.cap words, Monte-Carlo beyond.
//
inline PartitionSum partition_sum(const CodeTree& tree, int k, double s, const EnumerationOptions& opt = {})
{
    require(s >= 0.0, "partition_sum: s must be >= 0");
    require(k >= 0 && k <= tree.depth(), "partition_sum: k outside the realized depth");
    PartitionSum out;
    out.words = tree.word_count(k);
    if (k == 0) {
        out.value = 1.0;
        return out;
    }

    if (out.words <= opt.cap) {
        const auto blocks = detail::split_prefixes(tree, k, 256).size();
        std::vector<double> partial(blocks, 0.0);
        for_each_word_blocked(tree, k, opt.threads, [&](std::size_t b, const Matrix& t, const Vector&, const auto&) {
            partial[b] += detail::spectrum_unchecked(t).phi(s);
        });
        out.value = std::accumulate(partial.begin(), partial.end(), 0.0);
        return out;
    }

    if (!opt.allow_monte_carlo)
        throw cap_exceeded("partition_sum: " + std::to_string(out.words) + " level-" + std::to_string(k)
                           + " words exceed the enumeration cap; use Monte-Carlo mode");

    // uniform random child at each node, importance weight = product of branch counts
    const int d = tree.dim();
    std::vector<double> est(opt.mc_samples);
    parallel_for(opt.mc_samples, opt.threads, [&](std::size_t i) {
        auto rng = stream(opt.mc_seed ^ 0x4d43ull, i);
        Matrix t = Matrix::Identity(d, d);
        double weight = 1.0;
        int kind = 0;
        for (int l = 0; l < k; ++l) {
            const auto& node = tree.kind(l, kind);
            const auto& fam = tree.families()[node.family];
            std::uniform_int_distribution<std::size_t> pick(0, fam.maps.size() - 1);
            const std::size_t c = pick(rng);
            weight *= double(fam.maps.size());
            t = t * fam.maps[c].linear;
            kind = node.child_kind[c];
        }
        est[i] = weight * detail::spectrum_unchecked(t).phi(s);
    });
    const double n = double(est.size());
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / n;
    double var = 0.0;
    for (double e : est)
        var += (e - mean) * (e - mean);
    var /= std::max(1.0, n - 1.0);
    out.value = mean;
    out.exact = false;
    out.std_error = std::sqrt(var / n);
    return out;
}

//
// reroot at the common sub code tree of the first neck and rebase the necks:
// N^_m = N_{m+1} - N_1
//
inline CodeTree shift_first_neck(const CodeTree& tree)
{
    const auto& necks = tree.necks();
    require(necks.size() >= 2, "shift_first_neck: at least two realized necks are required");
    const int n1 = necks[0];
    require(n1 < tree.depth(), "shift_first_neck: first neck at the realized depth");
    require(tree.levels()[std::size_t(n1)].size() == 1, "shift_first_neck: level " + std::to_string(n1)
                                                            + " is not a neck level");
    std::vector<std::vector<CodeTree::Kind>> levels(tree.levels().begin() + n1, tree.levels().end());
    std::vector<int> rebased;
    for (std::size_t m = 1; m < necks.size(); ++m)
        rebased.push_back(necks[m] - n1);
    return CodeTree(tree.dim(), tree.families(), std::move(levels), std::move(rebased));
}

// true when all nodes at level n root structurally identical sub code trees
inline bool is_neck_level(const CodeTree& tree, int n)
{
    require(n >= 0 && n <= tree.depth(), "is_neck_level: level outside the realized depth");
    if (n == tree.depth())
        return true;
    // sub code trees compared label by label; pairs already shown equal are
    // remembered so shared structure is visited once
    const auto& lvl = tree.levels()[std::size_t(n)];
    std::set<std::tuple<int, int, int>> equal;
    std::function<bool(int, int, int)> same = [&](int level, int a, int b) {
        if (level == tree.depth() || a == b)
            return true;
        const auto key = std::make_tuple(level, std::min(a, b), std::max(a, b));
        if (equal.count(key))
            return true;
        const auto& ka = tree.kind(level, a);
        const auto& kb = tree.kind(level, b);
        if (tree.families()[ka.family].label != tree.families()[kb.family].label
            || ka.child_kind.size() != kb.child_kind.size())
            return false;
        for (std::size_t i = 0; i < ka.child_kind.size(); ++i)
            if (level + 1 < tree.depth() && !same(level + 1, ka.child_kind[i], kb.child_kind[i]))
                return false;
        equal.insert(key);
        return true;
    };
    for (std::size_t k = 1; k < lvl.size(); ++k)
        if (!same(n, 0, int(k)))
            return false;
    return true;
}

//
// attractor points and the measures mu_m
//
struct WeightedPoint {
    Vector point;
    double weight = 0.0;
};

//
// f_w(0) for every level-k word, weighted by Phi^s(T_w) / S(k, s)
// (uniform weights when s is omitted)
//
inline std::vector<WeightedPoint> attractor_points(const CodeTree& tree, int k, std::optional<double> s = std::nullopt,
                                                   const EnumerationOptions& opt = {})
{
    const double count = tree.word_count(k);
    if (count > opt.cap)
        throw cap_exceeded("attractor_points: " + std::to_string(count) + " words exceed the enumeration cap");
    const auto blocks = detail::split_prefixes(tree, k, 256).size();
    std::vector<std::vector<WeightedPoint>> parts(blocks);
    for_each_word_blocked(tree, k, opt.threads, [&](std::size_t b, const Matrix& t, const Vector& x, const auto&) {
        parts[b].push_back({x, s ? detail::spectrum_unchecked(t).phi(*s) : 1.0});
    });
    std::vector<WeightedPoint> out;
    out.reserve(std::size_t(count));
    double total = 0.0;
    for (auto& p : parts)
        for (auto& wp : p) {
            total += wp.weight;
            out.push_back(std::move(wp));
        }
    for (auto& wp : out)
        wp.weight /= total;
    return out;
}

//
// `count` cylinders at level N_m drawn with probability Phi^s(T_w)/S(N_m, s);
// each draw is emitted as f_w(0) with weight 1/count
//
inline std::vector<WeightedPoint> sample_measure_points(const CodeTree& tree, int m, double s, std::size_t count,
                                                        std::uint64_t seed, const EnumerationOptions& opt = {})
{
    require(m >= 1 && std::size_t(m) <= tree.necks().size(), "sample_measure_points: neck N_m is not realized");
    require(count >= 1, "sample_measure_points: count must be >= 1");
    const auto cyl = attractor_points(tree, tree.necks()[std::size_t(m - 1)], s, opt);
    std::vector<double> w(cyl.size());
    for (std::size_t i = 0; i < cyl.size(); ++i)
        w[i] = cyl[i].weight;
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    Engine rng(splitmix64(seed ^ 0x6d75ull));
    std::vector<WeightedPoint> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back({cyl[pick(rng)].point, 1.0 / double(count)});
    return out;
}

// {T_w : 1 <= |w| <= N_1} of the first neck block
inline LinearFamily first_block_family(const CodeTree& tree, std::size_t cap = 1 << 14)
{
    require(!tree.necks().empty(), "first_block_family: no realized neck");
    const int n1 = tree.necks().front();
    std::vector<Matrix> maps;
    for (int l = 1; l <= n1; ++l) {
        if (tree.word_count(l) + double(maps.size()) > double(cap))
            throw cap_exceeded("first_block_family: block family exceeds " + std::to_string(cap) + " maps");
        for_each_word_blocked(tree, l, 1, [&](std::size_t, const Matrix& t, const Vector&, const auto&) {
            maps.push_back(t);
        });
    }
    return LinearFamily(tree.dim(), std::move(maps));
}

//
// number of neck blocks j in (n_from, n_to] whose block family has sampled
// fullness constant above c (empirical)
//
inline int count_full_blocks(const CodeTree& tree, double s, double c, int n_from, int n_to, std::size_t samples,
                             std::uint64_t seed, int threads = 1)
{
    require(n_from >= 0 && n_from <= n_to, "count_full_blocks: need 0 <= n_from <= n_to");
    if (n_from == n_to)
        return 0;
    require(std::size_t(n_to) <= tree.necks().size(), "count_full_blocks: insufficient realized necks");
    int count = 0;
    CodeTree cur = tree;
    for (int j = 1; j <= n_to; ++j) {
        if (j > n_from) {
            const auto est = estimate_fullness(first_block_family(cur), s, samples, seed + std::uint64_t(j), threads);
            if (est.c_hat > c)
                ++count;
        }
        if (j < n_to)
            cur = shift_first_neck(cur);
    }
    return count;
}

}  // namespace affdim

#endif  // AFFDIM_CODE_TREE_HPP
