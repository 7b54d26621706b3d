#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hmprate/errors.hpp"

namespace hmprate {

/// Directed multigraph as an edge list.
struct EdgeList {
    int num_nodes = 0;
    std::vector<std::pair<int, int>> edges;
};

namespace detail {

inline std::vector<std::vector<int>> out_edges(const EdgeList& g) {
    std::vector<std::vector<int>> out(g.num_nodes);
    for (int e = 0; e < static_cast<int>(g.edges.size()); ++e)
        out[g.edges[e].first].push_back(e);
    return out;
}

inline std::vector<int> reachable_from(const EdgeList& g, int src, bool reversed) {
    std::vector<int> seen(g.num_nodes, 0);
    std::vector<int> stack{src};
    seen[src] = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (const auto& [a, b] : g.edges) {
            const int from = reversed ? b : a;
            const int to = reversed ? a : b;
            if (from == v && !seen[to]) {
                seen[to] = 1;
                stack.push_back(to);
            }
        }
    }
    return seen;
}

}  // namespace detail

inline bool strongly_connected(const EdgeList& g) {
    if (g.num_nodes == 0) return false;
    const auto fwd = detail::reachable_from(g, 0, false);
    const auto bwd = detail::reachable_from(g, 0, true);
    for (int v = 0; v < g.num_nodes; ++v)
        if (!fwd[v] || !bwd[v]) return false;
    return true;
}

struct CycleResult {
    std::vector<int> edge_indices;  ///< edges of the cycle, in walk order
    double mean_weight = 0.0;
};

namespace detail {

/// Karp's dynamic program for the maximum mean cycle within one strongly
/// connected node set. D_k(v) = best weight of a k-edge walk from src;
/// mu* = max_v min_k (D_n(v) - D_k(v)) / (n - k). The cycle is recovered
/// from the parent pointers of the critical walk and verified by its mean.
inline bool karp_max_mean(const EdgeList& g, const Eigen::VectorXd& w,
                          const std::vector<int>& nodes, CycleResult* best) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<int> in_set(g.num_nodes, 0), local(g.num_nodes, -1);
    for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
        in_set[nodes[k]] = 1;
        local[nodes[k]] = k;
    }
    std::vector<int> edge_ids;
    for (int e = 0; e < static_cast<int>(g.edges.size()); ++e)
        if (in_set[g.edges[e].first] && in_set[g.edges[e].second]) edge_ids.push_back(e);
    if (edge_ids.empty()) return false;

    const int n = static_cast<int>(nodes.size());
    Eigen::MatrixXd dist = Eigen::MatrixXd::Constant(n + 1, n, neg_inf);
    Eigen::MatrixXi parent = Eigen::MatrixXi::Constant(n + 1, n, -1);
    dist(0, 0) = 0.0;  // src = nodes[0]
    for (int k = 1; k <= n; ++k)
        for (int e : edge_ids) {
            const int u = local[g.edges[e].first];
            const int v = local[g.edges[e].second];
            if (dist(k - 1, u) == neg_inf) continue;
            const double cand = dist(k - 1, u) + w(e);
            if (cand > dist(k, v)) {
                dist(k, v) = cand;
                parent(k, v) = e;
            }
        }

    double mu = neg_inf;
    int v_star = -1;
    for (int v = 0; v < n; ++v) {
        if (dist(n, v) == neg_inf) continue;
        double worst = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
            if (dist(k, v) == neg_inf) continue;
            worst = std::min(worst, (dist(n, v) - dist(k, v)) / (n - k));
        }
        if (worst > mu) {
            mu = worst;
            v_star = v;
        }
    }
    if (v_star < 0) return false;

    // Walk the critical path backwards and take the best cycle on it.
    std::vector<int> walk_edges(n);
    std::vector<int> walk_nodes(n + 1);
    walk_nodes[n] = v_star;
    for (int k = n; k >= 1; --k) {
        const int e = parent(k, walk_nodes[k]);
        walk_edges[k - 1] = e;
        walk_nodes[k - 1] = local[g.edges[e].first];
    }
    CycleResult candidate;
    candidate.mean_weight = neg_inf;
    std::vector<int> last_seen(n, -1);
    for (int k = 0; k <= n; ++k) {
        const int node = walk_nodes[k];
        if (last_seen[node] >= 0) {
            const int start = last_seen[node];
            double total = 0.0;
            std::vector<int> cyc;
            for (int t = start; t < k; ++t) {
                cyc.push_back(walk_edges[t]);
                total += w(walk_edges[t]);
            }
            const double mean = total / cyc.size();
            if (mean > candidate.mean_weight) candidate = {cyc, mean};
        }
        last_seen[node] = k;
    }
    if (candidate.mean_weight == neg_inf) return false;
    if (!best->edge_indices.empty() && candidate.mean_weight <= best->mean_weight) return true;
    if (best->edge_indices.empty() || candidate.mean_weight > best->mean_weight)
        *best = candidate;
    return true;
}

/// Tarjan-style SCC computation (iterative Kosaraju for small graphs).
inline std::vector<std::vector<int>> strongly_connected_components(const EdgeList& g) {
    const int n = g.num_nodes;
    std::vector<std::vector<int>> fwd(n), bwd(n);
    for (const auto& [a, b] : g.edges) {
        fwd[a].push_back(b);
        bwd[b].push_back(a);
    }
    std::vector<int> order;
    std::vector<int> state(n, 0);
    for (int s = 0; s < n; ++s) {
        if (state[s]) continue;
        std::vector<std::pair<int, std::size_t>> stack{{s, 0}};
        state[s] = 1;
        while (!stack.empty()) {
            auto& [v, idx] = stack.back();
            if (idx < fwd[v].size()) {
                const int to = fwd[v][idx++];
                if (!state[to]) {
                    state[to] = 1;
                    stack.emplace_back(to, 0);
                }
            } else {
                order.push_back(v);
                stack.pop_back();
            }
        }
    }
    std::vector<std::vector<int>> comps;
    std::vector<int> comp_of(n, -1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (comp_of[*it] >= 0) continue;
        std::vector<int> comp;
        std::vector<int> stack{*it};
        comp_of[*it] = static_cast<int>(comps.size());
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            comp.push_back(v);
            for (int to : bwd[v])
                if (comp_of[to] < 0) {
                    comp_of[to] = static_cast<int>(comps.size());
                    stack.push_back(to);
                }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

}  // namespace detail

/// Maximum mean-weight directed cycle, exact via Karp's dynamic program run
/// per strongly connected component.
inline CycleResult max_mean_cycle(const EdgeList& g, const Eigen::VectorXd& weights) {
    if (static_cast<int>(weights.size()) != static_cast<int>(g.edges.size()))
        throw Error("weight vector must match the edge list");
    CycleResult best;
    bool found = false;
    for (const auto& comp : detail::strongly_connected_components(g)) {
        CycleResult local;
        if (detail::karp_max_mean(g, weights, comp, &local)) {
            if (!found || local.mean_weight > best.mean_weight) best = local;
            found = true;
        }
    }
    if (!found) throw NoCycle("graph has no directed cycle");
    return best;
}

/// All simple directed cycles, as edge-index lists (DFS with a smallest-
/// start-node canonical form). Intended for small graphs; the vertex set of
/// the circulation polytope is exactly the uniform occupancies of these.
inline std::vector<std::vector<int>> enumerate_simple_cycles(const EdgeList& g) {
    std::vector<std::vector<int>> cycles;
    const auto out = detail::out_edges(g);
    std::vector<int> edge_stack;
    std::vector<char> on_path(g.num_nodes, 0);
    std::function<void(int, int)> dfs = [&](int start, int v) {
        for (int e : out[v]) {
            const int to = g.edges[e].second;
            if (to == start) {
                edge_stack.push_back(e);
                cycles.push_back(edge_stack);
                edge_stack.pop_back();
            } else if (to > start && !on_path[to]) {
                on_path[to] = 1;
                edge_stack.push_back(e);
                dfs(start, to);
                edge_stack.pop_back();
                on_path[to] = 0;
            }
        }
    };
    for (int s = 0; s < g.num_nodes; ++s) {
        on_path[s] = 1;
        dfs(s, s);
        on_path[s] = 0;
    }
    return cycles;
}

/// Uniform edge occupancy of a cycle: 1/len on each cycle edge.
inline Eigen::VectorXd cycle_vertex(const EdgeList& g, const std::vector<int>& cycle) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(g.edges.size());
    for (int idx : cycle) e(idx) += 1.0 / cycle.size();
    return e;
}

/// Circulation over valid edges: e >= 0, sum e = 1, per-node flow balance.
struct EdgeOccupancy {
    Eigen::VectorXd e;
};

struct IsiOptimum {
    Eigen::VectorXd e;
    double value = 0.0;
    double gap = 0.0;  ///< final linearized duality gap (KKT residual)
    int iterations = 0;
    std::vector<double> gap_trace;
};

namespace detail {

struct Atom {
    Eigen::VectorXd e;
    double u = 0.0;  ///< sum e m
    double v = 0.0;  ///< sum e m^2
};

/// Exact maximizer of v - u^2 over the convex hull of atom images in the
/// (u, v) plane; the optimum lies on the upper hull, on a segment of at most
/// two atoms.
inline Eigen::VectorXd corrective_step(const std::vector<Atom>& atoms, double* value) {
    std::vector<int> idx(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) idx[i] = static_cast<int>(i);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (atoms[a].u != atoms[b].u) return atoms[a].u < atoms[b].u;
        return atoms[a].v < atoms[b].v;
    });
    // Andrew's monotone chain, upper hull.
    std::vector<int> hull;
    for (int i : idx) {
        while (hull.size() >= 2) {
            const Atom& a = atoms[hull[hull.size() - 2]];
            const Atom& b = atoms[hull[hull.size() - 1]];
            const Atom& c = atoms[i];
            const double cross = (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u);
            if (cross >= 0.0)
                hull.pop_back();
            else
                break;
        }
        if (!hull.empty() && atoms[hull.back()].u == atoms[i].u) {
            if (atoms[hull.back()].v >= atoms[i].v) continue;
            hull.pop_back();
        }
        hull.push_back(i);
    }
    double best = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_e;
    auto consider = [&](const Eigen::VectorXd& e, double u, double v) {
        const double f = v - u * u;
        if (f > best) {
            best = f;
            best_e = e;
        }
    };
    for (std::size_t h = 0; h < hull.size(); ++h) {
        const Atom& a = atoms[hull[h]];
        consider(a.e, a.u, a.v);
        if (h + 1 < hull.size()) {
            const Atom& b = atoms[hull[h + 1]];
            const double du = b.u - a.u;
            const double dv = b.v - a.v;
            if (du != 0.0) {
                // d/dt [v(t) - u(t)^2] = dv - 2 (a.u + t du) du = 0
                const double t = (dv / (2.0 * du) - a.u) / du;
                if (t > 0.0 && t < 1.0)
                    consider(((1.0 - t) * a.e + t * b.e).eval(), a.u + t * du, a.v + t * dv);
            }
        }
    }
    *value = best;
    return best_e;
}

inline std::vector<int> shortest_cycle(const EdgeList& g) {
    const auto out = out_edges(g);
    std::vector<int> best;
    for (int s = 0; s < g.num_nodes; ++s) {
        // BFS from s back to s, tracking the entering edge.
        std::vector<int> prev_edge(g.num_nodes, -1), dist(g.num_nodes, -1);
        std::vector<int> queue{s};
        dist[s] = 0;
        int closing = -1;
        for (std::size_t qi = 0; qi < queue.size() && closing < 0; ++qi) {
            const int v = queue[qi];
            for (int e : out[v]) {
                const int to = g.edges[e].second;
                if (to == s) {
                    closing = e;
                    break;
                }
                if (dist[to] < 0) {
                    dist[to] = dist[v] + 1;
                    prev_edge[to] = e;
                    queue.push_back(to);
                }
            }
        }
        if (closing < 0) continue;
        std::vector<int> cyc{closing};
        int v = g.edges[closing].first;
        while (v != s) {
            cyc.push_back(prev_edge[v]);
            v = g.edges[prev_edge[v]].first;
        }
        std::reverse(cyc.begin(), cyc.end());
        if (best.empty() || cyc.size() < best.size()) best = cyc;
    }
    if (best.empty()) throw NoCycle("graph has no directed cycle");
    return best;
}

}  // namespace detail

/// Maximizes the edge-occupancy variance objective
///   f(e) = sum_ij e_ij m_ij^2 - (sum_ij e_ij m_ij)^2
/// over the circulation polytope, by Frank-Wolfe with the max-mean-cycle
/// linear oracle. Each iteration takes an exact line-search/fully-corrective
/// step over the cycle vertices discovered so far (the objective depends on
/// e only through (sum e m, sum e m^2), so that step is a closed-form 2-D
/// hull maximization). Terminates when the linearized gap is <= gap_tol.
inline IsiOptimum isi_edge_optimizer(const EdgeList& g, const Eigen::VectorXd& m,
                                     int max_iter = 500, double gap_tol = 1e-8) {
    if (!strongly_connected(g)) throw NotStronglyConnected("graph must be strongly connected");
    if (static_cast<int>(m.size()) != static_cast<int>(g.edges.size()))
        throw Error("weight vector must match the edge list");
    const Eigen::VectorXd m2 = m.cwiseProduct(m);

    auto make_atom = [&](const std::vector<int>& cycle) {
        detail::Atom a;
        a.e = cycle_vertex(g, cycle);
        a.u = m.dot(a.e);
        a.v = m2.dot(a.e);
        return a;
    };

    std::vector<detail::Atom> atoms{make_atom(detail::shortest_cycle(g))};
    std::set<std::vector<int>> seen;
    {
        auto c = detail::shortest_cycle(g);
        std::sort(c.begin(), c.end());
        seen.insert(c);
    }
    Eigen::VectorXd e = atoms[0].e;
    IsiOptimum out;
    for (int t = 0; t < max_iter; ++t) {
        const double u = m.dot(e);
        const Eigen::VectorXd grad = m2 - 2.0 * u * m;
        const CycleResult oracle = max_mean_cycle(g, grad);
        const double gap = oracle.mean_weight - grad.dot(e);
        out.gap_trace.push_back(gap);
        out.gap = gap;
        out.iterations = t + 1;
        if (gap <= gap_tol) break;
        std::vector<int> key = oracle.edge_indices;
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second) break;  // oracle repeated an atom: numerically stalled
        atoms.push_back(make_atom(oracle.edge_indices));
        double value = 0.0;
        e = detail::corrective_step(atoms, &value);
    }
    if (out.gap > gap_tol * 10.0)
        throw NonConvergence("duality gap above tolerance after the iteration cap");
    out.e = e;
    const double u_final = m.dot(e);
    out.value = m2.dot(e) - u_final * u_final;
    return out;
}

}  // namespace hmprate
