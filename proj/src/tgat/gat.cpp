#include <algorithm>
#include <cmath>
#include <limits>

#include "bmt/errors.hpp"
#include "bmt/simd.hpp"
#include "bmt/tgat.hpp"

// Forward/backward of the single attention layer. Node processing follows
// canonical (time-sorted) order and neighbor lists are sorted by time index,
// so results do not depend on node or edge storage order.

namespace bmt {

namespace {

double elu(double x) { return x > 0.0 ? x : std::exp(x) - 1.0; }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

struct NeighborRef {
    int node = 0;       // canonical index of the attended node
    double delta = 0.0;
};

// Canonicalized graph view: nodes sorted by time index, per-node neighbor
// lists (predecessors + self) sorted by the attended node's time index.
struct GraphView {
    std::vector<const TemporalGraph::Node*> nodes;  // canonical order
    std::vector<std::vector<NeighborRef>> neighbors;
};

GraphView make_view(const TemporalGraph& g) {
    if (g.nodes.empty()) throw ValidationError("tgat", "graph has no nodes");
    GraphView view;
    std::vector<int> order(g.nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return g.nodes[a].time_index < g.nodes[b].time_index; });
    std::vector<int> canonical(g.nodes.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        canonical[order[rank]] = static_cast<int>(rank);
        view.nodes.push_back(&g.nodes[order[rank]]);
    }
    for (std::size_t i = 1; i < view.nodes.size(); ++i)
        if (view.nodes[i]->time_index == view.nodes[i - 1]->time_index)
            throw ValidationError("tgat", "duplicate time index in graph");

    view.neighbors.resize(g.nodes.size());
    for (const auto& e : g.edges) {
        if (e.src < 0 || e.dst < 0 || e.src >= static_cast<int>(g.nodes.size()) ||
            e.dst >= static_cast<int>(g.nodes.size()))
            throw ValidationError("tgat", "edge endpoint out of range");
        view.neighbors[canonical[e.src]].push_back({canonical[e.dst], e.delta});
    }
    for (auto& list : view.neighbors) {
        std::sort(list.begin(), list.end(),
                  [](const NeighborRef& a, const NeighborRef& b) { return a.node < b.node; });
        if (list.empty()) throw ValidationError("tgat", "node has no neighbors (missing self-loop)");
    }
    const std::size_t d = view.nodes[0]->features.size();
    for (const auto* node : view.nodes)
        if (node->features.size() != d)
            throw ValidationError("tgat", "inconsistent node feature dimensions");
    return view;
}

struct ForwardCache {
    GraphView view;
    std::vector<std::vector<double>> z;      // per node, hidden
    std::vector<std::vector<double>> pre;    // per node, per neighbor: attention logit
    std::vector<std::vector<double>> alpha;  // per node, per neighbor
    std::vector<std::vector<double>> u;      // per node, pre-ELU aggregate
    std::vector<std::vector<double>> h;      // per node, post-ELU
    std::vector<double> readout;             // hidden
    double score = 0.0;
    double probability = 0.0;
};

ForwardCache run_forward(const GatParams& p, const TemporalGraph& g) {
    if (p.input_dim <= 0 || p.hidden <= 0)
        throw ValidationError("tgat", "params not initialized");
    ForwardCache c;
    c.view = make_view(g);
    const std::size_t n = c.view.nodes.size();
    const int h = p.hidden;
    if (static_cast<int>(c.view.nodes[0]->features.size()) != p.input_dim)
        throw ValidationError("tgat", "node feature dimension does not match params",
                              std::to_string(c.view.nodes[0]->features.size()) + " vs " +
                                  std::to_string(p.input_dim));

    c.z.assign(n, std::vector<double>(h));
    for (std::size_t i = 0; i < n; ++i)
        simd::matvec(p.w.data(), c.view.nodes[i]->features.data(), h, p.input_dim,
                     c.z[i].data());

    const double* a_left = p.attn.data();
    const double* a_right = p.attn.data() + h;
    const double a_delta = p.attn[2 * h];

    c.pre.resize(n);
    c.alpha.resize(n);
    c.u.assign(n, std::vector<double>(h, 0.0));
    c.h.assign(n, std::vector<double>(h));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& nbrs = c.view.neighbors[i];
        auto& pre = c.pre[i];
        pre.resize(nbrs.size());
        const double left_term = simd::dot(a_left, c.z[i].data(), h);
        for (std::size_t m = 0; m < nbrs.size(); ++m) {
            const double raw = left_term + simd::dot(a_right, c.z[nbrs[m].node].data(), h) +
                               a_delta * nbrs[m].delta;
            pre[m] = raw;
        }
        // LeakyReLU then a stable softmax over the neighbor set.
        auto& alpha = c.alpha[i];
        alpha.resize(nbrs.size());
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < nbrs.size(); ++m) {
            const double e = pre[m] > 0.0 ? pre[m] : p.leaky_slope * pre[m];
            alpha[m] = e;
            mx = std::max(mx, e);
        }
        double denom = 0.0;
        for (double& v : alpha) {
            v = std::exp(v - mx);
            denom += v;
        }
        for (double& v : alpha) v /= denom;
        for (std::size_t m = 0; m < nbrs.size(); ++m)
            simd::axpy(alpha[m], c.z[nbrs[m].node].data(), c.u[i].data(), h);
        for (int t = 0; t < h; ++t) c.h[i][t] = elu(c.u[i][t]);
    }

    c.readout.assign(h, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        simd::axpy(1.0 / static_cast<double>(n), c.h[i].data(), c.readout.data(), h);
    c.score = simd::dot(p.head_w.data(), c.readout.data(), h) + p.head_b;
    c.probability = 1.0 / (1.0 + std::exp(-c.score));
    return c;
}

}  // namespace

std::vector<double> GatParams::flat() const {
    std::vector<double> v;
    v.reserve(n_params());
    v.insert(v.end(), w.begin(), w.end());
    v.insert(v.end(), attn.begin(), attn.end());
    v.insert(v.end(), head_w.begin(), head_w.end());
    v.push_back(head_b);
    return v;
}

GatParams GatParams::from_flat(const std::vector<double>& v, int input_dim, int hidden,
                               double leaky_slope) {
    GatParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    p.leaky_slope = leaky_slope;
    const std::size_t wn = static_cast<std::size_t>(hidden) * input_dim;
    const std::size_t an = 2 * static_cast<std::size_t>(hidden) + 1;
    if (v.size() != wn + an + hidden + 1)
        throw ValidationError("tgat", "flat parameter size mismatch");
    p.w.assign(v.begin(), v.begin() + wn);
    p.attn.assign(v.begin() + wn, v.begin() + wn + an);
    p.head_w.assign(v.begin() + wn + an, v.begin() + wn + an + hidden);
    p.head_b = v.back();
    return p;
}

TemporalGraph build_graph(const std::vector<std::vector<double>>& point_features,
                          const std::vector<double>& clinical, int label) {
    if (point_features.empty() || point_features.size() > 6)
        throw ValidationError("tgat", "graphs cover 1 to 6 time points",
                              std::to_string(point_features.size()));
    const std::size_t per_point = point_features[0].size();
    for (const auto& f : point_features)
        if (f.size() != per_point)
            throw ValidationError("tgat", "inconsistent per-point feature dimensions");

    TemporalGraph g;
    g.label = label;
    g.horizon = static_cast<int>(point_features.size()) - 1;
    for (std::size_t k = 0; k < point_features.size(); ++k) {
        TemporalGraph::Node node;
        node.time_index = static_cast<int>(k);
        node.features = point_features[k];
        node.features.insert(node.features.end(), clinical.begin(), clinical.end());
        g.nodes.push_back(std::move(node));
    }
    for (int j = 0; j < static_cast<int>(g.nodes.size()); ++j) {
        for (int k = 0; k < j; ++k)
            g.edges.push_back({j, k, 60.0 * static_cast<double>(j - k) / 360.0});
        g.edges.push_back({j, j, 0.0});
    }
    return g;
}

TemporalGraph crop_graph(const TemporalGraph& g, int horizon) {
    if (horizon < 0 || horizon > g.horizon)
        throw ValidationError("tgat", "horizon exceeds available nodes",
                              std::to_string(horizon) + " vs " + std::to_string(g.horizon));
    TemporalGraph out;
    out.label = g.label;
    out.horizon = horizon;
    std::vector<int> remap(g.nodes.size(), -1);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (g.nodes[i].time_index <= horizon) {
            remap[i] = static_cast<int>(out.nodes.size());
            out.nodes.push_back(g.nodes[i]);
        }
    }
    for (const auto& e : g.edges)
        if (remap[e.src] >= 0 && remap[e.dst] >= 0)
            out.edges.push_back({remap[e.src], remap[e.dst], e.delta});
    return out;
}

GatForward gat_forward(const GatParams& params, const TemporalGraph& g) {
    const ForwardCache c = run_forward(params, g);
    GatForward out;
    out.probability = c.probability;
    const std::size_t n = c.view.nodes.size();
    out.attention.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < c.view.neighbors[i].size(); ++m)
            out.attention[i][c.view.neighbors[i][m].node] = c.alpha[i][m];
    return out;
}

std::vector<double> gat_backward(const GatParams& p, const TemporalGraph& g, int label,
                                 double class_weight, double* loss_out) {
    const ForwardCache c = run_forward(p, g);
    const std::size_t n = c.view.nodes.size();
    const int h = p.hidden;
    const double y = static_cast<double>(label);
    const double prob = c.probability;
    if (loss_out != nullptr) {
        *loss_out = -class_weight * (y * std::log(std::max(prob, 1e-300)) +
                                     (1.0 - y) * std::log(std::max(1.0 - prob, 1e-300)));
    }

    std::vector<double> gw(p.w.size(), 0.0);
    std::vector<double> gattn(p.attn.size(), 0.0);
    std::vector<double> ghead_w(h, 0.0);
    double ghead_b = 0.0;

    const double dscore = class_weight * (prob - y);
    simd::axpy(dscore, c.readout.data(), ghead_w.data(), h);
    ghead_b = dscore;

    // dL/dh_i = dscore * head_w / n for every node (mean readout).
    std::vector<double> dh(h);
    for (int t = 0; t < h; ++t)
        dh[t] = dscore * p.head_w[t] / static_cast<double>(n);

    std::vector<std::vector<double>> dz(n, std::vector<double>(h, 0.0));
    const double* a_left = p.attn.data();
    const double* a_right = p.attn.data() + h;

    std::vector<double> du(h);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& nbrs = c.view.neighbors[i];
        for (int t = 0; t < h; ++t) du[t] = dh[t] * elu_grad(c.u[i][t]);

        // Softmax backward over the neighbor set.
        std::vector<double> dalpha(nbrs.size());
        for (std::size_t m = 0; m < nbrs.size(); ++m)
            dalpha[m] = simd::dot(du.data(), c.z[nbrs[m].node].data(), h);
        double weighted = 0.0;
        for (std::size_t m = 0; m < nbrs.size(); ++m) weighted += c.alpha[i][m] * dalpha[m];

        for (std::size_t m = 0; m < nbrs.size(); ++m) {
            const int j = nbrs[m].node;
            // Aggregation path.
            simd::axpy(c.alpha[i][m], du.data(), dz[j].data(), h);
            // Attention path.
            const double de = c.alpha[i][m] * (dalpha[m] - weighted);
            const double dpre = de * (c.pre[i][m] > 0.0 ? 1.0 : p.leaky_slope);
            simd::axpy(dpre, c.z[i].data(), gattn.data(), h);
            simd::axpy(dpre, c.z[j].data(), gattn.data() + h, h);
            gattn[2 * h] += dpre * nbrs[m].delta;
            simd::axpy(dpre, a_left, dz[i].data(), h);
            simd::axpy(dpre, a_right, dz[j].data(), h);
        }
    }

    // dL/dW = sum_i dz_i x_i^T.
    for (std::size_t i = 0; i < n; ++i) {
        const auto& x = c.view.nodes[i]->features;
        for (int t = 0; t < h; ++t)
            simd::axpy(dz[i][t], x.data(), gw.data() + static_cast<std::size_t>(t) * p.input_dim,
                       p.input_dim);
    }

    std::vector<double> flat;
    flat.reserve(p.n_params());
    flat.insert(flat.end(), gw.begin(), gw.end());
    flat.insert(flat.end(), gattn.begin(), gattn.end());
    flat.insert(flat.end(), ghead_w.begin(), ghead_w.end());
    flat.push_back(ghead_b);
    return flat;
}

}  // namespace bmt
