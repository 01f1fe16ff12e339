#include "mfcn/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfcn/rng.hpp"

namespace mfcn {

namespace {

// Min-cost flow by successive shortest paths with node potentials.
//
// The LP  max sum_j c_j f_j  s.t. |f_j| <= 1, |f_j - f_l| <= d_jl  dualizes
// to a transshipment problem: supply c_j at atom j, a slack node absorbing
// the imbalance, transport arcs of cost d_jl between atoms and unit-cost
// arcs between every atom and the slack node. The optimal flow cost equals
// the distance.
class DenseMinCostFlow {
  public:
    explicit DenseMinCostFlow(int nodes) : n_(nodes), cost_(sz() * sz()), flow_(sz() * sz()) {}

    void set_cost(int u, int v, double c) { cost_[idx(u, v)] = c; }

    double solve(std::vector<double> supply) {
        const int n = n_;
        const double inf = std::numeric_limits<double>::infinity();
        std::vector<double> potential(static_cast<std::size_t>(n), 0.0);
        double total_supply = 0.0;
        for (double s : supply) total_supply += std::max(s, 0.0);
        const double eps = 1e-14 * std::max(1.0, total_supply);

        std::vector<double> dist(static_cast<std::size_t>(n));
        std::vector<int> parent(static_cast<std::size_t>(n));
        std::vector<char> via_cancel(static_cast<std::size_t>(n));
        std::vector<char> done(static_cast<std::size_t>(n));

        long safety = 64L * n * n + 1024;
        while (safety-- > 0) {
            int source = -1;
            double best = eps;
            for (int i = 0; i < n; ++i)
                if (supply[static_cast<std::size_t>(i)] > best) {
                    best = supply[static_cast<std::size_t>(i)];
                    source = i;
                }
            if (source < 0) break;

            // Dijkstra on the residual graph with reduced costs. Between any
            // two nodes there are at most two usable arcs: the forward arc
            // (unbounded) and the cancellation of existing reverse flow
            // (capacity-bounded, cost negated).
            std::fill(dist.begin(), dist.end(), inf);
            std::fill(parent.begin(), parent.end(), -1);
            std::fill(via_cancel.begin(), via_cancel.end(), 0);
            std::fill(done.begin(), done.end(), 0);
            dist[static_cast<std::size_t>(source)] = 0.0;
            for (int iter = 0; iter < n; ++iter) {
                int u = -1;
                double du = inf;
                for (int i = 0; i < n; ++i)
                    if (!done[static_cast<std::size_t>(i)] &&
                        dist[static_cast<std::size_t>(i)] < du) {
                        du = dist[static_cast<std::size_t>(i)];
                        u = i;
                    }
                if (u < 0) break;
                done[static_cast<std::size_t>(u)] = 1;
                for (int v = 0; v < n; ++v) {
                    if (v == u) continue;
                    double arc_cost = cost_[idx(u, v)];
                    char cancel = 0;
                    if (flow_[idx(v, u)] > 0.0 && -cost_[idx(v, u)] < arc_cost) {
                        arc_cost = -cost_[idx(v, u)];
                        cancel = 1;
                    }
                    const double reduced =
                        std::max(0.0, arc_cost - potential[static_cast<std::size_t>(u)] +
                                          potential[static_cast<std::size_t>(v)]);
                    if (du + reduced < dist[static_cast<std::size_t>(v)] - 1e-18) {
                        dist[static_cast<std::size_t>(v)] = du + reduced;
                        parent[static_cast<std::size_t>(v)] = u;
                        via_cancel[static_cast<std::size_t>(v)] = cancel;
                    }
                }
            }

            // Nearest node with unmet demand.
            int sink = -1;
            double dsink = inf;
            for (int i = 0; i < n; ++i)
                if (supply[static_cast<std::size_t>(i)] < -eps &&
                    dist[static_cast<std::size_t>(i)] < dsink) {
                    dsink = dist[static_cast<std::size_t>(i)];
                    sink = i;
                }
            if (sink < 0) break;

            for (int i = 0; i < n; ++i)
                potential[static_cast<std::size_t>(i)] -=
                    std::min(dist[static_cast<std::size_t>(i)], dsink);

            double push = std::min(supply[static_cast<std::size_t>(source)],
                                   -supply[static_cast<std::size_t>(sink)]);
            for (int v = sink; v != source; v = parent[static_cast<std::size_t>(v)]) {
                const int u = parent[static_cast<std::size_t>(v)];
                if (via_cancel[static_cast<std::size_t>(v)])
                    push = std::min(push, flow_[idx(v, u)]);
            }
            if (!(push > 0.0)) break;
            for (int v = sink; v != source; v = parent[static_cast<std::size_t>(v)]) {
                const int u = parent[static_cast<std::size_t>(v)];
                if (via_cancel[static_cast<std::size_t>(v)])
                    flow_[idx(v, u)] -= push;
                else
                    flow_[idx(u, v)] += push;
            }
            supply[static_cast<std::size_t>(source)] -= push;
            supply[static_cast<std::size_t>(sink)] += push;
        }

        double total = 0.0;
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v) total += flow_[idx(u, v)] * cost_[idx(u, v)];
        return total;
    }

  private:
    std::size_t sz() const { return static_cast<std::size_t>(n_); }
    std::size_t idx(int u, int v) const { return static_cast<std::size_t>(u) * sz() + v; }
    int n_;
    std::vector<double> cost_;
    std::vector<double> flow_;
};

double euclid(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return std::sqrt(s);
}

// Deterministic ordering so dbl_distance(mu, nu) == dbl_distance(nu, mu)
// exactly, not just up to flow-solver rounding.
bool measure_less(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    if (a.atoms() != b.atoms()) return a.atoms() < b.atoms();
    return a.weights() < b.weights();
}

}  // namespace

double dbl_distance(const EmpiricalMeasure& mu_in, const EmpiricalMeasure& nu_in, int lp_cap) {
    if (mu_in.dim() != nu_in.dim()) fail("dbl_distance: dimension mismatch");
    const bool swap = measure_less(nu_in, mu_in);
    const EmpiricalMeasure& mu = swap ? nu_in : mu_in;
    const EmpiricalMeasure& nu = swap ? mu_in : nu_in;

    const int d = mu.dim();
    const int s = mu.size() + nu.size();
    if (s > lp_cap)
        fail(strprintf("dbl_distance: combined support %d exceeds LP cap %d; "
                       "use dbl_distance_approx for large ensembles",
                       s, lp_cap));
    if (s == 0) return 0.0;

    std::vector<double> pts;
    pts.reserve(static_cast<std::size_t>(s) * d);
    std::vector<double> signed_weight;
    signed_weight.reserve(static_cast<std::size_t>(s));
    for (int i = 0; i < mu.size(); ++i) {
        pts.insert(pts.end(), mu.atom(i), mu.atom(i) + d);
        signed_weight.push_back(mu.weight(i));
    }
    for (int i = 0; i < nu.size(); ++i) {
        pts.insert(pts.end(), nu.atom(i), nu.atom(i) + d);
        signed_weight.push_back(-nu.weight(i));
    }

    const int slack = s;  // absorbs unmatched mass at unit cost
    DenseMinCostFlow mcf(s + 1);
    for (int i = 0; i < s; ++i) {
        for (int j = 0; j < s; ++j)
            mcf.set_cost(i, j, i == j ? 0.0
                                      : euclid(pts.data() + static_cast<std::ptrdiff_t>(i) * d,
                                               pts.data() + static_cast<std::ptrdiff_t>(j) * d, d));
        mcf.set_cost(i, slack, 1.0);
        mcf.set_cost(slack, i, 1.0);
    }

    std::vector<double> supply(static_cast<std::size_t>(s + 1), 0.0);
    double imbalance = 0.0;
    for (int i = 0; i < s; ++i) {
        supply[static_cast<std::size_t>(i)] = signed_weight[static_cast<std::size_t>(i)];
        imbalance += signed_weight[static_cast<std::size_t>(i)];
    }
    supply[static_cast<std::size_t>(slack)] = -imbalance;

    return std::max(0.0, mcf.solve(std::move(supply)));
}

BlDictionary::BlDictionary(int dim, int size, std::uint64_t seed) : dim_(dim) {
    if (dim < 1) fail("BlDictionary: dimension must be >= 1");
    if (size < 1) fail("BlDictionary: size must be >= 1");
    Prng rng(seed ^ 0xB1D1C700u);

    auto reserve_member = [&](Kind k) {
        kinds_.push_back(k);
        axis_.push_back(0);
        scale_.push_back(1.0);
        dir_.emplace_back();
        offset_.push_back(0.0);
    };

    // Canonical members first: the constant (captures mass differences) and
    // signed coordinate clips (capture mean shifts).
    reserve_member(Kind::constant_one);
    for (int c = 0; c < dim && static_cast<int>(kinds_.size()) < size; ++c)
        for (int sign = 0; sign < 2 && static_cast<int>(kinds_.size()) < size; ++sign) {
            reserve_member(Kind::coordinate);
            axis_.back() = c;
            scale_.back() = sign == 0 ? 1.0 : -1.0;
        }

    while (static_cast<int>(kinds_.size()) < size) {
        const double pick = rng.uniform();
        if (pick < 0.5) {
            reserve_member(Kind::affine);
            std::vector<double> a(static_cast<std::size_t>(dim));
            double nrm = 0.0;
            for (double& v : a) {
                v = rng.normal();
                nrm += v * v;
            }
            nrm = std::sqrt(std::max(nrm, 1e-300));
            for (double& v : a) v /= nrm;
            dir_.back() = std::move(a);
            offset_.back() = rng.uniform(-2.0, 2.0);
        } else {
            reserve_member(pick < 0.75 ? Kind::radial_up : Kind::radial_down);
            std::vector<double> z(static_cast<std::size_t>(dim));
            for (double& v : z) v = 2.0 * rng.normal();
            dir_.back() = std::move(z);
        }
    }
}

double BlDictionary::evaluate(int member, const double* x) const {
    const std::size_t i = static_cast<std::size_t>(member);
    switch (kinds_[i]) {
        case Kind::constant_one:
            return 1.0;
        case Kind::coordinate:
            return std::clamp(scale_[i] * x[axis_[i]], -1.0, 1.0);
        case Kind::affine: {
            double v = offset_[i];
            for (int c = 0; c < dim_; ++c) v += dir_[i][static_cast<std::size_t>(c)] * x[c];
            return std::clamp(v, -1.0, 1.0);
        }
        case Kind::radial_up:
            return std::max(1.0 - euclid(x, dir_[i].data(), dim_), -1.0);
        case Kind::radial_down:
            return std::min(euclid(x, dir_[i].data(), dim_) - 1.0, 1.0);
    }
    return 0.0;
}

std::vector<double> BlDictionary::profile(const EmpiricalMeasure& mu) const {
    if (mu.dim() != dim_) fail("BlDictionary: dimension mismatch");
    std::vector<double> out(static_cast<std::size_t>(size()));
    std::vector<double> terms(static_cast<std::size_t>(mu.size()));
    for (int f = 0; f < size(); ++f) {
        for (int i = 0; i < mu.size(); ++i)
            terms[static_cast<std::size_t>(i)] = mu.weight(i) * evaluate(f, mu.atom(i));
        out[static_cast<std::size_t>(f)] = pairwise_sum(terms);
    }
    return out;
}

double BlDictionary::distance(const std::vector<double>& pa, const std::vector<double>& pb) {
    if (pa.size() != pb.size()) fail("BlDictionary: profile size mismatch");
    double best = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) best = std::max(best, std::abs(pa[i] - pb[i]));
    return best;
}

double dbl_distance_approx(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                           const BlDictionary& dict) {
    return BlDictionary::distance(dict.profile(mu), dict.profile(nu));
}

double dbl_distance_approx(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                           int dictionary_size, std::uint64_t seed) {
    if (mu.dim() != nu.dim()) fail("dbl_distance_approx: dimension mismatch");
    BlDictionary dict(mu.dim(), dictionary_size, seed);
    return dbl_distance_approx(mu, nu, dict);
}

}  // namespace mfcn
