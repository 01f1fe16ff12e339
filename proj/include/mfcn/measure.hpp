#pragma once

#include <span>
#include <vector>

#include "mfcn/common.hpp"
#include "mfcn/grid.hpp"

namespace mfcn {

// Finite weighted atomic measure on R^d. Immutable after construction; the
// mass and (mass-normalized) mean are precomputed with deterministic pairwise
// sums so coefficient evaluations stay O(1) per particle.
class EmpiricalMeasure {
  public:
    EmpiricalMeasure() = default;

    EmpiricalMeasure(int dim, std::vector<double> atoms, std::vector<double> weights)
        : dim_(dim), atoms_(std::move(atoms)), weights_(std::move(weights)) {
        if (dim_ < 1) fail("EmpiricalMeasure: dimension must be >= 1");
        if (atoms_.size() != weights_.size() * static_cast<std::size_t>(dim_))
            fail("EmpiricalMeasure: atom/weight length mismatch");
        for (double w : weights_)
            if (!(w >= 0.0)) fail("EmpiricalMeasure: weights must be nonnegative");
        recompute_moments();
    }

    static EmpiricalMeasure dirac(std::span<const double> point, double weight = 1.0) {
        return EmpiricalMeasure(static_cast<int>(point.size()),
                                std::vector<double>(point.begin(), point.end()), {weight});
    }

    static EmpiricalMeasure dirac1d(double x, double weight = 1.0) {
        return EmpiricalMeasure(1, {x}, {weight});
    }

    int dim() const { return dim_; }
    int size() const { return static_cast<int>(weights_.size()); }
    const std::vector<double>& atoms() const { return atoms_; }
    const std::vector<double>& weights() const { return weights_; }
    const double* atom(int i) const { return atoms_.data() + static_cast<std::ptrdiff_t>(i) * dim_; }
    double weight(int i) const { return weights_[static_cast<std::size_t>(i)]; }

    double mass() const { return mass_; }
    // Mass-normalized mean; zero vector for the null measure.
    const std::vector<double>& mean() const { return mean_; }

    bool is_probability(double tol = 1e-12) const { return std::abs(mass_ - 1.0) <= tol; }

  private:
    void recompute_moments() {
        mass_ = pairwise_sum(weights_);
        mean_.assign(dim_, 0.0);
        if (mass_ <= 0.0 || weights_.empty()) return;
        std::vector<double> acc(weights_.size());
        for (int c = 0; c < dim_; ++c) {
            for (std::size_t i = 0; i < weights_.size(); ++i)
                acc[i] = weights_[i] * atoms_[i * dim_ + c];
            mean_[c] = pairwise_sum(acc) / mass_;
        }
    }

    int dim_ = 1;
    std::vector<double> atoms_;
    std::vector<double> weights_;
    double mass_ = 0.0;
    std::vector<double> mean_;
};

// Time-grid-indexed measure flow: one measure per grid point.
struct MeasureFlow {
    TimeGrid grid;
    std::vector<EmpiricalMeasure> measures;

    const EmpiricalMeasure& at(int j) const { return measures[static_cast<std::size_t>(j)]; }
    const EmpiricalMeasure& terminal() const { return measures.back(); }

    void check() const {
        if (static_cast<int>(measures.size()) != grid.points())
            fail("MeasureFlow: expected one measure per grid point");
    }
};

// Mean of test function values against a measure, deterministic reduction.
template <class F>
double integrate(const EmpiricalMeasure& mu, F&& f) {
    const int n = mu.size();
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) terms[static_cast<std::size_t>(i)] = mu.weight(i) * f(mu.atom(i));
    return pairwise_sum(terms);
}

}  // namespace mfcn
