#pragma once

#include <cstdint>
#include <vector>

#include "mfcn/measure.hpp"

namespace mfcn {

inline constexpr int kDefaultLpCap = 512;

// Exact bounded-Lipschitz distance between finite atomic measures:
//   sup { |<f,mu> - <f,nu>| : ||f||_inf <= 1, Lip(f) <= 1 }.
// Solved as a linear program over the union support via its min-cost-flow
// dual. Throws if the combined support exceeds lp_cap.
double dbl_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                    int lp_cap = kDefaultLpCap);

// Seeded dictionary of valid test functions (constant, clipped affine,
// radial tents). Every member satisfies ||f||_inf <= 1 and Lip(f) <= 1, so
// the dictionary maximum is a guaranteed lower bound on dbl_distance.
// Construction depends only on (dim, size, seed), never on the measures, so
// values are comparable across ensemble sizes.
class BlDictionary {
  public:
    BlDictionary(int dim, int size, std::uint64_t seed);

    int size() const { return static_cast<int>(kinds_.size()); }
    int dim() const { return dim_; }

    double evaluate(int member, const double* x) const;

    // <f_i, mu> for every dictionary member.
    std::vector<double> profile(const EmpiricalMeasure& mu) const;

    static double distance(const std::vector<double>& profile_a,
                           const std::vector<double>& profile_b);

  private:
    enum class Kind { constant_one, coordinate, affine, radial_up, radial_down };
    int dim_ = 1;
    std::vector<Kind> kinds_;
    std::vector<int> axis_;              // coordinate members: axis index, sign in scale_
    std::vector<double> scale_;          // coordinate sign / affine normalization
    std::vector<std::vector<double>> dir_;  // affine direction (unit) or radial center
    std::vector<double> offset_;         // affine offset
};

// Dictionary lower bound on dbl_distance.
double dbl_distance_approx(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                           int dictionary_size, std::uint64_t seed);
double dbl_distance_approx(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                           const BlDictionary& dict);

}  // namespace mfcn
