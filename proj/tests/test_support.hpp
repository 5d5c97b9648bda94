#pragma once

// Test-only generators and oracles. Nothing here calls into the code paths it
// is used to check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace mkteq::testing {

// Hand-rolled generator for property tests; std::mt19937_64 keeps it
// independent of the library's own RNG.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  bool coin() { return integer(0, 1) == 1; }

  // Positive weights normalized to sum to one.
  std::vector<double> simplex(std::size_t n) {
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& v : w) s += (v = uniform(0.05, 1.0));
    for (auto& v : w) v /= s;
    return w;
  }

  // Losses in [0, 1], drawn from a small lattice half the time so ties occur.
  std::vector<double> losses(std::size_t n) {
    std::vector<double> l(n);
    const bool lattice = coin();
    for (auto& v : l) v = lattice ? integer(0, 4) / 4.0 : uniform(0.0, 1.0);
    return l;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline double normal_pdf(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(lo + k * h);
  return s * h / 3.0;
}

// Setting 2 integrals: E[alpha] and E[alpha * 1[alpha < threshold]] by
// quadrature over the mixture density.
struct Setting2Oracle {
  double mu;
  double sigma;
  double prior_y1;

  double joint(double x, int y) const {
    return y == 1 ? prior_y1 * normal_pdf(x, mu, sigma)
                  : (1.0 - prior_y1) * normal_pdf(x, -mu, sigma);
  }

  double bayes_risk() const {
    return simpson([&](double x) { return std::min(joint(x, 1), joint(x, 0)); }, lo(), hi(),
                   400000);
  }

  double thresholded(double threshold) const {
    return simpson(
        [&](double x) {
          const double a = joint(x, 1);
          const double b = joint(x, 0);
          const double total = a + b;
          if (total <= 0.0) return 0.0;
          return std::min(a, b) / total < threshold ? std::min(a, b) : 0.0;
        },
        lo(), hi(), 400000);
  }

  double lo() const { return -mu - 14.0 * sigma; }
  double hi() const { return mu + 14.0 * sigma; }
};

// Setting 3 restricted to the first coordinate: subpopulation 1 has mean
// +-1 there, the other three have mean 0.
inline double setting3_dim1_bayes_risk(double sigma) {
  auto joint = [&](double x, int y) {
    const double s = y == 1 ? 1.0 : -1.0;
    return 0.5 * (0.25 * normal_pdf(x, s, sigma) + 0.75 * normal_pdf(x, 0.0, sigma));
  };
  return simpson([&](double x) { return std::min(joint(x, 1), joint(x, 0)); }, -1.0 - 14.0 * sigma,
                 1.0 + 14.0 * sigma, 400000);
}

}  // namespace mkteq::testing
