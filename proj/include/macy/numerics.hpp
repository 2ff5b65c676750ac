#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "macy/geometry.hpp"

namespace macy {

/** Shortest decimal representation that round-trips to the same double.
 *  All file output goes through this so reruns are byte-identical. */
std::string format_double(double v);

/** Composite Gauss-Legendre quadrature, 8 points per panel.
 *  Exact for polynomials of degree 15; panels keep analytic integrands
 *  near machine precision on moderate intervals. */
double integrate_gl(const std::function<double(double)>& f, double a, double b,
                    int panels);

/** Tensor product of the 1d rule over an axis-aligned rectangle. */
double integrate_gl_2d(const std::function<double(double, double)>& f,
                       double ax, double bx, double ay, double by,
                       int panels_x, int panels_y);

/** Cubic Hermite interpolant on a uniform grid: values and first derivatives
 *  at the nodes, C1 piecewise cubic in between (O(h^4) for smooth data). */
class CubicHermite {
  public:
    CubicHermite() = default;
    CubicHermite(double x0, double h, std::vector<double> values,
                 std::vector<double> derivs);

    double x_min() const { return x0_; }
    double x_max() const { return x0_ + h_ * static_cast<double>(n_ - 1); }

    double value(double x) const;
    double deriv(double x) const;

  private:
    double x0_ = 0.0;
    double h_ = 1.0;
    int n_ = 0;
    std::vector<double> f_;
    std::vector<double> d_;
};

/** Nelder-Mead simplex minimizer. Deterministic for fixed inputs; intended
 *  for low-dimensional smooth fits where gradients are a nuisance to derive. */
struct NelderMeadResult {
    std::vector<double> x;
    double fx = 0.0;
    int evaluations = 0;
};

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, double initial_step,
                             double tol, int max_evals);

/** Worker-thread cap: MA_CY_THREADS if set and positive, otherwise the
 *  hardware concurrency. */
int worker_thread_count();

/** Runs fn(i) for i in [0, n). Splits into contiguous chunks over at most
 *  worker_thread_count() threads; iterations must write disjoint state so
 *  results are identical for every thread count. */
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace macy
