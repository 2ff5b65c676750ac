#include "macy/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

namespace macy {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

// 8-point Gauss-Legendre abscissae and weights on [-1, 1].
constexpr double kGlX[8] = {
    -0.9602898564975362, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
    0.7966664774136267,  0.9602898564975362};
constexpr double kGlW[8] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};

}  // namespace

double integrate_gl(const std::function<double(double)>& f, double a, double b,
                    int panels) {
    if (panels < 1) throw std::invalid_argument("integrate_gl: panels must be >= 1");
    const double w = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + w * static_cast<double>(p);
        const double mid = lo + 0.5 * w;
        double acc = 0.0;
        for (int q = 0; q < 8; ++q) acc += kGlW[q] * f(mid + 0.5 * w * kGlX[q]);
        total += acc * 0.5 * w;
    }
    return total;
}

double integrate_gl_2d(const std::function<double(double, double)>& f,
                       double ax, double bx, double ay, double by,
                       int panels_x, int panels_y) {
    if (panels_x < 1 || panels_y < 1)
        throw std::invalid_argument("integrate_gl_2d: panels must be >= 1");
    const double wx = (bx - ax) / static_cast<double>(panels_x);
    const double wy = (by - ay) / static_cast<double>(panels_y);
    double total = 0.0;
    for (int px = 0; px < panels_x; ++px) {
        const double mx = ax + wx * (static_cast<double>(px) + 0.5);
        for (int py = 0; py < panels_y; ++py) {
            const double my = ay + wy * (static_cast<double>(py) + 0.5);
            double acc = 0.0;
            for (int qx = 0; qx < 8; ++qx) {
                const double x = mx + 0.5 * wx * kGlX[qx];
                double row = 0.0;
                for (int qy = 0; qy < 8; ++qy)
                    row += kGlW[qy] * f(x, my + 0.5 * wy * kGlX[qy]);
                acc += kGlW[qx] * row;
            }
            total += acc * 0.25 * wx * wy;
        }
    }
    return total;
}

CubicHermite::CubicHermite(double x0, double h, std::vector<double> values,
                           std::vector<double> derivs)
    : x0_(x0), h_(h), n_(static_cast<int>(values.size())),
      f_(std::move(values)), d_(std::move(derivs)) {
    if (n_ < 2) throw std::invalid_argument("CubicHermite: need at least 2 nodes");
    if (d_.size() != f_.size())
        throw std::invalid_argument("CubicHermite: values/derivs size mismatch");
    if (!(h_ > 0.0)) throw std::invalid_argument("CubicHermite: h must be positive");
}

double CubicHermite::value(double x) const {
    double s = (x - x0_) / h_;
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 0, n_ - 2);
    const double t = s - static_cast<double>(i);
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + t;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    return h00 * f_[i] + h10 * h_ * d_[i] + h01 * f_[i + 1] + h11 * h_ * d_[i + 1];
}

double CubicHermite::deriv(double x) const {
    double s = (x - x0_) / h_;
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 0, n_ - 2);
    const double t = s - static_cast<double>(i);
    const double t2 = t * t;
    const double g00 = (6.0 * t2 - 6.0 * t) / h_;
    const double g10 = 3.0 * t2 - 4.0 * t + 1.0;
    const double g01 = (-6.0 * t2 + 6.0 * t) / h_;
    const double g11 = 3.0 * t2 - 2.0 * t;
    return g00 * f_[i] + g10 * d_[i] + g01 * f_[i + 1] + g11 * d_[i + 1];
}

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, double initial_step,
                             double tol, int max_evals) {
    const std::size_t n = x0.size();
    if (n == 0) throw std::invalid_argument("nelder_mead: empty start point");

    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return f(x);
    };

    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += initial_step;
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

    const double alpha = 1.0, gamma = 2.0, beta = 0.5, delta = 0.5;
    std::vector<std::size_t> order(n + 1);

    while (evals < max_evals) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];
        if (std::abs(fv[worst] - fv[best]) <= tol * (1.0 + std::abs(fv[best]))) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k];
        }
        for (std::size_t k = 0; k < n; ++k) centroid[k] /= static_cast<double>(n);

        auto blend = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t k = 0; k < n; ++k)
                p[k] = centroid[k] + coef * (simplex[worst][k] - centroid[k]);
            return p;
        };

        std::vector<double> xr = blend(-alpha);
        double fr = eval(xr);
        if (fr < fv[best]) {
            std::vector<double> xe = blend(-gamma);
            double fe = eval(xe);
            if (fe < fr) {
                simplex[worst] = std::move(xe);
                fv[worst] = fe;
            } else {
                simplex[worst] = std::move(xr);
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            simplex[worst] = std::move(xr);
            fv[worst] = fr;
        } else {
            std::vector<double> xc = blend(fr < fv[worst] ? -beta : beta);
            double fc = eval(xc);
            if (fc < std::min(fr, fv[worst])) {
                simplex[worst] = std::move(xc);
                fv[worst] = fc;
            } else {
                // shrink toward the best vertex
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < n; ++k)
                        simplex[i][k] = simplex[best][k] +
                                        delta * (simplex[i][k] - simplex[best][k]);
                    fv[i] = eval(simplex[i]);
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    return {simplex[best], fv[best], evals};
}

int worker_thread_count() {
    if (const char* env = std::getenv("MA_CY_THREADS")) {
        try {
            int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
            // fall through to the hardware default on unparsable values
        }
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(worker_thread_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi]() {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace macy
