#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsmc {

/// Three-branch sign with sign(0) == 0.
constexpr int sign(double x) noexcept {
    return (x > 0.0) ? 1 : ((x < 0.0) ? -1 : 0);
}

/**
 * @brief Tracking error and its time derivatives, [e, e', ..., e^(n-1)].
 */
class ErrorState {
public:
    ErrorState() = default;
    explicit ErrorState(std::vector<double> derivatives)
        : derivatives_(std::move(derivatives)) {
        if (derivatives_.empty())
            throw std::invalid_argument("error state must have at least one entry");
        for (double v : derivatives_)
            if (!std::isfinite(v))
                throw std::invalid_argument("error state entries must be finite");
    }

    std::size_t order() const noexcept { return derivatives_.size(); }
    std::span<const double> values() const noexcept { return derivatives_; }
    double operator[](std::size_t i) const { return derivatives_.at(i); }

private:
    std::vector<double> derivatives_;
};

/**
 * @brief Coefficients [c1, ..., c_{n-1}, 1] of the sliding variable
 *        sigma = c1*e + c2*e' + ... + e^(n-1).
 *
 * c1 multiplies the zeroth error derivative, i.e. it is the constant term of
 * the characteristic polynomial s^{n-1} + c_{n-1} s^{n-2} + ... + c1.
 * When built by binomial_surface() the pole a is remembered so that the
 * closed-form tracking bound can be evaluated.
 */
class SurfaceSpec {
public:
    static SurfaceSpec from_coefficients(std::vector<double> coeffs) {
        if (coeffs.empty())
            throw std::invalid_argument("surface needs at least one coefficient");
        for (double c : coeffs)
            if (!std::isfinite(c))
                throw std::invalid_argument("surface coefficients must be finite");
        if (coeffs.back() != 1.0)
            throw std::invalid_argument("last surface coefficient must be exactly 1");
        return SurfaceSpec(std::move(coeffs), std::nullopt);
    }

    std::size_t order() const noexcept { return coeffs_.size(); }
    std::span<const double> coeffs() const noexcept { return coeffs_; }
    std::optional<double> pole() const noexcept { return pole_; }

    friend bool operator==(const SurfaceSpec&, const SurfaceSpec&) = default;

private:
    SurfaceSpec(std::vector<double> coeffs, std::optional<double> pole)
        : coeffs_(std::move(coeffs)), pole_(pole) {}

    friend SurfaceSpec binomial_surface(int n, double a);

    std::vector<double> coeffs_;
    std::optional<double> pole_;
};

inline double evaluate_sigma(std::span<const double> e, const SurfaceSpec& spec) {
    if (e.size() != spec.order())
        throw std::invalid_argument("error state has " + std::to_string(e.size()) +
                                    " entries, surface expects " +
                                    std::to_string(spec.order()));
    double sigma = 0.0;
    const auto c = spec.coeffs();
    for (std::size_t i = 0; i < e.size(); ++i) sigma += c[i] * e[i];
    return sigma;
}

inline double evaluate_sigma(const ErrorState& e, const SurfaceSpec& spec) {
    return evaluate_sigma(e.values(), spec);
}

inline double binomial_coefficient(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return std::round(r);
}

/// Coefficients of (s + a)^{n-1}; c_i = C(n-1, n-i) * a^{n-i}.
inline SurfaceSpec binomial_surface(int n, double a) {
    if (n < 2) throw std::invalid_argument("binomial surface requires order n >= 2");
    if (!(a > 0.0) || !std::isfinite(a))
        throw std::invalid_argument("binomial surface requires a finite pole a > 0");
    std::vector<double> c(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i)
        c[static_cast<std::size_t>(i - 1)] =
            binomial_coefficient(n - 1, n - i) * std::pow(a, n - i);
    return SurfaceSpec(std::move(c), a);
}

/**
 * @brief Routh-Hurwitz test on the monic polynomial whose ascending-power
 *        coefficients are given (last entry is the leading coefficient).
 *
 * A zero in the first column (marginal or degenerate case) counts as not
 * Hurwitz. Degree-0 input is trivially Hurwitz.
 */
inline bool is_hurwitz(std::span<const double> coeffs) {
    if (coeffs.empty()) throw std::invalid_argument("empty coefficient list");
    for (double c : coeffs)
        if (!std::isfinite(c)) throw std::invalid_argument("non-finite coefficient");
    const std::size_t degree = coeffs.size() - 1;
    if (degree == 0) return true;

    // descending powers, normalized to a positive leading coefficient
    std::vector<double> desc(coeffs.rbegin(), coeffs.rend());
    if (desc.front() == 0.0) throw std::invalid_argument("leading coefficient is zero");
    if (desc.front() < 0.0)
        for (double& d : desc) d = -d;
    for (double d : desc)
        if (!(d > 0.0)) return false;

    const std::size_t width = degree / 2 + 1;
    std::vector<double> prev(width, 0.0), cur(width, 0.0);
    for (std::size_t j = 0; j < width; ++j) {
        if (2 * j < desc.size()) prev[j] = desc[2 * j];
        if (2 * j + 1 < desc.size()) cur[j] = desc[2 * j + 1];
    }
    for (std::size_t row = 1; row <= degree; ++row) {
        if (!(cur[0] > 0.0)) return false;
        std::vector<double> next(width, 0.0);
        for (std::size_t j = 0; j + 1 < width; ++j)
            next[j] = (cur[0] * prev[j + 1] - prev[0] * cur[j + 1]) / cur[0];
        prev = std::move(cur);
        cur = std::move(next);
    }
    return true;
}

/**
 * @brief Residual bound |e^(i)| < (2a)^i * epsilon / a^{n-1} once |sigma| < epsilon.
 *
 * Only defined for surfaces built by binomial_surface().
 */
inline double tracking_bound(const SurfaceSpec& spec, double epsilon, int i) {
    const auto a = spec.pole();
    if (!a)
        throw std::logic_error(
            "tracking bound requires binomial surface coefficients (pole not set)");
    const int n = static_cast<int>(spec.order());
    if (i < 0 || i > n - 1) throw std::out_of_range("derivative index out of range");
    if (epsilon < 0.0) throw std::invalid_argument("epsilon must be non-negative");
    return std::pow(2.0 * *a, i) * epsilon / std::pow(*a, n - 1);
}

}  // namespace qsmc
