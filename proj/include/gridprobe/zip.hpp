#pragma once

#include <optional>
#include <span>

#include "gridprobe/errors.hpp"

namespace gridprobe {

/// Composite load: consumption = alpha u^2 + beta u + gamma, u the voltage magnitude.
struct ZipCoefficients {
    double alpha = 0.0;  // constant impedance
    double beta = 0.0;   // constant current
    double gamma = 0.0;  // constant power

    double consumption(double u) const noexcept { return (alpha * u + beta) * u + gamma; }
    double derivative(double u) const noexcept { return 2.0 * alpha * u + beta; }
};

struct VandermondeDiagnostics {
    /// (u1 - u2)(u1 - u3)(u2 - u3); only defined for exactly three samples.
    std::optional<double> determinant;
    /// 2-norm condition number of the [u^2, u, 1] regressor.
    double condition_number = 0.0;
};

VandermondeDiagnostics vandermonde_conditioning(std::span<const double> u);

/// Regressors with condition number at or above this are flagged ill-conditioned.
inline constexpr double kZipWarnCondition = 1e10;
/// Above this the fit is refused.
inline constexpr double kZipMaxCondition = 1e12;
/// Three-sample fits with |determinant| below this are refused.
inline constexpr double kZipMinDeterminant = 1e-12;

class IllPosedError : public Error {
public:
    IllPosedError(const std::string& what, VandermondeDiagnostics diagnostics)
        : Error(what), diagnostics_(diagnostics) {}
    const VandermondeDiagnostics& diagnostics() const noexcept { return diagnostics_; }

private:
    VandermondeDiagnostics diagnostics_;
};

struct ZipFit {
    ZipCoefficients coefficients;
    double residual = 0.0;  // 2-norm of the fit residual
    VandermondeDiagnostics diagnostics;
    bool ill_conditioned = false;
};

/// Least-squares ZIP fit of per-slot consumption (-p or -q) against voltage
/// magnitude. Needs at least three slots and positive voltages; throws
/// IllPosedError for a singular or near-singular regressor.
ZipFit fit_zip(std::span<const double> u, std::span<const double> consumption);

}  // namespace gridprobe
