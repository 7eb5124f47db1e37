#include "gridprobe/zip.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gridprobe {

namespace {

Eigen::MatrixXd regressor(std::span<const double> u) {
    Eigen::MatrixXd U(u.size(), 3);
    for (std::size_t t = 0; t < u.size(); ++t) U.row(t) << u[t] * u[t], u[t], 1.0;
    return U;
}

}  // namespace

VandermondeDiagnostics vandermonde_conditioning(std::span<const double> u) {
    if (u.size() < 3) throw std::invalid_argument("Vandermonde diagnostics need at least three voltages");
    VandermondeDiagnostics diag;
    if (u.size() == 3) diag.determinant = (u[0] - u[1]) * (u[0] - u[2]) * (u[1] - u[2]);

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(regressor(u));
    const Eigen::VectorXd& s = svd.singularValues();
    diag.condition_number = s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();
    return diag;
}

ZipFit fit_zip(std::span<const double> u, std::span<const double> consumption) {
    if (u.size() != consumption.size()) throw std::invalid_argument("voltage and consumption series differ in length");
    if (u.size() < 3) throw std::invalid_argument("ZIP fit needs at least three slots");
    for (double x : u)
        if (!(x > 0.0)) throw std::invalid_argument("ZIP fit needs positive voltage magnitudes");

    ZipFit fit;
    fit.diagnostics = vandermonde_conditioning(u);
    if (fit.diagnostics.determinant && std::abs(*fit.diagnostics.determinant) < kZipMinDeterminant)
        throw IllPosedError("singular ZIP regressor (determinant " + std::to_string(*fit.diagnostics.determinant) + ")",
                            fit.diagnostics);
    if (!(fit.diagnostics.condition_number <= kZipMaxCondition))
        throw IllPosedError("ill-posed ZIP regressor (condition number " +
                                std::to_string(fit.diagnostics.condition_number) + ")",
                            fit.diagnostics);
    fit.ill_conditioned = fit.diagnostics.condition_number >= kZipWarnCondition;

    const Eigen::MatrixXd U = regressor(u);
    const Eigen::Map<const Eigen::VectorXd> s(consumption.data(), static_cast<Eigen::Index>(consumption.size()));
    const Eigen::Vector3d c = U.colPivHouseholderQr().solve(s);
    fit.coefficients = {c[0], c[1], c[2]};
    fit.residual = (U * c - s).norm();
    return fit;
}

}  // namespace gridprobe
