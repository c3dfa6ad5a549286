#include "qlink/calibration.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <ostream>

#include "qlink/errors.hpp"
#include "qlink/table_io.hpp"

namespace qlink {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
}

void DeviceParams::validate() const {
    if (kappa_out < 0 || kappa_0 < 0 || T1_a < 0 || T1_t < 0 || T2R_t < 0)
        throw ValidationError("device rates and times must be nonnegative");
    if (kappa_0 > 0 && kappa_out < 100.0 * kappa_0)
        throw ValidationError("kappa_out must dominate intrinsic decay (kappa_out >= 100 kappa_0)");
    if (p_excite_static < 0 || p_excite_static > 1)
        throw ValidationError("p_excite_static must lie in [0, 1]");
}

DeviceParams DeviceParams::sender_defaults() {
    DeviceParams p;
    p.omega_a = two_pi * 4219.3e6;
    p.omega_b = two_pi * 10031.5e6;
    p.omega_t = two_pi * 6156.1e6;
    p.chi_ab = two_pi * -16e3;
    p.chi_at = two_pi * -2.86e6;
    p.chi_bt = two_pi * -2.4e6;
    p.chi_aa = two_pi * -8e3;
    p.chi_bb = two_pi * -8e3;
    p.chi_tt = two_pi * -183.43e6;
    p.T1_a = 460e-6;
    p.T1_t = 26e-6;
    p.T2R_t = 12e-6;
    p.kappa_out = 1.0 / 0.14e-6;  // communication mode T1 = 0.14 us
    p.kappa_0 = 1.0 / p.T1_a;
    p.p_excite_static = 0.195;
    return p;
}

DeviceParams DeviceParams::receiver_defaults() {
    DeviceParams p;
    p.omega_a = two_pi * 4269.6e6;
    p.omega_b = two_pi * 10031.5e6;
    p.omega_t = two_pi * 6417.6e6;
    p.chi_ab = two_pi * -12e3;
    p.chi_at = two_pi * -2.29e6;
    p.chi_bt = two_pi * -2.18e6;
    p.chi_aa = two_pi * -5e3;
    p.chi_bb = two_pi * -6e3;
    p.chi_tt = two_pi * -196.17e6;
    p.T1_a = 770e-6;
    p.T1_t = 27e-6;
    p.T2R_t = 12e-6;
    p.kappa_out = 1.0 / 0.11e-6;  // communication mode T1 = 0.11 us
    p.kappa_0 = 1.0 / p.T1_a;
    p.p_excite_static = 0.209;
    return p;
}

ConversionCalibration ConversionCalibration::from_device(const DeviceParams& params, double max_g,
                                                         double xi2_photons, double limit_photons,
                                                         double anchor_photons) {
    ConversionCalibration cal;
    cal.pump_photon_limit = limit_photons;
    cal.xi2_photons = xi2_photons;
    cal.g_cap = max_g;
    cal.g0 = max_g / (std::sqrt(anchor_photons) * std::sqrt(xi2_photons));
    cal.stark_a1 = 2.0 * params.chi_aa;
    cal.stark_a2 = params.chi_ab;
    cal.stark_b2 = 2.0 * params.chi_bb;
    cal.stark_b1 = params.chi_ab;
    return cal;
}

double ConversionCalibration::max_conversion_rate(double xi2_amplitude) const {
    const double range = std::abs(g0) * std::sqrt(pump_photon_limit) * std::abs(xi2_amplitude);
    return g_cap > 0 ? std::min(g_cap, range) : range;
}

cplx g_of_pumps(const ConversionCalibration& cal, cplx xi1, cplx xi2) {
    const double limit = cal.pump_photon_limit * (1.0 + 1e-12);
    if (std::norm(xi1) > limit || std::norm(xi2) > limit)
        throw ValidationError("pump amplitude outside calibrated range (|xi|^2 > " +
                              std::to_string(cal.pump_photon_limit) +
                              "); refusing to extrapolate");
    return cal.g0 * xi1 * xi2;
}

std::pair<double, double> stark_shifts(const ConversionCalibration& cal, cplx xi1, cplx xi2) {
    const double p1 = std::norm(xi1), p2 = std::norm(xi2);
    return {cal.stark_a1 * p1 + cal.stark_a2 * p2, cal.stark_b2 * p2 + cal.stark_b1 * p1};
}

ConversionCalibration fit_calibration(const std::vector<CalibrationSample>& samples) {
    if (samples.size() < 4)
        throw ValidationError("fit_calibration needs at least 4 samples");

    bool axis1 = false, axis2 = false;
    for (const auto& s : samples) {
        if (std::norm(s.xi1) > 0) axis1 = true;
        if (std::norm(s.xi2) > 0) axis2 = true;
    }
    if (!axis1 || !axis2)
        throw ValidationError("fit_calibration samples must span both pump axes");

    ConversionCalibration cal;

    // Bilinear g model: closed-form complex least squares.
    cplx num = 0;
    double den = 0;
    for (const auto& s : samples) {
        cplx basis = s.xi1 * s.xi2;
        num += std::conj(basis) * s.g;
        den += std::norm(basis);
    }
    if (den <= 0) throw ValidationError("fit_calibration: no sample excites both pumps at once");
    cal.g0 = num / den;

    // Stark coefficients: two independent 2-parameter linear fits on the
    // pump powers.
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd design(n, 2);
    Eigen::VectorXd ya(n), yb(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design(i, 0) = std::norm(samples[i].xi1);
        design(i, 1) = std::norm(samples[i].xi2);
        ya(i) = samples[i].delta_a;
        yb(i) = samples[i].delta_b;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < 2)
        throw ValidationError("fit_calibration: rank-deficient sample set (pump powers colinear)");
    Eigen::Vector2d ca = qr.solve(ya);
    Eigen::Vector2d cb = qr.solve(yb);
    cal.stark_a1 = ca(0);
    cal.stark_a2 = ca(1);
    cal.stark_b1 = cb(0);
    cal.stark_b2 = cb(1);

    double res = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        res += std::norm(cal.g0 * samples[i].xi1 * samples[i].xi2 - samples[i].g);
        res += std::pow(design.row(i).dot(ca) - ya(i), 2);
        res += std::pow(design.row(i).dot(cb) - yb(i), 2);
    }
    cal.fit_residual = std::sqrt(res);
    return cal;
}

std::vector<CalibrationSample> synthesize_samples(
    const ConversionCalibration& cal, const std::vector<std::pair<cplx, cplx>>& pumps) {
    std::vector<CalibrationSample> out;
    out.reserve(pumps.size());
    for (const auto& [xi1, xi2] : pumps) {
        CalibrationSample s;
        s.xi1 = xi1;
        s.xi2 = xi2;
        s.g = cal.g0 * xi1 * xi2;
        std::tie(s.delta_a, s.delta_b) = stark_shifts(cal, xi1, xi2);
        out.push_back(s);
    }
    return out;
}

void write_calibration_samples(std::ostream& os, const std::vector<CalibrationSample>& samples) {
    Table t;
    t.comments = {"conversion calibration samples",
                  "pump amplitudes dimensionless (|xi|^2 = circulating pump photons); "
                  "g and Stark shifts in rad/s"};
    t.columns = {"xi1_re", "xi1_im", "xi2_re", "xi2_im", "g_re", "g_im", "delta_a", "delta_b"};
    for (const auto& s : samples)
        t.rows.push_back({s.xi1.real(), s.xi1.imag(), s.xi2.real(), s.xi2.imag(), s.g.real(),
                          s.g.imag(), s.delta_a, s.delta_b});
    write_table(os, t);
}

std::vector<CalibrationSample> read_calibration_samples(std::istream& is) {
    Table t = read_table(is);
    const auto x1r = t.column_index("xi1_re"), x1i = t.column_index("xi1_im");
    const auto x2r = t.column_index("xi2_re"), x2i = t.column_index("xi2_im");
    const auto gr = t.column_index("g_re"), gi = t.column_index("g_im");
    const auto da = t.column_index("delta_a"), db = t.column_index("delta_b");
    std::vector<CalibrationSample> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        CalibrationSample s;
        s.xi1 = {r[x1r], r[x1i]};
        s.xi2 = {r[x2r], r[x2i]};
        s.g = {r[gr], r[gi]};
        s.delta_a = r[da];
        s.delta_b = r[db];
        out.push_back(s);
    }
    return out;
}

} // namespace qlink
