#ifndef QLINK_CALIBRATION_HPP
#define QLINK_CALIBRATION_HPP

#include <complex>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace qlink {

using cplx = std::complex<double>;

/// Per-module Hamiltonian and damping constants. All rates are angular
/// (rad/s), all times are seconds. Shipped defaults carry the measured
/// values of the two hardware modules verbatim.
struct DeviceParams {
    double omega_a = 0;  ///< memory mode frequency
    double omega_b = 0;  ///< communication mode frequency
    double omega_t = 0;  ///< transmon frequency
    double chi_ab = 0, chi_at = 0, chi_bt = 0;  ///< cross-Kerr
    double chi_aa = 0, chi_bb = 0, chi_tt = 0;  ///< self-Kerr
    double kappa_out = 0;  ///< communication mode output coupling
    double kappa_0 = 0;    ///< intrinsic memory decay
    double T1_a = 0, T1_t = 0, T2R_t = 0;
    double p_excite_static = 0;  ///< equilibrium transmon excitation

    void validate() const;

    static DeviceParams sender_defaults();
    static DeviceParams receiver_defaults();
};

/// One calibration point: pump amplitudes (dimensionless, |xi|^2 counts
/// circulating pump photons), measured conversion rate and Stark shifts.
struct CalibrationSample {
    cplx xi1, xi2;
    cplx g = 0;          // rad/s
    double delta_a = 0;  // rad/s
    double delta_b = 0;  // rad/s
};

/// Empirical map from pump amplitudes to conversion rate and Stark shifts.
///
/// The conversion model is the lowest-order bilinear form g = g0 xi1 xi2
/// (model_order names it, leaving room for higher-order maps; none ships).
/// Stark shifts are linear in the pump powers:
///   delta_a = stark_a1 |xi1|^2 + stark_a2 |xi2|^2
///   delta_b = stark_b2 |xi2|^2 + stark_b1 |xi1|^2
/// evaluated at the instantaneous amplitudes of both pumps.
struct ConversionCalibration {
    cplx g0 = 0;          // rad/s per unit xi1*xi2
    double stark_a1 = 0;  // rad/s per |xi1|^2, nominally 2 chi_aa
    double stark_a2 = 0;  // rad/s per |xi2|^2, nominally chi_ab
    double stark_b2 = 0;  // rad/s per |xi2|^2, nominally 2 chi_bb
    double stark_b1 = 0;  // rad/s per |xi1|^2, nominally chi_ab
    double pump_photon_limit = 50.0;  // refuse to extrapolate beyond this |xi|^2
    double xi2_photons = 25.0;        // operating point of the static pump
    double g_cap = 0;                 // pump budget: largest reachable |g|, rad/s
    std::string model_order = "bilinear";
    double fit_residual = 0.0;

    /// Calibration implied by device constants. The pump budget caps |g| at
    /// max_g (rad/s); the bilinear gain is anchored so the cap is reached at
    /// anchor_photons circulating photons on the time-varying pump.
    static ConversionCalibration from_device(const DeviceParams& params, double max_g,
                                             double xi2_photons, double limit_photons = 50.0,
                                             double anchor_photons = 4.0);

    double max_conversion_rate(double xi2_amplitude) const;
};

/// Bilinear conversion rate; carries the phases of both pumps.
cplx g_of_pumps(const ConversionCalibration& cal, cplx xi1, cplx xi2);

/// Stark shifts (delta_a, delta_b) in rad/s.
std::pair<double, double> stark_shifts(const ConversionCalibration& cal, cplx xi1, cplx xi2);

/// Least-squares fit of g0 and the four Stark coefficients.
/// Requires at least 4 samples spanning both pump axes.
ConversionCalibration fit_calibration(const std::vector<CalibrationSample>& samples);

/// Noiseless samples predicted by a calibration at the given pump points.
std::vector<CalibrationSample> synthesize_samples(const ConversionCalibration& cal,
                                                  const std::vector<std::pair<cplx, cplx>>& pumps);

/// Flat table exchange, columns
/// (xi1_re, xi1_im, xi2_re, xi2_im, g_re, g_im, delta_a, delta_b).
void write_calibration_samples(std::ostream& os, const std::vector<CalibrationSample>& samples);
std::vector<CalibrationSample> read_calibration_samples(std::istream& is);

} // namespace qlink

#endif
