#ifndef QLINK_PULSE_HPP
#define QLINK_PULSE_HPP

#include <complex>
#include <iosfwd>
#include <vector>

#include "qlink/calibration.hpp"

namespace qlink {

/// Target traveling wavepacket on a uniform time grid.
///
/// The envelope is the nonnegative magnitude of the output field in
/// sqrt(photons/s); its squared integral equals energy_fraction for a unit
/// stored energy. Truncation efficiencies are applied at synthesis time,
/// not here.
struct WavepacketSpec {
    std::vector<double> envelope;
    double grid_dt = 2e-9;
    double carrier_detuning = 0;  ///< rad/s relative to the static mode frequency (documentation)
    double energy_fraction = 1.0;

    double duration() const { return grid_dt * double(envelope.size() - 1); }
    double energy() const;  ///< trapezoidal integral of envelope^2
    void validate() const;
};

/// sin^2-envelope packet of duration T scaled to the requested energy
/// fraction. The smooth turn-on/off keeps the pump amplitudes needed for a
/// given transfer time low.
WavepacketSpec default_wavepacket(double T, double energy_fraction, double grid_dt = 2e-9,
                                  double carrier_detuning = -6.283185307179586e6);

/// Sampled complex pump envelope xi1(t) plus the static pump xi2 with its
/// smooth ring-up/down profile.
struct PumpWaveform {
    std::vector<cplx> xi1;
    cplx xi2_static = 0;
    double ring_time = 200e-9;
    double grid_dt = 2e-9;
    // Pump-frequency offsets (rad/s) that absorb the static part of the
    // Stark shifts into the rotating frame; the equations of motion see only
    // the residual, time-varying detunings. These play the role of the pump
    // detuning and the extra relative detuning between the two pumps.
    double frame_shift_a = 0;
    double frame_shift_b = 0;

    double duration() const { return grid_dt * double(xi1.size() - 1); }

    /// xi2 with a C1 sin^2 ring-up/down of length ring_time at both ends.
    cplx xi2_at(double t) const;
};

struct SynthesisResult {
    PumpWaveform waveform;
    double solver_residual = 0;   ///< max per-step residual of the pump relation
    double peak_g = 0;            ///< max |g(t)| over the pulse, rad/s
    double boundary_amplitude = 0;  ///< |a| where the solve met the pump-off region (capture only)
    double target_energy = 0;     ///< emitted (release) or absorbed (capture) fraction
};

/// Pump envelope that makes the module emit `spec` (scaled by eta_trunc_s)
/// from a unit-energy stored state. Throws InfeasiblePulseError when the
/// required conversion rate leaves the calibrated range.
SynthesisResult synthesize_release(const DeviceParams& params, const ConversionCalibration& cal,
                                   const WavepacketSpec& spec, double eta_trunc_s = 0.99);

/// Pump envelope that absorbs the fraction eta_trunc_r of an incoming packet
/// with the shape of `incoming`. The waveform depends only on the packet
/// shape, never its amplitude.
SynthesisResult synthesize_capture(const DeviceParams& params, const ConversionCalibration& cal,
                                   const WavepacketSpec& incoming, double eta_trunc_r = 0.95,
                                   double morph_width = 0.0);

/// Waveform table (t, xi1_re, xi1_im, xi2_re, xi2_im).
void write_waveform(std::ostream& os, const PumpWaveform& w);
PumpWaveform read_waveform(std::istream& is);

} // namespace qlink

#endif
