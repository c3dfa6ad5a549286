#ifndef QLINK_CODES_HPP
#define QLINK_CODES_HPP

#include <array>
#include <string>
#include <vector>

#include "qlink/fock.hpp"

namespace qlink {

/// Logical encoding of one qubit in the Fock space of a cavity.
struct CodeSpec {
    ComplexVector<> logical_zero;
    ComplexVector<> logical_one;
    std::string name;
    double mean_photon_number = 0;  ///< averaged over the six cardinal states

    Index dim() const { return logical_zero.size(); }
    void validate() const;

    /// Single-photon encoding {|0>, |1>}, nbar = 0.5.
    static CodeSpec fock(Index dim = 8);
    /// Binomial L = 1 encoding {|2>, (|0>+|4>)/sqrt(2)}, nbar = 2.
    static CodeSpec binomial(Index dim = 8);
};

/// Six cardinal states in the order +Z, -Z, +X, -X, +Y, -Y.
/// Convention: +Z is the logical one state (poles match the published Bloch
/// figures, where loss drives the single-photon octahedron to the -Z = |0>
/// pole and the binomial one toward (0, 0, +1/2)).
std::array<ComplexVector<>, 6> cardinal_states(const CodeSpec& code);

enum class LossVariant { pure_loss, thermal_gain, dephasing_mix };

/// Photon-loss channel: beamsplitter to a cold (or thermal) ancilla that is
/// traced out, plus optional qubit-dephasing admixture.
struct LossChannelSpec {
    double p_loss = 0;
    LossVariant variant = LossVariant::pure_loss;
    double nbar_bath = 0;  ///< thermal_gain: bath occupation
    double weight = 0;     ///< thermal_gain / dephasing_mix admixture in [0, 1]

    double theta() const;  ///< beamsplitter angle 2 acos(sqrt(1 - p_loss))
    void validate() const;
};

QuantumState apply_loss(const QuantumState& state, const LossChannelSpec& spec);

/// Self-Kerr evolution of a cavity state for time t (chi in rad/s).
QuantumState kerr_evolve(const QuantumState& state, double chi, double t);

/// Phase collapse time pi / (2 sqrt(nbar) chi).
double kerr_collapse_time(double nbar, double chi);

/// Single effective Kerr rate that best undoes the phase distortion of the
/// received states: argmin over chi of the mean infidelity between
/// kerr_evolve(received, -chi, t) and the prepared states.
double fit_effective_kerr(const std::vector<QuantumState>& prepared,
                          const std::vector<QuantumState>& received, double t);

/// Parity-syndrome correction for the binomial code: the odd subspace is
/// mapped back by |1> -> |2>, |3> -> (|0>+|4>)/sqrt(2); the even subspace
/// gets the rotation that reweights |0> and |4> by theta_c. The two parity
/// blocks recombine with their probabilities unchanged.
QuantumState parity_correct(const QuantumState& state, double theta_c);

/// Correction angle minimizing the mean infidelity of the corrected binomial
/// cardinal states after loss p_loss. Deterministic golden-section search.
double optimize_theta_c(double p_loss);

/// Mean fidelity of the six cardinal states through a loss channel, with or
/// without parity correction (theta_c < -pi flags "no correction").
double mean_cardinal_fidelity(const CodeSpec& code, const LossChannelSpec& loss,
                              double theta_c = -10.0);

struct BreakEvenRow {
    double eta = 0;
    double infid_fock = 0;
    double infid_binomial = 0;
    double infid_corrected = 0;
    double theta_c = 0;
};

/// Average infidelity of both encodings (and the corrected binomial) across
/// a transfer-efficiency grid. Grid points fan out over a worker pool.
std::vector<BreakEvenRow> break_even_sweep(const std::vector<double>& etas, int threads = 0);

/// Efficiency at which the corrected-binomial curve crosses the Fock curve
/// (linear interpolation on the grid); NaN when no crossing is bracketed.
double break_even_crossing(const std::vector<BreakEvenRow>& rows);

/// Sweep table (eta, infid_fock, infid_binomial, infid_corrected, theta_c_opt).
void write_break_even_table(std::ostream& os, const std::vector<BreakEvenRow>& rows);

struct BlochVector {
    double x = 0, y = 0, z = 0;
};

/// Codespace projection of a physical state expressed as an (unnormalized)
/// logical Bloch vector; leakage out of the codespace shrinks the vector.
BlochVector logical_bloch(const CodeSpec& code, const QuantumState& state);

/// Loss trajectory of one cardinal state across an efficiency grid.
std::vector<BlochVector> bloch_trajectory(const CodeSpec& code, const ComplexVector<>& cardinal,
                                          const std::vector<double>& etas);

/// Comparison of the pure-loss channel against loss + dephasing and
/// loss + thermal gain, fitted to six measured cardinal states.
struct AlternativeChannelFit {
    double base_p_loss = 0;
    double base_mean_fidelity = 0;
    double dephasing_p_loss = 0;
    double dephasing_weight = 0;
    double dephasing_mean_fidelity = 0;
    double gain_p_loss = 0;
    double gain_nbar = 0;
    double gain_weight = 0;
    double gain_mean_fidelity = 0;
};

AlternativeChannelFit fit_alternative_channels(const std::vector<QuantumState>& measured,
                                               const CodeSpec& code);

} // namespace qlink

#endif
