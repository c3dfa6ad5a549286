#include "qlink/codes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <thread>

#include "qlink/errors.hpp"
#include "qlink/table_io.hpp"

namespace qlink {

namespace {

constexpr double pi = std::numbers::pi;
constexpr cplx iu(0.0, 1.0);

ComplexVector<> basis_vec(Index n, Index dim) {
    ComplexVector<> v = ComplexVector<>::Zero(dim);
    v(n) = 1.0;
    return v;
}

QuantumState pure(const ComplexVector<>& psi) {
    return pure_state(psi, {psi.size()});
}

// Golden-section minimization on [lo, hi] for a unimodal objective.
double golden_min(const std::function<double(double)>& f, double lo, double hi, double tol) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Coarse scan followed by a local golden refine; deterministic and robust to
// shallow secondary minima.
double scan_min(const std::function<double(double)>& f, double lo, double hi, int coarse,
                double tol) {
    double best = lo, fbest = f(lo);
    for (int i = 1; i <= coarse; ++i) {
        double x = lo + (hi - lo) * double(i) / coarse;
        double fx = f(x);
        if (fx < fbest) {
            fbest = fx;
            best = x;
        }
    }
    const double h = (hi - lo) / coarse;
    return golden_min(f, std::max(lo, best - h), std::min(hi, best + h), tol);
}

// Beamsplitter with an arbitrary diagonal ancilla state, ancilla traced out.
QuantumState beamsplit_with_bath(const QuantumState& state, double theta,
                                 const std::vector<double>& bath_populations) {
    const Index d = state.dim();
    ComplexMatrix<> bath = ComplexMatrix<>::Zero(d, d);
    for (Index n = 0; n < d; ++n)
        bath(n, n) = n < static_cast<Index>(bath_populations.size()) ? bath_populations[n] : 0.0;
    const double tr = bath.trace().real();
    if (tr <= 0) throw ValidationError("bath state has no weight inside the truncation");
    bath /= tr;

    ComplexMatrix<> joint = tensor(state.matrix(), bath);
    ComplexMatrix<> u = beamsplitter_unitary(theta, d);
    ComplexMatrix<> evolved = u * joint * u.adjoint();
    QuantumState big(std::move(evolved), {d, d});
    return trace_out(big, 1);
}

ComplexMatrix<> qubit_phase_flip(Index dim) {
    ComplexMatrix<> z = ComplexMatrix<>::Identity(dim, dim);
    z(1, 1) = -1.0;
    return z;
}

double mean_fidelity_under(const CodeSpec& code,
                           const std::function<QuantumState(const QuantumState&)>& channel) {
    double acc = 0;
    auto cards = cardinal_states(code);
    for (const auto& psi : cards) acc += fidelity(channel(pure(psi)), psi);
    return acc / double(cards.size());
}

} // namespace

void CodeSpec::validate() const {
    if (logical_zero.size() != logical_one.size() || logical_zero.size() < 2)
        throw ValidationError("code words must share a Fock dimension");
    if (std::abs(logical_zero.norm() - 1.0) > 1e-12 || std::abs(logical_one.norm() - 1.0) > 1e-12)
        throw ValidationError("code words must be normalized");
    if (std::abs((logical_zero.adjoint() * logical_one)(0, 0)) > 1e-12)
        throw ValidationError("code words must be orthogonal");
}

CodeSpec CodeSpec::fock(Index dim) {
    if (dim < 2) throw ValidationError("fock code needs dim >= 2");
    CodeSpec c;
    c.logical_zero = basis_vec(0, dim);
    c.logical_one = basis_vec(1, dim);
    c.name = "fock";
    c.mean_photon_number = 0.5;
    return c;
}

CodeSpec CodeSpec::binomial(Index dim) {
    if (dim < 5) throw ValidationError("binomial code needs dim >= 5");
    CodeSpec c;
    c.logical_zero = basis_vec(2, dim);
    c.logical_one = (basis_vec(0, dim) + basis_vec(4, dim)) / std::sqrt(2.0);
    c.name = "binomial";
    c.mean_photon_number = 2.0;
    return c;
}

std::array<ComplexVector<>, 6> cardinal_states(const CodeSpec& code) {
    code.validate();
    const auto& z0 = code.logical_zero;
    const auto& z1 = code.logical_one;
    const double s = 1.0 / std::sqrt(2.0);
    return {ComplexVector<>(z1),
            ComplexVector<>(z0),
            ComplexVector<>(s * (z0 + z1)),
            ComplexVector<>(s * (z0 - z1)),
            ComplexVector<>(s * (z0 + iu * z1)),
            ComplexVector<>(s * (z0 - iu * z1))};
}

double LossChannelSpec::theta() const { return 2.0 * std::acos(std::sqrt(1.0 - p_loss)); }

void LossChannelSpec::validate() const {
    if (p_loss < 0 || p_loss > 1) throw ValidationError("p_loss must lie in [0, 1]");
    if (weight < 0 || weight > 1) throw ValidationError("loss channel weight must lie in [0, 1]");
    if (nbar_bath < 0) throw ValidationError("bath occupation must be nonnegative");
}

QuantumState apply_loss(const QuantumState& state, const LossChannelSpec& spec) {
    spec.validate();
    if (state.num_subsystems() != 1)
        throw ValidationError("apply_loss acts on a single-mode state");

    // Truncation headroom: the topmost level must be (almost) unoccupied so
    // the beamsplitter has room to act.
    const Index d = state.dim();
    if (state.matrix()(d - 1, d - 1).real() > 1e-6)
        throw TruncationError("apply_loss: state occupies the top Fock level");

    QuantumState lossy = attenuator_channel(state, 1.0 - spec.p_loss);
    switch (spec.variant) {
        case LossVariant::pure_loss:
            return lossy;
        case LossVariant::thermal_gain: {
            std::vector<double> pops(d);
            const double r = spec.nbar_bath / (1.0 + spec.nbar_bath);
            for (Index n = 0; n < d; ++n) pops[n] = (1.0 - r) * std::pow(r, double(n));
            QuantumState gained = beamsplit_with_bath(state, spec.theta(), pops);
            ComplexMatrix<> mixed =
                (1.0 - spec.weight) * lossy.matrix() + spec.weight * gained.matrix();
            return QuantumState(std::move(mixed), state.subsystem_dims());
        }
        case LossVariant::dephasing_mix: {
            ComplexMatrix<> z = qubit_phase_flip(d);
            ComplexMatrix<> mixed = (1.0 - spec.weight) * lossy.matrix() +
                                    spec.weight * (z * lossy.matrix() * z.adjoint());
            return QuantumState(std::move(mixed), state.subsystem_dims());
        }
    }
    throw ValidationError("unknown loss variant");
}

QuantumState kerr_evolve(const QuantumState& state, double chi, double t) {
    return apply_unitary(state, kerr_unitary(chi, t, state.dim()));
}

double kerr_collapse_time(double nbar, double chi) {
    if (nbar <= 0 || chi == 0) throw ValidationError("collapse time needs nbar > 0 and chi != 0");
    return pi / (2.0 * std::sqrt(nbar) * std::abs(chi));
}

double fit_effective_kerr(const std::vector<QuantumState>& prepared,
                          const std::vector<QuantumState>& received, double t) {
    if (prepared.empty() || prepared.size() != received.size())
        throw ValidationError("fit_effective_kerr needs matching nonempty state lists");

    auto objective = [&](double chi) {
        double infid = 0;
        for (std::size_t i = 0; i < prepared.size(); ++i)
            infid += 1.0 - fidelity(kerr_evolve(received[i], -chi, t), prepared[i]);
        return infid / double(prepared.size());
    };
    // Scan 0..30 kHz in 0.05 kHz steps, then refine locally. The bracket
    // extends above both hardware Kerr rates so the fitted effective value
    // cannot clamp at the boundary.
    const double hi = 2.0 * pi * 30e3;
    return scan_min(objective, 0.0, hi, 600, 2.0 * pi * 0.1);
}

QuantumState parity_correct(const QuantumState& state, double theta_c) {
    const Index d = state.dim();
    if (d < 5) throw ValidationError("parity_correct needs dim >= 5");
    double tail = 0;
    for (Index n = 5; n < d; ++n) tail += state.matrix()(n, n).real();
    if (tail > 1e-6)
        throw TruncationError("parity_correct: support beyond n = 4 (tail " +
                              std::to_string(tail) + ")");

    ComplexMatrix<> peven = ComplexMatrix<>::Zero(d, d);
    ComplexMatrix<> podd = ComplexMatrix<>::Zero(d, d);
    for (Index n = 0; n < d; ++n) ((n % 2 == 0) ? peven : podd)(n, n) = 1.0;

    ComplexMatrix<> rho_e = peven * state.matrix() * peven;
    ComplexMatrix<> rho_o = podd * state.matrix() * podd;
    const double p_o = rho_o.trace().real();

    // Odd branch: photon-loss recovery isometry.
    ComplexMatrix<> recover = ComplexMatrix<>::Zero(d, d);
    recover(2, 1) = 1.0;
    recover(0, 3) = 1.0 / std::sqrt(2.0);
    recover(4, 3) = 1.0 / std::sqrt(2.0);
    ComplexMatrix<> rho_o_corr = recover * rho_o * recover.adjoint();
    const double caught = rho_o_corr.trace().real();
    if (p_o > 1e-12 && caught > 1e-12)
        rho_o_corr *= p_o / caught;  // tolerated tail outside {1,3}

    // Even branch: reweight the |0> and |4> amplitudes.
    ComplexMatrix<> rot = ComplexMatrix<>::Identity(d, d);
    rot(0, 0) = std::cos(theta_c);
    rot(4, 0) = std::sin(theta_c);
    rot(0, 4) = -std::sin(theta_c);
    rot(4, 4) = std::cos(theta_c);
    ComplexMatrix<> rho_e_corr = rot * rho_e * rot.adjoint();

    return QuantumState(ComplexMatrix<>(rho_e_corr + rho_o_corr), state.subsystem_dims());
}

double mean_cardinal_fidelity(const CodeSpec& code, const LossChannelSpec& loss, double theta_c) {
    return mean_fidelity_under(code, [&](const QuantumState& rho) {
        QuantumState out = apply_loss(rho, loss);
        if (theta_c > -pi) out = parity_correct(out, theta_c);
        return out;
    });
}

double optimize_theta_c(double p_loss) {
    if (p_loss < 0 || p_loss >= 1) throw ValidationError("optimize_theta_c: p_loss in [0, 1)");
    const CodeSpec code = CodeSpec::binomial(8);
    LossChannelSpec loss;
    loss.p_loss = p_loss;
    auto objective = [&](double theta) {
        return 1.0 - mean_cardinal_fidelity(code, loss, theta);
    };
    return scan_min(objective, -pi / 2, pi / 2, 32, 1e-6);
}

std::vector<BreakEvenRow> break_even_sweep(const std::vector<double>& etas, int threads) {
    for (double e : etas)
        if (e <= 0 || e > 1) throw ValidationError("break_even_sweep grid must lie in (0, 1]");

    const CodeSpec fock = CodeSpec::fock(8);
    const CodeSpec binom = CodeSpec::binomial(8);
    std::vector<BreakEvenRow> rows(etas.size());

    auto work = [&](std::size_t i) {
        BreakEvenRow row;
        row.eta = etas[i];
        LossChannelSpec loss;
        loss.p_loss = 1.0 - etas[i];
        row.infid_fock = 1.0 - mean_cardinal_fidelity(fock, loss);
        row.infid_binomial = 1.0 - mean_cardinal_fidelity(binom, loss);
        row.theta_c = optimize_theta_c(loss.p_loss);
        row.infid_corrected = 1.0 - mean_cardinal_fidelity(binom, loss, row.theta_c);
        rows[i] = row;
    };

    int nthreads = threads > 0 ? threads : int(std::thread::hardware_concurrency());
    nthreads = std::max(1, std::min<int>(nthreads, int(etas.size())));
    if (nthreads == 1) {
        for (std::size_t i = 0; i < etas.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < etas.size(); i = next++) work(i);
            });
        for (auto& th : pool) th.join();
    }
    return rows;
}

double break_even_crossing(const std::vector<BreakEvenRow>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double d0 = rows[i - 1].infid_corrected - rows[i - 1].infid_fock;
        const double d1 = rows[i].infid_corrected - rows[i].infid_fock;
        if (d0 >= 0 && d1 < 0) {
            const double f = d0 / (d0 - d1);
            return rows[i - 1].eta + f * (rows[i].eta - rows[i - 1].eta);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

void write_break_even_table(std::ostream& os, const std::vector<BreakEvenRow>& rows) {
    Table t;
    t.comments = {"encoding performance vs transfer efficiency",
                  "mean infidelity over the six cardinal states; theta_c_opt in rad"};
    t.columns = {"eta", "infid_fock", "infid_binomial", "infid_corrected", "theta_c_opt"};
    for (const auto& r : rows)
        t.rows.push_back({r.eta, r.infid_fock, r.infid_binomial, r.infid_corrected, r.theta_c});
    write_table(os, t);
}

BlochVector logical_bloch(const CodeSpec& code, const QuantumState& state) {
    const auto& z0 = code.logical_zero;
    const auto& z1 = code.logical_one;
    ComplexMatrix<> sx = z0 * z1.adjoint() + z1 * z0.adjoint();
    ComplexMatrix<> sy = iu * (z0 * z1.adjoint()) - iu * (z1 * z0.adjoint());
    ComplexMatrix<> sz = z1 * z1.adjoint() - z0 * z0.adjoint();
    BlochVector v;
    v.x = expectation(state, sx);
    v.y = expectation(state, sy);
    v.z = expectation(state, sz);
    return v;
}

std::vector<BlochVector> bloch_trajectory(const CodeSpec& code, const ComplexVector<>& cardinal,
                                          const std::vector<double>& etas) {
    std::vector<BlochVector> out;
    out.reserve(etas.size());
    for (double eta : etas) {
        LossChannelSpec loss;
        loss.p_loss = 1.0 - eta;
        out.push_back(logical_bloch(code, apply_loss(pure(cardinal), loss)));
    }
    return out;
}

AlternativeChannelFit fit_alternative_channels(const std::vector<QuantumState>& measured,
                                               const CodeSpec& code) {
    if (measured.size() < 2)
        throw ValidationError("fit_alternative_channels needs at least 2 states to separate "
                              "mechanisms");
    auto cards = cardinal_states(code);
    if (measured.size() != cards.size())
        throw ValidationError("fit_alternative_channels expects the six cardinal states");

    auto mean_fid = [&](const LossChannelSpec& spec) {
        double acc = 0;
        for (std::size_t i = 0; i < cards.size(); ++i)
            acc += fidelity(apply_loss(pure(cards[i]), spec), measured[i]);
        return acc / double(cards.size());
    };

    AlternativeChannelFit fit;

    LossChannelSpec base;
    base.p_loss = scan_min([&](double p) { base.p_loss = p; return 1.0 - mean_fid(base); },
                           0.0, 0.9, 90, 1e-5);
    fit.base_p_loss = base.p_loss;
    fit.base_mean_fidelity = mean_fid(base);

    // Loss + qubit dephasing: coordinate descent on (p, w).
    LossChannelSpec deph;
    deph.variant = LossVariant::dephasing_mix;
    deph.p_loss = fit.base_p_loss;
    deph.weight = 0;
    for (int pass = 0; pass < 3; ++pass) {
        deph.p_loss = scan_min([&](double p) { auto s = deph; s.p_loss = p;
                                               return 1.0 - mean_fid(s); }, 0.0, 0.9, 45, 1e-5);
        deph.weight = scan_min([&](double w) { auto s = deph; s.weight = w;
                                               return 1.0 - mean_fid(s); }, 0.0, 0.5, 50, 1e-5);
    }
    fit.dephasing_p_loss = deph.p_loss;
    fit.dephasing_weight = deph.weight;
    fit.dephasing_mean_fidelity = mean_fid(deph);

    // Loss + thermal gain: coordinate descent on (p, nbar, w).
    LossChannelSpec gain;
    gain.variant = LossVariant::thermal_gain;
    gain.p_loss = fit.base_p_loss;
    gain.nbar_bath = 0.1;
    gain.weight = 0;
    for (int pass = 0; pass < 3; ++pass) {
        gain.p_loss = scan_min([&](double p) { auto s = gain; s.p_loss = p;
                                               return 1.0 - mean_fid(s); }, 0.0, 0.9, 45, 1e-5);
        gain.nbar_bath = scan_min([&](double nb) { auto s = gain; s.nbar_bath = nb;
                                                   return 1.0 - mean_fid(s); }, 0.0, 1.0, 20, 1e-4);
        gain.weight = scan_min([&](double w) { auto s = gain; s.weight = w;
                                               return 1.0 - mean_fid(s); }, 0.0, 0.5, 50, 1e-5);
    }
    fit.gain_p_loss = gain.p_loss;
    fit.gain_nbar = gain.nbar_bath;
    fit.gain_weight = gain.weight;
    fit.gain_mean_fidelity = mean_fid(gain);
    return fit;
}

} // namespace qlink
