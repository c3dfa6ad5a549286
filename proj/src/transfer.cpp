#include "qlink/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "qlink/errors.hpp"
#include "qlink/table_io.hpp"

namespace qlink {

namespace {

constexpr cplx i_unit(0.0, 1.0);

struct Drive {
    cplx g;
    double delta_a;
    double delta_b;
};

// Pump drive at time t with xi1 interpolated linearly between samples.
Drive drive_at(const ConversionCalibration& cal, const PumpWaveform& w, double t) {
    const double T = w.duration();
    cplx xi1(0, 0);
    if (t >= 0 && t <= T) {
        const double x = t / w.grid_dt;
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(x), w.xi1.size() - 2);
        const double frac = x - double(k);
        xi1 = (1.0 - frac) * w.xi1[k] + frac * w.xi1[k + 1];
    }
    const cplx xi2 = w.xi2_at(std::clamp(t, 0.0, T));
    Drive d;
    d.g = cal.g0 * xi1 * xi2;
    d.delta_a =
        cal.stark_a1 * std::norm(xi1) + cal.stark_a2 * std::norm(xi2) - w.frame_shift_a;
    d.delta_b =
        cal.stark_b2 * std::norm(xi2) + cal.stark_b1 * std::norm(xi1) - w.frame_shift_b;
    return d;
}

struct State4 {
    cplx as, bs, ar, br;

    State4 operator+(const State4& o) const { return {as + o.as, bs + o.bs, ar + o.ar, br + o.br}; }
    State4 operator*(double f) const { return {f * as, f * bs, f * ar, f * br}; }
};

struct CascadeContext {
    const ModuleConfig* s;
    const ModuleConfig* r;
    double eta_tx;
    double kappa0_s, kappa0_r;  // zero when intrinsic decay is disabled
};

State4 cascade_rhs(const CascadeContext& ctx, double t, const State4& y) {
    const Drive ds = drive_at(ctx.s->cal, ctx.s->waveform, t);
    const Drive dr = drive_at(ctx.r->cal, ctx.r->waveform, t);
    const double ks = ctx.s->params.kappa_out;
    const double kr = ctx.r->params.kappa_out;

    const cplx b_out_s = std::sqrt(ks) * y.bs;
    const cplx b_in_r = std::sqrt(ctx.eta_tx) * b_out_s;

    State4 d;
    d.as = -ds.g * y.bs - i_unit * ds.delta_a * y.as - 0.5 * ctx.kappa0_s * y.as;
    d.bs = std::conj(ds.g) * y.as - i_unit * ds.delta_b * y.bs - 0.5 * ks * y.bs;
    d.ar = -dr.g * y.br - i_unit * dr.delta_a * y.ar - 0.5 * ctx.kappa0_r * y.ar;
    d.br = std::conj(dr.g) * y.ar - i_unit * dr.delta_b * y.br - 0.5 * kr * y.br +
           std::sqrt(kr) * b_in_r;
    return d;
}

struct ClassicalRun {
    std::vector<double> times;
    std::vector<cplx> a_s, b_s, a_r, b_r, b_line, b_refl;
    double incident_energy = 0;
    double reflected_energy = 0;
    double balance_error = 0;
};

ClassicalRun integrate_cascade(const ModuleConfig& sender, const ModuleConfig& receiver,
                               const ChannelSpec& channel, bool include_kappa0) {
    sender.params.validate();
    receiver.params.validate();
    channel.validate();
    if (sender.waveform.xi1.size() != receiver.waveform.xi1.size() ||
        std::abs(sender.waveform.grid_dt - receiver.waveform.grid_dt) > 1e-15)
        throw ValidationError("sender and receiver waveforms must share one time grid");
    const double dt = sender.waveform.grid_dt;
    const std::size_t n = sender.waveform.xi1.size();
    const double kmax = std::max(sender.params.kappa_out, receiver.params.kappa_out);
    if (kmax * dt > 0.5)
        throw NumericalError("integration step too large for the output coupling rate");

    CascadeContext ctx{&sender, &receiver, channel.eta_tx,
                       include_kappa0 ? sender.params.kappa_0 : 0.0,
                       include_kappa0 ? receiver.params.kappa_0 : 0.0};

    ClassicalRun run;
    run.times.resize(n);
    run.a_s.resize(n);
    run.b_s.resize(n);
    run.a_r.resize(n);
    run.b_r.resize(n);
    run.b_line.resize(n);
    run.b_refl.resize(n);

    const double ks = sender.params.kappa_out;
    const double kr = receiver.params.kappa_out;

    State4 y{cplx(1, 0), 0, 0, 0};
    double dissipated = 0;  // line loss + reflections + intrinsic decay so far
    auto record = [&](std::size_t k) {
        run.times[k] = double(k) * dt;
        run.a_s[k] = y.as;
        run.b_s[k] = y.bs;
        run.a_r[k] = y.ar;
        run.b_r[k] = y.br;
        const cplx b_out_s = std::sqrt(ks) * y.bs;
        const cplx b_in_r = std::sqrt(channel.eta_tx) * b_out_s;
        run.b_line[k] = b_in_r;
        run.b_refl[k] = std::sqrt(kr) * y.br - b_in_r;
    };
    record(0);

    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double t = double(k) * dt;
        const State4 k1 = cascade_rhs(ctx, t, y);
        const State4 k2 = cascade_rhs(ctx, t + 0.5 * dt, y + k1 * (0.5 * dt));
        const State4 k3 = cascade_rhs(ctx, t + 0.5 * dt, y + k2 * (0.5 * dt));
        const State4 k4 = cascade_rhs(ctx, t + dt, y + k3 * dt);
        const State4 yold = y;
        y = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        record(k + 1);

        // Trapezoidal energy bookkeeping: everything that leaves the two
        // modules is either line loss, reflection, or intrinsic decay.
        auto leak = [&](const State4& s, std::size_t idx) {
            const double flux_s = ks * std::norm(s.bs);
            return (1.0 - channel.eta_tx) * flux_s + std::norm(run.b_refl[idx]) +
                   ctx.kappa0_s * std::norm(s.as) + ctx.kappa0_r * std::norm(s.ar);
        };
        dissipated += 0.5 * dt * (leak(yold, k) + leak(y, k + 1));
        run.incident_energy += 0.5 * dt * (std::norm(run.b_line[k]) + std::norm(run.b_line[k + 1]));
        run.reflected_energy +=
            0.5 * dt * (std::norm(run.b_refl[k]) + std::norm(run.b_refl[k + 1]));

        const double total = std::norm(y.as) + std::norm(y.bs) + std::norm(y.ar) +
                             std::norm(y.br) + dissipated;
        run.balance_error = std::max(run.balance_error, std::abs(total - 1.0));
    }
    return run;
}

double post_factor(const EfficiencyBudget& b) {
    return b.eta_excite_s * b.eta_miscal_s * b.eta_excite_r * b.eta_miscal_r;
}

// Multiply coherences between different sender photon numbers by
// c^|n_s - m_s| (pure dephasing of the stay/transfer superposition).
QuantumState dephase_sender_number(const QuantumState& joint, double c) {
    auto m = joint.matrix();
    const auto dims = joint.subsystem_dims();
    const Index d1 = dims[0], d2 = dims[1];
    for (Index r = 0; r < d1 * d2; ++r)
        for (Index col = 0; col < d1 * d2; ++col) {
            const Index ns = r / d2, ms = col / d2;
            if (ns != ms) m(r, col) *= std::pow(c, std::abs(double(ns - ms)));
        }
    return QuantumState(std::move(m), dims);
}

} // namespace

void ChannelSpec::validate() const {
    if (eta_tx < 0 || eta_tx > 1) throw ValidationError("channel.eta_tx must lie in [0, 1]");
    if (delay < 0) throw ValidationError("channel.delay must be nonnegative");
}

EfficiencyBudget EfficiencyBudget::ideal() {
    EfficiencyBudget b;
    b.eta_trunc_s = 1.0;
    b.eta_excite_s = 1.0;
    b.eta_miscal_s = 1.0;
    b.eta_tx = 1.0;
    b.eta_trunc_r = 1.0;
    b.eta_excite_r = 1.0;
    b.eta_miscal_r = 1.0;
    b.p_success_s = 1.0;
    b.p_success_r = 1.0;
    return b;
}

void EfficiencyBudget::validate() const {
    for (double v : {eta_trunc_s, eta_excite_s, eta_miscal_s, eta_tx, eta_trunc_r, eta_excite_r,
                     eta_miscal_r, p_success_s, p_success_r})
        if (v < 0 || v > 1) throw ValidationError("efficiency budget entries must lie in [0, 1]");
}

TransferOutcome simulate_transfer(const ModuleConfig& sender, const ModuleConfig& receiver,
                                  const ChannelSpec& channel, const EfficiencyBudget& budget,
                                  const QuantumState& initial, bool include_kappa0) {
    budget.validate();
    ClassicalRun run = integrate_cascade(sender, receiver, channel, include_kappa0);

    TransferOutcome out;
    out.times = std::move(run.times);
    out.a_s = std::move(run.a_s);
    out.b_s = std::move(run.b_s);
    out.a_r = std::move(run.a_r);
    out.b_r = std::move(run.b_r);
    out.b_line = std::move(run.b_line);
    out.energy_balance_error = run.balance_error;

    out.amp_remain = out.a_s.back();
    out.amp_received = out.a_r.back() * std::sqrt(post_factor(budget));
    out.remaining_fraction = std::norm(out.amp_remain);

    // Linear channel: received nbar / prepared nbar equals the power
    // transmission of the transfer matrix for every input state.
    out.eta_measured = std::norm(out.amp_received);
    out.p_success = budget.p_success_r;

    const double absorbed_sim =
        run.incident_energy > 0 ? std::norm(out.a_r.back()) / run.incident_energy : 0.0;
    const double reflected_sim =
        run.incident_energy > 0 ? run.reflected_energy / run.incident_energy : 0.0;
    // A transmon excitation during capture shows up as extra reflection.
    out.reflected_fraction = reflected_sim + absorbed_sim * (1.0 - budget.eta_excite_r);

    out.received_state = attenuator_channel(initial, std::min(1.0, out.eta_measured));
    return out;
}

TransferOutcome simulate_half_release_entanglement(const ModuleConfig& sender,
                                                   const ModuleConfig& receiver,
                                                   const ChannelSpec& channel,
                                                   const EfficiencyBudget& budget,
                                                   Index joint_dim, bool include_kappa0) {
    budget.validate();
    ClassicalRun run = integrate_cascade(sender, receiver, channel, include_kappa0);

    TransferOutcome out;
    out.times = std::move(run.times);
    out.a_s = std::move(run.a_s);
    out.b_s = std::move(run.b_s);
    out.a_r = std::move(run.a_r);
    out.b_r = std::move(run.b_r);
    out.b_line = std::move(run.b_line);
    out.energy_balance_error = run.balance_error;

    out.amp_remain = out.a_s.back();
    out.amp_received = out.a_r.back() * std::sqrt(post_factor(budget));
    out.remaining_fraction = std::norm(out.amp_remain);
    out.eta_measured = std::norm(out.amp_received);
    out.p_success = budget.p_success_joint();

    const double absorbed_sim =
        run.incident_energy > 0 ? std::norm(out.a_r.back()) / run.incident_energy : 0.0;
    out.reflected_fraction = (run.incident_energy > 0 ? run.reflected_energy / run.incident_energy
                                                      : 0.0) +
                             absorbed_sim * (1.0 - budget.eta_excite_r);

    // Joint state from the transfer-matrix amplitudes (local frames aligned):
    // split |1> on a beamsplitter that keeps |m| in the sender, then
    // attenuate the flying arm down to the received amplitude.
    const double m = std::min(1.0, std::abs(out.amp_remain));
    const double tau = std::abs(out.amp_received);
    const Index d = joint_dim;

    ComplexMatrix<> one = ComplexMatrix<>::Zero(d, d);
    one(1, 1) = 1.0;
    ComplexMatrix<> vac = ComplexMatrix<>::Zero(d, d);
    vac(0, 0) = 1.0;
    QuantumState joint(ComplexMatrix<>(tensor(one, vac)), {d, d});

    const double theta = 2.0 * std::acos(std::clamp(m, 0.0, 1.0));
    joint = apply_unitary(joint, beamsplitter_unitary(theta, d));

    const double flying = 1.0 - m * m;
    const double arm_eta = flying > 1e-12 ? std::min(1.0, tau * tau / flying) : 1.0;
    joint = attenuate_subsystem(joint, Index(1), arm_eta);

    const double c = budget.p_success_joint();
    if (c < 1.0) joint = dephase_sender_number(joint, c);

    out.received_state = std::move(joint);
    return out;
}

PopulationPoint truncate_and_measure(const TransferOutcome& outcome, double t_cut) {
    if (outcome.times.empty()) throw ValidationError("truncate_and_measure: empty outcome");
    if (t_cut < 0 || t_cut > outcome.times.back() + 1e-12)
        throw ValidationError("truncate_and_measure: t_cut outside the pulse");
    const double dt = outcome.times[1] - outcome.times[0];
    const double x = std::clamp(t_cut / dt, 0.0, double(outcome.times.size() - 1));
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(x), outcome.times.size() - 2);
    const double f = x - double(k);
    auto lerp_norm = [&](const std::vector<cplx>& v) {
        return std::norm((1.0 - f) * v[k] + f * v[k + 1]);
    };
    PopulationPoint p;
    p.p1_s = lerp_norm(outcome.a_s);
    p.p1_r = lerp_norm(outcome.a_r);
    p.p0_s = 1.0 - p.p1_s;
    p.p0_r = 1.0 - p.p1_r;
    return p;
}

double stark_transfer_ratio(double kappa_s, double kappa_r, double eta_tx, double delta_r) {
    if (kappa_r <= 0) throw ValidationError("stark_transfer_ratio: kappa_r must be positive");
    return kappa_s * kappa_r * eta_tx / (0.25 * kappa_r * kappa_r + delta_r * delta_r);
}

double simulate_stark_transfer_ratio(const DeviceParams& sender, const DeviceParams& receiver,
                                     double eta_tx, double delta_r) {
    const double ks = sender.kappa_out, kr = receiver.kappa_out;
    if (kr <= 0 || ks <= 0) throw ValidationError("steady-state drive needs kappa_out > 0");

    // Drive the sender communication mode resonantly and march both modes to
    // steady state.
    const double dt = 0.02 / std::max(ks, kr);
    const double t_end = 40.0 / std::min(ks, kr);
    const cplx drive(1.0, 0.0);
    cplx bs = 0, br = 0;
    auto rhs_s = [&](cplx b) { return -0.5 * ks * b + drive; };
    auto rhs_r = [&](cplx b, cplx bin) {
        return -i_unit * delta_r * b - 0.5 * kr * b + std::sqrt(kr) * bin;
    };
    for (double t = 0; t < t_end; t += dt) {
        const cplx bin0 = std::sqrt(eta_tx * ks) * bs;
        const cplx k1s = rhs_s(bs), k1r = rhs_r(br, bin0);
        const cplx bin_mid = std::sqrt(eta_tx * ks) * (bs + 0.5 * dt * k1s);
        const cplx k2s = rhs_s(bs + 0.5 * dt * k1s), k2r = rhs_r(br + 0.5 * dt * k1r, bin_mid);
        const cplx k3s = rhs_s(bs + 0.5 * dt * k2s), k3r = rhs_r(br + 0.5 * dt * k2r, bin_mid);
        const cplx bin1 = std::sqrt(eta_tx * ks) * (bs + dt * k3s);
        const cplx k4s = rhs_s(bs + dt * k3s), k4r = rhs_r(br + dt * k3r, bin1);
        bs += dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        br += dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
    }
    return std::norm(br) / std::norm(bs);
}

double estimate_eta_tx(double measured_ratio, double kappa_s, double kappa_r, double delta_r) {
    if (kappa_r <= 0 || kappa_s <= 0) throw ValidationError("estimate_eta_tx: kappa must be positive");
    return measured_ratio * (0.25 * kappa_r * kappa_r + delta_r * delta_r) / (kappa_s * kappa_r);
}

double apply_success_bounds(double conditioned_value, double p_success) {
    if (conditioned_value < 0 || conditioned_value > 1 || p_success < 0 || p_success > 1)
        throw ValidationError("apply_success_bounds expects values in [0, 1]");
    return conditioned_value * p_success;
}

void write_trajectories(std::ostream& os, const TransferOutcome& outcome) {
    Table t;
    t.comments = {"cascaded transfer trajectories",
                  "t in s; populations dimensionless for a unit prepared state; "
                  "|b_line|^2 in photons/s"};
    t.columns = {"t", "as_sq", "bs_sq", "b_line_sq", "ar_sq", "br_sq"};
    for (std::size_t k = 0; k < outcome.times.size(); ++k)
        t.rows.push_back({outcome.times[k], std::norm(outcome.a_s[k]), std::norm(outcome.b_s[k]),
                          std::norm(outcome.b_line[k]), std::norm(outcome.a_r[k]),
                          std::norm(outcome.b_r[k])});
    write_table(os, t);
}

} // namespace qlink
