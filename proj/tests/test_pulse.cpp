#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "qlink/errors.hpp"
#include "qlink/pulse.hpp"

using namespace qlink;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr cplx iu(0.0, 1.0);

DeviceParams sender() { return DeviceParams::sender_defaults(); }
DeviceParams receiver() { return DeviceParams::receiver_defaults(); }

ConversionCalibration cal_for(const DeviceParams& p, double max_g_khz = 400.0) {
    return ConversionCalibration::from_device(p, two_pi * max_g_khz * 1e3, 25.0);
}

// Test-side forward integrator (RK4 on the single-module equations of
// motion), independent of the synthesis path it checks.
struct ForwardRun {
    std::vector<cplx> b_out;   // emitted (release) or reflected (capture) field
    std::vector<cplx> a;
    cplx a_final;
};

cplx interp(const std::vector<cplx>& v, double x) {
    if (x <= 0) return v.front();
    if (x >= double(v.size() - 1)) return v.back();
    auto k = static_cast<std::size_t>(x);
    double f = x - double(k);
    return (1.0 - f) * v[k] + f * v[k + 1];
}

ForwardRun forward_module(const DeviceParams& p, const ConversionCalibration& cal,
                          const PumpWaveform& w, const std::vector<double>& b_in, cplx a0,
                          double kappa_sign = 1.0) {
    const double dt = w.grid_dt;
    const double kappa = p.kappa_out;
    const std::size_t n = w.xi1.size();
    std::vector<double> in = b_in.empty() ? std::vector<double>(n, 0.0) : b_in;

    auto rhs = [&](double t, cplx a, cplx b, cplx& da, cplx& db) {
        cplx xi1 = interp(w.xi1, t / dt);
        cplx xi2 = w.xi2_at(t);
        cplx g = cal.g0 * xi1 * xi2;
        auto [delta_a, delta_b] = stark_shifts(cal, xi1, xi2);
        delta_a -= w.frame_shift_a;
        delta_b -= w.frame_shift_b;
        double sfrac = t / dt;
        std::size_t k0 = std::min<std::size_t>(static_cast<std::size_t>(sfrac), n - 1);
        std::size_t k1 = std::min(k0 + 1, n - 1);
        double f = sfrac - double(k0);
        double bin = (1.0 - f) * in[k0] + f * in[k1];
        da = -g * b - iu * delta_a * a;
        db = std::conj(g) * a - iu * delta_b * b - 0.5 * kappa * b + std::sqrt(kappa) * bin;
        (void)kappa_sign;
    };

    ForwardRun run;
    run.b_out.resize(n);
    run.a.resize(n);
    cplx a = a0, b = 0;
    for (std::size_t k = 0; k < n; ++k) {
        run.a[k] = a;
        run.b_out[k] = std::sqrt(kappa) * b - in[k];
        if (k + 1 == n) break;
        const double t = double(k) * dt;
        cplx da1, db1, da2, db2, da3, db3, da4, db4;
        rhs(t, a, b, da1, db1);
        rhs(t + 0.5 * dt, a + 0.5 * dt * da1, b + 0.5 * dt * db1, da2, db2);
        rhs(t + 0.5 * dt, a + 0.5 * dt * da2, b + 0.5 * dt * db2, da3, db3);
        rhs(t + dt, a + dt * da3, b + dt * db3, da4, db4);
        a += dt / 6.0 * (da1 + 2.0 * da2 + 2.0 * da3 + da4);
        b += dt / 6.0 * (db1 + 2.0 * db2 + 2.0 * db3 + db4);
    }
    run.a_final = a;
    return run;
}

double rel_l2(const std::vector<cplx>& got, const std::vector<double>& want, double dt) {
    double num = 0, den = 0;
    for (std::size_t k = 0; k < got.size(); ++k) {
        num += std::norm(got[k] - want[k]) * dt;
        den += want[k] * want[k] * dt;
    }
    return std::sqrt(num / den);
}

std::vector<double> target_emission(const WavepacketSpec& spec, double emitted) {
    std::vector<double> t(spec.envelope.size());
    double scale = std::sqrt(emitted / spec.energy());
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = scale * spec.envelope[k];
    return t;
}

double packet_energy(const std::vector<cplx>& f, double dt) {
    double acc = 0;
    for (std::size_t k = 0; k + 1 < f.size(); ++k)
        acc += 0.5 * dt * (std::norm(f[k]) + std::norm(f[k + 1]));
    return acc;
}

} // namespace

TEST_CASE("release round trip reproduces the target wavepacket") {
    auto spec = default_wavepacket(6e-6, 1.0);
    auto cal = cal_for(sender());
    auto res = synthesize_release(sender(), cal, spec, 0.99);
    CHECK(res.solver_residual < 1e-8);
    CHECK(res.peak_g < two_pi * 400e3);

    auto run = forward_module(sender(), cal, res.waveform, {}, 1.0);
    auto want = target_emission(spec, 0.99);
    CHECK(rel_l2(run.b_out, want, spec.grid_dt) < 1e-3);

    // Energy accounting: 0.99 emitted, 0.01 left in the memory.
    CHECK(std::norm(run.a_final) == doctest::Approx(0.01).epsilon(0.02));
    CHECK(packet_energy(run.b_out, spec.grid_dt) == doctest::Approx(0.99).epsilon(1e-3));

    // The pump relation's initial value: the pump starts from zero together
    // with the packet.
    CHECK(std::abs(res.waveform.xi1.front()) < 1e-3);
}

TEST_CASE("zero-energy spec synthesizes an identically zero pump") {
    WavepacketSpec spec;
    spec.grid_dt = 2e-9;
    spec.envelope.assign(3001, 0.0);
    auto cal = cal_for(sender());
    auto res = synthesize_release(sender(), cal, spec, 0.99);
    for (auto v : res.waveform.xi1) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("full and half release pulses are not scaled copies") {
    auto cal = cal_for(sender());
    auto full = synthesize_release(sender(), cal, default_wavepacket(6e-6, 1.0), 0.99);
    auto half = synthesize_release(sender(), cal, default_wavepacket(6e-6, 0.5), 0.99);

    // Pointwise pump ratio varies across the pulse...
    double rmin = 1e30, rmax = 0;
    for (std::size_t k = 200; k + 200 < full.waveform.xi1.size(); ++k) {
        double num = std::abs(full.waveform.xi1[k]);
        double den = std::abs(half.waveform.xi1[k]);
        if (den < 1e-6) continue;
        rmin = std::min(rmin, num / den);
        rmax = std::max(rmax, num / den);
    }
    CHECK(rmax / rmin > 1.1);

    // ...while the emitted wavepackets are proportional.
    auto run_full = forward_module(sender(), cal, full.waveform, {}, 1.0);
    auto run_half = forward_module(sender(), cal, half.waveform, {}, 1.0);
    double ratio_min = 1e30, ratio_max = 0;
    for (std::size_t k = 200; k + 200 < run_full.b_out.size(); ++k) {
        if (std::abs(run_full.b_out[k]) < 1e-2) continue;
        double r = std::abs(run_half.b_out[k]) / std::abs(run_full.b_out[k]);
        ratio_min = std::min(ratio_min, r);
        ratio_max = std::max(ratio_max, r);
    }
    CHECK(ratio_max - ratio_min < 2e-3);
    CHECK(ratio_min == doctest::Approx(std::sqrt(0.5)).epsilon(2e-3));
}

TEST_CASE("capture absorbs the specified fraction with a quiet body") {
    auto spec = default_wavepacket(6e-6, 1.0);
    auto cal = cal_for(receiver());
    auto res = synthesize_capture(receiver(), cal, spec, 0.95);
    CHECK(res.solver_residual < 1e-6);
    CHECK(res.boundary_amplitude < 5e-3);

    std::vector<double> b_in = target_emission(spec, 1.0);
    auto run = forward_module(receiver(), cal, res.waveform, b_in, 0.0);
    CHECK(std::norm(run.a_final) == doctest::Approx(0.95).epsilon(1.1e-3));

    // Reflection is confined to the early part; past the capture engagement
    // the body is quiet.
    double peak_in = 0;
    for (double v : b_in) peak_in = std::max(peak_in, v);
    const std::size_t body_start = (b_in.size() * 5) / 8;
    double worst_body = 0;
    for (std::size_t k = body_start; k < b_in.size(); ++k)
        worst_body = std::max(worst_body, std::abs(run.b_out[k]));
    CHECK(worst_body < 1e-3 * peak_in);

    // Total reflected energy complements the absorbed fraction.
    CHECK(packet_energy(run.b_out, spec.grid_dt) == doctest::Approx(0.05).epsilon(0.03));
}

TEST_CASE("capture waveform is independent of incoming amplitude") {
    auto spec = default_wavepacket(6e-6, 1.0);
    auto cal = cal_for(receiver());
    auto a = synthesize_capture(receiver(), cal, spec, 0.95);

    // Dyadic rescale: bit-exact shape, bit-exact waveform.
    auto weak = spec;
    for (auto& v : weak.envelope) v *= 0.25;
    auto b = synthesize_capture(receiver(), cal, weak, 0.95);
    REQUIRE(a.waveform.xi1.size() == b.waveform.xi1.size());
    for (std::size_t k = 0; k < a.waveform.xi1.size(); ++k)
        CHECK(std::abs(a.waveform.xi1[k] - b.waveform.xi1[k]) == 0.0);

    // Arbitrary rescale: identical up to roundoff of the normalization.
    auto odd = spec;
    for (auto& v : odd.envelope) v *= 0.3;
    auto c = synthesize_capture(receiver(), cal, odd, 0.95);
    for (std::size_t k = 0; k < a.waveform.xi1.size(); ++k)
        CHECK(std::abs(a.waveform.xi1[k] - c.waveform.xi1[k]) < 1e-6);
}

TEST_CASE("zero incoming packet accepts a zero capture pulse") {
    WavepacketSpec spec;
    spec.grid_dt = 2e-9;
    spec.envelope.assign(3001, 0.0);
    auto cal = cal_for(receiver());
    auto res = synthesize_capture(receiver(), cal, spec, 0.95);
    for (auto v : res.waveform.xi1) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("saturating pulses are rejected with the first saturating time") {
    // A starved pump budget cannot realize the default packet.
    auto cal = cal_for(sender(), 60.0);  // max g/2pi = 60 kHz
    try {
        synthesize_release(sender(), cal, default_wavepacket(6e-6, 1.0), 0.99);
        FAIL("expected InfeasiblePulseError");
    } catch (const InfeasiblePulseError& e) {
        CHECK(std::string(e.what()).find("saturates") != std::string::npos);
        CHECK(std::string(e.what()).find("us") != std::string::npos);
    }
}

TEST_CASE("stark compensation keeps the emitted carrier fixed") {
    auto spec = default_wavepacket(6e-6, 1.0);
    auto cal = cal_for(sender());
    auto good = synthesize_release(sender(), cal, spec, 0.99);

    // Control: synthesized while ignoring the Stark shifts, then played on
    // the real device.
    auto blind_cal = cal;
    blind_cal.stark_a1 = blind_cal.stark_a2 = blind_cal.stark_b1 = blind_cal.stark_b2 = 0.0;
    auto blind = synthesize_release(sender(), blind_cal, spec, 0.99);

    auto run_good = forward_module(sender(), cal, good.waveform, {}, 1.0);
    auto run_blind = forward_module(sender(), cal, blind.waveform, {}, 1.0);

    // Spectral weight within a narrow band around the target carrier.
    auto band_weight = [&](const std::vector<cplx>& f, double half_band_hz) {
        const double dt = spec.grid_dt;
        double total = 0, band = 0;
        for (int m = -80; m <= 80; ++m) {
            double freq = m * 25e3;  // 25 kHz bins over +-2 MHz
            cplx acc = 0;
            for (std::size_t k = 0; k < f.size(); ++k)
                acc += f[k] * std::exp(iu * (two_pi * freq * double(k) * dt));
            double w = std::norm(acc);
            total += w;
            if (std::abs(freq) <= half_band_hz) band += w;
        }
        return band / total;
    };

    // The compensated emission is as narrow as the packet itself.
    std::vector<cplx> ideal(run_good.b_out.size());
    for (std::size_t k = 0; k < ideal.size(); ++k) ideal[k] = spec.envelope[k];
    double limit_frac = band_weight(ideal, 100e3);
    double good_frac = band_weight(run_good.b_out, 100e3);
    double blind_frac = band_weight(run_blind.b_out, 100e3);
    CHECK(good_frac > limit_frac - 0.01);
    CHECK(blind_frac < good_frac - 0.05);
}

TEST_CASE("halving the grid step improves the round trip at second order") {
    auto cal = cal_for(sender());
    auto err_at = [&](double dt) {
        auto spec = default_wavepacket(6e-6, 1.0, dt);
        auto res = synthesize_release(sender(), cal, spec, 0.99);
        auto run = forward_module(sender(), cal, res.waveform, {}, 1.0);
        return rel_l2(run.b_out, target_emission(spec, 0.99), dt);
    };
    double coarse = err_at(16e-9);
    double fine = err_at(8e-9);
    // 4x per halving at second order, up to measurement noise.
    CHECK(coarse / fine >= 3.9);
}
