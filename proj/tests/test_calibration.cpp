#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "qlink/calibration.hpp"
#include "qlink/errors.hpp"

using namespace qlink;

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

ConversionCalibration sender_cal() {
    return ConversionCalibration::from_device(DeviceParams::sender_defaults(), two_pi * 400e3,
                                              25.0);
}

std::vector<std::pair<cplx, cplx>> pump_grid() {
    std::vector<std::pair<cplx, cplx>> pts;
    for (double a1 : {0.0, 1.0, 2.0, 3.5, 5.0})
        for (double a2 : {0.0, 2.0, 4.0, 5.0})
            pts.emplace_back(cplx(a1, 0.3 * a1), cplx(a2, -0.1 * a2));
    return pts;
}
} // namespace

TEST_CASE("shipped defaults match the measured device table") {
    auto s = DeviceParams::sender_defaults();
    auto r = DeviceParams::receiver_defaults();
    CHECK(s.chi_at == doctest::Approx(two_pi * -2.86e6));
    CHECK(s.chi_aa == doctest::Approx(two_pi * -8e3));
    CHECK(s.T1_a == doctest::Approx(460e-6));
    CHECK(r.T1_a == doctest::Approx(770e-6));
    CHECK(r.chi_ab == doctest::Approx(two_pi * -12e3));
    CHECK(s.kappa_out == doctest::Approx(1.0 / 0.14e-6));
    s.validate();
    r.validate();
    CHECK(s.kappa_out >= 100.0 * s.kappa_0);
    CHECK(r.kappa_out >= 100.0 * r.kappa_0);
}

TEST_CASE("conversion rate model") {
    auto cal = sender_cal();

    CHECK(std::abs(g_of_pumps(cal, 0.0, cplx(5, 0))) == 0.0);
    CHECK(std::abs(g_of_pumps(cal, cplx(3, 0), 0.0)) == 0.0);

    // The pump budget tops out at g/2pi = 400 kHz, reached within the
    // calibrated range.
    CHECK(cal.max_conversion_rate(5.0) / two_pi == doctest::Approx(400e3).epsilon(1e-12));
    const double budget_amp = cal.g_cap / (std::abs(cal.g0) * 5.0);
    CHECK(budget_amp * budget_amp <= cal.pump_photon_limit);
    double at_budget = std::abs(g_of_pumps(cal, cplx(budget_amp, 0), cplx(5, 0)));
    CHECK(at_budget / two_pi == doctest::Approx(400e3).epsilon(1e-12));

    // Bilinearity: the conversion phase is the sum of the pump phases.
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> ph(-std::numbers::pi, std::numbers::pi);
    for (int i = 0; i < 25; ++i) {
        double p1 = ph(gen), p2 = ph(gen);
        cplx xi1 = 2.0 * std::polar(1.0, p1);
        cplx xi2 = 4.0 * std::polar(1.0, p2);
        double expected = std::remainder(p1 + p2 + std::arg(cal.g0), two_pi);
        CHECK(std::remainder(std::arg(g_of_pumps(cal, xi1, xi2)) - expected, two_pi) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }

    CHECK_THROWS_AS(g_of_pumps(cal, cplx(8, 0), cplx(5, 0)), ValidationError);
}

TEST_CASE("stark shifts follow the quadratic pump-power law") {
    auto cal = sender_cal();

    auto [d0a, d0b] = stark_shifts(cal, 0.0, 0.0);
    CHECK(d0a == 0.0);
    CHECK(d0b == 0.0);

    // |xi1|^2 = 1 with the second pump off shifts the memory by 2 chi_aa.
    auto [da, db] = stark_shifts(cal, cplx(1, 0), 0.0);
    CHECK(da == doctest::Approx(two_pi * -16e3));
    CHECK(db == doctest::Approx(two_pi * -16e3));  // chi_ab |xi1|^2

    // Negative-definite Kerr implies nonpositive shifts everywhere.
    for (double a : {0.5, 1.5, 3.0}) {
        auto [sa, sb] = stark_shifts(cal, cplx(a, 0), cplx(2, 1));
        CHECK(sa <= 0.0);
        CHECK(sb <= 0.0);
    }

    // Linearity in pump power: equal increments produce equal shifts.
    auto shift_at = [&](double p) { return stark_shifts(cal, cplx(std::sqrt(p), 0), 0.0).first; };
    CHECK(shift_at(2.0) - shift_at(1.0) == doctest::Approx(shift_at(1.0) - shift_at(0.0)));

    // Second difference along |xi1| is constant (exactly quadratic map).
    auto f = [&](double x) { return stark_shifts(cal, cplx(x, 0), cplx(1, 0)).first; };
    double h = 0.25;
    double second1 = f(1.0 + h) - 2 * f(1.0) + f(1.0 - h);
    double second2 = f(2.5 + h) - 2 * f(2.5) + f(2.5 - h);
    CHECK(second1 == doctest::Approx(second2).epsilon(1e-9));
}

TEST_CASE("calibration fit round trip") {
    auto cal = sender_cal();
    auto samples = synthesize_samples(cal, pump_grid());
    auto fitted = fit_calibration(samples);

    CHECK(std::abs(fitted.g0 - cal.g0) <= 1e-9 * std::abs(cal.g0));
    CHECK(fitted.stark_a1 == doctest::Approx(cal.stark_a1).epsilon(1e-9));
    CHECK(fitted.stark_a2 == doctest::Approx(cal.stark_a2).epsilon(1e-9));
    CHECK(fitted.stark_b1 == doctest::Approx(cal.stark_b1).epsilon(1e-9));
    CHECK(fitted.stark_b2 == doctest::Approx(cal.stark_b2).epsilon(1e-9));
    CHECK(fitted.fit_residual < 1e-6 * std::abs(cal.g0));
}

TEST_CASE("calibration fit with 1% noise recovers coefficients to 5%") {
    auto cal = sender_cal();
    auto samples = synthesize_samples(cal, pump_grid());
    std::mt19937_64 gen(17);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (auto& s : samples) {
        s.g *= 1.0 + noise(gen);
        s.delta_a *= 1.0 + noise(gen);
        s.delta_b *= 1.0 + noise(gen);
    }
    auto fitted = fit_calibration(samples);
    CHECK(std::abs(fitted.g0 - cal.g0) <= 0.05 * std::abs(cal.g0));
    CHECK(std::abs(fitted.stark_a1 - cal.stark_a1) <= 0.05 * std::abs(cal.stark_a1));
    CHECK(std::abs(fitted.stark_b2 - cal.stark_b2) <= 0.05 * std::abs(cal.stark_b2));
}

TEST_CASE("degenerate fits are rejected, zero conversion fits to zero") {
    auto cal = sender_cal();

    auto samples = synthesize_samples(cal, pump_grid());
    for (auto& s : samples) s.g = 0.0;
    CHECK(std::abs(fit_calibration(samples).g0) == 0.0);

    std::vector<CalibrationSample> few(samples.begin(), samples.begin() + 3);
    CHECK_THROWS_AS(fit_calibration(few), ValidationError);

    // Pump powers colinear (xi2 always equal to xi1): Stark fit is rank
    // deficient.
    std::vector<std::pair<cplx, cplx>> colinear;
    for (double a : {1.0, 2.0, 3.0, 4.0}) colinear.emplace_back(cplx(a, 0), cplx(a, 0));
    auto bad = synthesize_samples(cal, colinear);
    CHECK_THROWS_AS(fit_calibration(bad), ValidationError);
}

TEST_CASE("calibration table io round trip") {
    auto cal = sender_cal();
    auto samples = synthesize_samples(cal, pump_grid());
    std::stringstream ss;
    write_calibration_samples(ss, samples);
    auto loaded = read_calibration_samples(ss);
    REQUIRE(loaded.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(std::abs(loaded[i].xi1 - samples[i].xi1) < 1e-12);
        CHECK(std::abs(loaded[i].g - samples[i].g) < 1e-6);
        CHECK(loaded[i].delta_a == doctest::Approx(samples[i].delta_a));
    }
    auto fitted = fit_calibration(loaded);
    CHECK(std::abs(fitted.g0 - cal.g0) <= 1e-9 * std::abs(cal.g0));
}
