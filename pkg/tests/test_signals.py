import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import sdm
from sdm.errors import DegenerateTargetError, GridMismatchError
from sdm.signals import (
    TimeSeries,
    bandlimit_filter,
    derivatives,
    fourier_spectrum,
    inverse_fourier_spectrum,
    make_reference_pulse,
    read_timeseries_csv,
    relative_distance,
    write_spectrum_csv,
    write_timeseries_csv,
)

OMEGA0 = 0.06
T_F = 8.0 * np.pi / OMEGA0


def tone(omega, dt=0.1, n=1024, amp=1.0):
    t = dt * np.arange(n)
    return TimeSeries(0.0, dt, amp * np.cos(omega * t))


class TestTimeSeries:
    def test_invariants(self):
        with pytest.raises(ValueError):
            TimeSeries(0.0, -0.1, [0.0, 1.0])
        with pytest.raises(ValueError):
            TimeSeries(0.0, 0.1, [1.0])
        with pytest.raises(ValueError):
            TimeSeries(0.0, 0.1, [1.0, np.nan])

    def test_span_covers_duration_within_dt(self):
        s = make_reference_pulse(0.04, OMEGA0, T_F, 0.02)
        assert abs(s.duration - T_F) <= s.dt

    def test_values_immutable(self):
        s = tone(0.5)
        with pytest.raises(ValueError):
            s.values[0] = 1.0


class TestReferencePulse:
    def test_value_at_zero_is_amplitude(self):
        s = make_reference_pulse(0.04, OMEGA0, T_F, 0.02)
        assert s.values[0] == pytest.approx(0.04, abs=1e-15)

    def test_value_at_tf_is_zero(self):
        s = make_reference_pulse(0.04, OMEGA0, T_F, 0.02)
        assert abs(s.values[-1]) < 1e-12

    def test_zero_amplitude(self):
        s = make_reference_pulse(0.0, OMEGA0, T_F, 0.02)
        assert np.all(s.values == 0.0)

    def test_envelope_shape(self):
        pulse = sdm.DrivePulse(1.0, OMEGA0, T_F)
        assert pulse.envelope_at(0.0) == pytest.approx(1.0)
        assert pulse.envelope_at(T_F) == pytest.approx(0.0, abs=1e-15)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            make_reference_pulse(0.04, OMEGA0, T_F, -0.1)
        with pytest.raises(ValueError):
            make_reference_pulse(0.04, OMEGA0, -1.0, 0.02)
        with pytest.raises(ValueError):
            make_reference_pulse(0.04, OMEGA0, 1.0, 2.0)  # dt >= t_f
        with pytest.raises(ValueError):
            make_reference_pulse(-0.1, OMEGA0, T_F, 0.02)


class TestSpectrum:
    def test_pure_tone_single_bin(self):
        # integer number of periods: 16 cycles of omega in 1024 samples
        n, cycles = 1024, 16
        dt = 2.0 * np.pi * cycles / (0.5 * n) / n  # arbitrary positive
        omega = 2.0 * np.pi * cycles / (n * dt)
        s = tone(omega, dt=dt, n=n)
        spec = fourier_spectrum(s)
        mags = spec.abs_amplitudes
        peak = mags[cycles]
        others = np.delete(mags, [cycles, n - cycles])
        assert np.max(others) < 1e-10 * peak

    def test_zero_series(self):
        s = TimeSeries(0.0, 0.1, np.zeros(64))
        assert np.all(fourier_spectrum(s).abs_amplitudes == 0.0)

    def test_parseval(self):
        rng = np.random.default_rng(1)
        s = TimeSeries(0.0, 0.05, rng.standard_normal(777))
        spec = fourier_spectrum(s)
        lhs = np.sum(s.values**2)
        rhs = np.sum(spec.abs_amplitudes**2) / len(s)
        assert abs(lhs - rhs) <= 1e-10 * lhs

    def test_matches_direct_summation_dft(self):
        # independent O(n^2) oracle
        s = make_reference_pulse(0.04, OMEGA0, T_F, 2.0)
        spec = fourier_spectrum(s)
        n = len(s)
        j = np.arange(n)
        oracle = np.array(
            [np.sum(s.values * np.exp(-2j * np.pi * kk * j / n)) for kk in range(n)]
        )
        assert np.max(np.abs(spec.amplitudes - oracle)) < 1e-9 * np.max(np.abs(oracle))

    def test_reference_pulse_energy_near_carrier(self):
        # the pulse switches on at full amplitude (envelope = 1 at t = 0),
        # so it is broadband: ~99.5% of the power sits within 4 envelope
        # widths of the carrier, not within one
        s = make_reference_pulse(0.04, OMEGA0, T_F, 0.05)
        spec = fourier_spectrum(s)
        omega = np.abs(spec.omegas)
        band = np.abs(omega - OMEGA0) <= 4.0 * 2.0 * np.pi / T_F
        power = spec.abs_amplitudes**2
        assert power[band].sum() > 0.99 * power.sum()

    def test_round_trip(self):
        rng = np.random.default_rng(7)
        s = TimeSeries(0.0, 0.02, rng.standard_normal(512))
        back = inverse_fourier_spectrum(fourier_spectrum(s), t0=s.t0)
        assert np.max(np.abs(back.values - s.values)) < 1e-10
        assert back.dt == pytest.approx(s.dt, rel=1e-12)

    def test_d_omega_invariant(self):
        s = tone(0.5, dt=0.03, n=256)
        assert fourier_spectrum(s).d_omega == pytest.approx(
            2.0 * np.pi / (256 * 0.03), rel=1e-14
        )


class TestBandlimitFilter:
    def test_below_cutoff_unchanged(self):
        omega = 2.0 * np.pi * 8 / (512 * 0.1)
        s = tone(omega, dt=0.1, n=512)
        out = bandlimit_filter(s, 2.0 * omega)
        assert np.max(np.abs(out.values - s.values)) < 1e-10

    def test_above_cutoff_removed(self):
        omega = 2.0 * np.pi * 120 / (512 * 0.1)
        s = tone(omega, dt=0.1, n=512)
        out = bandlimit_filter(s, omega / (30.0 / 23.0))
        assert np.max(np.abs(out.values)) < 1e-10

    def test_two_tone_low_survives(self):
        dt, n = 0.1, 512
        w1 = 2.0 * np.pi * 4 / (n * dt)
        w2 = 30.0 * w1
        t = dt * np.arange(n)
        s = TimeSeries(0.0, dt, np.cos(w1 * t) + 0.5 * np.cos(w2 * t))
        out = bandlimit_filter(s, 23.0 * w1)
        # spectral oracle: compare against the pure low tone
        assert np.max(np.abs(out.values - np.cos(w1 * t))) < 1e-10

    def test_idempotent(self):
        s = make_reference_pulse(0.04, OMEGA0, T_F, 0.1)
        once = bandlimit_filter(s, 10 * OMEGA0)
        twice = bandlimit_filter(once, 10 * OMEGA0)
        assert np.max(np.abs(twice.values - once.values)) < 1e-12

    def test_cut_above_nyquist_rejected(self):
        s = tone(0.5)
        with pytest.raises(ValueError):
            bandlimit_filter(s, np.pi / s.dt)
        with pytest.raises(ValueError):
            bandlimit_filter(s, 0.0)

    def test_identity_when_content_below_cut(self):
        s = tone(0.5, dt=0.1, n=512)
        low = bandlimit_filter(s, 1.0)
        again = bandlimit_filter(low, 2.0)
        assert np.max(np.abs(again.values - low.values)) < 1e-12


class TestRelativeDistance:
    def test_equal_is_zero(self):
        s = tone(0.5)
        assert relative_distance(s, s) == 0.0

    def test_zero_vs_target_is_one(self):
        s = tone(0.5)
        zero = s.with_values(np.zeros(len(s)))
        assert relative_distance(zero, s) == pytest.approx(1.0, rel=1e-12)

    def test_doubled_is_one(self):
        s = tone(0.5)
        assert relative_distance(s.with_values(2 * s.values), s) == pytest.approx(
            1.0, rel=1e-12
        )

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatchError):
            relative_distance(tone(0.5, n=256), tone(0.5, n=512))

    def test_degenerate_target(self):
        s = tone(0.5)
        with pytest.raises(DegenerateTargetError):
            relative_distance(s, s.with_values(np.zeros(len(s))))

    @given(st.floats(min_value=1e-3, max_value=1e3).map(lambda c: c))
    def test_scaling_invariance(self, c):
        y = tone(0.5, n=128)
        target = tone(0.7, n=128)
        base = relative_distance(y, target)
        scaled = relative_distance(
            y.with_values(c * y.values), target.with_values(c * target.values)
        )
        assert scaled == pytest.approx(base, rel=1e-9)


class TestDerivatives:
    def test_linear_exact(self):
        t = 0.1 * np.arange(64)
        s = TimeSeries(0.0, 0.1, t)
        d1, d2 = derivatives(s)
        assert np.max(np.abs(d1.values - 1.0)) < 1e-12
        assert np.max(np.abs(d2.values)) < 1e-10

    def test_quadratic_second_derivative_exact(self):
        t = 0.1 * np.arange(64)
        s = TimeSeries(0.0, 0.1, t**2)
        _, d2 = derivatives(s)
        assert np.max(np.abs(d2.values - 2.0)) < 1e-10

    def test_convergence_second_order(self):
        errs = []
        for dt in (0.02, 0.01):
            n = int(round(10.0 / dt)) + 1
            t = dt * np.arange(n)
            s = TimeSeries(0.0, dt, np.sin(OMEGA0 * 50 * t))
            d1, _ = derivatives(s)
            errs.append(np.max(np.abs(d1.values - 3.0 * np.cos(3.0 * t))))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)

    def test_too_short(self):
        with pytest.raises(ValueError):
            derivatives(TimeSeries(0.0, 0.1, np.zeros(4)))


class TestCsv:
    def test_timeseries_round_trip(self, tmp_path):
        s = make_reference_pulse(0.04, OMEGA0, T_F, 1.7)
        path = tmp_path / "series.csv"
        write_timeseries_csv(s, path)
        header = path.read_text().splitlines()[0]
        assert header == "t,value"
        back = read_timeseries_csv(path)
        assert back.dt == pytest.approx(s.dt, rel=1e-15)
        assert np.array_equal(back.values, s.values)

    def test_spectrum_export(self, tmp_path):
        s = tone(OMEGA0, dt=0.5, n=128)
        path = tmp_path / "spec.csv"
        write_spectrum_csv(fourier_spectrum(s), path, omega0=OMEGA0)
        lines = path.read_text().splitlines()
        assert lines[0] == "omega_over_omega0,abs_amplitude"
        assert len(lines) == 1 + 128 // 2 + 1
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[1]) >= 0.0
