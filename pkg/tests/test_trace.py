"""Trace value types and the rectangle-rule estimator."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpuwatt.errors import EmptyWindow, MismatchedInterval, NegativeEnergyWarning, NonMonotoneTimestamps
from gpuwatt.sources import replay_trace
from gpuwatt.trace import (
    EnergyRecord,
    MeasurementWindow,
    PowerSample,
    PowerTrace,
    compute_mean_energy,
    idle_energy,
    integrate_energy,
    write_trace,
    write_windows,
)
from gpuwatt.sources import read_windows


def make_trace(powers, interval=0.1, t0=0.0):
    samples = tuple(PowerSample(t=t0 + i * interval, p=p) for i, p in enumerate(powers))
    return PowerTrace(samples, interval)


def fig2_trace(interval=0.1, idle=30.0, plateau=140.0, post=60.0):
    """Idle, a 1.2 s execution plateau, then an elevated performance state."""
    powers = []
    n = int(10.0 / interval)
    for i in range(n):
        t = i * interval
        if t < 5.0:
            powers.append(idle)
        elif t < 6.2:
            powers.append(plateau)
        else:
            powers.append(post)
    return make_trace(powers, interval)


def oracle_window_energy(trace, t_start, t_end):
    # independent of integrate_energy: direct loop over raw samples
    total = 0.0
    for s in trace.samples:
        if t_start <= s.t < t_end:
            total += trace.sample_interval * s.p
    return total


class TestIntegrateEnergy:
    def test_constant_trace(self):
        trace = make_trace([100.0] * 50)
        got = integrate_energy(trace, MeasurementWindow(0.0, 5.0))
        assert got == pytest.approx(500.0, rel=1e-12)

    def test_empty_window(self):
        trace = make_trace([100.0] * 50)
        with pytest.raises(EmptyWindow):
            integrate_energy(trace, MeasurementWindow(100.0, 101.0))

    def test_plateau_matches_hand_summed_oracle(self):
        trace = fig2_trace()
        window = MeasurementWindow(5.0, 6.2)
        expected = oracle_window_energy(trace, 5.0, 6.2)
        assert expected == pytest.approx(12 * 0.1 * 140.0)
        assert integrate_energy(trace, window) == pytest.approx(expected, rel=1e-12)

    def test_window_is_half_open(self):
        trace = make_trace([10.0, 20.0, 30.0])
        assert integrate_energy(trace, MeasurementWindow(0.0, 0.2)) == pytest.approx(3.0)

    @given(
        powers=st.lists(st.floats(0.0, 500.0), min_size=4, max_size=40),
        cut=st.integers(min_value=1, max_value=39),
    )
    @settings(max_examples=100, deadline=None)
    def test_partition_additivity(self, powers, cut):
        cut = min(cut, len(powers) - 1)
        trace = make_trace(powers)
        end = len(powers) * 0.1
        mid = cut * 0.1
        whole = integrate_energy(trace, MeasurementWindow(0.0, end))
        left = integrate_energy(trace, MeasurementWindow(0.0, mid))
        right = integrate_energy(trace, MeasurementWindow(mid, end))
        assert whole == pytest.approx(left + right, rel=1e-12, abs=1e-12)

    @given(
        powers=st.lists(st.floats(0.1, 400.0), min_size=2, max_size=30),
        c=st.floats(0.1, 16.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_scaling(self, powers, c):
        window = MeasurementWindow(0.0, len(powers) * 0.1)
        base = integrate_energy(make_trace(powers), window)
        scaled = integrate_energy(make_trace([c * p for p in powers]), window)
        assert scaled == pytest.approx(c * base, rel=1e-9)


class TestIdleEnergy:
    @pytest.mark.parametrize(
        "p,n,dt,expected",
        [(30.0, 50, 0.1, 150.0), (0.0, 1234, 0.7, 0.0), (23.7, 120, 0.1, 284.4)],
    )
    def test_closed_form(self, p, n, dt, expected):
        assert idle_energy(p, n, dt) == pytest.approx(expected, rel=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            idle_energy(-1.0, 10, 0.1)


class TestComputeMeanEnergy:
    def test_single_iteration(self):
        trace = make_trace([100.0] * 50)
        window = MeasurementWindow(0.0, 5.0)
        est = compute_mean_energy([(trace, window)], p_idle=20.0, m=1)
        assert est.mean_energy_j == pytest.approx(400.0)
        assert (est.k_iterations, est.m_repetitions) == (1, 1)

    def test_division_by_m(self):
        trace = make_trace([100.0] * 50)
        window = MeasurementWindow(0.0, 5.0)
        est = compute_mean_energy([(trace, window)], p_idle=20.0, m=10)
        assert est.mean_energy_j == pytest.approx(40.0)

    def test_three_iterations_against_oracle(self):
        plateaus = [120.0, 130.0, 125.0]
        iterations = []
        per_iter_expected = []
        for p in plateaus:
            trace = make_trace([p] * 60)
            window = MeasurementWindow(0.0, 6.0)
            iterations.append((trace, window))
            # independent brute-force sum over the synthetic trace
            gross = sum(0.1 * s.p for s in trace.samples if 0.0 <= s.t < 6.0)
            per_iter_expected.append((gross - 60 * 0.1 * 25.0) / 5)
        est = compute_mean_energy(iterations, p_idle=25.0, m=5)
        assert est.mean_energy_j == pytest.approx(sum(per_iter_expected) / 3, rel=1e-12)
        assert est.mean_energy_j == pytest.approx((114.0 + 126.0 + 120.0) / 3)

    def test_identical_iterations_equal_single(self):
        trace = make_trace([90.0] * 30)
        window = MeasurementWindow(0.0, 3.0)
        one = compute_mean_energy([(trace, window)], 10.0, 2)
        many = compute_mean_energy([(trace, window)] * 7, 10.0, 2)
        assert many.mean_energy_j == pytest.approx(one.mean_energy_j, rel=1e-12)

    def test_permutation_invariance(self):
        iterations = []
        for p in (80.0, 120.0, 95.0, 101.0):
            iterations.append((make_trace([p] * 20), MeasurementWindow(0.0, 2.0)))
        forward = compute_mean_energy(iterations, 15.0, 3)
        backward = compute_mean_energy(list(reversed(iterations)), 15.0, 3)
        assert forward.mean_energy_j == pytest.approx(backward.mean_energy_j, rel=1e-12)

    def test_reduces_to_integrate(self):
        trace = fig2_trace()
        window = MeasurementWindow(4.9, 6.3)
        est = compute_mean_energy([(trace, window)], p_idle=0.0, m=1)
        assert est.mean_energy_j == pytest.approx(integrate_energy(trace, window), rel=1e-12)

    def test_negative_net_energy_warns(self):
        trace = make_trace([5.0] * 10)
        window = MeasurementWindow(0.0, 1.0)
        with pytest.warns(NegativeEnergyWarning):
            est = compute_mean_energy([(trace, window)], p_idle=50.0, m=1)
        assert est.mean_energy_j < 0

    def test_mismatched_interval(self):
        a = make_trace([10.0] * 10, interval=0.1)
        b = make_trace([10.0] * 10, interval=0.2)
        with pytest.raises(MismatchedInterval):
            compute_mean_energy(
                [(a, MeasurementWindow(0, 1)), (b, MeasurementWindow(0, 1))], 0.0, 1
            )


class TestInvariants:
    def test_non_monotone_rejected_at_construction(self):
        samples = (PowerSample(0.2, 10.0), PowerSample(0.1, 10.0))
        with pytest.raises(NonMonotoneTimestamps):
            PowerTrace(samples, 0.1)

    def test_sample_validation(self):
        with pytest.raises(ValueError):
            PowerSample(t=0.0, p=-1.0)
        with pytest.raises(ValueError):
            PowerSample(t=-0.1, p=1.0)

    def test_window_validation(self):
        with pytest.raises(ValueError):
            MeasurementWindow(2.0, 2.0)

    def test_record_validation(self):
        with pytest.raises(ValueError):
            EnergyRecord("n", 1, "i", 0, 1.0, 1, 1)
        with pytest.raises(ValueError):
            EnergyRecord("n", 1, "i", 10, 1.0, 0, 1)
        # negative energy is allowed on records, only flagged upstream
        EnergyRecord("n", 1, "i", 10, -0.5, 1, 1)


class TestCsvRoundTrip:
    def test_trace_round_trip_bit_exact(self, tmp_path):
        trace = fig2_trace(interval=0.1)
        path = tmp_path / "trace.csv"
        write_trace(trace, path)
        back = replay_trace(path)
        assert back.sample_interval == pytest.approx(0.1)
        assert [(s.t, s.p) for s in back.samples] == [(s.t, s.p) for s in trace.samples]

    def test_windows_round_trip(self, tmp_path):
        windows = [MeasurementWindow(0.5, 1.5), MeasurementWindow(2.0, 2.25)]
        path = tmp_path / "windows.csv"
        write_windows(windows, path)
        assert read_windows(path) == windows
