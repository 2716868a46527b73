import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmcontrol.analysis import (Label, Spectrum, ThresholdRule, bandwidth, coherence,
                                coherence_trace, control_spectrum, controllability_table,
                                decoherence_time, power_spectrum, retention)
from nmcontrol.bloch import (REFERENCE_INITIAL_STATE, BlochVector, ControlField, TimeGrid,
                             Trajectory, target_trajectory)
from nmcontrol.reservoir import ReservoirParams


def synthetic(grid, c):
    """Trajectory whose coherence is exactly `c` (x1 = 2c, x2 = 0)."""
    s = np.zeros((grid.n_steps + 1, 3))
    s[:, 0] = 2.0 * c
    return Trajectory(grid, s)


class TestCoherence:
    def test_examples(self):
        assert coherence(BlochVector(0, 0, 1)) == 0.0
        assert coherence(BlochVector(1, 0, 0)) == 0.5
        assert coherence(REFERENCE_INITIAL_STATE) == pytest.approx(0.5 * math.sqrt(0.75 + 0.125))
        assert coherence(REFERENCE_INITIAL_STATE) == pytest.approx(0.4677, abs=1e-4)

    def test_array_input(self):
        out = coherence(np.array([[1, 0, 0], [0, 0.6, 0.8]]))
        assert out.tolist() == [0.5, 0.3]

    @settings(max_examples=100)
    @given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 2 * math.pi))
    def test_invariant_under_z_rotation(self, x1, x2, x3, phi):
        c, s = math.cos(phi), math.sin(phi)
        rotated = BlochVector(c * x1 - s * x2, s * x1 + c * x2, x3)
        assert coherence(rotated) == pytest.approx(coherence(BlochVector(x1, x2, x3)),
                                                   abs=1e-15)


class TestDecoherenceTime:
    g = TimeGrid(0.0, 20.0, 2000)

    def test_constant_never_crosses(self):
        assert decoherence_time(synthetic(self.g, np.full(2001, 0.4))) is None

    def test_exponential_decay(self):
        tau = 3.7
        traj = synthetic(self.g, 0.5 * np.exp(-self.g.times / tau))
        assert abs(decoherence_time(traj) - tau) <= self.g.h

    def test_immediate_crossing(self):
        traj = synthetic(self.g, 0.5 * np.exp(-self.g.times))
        assert decoherence_time(traj, 0.999999) == pytest.approx(1e-6, abs=self.g.h)
        assert decoherence_time(traj, 0.999999) <= self.g.h

    def test_no_initial_coherence(self):
        assert decoherence_time(synthetic(self.g, np.zeros(2001))) is None

    @pytest.mark.parametrize("f", [0.0, 1.0, -0.1])
    def test_bad_fraction(self, f):
        with pytest.raises(ValueError):
            decoherence_time(synthetic(self.g, np.ones(2001)), f)

    def test_retention(self):
        c = 0.5 * np.exp(-self.g.times / 10)
        assert retention(synthetic(self.g, c)) == pytest.approx(math.exp(-2))
        assert coherence_trace(synthetic(self.g, c)) == pytest.approx(c)


class TestSpectrum:
    def test_constant_signal(self):
        spec = power_spectrum(np.full(64, 3.2), 0.1)
        assert np.all(spec.power == 0)

    def test_frequency_axis(self):
        h = 0.05
        for n in (100, 101):
            spec = power_spectrum(np.random.default_rng(0).normal(size=n), h)
            assert spec.freqs[0] == 0
            assert spec.freqs[-1] <= math.pi / h
            assert spec.freqs[1] == pytest.approx(2 * math.pi / (n * h))
            assert len(spec.freqs) == len(spec.power) == n // 2 + 1

    def test_pure_tone(self):
        n, h = 1000, 0.02
        w1 = 2 * math.pi * 5 / (n * h) * 7  # 35 whole periods
        spec = power_spectrum(np.cos(w1 * h * np.arange(n)), h)
        k = int(np.argmax(spec.power))
        assert spec.freqs[k] == pytest.approx(w1)
        assert spec.power[k] > 1e6 * np.delete(spec.power, k).max()
        assert bandwidth(spec, 0.9) == pytest.approx(w1)

    @pytest.mark.parametrize("n", [256, 257])
    def test_parseval(self, n, rng):
        x = rng.normal(size=n)
        spec = power_spectrum(x, 0.3)
        assert spec.two_sided_total() == pytest.approx(n * np.sum((x - x.mean()) ** 2), rel=1e-9)

    def test_target_components_peak_at_precession_frequency(self):
        g = TimeGrid(0.0, 20.0, 4000)
        for w0 in (1.0, 2.5):
            x = target_trajectory(g.times, REFERENCE_INITIAL_STATE, w0)
            for comp in (0, 1):
                spec = power_spectrum(x[:, comp], g.h)
                peak = spec.freqs[np.argmax(spec.power)]
                assert abs(peak - w0) <= spec.freqs[1]

    def test_white_noise_bandwidth(self):
        n, h = 4096, 0.01
        nyquist = math.pi / h
        widths = [bandwidth(power_spectrum(np.random.default_rng(s).normal(size=n), h), 0.9)
                  for s in range(20)]
        assert np.mean(widths) == pytest.approx(0.9 * nyquist, rel=0.02)

    def test_zero_signal_bandwidth_is_undefined(self):
        with pytest.raises(ValueError, match="all-zero"):
            bandwidth(power_spectrum(np.zeros(32), 0.1))

    @pytest.mark.parametrize("frac", [0.0, 1.0])
    def test_bad_fraction(self, frac):
        with pytest.raises(ValueError):
            bandwidth(power_spectrum(np.arange(8.0), 0.1), frac)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            power_spectrum([1.0], 0.1)
        with pytest.raises(ValueError):
            power_spectrum([1.0, 2.0], 0.0)
        with pytest.raises(ValueError):
            Spectrum(np.zeros(3), np.zeros(2), 0.1, 4)

    def test_control_spectrum_adds_channels(self):
        g = TimeGrid(0.0, 10.0, 100)
        c = ControlField(g, np.sin(g.times), np.cos(3 * g.times))
        both = control_spectrum(c)
        assert both.power == pytest.approx(power_spectrum(c.ux, g.h).power
                                           + power_spectrum(c.uy, g.h).power)
        with pytest.raises(ValueError):
            both + power_spectrum(np.zeros(50), g.h)


class TestThresholdRule:
    rule = ThresholdRule()

    @pytest.mark.parametrize("unc,mk,nm,label", [
        (0.9, 0.1, 0.1, Label.SLOW_DECAY),
        (0.8, 0.9, 0.9, Label.SLOW_DECAY),
        (0.3, 0.6, 0.7, Label.CONTROLLABLE),
        (0.3, 0.5, 0.7, Label.CONTROLLABLE_NON_MARKOVIAN_ONLY),
        (0.3, 0.55, 0.59, Label.UNCONTROLLABLE),
        (0.2, 0.45, 0.49, Label.UNCONTROLLABLE),
        (0.0, 0.0, 0.0, Label.UNCONTROLLABLE),
    ])
    def test_labels(self, unc, mk, nm, label):
        assert self.rule.classify(unc, mk, nm) is label

    def test_thresholds_are_configurable(self):
        loose = ThresholdRule(slow_decay=0.95, gain=1.05, floor=0.1)
        assert loose.classify(0.9, 0.96, 0.96) is Label.CONTROLLABLE
        assert loose.as_dict() == {"slow_decay": 0.95, "gain": 1.05, "floor": 0.1}


class TestTable:
    def test_layout_and_annotations(self):
        g = TimeGrid(0.0, 5.0, 500)
        rows = controllability_table((3.0, 1.0 / (2 * math.pi)), (1.0,),
                                     ReservoirParams(), grid=g)
        assert len(rows) == 1 and len(rows[0]) == 2
        good, pole = rows[0]
        assert (good.kBT, good.r) == (3.0, 1.0)
        assert isinstance(good.label, Label)
        assert 0 < good.uncontrolled < 1
        # omega_c equal to the first Matsubara frequency is a pole of the closed form
        assert pole.label is None and not pole.converged
        assert "pole" in pole.notes[0]

    def test_parallel_matches_serial(self):
        g = TimeGrid(0.0, 5.0, 500)
        args = ((0.3, 300.0), (0.1, 10.0), ReservoirParams())
        serial = controllability_table(*args, grid=g)
        parallel = controllability_table(*args, grid=g, jobs=2)
        assert [[(c.label, c.non_markovian) for c in row] for row in serial] == \
               [[(c.label, c.non_markovian) for c in row] for row in parallel]
