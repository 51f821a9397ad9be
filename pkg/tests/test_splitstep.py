"""Propagator tests: exactness limits, order of accuracy, and run guards.

Oracle constants used below:

* Free flight is exact for the splitting (kinetic term alone), so a
  grid-periodic plane wave must track e^{ipx − ip²t/2} to rounding.
* A spatially uniform drive V(t) = cos t commutes with the kinetic term;
  the only splitting error is the midpoint rule on ∫V dt, giving a clean
  global O(dt²) against ψ_free·e^{−i sin t}.
* Tracked-state fixtures, frozen from runs of this module's own build and
  reproduced by the probe in the docstring of each test:
    - family 1 (α = 0.9), windowed exact scattering state, one period,
      dx = 1/8: max error 4.606935e-05 at dt = T/2000 and 1.151343e-05
      at dt = T/4000 (ratio 4.001 — dt² regime).
    - family 2 (α = β = 2), one Strang step at dt = T/1000: local error
      7.048357e-05, shrinking ×8.04 when dt halves (local O(dt³)).
"""

import numpy as np
import pytest

from floquetwell import (
    BlowupError, EdgeLeakError, Family1Potential, Family2Potential, FreePotential,
    Grid1D, PacketParams, ParameterError, StaticSech2, WaveField, darboux_state,
    make_gaussian, norm2, seed_family1, seed_family2,
)
from floquetwell.darboux import PotentialSpec
from floquetwell.splitstep import (
    PropagationConfig, Trajectory, convergence_probe, propagate, step,
)

T = 4.0 * np.pi


class UniformDrive(PotentialSpec):
    """V(x, t) = cos t: commutes with −½∂ₓₓ, exactly solvable."""

    period = 2.0 * np.pi

    def evaluate(self, x, t):
        return np.full(np.shape(x), np.cos(t), dtype=complex)

    def serialize(self):
        return "uniform-drive"


class FlatGain(PotentialSpec):
    """V = i·g: uniform amplification at rate g (norm² grows as e^{2gt})."""

    period = None

    def __init__(self, g):
        self.g = g

    def evaluate(self, x, t):
        return np.full(np.shape(x), 1j * self.g, dtype=complex)

    def serialize(self):
        return f"flat-gain g={self.g}"


def _windowed_state(grid, seed, p, half_width, ramp):
    state = darboux_state(seed, p, "left")
    win = 0.5 * (1.0 - np.tanh((np.abs(grid.x) - half_width) / ramp))
    return state, WaveField(grid, state.evaluate(grid.x, 0.0) * win, 0.0)


# ---------------------------------------------------------------------------
# exactness and order of accuracy

def test_free_plane_wave_tracked_to_rounding():
    grid = Grid1D(-64.0, 64.0, 256)
    p = 2.0 * np.pi * 16 / 128.0
    f = WaveField(grid, np.exp(1j * p * grid.x), 0.0)
    cfg = PropagationConfig(t_final=1.0, dt=0.01, snapshot_stride=10**9,
                            edge_tol=None)
    out = propagate(f, FreePotential(), cfg).final
    exact = np.exp(1j * (p * grid.x - 0.5 * p**2 * 1.0))
    assert np.max(np.abs(out.values - exact)) < 1e-12


def test_uniform_drive_converges_at_second_order():
    grid = Grid1D(-64.0, 64.0, 512)
    f = make_gaussian(grid, PacketParams(width=8.0, center=0.0, momentum=0.5))
    spectrum = np.fft.fft(f.values)

    def reference(x, t):
        free = np.fft.ifft(np.exp(-0.5j * grid.k**2 * t) * spectrum)
        return free * np.exp(-1j * np.sin(t))

    errs = convergence_probe(f, UniformDrive(), t_final=2.0, dt=0.025,
                             reference=reference)
    assert errs[0] == pytest.approx(2.3657e-05, rel=1e-3)
    for a, b in zip(errs, errs[1:]):
        assert a / b > 3.5


def test_family1_state_tracked_over_one_period():
    grid = Grid1D(-128.0, 128.0, 2048)
    state, f0 = _windowed_state(grid, seed_family1(0.9, 0.0, 1.0), 1.0, 80.0, 6.0)
    pot = Family1Potential(0.9, 0.0, 1.0)
    mask = np.abs(grid.x) <= 22.0
    exact = state.evaluate(grid.x, T)
    errs = []
    for nsub in (2000, 4000):
        cfg = PropagationConfig(t_final=T, dt=T / nsub, snapshot_stride=10**9,
                                edge_tol=None)
        out = propagate(f0, pot, cfg).final
        errs.append(float(np.max(np.abs(out.values - exact)[mask])))
    assert errs[0] == pytest.approx(4.606935e-05, rel=1e-3)
    assert errs[1] == pytest.approx(1.151343e-05, rel=1e-3)
    assert errs[0] / errs[1] > 3.5


def test_family2_single_step_local_error_is_cubic():
    grid = Grid1D(-64.0, 64.0, 1024)
    p = 2.0 * np.pi * 20 / 128.0
    state, f0 = _windowed_state(grid, seed_family2(2.0, 2.0, 1.0), p, 40.0, 4.0)
    pot = Family2Potential(2.0, 2.0, 1.0)
    mask = np.abs(grid.x) <= 10.0
    errs = []
    for dt in (T / 1000, T / 2000):
        out = step(f0, pot, dt)
        errs.append(float(np.max(np.abs(out.values - state.evaluate(grid.x, dt))[mask])))
    assert errs[0] == pytest.approx(7.048357e-05, rel=1e-3)
    assert errs[0] / errs[1] > 7.0


def test_step_reverses_exactly():
    grid = Grid1D(-64.0, 64.0, 512)
    f = make_gaussian(grid, PacketParams(width=6.0, center=-10.0, momentum=1.0))
    pot = Family1Potential(0.9, 0.0, 1.0)
    there = step(f, pot, 0.02)
    back = step(there, pot, -0.02)
    assert back.time == pytest.approx(0.0, abs=1e-15)
    assert np.max(np.abs(back.values - f.values)) < 1e-12


def test_norm_conserved_for_real_potential():
    grid = Grid1D(-64.0, 64.0, 512)
    f = make_gaussian(grid, PacketParams(width=6.0, center=-20.0, momentum=1.0))
    cfg = PropagationConfig(t_final=5.0, dt=0.01, snapshot_stride=100,
                            edge_tol=None)
    traj = propagate(f, StaticSech2(1.0), cfg)
    drift = max(abs(n / traj.norms[0] - 1.0) for n in traj.norms)
    assert drift < 1e-12


# ---------------------------------------------------------------------------
# guards

def test_time_grid_must_divide_t_final():
    with pytest.raises(ParameterError, match="integer number of steps"):
        PropagationConfig(t_final=1.0, dt=0.3).n_steps


def test_dt_must_resolve_the_drive():
    grid = Grid1D(-64.0, 64.0, 256)
    f = make_gaussian(grid, PacketParams(width=6.0, center=0.0, momentum=0.0))
    cfg = PropagationConfig(t_final=1.0, dt=T / 100)
    with pytest.raises(ParameterError, match="too coarse"):
        propagate(f, Family1Potential(0.9, 0.0, 1.0), cfg)


def test_overstrong_gain_is_refused_per_step():
    grid = Grid1D(-64.0, 64.0, 256)
    f = make_gaussian(grid, PacketParams(width=6.0, center=0.0, momentum=0.0))
    with pytest.raises(ParameterError, match="gain too strong"):
        step(f, FlatGain(200.0), 0.01)


def test_sustained_gain_trips_the_blowup_guard():
    grid = Grid1D(-64.0, 64.0, 256)
    f = make_gaussian(grid, PacketParams(width=6.0, center=0.0, momentum=0.0))
    cfg = PropagationConfig(t_final=2.0, dt=0.01, snapshot_stride=10,
                            edge_tol=None)
    with pytest.raises(BlowupError) as err:
        propagate(f, FlatGain(10.0), cfg)
    assert err.value.step <= 80


def test_edge_leak_aborts_before_wraparound():
    grid = Grid1D(-32.0, 32.0, 256)
    f = make_gaussian(grid, PacketParams(width=4.0, center=10.0, momentum=2.0))
    cfg = PropagationConfig(t_final=10.0, dt=0.01, snapshot_stride=10)
    with pytest.raises(EdgeLeakError) as err:
        propagate(f, FreePotential(), cfg)
    assert err.value.leak > 1e-8
    assert err.value.step < 1000


# ---------------------------------------------------------------------------
# trajectory bookkeeping

def test_trajectory_records_and_serializes(tmp_path):
    grid = Grid1D(-64.0, 64.0, 256)
    f = make_gaussian(grid, PacketParams(width=6.0, center=-10.0, momentum=1.0))
    cfg = PropagationConfig(t_final=1.0, dt=0.01, snapshot_stride=30,
                            edge_tol=None)
    traj = propagate(f, FreePotential(), cfg)
    assert traj.steps == [0, 30, 60, 90, 100]
    assert traj.final.time == pytest.approx(1.0)
    assert traj.norms[0] == pytest.approx(norm2(f))

    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,time,norm2,centroid,edge_leak"
    assert len(lines) == 1 + len(traj.steps)
    first = lines[1].split(",")
    assert int(first[0]) == 0
    assert float(first[3]) == pytest.approx(-10.0, abs=1e-6)
