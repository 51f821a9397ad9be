"""Grid, wave-field, and snapshot-format tests."""

import math

import numpy as np
import pytest

from floquetwell import (
    DomainError, Grid1D, ObservableError, PacketParams, ParameterError,
    WaveField, centroid, edge_fraction, field_to_csv, make_gaussian,
    momentum_spectrum, norm2, read_snapshot, windowed_norm, write_snapshot,
)

DEFAULT = Grid1D(-512.0, 512.0, 8192)
PACKET = PacketParams(width=15.0, center=-120.0, momentum=1.0)


def test_grid_basic_geometry():
    g = DEFAULT
    assert g.dx == 0.125
    assert g.length == 1024.0
    assert g.x[0] == -512.0
    assert g.x[-1] == 512.0 - 0.125
    assert g.dk == pytest.approx(2.0 * np.pi / 1024.0, rel=1e-15)
    assert g.k.min() == pytest.approx(-np.pi / g.dx, rel=1e-12)


def test_grid_validation():
    with pytest.raises(DomainError):
        Grid1D(0.0, 0.0, 64)
    with pytest.raises(DomainError):
        Grid1D(-1.0, 1.0, 48)       # not a power of two
    with pytest.raises(DomainError):
        Grid1D(-1.0, 1.0, 8)        # too small


def test_nearest_momentum_is_grid_commensurate():
    g = DEFAULT
    p = g.nearest_momentum(1.0)
    cycles = p * g.length / (2.0 * np.pi)
    assert cycles == pytest.approx(round(cycles), abs=1e-12)
    assert abs(p - 1.0) <= 0.5 * g.dk


def test_packet_validation():
    with pytest.raises(ParameterError):
        PacketParams(width=-1.0, center=0.0, momentum=1.0)
    with pytest.raises(ParameterError):
        make_gaussian(DEFAULT, PacketParams(width=15.0, center=-480.0, momentum=1.0))


def test_gaussian_norm_matches_closed_form():
    # ∫ exp(−2(x−x0)²/w²) dx = w·√(π/2) = 18.799712059732504 for w = 15;
    # the grid sum is spectrally accurate for this envelope
    f = make_gaussian(DEFAULT, PACKET)
    assert norm2(f) == pytest.approx(15.0 * math.sqrt(math.pi / 2.0), rel=1e-12)


def test_gaussian_center_sample_and_centroid():
    f = make_gaussian(DEFAULT, PACKET)
    j0 = int(round((PACKET.center - DEFAULT.x_min) / DEFAULT.dx))
    assert DEFAULT.x[j0] == PACKET.center
    assert f.values[j0] == pytest.approx(np.exp(1j * 1.0 * -120.0), abs=1e-14)
    assert centroid(f) == pytest.approx(-120.0, abs=1e-9)


def test_centroid_tracks_cyclic_shift():
    f = make_gaussian(DEFAULT, PACKET)
    m = 800
    g = f.with_values(np.roll(f.values, m))
    assert centroid(g) == pytest.approx(-120.0 + m * DEFAULT.dx, abs=1e-8)


def test_centroid_rejects_empty_field():
    f = WaveField(DEFAULT, np.zeros(DEFAULT.n_points))
    with pytest.raises(ObservableError):
        centroid(f)


def test_momentum_spectrum_matches_analytic_transform():
    # for ψ = exp(−(x−x0)²/w²)·e^{ipx}:
    # ψ̂(k) = (w/√2)·exp(−(k−p)²w²/4)·exp(−i(k−p)x0)
    f = make_gaussian(DEFAULT, PACKET)
    k, spec = momentum_spectrum(f)
    w, x0, p = PACKET.width, PACKET.center, PACKET.momentum
    analytic = (w / math.sqrt(2.0)) * np.exp(-((k - p) ** 2) * w**2 / 4.0
                                             - 1j * (k - p) * x0)
    assert np.max(np.abs(spec - analytic)) < 1e-8 * np.max(np.abs(analytic))
    assert k[np.argmax(np.abs(spec))] == pytest.approx(p, abs=DEFAULT.dk)


def test_parseval():
    f = make_gaussian(DEFAULT, PACKET)
    _, spec = momentum_spectrum(f)
    assert DEFAULT.dk * np.sum(np.abs(spec) ** 2) == pytest.approx(
        norm2(f), rel=1e-10)


def test_spectrum_round_trip():
    rng = np.random.default_rng(7)
    vals = rng.standard_normal(DEFAULT.n_points) + 1j * rng.standard_normal(DEFAULT.n_points)
    f = WaveField(DEFAULT, vals)
    k, spec = momentum_spectrum(f)
    # undo the sort, the origin phase, and the scaling, then invert
    order = np.argsort(DEFAULT.k, kind="stable")
    raw = np.empty_like(spec)
    raw[order] = spec
    raw = raw * np.exp(1j * DEFAULT.k * DEFAULT.x_min) / (
        DEFAULT.dx / math.sqrt(2.0 * np.pi))
    back = np.fft.ifft(raw)
    assert np.max(np.abs(back - vals)) < 1e-12 * np.max(np.abs(vals))


def test_windowed_norm_partitions():
    f = make_gaussian(DEFAULT, PACKET)
    a, b = -37.3, 141.9
    total = (windowed_norm(f, DEFAULT.x_min, a) + windowed_norm(f, a, b)
             + windowed_norm(f, b, DEFAULT.x_max))
    assert total == pytest.approx(norm2(f), rel=1e-12)
    with pytest.raises(ParameterError):
        windowed_norm(f, 1.0, 1.0)


def test_edge_fraction():
    f = make_gaussian(DEFAULT, PACKET)
    assert edge_fraction(f) < 1e-15
    flat = WaveField(DEFAULT, np.ones(DEFAULT.n_points))
    assert edge_fraction(flat) == pytest.approx(0.05, abs=1e-3)


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    vals = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    f = WaveField(Grid1D(-16.0, 16.0, 256), vals, time=3.25)
    path = tmp_path / "field.snap"
    write_snapshot(path, f)
    g = read_snapshot(path)
    assert g.grid == f.grid
    assert g.time == 3.25
    assert np.array_equal(g.values, f.values)       # bit-exact
    # header layout: magic + u32 + 3×f64 = 32 bytes, then 16 bytes/sample
    assert path.stat().st_size == 32 + 16 * 256


def test_snapshot_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.snap"
    path.write_bytes(b"NOPE" + b"\0" * 64)
    with pytest.raises(ParameterError):
        read_snapshot(path)


def test_snapshot_rejects_truncation(tmp_path):
    f = WaveField(Grid1D(-16.0, 16.0, 256), np.ones(256))
    path = tmp_path / "cut.snap"
    write_snapshot(path, f)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ParameterError):
        read_snapshot(path)


def test_field_csv_format(tmp_path):
    grid = Grid1D(-1.0, 1.0, 16)
    vals = np.arange(16) * (0.5 - 0.25j)
    f = WaveField(grid, vals)
    path = tmp_path / "field.csv"
    field_to_csv(path, f)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,re,im,abs2"
    assert len(lines) == 17
    cells = lines[4].split(",")
    assert float(cells[0]) == grid.x[3]
    assert float(cells[1]) == vals[3].real
    assert float(cells[2]) == vals[3].imag
    assert float(cells[3]) == abs(vals[3]) ** 2
    assert "\r" not in path.read_text()
