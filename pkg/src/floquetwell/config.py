"""Experiment configuration: flat INI text, defaults, and figure presets.

A config is five sections — [grid], [potential], [packet], [propagation],
[analysis] — with every key optional and defaulting to the standard
wave-packet experiment (Gaussian packet w=15, p=1, x0=−120 against the
family-1 well α=0.9, β=0, μ=1).  Unknown sections or keys are rejected
outright: a typo that silently falls back to a default would fabricate a
different experiment.

`load_config` resolves precedence as defaults < preset < file, re-validates
every cross-field constraint after merging, and returns an
:class:`ExperimentConfig` whose `render()` is the fully-resolved echo written
into every output bundle (sufficient to re-run the experiment bit-for-bit).
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields as dataclass_fields

from .darboux import FreePotential, PotentialSpec, parse_potential
from .errors import ConfigError, ParameterError, SingularSeedError
from .fields import Grid1D, PacketParams
from .splitstep import PropagationConfig

__all__ = [
    "ExperimentConfig", "GridSection", "PotentialSection", "PacketSection",
    "PropagationSection", "AnalysisSection",
    "parse_config", "load_config", "preset_text", "PRESET_NAMES",
]


# ---------------------------------------------------------------------------
# sections

@dataclass(frozen=True)
class GridSection:
    x_min: float = -512.0
    x_max: float = 512.0
    n_points: int = 8192

    def build(self) -> Grid1D:
        return Grid1D(self.x_min, self.x_max, self.n_points)


@dataclass(frozen=True)
class PotentialSection:
    """Well descriptor; which keys are consumed depends on `family`.

    family ∈ {1, 2, hermitian, sech2, free, table}.  `hermitian` takes the
    real part of the inner family named by `inner_family`; `table` reads
    samples from `table_file` with drive period `period`.
    """

    family: str = "1"
    alpha_re: float = 0.9
    alpha_im: float = 0.0
    beta_re: float = 0.0
    beta_im: float = 0.0
    mu: float = 1.0
    inner_family: str | None = None
    period: float | None = None
    table_file: str | None = None

    def build(self) -> PotentialSpec:
        fam = self.family
        if fam in ("1", "2"):
            block = {"family": fam, "alpha_re": self.alpha_re,
                     "alpha_im": self.alpha_im, "beta_re": self.beta_re,
                     "beta_im": self.beta_im, "mu": self.mu}
        elif fam == "hermitian":
            if self.inner_family not in ("1", "2"):
                raise ConfigError(
                    "potential family 'hermitian' needs inner_family = 1 or 2")
            block = {"family": "hermitian", "inner_family": self.inner_family,
                     "alpha_re": self.alpha_re, "alpha_im": self.alpha_im,
                     "beta_re": self.beta_re, "beta_im": self.beta_im,
                     "mu": self.mu}
        elif fam in ("sech2", "free"):
            block = {"family": fam, "mu": self.mu}
        elif fam == "table":
            if self.table_file is None or self.period is None:
                raise ConfigError(
                    "potential family 'table' needs table_file and period")
            block = {"family": "table", "table_file": self.table_file,
                     "period": self.period}
        else:
            raise ConfigError(
                f"unknown potential family {fam!r} "
                "(expected 1, 2, hermitian, sech2, free, or table)")
        try:
            return parse_potential(block)
        except (ParameterError, OSError) as exc:
            raise ConfigError(f"[potential] rejected: {exc}") from exc


@dataclass(frozen=True)
class PacketSection:
    width: float = 15.0
    center: float = -120.0
    momentum: float = 1.0

    def build(self) -> PacketParams:
        return PacketParams(self.width, self.center, self.momentum)


@dataclass(frozen=True)
class PropagationSection:
    """Time-marching knobs; dt is expressed as steps per drive period so
    configs stay valid across different μ."""

    t_final: float = 240.0
    steps_per_period: int = 1000
    snapshot_stride: int = 200
    edge_tol: float | None = 1e-8
    edge_band: float = 0.05


@dataclass(frozen=True)
class AnalysisSection:
    """Observable extraction and per-command check thresholds.

    `max_scattered` / `min_scattered` arm the propagate-summary checks when
    set (blank = no check).  `delay_alpha2`/`delay_beta2` parameterize the
    family-2 leg of the delay comparison.  `tail_lo`/`tail_hi` bound the
    zoomed tail excerpt of the delay profiles — a display choice, not a
    physical one.
    """

    well_center: float = 0.0
    clear_radius: float = 25.0
    n_channels: int = 12
    energies: tuple[float, ...] = (0.125, 0.5, 2.0, 8.0)
    sides: tuple[str, ...] = ("left", "right")
    tail_lo: float = 200.0
    tail_hi: float = 245.0
    max_scattered: float | None = None
    min_scattered: float | None = None
    delay_alpha2: float = 2.0
    delay_beta2: float = 2.0
    crossval_channels: int = 28
    crossval_nodes: int = 7


# name -> (python type tag); tags drive both coercion and rendering
_SCHEMA: dict[str, dict[str, str]] = {
    "grid": {"x_min": "float", "x_max": "float", "n_points": "int"},
    "potential": {"family": "str", "alpha_re": "float", "alpha_im": "float",
                  "beta_re": "float", "beta_im": "float", "mu": "float",
                  "inner_family": "optstr", "period": "optfloat",
                  "table_file": "optstr"},
    "packet": {"width": "float", "center": "float", "momentum": "float"},
    "propagation": {"t_final": "float", "steps_per_period": "int",
                    "snapshot_stride": "int", "edge_tol": "optfloat",
                    "edge_band": "float"},
    "analysis": {"well_center": "float", "clear_radius": "float",
                 "n_channels": "int", "energies": "floatlist",
                 "sides": "strlist", "tail_lo": "float", "tail_hi": "float",
                 "max_scattered": "optfloat", "min_scattered": "optfloat",
                 "delay_alpha2": "float", "delay_beta2": "float",
                 "crossval_channels": "int", "crossval_nodes": "int"},
}

_SECTION_TYPES = {"grid": GridSection, "potential": PotentialSection,
                  "packet": PacketSection, "propagation": PropagationSection,
                  "analysis": AnalysisSection}


def _coerce(section: str, key: str, raw: str, source: str):
    tag = _SCHEMA[section][key]
    raw = raw.strip()
    try:
        if tag == "float":
            return float(raw)
        if tag == "int":
            val = int(raw)
            return val
        if tag == "str":
            return raw
        if tag == "optfloat":
            return None if raw == "" else float(raw)
        if tag == "optstr":
            return None if raw == "" else raw
        if tag == "floatlist":
            return tuple(float(s) for s in raw.split(",") if s.strip())
        if tag == "strlist":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(
            f"{source}: [{section}] {key} = {raw!r} is not a {tag}") from exc
    raise AssertionError(f"unhandled schema tag {tag}")  # pragma: no cover


# ---------------------------------------------------------------------------
# the resolved config

@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSection = GridSection()
    potential: PotentialSection = PotentialSection()
    packet: PacketSection = PacketSection()
    propagation: PropagationSection = PropagationSection()
    analysis: AnalysisSection = AnalysisSection()

    # -- derived builders ---------------------------------------------------

    def build_grid(self) -> Grid1D:
        return self.grid.build()

    def build_packet(self) -> PacketParams:
        return self.packet.build()

    def build_potential(self) -> PotentialSpec:
        return self.potential.build()

    def drive_period(self) -> float:
        period = self.build_potential().period
        if period is None:  # pragma: no cover - no config family is aperiodic
            raise ConfigError("configured potential has no drive period")
        return period

    def dt(self) -> float:
        return self.drive_period() / self.propagation.steps_per_period

    def n_steps(self) -> int:
        """Step count whose product with dt best lands on t_final."""
        n = round(self.propagation.t_final / self.dt())
        return max(1, int(n))

    def t_end(self) -> float:
        """The reachable end time: t_final rounded to a whole step count."""
        return self.n_steps() * self.dt()

    def propagation_config(self) -> PropagationConfig:
        prop = self.propagation
        return PropagationConfig(
            t_final=self.t_end(), dt=self.dt(),
            snapshot_stride=prop.snapshot_stride,
            edge_tol=prop.edge_tol, edge_band=prop.edge_band)

    # -- validation ---------------------------------------------------------

    def validate(self) -> "ExperimentConfig":
        """Re-check every cross-field constraint; raises ConfigError."""
        try:
            grid = self.build_grid()
        except ParameterError as exc:
            raise ConfigError(f"[grid] rejected: {exc}") from exc
        try:
            packet = self.build_packet()
        except ParameterError as exc:
            raise ConfigError(f"[packet] rejected: {exc}") from exc
        if packet.center - 5.0 * packet.width < grid.x_min or \
                packet.center + 5.0 * packet.width > grid.x_max:
            raise ConfigError(
                f"packet support [{packet.center - 5 * packet.width}, "
                f"{packet.center + 5 * packet.width}] exceeds the grid "
                f"domain [{grid.x_min}, {grid.x_max})")
        try:
            spec = self.build_potential()
        except SingularSeedError as exc:
            loc = f" near (x, t) = {exc.location}" if exc.location else ""
            raise ConfigError(f"[potential] singular{loc}: {exc}") from exc

        prop = self.propagation
        if prop.t_final <= 0:
            raise ConfigError(f"t_final must be positive, got {prop.t_final}")
        if prop.steps_per_period < 200:
            raise ConfigError(
                "steps_per_period must be >= 200 to resolve the drive, got "
                f"{prop.steps_per_period}")
        if prop.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        if prop.edge_tol is not None and prop.edge_tol <= 0:
            raise ConfigError("edge_tol must be positive or blank")
        if not 0.0 < prop.edge_band < 0.5:
            raise ConfigError("edge_band must be in (0, 0.5)")

        an = self.analysis
        if not grid.x_min < an.well_center < grid.x_max:
            raise ConfigError(f"well_center {an.well_center} outside the grid")
        if an.clear_radius <= 0:
            raise ConfigError("clear_radius must be positive")
        if an.n_channels < 1 or an.crossval_channels < 1:
            raise ConfigError("channel counts must be >= 1")
        if an.crossval_nodes < 2:
            raise ConfigError("crossval_nodes must be >= 2")
        if not an.energies:
            raise ConfigError("energies list is empty")
        if any(E <= 0 for E in an.energies):
            raise ConfigError(f"energies must be positive, got {an.energies}")
        if not an.sides or any(s not in ("left", "right") for s in an.sides):
            raise ConfigError(
                f"sides must be a subset of left, right — got {an.sides}")
        if not an.tail_lo < an.tail_hi:
            raise ConfigError(
                f"tail window [{an.tail_lo}, {an.tail_hi}] is empty")
        if spec.period is not None:
            # mirrored by the propagator; failing here names the config keys
            if self.dt() > spec.period / 200.0:
                raise ConfigError(
                    "dt exceeds period/200 (raise steps_per_period)")
        return self

    # -- rendering ----------------------------------------------------------

    def render(self) -> str:
        """Fully-resolved INI text (defaults expanded); parses back equal."""
        out = io.StringIO()
        for section, cls in _SECTION_TYPES.items():
            obj = getattr(self, section)
            out.write(f"[{section}]\n")
            for f in dataclass_fields(cls):
                val = getattr(obj, f.name)
                if val is None:
                    text = ""
                elif isinstance(val, tuple):
                    text = ", ".join(str(v) for v in val)
                else:
                    text = str(val)
                out.write(f"{f.name} = {text}\n")
            out.write("\n")
        return out.getvalue()


# ---------------------------------------------------------------------------
# parsing

def _read_ini(text: str, source: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    raw: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"{source}: unknown section [{section}] "
                f"(expected {', '.join(_SCHEMA)})")
        known = _SCHEMA[section]
        for key, value in parser.items(section):
            if key not in known:
                raise ConfigError(
                    f"{source}: unknown key {key!r} in [{section}] "
                    f"(expected {', '.join(known)})")
            raw.setdefault(section, {})[key] = value
    return raw


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse one INI text against the full default set and validate."""
    return _merge([(text, source)]).validate()


def _merge(layers: list[tuple[str, str]]) -> ExperimentConfig:
    values: dict[str, dict[str, object]] = {s: {} for s in _SCHEMA}
    for text, source in layers:
        for section, items in _read_ini(text, source).items():
            for key, raw in items.items():
                values[section][key] = _coerce(section, key, raw, source)
    sections = {}
    for section, cls in _SECTION_TYPES.items():
        try:
            sections[section] = cls(**values[section])
        except ParameterError as exc:
            raise ConfigError(f"[{section}] rejected: {exc}") from exc
    return ExperimentConfig(**sections)


def load_config(path: str | None = None,
                preset: str | None = None) -> ExperimentConfig:
    """Resolve defaults < preset < file and validate the result."""
    layers: list[tuple[str, str]] = []
    if preset is not None:
        layers.append((preset_text(preset), f"preset {preset}"))
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                layers.append((fh.read(), str(path)))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return _merge(layers).validate()


# ---------------------------------------------------------------------------
# presets — the seven standard experiments.  Each is plain INI, so a preset
# can be dumped, edited, and fed back as --config.

_PRESETS: dict[str, str] = {
    # Snapshots of the family-1 well over one drive period.
    "fig2a": """
[potential]
family = 1
alpha_re = 0.9
beta_re = 0.0
mu = 1.0
""",
    # Snapshots of the family-2 well (linear-ramp variant) over one period.
    "fig2b": """
[potential]
family = 2
alpha_re = 2.0
beta_re = 2.0
mu = 1.0
""",
    # Packet through the oscillating family-1 well: no reflection, no
    # sidebands — the summary enforces both fractions below 1e-4.  A bare
    # Gaussian differs from the well's exact in-state at the ~1e-4 level;
    # the mismatch radiates fast, weak ripples that cross the default box
    # edge before t = 240, so this run gets the wide grid.
    "fig3a": """
[grid]
x_min = -1024.0
x_max = 1024.0
n_points = 16384

[potential]
family = 1
alpha_re = 0.9
beta_re = 0.0
mu = 1.0

[packet]
width = 15.0
center = -120.0
momentum = 1.0

[propagation]
t_final = 240.0

[analysis]
max_scattered = 1e-4
""",
    # Same well with its gain/loss part deleted: strong reflection and
    # sideband conversion appear.  Fast sidebands (several momentum kicks)
    # outrun the default box by t = 240, hence the wider grid.
    "fig3b": """
[grid]
x_min = -1024.0
x_max = 1024.0
n_points = 16384

[potential]
family = hermitian
inner_family = 1
alpha_re = 0.9
beta_re = 0.0
mu = 1.0

[packet]
width = 15.0
center = -120.0
momentum = 1.0

[propagation]
t_final = 240.0

[analysis]
min_scattered = 1e-2
""",
    # Packet through the oscillating family-2 well: fully invisible.
    "fig4a": """
[potential]
family = 2
alpha_re = 2.0
beta_re = 2.0
mu = 1.0

[packet]
width = 15.0
center = -120.0
momentum = 1.0

[propagation]
t_final = 240.0

[analysis]
max_scattered = 1e-4
""",
    # Real part of the family-2 well: scattering returns.
    "fig4b": """
[grid]
x_min = -1024.0
x_max = 1024.0
n_points = 16384

[potential]
family = hermitian
inner_family = 2
alpha_re = 2.0
beta_re = 2.0
mu = 1.0

[packet]
width = 15.0
center = -120.0
momentum = 1.0

[propagation]
t_final = 240.0

[analysis]
min_scattered = 1e-2
""",
    # Delay comparison at t = 300: free flight vs family 1 (advanced by
    # p·|group delay| = 1 at p = μ = 1) vs family 2 (asymptotically
    # invisible; at t = 300 the packet still rides the well's algebraic
    # 1/x tail, leaving a ~3e-3 density ripple and a ~0.03 centroid
    # shift).  The tail window [200, 245] zooms where the t = 300
    # profiles are steepest so the 1-unit advancement is visible — a
    # display choice, not a physical parameter.  The wide grid keeps the
    # dispersed packet clear of the absorbing-edge check until t = 300.
    "fig5": """
[grid]
x_min = -1024.0
x_max = 1024.0
n_points = 16384

[potential]
family = 1
alpha_re = 0.9
beta_re = 0.0
mu = 1.0

[packet]
width = 15.0
center = -120.0
momentum = 1.0

[propagation]
t_final = 300.0

[analysis]
delay_alpha2 = 2.0
delay_beta2 = 2.0
tail_lo = 200.0
tail_hi = 245.0
""",
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset_text(name: str) -> str:
    """INI text of a named preset; unknown names list the valid ones."""
    try:
        return _PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r} (have {', '.join(PRESET_NAMES)})"
        ) from None
