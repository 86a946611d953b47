"""Simulation configuration: file schema, validation and canonical echo.

The config file is INI-style with sections [mesh] [material] [fracture]
[fatigue] [load] [solver] [output]. Unknown sections or keys are rejected;
all physical quantities follow the N-mm-MPa convention (toughness in kJ/m^2
equals N/mm identically).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fatigue import FatigueLaw
from .fracture import FractureModel
from .mesh import DirichletBC
from .plasticity import PlasticityParams
from .solver import SolverConfig


class ConfigError(Exception):
    """Schema violation; the message names the offending section/key."""


@dataclass(frozen=True)
class LoadProgram:
    """Triangular cyclic displacement program in cycle time units.

    One cycle spans one time unit with vertices at t = 0, 1/4, 3/4, 1:
    mean -> peak -> valley -> mean. The peak/valley follow from amplitude and
    either the load ratio R = min/max or an explicit mean.
    """
    amplitude: float
    ratio: float = -1.0
    mean: float = 0.0
    increments_per_cycle: int = 16
    cycles: int = 1

    def __post_init__(self):
        # zero amplitude is allowed as a degenerate (null) program
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        ipc = self.increments_per_cycle
        if ipc < 4 or ipc % 4 != 0:
            raise ValueError("increments_per_cycle must be >= 4 and divisible by 4")
        if self.cycles < 1:
            raise ValueError("cycles must be at least 1")

    @staticmethod
    def create(amplitude, ratio=None, mean=None, increments_per_cycle=16, cycles=1):
        if ratio is None and mean is None:
            ratio = -1.0
        if mean is None:
            if ratio >= 1.0:
                raise ValueError("load ratio must be < 1")
            mean = amplitude * (1.0 + ratio) / (1.0 - ratio)
        else:
            peak = mean + amplitude
            implied = (mean - amplitude) / peak if peak != 0 else float("-inf")
            if ratio is None:
                ratio = implied
            elif abs(implied - ratio) > 1e-12 * max(1.0, abs(ratio)):
                raise ValueError("load ratio and mean are inconsistent")
        return LoadProgram(amplitude, ratio, mean, increments_per_cycle, cycles)

    def signal(self, t: float) -> float:
        """Applied displacement multiplier at time t (cycles)."""
        peak = self.mean + self.amplitude
        valley = self.mean - self.amplitude
        s = t % 1.0
        if t > 0 and s == 0.0:
            s = 1.0
        if s <= 0.25:
            return self.mean + (peak - self.mean) * (s / 0.25)
        if s <= 0.75:
            return peak + (valley - peak) * ((s - 0.25) / 0.5)
        return valley + (self.mean - valley) * ((s - 0.75) / 0.25)

    @property
    def dt_nominal(self) -> float:
        return 1.0 / self.increments_per_cycle

    def next_vertex(self, t: float) -> float:
        """Next waveform vertex time strictly after t (quarter-cycle grid)."""
        q = np.floor(t * 4.0 + 1e-9) + 1.0
        return float(q / 4.0)

    @property
    def t_end(self) -> float:
        return float(self.cycles)


@dataclass
class MeshConfig:
    kind: str                    # "structured" | "file"
    file: str | None = None
    width: float | None = None
    height: float | None = None
    nx: int | None = None
    ny: int | None = None
    refine_set: str | None = None


@dataclass
class OutputConfig:
    directory: str | None = None
    snapshot_cycles: tuple = ()
    plots: bool = True
    failure_threshold: float = 0.9
    failure_set: str | None = None       # node set; None monitors all nodes
    crack_path: tuple = ()               # polyline ((x, y), ...), first = origin
    crack_threshold: float = 0.9
    force_set: str | None = None         # "<nodeset>:<dof>"; default first drive


@dataclass
class SimulationConfig:
    mesh: MeshConfig
    material: PlasticityParams
    fracture: FractureModel
    fatigue: FatigueLaw
    load: LoadProgram
    bcs: tuple
    solver: SolverConfig
    output: OutputConfig
    source_path: str | None = None


# -- parsing helpers --------------------------------------------------------

_SCHEMA = {
    "mesh": {"kind", "file", "width", "height", "nx", "ny", "refine_set"},
    "material": {"E", "nu", "sigma0", "Q_inf", "b", "C", "gamma"},
    "fracture": {"model", "Gc", "ell", "sigma_c", "kappa_small"},
    "fatigue": {"law", "kappa", "theta_T"},
    "load": {"amplitude", "ratio", "mean", "increments_per_cycle", "cycles",
             "fix", "drive"},
    "solver": {"scheme", "tol_residual", "tol_correction", "max_iterations",
               "reform_every", "line_search"},
    "output": {"dir", "snapshot_cycles", "plots", "failure_threshold",
               "failure_set", "crack_path", "crack_threshold", "force_set"},
}
_REQUIRED_SECTIONS = ("mesh", "material", "fracture", "load")


def _fail(section, key, msg):
    raise ConfigError(f"[{section}] {key}: {msg}")


class _Section:
    def __init__(self, name, mapping):
        self.name = name
        self.map = dict(mapping)
        unknown = set(self.map) - _SCHEMA[name]
        if unknown:
            _fail(name, sorted(unknown)[0], "unknown key")

    def has(self, key):
        return key in self.map

    def raw(self, key, default=None):
        return self.map.get(key, default)

    def floatv(self, key, default=None, positive=False, required=False):
        if key not in self.map:
            if required:
                _fail(self.name, key, "required key missing")
            return default
        try:
            v = float(self.map[key])
        except ValueError:
            _fail(self.name, key, f"not a number: {self.map[key]!r}")
        if positive and v <= 0:
            _fail(self.name, key, f"must be positive, got {v!r}")
        return v

    def intv(self, key, default=None, required=False):
        if key not in self.map:
            if required:
                _fail(self.name, key, "required key missing")
            return default
        try:
            return int(self.map[key])
        except ValueError:
            _fail(self.name, key, f"not an integer: {self.map[key]!r}")

    def boolv(self, key, default):
        if key not in self.map:
            return default
        v = self.map[key].strip().lower()
        if v in ("on", "true", "yes", "1"):
            return True
        if v in ("off", "false", "no", "0"):
            return False
        _fail(self.name, key, f"expected on/off, got {v!r}")

    def floats(self, key):
        raw = self.map.get(key, "")
        return tuple(float(tok) for tok in raw.replace(",", " ").split())


def _parse_bcs(load: _Section):
    bcs = []
    for entry in (load.raw("fix", "") or "").split(","):
        entry = entry.strip()
        if not entry:
            continue
        parts = entry.split(":")
        if len(parts) != 2:
            _fail("load", "fix", f"expected '<set>:<dof>', got {entry!r}")
        bcs.append(DirichletBC(parts[0].strip(), parts[1].strip(), 0.0, fixed=True))
    drives = []
    for entry in (load.raw("drive", "") or "").split(","):
        entry = entry.strip()
        if not entry:
            continue
        parts = entry.split(":")
        if len(parts) not in (2, 3):
            _fail("load", "drive", f"expected '<set>:<dof>[:<scale>]', got {entry!r}")
        scale = 1.0
        if len(parts) == 3:
            try:
                scale = float(parts[2])
            except ValueError:
                _fail("load", "drive", f"bad scale in {entry!r}")
        drives.append(DirichletBC(parts[0].strip(), parts[1].strip(), scale))
    return tuple(bcs + drives), drives


def _parse_crack_path(raw: str):
    pts = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        toks = chunk.replace(",", " ").split()
        if len(toks) != 2:
            _fail("output", "crack_path", f"expected 'x y' pairs, got {chunk!r}")
        pts.append((float(toks[0]), float(toks[1])))
    if len(pts) < 2:
        _fail("output", "crack_path", "need at least two points")
    return tuple(pts)


def parse_config(path) -> SimulationConfig:
    """Read, validate and resolve a simulation configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str          # keys are case-sensitive (E vs e, theta_T)
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
    for sec in _REQUIRED_SECTIONS:
        if sec not in cp:
            raise ConfigError(f"missing required section [{sec}]")

    secs = {name: _Section(name, cp[name] if name in cp else {}) for name in _SCHEMA}

    m = secs["mesh"]
    kind = (m.raw("kind") or ("file" if m.has("file") else "structured")).lower()
    if kind == "file":
        if not m.has("file"):
            _fail("mesh", "file", "required for kind = file")
        mesh_path = Path(m.raw("file"))
        if not mesh_path.is_absolute():
            mesh_path = (path.parent / mesh_path).resolve()
        mesh_cfg = MeshConfig("file", file=str(mesh_path), refine_set=m.raw("refine_set"))
    elif kind == "structured":
        mesh_cfg = MeshConfig(
            "structured",
            width=m.floatv("width", required=True, positive=True),
            height=m.floatv("height", required=True, positive=True),
            nx=m.intv("nx", required=True),
            ny=m.intv("ny", required=True),
            refine_set=m.raw("refine_set"),
        )
        if mesh_cfg.nx < 1 or mesh_cfg.ny < 1:
            _fail("mesh", "nx", "grid must have at least one element per direction")
    else:
        _fail("mesh", "kind", f"expected structured|file, got {kind!r}")

    mat = secs["material"]
    cs = mat.floats("C")
    gs = mat.floats("gamma")
    if len(cs) != len(gs):
        _fail("material", "gamma", "C and gamma lists must have equal length")
    try:
        material = PlasticityParams(
            E=mat.floatv("E", required=True, positive=True),
            nu=mat.floatv("nu", required=True),
            sigma0=mat.floatv("sigma0", required=True, positive=True),
            Q_inf=mat.floatv("Q_inf", 0.0),
            b=mat.floatv("b", 0.0),
            backstresses=tuple(zip(cs, gs)),
        )
    except ValueError as exc:
        _fail("material", "E", str(exc))

    fz = secs["fracture"]
    if not fz.has("model"):
        _fail("fracture", "model", "required key missing")
    try:
        fracture = FractureModel.create(
            kind=fz.raw("model"),
            gc=fz.floatv("Gc", required=True, positive=True),
            ell=fz.floatv("ell", required=True, positive=True),
            youngs=material.E,
            sigma_c=fz.floatv("sigma_c"),
            kappa_small=fz.floatv("kappa_small", 1e-7, positive=True),
        )
    except ValueError as exc:
        _fail("fracture", "model", str(exc))

    ft = secs["fatigue"]
    try:
        fatigue_law = FatigueLaw.create(
            kind=ft.raw("law") or "asymptotic",
            gc=fracture.gc,
            ell=fracture.ell,
            kappa=ft.floatv("kappa"),
            theta_t=ft.floatv("theta_T"),
        )
    except ValueError as exc:
        _fail("fatigue", "law", str(exc))

    ld = secs["load"]
    bcs, drives = _parse_bcs(ld)
    if not any(not bc.fixed for bc in bcs):
        _fail("load", "drive", "at least one driven boundary set is required")
    amp = ld.floatv("amplitude", required=True)
    if amp < 0:
        _fail("load", "amplitude", "must be non-negative")
    try:
        program = LoadProgram.create(
            amplitude=amp,
            ratio=ld.floatv("ratio"),
            mean=ld.floatv("mean"),
            increments_per_cycle=ld.intv("increments_per_cycle", 16),
            cycles=ld.intv("cycles", required=True),
        )
    except ValueError as exc:
        _fail("load", "amplitude", str(exc))

    sv = secs["solver"]
    try:
        solver_cfg = SolverConfig(
            scheme=(sv.raw("scheme") or "bfgs").lower(),
            tol_residual=sv.floatv("tol_residual", 1e-6, positive=True),
            tol_correction=sv.floatv("tol_correction", 1e-8, positive=True),
            max_iterations=sv.intv("max_iterations", 100),
            reform_every=sv.intv("reform_every", 0),
            line_search=sv.boolv("line_search", True),
        )
    except ValueError as exc:
        _fail("solver", "scheme", str(exc))

    out = secs["output"]
    snapshot = tuple(int(tok) for tok in (out.raw("snapshot_cycles", "") or "").replace(
        ",", " ").split())
    force_set = out.raw("force_set")
    if force_set is None and drives:
        force_set = f"{drives[0].node_set}:{drives[0].dof}"
    output = OutputConfig(
        directory=out.raw("dir"),
        snapshot_cycles=snapshot,
        plots=out.boolv("plots", True),
        failure_threshold=out.floatv("failure_threshold", 0.9, positive=True),
        failure_set=out.raw("failure_set"),
        crack_path=_parse_crack_path(out.raw("crack_path")) if out.has("crack_path") else (),
        crack_threshold=out.floatv("crack_threshold", 0.9, positive=True),
        force_set=force_set,
    )

    return SimulationConfig(mesh_cfg, material, fracture, fatigue_law, program,
                            bcs, solver_cfg, output, str(path))


def config_echo(cfg: SimulationConfig) -> str:
    """Canonical text dump of a resolved configuration.

    parse_config(write(config_echo(cfg))) reproduces the same echo
    byte-for-byte, which pins the full parameter set in test fixtures and in
    the run summary.
    """
    lines = []

    def sec(name, items):
        lines.append(f"[{name}]")
        for k, v in items:
            if v is None or v == "" or v == ():
                continue
            lines.append(f"{k} = {v}")
        lines.append("")

    mc = cfg.mesh
    if mc.kind == "file":
        sec("mesh", [("kind", "file"), ("file", mc.file), ("refine_set", mc.refine_set)])
    else:
        sec("mesh", [("kind", "structured"), ("width", repr(mc.width)),
                     ("height", repr(mc.height)), ("nx", mc.nx), ("ny", mc.ny),
                     ("refine_set", mc.refine_set)])
    mt = cfg.material
    sec("material", [
        ("E", repr(mt.E)), ("nu", repr(mt.nu)), ("sigma0", repr(mt.sigma0)),
        ("Q_inf", repr(mt.Q_inf)), ("b", repr(mt.b)),
        ("C", " ".join(repr(c) for c, _ in mt.backstresses) or None),
        ("gamma", " ".join(repr(g) for _, g in mt.backstresses) or None),
    ])
    fz = cfg.fracture
    sec("fracture", [
        ("model", fz.kind), ("Gc", repr(fz.gc)), ("ell", repr(fz.ell)),
        ("sigma_c", repr(fz.sigma_c) if fz.sigma_c is not None else None),
        ("kappa_small", repr(fz.kappa_small)),
    ])
    ft = cfg.fatigue
    sec("fatigue", [
        ("law", ft.kind),
        ("kappa", repr(ft.kappa) if ft.kappa is not None else None),
        ("theta_T", repr(ft.theta_t) if ft.kind != "none" else None),
    ])
    fixes = ", ".join(f"{bc.node_set}:{bc.dof}" for bc in cfg.bcs if bc.fixed)
    drives = ", ".join(f"{bc.node_set}:{bc.dof}:{bc.value_scale!r}"
                       for bc in cfg.bcs if not bc.fixed)
    ldp = cfg.load
    sec("load", [
        ("amplitude", repr(ldp.amplitude)), ("ratio", repr(ldp.ratio)),
        ("mean", repr(ldp.mean)),
        ("increments_per_cycle", ldp.increments_per_cycle),
        ("cycles", ldp.cycles), ("fix", fixes or None), ("drive", drives or None),
    ])
    sv = cfg.solver
    sec("solver", [
        ("scheme", sv.scheme), ("tol_residual", repr(sv.tol_residual)),
        ("tol_correction", repr(sv.tol_correction)),
        ("max_iterations", sv.max_iterations), ("reform_every", sv.reform_every),
        ("line_search", "on" if sv.line_search else "off"),
    ])
    oc = cfg.output
    sec("output", [
        ("dir", oc.directory),
        ("snapshot_cycles", " ".join(str(c) for c in oc.snapshot_cycles) or None),
        ("plots", "on" if oc.plots else "off"),
        ("failure_threshold", repr(oc.failure_threshold)),
        ("failure_set", oc.failure_set),
        ("crack_path", " ; ".join(f"{x!r} {y!r}" for x, y in oc.crack_path) or None),
        ("crack_threshold", repr(oc.crack_threshold)),
        ("force_set", oc.force_set),
    ])
    return "\n".join(lines)
