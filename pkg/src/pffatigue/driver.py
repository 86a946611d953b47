"""Cyclic load program execution: increment loop, cycle bookkeeping, failure
and crack-extension metrics, and result export (CSV history, VTK snapshots,
summary, figures)."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import elements as el
from .assembly import System
from .config import ConfigError, SimulationConfig, config_echo
from .mesh import DofMap, FieldState, load_mesh, structured_rect_mesh
from .plasticity import ReturnMapError
from .solver import SolverAbort, StepController, solve_increment
from .vtkio import write_vtk

HISTORY_COLUMNS = ("time", "cycle", "u_applied", "force", "max_phi", "delta_a",
                   "theta_bar_max", "h_max", "psi_p_max", "ep_max",
                   "iterations", "converged")


@dataclass
class RunMetrics:
    """Per-increment channels plus run-level outcome."""
    rows: list = field(default_factory=list)       # dicts keyed by HISTORY_COLUMNS
    failed: bool = False
    aborted: bool = False
    n_f: int | None = None
    cycles_to_failure: float | None = None
    peak_force: float = 0.0

    def channel(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    @property
    def increments(self) -> int:
        return len(self.rows)


class PathProbe:
    """Samples the phase field along a user-declared crack polyline.

    Sample points (polyline vertices plus refinements at roughly a quarter
    of the smallest element size) are located in the mesh once; evaluation is
    then a gather plus dot products. Raises ConfigError if any point lies
    outside the mesh.
    """

    def __init__(self, mesh, polyline, spacing=None):
        self.mesh = mesh
        pts = np.asarray(polyline, dtype=float)
        if spacing is None:
            h = min(mesh.char_length(e) for e in range(mesh.n_elements))
            spacing = h / 4.0
        samples = [pts[0]]
        arcs = [0.0]
        s0 = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            seg = np.linalg.norm(b - a)
            n = max(1, int(np.ceil(seg / spacing)))
            for i in range(1, n + 1):
                samples.append(a + (b - a) * (i / n))
                arcs.append(s0 + seg * (i / n))
            s0 += seg
        self.points = np.asarray(samples)
        self.arc = np.asarray(arcs)
        self._locate_all()

    def _locate_all(self):
        mesh = self.mesh
        boxes = []
        for e in range(mesh.n_elements):
            xy = mesh.element_coords(e)
            boxes.append((xy[:, 0].min(), xy[:, 0].max(), xy[:, 1].min(), xy[:, 1].max()))
        pad = 1e-9
        self.conn = []
        self.shape = []
        for p in self.points:
            found = False
            for e, (x0, x1, y0, y1) in enumerate(boxes):
                if not (x0 - pad <= p[0] <= x1 + pad and y0 - pad <= p[1] <= y1 + pad):
                    continue
                xi = el.inverse_map(mesh.kinds[e], mesh.element_coords(e), p)
                if xi is None:
                    continue
                n, _ = el.shape_functions(mesh.kinds[e], xi[0], xi[1])
                self.conn.append(mesh.conn[e])
                self.shape.append(n)
                found = True
                break
            if not found:
                raise ConfigError(f"crack path point ({p[0]}, {p[1]}) lies outside the mesh")

    def values(self, phi: np.ndarray) -> np.ndarray:
        return np.array([n @ phi[c] for n, c in zip(self.shape, self.conn)])

    def extension(self, phi: np.ndarray, threshold: float) -> float:
        """Arc length to the farthest sample with interpolated phi >= threshold.

        The crossing between the last sample at/above the threshold and the
        next one below it is located by linear interpolation.
        """
        vals = self.values(phi)
        above = np.where(vals >= threshold)[0]
        if len(above) == 0:
            return 0.0
        i = int(above[-1])
        if i == len(vals) - 1:
            return float(self.arc[-1])
        v0, v1 = vals[i], vals[i + 1]
        frac = 0.0 if v0 == v1 else (v0 - threshold) / (v0 - v1)
        return float(self.arc[i] + frac * (self.arc[i + 1] - self.arc[i]))


def crack_extension(mesh, phi, polyline, threshold=0.9, previous=0.0) -> float:
    """One-shot crack extension measurement (non-decreasing with previous)."""
    probe = PathProbe(mesh, polyline)
    return max(previous, probe.extension(phi, threshold))


def build_mesh(cfg: SimulationConfig):
    mc = cfg.mesh
    if mc.kind == "structured":
        return structured_rect_mesh(mc.width, mc.height, mc.nx, mc.ny)
    try:
        return load_mesh(mc.file)
    except OSError as exc:
        raise ConfigError(f"cannot read mesh file: {exc}") from None


def _check_mesh_density(mesh, cfg: SimulationConfig):
    """Warn (never fail) when elements are coarser than ell / 4."""
    region = range(mesh.n_elements)
    where = "mesh"
    if cfg.mesh.refine_set:
        if cfg.mesh.refine_set not in mesh.element_sets:
            raise ConfigError(f"unknown element set {cfg.mesh.refine_set!r} in refine_set")
        region = mesh.element_sets[cfg.mesh.refine_set]
        where = f"element set {cfg.mesh.refine_set!r}"
    h = max(mesh.char_length(int(e)) for e in region)
    if h > cfg.fracture.ell / 4.0:
        warnings.warn(
            f"element size {h:.4g} mm in {where} exceeds ell/4 = "
            f"{cfg.fracture.ell / 4.0:.4g} mm; the crack band will be under-resolved",
            stacklevel=2)


def _force_dofs(mesh, spec: str | None):
    if spec is None:
        return np.array([], dtype=int)
    name, _, dof = spec.partition(":")
    if name not in mesh.node_sets or dof not in ("x", "y"):
        raise ConfigError(f"force_set {spec!r}: unknown node set or dof")
    d = 0 if dof == "x" else 1
    return 2 * mesh.node_sets[name] + d


def run(cfg: SimulationConfig, output_dir=None, on_commit=None, quiet=True):
    """Execute the load program increment by increment.

    Stops at failure (monitored max phi >= threshold), when the programmed
    cycles are exhausted, or on solver abort (cut-back limit). Streams
    history.csv row by row; snapshots, summary and figures are written from
    the same data. Returns (RunMetrics, artifacts dict).
    """
    mesh = build_mesh(cfg)
    _check_mesh_density(mesh, cfg)
    dofmap = DofMap(mesh, cfg.bcs)
    system = System(mesh, dofmap, cfg.material, cfg.fracture, cfg.fatigue)
    fields = FieldState.zeros(mesh.n_nodes)
    program = cfg.load

    if output_dir is None:
        output_dir = cfg.output.directory
    if output_dir is None:
        stem = Path(cfg.source_path).stem if cfg.source_path else "run"
        output_dir = f"{stem}_out"
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    if cfg.output.failure_set and cfg.output.failure_set not in mesh.node_sets:
        raise ConfigError(f"unknown node set {cfg.output.failure_set!r} in failure_set")
    monitor = (mesh.node_sets[cfg.output.failure_set]
               if cfg.output.failure_set else np.arange(mesh.n_nodes))
    probe = PathProbe(mesh, cfg.output.crack_path) if cfg.output.crack_path else None
    force_spec = cfg.output.force_set
    if force_spec is None:
        driven = [bc for bc in cfg.bcs if not bc.fixed]
        if driven:
            force_spec = f"{driven[0].node_set}:{driven[0].dof}"
    force_dofs = _force_dofs(mesh, force_spec)

    metrics = RunMetrics()
    controller = StepController(program.dt_nominal)
    pending_snapshots = sorted(set(cfg.output.snapshot_cycles))
    delta_a = 0.0
    t = 0.0

    history_path = outdir / "history.csv"
    log_path = outdir / "solver.log"
    hist = open(history_path, "w", encoding="utf-8")
    hist.write(",".join(HISTORY_COLUMNS) + "\n")
    log = open(log_path, "w", encoding="utf-8")
    log.write("# increment  iteration  |R_u|  |R_phi|  alpha  curvature_skips\n")

    def write_snapshot(cycle):
        psi_p_cell = _cell_average(system, system.states.psi_p)
        h_cell = _cell_average(system, system.states.h)
        tb_cell = _cell_average(system, system.states.theta_bar)
        write_vtk(outdir / f"fields_{cycle}.vtk", mesh,
                  point_data={"u": fields.u.reshape(-1, 2), "phi": fields.phi},
                  cell_data={"psi_p": psi_p_cell, "H": h_cell, "theta_bar": tb_cell})

    increment = 0
    aborted = False
    abort_msg = ""
    # previous converged increment, reused to extrapolate the next initial
    # guess along the same loading branch (halves the iteration count)
    last_du = last_dphi = None
    last_dt = 0.0
    last_sign = 0
    try:
        while t < program.t_end - 1e-12:
            t_next = min(t + controller.dt, program.next_vertex(t), program.t_end)
            saved_u = fields.u.copy()
            saved_phi = fields.phi.copy()
            sign = int(np.sign(program.signal(t_next) - program.signal(t)))
            dofmap.apply_signal(fields, program.signal(t_next))
            fields.t = t_next
            if last_du is not None and sign == last_sign and sign != 0 and last_dt > 0:
                scale = (t_next - t) / last_dt
                fields.u[dofmap.free_u] += scale * last_du
                fields.phi += scale * last_dphi
            failure_exc = None
            try:
                result, cache = solve_increment(system, fields, cfg.solver)
            except ReturnMapError as exc:
                failure_exc = exc
                result, cache = None, None

            increment += 1
            if result is not None:
                for it, (ru, rp) in enumerate(result.residual_history):
                    alpha = result.alphas[it - 1] if 0 < it <= len(result.alphas) else ""
                    log.write(f"{increment} {it} {ru:.6e} {rp:.6e} {alpha} "
                              f"{result.curvature_skips}\n")
            else:
                log.write(f"{increment} - - - - local-failure: {failure_exc}\n")

            if result is None or not result.converged:
                fields.u[:] = saved_u
                fields.phi[:] = saved_phi
                fields.t = t
                controller.on_failure()
                continue

            controller.on_success()
            system.commit(fields, cache)
            last_du = fields.u[dofmap.free_u] - saved_u[dofmap.free_u]
            last_dphi = fields.phi - saved_phi
            last_dt = t_next - t
            last_sign = sign
            t = t_next

            force = float(cache.f_int[force_dofs].sum()) if len(force_dofs) else 0.0
            if probe is not None:
                delta_a = max(delta_a, probe.extension(fields.phi, cfg.output.crack_threshold))
            row = {
                "time": t,
                "cycle": int(np.ceil(t - 1e-12)),
                "u_applied": program.signal(t),
                "force": force,
                "max_phi": float(fields.phi.max()),
                "delta_a": delta_a,
                "theta_bar_max": float(system.states.theta_bar.max()),
                "h_max": float(system.states.h.max()),
                "psi_p_max": float(system.states.psi_p.max()),
                "ep_max": float(system.states.ep.max()),
                "iterations": result.iterations,
                "converged": 1,
            }
            metrics.rows.append(row)
            metrics.peak_force = max(metrics.peak_force, abs(force))
            hist.write(",".join(repr(row[c]) for c in HISTORY_COLUMNS) + "\n")
            hist.flush()
            if on_commit is not None:
                on_commit(t, fields, system, row)

            phi_monitor = float(fields.phi[monitor].max())
            if not metrics.failed and phi_monitor >= cfg.output.failure_threshold:
                metrics.failed = True
                metrics.cycles_to_failure = t
                metrics.n_f = int(np.ceil(t - 1e-12))
            while pending_snapshots and t >= pending_snapshots[0] - 1e-12:
                write_snapshot(pending_snapshots.pop(0))
            if not quiet and abs(t - round(t)) < 1e-12:
                print(f"  cycle {int(round(t))}/{program.cycles}: "
                      f"max_phi={row['max_phi']:.4f} force={force:.4f}")
            if metrics.failed:
                break
    except SolverAbort as exc:
        aborted = True
        abort_msg = str(exc)
        write_snapshot("abort")
    finally:
        hist.close()
        log.close()

    metrics.aborted = aborted
    summary = {
        "failed": metrics.failed,
        "aborted": aborted,
        "abort_reason": abort_msg,
        "n_f": metrics.n_f,
        "cycles_to_failure": metrics.cycles_to_failure,
        "completed_cycles": t,
        "increments": metrics.increments,
        "peak_force": metrics.peak_force,
        "final_delta_a": delta_a,
        "config_echo": config_echo(cfg),
    }
    with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if cfg.output.plots and metrics.increments:
        from . import report
        report.render_figures(metrics, mesh, fields, outdir)

    artifacts = {"mesh": mesh, "fields": fields, "system": system,
                 "output_dir": outdir, "summary": summary}
    return metrics, artifacts


def _cell_average(system, gp_array):
    out = np.empty(system.mesh.n_elements)
    for e in range(system.mesh.n_elements):
        out[e] = gp_array[system.gp_offset[e]:system.gp_offset[e + 1]].mean()
    return out
