"""Nonlinear solution of the coupled two-field system per load increment.

Three schemes: quasi-Newton BFGS monolithic (default), full Newton monolithic
(reference) and a single-pass staggered sweep (comparison baseline). The BFGS
operator is limited-memory: correction/residual-change pairs are applied
through a two-loop recursion around a factorised block-diagonal seed
stiffness, which reproduces the symmetric rank-two inverse update while never
forming dense matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

SCHEMES = ("bfgs", "newton", "staggered")


class SolverAbort(Exception):
    """Raised when the step controller runs out of cut-backs."""


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = "bfgs"
    tol_residual: float = 1e-6       # relative, per block
    tol_correction: float = 1e-8     # stagnation diagnostic, relative
    max_iterations: int = 100
    reform_every: int = 0            # 0: seed assembled at increment start only
    line_search: bool = True
    ls_beta: float = 1e-4            # sufficient-decrease parameter
    ls_alpha_min: float = 1.0 / 64.0
    max_curvature_skips: int = 10
    residual_floor: float = 1e-12    # absolute floor for zero-load increments

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.tol_residual <= 0 or self.tol_correction <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class IncrementResult:
    converged: bool
    iterations: int
    residual_history: list = field(default_factory=list)   # (|R_u|, |R_phi|)
    alphas: list = field(default_factory=list)
    curvature_skips: int = 0
    reforms: int = 0
    stagnated: bool = False


class LbfgsOperator:
    """Inverse-stiffness action K~^-1 built from secant pairs over a seed.

    ``seed_solve`` maps a residual-sized vector through the factorised seed
    stiffness. ``update`` stores a (dz, dr) pair when the curvature dz.dr is
    positive (the update then keeps symmetry and positive definiteness and
    satisfies K~ dz = dr); non-positive curvature skips the pair and counts
    the event.
    """

    def __init__(self, seed_solve):
        self.seed_solve = seed_solve
        self.pairs = []              # (dz, dr, 1/(dz.dr))
        self.skips = 0

    def update(self, dz: np.ndarray, dr: np.ndarray) -> bool:
        curv = float(dz @ dr)
        if not np.isfinite(curv) or curv <= 1e-14 * np.linalg.norm(dz) * np.linalg.norm(dr):
            self.skips += 1
            return False
        self.pairs.append((dz.copy(), dr.copy(), 1.0 / curv))
        return True

    def apply(self, v: np.ndarray) -> np.ndarray:
        q = v.copy()
        coeffs = []
        for dz, dr, rho in reversed(self.pairs):
            a = rho * (dz @ q)
            q -= a * dr
            coeffs.append(a)
        r = self.seed_solve(q)
        for (dz, dr, rho), a in zip(self.pairs, reversed(coeffs)):
            b = rho * (dr @ r)
            r += (a - b) * dz
        return r

    def reset(self, seed_solve):
        self.seed_solve = seed_solve
        self.pairs.clear()
        self.skips = 0


def line_search(eval_norm, norm0: float, beta: float = 1e-4,
                alpha_min: float = 1.0 / 64.0):
    """Backtracking step length for a residual-norm functional.

    Halves alpha from 1 until the norm satisfies the sufficient decrease
    ``norm <= (1 - beta * alpha) * norm0``; if the floor alpha_min is reached
    the step is accepted regardless (the caller records the event). Returns
    (alpha, payload) where payload is whatever eval_norm produced last.
    """
    alpha = 1.0
    norm, payload = eval_norm(alpha)
    while norm > (1.0 - beta * alpha) * norm0 and alpha > alpha_min:
        alpha = max(0.5 * alpha, alpha_min)
        norm, payload = eval_norm(alpha)
    return alpha, payload


def _factorise(matrix):
    if matrix.shape[0] == 0:
        return lambda v: v
    lu = spla.splu(matrix.tocsc())
    return lu.solve


def _block_seed(gs):
    solve_u = _factorise(gs.k_uu)
    solve_p = _factorise(gs.k_phiphi)
    nf = gs.r_u.shape[0]

    def solve(v):
        out = np.empty_like(v)
        out[:nf] = solve_u(v[:nf])
        out[nf:] = solve_p(v[nf:])
        return out

    return solve


class _Convergence:
    """Per-block relative residual test with an absolute floor.

    The reference is the block's first-iteration norm, but never below the
    characteristic load level of the problem (reaction-force norm for the
    momentum block, the fully-cracked resistance for the phase field).
    Without that, an increment whose initial guess is already near-perfect
    measures its reference from roundoff noise and can never converge.
    """

    def __init__(self, config: SolverConfig, system, ru0: float, rp0: float):
        self.tol = config.tol_residual
        self.floor = config.residual_floor
        self.system = system
        self.ref_u = max(ru0, self.floor)
        self.ref_p = max(rp0, self.floor)
        model = system.model
        self.char_p = model.gc / (2.0 * model.c_w * model.ell) * float(
            np.linalg.norm(system.nodal_volume))

    def ok(self, ru: float, rp: float, gs) -> bool:
        char_u = float(np.linalg.norm(gs.f_int[self.system.dofmap.constrained_flat]))
        lim_u = max(self.tol * max(self.ref_u, char_u), self.floor)
        lim_p = max(self.tol * max(self.ref_p, self.char_p), self.floor)
        return ru <= lim_u and rp <= lim_p


def solve_increment_monolithic(system, fields, config: SolverConfig):
    """Simultaneous update of (u, phi) by BFGS or full Newton iteration.

    The seed stiffness is assembled and factorised at increment start (and on
    reform triggers); every iteration re-evaluates residuals, which reruns
    the return mapping from the committed state. Returns (IncrementResult,
    EvalCache) with the cache of the last accepted evaluation for the commit.
    """
    dm = system.dofmap
    nf = dm.n_u_free
    newton = config.scheme == "newton"

    def gather():
        return np.concatenate([fields.u[dm.free_u], fields.phi])

    def scatter(z):
        fields.u[dm.free_u] = z[:nf]
        fields.phi[:] = z[nf:]

    def norms(gs):
        return float(np.linalg.norm(gs.r_u)), float(np.linalg.norm(gs.r_phi))

    result = IncrementResult(False, 0)
    gs, cache = system.evaluate(fields, need_tangent=True)
    ru, rp = norms(gs)
    result.residual_history.append((ru, rp))
    conv = _Convergence(config, system, ru, rp)
    if conv.ok(ru, rp, gs):
        result.converged = True
        return result, cache

    z = gather()
    r = np.concatenate([gs.r_u, gs.r_phi])
    op = LbfgsOperator(_block_seed(gs))
    skips_before = 0
    best_norm = float(np.hypot(ru, rp))
    stalls = 0

    for it in range(1, config.max_iterations + 1):
        if newton and it > 1:
            gs, cache = system.evaluate(fields, need_tangent=True)
            op.reset(_block_seed(gs))
            r = np.concatenate([gs.r_u, gs.r_phi])
        elif config.reform_every and it > 1 and (it - 1) % config.reform_every == 0:
            gs_t, cache = system.evaluate(fields, need_tangent=True)
            op.reset(_block_seed(gs_t))
            r = np.concatenate([gs_t.r_u, gs_t.r_phi])
            result.reforms += 1

        d = -op.apply(r)

        def eval_at(alpha):
            scatter(z + alpha * d)
            gs_a, cache_a = system.evaluate(fields, need_tangent=False)
            ru_a, rp_a = norms(gs_a)
            return float(np.hypot(ru_a, rp_a)), (gs_a, cache_a, ru_a, rp_a)

        norm_before = float(np.linalg.norm(r))
        if config.line_search:
            alpha, (gs_new, cache, ru, rp) = line_search(
                eval_at, norm_before, config.ls_beta, config.ls_alpha_min)
        else:
            alpha = 1.0
            _, (gs_new, cache, ru, rp) = eval_at(1.0)
        z = z + alpha * d
        scatter(z)
        result.alphas.append(alpha)
        result.residual_history.append((ru, rp))
        result.iterations = it

        if conv.ok(ru, rp, gs_new):
            result.converged = True
            return result, cache

        norm_now = float(np.hypot(ru, rp))
        if not np.isfinite(norm_now) or norm_now > 1e4 * max(best_norm, config.residual_floor):
            return result, cache          # diverged; leave the cut-back to the caller
        best_norm = min(best_norm, norm_now)

        r_new = np.concatenate([gs_new.r_u, gs_new.r_phi])
        if not newton:
            op.update(alpha * d, r_new - r)
            result.curvature_skips = op.skips + skips_before
            # a floored line search without decrease means the operator has
            # gone stale; reform like on curvature-skip exhaustion
            if alpha <= config.ls_alpha_min and norm_now >= norm_before:
                stalls += 1
            else:
                stalls = 0
            if stalls >= 4:
                return result, cache      # stalled even after a reform: give up
            if op.skips >= config.max_curvature_skips or stalls == 2:
                gs_t, cache = system.evaluate(fields, need_tangent=True)
                skips_before = result.curvature_skips
                op.reset(_block_seed(gs_t))
                result.reforms += 1
                r_new = np.concatenate([gs_t.r_u, gs_t.r_phi])
        correction = float(np.linalg.norm(alpha * d))
        if correction <= config.tol_correction * max(float(np.linalg.norm(z)), 1e-30):
            result.stagnated = True
        r = r_new
    return result, cache


def _solve_block(system, fields, config, which: str):
    """Newton iteration on one field with the other frozen (staggered pass)."""
    dm = system.dofmap
    result = IncrementResult(False, 0)
    for it in range(config.max_iterations + 1):
        gs, cache = system.evaluate(fields, need_tangent=True)
        ru, rp = float(np.linalg.norm(gs.r_u)), float(np.linalg.norm(gs.r_phi))
        result.residual_history.append((ru, rp))
        if it == 0:
            conv = _Convergence(config, system, ru, rp)
        res_norm = ru if which == "u" else rp
        if which == "u":
            char = float(np.linalg.norm(gs.f_int[dm.constrained_flat]))
            ref = max(conv.ref_u, char)
        else:
            ref = max(conv.ref_p, conv.char_p)
        if res_norm <= max(config.tol_residual * ref, config.residual_floor):
            result.converged = True
            result.iterations = it
            return result, cache
        if it == config.max_iterations:
            break
        if which == "u":
            d = -_factorise(gs.k_uu)(gs.r_u)
            base = fields.u[dm.free_u].copy()

            def eval_at(alpha, base=base, d=d):
                fields.u[dm.free_u] = base + alpha * d
                gs_a, _ = system.evaluate(fields, need_tangent=False)
                return float(np.linalg.norm(gs_a.r_u)), None
        else:
            d = -_factorise(gs.k_phiphi)(gs.r_phi)
            base = fields.phi.copy()

            def eval_at(alpha, base=base, d=d):
                fields.phi[:] = base + alpha * d
                gs_a, _ = system.evaluate(fields, need_tangent=False)
                return float(np.linalg.norm(gs_a.r_phi)), None

        if config.line_search:
            alpha, _ = line_search(eval_at, res_norm, config.ls_beta, config.ls_alpha_min)
        else:
            alpha = 1.0
        if which == "u":
            fields.u[dm.free_u] = base + alpha * d
        else:
            fields.phi[:] = base + alpha * d
        result.alphas.append(alpha)
        result.iterations = it + 1
    return result, cache


def solve_increment_staggered(system, fields, config: SolverConfig):
    """Single-pass staggered sweep: momentum with phi frozen, then phase field.

    No outer fixed-point loop by design, so after the phase-field update the
    momentum residual is out of balance by one sweep; the deviation shrinks
    as the increments get smaller. ``converged`` means both block solves met
    their own residual tests.
    """
    res_u, _ = _solve_block(system, fields, config, "u")
    if not res_u.converged:
        return res_u, None
    res_p, cache = _solve_block(system, fields, config, "phi")
    combined = IncrementResult(
        res_p.converged,
        res_u.iterations + res_p.iterations,
        res_u.residual_history + res_p.residual_history,
        res_u.alphas + res_p.alphas,
    )
    return combined, cache


def solve_increment(system, fields, config: SolverConfig):
    if config.scheme in ("bfgs", "newton"):
        return solve_increment_monolithic(system, fields, config)
    return solve_increment_staggered(system, fields, config)


class StepController:
    """Halve-on-failure, double-on-success increment sizing.

    Allows ``max_cutbacks`` halvings; one more consecutive failure aborts the
    simulation. After a success the scale doubles back toward nominal.
    """

    def __init__(self, dt_nominal: float, max_cutbacks: int = 8):
        self.dt_nominal = dt_nominal
        self.max_cutbacks = max_cutbacks
        self.scale = 1.0
        self.consecutive_failures = 0

    @property
    def dt(self) -> float:
        return self.dt_nominal * self.scale

    def on_failure(self):
        self.consecutive_failures += 1
        if self.consecutive_failures > self.max_cutbacks:
            raise SolverAbort(
                f"increment failed after {self.max_cutbacks} cut-backs "
                f"(dt = {self.dt:.3e})")
        self.scale *= 0.5

    def on_success(self):
        self.consecutive_failures = 0
        self.scale = min(1.0, 2.0 * self.scale)
