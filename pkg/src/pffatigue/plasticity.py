"""Rate-independent von Mises plasticity with combined nonlinear
isotropic/kinematic hardening at a material point.

Stress and strain are symmetric 3x3 tensors in the N-mm-MPa system; the
out-of-plane component is carried so the volumetric part of the elastic
strain is exact under plane strain. The return mapping is fully implicit
(backward Euler) with a scalar Newton iteration on the plastic multiplier;
any number of superposed backstresses is reduced to closed form inside the
scalar consistency equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

I2 = np.eye(3)
I4S = 0.5 * (np.einsum("ik,jl->ijkl", I2, I2) + np.einsum("il,jk->ijkl", I2, I2))
IXI = np.einsum("ij,kl->ijkl", I2, I2)
I4DEV = I4S - IXI / 3.0


class ReturnMapError(Exception):
    """Local Newton failure; carries the trial state for diagnostics."""


@dataclass(frozen=True)
class PlasticityParams:
    """Elastic constants plus Voce isotropic and Chaboche kinematic hardening.

    backstresses holds (C_k [MPa], gamma_k [-]) pairs; an empty tuple gives
    purely isotropic hardening, Q_inf = 0 purely kinematic, both zero perfect
    plasticity.
    """
    E: float
    nu: float
    sigma0: float
    Q_inf: float = 0.0
    b: float = 0.0
    backstresses: tuple = ()

    def __post_init__(self):
        if self.E <= 0:
            raise ValueError("E must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ValueError("nu must lie in (-1, 0.5)")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        for c, g in self.backstresses:
            if c < 0 or g < 0:
                raise ValueError("backstress moduli must be non-negative")

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))

    @property
    def mu(self) -> float:
        return self.E / (2 * (1 + self.nu))

    @property
    def bulk(self) -> float:
        return self.E / (3 * (1 - 2 * self.nu))

    @property
    def n_back(self) -> int:
        return len(self.backstresses)


@dataclass
class PlasticState:
    """History at one integration point."""
    eps_p: np.ndarray            # plastic strain tensor (3,3)
    alpha: np.ndarray            # backstress tensors (n_back, 3, 3) [MPa]
    ep: float = 0.0              # equivalent plastic strain
    psi_p: float = 0.0           # accumulated plastic work density [MPa]

    @classmethod
    def initial(cls, n_back: int):
        return cls(np.zeros((3, 3)), np.zeros((n_back, 3, 3)))

    def copy(self):
        return PlasticState(self.eps_p.copy(), self.alpha.copy(), self.ep, self.psi_p)

    def alpha_total(self) -> np.ndarray:
        return self.alpha.sum(axis=0) if len(self.alpha) else np.zeros((3, 3))


class ReturnMapResult(NamedTuple):
    sigma: np.ndarray            # undamaged stress (3,3) [MPa]
    tangent: np.ndarray | None   # consistent tangent (3,3,3,3) [MPa]
    state: PlasticState          # updated history
    d_psi_p: float               # plastic work increment sigma : d eps_p [MPa]
    plastic: bool = False


def yield_stress(ep: float, params: PlasticityParams) -> float:
    """Voce law: sigma0 + Q_inf (1 - exp(-b ep))."""
    if ep < 0:
        raise ValueError("equivalent plastic strain must be non-negative")
    return params.sigma0 + params.Q_inf * (1.0 - np.exp(-params.b * ep))


def _yield_stress_slope(ep: float, params: PlasticityParams) -> float:
    return params.Q_inf * params.b * np.exp(-params.b * ep)


def _dev(t: np.ndarray) -> np.ndarray:
    return t - (np.trace(t) / 3.0) * I2


def _eq(t: np.ndarray) -> float:
    """von Mises magnitude sqrt(3/2 t':t') of a deviatoric tensor."""
    return float(np.sqrt(1.5 * np.einsum("ij,ij->", t, t)))


def yield_function(sigma: np.ndarray, alpha: np.ndarray, sigma_y: float) -> float:
    """F = sqrt(3/2 (s - a'):(s - a')) - sigma_y (uniaxial-equivalent norm)."""
    xi = _dev(sigma) - _dev(alpha)
    return _eq(xi) - sigma_y


@lru_cache(maxsize=32)
def elastic_stiffness(params: PlasticityParams) -> np.ndarray:
    c = params.lam * IXI + 2.0 * params.mu * I4S
    c.setflags(write=False)      # shared cached instance
    return c


def elastic_strain_split(eps_total: np.ndarray, state: PlasticState) -> np.ndarray:
    return eps_total - state.eps_p


def return_map(eps: np.ndarray, state: PlasticState, params: PlasticityParams,
               tol: float | None = None, max_iter: int = 50,
               need_tangent: bool = True) -> ReturnMapResult:
    """Backward-Euler radial return for the combined hardening model.

    Elastic branch returns the (cached) elastic stiffness and the incoming
    state object unchanged. Plastic branch solves the scalar consistency
    equation for the plastic multiplier, updates all backstresses implicitly,
    and assembles the exact algorithmic tangent (mildly nonsymmetric when the
    backstresses are not aligned with the flow direction). need_tangent=False
    skips the tangent for residual-only evaluations.
    """
    mu, lam = params.mu, params.lam
    if tol is None:
        tol = 1e-9 * params.sigma0

    eps_e = eps - state.eps_p
    tr_e = eps_e[0, 0] + eps_e[1, 1] + eps_e[2, 2]
    s_trial = 2.0 * mu * (eps_e - (tr_e / 3.0) * I2)
    n_back = len(params.backstresses)
    alpha_n = state.alpha.sum(axis=0) if n_back else None
    xi_trial = s_trial - alpha_n if n_back else s_trial
    sig_y_n = yield_stress(state.ep, params)
    f_trial = np.sqrt(1.5 * float((xi_trial * xi_trial).sum())) - sig_y_n

    if f_trial <= tol:
        sigma = lam * tr_e * I2 + 2.0 * mu * eps_e
        tangent = elastic_stiffness(params) if need_tangent else None
        return ReturnMapResult(sigma, tangent, state, 0.0, plastic=False)

    cs = tuple(c for c, _ in params.backstresses)
    gs = tuple(g for _, g in params.backstresses)
    alphas = state.alpha

    def residual(dp):
        xi_mod = s_trial.copy()
        hard = 0.0
        beta = []
        for k in range(n_back):
            b = 1.0 / (1.0 + gs[k] * dp)
            beta.append(b)
            xi_mod -= b * alphas[k]
            hard += cs[k] * dp * b
        q_mod = np.sqrt(1.5 * float((xi_mod * xi_mod).sum()))
        r = q_mod - 3.0 * mu * dp - hard - yield_stress(state.ep + dp, params)
        return r, beta, xi_mod, q_mod

    def kinematic_slope(beta, xi_mod, q_mod, dp):
        g_vec = None
        slope = -3.0 * mu - _yield_stress_slope(state.ep + dp, params)
        for k in range(n_back):
            gb2 = gs[k] * beta[k] ** 2
            g_vec = gb2 * alphas[k] if g_vec is None else g_vec + gb2 * alphas[k]
            slope -= cs[k] * beta[k] ** 2
        if g_vec is not None:
            slope += 1.5 * float((xi_mod * g_vec).sum()) / q_mod
        return slope, g_vec

    dp = 0.0
    r, beta, xi_mod, q_mod = residual(dp)
    lo, hi = 0.0, None
    for _ in range(max_iter):
        if abs(r) <= tol:
            break
        if r > 0:
            lo = dp
        else:
            hi = dp
        slope, _ = kinematic_slope(beta, xi_mod, q_mod, dp)
        dp_new = dp - r / slope
        if dp_new <= lo or (hi is not None and dp_new >= hi):
            dp_new = 0.5 * (lo + hi) if hi is not None else 2.0 * dp + abs(r) / (3.0 * mu)
        dp = dp_new
        r, beta, xi_mod, q_mod = residual(dp)
    else:
        raise ReturnMapError(
            f"no consistency after {max_iter} iterations: F_trial={f_trial:.6g}, "
            f"dp={dp:.6g}, residual={r:.6g}")

    n_dir = (1.5 / q_mod) * xi_mod
    d_eps_p = dp * n_dir
    eps_p_new = state.eps_p + d_eps_p
    if n_back:
        alpha_new = np.empty_like(alphas)
        for k in range(n_back):
            alpha_new[k] = beta[k] * (alphas[k] + ((2.0 / 3.0) * cs[k] * dp) * n_dir)
    else:
        alpha_new = alphas
    eps_e_new = eps - eps_p_new
    tr_new = eps_e_new[0, 0] + eps_e_new[1, 1] + eps_e_new[2, 2]
    sigma = lam * tr_new * I2 + 2.0 * mu * eps_e_new
    d_psi_p = float((sigma * d_eps_p).sum())
    new = PlasticState(eps_p_new, alpha_new, state.ep + dp, state.psi_p + d_psi_p)

    if not need_tangent:
        return ReturnMapResult(sigma, None, new, d_psi_p, plastic=True)

    # algorithmic tangent via implicit differentiation of the scalar equation
    _, g_vec = kinematic_slope(beta, xi_mod, q_mod, dp)
    if g_vec is not None:
        n_gv = float((n_dir * g_vec).sum())
        hard_slope = sum(cs[k] * beta[k] ** 2 for k in range(n_back))
    else:
        n_gv = 0.0
        hard_slope = 0.0
    a_bar = 3.0 * mu + hard_slope + _yield_stress_slope(new.ep, params) - n_gv
    theta = 2.0 * mu / a_bar
    c1 = 3.0 * mu * dp / q_mod
    coef_nn = -2.0 * mu * theta + (2.0 * mu * dp / q_mod) * (2.0 * mu + theta * n_gv)
    nf = n_dir.reshape(9)
    tangent = (params.bulk * IXI
               + 2.0 * mu * (1.0 - c1) * I4DEV
               + coef_nn * np.outer(nf, nf).reshape(3, 3, 3, 3))
    if g_vec is not None:
        tangent = tangent - (c1 * theta) * np.outer(g_vec.reshape(9), nf).reshape(3, 3, 3, 3)
    return ReturnMapResult(sigma, tangent, new, d_psi_p, plastic=True)


def uniaxial_stress_response(params: PlasticityParams, strain_path: np.ndarray):
    """Drive the 3D return map along a uniaxial-stress axial strain history.

    The lateral strain (equal in both transverse directions) is found at each
    step by Newton iteration so the transverse stresses vanish. Returns
    (axial stresses, final PlasticState); used for cyclic calibration plots
    and for checking against one-dimensional references.
    """
    state = PlasticState.initial(params.n_back)
    lat = 0.0
    out = np.empty(len(strain_path))
    for i, e_ax in enumerate(strain_path):
        res = None
        for _ in range(60):
            eps = np.diag([e_ax, lat, lat])
            res = return_map(eps, state, params)
            s_lat = res.sigma[1, 1]
            if abs(s_lat) <= 1e-9 * params.sigma0:
                break
            # d sigma_yy = (C_1111 + C_1122)|transverse d lat
            k_lat = res.tangent[1, 1, 1, 1] + res.tangent[1, 1, 2, 2]
            lat -= s_lat / k_lat
        else:
            raise ReturnMapError("transverse stress relaxation did not converge")
        state = res.state
        out[i] = res.sigma[0, 0]
    return out, state
