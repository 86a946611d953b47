"""Phase-field fracture constitutive laws.

Three model variants share one interface: the brittle AT1/AT2 pair with a
quadratic degradation function, and a cohesive-zone-like variant (PF-CZM)
whose degradation embeds the material strength. Toughness is given in
kJ/m^2, which is numerically identical to N/mm in the N-mm-MPa system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("AT1", "AT2", "PFCZM")

# scaling constants c_w = integral of sqrt(w) over [0, 1]
C_W = {"AT1": 2.0 / 3.0, "AT2": 0.5, "PFCZM": 4.0 / 3.0}


@dataclass(frozen=True)
class FractureModel:
    kind: str
    gc: float                    # toughness [N/mm]
    ell: float                   # length scale [mm]
    sigma_c: float | None = None     # strength [MPa], PF-CZM input
    m: float = 0.0                   # PF-CZM degradation slope constant
    h_min: float = 0.0               # damage threshold [MPa]
    kappa_small: float = 1e-7        # momentum-residual conditioning constant

    @property
    def c_w(self) -> float:
        return C_W[self.kind]

    @staticmethod
    def create(kind: str, gc: float, ell: float, youngs: float | None = None,
               sigma_c: float | None = None, kappa_small: float = 1e-7) -> "FractureModel":
        """Validate parameters and derive m and the damage threshold.

        PF-CZM requires sigma_c and the Young's modulus; passing sigma_c for
        AT1/AT2 is rejected because their strength follows from gc and ell.
        """
        kind = kind.upper().replace("-", "").replace("_", "")
        if kind not in KINDS:
            raise ValueError(f"unknown fracture model {kind!r}")
        if gc <= 0 or ell <= 0:
            raise ValueError("gc and ell must be positive")
        if kind == "PFCZM":
            if sigma_c is None or youngs is None:
                raise ValueError("PF-CZM requires sigma_c and the Young's modulus")
            if sigma_c <= 0:
                raise ValueError("sigma_c must be positive")
            m = 3.0 * youngs * gc / (2.0 * ell * sigma_c**2)
            h_min = sigma_c**2 / (2.0 * youngs)
        else:
            if sigma_c is not None:
                raise ValueError(f"sigma_c is derived for {kind}, not an input")
            m = 0.0
            h_min = 3.0 * gc / (16.0 * ell) if kind == "AT1" else 0.0
        return FractureModel(kind, gc, ell, sigma_c, m, h_min, kappa_small)


def _check_phi(phi):
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < -1e-9) or np.any(phi > 1 + 1e-9):
        bad = phi[(phi < -1e-9) | (phi > 1 + 1e-9)]
        raise ValueError(f"phase field outside [0, 1]: {np.atleast_1d(bad)[0]:.3e}")
    return np.clip(phi, 0.0, 1.0)


def degradation(phi, model: FractureModel):
    """(g, g', g'') of the stiffness degradation function.

    AT1/AT2 use the quadratic (1 - phi)^2. PF-CZM uses the rational form
    (1-phi)^2 / [(1-phi)^2 + m phi (1 - phi/2)]; the derivatives are
    analytic. Scalar in, scalar out; arrays broadcast.
    """
    scalar = np.isscalar(phi)
    phi = _check_phi(phi)
    if model.kind in ("AT1", "AT2"):
        g = (1.0 - phi) ** 2
        g1 = -2.0 * (1.0 - phi)
        g2 = np.full_like(phi, 2.0)
    else:
        m = model.m
        u = (1.0 - phi) ** 2
        u1 = -2.0 * (1.0 - phi)
        v = m * phi * (1.0 - 0.5 * phi)
        v1 = m * (1.0 - phi)
        den = u + v
        g = u / den
        num1 = u1 * v - u * v1              # u'v - uv'
        g1 = num1 / den**2
        num2 = 2.0 * v + u * m              # u''v - uv''  (u''=2, v''=-m)
        den1 = u1 + v1
        g2 = (num2 * den - 2.0 * num1 * den1) / den**3
    if scalar:
        return float(g), float(g1), float(g2)
    return g, g1, g2


def dissipation(phi, model: FractureModel):
    """(w, w', w'') of the geometric crack (dissipation) function.

    AT2: phi^2; AT1: phi; PF-CZM: 4 phi (kept verbatim even though its
    w(1) = 4 breaks the usual normalisation; c_w = 4/3 absorbs it).
    """
    scalar = np.isscalar(phi)
    phi = _check_phi(phi)
    if model.kind == "AT2":
        w, w1, w2 = phi**2, 2.0 * phi, np.full_like(phi, 2.0)
    elif model.kind == "AT1":
        w, w1, w2 = phi, np.ones_like(phi), np.zeros_like(phi)
    else:
        w, w1, w2 = 4.0 * phi, np.full_like(phi, 4.0), np.zeros_like(phi)
    if scalar:
        return float(w), float(w1), float(w2)
    return w, w1, w2


def strength_estimate(kind: str, youngs: float, gc: float, ell: float) -> float:
    """Strength implied by the homogeneous phase-field solution (AT1/AT2)."""
    kind = kind.upper()
    if kind == "AT1":
        return float(np.sqrt(3.0 * youngs * gc / (8.0 * ell)))
    if kind == "AT2":
        return float(3.0 / 16.0 * np.sqrt(3.0 * youngs * gc / ell))
    raise ValueError("strength is an input for PF-CZM, not derived")


def h_min(model: FractureModel) -> float:
    """Damage threshold: 3 gc/(16 ell) for AT1, sigma_c^2/(2E) for PF-CZM, 0 for AT2."""
    return model.h_min


def update_history(h_n, psi_e_plus, model: FractureModel):
    """KKT-consistent history update: max(H_n, psi_e_plus, H_min).

    Works elementwise on arrays; monotone non-decreasing and idempotent.
    """
    return np.maximum(np.maximum(h_n, psi_e_plus), model.h_min)
