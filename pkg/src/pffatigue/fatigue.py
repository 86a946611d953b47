"""Fatigue degradation of toughness.

The fatigue history variable is driven by both the elastic history field and
the plastic work density; its loading-gated accumulation feeds an asymptotic
or logarithmic degradation function applied to the toughness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LAW_KINDS = ("asymptotic", "logarithmic", "none")


@dataclass(frozen=True)
class FatigueLaw:
    kind: str = "asymptotic"
    kappa: float | None = None   # slope parameter, logarithmic only
    theta_t: float = 0.0         # threshold [MPa]

    @staticmethod
    def create(kind: str, gc: float | None = None, ell: float | None = None,
               kappa: float | None = None, theta_t: float | None = None) -> "FatigueLaw":
        """Build a law; the threshold defaults to gc/(12 ell) unless given."""
        kind = kind.lower()
        if kind not in LAW_KINDS:
            raise ValueError(f"unknown fatigue law {kind!r}")
        if kind == "none":
            return FatigueLaw("none", None, 0.0)
        if kind == "logarithmic":
            if kappa is None or kappa <= 0:
                raise ValueError("logarithmic law requires kappa > 0")
        elif kappa is not None:
            raise ValueError("kappa applies to the logarithmic law only")
        if theta_t is None:
            if gc is None or ell is None:
                raise ValueError("need gc and ell to derive the fatigue threshold")
            theta_t = default_threshold(gc, ell)
        if theta_t <= 0:
            raise ValueError("fatigue threshold must be positive")
        return FatigueLaw(kind, kappa, theta_t)


@dataclass
class FatigueState:
    theta_prev: float = 0.0      # fatigue variable at the last commit [MPa]
    theta_bar: float = 0.0       # accumulated history [MPa]


def fatigue_variable(g, h, psi_p):
    """Fatigue driving variable g(phi) * (H + psi_p); elementwise on arrays."""
    return g * (h + psi_p)


def default_threshold(gc: float, ell: float) -> float:
    """Threshold below which cyclic loading leaves the toughness intact."""
    if gc <= 0 or ell <= 0:
        raise ValueError("gc and ell must be positive")
    return gc / (12.0 * ell)


def accumulate(state: FatigueState, theta_new: float) -> FatigueState:
    """Discrete loading-gated accumulation of the fatigue history.

    The history grows by (theta_new - theta_prev) only when the variable
    strictly increases and is positive, mirroring the Heaviside gate on
    theta * dtheta/dt; unloading accrues nothing.
    """
    gain = theta_new - state.theta_prev
    bar = state.theta_bar + gain if (gain > 0.0 and theta_new > 0.0) else state.theta_bar
    return FatigueState(theta_new, bar)


def accumulate_arrays(theta_prev: np.ndarray, theta_bar: np.ndarray, theta_new: np.ndarray):
    """Vectorised accumulate over all quadrature points; returns new arrays."""
    gain = theta_new - theta_prev
    grow = (gain > 0.0) & (theta_new > 0.0)
    return theta_new.copy(), theta_bar + np.where(grow, gain, 0.0)


def fatigue_degradation(theta_bar, law: FatigueLaw):
    """Toughness multiplier f(theta_bar) in [0, 1], non-increasing.

    Asymptotic: (2 T / (theta + T))^2 above the threshold T, never zero.
    Logarithmic: [1 - kappa log10(theta/T)]^2 between T and T 10^(1/kappa),
    exactly zero beyond the cutoff. The base-10 logarithm is what makes the
    stated cutoff consistent.
    """
    scalar = np.isscalar(theta_bar)
    theta = np.asarray(theta_bar, dtype=float)
    if np.any(theta < 0):
        raise ValueError("accumulated fatigue history must be non-negative")
    if law.kind == "none":
        f = np.ones_like(theta)
    elif law.kind == "asymptotic":
        t = law.theta_t
        f = np.where(theta <= t, 1.0, (2.0 * t / (theta + t)) ** 2)
    else:
        t, kappa = law.theta_t, law.kappa
        cutoff = t * 10.0 ** (1.0 / kappa)
        with np.errstate(divide="ignore", invalid="ignore"):
            mid = (1.0 - kappa * np.log10(np.maximum(theta, t) / t)) ** 2
        f = np.where(theta <= t, 1.0, np.where(theta >= cutoff, 0.0, mid))
    return float(f) if scalar else f
