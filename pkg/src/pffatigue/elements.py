"""Isoparametric element kernels: shape functions, quadrature, B-matrices.

Plane-strain 2D only. Supported element types are 4-node quadrilaterals
(2x2 Gauss) and 3-node triangles (single point).
"""

from __future__ import annotations

import numpy as np

# Gauss points in the reference element, (n_gp, 2) coordinates and weights.
_A = 1.0 / np.sqrt(3.0)
QUAD4_POINTS = np.array([[-_A, -_A], [_A, -_A], [_A, _A], [-_A, _A]])
QUAD4_WEIGHTS = np.array([1.0, 1.0, 1.0, 1.0])
TRI3_POINTS = np.array([[1.0 / 3.0, 1.0 / 3.0]])
TRI3_WEIGHTS = np.array([0.5])

N_GP = {"quad4": 4, "tri3": 1}
N_NODES = {"quad4": 4, "tri3": 3}


def shape_functions(etype: str, xi: float, eta: float):
    """Return (N, dN) at a reference point; dN is (2, n_nodes)."""
    if etype == "quad4":
        n = 0.25 * np.array(
            [
                (1 - xi) * (1 - eta),
                (1 + xi) * (1 - eta),
                (1 + xi) * (1 + eta),
                (1 - xi) * (1 + eta),
            ]
        )
        dn = 0.25 * np.array(
            [
                [-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
                [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)],
            ]
        )
        return n, dn
    if etype == "tri3":
        n = np.array([1.0 - xi - eta, xi, eta])
        dn = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
        return n, dn
    raise ValueError(f"unknown element type {etype!r}")


def quadrature(etype: str):
    if etype == "quad4":
        return QUAD4_POINTS, QUAD4_WEIGHTS
    if etype == "tri3":
        return TRI3_POINTS, TRI3_WEIGHTS
    raise ValueError(f"unknown element type {etype!r}")


def jacobian(coords: np.ndarray, dn: np.ndarray):
    """Jacobian matrix J = dN @ X and its determinant for one Gauss point."""
    j = dn @ coords
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    return j, det


def element_kinematics(etype: str, coords: np.ndarray):
    """Precompute per-Gauss-point interpolation data for one element.

    Returns a dict with arrays stacked over Gauss points:
      N      (ngp, k)    shape function values
      B_u    (ngp, 3, 2k) strain-displacement matrices (Voigt: xx, yy, gamma_xy)
      B_phi  (ngp, 2, k)  gradient matrices for the scalar field
      wdet   (ngp,)       quadrature weight times |J|

    Raises ValueError on a non-positive Jacobian determinant.
    """
    pts, wts = quadrature(etype)
    k = N_NODES[etype]
    ngp = len(wts)
    n_all = np.empty((ngp, k))
    bu_all = np.empty((ngp, 3, 2 * k))
    bphi_all = np.empty((ngp, 2, k))
    wdet = np.empty(ngp)
    for g, ((xi, eta), w) in enumerate(zip(pts, wts)):
        n, dn = shape_functions(etype, xi, eta)
        j, det = jacobian(coords, dn)
        if det <= 0.0:
            raise ValueError("non-positive Jacobian determinant")
        grad = np.linalg.solve(j, dn)  # (2, k) derivatives w.r.t. x, y
        bu = np.zeros((3, 2 * k))
        bu[0, 0::2] = grad[0]
        bu[1, 1::2] = grad[1]
        bu[2, 0::2] = grad[1]
        bu[2, 1::2] = grad[0]
        n_all[g] = n
        bu_all[g] = bu
        bphi_all[g] = grad
        wdet[g] = w * det
    return {"N": n_all, "B_u": bu_all, "B_phi": bphi_all, "wdet": wdet}


def inverse_map(etype: str, coords: np.ndarray, point: np.ndarray, tol: float = 1e-11):
    """Reference coordinates of a physical point, or None if outside.

    Newton iteration on the isoparametric map; a small overshoot outside the
    reference element (1e-8) is tolerated for points on element boundaries.
    """
    xi = np.zeros(2) if etype == "quad4" else np.full(2, 1.0 / 3.0)
    for _ in range(25):
        n, dn = shape_functions(etype, xi[0], xi[1])
        residual = n @ coords - point
        if residual @ residual < tol * tol:
            break
        j, det = jacobian(coords, dn)
        if det == 0.0:
            return None
        xi = xi - np.linalg.solve(j.T, residual)
    else:
        return None
    slack = 1e-8
    if etype == "quad4":
        if np.all(np.abs(xi) <= 1.0 + slack):
            return np.clip(xi, -1.0, 1.0)
    else:
        if xi[0] >= -slack and xi[1] >= -slack and xi[0] + xi[1] <= 1.0 + slack:
            return np.clip(xi, 0.0, 1.0)
    return None
