"""Element residuals and tangent blocks for the two-field problem, global
sparse assembly, and the committed quadrature-point state.

The scheme is hybrid: the momentum residual carries the full undamaged
stress scaled by g(phi) + kappa, while the tensile part of the elastic
energy (volumetric-deviatoric split) drives the phase field through the
history field. The history field, the accumulated fatigue history and the
toughness multiplier f are frozen within an increment and committed once it
converges, which keeps the global matrix in two uncoupled symmetric blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import elements as el
from . import fatigue as fat
from . import fracture as fr
from . import plasticity as pl
from .mesh import DofMap, FieldState, Mesh

VOIGT = ((0, 0), (1, 1), (0, 1))


def voigt_strain_tensor(v: np.ndarray) -> np.ndarray:
    """(eps_xx, eps_yy, gamma_xy) -> symmetric 3x3 plane-strain tensor."""
    exx, eyy, gxy = v
    return np.array([[exx, 0.5 * gxy, 0.0], [0.5 * gxy, eyy, 0.0], [0.0, 0.0, 0.0]])


def voigt_stress(sigma: np.ndarray) -> np.ndarray:
    return np.array([sigma[0, 0], sigma[1, 1], sigma[0, 1]])


def voigt_tangent(c: np.ndarray) -> np.ndarray:
    """Condense a (3,3,3,3) tangent to the symmetrised plane-strain 3x3 matrix."""
    m = np.empty((3, 3))
    for a, (i, j) in enumerate(VOIGT):
        for b, (k, l) in enumerate(VOIGT):
            m[a, b] = c[i, j, k, l]
    return 0.5 * (m + m.T)


@lru_cache(maxsize=32)
def _elastic_voigt(params) -> np.ndarray:
    m = voigt_tangent(pl.elastic_stiffness(params))
    m.setflags(write=False)
    return m


def strain_from_nodes(kin: dict, u_e: np.ndarray) -> np.ndarray:
    """Voigt strains (ngp, 3) at the element Gauss points."""
    return np.einsum("gij,j->gi", kin["B_u"], u_e)


def amor_split(eps_e: np.ndarray, bulk: float, mu: float):
    """Volumetric-deviatoric split of the elastic energy density.

    psi+ = K <tr eps>+^2 / 2 + mu eps':eps', psi- = K <tr eps>-^2 / 2; the
    two sum to the isotropic elastic energy. Compression therefore stores no
    crack driving energy in the volumetric part.
    """
    tr = np.trace(eps_e)
    dev = eps_e - (tr / 3.0) * np.eye(3)
    dev2 = float(np.einsum("ij,ij->", dev, dev))
    plus = 0.5 * bulk * max(tr, 0.0) ** 2 + mu * dev2
    minus = 0.5 * bulk * min(tr, 0.0) ** 2
    return plus, minus


@dataclass
class StateBlock:
    """Committed history for every quadrature point (struct of arrays)."""
    eps_p: np.ndarray            # (n, 3, 3)
    alpha: np.ndarray            # (n, n_back, 3, 3)
    ep: np.ndarray               # (n,)
    psi_p: np.ndarray            # (n,)
    h: np.ndarray                # history field [MPa]
    theta_prev: np.ndarray       # fatigue variable at last commit [MPa]
    theta_bar: np.ndarray        # accumulated fatigue history [MPa]
    psi_plus: np.ndarray         # cached split energies at last commit
    psi_minus: np.ndarray

    @classmethod
    def initial(cls, n_points: int, n_back: int, model: fr.FractureModel):
        h0 = np.full(n_points, model.h_min)
        return cls(
            eps_p=np.zeros((n_points, 3, 3)),
            alpha=np.zeros((n_points, n_back, 3, 3)),
            ep=np.zeros(n_points),
            psi_p=np.zeros(n_points),
            h=h0,
            theta_prev=h0.copy(),    # theta = g(0)(H0 + 0) at time zero
            theta_bar=np.zeros(n_points),
            psi_plus=np.zeros(n_points),
            psi_minus=np.zeros(n_points),
        )

    @property
    def n_points(self):
        return len(self.ep)

    def copy(self):
        return StateBlock(*(getattr(self, f).copy() for f in (
            "eps_p", "alpha", "ep", "psi_p", "h", "theta_prev",
            "theta_bar", "psi_plus", "psi_minus")))

    def point(self, i: int) -> pl.PlasticState:
        # views, not copies: return_map treats its input state as read-only
        return pl.PlasticState(self.eps_p[i], self.alpha[i],
                               float(self.ep[i]), float(self.psi_p[i]))

    def put_point(self, i: int, s: pl.PlasticState):
        self.eps_p[i] = s.eps_p
        self.alpha[i] = s.alpha
        self.ep[i] = s.ep
        self.psi_p[i] = s.psi_p


@dataclass
class GlobalSystem:
    k_uu: sp.csr_matrix | None
    k_phiphi: sp.csr_matrix | None
    r_u: np.ndarray              # residual on free u-dofs
    r_phi: np.ndarray            # residual on phi dofs
    f_int: np.ndarray            # full internal force vector (2 n_nodes)


@dataclass
class EvalCache:
    """Per-quadrature-point results of the last residual evaluation."""
    plastic: list                # PlasticState per point
    d_psi_p: np.ndarray
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    phi_gp: np.ndarray
    f_int: np.ndarray            # full internal force (reaction recovery)


class System:
    """The assembled finite-element model for one simulation.

    Owns the mesh kinematics, material models, committed quadrature state and
    the dof map. Residual evaluation runs the return mapping from the
    committed state at the current trial fields; commit() advances the
    committed state once an increment has converged.
    """

    def __init__(self, mesh: Mesh, dofmap: DofMap, params: pl.PlasticityParams,
                 model: fr.FractureModel, law: fat.FatigueLaw):
        self.mesh = mesh
        self.dofmap = dofmap
        self.params = params
        self.model = model
        self.law = law
        self.kin = [el.element_kinematics(k, mesh.element_coords(e))
                    for e, k in enumerate(mesh.kinds)]
        self.gp_offset = np.cumsum([0] + [el.N_GP[k] for k in mesh.kinds])
        self.n_gp = int(self.gp_offset[-1])
        self.states = StateBlock.initial(self.n_gp, params.n_back, model)
        self.f_frozen = fat.fatigue_degradation(self.states.theta_bar, law)
        self.nodal_volume = np.zeros(mesh.n_nodes)
        for e, ids in enumerate(mesh.conn):
            self.nodal_volume[ids] += self.kin[e]["wdet"] @ self.kin[e]["N"]
        # per-element global dof gather tables
        self.u_idx = []              # flat u dof ids (2k,)
        self.phi_idx = []            # node ids (k,)
        for ids in mesh.conn:
            flat = np.empty(2 * len(ids), dtype=int)
            flat[0::2] = 2 * ids
            flat[1::2] = 2 * ids + 1
            self.u_idx.append(flat)
            self.phi_idx.append(np.asarray(ids))

    # -- element kernels ---------------------------------------------------

    def element_arrays(self, e: int, u_e, phi_e, need_tangent: bool):
        """Residual (and optionally stiffness) contributions of element e.

        Returns (r_u, r_phi, k_uu, k_phi, gp_data) where gp_data carries the
        per-point return-mapping results for a later commit. Elements whose
        Gauss points all stay elastic take a vectorised path; the trial check
        matches the return mapping exactly (same tolerance).
        """
        kin = self.kin[e]
        model, params = self.model, self.params
        gc, ell, c_w, kap = model.gc, model.ell, model.c_w, model.kappa_small
        base = self.gp_offset[e]
        ngp = len(kin["wdet"])
        sl = slice(base, base + ngp)

        eps_v = np.einsum("gij,j->gi", kin["B_u"], u_e)
        grad_phi = np.einsum("gik,k->gi", kin["B_phi"], phi_e)
        phi_gp = np.clip(kin["N"] @ phi_e, 0.0, 1.0)
        gdeg, g1, g2 = fr.degradation(phi_gp, model)
        w, w1, w2 = fr.dissipation(phi_gp, model)
        f_gp = self.f_frozen[sl]
        wdet = kin["wdet"]

        eps_t = np.zeros((ngp, 3, 3))
        eps_t[:, 0, 0] = eps_v[:, 0]
        eps_t[:, 1, 1] = eps_v[:, 1]
        eps_t[:, 0, 1] = eps_t[:, 1, 0] = 0.5 * eps_v[:, 2]

        mu, lam, bulk = params.mu, params.lam, params.bulk
        eps_e = eps_t - self.states.eps_p[sl]
        tr_e = np.trace(eps_e, axis1=1, axis2=2)
        dev_e = eps_e - (tr_e[:, None, None] / 3.0) * np.eye(3)
        xi = 2.0 * mu * dev_e - self.states.alpha[sl].sum(axis=1)
        q_trial = np.sqrt(1.5 * (xi * xi).sum(axis=(1, 2)))
        sig_y = params.sigma0 + params.Q_inf * (1.0 - np.exp(-params.b * self.states.ep[sl]))
        elastic = np.all(q_trial - sig_y <= 1e-9 * params.sigma0)

        drive = self.states.h[sl].copy()
        if elastic:
            sigma_v = np.empty((ngp, 3))
            sigma_v[:, 0] = lam * tr_e + 2.0 * mu * eps_e[:, 0, 0]
            sigma_v[:, 1] = lam * tr_e + 2.0 * mu * eps_e[:, 1, 1]
            sigma_v[:, 2] = 2.0 * mu * eps_e[:, 0, 1]
            dev2 = (dev_e * dev_e).sum(axis=(1, 2))
            psi_plus = 0.5 * bulk * np.maximum(tr_e, 0.0) ** 2 + mu * dev2
            psi_minus = 0.5 * bulk * np.minimum(tr_e, 0.0) ** 2
            drive += self.states.psi_p[sl]
            gp_data = [(self.states.point(base + g), 0.0, psi_plus[g], psi_minus[g],
                        phi_gp[g]) for g in range(ngp)]
        else:
            sigma_v = np.empty((ngp, 3))
            psi_plus = np.empty(ngp)
            psi_minus = np.empty(ngp)
            gp_data = []
            c_vs = []
            for g in range(ngp):
                res = pl.return_map(eps_t[g], self.states.point(base + g),
                                    params, need_tangent=need_tangent)
                pp, pm = amor_split(eps_t[g] - res.state.eps_p, bulk, mu)
                sigma_v[g] = voigt_stress(res.sigma)
                psi_plus[g] = pp
                psi_minus[g] = pm
                drive[g] += res.state.psi_p
                if need_tangent:
                    c_vs.append(_elastic_voigt(params) if not res.plastic
                                else voigt_tangent(res.tangent))
                gp_data.append((res.state, res.d_psi_p, pp, pm, phi_gp[g]))

        coef_u = wdet * (gdeg + kap)
        r_u = np.einsum("g,gsd,gs->d", coef_u, kin["B_u"], sigma_v)
        c_phi = gc * f_gp / (2.0 * c_w * ell)
        r_phi = ((wdet * (g1 * drive + 0.5 * c_phi * w1)) @ kin["N"]
                 + np.einsum("g,gxd,gx->d", wdet * c_phi * ell**2, kin["B_phi"], grad_phi))
        k_uu = k_phi = None
        if need_tangent:
            if elastic:
                c_v = _elastic_voigt(params)
                k_uu = np.einsum("g,gsa,st,gtb->ab", coef_u, kin["B_u"], c_v, kin["B_u"])
            else:
                k_uu = np.zeros((len(u_e), len(u_e)))
                for g in range(ngp):
                    b_u = kin["B_u"][g]
                    k_uu += coef_u[g] * (b_u.T @ c_vs[g] @ b_u)
            k_phi = (np.einsum("g,ga,gb->ab",
                               wdet * (g2 * drive + 0.5 * c_phi * w2),
                               kin["N"], kin["N"])
                     + np.einsum("g,gxa,gxb->ab", wdet * c_phi * ell * ell,
                                 kin["B_phi"], kin["B_phi"]))
        return r_u, r_phi, k_uu, k_phi, gp_data

    # -- global assembly ---------------------------------------------------

    def evaluate(self, fields: FieldState, need_tangent: bool):
        """Assemble residuals (and tangents) for the current trial fields."""
        dm = self.dofmap
        f_int = np.zeros(2 * self.mesh.n_nodes)
        r_phi = np.zeros(dm.n_phi)
        rows_u, cols_u, vals_u = [], [], []
        rows_p, cols_p, vals_p = [], [], []
        plastic = [None] * self.n_gp
        d_psi_p = np.zeros(self.n_gp)
        psi_plus = np.zeros(self.n_gp)
        psi_minus = np.zeros(self.n_gp)
        phi_gp_all = np.zeros(self.n_gp)
        for e in range(self.mesh.n_elements):
            uidx = self.u_idx[e]
            pidx = self.phi_idx[e]
            u_e = fields.u[uidx]
            phi_e = fields.phi[pidx]
            r_u_e, r_phi_e, k_uu_e, k_phi_e, gp_data = self.element_arrays(
                e, u_e, phi_e, need_tangent)
            f_int[uidx] += r_u_e
            r_phi[pidx] += r_phi_e
            if need_tangent:
                udofs = dm.u_dof[uidx]
                keep = udofs >= 0
                ki = np.where(keep)[0]
                sub = k_uu_e[np.ix_(ki, ki)]
                rw = np.repeat(udofs[ki], len(ki))
                cl = np.tile(udofs[ki], len(ki))
                rows_u.append(rw)
                cols_u.append(cl)
                vals_u.append(sub.ravel())
                rows_p.append(np.repeat(pidx, len(pidx)))
                cols_p.append(np.tile(pidx, len(pidx)))
                vals_p.append(k_phi_e.ravel())
            base = self.gp_offset[e]
            for g, (state, dpp, pp, pm, pgp) in enumerate(gp_data):
                i_gp = base + g
                plastic[i_gp] = state
                d_psi_p[i_gp] = dpp
                psi_plus[i_gp] = pp
                psi_minus[i_gp] = pm
                phi_gp_all[i_gp] = pgp
        k_uu = k_phi = None
        if need_tangent:
            nf = dm.n_u_free
            k_uu = sp.coo_matrix(
                (np.concatenate(vals_u), (np.concatenate(rows_u), np.concatenate(cols_u))),
                shape=(nf, nf)).tocsr()
            k_phi = sp.coo_matrix(
                (np.concatenate(vals_p), (np.concatenate(rows_p), np.concatenate(cols_p))),
                shape=(dm.n_phi, dm.n_phi)).tocsr()
        system = GlobalSystem(k_uu, k_phi, f_int[dm.free_u], r_phi, f_int)
        cache = EvalCache(plastic, d_psi_p, psi_plus, psi_minus, phi_gp_all, f_int)
        return system, cache

    def interpolate_phi(self, fields: FieldState) -> np.ndarray:
        """Phase-field values at every quadrature point."""
        out = np.empty(self.n_gp)
        for e in range(self.mesh.n_elements):
            phi_e = fields.phi[self.phi_idx[e]]
            out[self.gp_offset[e]:self.gp_offset[e + 1]] = self.kin[e]["N"] @ phi_e
        return out

    def commit(self, fields: FieldState, cache: EvalCache | None = None):
        """Advance committed state to the converged fields.

        Clamps phi into [0, 1], updates the plastic state, raises the history
        field (KKT max with the damage threshold), accumulates the fatigue
        history through the loading gate and refreshes the frozen toughness
        multipliers for the next increment.
        """
        np.clip(fields.phi, 0.0, 1.0, out=fields.phi)
        if cache is None:
            _, cache = self.evaluate(fields, need_tangent=False)
        st = self.states
        for i, pstate in enumerate(cache.plastic):
            st.put_point(i, pstate)
        st.psi_plus = cache.psi_plus.copy()
        st.psi_minus = cache.psi_minus.copy()
        st.h = fr.update_history(st.h, cache.psi_plus, self.model)
        # theta uses the clamped committed phi, not the raw final iterate
        g_gp, _, _ = fr.degradation(self.interpolate_phi(fields), self.model)
        theta = fat.fatigue_variable(g_gp, st.h, st.psi_p)
        st.theta_prev, st.theta_bar = fat.accumulate_arrays(
            st.theta_prev, st.theta_bar, theta)
        self.f_frozen = fat.fatigue_degradation(st.theta_bar, self.law)

    def snapshot_states(self):
        return self.states.copy(), self.f_frozen.copy()

    def restore_states(self, snap):
        self.states, self.f_frozen = snap[0].copy(), snap[1].copy()
