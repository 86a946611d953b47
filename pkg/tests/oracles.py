"""Independent reference implementations used to pin expected values.

Everything here is deliberately written without touching the package
internals: plain forward integration, dense linear algebra, quadrature.
"""

import numpy as np


def chaboche_1d(E, sigma0, Q_inf, b, backstresses, strain_path):
    """Explicit 1D combined-hardening integrator (uniaxial stress).

    Sub-steps each strain increment so that no sub-step exceeds ``h_max``
    (1e-6 by default per the calibration protocol). Returns the stress at
    each point of ``strain_path``.
    """
    h_max = 1e-6
    sigma = 0.0
    alphas = [0.0] * len(backstresses)
    p = 0.0
    eps = 0.0
    out = np.empty(len(strain_path))
    for i, eps_target in enumerate(strain_path):
        d_total = eps_target - eps
        n_sub = max(1, int(np.ceil(abs(d_total) / h_max)))
        de = d_total / n_sub
        for _ in range(n_sub):
            trial = sigma + E * de
            a = sum(alphas)
            sig_y = sigma0 + Q_inf * (1.0 - np.exp(-b * p))
            f = abs(trial - a) - sig_y
            if f <= 0.0:
                sigma = trial
            else:
                s = np.sign(trial - a)
                # plastic modulus of the combined law at the current state
                hard = Q_inf * b * np.exp(-b * p)
                hard += sum(C - g * ak * s for (C, g), ak in zip(backstresses, alphas))
                dp = f / (E + hard)
                p += dp
                for k, (C, g) in enumerate(backstresses):
                    alphas[k] += (C * s - g * alphas[k]) * dp
                sigma = trial - E * dp * s
            eps += de
        out[i] = sigma
    return out


def bfgs_inverse_dense(k_inv, dz, dr):
    """Literal rank-two inverse update on dense matrices."""
    n = len(dz)
    rho = 1.0 / float(dz @ dr)
    left = np.eye(n) - rho * np.outer(dz, dr)
    return left @ k_inv @ left.T + rho * np.outer(dz, dz)


def bfgs_direct_dense(k, dz, dr):
    """Literal BFGS update of the stiffness itself."""
    kdz = k @ dz
    return k - np.outer(kdz, kdz) / float(dz @ kdz) + np.outer(dr, dr) / float(dz @ dr)


def cw_integral(w_fn, n=200001):
    """Scaling constant as the integral of sqrt(w) over [0, 1] (Simpson)."""
    x = np.linspace(0.0, 1.0, n)
    y = np.sqrt(w_fn(x))
    h = x[1] - x[0]
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def homogeneous_phi_root(drive, gc_f, ell, c_w, g_prime, w_prime, lo=0.0, hi=1.0):
    """Scalar root of the gradient-free phase-field balance by bisection.

    Solves g'(phi) * drive + gc_f / (2 c_w) * w'(phi) / (2 ell) = 0.
    """
    def fun(phi):
        return g_prime(phi) * drive + gc_f / (2.0 * c_w) * w_prime(phi) / (2.0 * ell)

    flo, fhi = fun(lo), fun(hi)
    if flo >= 0.0:
        return lo
    if fhi <= 0.0:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fun(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def elastic_energy_density(eps, lam, mu):
    """Isotropic strain energy 0.5 lam tr^2 + mu tr(eps^2)."""
    tr = np.trace(eps)
    return 0.5 * lam * tr**2 + mu * float(np.trace(eps @ eps))
