import numpy as np
import pytest

from pffatigue.fracture import (FractureModel, degradation, dissipation, h_min,
                                strength_estimate, update_history)

from oracles import cw_integral

E = 215960.0


def at1(gc=2.7, ell=0.25):
    return FractureModel.create("AT1", gc=gc, ell=ell)


def at2(gc=2.7, ell=0.25):
    return FractureModel.create("AT2", gc=gc, ell=ell)


def pfczm(gc=2.7, ell=0.25, sigma_c=500.0):
    return FractureModel.create("PFCZM", gc=gc, ell=ell, youngs=E, sigma_c=sigma_c)


def test_degradation_endpoints():
    for model in (at1(), at2(), pfczm()):
        g0, _, _ = degradation(0.0, model)
        g1, _, _ = degradation(1.0, model)
        assert g0 == pytest.approx(1.0)
        assert g1 == pytest.approx(0.0, abs=1e-12)


def test_quadratic_degradation_value():
    g, g1, g2 = degradation(0.5, at2())
    assert g == pytest.approx(0.25)
    assert g1 == pytest.approx(-1.0)
    assert g2 == pytest.approx(2.0)


def test_pfczm_degradation_value():
    model = pfczm()
    assert model.m == pytest.approx(3 * E * 2.7 / (2 * 0.25 * 500**2), rel=1e-12)
    g, _, _ = degradation(0.5, model)
    expect = 0.25 / (0.25 + model.m * 0.5 * 0.75)     # independent arithmetic
    assert g == pytest.approx(expect, rel=1e-12)
    assert g == pytest.approx(0.04546, rel=1e-3)


def test_degradation_monotone_and_bounded():
    grid = np.linspace(0.0, 1.0, 10001)
    for model in (at1(), at2(), pfczm(), pfczm(sigma_c=200.0)):
        g, g1, _ = degradation(grid, model)
        assert np.all(g1 <= 1e-14)
        assert np.all((g >= -1e-14) & (g <= 1.0 + 1e-14))


@pytest.mark.parametrize("model_fn", [at1, at2, pfczm])
def test_degradation_derivatives_match_fd(model_fn):
    model = model_fn()
    grid = np.linspace(1e-3, 1.0 - 1e-3, 2001)
    g, g1, g2 = degradation(grid, model)
    h = 1e-6                     # first derivative: h^2 truncation ~ 1e-12
    gp, _, _ = degradation(grid + h, model)
    gm, _, _ = degradation(grid - h, model)
    fd1 = (gp - gm) / (2 * h)
    assert np.abs(fd1 - g1).max() / np.abs(g1).max() < 1e-6
    h = 1e-4                     # second difference: balances roundoff eps/h^2
    gp, _, _ = degradation(grid + h, model)
    gm, _, _ = degradation(grid - h, model)
    fd2 = (gp - 2 * g + gm) / h**2
    assert np.abs(fd2 - g2).max() / np.abs(g2).max() < 1e-6


def test_pfczm_matches_quadratic_at_m_two():
    # the rational family passes through the quadratic exactly at m = 2:
    # (1-p)^2 + 2 p (1 - p/2) = 1
    model = FractureModel("PFCZM", gc=1.0, ell=1.0, sigma_c=1.0, m=2.0, h_min=0.0)
    grid = np.linspace(0.0, 1.0, 512)
    g, _, _ = degradation(grid, model)
    assert np.abs(g - (1 - grid) ** 2).max() < 1e-12


def test_degradation_contract_violation():
    with pytest.raises(ValueError):
        degradation(1.5, at2())
    with pytest.raises(ValueError):
        degradation(-0.1, at1())
    # round-off excursions inside the 1e-9 band are tolerated
    degradation(1.0 + 5e-10, at2())


def test_dissipation_forms():
    assert dissipation(1.0, at2())[0] == pytest.approx(1.0)
    w, w1, w2 = dissipation(0.3, at2())
    assert (w, w1, w2) == (pytest.approx(0.09), pytest.approx(0.6), pytest.approx(2.0))
    w, w1, w2 = dissipation(0.0, at1())
    assert w == 0.0 and w1 == 1.0 and w2 == 0.0   # finite slope at 0: threshold exists
    w, w1, w2 = dissipation(0.25, pfczm())
    assert (w, w1, w2) == (pytest.approx(1.0), pytest.approx(4.0), 0.0)


def test_cw_matches_quadrature():
    # c_w = integral of sqrt(w): 1/2 (AT2), 2/3 (AT1), 4/3 (PF-CZM)
    assert abs(cw_integral(lambda p: p**2) - at2().c_w) < 1e-6
    assert abs(cw_integral(lambda p: p) - at1().c_w) < 1e-6
    assert abs(cw_integral(lambda p: 4 * p) - pfczm().c_w) < 1e-6


def test_strength_estimates_match_reported_values():
    assert strength_estimate("AT1", E, 2.7, 0.25) == pytest.approx(935.0, rel=5e-3)
    assert strength_estimate("AT2", E, 2.7, 0.25) == pytest.approx(496.0, rel=5e-3)
    with pytest.raises(ValueError):
        strength_estimate("PFCZM", E, 2.7, 0.25)


def test_strength_scaling():
    s1 = strength_estimate("AT1", E, 2.7, 0.25)
    s4 = strength_estimate("AT1", E, 4 * 2.7, 0.25)
    assert s4 == pytest.approx(2 * s1, rel=1e-12)


def test_damage_thresholds():
    assert h_min(at1()) == pytest.approx(3 * 2.7 / (16 * 0.25), rel=1e-12)
    assert h_min(at1()) == pytest.approx(2.025)
    assert h_min(pfczm()) == pytest.approx(500**2 / (2 * E), rel=1e-12)
    assert h_min(pfczm()) == pytest.approx(0.5788, rel=1e-3)
    assert h_min(at2()) == 0.0


def test_update_history_max_and_floor():
    assert update_history(5.0, 3.0, at2()) == 5.0
    assert update_history(0.0, 0.0, at1()) == pytest.approx(2.025)
    h = 0.0
    seq = []
    for psi in (1.0, 4.0, 2.0):
        h = update_history(h, psi, at2())
        seq.append(h)
    assert seq == [1.0, 4.0, 4.0]


def test_update_history_monotone_idempotent(rng):
    model = at1()
    h = np.full(64, model.h_min)   # the state block initialises at the floor
    for _ in range(50):
        psi = rng.exponential(2.0, size=64)
        h_new = update_history(h, psi, model)
        assert np.all(h_new >= h)
        # KKT triple: psi - H <= 0, dH >= 0, dH (psi - H) = 0
        dh = h_new - h
        assert np.all(psi - h_new <= 1e-12)
        assert np.all(dh * (psi - h_new) == 0.0)
        # idempotent on repeat
        assert np.array_equal(update_history(h_new, psi, model), h_new)
        h = h_new


def test_model_validation():
    with pytest.raises(ValueError):
        FractureModel.create("AT2", gc=-1, ell=0.1)
    with pytest.raises(ValueError):
        FractureModel.create("AT2", gc=1, ell=0.1, sigma_c=100.0)  # derived, not input
    with pytest.raises(ValueError):
        FractureModel.create("PFCZM", gc=1, ell=0.1)               # needs sigma_c and E
    with pytest.raises(ValueError):
        FractureModel.create("nope", gc=1, ell=0.1)
    assert FractureModel.create("at-2", gc=1, ell=1).kind == "AT2"
