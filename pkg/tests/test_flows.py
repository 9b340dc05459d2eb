import numpy as np
import pytest

from splitac.flows import (
    FlowParams,
    calibrate_convergence_constant,
    phi,
    phi_grid,
    psi,
    run_lemma_suites,
)
from splitac.grid import GridFunction, Mesh

from oracles import rk4_flow

# frozen RK4 reference values (step 1e-5)
PHI_1_AT_2 = 1.0549729219451958
PHI_01_AT_2 = 1.6096571705090295
PSI_001_AT_2 = -5.688190739085219


def test_flow_params_validation():
    with pytest.raises(ValueError):
        FlowParams(-0.1)
    p = FlowParams(0.3)
    assert 0.0 < p.e2t <= 1.0
    assert p.e2t == pytest.approx(np.exp(-0.6), rel=1e-15)
    assert FlowParams(0.0).e2t == 1.0


def test_phi_fixed_points():
    for t in (0.0, 0.01, 0.5, 3.0):
        p = FlowParams(t)
        assert phi(p, 0.0) == 0.0
        assert phi(p, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert phi(p, -1.0) == pytest.approx(-1.0, abs=1e-15)


def test_phi_against_rk4_oracle():
    assert phi(FlowParams(1.0), 2.0) == pytest.approx(PHI_1_AT_2, abs=1e-10)
    assert phi(FlowParams(0.1), 2.0) == pytest.approx(PHI_01_AT_2, abs=1e-10)


def test_psi_basics():
    for t in (0.0, 0.2, 0.9):
        assert psi(FlowParams(t), 0.0) == 0.0
    assert psi(FlowParams(0.0), 2.0) == pytest.approx(-6.0, rel=1e-14)
    v = psi(FlowParams(0.01), 2.0)
    assert v == pytest.approx(PSI_001_AT_2, rel=1e-12)
    # converging to psi_0(2) = -6 at rate O(dt (1 + |z|^5))
    assert abs(v - (-6.0)) < 0.35


def test_psi_matches_difference_quotient():
    rng = np.random.default_rng(12)
    z = rng.uniform(-5, 5, 100)
    for t in (1e-3, 0.05, 0.7):
        p = FlowParams(t)
        direct = (phi(p, z) - z) / t
        np.testing.assert_allclose(psi(p, z), direct, rtol=1e-9, atol=1e-9)


def test_phi_propagates_nan():
    assert np.isnan(phi(FlowParams(0.5), np.nan))


def test_phi_grid():
    m = Mesh(5)
    p = FlowParams(1.0)
    out = phi_grid(p, GridFunction.zeros(m))
    assert np.all(out.values == 0.0)

    rng = np.random.default_rng(13)
    inside = GridFunction(m, rng.uniform(-1, 1, 5))
    out = phi_grid(p, inside)
    assert np.all(np.abs(out.values) <= 1.0 + 1e-14)

    single = Mesh(1)
    out = phi_grid(p, GridFunction(single, np.array([2.0])))
    assert out.values[0] == pytest.approx(PHI_1_AT_2, abs=1e-10)


def test_flow_semigroup_law():
    rng = np.random.default_rng(14)
    s = rng.uniform(0, 1, 3000)
    t = rng.uniform(0, 1, 3000)
    z = rng.uniform(-50, 50, 3000)
    composed = np.array(
        [phi(FlowParams(si), phi(FlowParams(ti), zi)) for si, ti, zi in zip(s, t, z)]
    )
    direct = np.array(
        [phi(FlowParams(si + ti), zi) for si, ti, zi in zip(s, t, z)]
    )
    np.testing.assert_allclose(composed, direct, rtol=1e-12, atol=1e-300)


def test_flow_ode_consistency():
    # (phi_h(z) - z)/h -> z - z^3 with error O(h)
    rng = np.random.default_rng(15)
    z = rng.uniform(-3, 3, 50)
    errs = []
    for h in (1e-2, 1e-3, 1e-4):
        quot = (phi(FlowParams(h), z) - z) / h
        errs.append(np.abs(quot - (z - z**3)).max())
    assert errs[1] < errs[0] / 5.0
    assert errs[2] < errs[1] / 5.0


def test_sign_and_monotone_approach():
    rng = np.random.default_rng(16)
    z = rng.uniform(-50, 50, 1000)
    p = FlowParams(0.37)
    out = phi(p, z)
    assert np.all(np.sign(out) == np.sign(z))
    big = np.abs(z) > 1
    assert np.all(np.abs(out[big]) <= np.abs(z[big]) + 1e-12)
    assert np.all(np.abs(out[big]) >= 1.0 - 1e-12)
    small = ~big
    assert np.all(np.abs(out[small]) >= np.abs(z[small]) - 1e-12)
    assert np.all(np.abs(out[small]) <= 1.0 + 1e-12)


def test_lemma_suites_pass():
    reports = run_lemma_suites(n_cases=200_000, master_seed=123)
    names = [r.name for r in reports]
    assert names == [
        "flow_lipschitz",
        "increment_one_sided",
        "increment_growth",
        "increment_convergence",
    ]
    for r in reports:
        assert r.passed, f"{r.name}: {r.n_violations} violations, worst {r.worst_margin}"
        assert r.n_violations == 0


def test_lemma_suites_deterministic():
    a = run_lemma_suites(n_cases=10_000, master_seed=5)
    b = run_lemma_suites(n_cases=10_000, master_seed=5)
    assert [(r.name, r.worst_margin) for r in a] == [
        (r.name, r.worst_margin) for r in b
    ]


def test_increment_local_lipschitz_pairwise():
    # |psi_t(z2) - psi_t(z1)| <= 3 e^{3 t0} |z2 - z1| (1 + |z1|^3 + |z2|^3)
    from splitac.flows import _psi_t

    rng = np.random.default_rng(17)
    z1 = rng.uniform(-50, 50, 200_000)
    z2 = rng.uniform(-50, 50, 200_000)
    t = rng.uniform(0, 1, 200_000)
    const = 3.0 * np.exp(3.0)
    lhs = np.abs(_psi_t(t, z2) - _psi_t(t, z1))
    bound = const * np.abs(z2 - z1) * (1 + np.abs(z1) ** 3 + np.abs(z2) ** 3)
    assert np.all(lhs <= bound)
    # the vectorized helper agrees with the public map
    for ti, zi in zip(t[:20], z1[:20]):
        assert _psi_t(ti, zi) == pytest.approx(psi(FlowParams(ti), zi), rel=1e-13)


def test_convergence_constant_calibration():
    c = calibrate_convergence_constant()
    assert np.isfinite(c) and c > 0
    # headroom keeps the bound stable for all smaller time steps
    rng = np.random.default_rng(18)
    z = rng.uniform(-50, 50, 50_000)
    for t in (0.5, 0.1, 1e-3, 1e-6):
        gap = np.abs(psi(FlowParams(t), z) - psi(FlowParams(0.0), z))
        assert np.all(gap <= c * t * (1 + np.abs(z) ** 5))


def test_phi_rk4_random_sample():
    rng = np.random.default_rng(19)
    z = rng.uniform(-3, 3, 12)
    t = rng.uniform(0.05, 1.0, 12)
    for zi, ti in zip(z, t):
        ti = round(ti / 1e-5) * 1e-5
        assert phi(FlowParams(ti), zi) == pytest.approx(
            rk4_flow(zi, ti), abs=1e-8
        )
