import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavimod.dilatation import (
    angular_dilatation,
    brute_force_directional,
    chain_slack,
    classical_dilatations,
    dilatation_fields,
    dual_dilatation,
    max_stretch_projection,
    normal_dilatation,
    radial_oracle,
    sample,
    singular_values,
)
from cavimod.errors import IrregularPointError, ParameterError
from cavimod.mapping import (
    catalog_get,
    cavity_profile,
    exp_profile,
    fd_jacobian,
    identity_profile,
    jacobian,
    power_profile,
)

E1 = np.array([1.0, 0.0, 0.0])
F1_J = np.diag([0.5, 3.0, 3.0])  # f1, alpha = 1/2, at 0.25 e1


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def rotation(n, rng):
    A, R = np.linalg.qr(rng.standard_normal((n, n)))
    A = A * np.sign(np.diag(R))
    if np.linalg.det(A) < 0:
        A[:, 0] = -A[:, 0]
    return A


def well_conditioned(n, rng, count):
    """``U diag(s) V^T`` with rotations ``U, V`` and ``s`` in [0.5, 2]."""
    out = []
    for _ in range(count):
        s = rng.uniform(0.5, 2.0, n)
        out.append(rotation(n, rng) @ np.diag(s) @ rotation(n, rng).T)
    return np.array(out)


def dual_closed_form(q, n):
    if q >= 2**-0.5:
        return q
    return (2 * math.sqrt(1 - q * q)) ** (n / (1 - n)) * q ** (1 / (1 - n))


def test_singular_values():
    np.testing.assert_allclose(singular_values(np.eye(3)), [1, 1, 1])
    np.testing.assert_allclose(singular_values(F1_J), [0.5, 3, 3])
    with pytest.raises(ParameterError):
        singular_values(np.full((2, 2), np.nan))


def test_identity_all_one():
    u = unit([0.2, -0.5, 0.7])
    assert classical_dilatations(np.eye(3)) == pytest.approx((1.0, 1.0))
    assert angular_dilatation(np.eye(3), u) == pytest.approx(1.0)
    assert normal_dilatation(np.eye(3), u) == pytest.approx(1.0)
    assert dual_dilatation(np.eye(3), u) == pytest.approx(1.0, rel=1e-12)


def test_f1_example_values():
    K, L = classical_dilatations(F1_J)
    assert (K, L) == (pytest.approx(6.0), pytest.approx(36.0))
    # (1 + t^-alpha)/alpha and its square at t = 1/4
    assert K == pytest.approx((1 + 0.25**-0.5) / 0.5)
    assert angular_dilatation(F1_J, E1) == pytest.approx(36.0, rel=1e-14)
    assert normal_dilatation(F1_J, E1) == pytest.approx(1 / 6, rel=1e-14)
    T = dual_dilatation(F1_J, E1)
    assert T == pytest.approx(dual_closed_form(1 / 6, 3), rel=1e-12)
    assert T == pytest.approx(0.88451759, abs=1e-8)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_f3_constant_dilatations(n):
    f = catalog_get("f3", n)
    rng = np.random.default_rng(n)
    x = unit(rng.standard_normal((200, n))) * rng.uniform(0.05, 0.95, (200, 1))
    J = jacobian(f, x)
    K, L = classical_dilatations(J)
    np.testing.assert_allclose(K, (math.sqrt(2) + 1) ** n, rtol=1e-10)
    np.testing.assert_allclose(L, (math.sqrt(2) + 1) ** n, rtol=1e-10)
    np.testing.assert_allclose(angular_dilatation(J, unit(x)), 1.0, rtol=1e-10)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_f3_normal_dilatation_against_radial_difference(n):
    # Oracle: |d/dt f(x + t u)| by central differences and det f' by FD.
    f = catalog_get("f3", n)
    rng = np.random.default_rng(10 + n)
    x = unit(rng.standard_normal((50, n))) * rng.uniform(0.1, 0.9, (50, 1))
    u = unit(x)
    h = 1e-6 * np.linalg.norm(x, axis=1, keepdims=True)
    du = np.linalg.norm(f.rule(x + h * u) - f.rule(x - h * u), axis=1) / (2 * h[:, 0])
    det = np.linalg.det(fd_jacobian(f.rule, x, n))
    oracle = (du**n / det) ** (1 / (n - 1))
    Q = normal_dilatation(jacobian(f, x), u)
    np.testing.assert_allclose(Q, oracle, rtol=1e-7)
    s = u[:, 0] ** 2 + u[:, 1] ** 2
    np.testing.assert_allclose(Q, (1 + 4 * s) ** (n / (2 * (n - 1))), rtol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_ell_closed_form_against_grid(n):
    rng = np.random.default_rng(100 + n)
    Js = well_conditioned(n, rng, 100)
    us = unit(rng.standard_normal((100, n)))
    for J, u in zip(Js, us):
        closed = 1.0 / np.linalg.norm(np.linalg.solve(J.T, u))
        brute = brute_force_directional(J, u, grid_level=4).ell
        assert brute >= closed * (1 - 1e-12)
        assert brute == pytest.approx(closed, rel=1e-4)


@pytest.mark.parametrize("n", [2, 3])
def test_dual_ascent_against_grid(n):
    rng = np.random.default_rng(200 + n)
    Js = well_conditioned(n, rng, 30)
    us = unit(rng.standard_normal((30, n)))
    calL, ok = max_stretch_projection(Js, us)
    assert np.all(ok)
    for J, u, c in zip(Js, us, calL):
        brute = brute_force_directional(J, u, grid_level=4).calL
        assert c >= brute * (1 - 1e-12)  # ascent reaches at least the best grid point
        assert c == pytest.approx(brute, rel=1e-4)


def test_diag_example_ell():
    # the grid minimum approaches 0.5 from above as the grid is refined
    errs = [brute_force_directional(F1_J, E1, grid_level=k).ell - 0.5 for k in (1, 3, 5)]
    assert all(e >= 0 for e in errs)
    assert errs[0] > errs[2] and errs[2] < 1e-4 * 0.5
    assert 1 / np.linalg.norm(np.linalg.solve(F1_J.T, E1)) == pytest.approx(0.5)


def test_irregular_points():
    bad = np.diag([1.0, -1.0, 1.0])
    with pytest.raises(IrregularPointError):
        classical_dilatations(bad)
    with pytest.raises(IrregularPointError):
        angular_dilatation(np.zeros((3, 3)), E1)
    with pytest.raises(IrregularPointError):
        normal_dilatation(np.diag([1.0, 1.0, 1e-13]), E1)
    out = dilatation_fields(np.stack([np.eye(3), bad]), E1)
    assert list(out["regular"]) == [True, False]
    assert np.isnan(out["D"][1]) and out["D"][0] == 1.0


def test_direction_must_be_unit():
    with pytest.raises(ParameterError):
        angular_dilatation(np.eye(3), [1.0, 1.0, 0.0])


@pytest.mark.parametrize("profile", [cavity_profile(0.5), cavity_profile(0.2), exp_profile(), power_profile(2.5)])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_radial_oracle_matches_generic_path(profile, n):
    f = catalog_get("radial", n, {"profile": profile})
    rng = np.random.default_rng(n)
    u = unit(rng.standard_normal((100, n)))
    t = rng.uniform(0.02, 0.98, 100)
    fl = dilatation_fields(jacobian(f, u * t[:, None]), u, with_T=True)
    for i in range(100):
        o = radial_oracle(profile, t[i], n)
        for key in ("K", "L", "D", "Q", "T"):
            assert fl[key][i] == pytest.approx(getattr(o, key), rel=1e-8), key


def test_radial_oracle_examples():
    o = radial_oracle(identity_profile(), 0.4, 3)
    assert (o.K, o.L, o.D, o.Q, o.T) == (1.0, 1.0, 1.0, 1.0, 1.0)
    o = radial_oracle(cavity_profile(0.5), 0.25, 3)
    assert (o.D, o.Q, o.K, o.L) == (pytest.approx(36), pytest.approx(1 / 6), pytest.approx(6), pytest.approx(36))
    t = 0.3
    o = radial_oracle(exp_profile(), t, 3)
    assert o.Q == pytest.approx(1 + 1 / t) and o.D == pytest.approx((1 + 1 / t) ** -2)


def test_sample_f2_near_origin_is_regular():
    s = sample(catalog_get("f2", 3), [2e-3, 0.0, 0.0])
    assert s.regular and s.detJ == 0.0  # true Jacobian underflows, dilatations do not
    assert s.Q == pytest.approx(1 + 500.0)


def test_sample_rejects_batches():
    with pytest.raises(ParameterError):
        sample(catalog_get("identity", 3), np.full((2, 3), 0.1))


@pytest.mark.parametrize("name", ["identity", "scaling", "f1", "f2", "f3", "radial"])
def test_chain_on_catalog(name):
    f = catalog_get(name, 3, {"beta": 0.6} if name == "radial" else None)
    rng = np.random.default_rng(7)
    x = unit(rng.standard_normal((2000, 3))) * rng.uniform(0.02, 0.98, (2000, 1))
    fl = dilatation_fields(jacobian(f, x), unit(x), with_T=True)
    assert np.all(fl["regular"])
    slack = chain_slack(fl["K"], fl["L"], fl["D"], fl["Q"], 3, fl["T"], relative=True)
    assert np.min(slack) >= -1e-9


matrices = st.integers(2, 4).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.floats(-0.45, 0.45), min_size=n * n, max_size=n * n),
        st.lists(st.floats(-1, 1), min_size=n, max_size=n),
        st.integers(0, 2**31),
    )
)


def _setup(data):
    n, entries, uvec, seed = data
    J = np.eye(n) + np.reshape(entries, (n, n))
    if np.linalg.det(J) <= 1e-3:
        J = np.eye(n) + 0.1 * np.reshape(entries, (n, n))
    u = np.asarray(uvec) + 1e-3
    return n, J, u / np.linalg.norm(u), seed


@settings(max_examples=60, deadline=None)
@given(matrices, st.floats(1e-3, 1e3))
def test_scale_invariance(data, c):
    n, J, u, _ = _setup(data)
    a = dilatation_fields(J, u, with_T=True)
    b = dilatation_fields(c * J, u, with_T=True)
    for key in ("K", "L", "D", "Q"):
        assert b[key] == pytest.approx(a[key], rel=1e-12)
    assert b["T"] == pytest.approx(a["T"], rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_rotation_invariance(data):
    n, J, u, seed = data[0], *_setup(data)[1:]
    A = rotation(n, np.random.default_rng(seed))
    JA, uA = A @ J @ A.T, A @ u
    assert angular_dilatation(JA, uA) == pytest.approx(angular_dilatation(J, u), rel=1e-9)
    assert normal_dilatation(JA, uA) == pytest.approx(normal_dilatation(J, u), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(matrices)
def test_chain_property(data):
    n, J, u, _ = _setup(data)
    fl = dilatation_fields(J, u, with_T=True)
    assert chain_slack(fl["K"], fl["L"], fl["D"], fl["Q"], n, fl["T"], relative=True) >= -1e-9
