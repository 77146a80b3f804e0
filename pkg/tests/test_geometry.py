import math
import warnings

import numpy as np
import pytest
from hypothesis import given, assume
from hypothesis import strategies as st

import oracles
from softrelax.geometry import (
    Ball,
    Ellipsoid,
    MaterialModel,
    NonConformingYieldSet,
    Polytope,
    SqrtPotential,
    TabulatedPotential,
    G_inf,
    H_eff,
    H_eff_maximizer,
    V_eval,
    V_inf,
    a_K,
    coercivity_constant,
    decompose_increment,
    effective_radius,
    envelope_oracle,
    keff_contains,
    support_H,
    theta_hat,
)
from softrelax.tensors import DevTensor2, Elasticity

SQRT3 = math.sqrt(3.0)
E1 = DevTensor2(1 / math.sqrt(2), 0.0)  # unit deviator diag(1, -1)/sqrt(2)

OCTA = [[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, -0.5, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]
PRISM = [
    [0.4, 0.1, 0.6], [0.4, 0.1, -0.6], [-0.4, -0.1, 0.6], [-0.4, -0.1, -0.6],
    [0.0, 0.45, 0.3], [0.0, 0.45, -0.3], [0.0, -0.45, 0.3], [0.0, -0.45, -0.3],
    [0.0, 0.0, 0.9], [0.0, 0.0, -0.9],
]


def polytope(v):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConformingYieldSet)
        return Polytope(v)


CASES = [
    (Ball(1.0), SqrtPotential(0.5)),
    (Ball(2.0), SqrtPotential(1.2)),
    (Ellipsoid(1.0, 0.5), SqrtPotential(0.25)),
    (Ellipsoid(0.7, 1.3), SqrtPotential(0.9)),
    (polytope(OCTA), SqrtPotential(0.3)),
    (polytope(PRISM), SqrtPotential(0.5)),
]
CASE_IDS = ["ball", "ball2", "ellipsoid", "ellipsoid_tall", "octahedron", "prism"]

comp = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
pairs = st.tuples(comp, comp, comp)
case = st.sampled_from(CASES)
# strict inequalities need a strictly convex K; polytope facets can give H_eff = H
strict_case = st.sampled_from(CASES[:4])


def vec(t):
    return np.array(t[:2])


# ---------------------------------------------------------------- examples


def test_support_examples():
    K = Ball(1.0)
    assert support_H(K, DevTensor2(0, 0), 0.0) == 0.0
    assert support_H(K, E1, 0.0) == pytest.approx(1.0, abs=1e-15)
    unit = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    P = polytope(unit)
    assert support_H(P, DevTensor2(1.0, 0.0), 1.0) == pytest.approx(oracles.polytope_support(unit, (1.0, 0.0), 1.0))
    assert support_H(P, DevTensor2(1.0, 0.0), 1.0) == pytest.approx(2.0)


def test_a_K_examples():
    assert a_K(Ball(1.0)) == 1.0
    assert a_K(Ellipsoid(1.0, 0.5)) == 0.5
    assert a_K(Ball(2.0)) == 2.0


def test_potential_examples():
    V = SqrtPotential(0.5)
    assert V_eval(V, 0.0) == 0.0
    assert V_eval(V, SQRT3) == pytest.approx(-0.5)
    assert V_eval(V, 1e9) / 1e9 == pytest.approx(-0.5, rel=1e-8)
    assert V_inf(V, 0.0) == 0.0
    assert V_inf(V, -2.0) == -1.0
    assert V_inf(V, 1.0) == -0.5


def test_G_inf_examples():
    K, V = Ball(1.0), SqrtPotential(0.5)
    assert G_inf(K, V, DevTensor2(0, 0), 0.0) == 0.0
    assert G_inf(K, V, DevTensor2(0, 0), 1.0) == pytest.approx(0.5)
    assert G_inf(K, V, E1, 1 / SQRT3) == pytest.approx(SQRT3 / 2, abs=1e-15)


def test_theta_hat_examples():
    K, V = Ball(1.0), SqrtPotential(0.5)
    assert theta_hat(K, V, DevTensor2(0, 0)) == 0.0
    assert theta_hat(K, V, E1) == pytest.approx(1 / SQRT3, abs=1e-12)


def test_theta_hat_ellipsoid_matches_scan():
    K, V = Ellipsoid(1.0, 0.5), SqrtPotential(0.25)
    scanned = oracles.theta_hat_scan(lambda t: float(K.support(E1.as_array(), t)), 0.25, theta_max=8.0)
    got = theta_hat(K, V, E1)
    assert got == pytest.approx(scanned, abs=1e-6)
    # stationarity s^2 t / sqrt(1 + s^2 t^2) = b_V gives 2/sqrt(3)
    assert got == pytest.approx(2 / SQRT3, abs=1e-11)


@pytest.mark.parametrize("K,V", CASES, ids=CASE_IDS)
def test_theta_hat_matches_scan(K, V):
    rng = np.random.default_rng(3)
    for c in rng.normal(size=(4, 2)):
        hi = K.outer_radius * oracles.frob(c) / (a_K(K) - V.b_V)
        scanned = oracles.theta_hat_scan(lambda t: float(K.support(c, t)), V.b_V, hi)
        got = theta_hat(K, V, c)
        # compare by value; polytope minimizers can be non-unique
        assert G_inf(K, V, c, got) <= G_inf(K, V, c, scanned) + 1e-10


def test_H_eff_examples():
    K, V = Ball(1.0), SqrtPotential(0.5)
    assert H_eff(K, V, E1 * 3.0, 0.0) == pytest.approx(3 * SQRT3 / 2, rel=1e-14)
    assert H_eff(K, V, DevTensor2(0, 0), 1.0) == pytest.approx(0.5)
    assert H_eff(K, V, E1, 5.0) == pytest.approx(math.sqrt(26) - 2.5, rel=1e-14)
    assert H_eff(K, V, E1, 5.0) >= SQRT3 / 2


def test_decompose_examples():
    K, V = Ball(1.0), SqrtPotential(0.5)
    d = decompose_increment(K, V, DevTensor2(0, 0), 0.0)
    assert (d.alpha, d.theta_hat, d.value) == (0.5, 0.0, 0.0)
    d = decompose_increment(K, V, E1, 0.0)
    assert d.alpha == 0.5
    assert d.theta_hat == pytest.approx(1 / SQRT3, abs=1e-12)
    assert d.value == pytest.approx(SQRT3 / 2, abs=1e-12)
    d = decompose_increment(K, V, E1, 1 / (2 * SQRT3))
    assert d.alpha == pytest.approx(0.75, abs=1e-11)
    assert (2 * d.alpha - 1) * d.theta_hat == pytest.approx(1 / (2 * SQRT3), abs=1e-14)
    d = decompose_increment(K, V, E1, -2.0)
    assert (d.alpha, d.theta_hat) == (0.0, 2.0)


def test_keff_examples():
    K, V = Ball(1.0), SqrtPotential(0.5)
    assert keff_contains(K, V, DevTensor2(0, 0), 0.0)
    assert keff_contains(K, V, E1 * (SQRT3 / 2), 0.0)
    assert not keff_contains(K, V, DevTensor2(0, 0), 0.6)
    assert keff_contains(K, V, DevTensor2(0, 0), 0.5)


# ---------------------------------------------------------------- construction checks


def test_ball_and_ellipsoid_validation():
    with pytest.raises(ValueError):
        Ball(0.0)
    with pytest.raises(ValueError):
        Ellipsoid(1.0, -1.0)


def test_polytope_is_flagged_and_checked():
    with pytest.warns(NonConformingYieldSet):
        Polytope(OCTA)
    # not symmetric under zeta -> -zeta
    with pytest.raises(ValueError):
        polytope([[0.5, 0, 0.1], [-0.5, 0, 0.1], [0, 0.5, 0.1], [0, -0.5, 0.1], [0, 0, 1], [0, 0, -0.5]])
    # origin on the boundary
    with pytest.raises(ValueError):
        polytope([[0, 0, 1], [0, 0, -1], [0.5, 0, 0], [0, 0.5, 0], [0.5, 0.5, 0]])


def test_polytope_radii():
    P = polytope(OCTA)
    # vertex (0.5, 0, 0) has norm 0.5*sqrt(2); the zeta vertex has norm 1
    assert P.outer_radius == pytest.approx(1.0)
    assert 0 < P.inner_radius <= P.outer_radius


def test_material_rejects_large_softening():
    with pytest.raises(ValueError, match="softening asymptote must be below yield height a_K"):
        MaterialModel(Elasticity(1, 1), Ball(1.0), SqrtPotential(1.0))
    with pytest.raises(ValueError):
        MaterialModel(Elasticity(1, 1), Ellipsoid(1.0, 0.5), SqrtPotential(0.6))


def test_sqrt_potential_constants():
    V = SqrtPotential(0.5)
    assert V.M_V == 0.5
    t = np.linspace(-50, 50, 2001)
    d = V.derivative(t)
    assert np.all(np.diff(d) <= 0)
    assert d[0] == pytest.approx(0.5, abs=1e-3) and d[-1] == pytest.approx(-0.5, abs=1e-3)


def test_tabulated_potential():
    t = np.linspace(-200, 200, 8001)
    good = TabulatedPotential(t, 0.5 * (1 - np.sqrt(1 + t**2)))
    assert float(good.value(1.0)) == pytest.approx(0.5 * (1 - math.sqrt(2)), abs=1e-3)
    assert good.b_V == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(ValueError):
        TabulatedPotential(t, 0.5 * (np.sqrt(1 + t**2) - 1))  # convex
    with pytest.raises(ValueError):
        TabulatedPotential(t, np.minimum(0.5 * t, -0.3 * t))  # end slopes +0.5 and -0.3


def test_effective_radius():
    assert effective_radius(Ball(1.0), SqrtPotential(0.5)) == pytest.approx(SQRT3 / 2, abs=1e-15)
    with pytest.raises(ValueError):
        effective_radius(polytope(OCTA), SqrtPotential(0.3))


@pytest.mark.parametrize("K,V", CASES, ids=CASE_IDS)
def test_coercivity_constant_positive(K, V):
    assert coercivity_constant(K, V, n=5000) > 0


# ---------------------------------------------------------------- properties


@given(case, pairs, st.floats(min_value=0.0, max_value=1e3))
def test_homogeneity(kv, x, t):
    K, V = kv
    c, th = vec(x), x[2]
    for f in (lambda a, b: K.support(a, b), lambda a, b: H_eff(K, V, a, b)):
        base = float(f(c, th))
        assert float(f(t * c, t * th)) == pytest.approx(t * base, rel=1e-11, abs=1e-12 * max(1, t))


@given(case, pairs, pairs)
def test_triangle_inequality(kv, x, y):
    K, V = kv
    c1, c2 = vec(x), vec(y)
    for f in (lambda a, b: float(K.support(a, b)), lambda a, b: float(H_eff(K, V, a, b))):
        lhs = f(c1 + c2, x[2] + y[2])
        rhs = f(c1, x[2]) + f(c2, y[2])
        assert lhs <= rhs + 1e-10 * (1 + rhs)


@given(case, pairs)
def test_evenness(kv, x):
    K, V = kv
    c, th = vec(x), x[2]
    assert K.support(c, th) == pytest.approx(K.support(c, -th), rel=1e-13, abs=1e-13)
    assert H_eff(K, V, c, th) == pytest.approx(H_eff(K, V, c, -th), rel=1e-13, abs=1e-13)


@given(case, pairs)
def test_two_sided_bound(kv, x):
    K, _ = kv
    c, th = vec(x), x[2]
    r = math.hypot(float(oracles.frob(c)), th)
    h = float(K.support(c, th))
    tiny = 1e-150  # squares underflow below this
    assert K.inner_radius * r * (1 - 1e-12) - tiny <= h <= K.outer_radius * r * (1 + 1e-12) + tiny
    assert h >= a_K(K) * abs(th) * (1 - 1e-12) - tiny


@given(strict_case, pairs)
def test_effective_strictly_below(kv, x):
    K, V = kv
    c, th = vec(x), x[2]
    assume(float(oracles.frob(c)) + abs(th) > 1e-6)
    assert H_eff(K, V, c, th) < K.support(c, th)
    assert H_eff(K, V, c, th) <= G_inf(K, V, c, th) + 1e-12


def test_polytope_facet_gives_no_strict_gap():
    # the paired vertices (0.4, 0.1, +-0.6) sit above b_V = 0.5, so theta_hat = 0 here
    K, V = CASES[5]
    c = np.array([0.4, 0.1])
    assert theta_hat(K, V, c) == pytest.approx(0.0, abs=1e-12)
    assert H_eff(K, V, c, 0.0) == pytest.approx(float(K.support(c, 0.0)), abs=1e-12)


@given(strict_case, st.tuples(comp, comp).filter(lambda c: max(abs(c[0]), abs(c[1])) > 1e-6))
def test_flat_value_strictly_below_G_inf(kv, c):
    K, V = kv
    c = np.array(c)
    assert H_eff(K, V, c, 0.0) < G_inf(K, V, c, 0.0)


@given(case, pairs, st.floats(min_value=0.0, max_value=10.0))
def test_nondecreasing_in_theta(kv, x, extra):
    K, V = kv
    c, th = vec(x), abs(x[2])
    h0, h1, h2 = (float(H_eff(K, V, c, t)) for t in (0.0, th, th + extra))
    assert h2 >= h1 - 1e-11 * (1 + h1)
    assert h1 >= h0 - 1e-11 * (1 + h0)


@given(case, pairs)
def test_decomposition_reconstructs(kv, x):
    K, V = kv
    c, th = DevTensor2(*x[:2]), x[2]
    d = decompose_increment(K, V, c, th)
    assert 0.0 <= d.alpha <= 1.0
    assert (2 * d.alpha - 1) * d.theta_hat == pytest.approx(th, abs=1e-12 * (1 + abs(th)))
    assert d.value == pytest.approx(float(H_eff(K, V, c, th)), rel=1e-12, abs=1e-12)


@given(case, pairs)
def test_maximizer_attains_H_eff(kv, x):
    K, V = kv
    c, th = vec(x), x[2]
    sigma, zeta = H_eff_maximizer(K, V, c, th)
    assert keff_contains(K, V, sigma, zeta) or keff_contains(K, V, sigma * (1 - 1e-9), zeta * (1 - 1e-9))
    val = 2 * float(np.dot(sigma, c)) + float(zeta) * th
    assert val == pytest.approx(float(H_eff(K, V, c, th)), rel=1e-9, abs=1e-9)


def test_keff_membership_matches_explicit_ball_formula():
    K, V = Ball(1.0), SqrtPotential(0.5)
    rng = np.random.default_rng(11)
    sig = rng.normal(size=(20000, 2)) * 0.5
    z = rng.uniform(-0.8, 0.8, size=20000)
    got = keff_contains(K, V, sig, z)
    want = oracles.ball_keff_explicit(oracles.frob(sig), z)
    assert np.array_equal(got, want)


# ---------------------------------------------------------------- envelope oracle


def test_envelope_oracle_ball():
    K, V = Ball(1.0), SqrtPotential(0.5)
    env = envelope_oracle(K, V, E1)
    i = int(np.argmin(abs(env.s - 1.0)))
    j = int(np.argmin(abs(env.theta)))
    tol = 3 * env.spacing * K.outer_radius
    assert env.values[i, j] == pytest.approx(SQRT3 / 2 * env.s[i], abs=tol)
    # along s = 0 the function is already convex in theta
    assert np.allclose(env.values[0], (a_K(K) - V.b_V) * np.abs(env.theta), atol=1e-12)


def test_envelope_oracle_rejects_small_grid():
    with pytest.raises(ValueError):
        envelope_oracle(Ball(1.0), SqrtPotential(0.5), E1, n_s=7)
    with pytest.raises(ValueError):
        envelope_oracle(Ball(1.0), SqrtPotential(0.5), DevTensor2(1.0, 0.0))
