import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softrelax.tensors import DevTensor2, Elasticity, SymTensor2, apply_C, deviatoric, identity, quad_Q

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)
syms = st.builds(SymTensor2, finite, finite, finite)
moduli = st.floats(min_value=1e-3, max_value=1e3)
elast = st.builds(Elasticity, moduli, moduli)


def close(a: SymTensor2, b: SymTensor2, tol=1e-12):
    scale = max(1.0, a.norm(), b.norm())
    return (a - b).norm() <= tol * scale


def test_deviatoric_examples():
    assert deviatoric(identity()) == DevTensor2(0.0, 0.0)
    assert deviatoric(SymTensor2(2.0, 0.0, 0.0)).as_sym() == SymTensor2(1.0, 0.0, -1.0)
    assert deviatoric(SymTensor2(1.0, 3.0, -1.0)).as_sym() == SymTensor2(1.0, 3.0, -1.0)


def test_from_matrix_takes_symmetric_part():
    assert SymTensor2.from_matrix([[1.0, 2.0], [0.0, 3.0]]) == SymTensor2(1.0, 1.0, 3.0)
    with pytest.raises(ValueError):
        SymTensor2.from_matrix(np.eye(3))


def test_dev_norm_and_product_use_both_off_diagonals():
    d = DevTensor2(1.0, 2.0)
    assert d.norm() == pytest.approx(d.as_sym().norm(), abs=0)
    assert d.ddot(DevTensor2(0.5, -1.0)) == pytest.approx(d.as_sym().ddot(DevTensor2(0.5, -1.0).as_sym()))
    assert d.as_sym().trace == 0.0


def test_apply_C_examples():
    el = Elasticity(1.0, 1.0)
    assert apply_C(el, SymTensor2(1.0, 0.0, -1.0)) == SymTensor2(2.0, 0.0, -2.0)
    assert apply_C(el, identity()) == SymTensor2(2.0, 0.0, 2.0)
    # mu=2, kappa=3 on [[1,1],[1,0]]: 4 dev(e) + 3 I
    el = Elasticity(2.0, 3.0)
    e = SymTensor2(1.0, 1.0, 0.0)
    assert apply_C(el, e) == SymTensor2(5.0, 4.0, 1.0)
    assert quad_Q(el, e) == pytest.approx(6.5)
    assert apply_C(el, e).ddot(e) == pytest.approx(2 * quad_Q(el, e))


def test_quad_Q_examples():
    el = Elasticity(1.0, 1.0)
    assert quad_Q(el, SymTensor2.zero()) == 0.0
    assert quad_Q(el, SymTensor2(1.0, 0.0, -1.0)) == pytest.approx(2.0)
    assert quad_Q(el, identity()) == pytest.approx(2.0)


@pytest.mark.parametrize("mu,kappa", [(0.0, 1.0), (1.0, -1.0), (math.inf, 1.0), (math.nan, 1.0)])
def test_elasticity_rejects_bad_moduli(mu, kappa):
    with pytest.raises(ValueError):
        Elasticity(mu, kappa)


@given(syms)
def test_split_recovers_matrix(m):
    back = deviatoric(m).as_sym() + (0.5 * m.trace) * identity()
    assert close(back, m)


@given(elast, syms)
def test_energy_bounds(el, e):
    q = quad_Q(el, e)
    n2 = e.ddot(e)
    assert el.alpha_C * n2 * (1 - 1e-12) <= q <= el.beta_C * n2 * (1 + 1e-12) + 1e-300


@given(elast, syms)
def test_stress_norm_bound(el, e):
    assert apply_C(el, e).norm() <= 2 * el.beta_C * e.norm() * (1 + 1e-12)


@given(elast, syms, syms, finite, finite)
def test_apply_C_linear(el, e1, e2, a, b):
    lhs = apply_C(el, a * e1 + b * e2)
    rhs = a * apply_C(el, e1) + b * apply_C(el, e2)
    scale = max(1.0, abs(a) * e1.norm() + abs(b) * e2.norm()) * 2 * el.beta_C
    assert (lhs - rhs).norm() <= 1e-12 * scale


@given(elast, syms)
def test_deviatoric_subspace_invariant(el, e):
    s = apply_C(el, deviatoric(e).as_sym())
    assert abs(s.trace) <= 1e-12 * max(1.0, s.norm())
    assert quad_Q(el, e) == pytest.approx(0.5 * apply_C(el, e).ddot(e), rel=1e-12, abs=1e-12)
