"""Time-incremental quasistatic evolution for spatially homogeneous states.

All extensive quantities are per unit area. At each step the plastic strain
solves the relaxed incremental problem

    min_p  Q(Ew - p) + H_eff(p - p_prev, 0),

and the internal variable keeps its previous value; the softening is carried
entirely by the concentration part of the Young-measure summary.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import (
    H_eff,
    MaterialModel,
    _ddot,
    _fro,
    effective_radius,
    keff_contains,
    theta_hat,
    unit_deviators,
)
from .tensors import DevTensor2, SymTensor2, apply_C, deviatoric

log = logging.getLogger(__name__)

__all__ = [
    "SolverError",
    "MeasureSummary",
    "EvolutionState",
    "MonotoneAffine",
    "PiecewiseLinear",
    "TimeGrid",
    "initial_state",
    "radial_return",
    "prox_solve",
    "incremental_step",
    "update_measure_and_energies",
    "run_evolution",
    "energy_balance_residual",
    "stability_check",
]


class SolverError(RuntimeError):
    """Incremental solver failed; carries the last iterate and its residual."""

    def __init__(self, message, last_iterate=None, residual=float("nan"), step_index=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.step_index = step_index


@dataclass(frozen=True)
class MeasureSummary:
    """Homogeneous Young-measure state: an atom plus a symmetric pair of concentrations.

    The concentrations sit at ``(conc_p, +conc_zhat)`` with weight ``alpha``
    and at ``(conc_p, -conc_zhat)`` with weight ``1 - alpha``.
    """

    atom_p: DevTensor2
    atom_z: float
    conc_p: DevTensor2 = DevTensor2(0.0, 0.0)
    conc_zhat: float = 0.0
    alpha: float = 0.5
    path_dependent: bool = False

    @property
    def barycentre_p(self) -> DevTensor2:
        return self.atom_p + self.conc_p

    @property
    def barycentre_z(self) -> float:
        return self.atom_z + (2 * self.alpha - 1) * self.conc_zhat

    def v_functional(self, model: MaterialModel) -> float:
        """Softening energy: V at the atom plus the recession part of the concentrations."""
        b = model.b_V
        conc = self.alpha * (-b * self.conc_zhat) + (1 - self.alpha) * (-b * self.conc_zhat)
        return float(model.potential.value(self.atom_z)) + conc


@dataclass(frozen=True)
class EvolutionState:
    t: float
    e: SymTensor2
    p: DevTensor2
    sigma: SymTensor2
    measure: MeasureSummary
    diss_H: float = 0.0
    work: float = 0.0
    v_total: float = 0.0
    work_exact: bool = True
    work_error: float = 0.0

    @property
    def Q(self) -> float:
        return 0.5 * self.sigma.ddot(self.e)

    @property
    def sigma_dev_norm(self) -> float:
        return deviatoric(self.sigma).norm()


# ---------------------------------------------------------------------------
# load programs


@dataclass(frozen=True)
class MonotoneAffine:
    """Ew(t) = t * sym(xi0)."""

    xi0: tuple  # 2x2 nested tuple

    def __init__(self, xi0):
        object.__setattr__(self, "xi0", tuple(map(tuple, np.asarray(xi0, float).tolist())))

    @property
    def xi0s(self) -> SymTensor2:
        return SymTensor2.from_matrix(self.xi0)

    def strain(self, t: float) -> SymTensor2:
        if t < 0:
            raise ValueError("load times must be nonnegative")
        return t * self.xi0s

    def knot_times(self):
        return ()


@dataclass(frozen=True)
class PiecewiseLinear:
    knots: tuple  # ((t, SymTensor2), ...)

    def __init__(self, knots: Sequence):
        ks = tuple((float(t), m if isinstance(m, SymTensor2) else SymTensor2.from_matrix(m)) for t, m in knots)
        ts = [t for t, _ in ks]
        if len(ks) < 2 or ts[0] < 0 or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("knot times must be nonnegative and strictly increasing (>= 2 knots)")
        object.__setattr__(self, "knots", ks)

    def strain(self, t: float) -> SymTensor2:
        ts = [k[0] for k in self.knots]
        if t <= ts[0]:
            return self.knots[0][1]
        if t >= ts[-1]:
            return self.knots[-1][1]
        i = int(np.searchsorted(ts, t, side="right")) - 1
        (t0, m0), (t1, m1) = self.knots[i], self.knots[i + 1]
        w = (t - t0) / (t1 - t0)
        return m0 + w * (m1 - m0)

    def knot_times(self):
        return tuple(k[0] for k in self.knots)


@dataclass(frozen=True)
class TimeGrid:
    times: tuple

    def __init__(self, times):
        ts = tuple(float(t) for t in times)
        if len(ts) < 1 or ts[0] < 0 or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("time grid must be nonnegative and strictly increasing")
        object.__setattr__(self, "times", ts)

    @classmethod
    def uniform(cls, t_end: float, steps: int, t_start: float = 0.0) -> "TimeGrid":
        if steps < 1 or not t_end > t_start:
            raise ValueError("uniform grid needs steps >= 1 and t_end > t_start")
        return cls(np.linspace(t_start, t_end, steps + 1))

    def refined(self) -> "TimeGrid":
        t = np.asarray(self.times)
        mids = 0.5 * (t[1:] + t[:-1])
        return TimeGrid(np.sort(np.concatenate([t, mids])))

    def with_knots(self, knots) -> "TimeGrid":
        t = np.asarray(self.times)
        extra = [k for k in knots if t[0] < k < t[-1]]
        return TimeGrid(np.unique(np.concatenate([t, extra])))


# ---------------------------------------------------------------------------
# local solvers


def radial_return(mu: float, r_eff: float, p_prev: DevTensor2, Ew: SymTensor2) -> DevTensor2:
    """Closed-form minimizer for isotropic C and H_eff(., 0) = r_eff |.|."""
    trial = 2.0 * mu * (deviatoric(Ew) - p_prev)
    n = trial.norm()
    if n <= r_eff:
        return p_prev
    return p_prev + ((n - r_eff) / (2.0 * mu * n)) * trial


def _h0(model, c):
    return H_eff(model.yield_set, model.potential, c, np.zeros(c.shape[:-1]))


def _projection_gap(model, x, phi):
    """x : xi(phi) - H_eff(xi(phi), 0) and its angular derivative.

    K_eff(0) is the section K(b_V), so its support point in direction xi is
    the section maximizer.
    """
    u = unit_deviators(phi)
    du = np.stack([-np.sin(phi), np.cos(phi)], axis=-1) / math.sqrt(2.0)
    sig = model.yield_set.section_maximizer(u, model.b_V)
    return _ddot(x - sig, u), _ddot(x - sig, du)


def _distance_to_keff0(model, x, n_angles=360, tol=1e-15, max_iter=200):
    """Distance of a stress deviator from K_eff(0) and the outward unit normal angle.

    The distance is the maximum over unit directions of x:xi - H_eff(xi, 0);
    that function is concave wherever it is positive, so a coarse angular scan
    followed by bisection on its derivative locates the maximum.
    """
    phi = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    g, _ = _projection_gap(model, x, phi)
    i = int(np.argmax(g))
    h = 2 * np.pi / n_angles
    lo, hi = phi[i] - h, phi[i] + h
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        _, dg = _projection_gap(model, x, np.array(mid))
        if dg > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    best = 0.5 * (lo + hi)
    g_best, _ = _projection_gap(model, x, np.array(best))
    if g[i] > g_best:
        best, g_best = phi[i], g[i]
    return float(g_best), float(best), it


def prox_solve(model: MaterialModel, p_prev: DevTensor2, Ew: SymTensor2, tol: float = 1e-10, max_iter: int = 200) -> DevTensor2:
    """Numerical minimizer of Q(Ew - p) + H_eff(p - p_prev, 0) for any yield set.

    The optimal stress deviator is the Euclidean projection of the trial stress
    onto K_eff(0); the plastic increment is the projection residual over 2 mu.
    """
    mu = model.elasticity.mu
    trial = 2.0 * mu * (deviatoric(Ew) - p_prev)
    x = trial.as_array()
    if keff_contains(model.yield_set, model.potential, x, 0.0):
        return p_prev
    dist, phi, iters = _distance_to_keff0(model, x, max_iter=max_iter)
    normal = unit_deviators(phi)
    dp = DevTensor2.from_array(dist * normal / (2.0 * mu))
    p = p_prev + dp
    sigma_d = x - dist * normal
    # optimality certificate: sigma_d admissible and complementary to dp
    outside, _, _ = _distance_to_keff0(model, sigma_d, max_iter=max_iter)
    comp = abs(_ddot(sigma_d, dp.as_array()) - float(_h0(model, dp.as_array())))
    residual = max(outside, comp / (1.0 + dp.norm()))
    if residual > tol or iters >= max_iter:
        raise SolverError(
            f"prox_solve did not certify optimality (residual {residual:.3e}, {iters} iterations)",
            last_iterate=p,
            residual=residual,
        )
    return p


# ---------------------------------------------------------------------------
# stepping


def initial_state(model: MaterialModel, load, t0: float = 0.0, p0: DevTensor2 = DevTensor2(0.0, 0.0), z0: float = 0.0) -> EvolutionState:
    Ew = load.strain(t0)
    e = Ew - p0.as_sym()
    measure = MeasureSummary(atom_p=p0, atom_z=float(z0))
    return EvolutionState(
        t=float(t0),
        e=e,
        p=p0,
        sigma=apply_C(model.elasticity, e),
        measure=measure,
        v_total=measure.v_functional(model),
    )


def update_measure_and_energies(model: MaterialModel, state: EvolutionState, dp: DevTensor2):
    """Concentration update for a plastic increment with zero internal-variable increment.

    Returns ``(measure, diss_increment, v_increment)``; the two increments sum
    to H_eff(dp, 0).
    """
    K, V = model.yield_set, model.potential
    m = state.measure
    if dp.norm() == 0.0:
        return m, 0.0, 0.0
    th = float(theta_hat(K, V, dp))
    diss = float(K.support(dp.as_array(), th))
    dv = float(V.recession(th))
    path_dependent = m.path_dependent
    if m.conc_p.norm() > 0:
        cos = dp.ddot(m.conc_p) / (dp.norm() * m.conc_p.norm())
        path_dependent = path_dependent or cos < 1.0 - 1e-9
    new = replace(m, conc_p=m.conc_p + dp, conc_zhat=m.conc_zhat + th, alpha=0.5, path_dependent=path_dependent)
    return new, diss, dv


def _clamp_integral(c: float, k: float, r: float) -> float:
    """Integral over s in [0, 1] of clamp(c + k s, -r, r), k >= 0."""
    if k == 0.0:
        return min(max(c, -r), r)
    total = 0.0
    # breakpoints where the line crosses -r and r
    pts = sorted({0.0, 1.0, *[s for s in ((-r - c) / k, (r - c) / k) if 0.0 < s < 1.0]})
    for a, b in zip(pts, pts[1:]):
        m = c + k * 0.5 * (a + b)
        if m >= r:
            total += r * (b - a)
        elif m <= -r:
            total -= r * (b - a)
        else:
            total += (c + k * 0.5 * (a + b)) * (b - a)
    return total


def _exact_dev_work(mu, r_eff, sig_prev: DevTensor2, d: DevTensor2):
    """Deviatoric work along an affine strain step when the stress path stays on one line.

    Returns None if the previous stress and the strain increment are not colinear.
    """
    dn = d.norm()
    if dn == 0.0:
        return 0.0
    u = d * (1.0 / dn)
    c = sig_prev.ddot(u)
    perp = (sig_prev - c * u).norm()
    if perp > 1e-12 * max(1.0, sig_prev.norm()):
        return None
    return _clamp_integral(c, 2.0 * mu * dn, r_eff) * dn


def incremental_step(
    model: MaterialModel,
    state: EvolutionState,
    Ew_new: SymTensor2,
    t_new: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 200,
    integration: str = "exact",
) -> EvolutionState:
    """Advance one load increment of the relaxed incremental problem."""
    el = model.elasticity
    K, V = model.yield_set, model.potential
    Ew_old = state.e + state.p.as_sym()
    if K.isotropic:
        r_eff = effective_radius(K, V)
        p_new = radial_return(el.mu, r_eff, state.p, Ew_new)
    else:
        r_eff = None
        p_new = prox_solve(model, state.p, Ew_new, tol=tol, max_iter=max_iter)
    dp = p_new - state.p
    measure, ddiss, dv = update_measure_and_energies(model, state, dp)
    e_new = Ew_new - p_new.as_sym()
    sigma_new = apply_C(el, e_new)

    dE = Ew_new - Ew_old
    dwork = None
    if integration == "exact" and r_eff is not None:
        dev = _exact_dev_work(el.mu, r_eff, deviatoric(state.sigma), deviatoric(dE))
        if dev is not None:
            vol = el.kappa * (Ew_old.trace + 0.5 * dE.trace) * dE.trace
            dwork = dev + vol
    exact = dwork is not None
    if not exact:
        dwork = 0.5 * (state.sigma + sigma_new).ddot(dE)
        err = 0.5 * abs((sigma_new - state.sigma).ddot(dE))
    else:
        err = 0.0
    return EvolutionState(
        t=state.t if t_new is None else float(t_new),
        e=e_new,
        p=p_new,
        sigma=sigma_new,
        measure=measure,
        diss_H=state.diss_H + ddiss,
        work=state.work + dwork,
        v_total=state.v_total + dv,
        work_exact=state.work_exact and exact,
        work_error=state.work_error + err,
    )


def run_evolution(
    model: MaterialModel,
    load,
    grid: TimeGrid,
    p0: DevTensor2 = DevTensor2(0.0, 0.0),
    z0: float = 0.0,
    tol: float = 1e-10,
    max_iter: int = 200,
    integration: str = "exact",
    check_initial: bool = True,
    seed: int = 0,
) -> list[EvolutionState]:
    """Sequential incremental minimization over the time grid.

    Load knots are merged into the grid so every step sees an affine load.
    """
    grid = grid.with_knots(load.knot_times())
    times = grid.times
    state = initial_state(model, load, times[0], p0, z0)
    if check_initial:
        worst = stability_check(model, state, n_samples=2000, rng_seed=seed)
        if worst > 1e-12:
            raise ValueError(f"initial state is not globally stable (violation {worst:.3e})")
    record = [state]
    for i, t in enumerate(times[1:], start=1):
        try:
            state = incremental_step(model, state, load.strain(t), t_new=t, tol=tol, max_iter=max_iter, integration=integration)
        except SolverError as exc:
            exc.step_index = i
            raise
        record.append(state)
    if state.measure.path_dependent:
        log.warning("plastic increments changed direction; measure summary is path-dependent")
    return record


def energy_balance_residual(record: Sequence[EvolutionState], index: int = -1) -> float:
    """Q(e(T)) + D_H(T) + <{V}>(T) - Q(e(0)) - <{V}>(0) - W(T)."""
    a, b = record[0], record[index]
    return (b.Q + b.diss_H + b.v_total) - (a.Q + a.diss_H + a.v_total) - (b.work - a.work)


def stability_check(
    model: MaterialModel,
    state: EvolutionState,
    n_samples: int = 10000,
    rng_seed: int = 0,
    scales: Sequence[float] = (1e-4, 1e-2, 1.0, 1e2),
) -> float:
    """Worst global-stability violation over homogeneous perturbations.

    Each perturbation is a random deviator ``pt`` with ``et = -pt`` and a
    random ``zt``; the violation is
    ``Q(e) + V(z) - [Q(e - pt) + H(pt, zt) + V(z + zt)]``.
    Directions aligned with the stress deviator are probed in addition to the
    random ones. Returns the maximum, which is <= 0 for stable states.
    """
    el = model.elasticity
    K, V = model.yield_set, model.potential
    rng = np.random.default_rng(rng_seed)
    ed = deviatoric(state.e).as_array()
    z = state.measure.atom_z
    sd = deviatoric(state.sigma).as_array()
    n_sd = float(_fro(sd))
    worst = -np.inf
    for scale in scales:
        pt = rng.normal(size=(n_samples, 2)) * scale / math.sqrt(2.0)
        zt = rng.normal(size=n_samples) * scale
        if n_sd > 0:
            c = np.linspace(-1.0, 1.0, 41) * scale
            pa = np.broadcast_to(scale * sd / n_sd, (len(c), 2))
            pt = np.concatenate([pt, pa])
            zt = np.concatenate([zt, c])
        dQ = el.mu * (_fro(ed - pt) ** 2 - _fro(ed) ** 2)
        cost = dQ + K.support(pt, zt) + V.value(z + zt) - V.value(z)
        worst = max(worst, float(np.max(-cost)))
    return worst
