"""Dissipation geometry: yield sets, softening potentials and the effective dissipation.

Points of the product space ``M^2x2_D x R`` are passed either as
``(DevTensor2, float)`` pairs or as numpy arrays, the deviatoric part with a
trailing axis of length 2 holding ``(d11, d12)``. Array inputs give array
outputs; value-type inputs give floats.

The effective dissipation is the convex envelope of ``H + V_inf``. Its
convexification is one-dimensional in the internal variable: for fixed
``xi`` the function ``theta -> G_inf(xi, theta)`` is even and convex on each
half-line, so the envelope is flat on ``[-theta_hat, theta_hat]`` and equals
``G_inf`` outside.
"""
from __future__ import annotations

import abc
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .tensors import DevTensor2, Elasticity

__all__ = [
    "YieldSet",
    "Ball",
    "Ellipsoid",
    "Polytope",
    "NonConformingYieldSet",
    "SofteningPotential",
    "SqrtPotential",
    "TabulatedPotential",
    "MaterialModel",
    "IncrementDecomposition",
    "EnvelopeGrid",
    "support_H",
    "a_K",
    "V_eval",
    "V_inf",
    "G_inf",
    "theta_hat",
    "H_eff",
    "H_eff_maximizer",
    "decompose_increment",
    "keff_contains",
    "keff_boundary_samples",
    "effective_radius",
    "envelope_oracle",
    "coercivity_constant",
]

SQRT2 = math.sqrt(2.0)


def _comp(xi):
    """Return (component array, is_scalar_input)."""
    if isinstance(xi, DevTensor2):
        return np.array([xi.d11, xi.d12]), True
    c = np.asarray(xi, dtype=float)
    if c.shape[-1:] != (2,):
        raise ValueError(f"deviatoric arrays need a trailing axis of length 2, got {c.shape}")
    return c, False


def _fro(c):
    return np.sqrt(2.0 * np.sum(c * c, axis=-1))


def _ddot(a, b):
    return 2.0 * np.sum(a * b, axis=-1)


def _out(x, scalar):
    return float(x) if scalar else x


def unit_deviators(phi):
    """Unit-norm deviators parameterized by angle."""
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1) / SQRT2


# ---------------------------------------------------------------------------
# yield sets


class NonConformingYieldSet(UserWarning):
    """The yield set violates a standing smoothness/strict-convexity assumption."""


class YieldSet(abc.ABC):
    """Closed convex set K of admissible (stress deviator, internal stress) pairs."""

    #: True when H(xi, theta) depends on xi only through |xi|
    isotropic: bool = False

    @abc.abstractmethod
    def support(self, xi, theta):
        """Support function sup_{(s,z) in K} s:xi + z theta, vectorized."""

    @abc.abstractmethod
    def maximizer(self, xi, theta):
        """A point (sigma, zeta) of K attaining the support value.

        At ties the point with the largest zeta is returned, so that zeta is
        the right derivative of the support function in theta.
        """

    @abc.abstractmethod
    def contains(self, sigma, zeta, tol: float = 1e-12):
        """Membership test, vectorized."""

    @abc.abstractmethod
    def section_maximizer(self, xi, zeta: float):
        """Stress deviator maximizing sigma:xi over the section K(zeta)."""

    @property
    @abc.abstractmethod
    def inner_radius(self) -> float:
        """Radius A of a centred ball contained in K."""

    @property
    @abc.abstractmethod
    def outer_radius(self) -> float:
        """Radius B of a centred ball containing K."""

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(YieldSet):
    radius: float
    isotropic = True

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    def support(self, xi, theta):
        c, _ = _comp(xi)
        return self.radius * np.sqrt(2.0 * np.sum(c * c, axis=-1) + np.asarray(theta, float) ** 2)

    def maximizer(self, xi, theta):
        c, _ = _comp(xi)
        theta = np.asarray(theta, float)
        n = np.sqrt(2.0 * np.sum(c * c, axis=-1) + theta**2)
        safe = np.where(n > 0, n, 1.0)
        sigma = self.radius * c / safe[..., None]
        zeta = np.where(n > 0, self.radius * theta / safe, self.radius)
        return sigma, zeta

    def contains(self, sigma, zeta, tol=1e-12):
        c, _ = _comp(sigma)
        return 2.0 * np.sum(c * c, axis=-1) + np.asarray(zeta, float) ** 2 <= self.radius**2 * (1 + tol)

    def section_maximizer(self, xi, zeta):
        c, _ = _comp(xi)
        n = _fro(c)
        r = math.sqrt(max(self.radius**2 - zeta**2, 0.0))
        return r * c / np.where(n > 0, n, 1.0)[..., None]

    @property
    def inner_radius(self):
        return self.radius

    @property
    def outer_radius(self):
        return self.radius

    def to_dict(self):
        return {"type": "ball", "radius": self.radius}


@dataclass(frozen=True)
class Ellipsoid(YieldSet):
    """K = {|sigma|^2/s_sigma^2 + zeta^2/s_zeta^2 <= 1}."""

    s_sigma: float
    s_zeta: float
    isotropic = True

    def __post_init__(self):
        if not (self.s_sigma > 0 and self.s_zeta > 0):
            raise ValueError("ellipsoid axis scalings must be positive")

    def support(self, xi, theta):
        c, _ = _comp(xi)
        theta = np.asarray(theta, float)
        return np.sqrt(self.s_sigma**2 * 2.0 * np.sum(c * c, axis=-1) + self.s_zeta**2 * theta**2)

    def maximizer(self, xi, theta):
        c, _ = _comp(xi)
        theta = np.asarray(theta, float)
        h = self.support(c, theta)
        safe = np.where(h > 0, h, 1.0)
        sigma = self.s_sigma**2 * c / safe[..., None]
        zeta = np.where(h > 0, self.s_zeta**2 * theta / safe, self.s_zeta)
        return sigma, zeta

    def contains(self, sigma, zeta, tol=1e-12):
        c, _ = _comp(sigma)
        zeta = np.asarray(zeta, float)
        return 2.0 * np.sum(c * c, axis=-1) / self.s_sigma**2 + zeta**2 / self.s_zeta**2 <= 1 + tol

    def section_maximizer(self, xi, zeta):
        c, _ = _comp(xi)
        n = _fro(c)
        r = self.s_sigma * math.sqrt(max(1.0 - zeta**2 / self.s_zeta**2, 0.0))
        return r * c / np.where(n > 0, n, 1.0)[..., None]

    @property
    def inner_radius(self):
        return min(self.s_sigma, self.s_zeta)

    @property
    def outer_radius(self):
        return max(self.s_sigma, self.s_zeta)

    def to_dict(self):
        return {"type": "ellipsoid", "s_sigma": self.s_sigma, "s_zeta": self.s_zeta}


class Polytope(YieldSet):
    """Convex hull of vertices given as rows ``(d11, d12, zeta)``.

    Polytopes are not strictly convex, so they only serve as an exact
    brute-force test harness; construction emits ``NonConformingYieldSet``.
    """

    def __init__(self, vertices, warn: bool = True):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) < 4:
            raise ValueError("polytope needs at least 4 vertices given as (d11, d12, zeta) rows")
        self.vertices = v
        # orthonormal coordinates: |sigma|^2 = 2 d11^2 + 2 d12^2
        y = v * np.array([SQRT2, SQRT2, 1.0])
        hull = ConvexHull(y)
        self._normals = hull.equations[:, :3]
        self._offsets = hull.equations[:, 3]
        self._sections = {}
        self._A = float(np.min(-self._offsets))
        self._B = float(np.max(np.linalg.norm(y, axis=1)))
        if self._A <= 0:
            raise ValueError("polytope must contain a ball around the origin")
        mirrored = v * np.array([1.0, 1.0, -1.0])
        if not np.all(self.contains(mirrored[:, :2], mirrored[:, 2], tol=1e-9)):
            raise ValueError("polytope is not symmetric under zeta -> -zeta")
        if not np.all(self.contains(np.zeros((len(v), 2)), v[:, 2], tol=1e-9)):
            raise ValueError("polytope violates (sigma, zeta) in K => (0, zeta) in K")
        if warn:
            warnings.warn(
                "polytope yield sets are not strictly convex; tangency directions "
                "and increment decompositions may be non-unique",
                NonConformingYieldSet,
                stacklevel=2,
            )

    def _values(self, c, theta):
        v = self.vertices
        return 2.0 * (c[..., 0, None] * v[:, 0] + c[..., 1, None] * v[:, 1]) + np.asarray(theta, float)[..., None] * v[:, 2]

    def support(self, xi, theta):
        c, _ = _comp(xi)
        return np.max(self._values(c, theta), axis=-1)

    def maximizer(self, xi, theta):
        c, _ = _comp(xi)
        vals = self._values(c, theta)
        top = np.max(vals, axis=-1, keepdims=True)
        scale = np.maximum(1.0, np.abs(top))
        tied = vals >= top - 1e-12 * scale
        idx = np.argmax(np.where(tied, self.vertices[:, 2], -np.inf), axis=-1)
        best = self.vertices[idx]
        return best[..., :2], best[..., 2]

    def contains(self, sigma, zeta, tol=1e-12):
        c, _ = _comp(sigma)
        zeta = np.asarray(zeta, float)
        y = np.concatenate([SQRT2 * np.broadcast_to(c, zeta.shape + (2,)), zeta[..., None]], axis=-1)
        return np.all(y @ self._normals.T + self._offsets <= tol, axis=-1)

    def section_vertices(self, zeta: float) -> np.ndarray:
        """Vertices (d11, d12) of the polygon K(zeta), for |zeta| < a_K."""
        key = float(zeta)
        if key not in self._sections:
            hs = np.column_stack([self._normals[:, :2], self._normals[:, 2] * key + self._offsets])
            y = HalfspaceIntersection(hs, np.zeros(2)).intersections
            self._sections[key] = y / SQRT2
        return self._sections[key]

    def section_maximizer(self, xi, zeta):
        c, _ = _comp(xi)
        w = self.section_vertices(zeta)
        vals = 2.0 * (c[..., 0, None] * w[:, 0] + c[..., 1, None] * w[:, 1])
        return w[np.argmax(vals, axis=-1)]

    @property
    def inner_radius(self):
        return self._A

    @property
    def outer_radius(self):
        return self._B

    def to_dict(self):
        return {"type": "polytope", "vertices": self.vertices.tolist()}

    def __repr__(self):
        return f"Polytope({len(self.vertices)} vertices)"


# ---------------------------------------------------------------------------
# softening potentials


class SofteningPotential(abc.ABC):
    b_V: float

    @abc.abstractmethod
    def value(self, theta):
        ...

    @abc.abstractmethod
    def derivative(self, theta):
        ...

    def recession(self, theta):
        return -self.b_V * np.abs(theta)


def _check_recession_gap(pot: SofteningPotential, strict: bool):
    th = np.linspace(-20.0, 20.0, 81)
    base, inc = np.meshgrid(th, th[th != 0])
    gap = pot.value(base + inc) - pot.value(base) - pot.recession(inc)
    if np.any(gap < -1e-12) or (strict and np.any(gap <= 0)):
        raise ValueError("softening potential violates the strict recession gap V_inf(d) < V(t+d) - V(t)")


@dataclass(frozen=True)
class SqrtPotential(SofteningPotential):
    """V(theta) = b_V (1 - sqrt(1 + theta^2)): even, strictly concave, slope -> -+b_V."""

    b_V: float

    def __post_init__(self):
        if not self.b_V > 0:
            raise ValueError(f"softening asymptote b_V must be positive, got {self.b_V}")
        _check_recession_gap(self, strict=True)

    def value(self, theta):
        return self.b_V * (1.0 - np.sqrt(1.0 + np.asarray(theta, float) ** 2))

    def derivative(self, theta):
        theta = np.asarray(theta, float)
        return -self.b_V * theta / np.sqrt(1.0 + theta**2)

    @property
    def M_V(self) -> float:
        # sup |V''| attained at theta = 0
        return self.b_V

    def to_dict(self):
        return {"type": "sqrt", "b_V": self.b_V}


class TabulatedPotential(SofteningPotential):
    """Piecewise-linear V from a table, extended linearly beyond the end knots.

    The table must be concave and its end slopes must be +b_V (left) and
    -b_V (right), both to within ``tol``.
    """

    def __init__(self, theta, values, tol: float = 1e-6):
        th = np.asarray(theta, float)
        vals = np.asarray(values, float)
        if th.ndim != 1 or th.shape != vals.shape or len(th) < 3 or np.any(np.diff(th) <= 0):
            raise ValueError("tabulated potential needs >= 3 strictly increasing knots")
        slopes = np.diff(vals) / np.diff(th)
        if np.any(np.diff(slopes) > tol):
            raise ValueError("tabulated potential is not concave (V'' <= 0 violated)")
        if abs(slopes[0] + slopes[-1]) > tol or slopes[0] <= 0:
            raise ValueError("tabulated potential end slopes must be +b_V and -b_V with b_V > 0")
        self.theta = th
        self.values = vals
        self._slopes = slopes
        self.b_V = 0.5 * (slopes[0] - slopes[-1])
        _check_recession_gap(self, strict=False)

    def value(self, theta):
        t = np.asarray(theta, float)
        th, v, s = self.theta, self.values, self._slopes
        out = np.interp(t, th, v)
        out = np.where(t < th[0], v[0] + s[0] * (t - th[0]), out)
        return np.where(t > th[-1], v[-1] + s[-1] * (t - th[-1]), out)

    def derivative(self, theta):
        t = np.asarray(theta, float)
        i = np.clip(np.searchsorted(self.theta, t, side="right") - 1, 0, len(self._slopes) - 1)
        return self._slopes[i]

    def to_dict(self):
        return {"type": "tabulated", "theta": self.theta.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True)
class MaterialModel:
    elasticity: Elasticity
    yield_set: YieldSet
    potential: SofteningPotential

    def __post_init__(self):
        ak = a_K(self.yield_set)
        if not self.potential.b_V < ak:
            raise ValueError(
                f"softening asymptote must be below yield height a_K (b_V={self.potential.b_V}, a_K={ak})"
            )

    @property
    def b_V(self) -> float:
        return self.potential.b_V


# ---------------------------------------------------------------------------
# scalar building blocks


def support_H(K: YieldSet, xi, theta):
    c, scalar = _comp(xi)
    return _out(K.support(c, theta), scalar and np.ndim(theta) == 0)


def a_K(K: YieldSet) -> float:
    """Height of the projection of K onto the internal-stress axis."""
    return float(K.support(np.zeros(2), 1.0))


def V_eval(V: SofteningPotential, theta):
    out = V.value(theta)
    return float(out) if np.ndim(theta) == 0 else out


def V_inf(V: SofteningPotential, theta):
    out = V.recession(theta)
    return float(out) if np.ndim(theta) == 0 else out


def G_inf(K: YieldSet, V: SofteningPotential, xi, theta):
    c, scalar = _comp(xi)
    return _out(K.support(c, theta) + V.recession(theta), scalar and np.ndim(theta) == 0)


def theta_hat(K: YieldSet, V: SofteningPotential, xi, tol: float = 1e-12, max_iter: int = 200):
    """Minimizer over theta >= 0 of G_inf(xi, theta).

    Bisection on the sign of the right derivative ``zeta*(xi, theta) - b_V``;
    the bracket ``[0, B |xi| / (a_K - b_V)]`` holds because beyond it G_inf
    exceeds its value at theta = 0.
    """
    c, scalar = _comp(xi)
    b = V.b_V
    gap = a_K(K) - b
    if gap <= 0:
        raise ValueError("theta_hat needs b_V < a_K")
    lo = np.zeros(c.shape[:-1])
    hi = K.outer_radius * _fro(c) / gap
    # stricter of absolute and relative tol, but not below float resolution
    floor = np.maximum(np.minimum(tol, tol * hi), 8 * np.finfo(float).eps * hi)
    for _ in range(max_iter):
        if not np.any(hi - lo > floor):
            break
        mid = 0.5 * (lo + hi)
        _, zeta = K.maximizer(c, mid)
        rising = zeta - b >= 0
        hi = np.where(rising, mid, hi)
        lo = np.where(rising, lo, mid)
    return _out(0.5 * (lo + hi), scalar)


def H_eff(K: YieldSet, V: SofteningPotential, xi, theta):
    """Effective dissipation: convex envelope of H + V_inf."""
    c, scalar = _comp(xi)
    th = np.maximum(np.abs(np.asarray(theta, float)), theta_hat(K, V, c))
    return _out(K.support(c, th) - V.b_V * th, scalar and np.ndim(theta) == 0)


def H_eff_maximizer(K: YieldSet, V: SofteningPotential, xi, theta):
    """Point (sigma, zeta) of the effective set attaining H_eff(xi, theta)."""
    c, _ = _comp(xi)
    theta = np.asarray(theta, float)
    t_star = theta_hat(K, V, c)
    th = np.maximum(np.abs(theta), t_star)
    sigma, zeta = K.maximizer(c, th)
    flat = np.abs(theta) <= t_star
    # on the flat part the maximizer lies in the section K(b_V) = K_eff(0)
    sigma = np.where(flat[..., None], K.section_maximizer(c, V.b_V), sigma)
    zeta_eff = np.where(flat, 0.0, np.sign(theta) * (zeta - V.b_V))
    return sigma, zeta_eff


@dataclass(frozen=True)
class IncrementDecomposition:
    alpha: float
    theta_hat: float
    value: float


def decompose_increment(K: YieldSet, V: SofteningPotential, dxi: DevTensor2, dtheta: float) -> IncrementDecomposition:
    """Split ``dtheta = alpha*that + (1 - alpha)*(-that)`` with ``H_eff = G_inf(dxi, that)``."""
    t_star = theta_hat(K, V, dxi)
    if abs(dtheta) >= t_star and dtheta != 0.0:
        that = abs(dtheta)
        alpha = 1.0 if dtheta > 0 else 0.0
    elif t_star == 0.0:
        # degenerate increment, symmetric convention
        that, alpha = 0.0, 0.5
    else:
        that = t_star
        alpha = 0.5 * (1.0 + dtheta / that)
    return IncrementDecomposition(alpha=alpha, theta_hat=that, value=G_inf(K, V, dxi, that))


def keff_contains(K: YieldSet, V: SofteningPotential, sigma, zeta):
    """Membership in K_eff = (K + (0, b_V)) n (K - (0, b_V))."""
    c, scalar = _comp(sigma)
    zeta = np.asarray(zeta, float)
    inside = K.contains(c, zeta - V.b_V) & K.contains(c, zeta + V.b_V)
    return bool(inside) if scalar and zeta.ndim == 0 else inside


def _bisect_membership(inside, lo, hi, iters=64):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = inside(mid)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return lo


def keff_boundary_samples(K: YieldSet, V: SofteningPotential, n_angles: int = 316, n_radii: int = 158):
    """Points on the boundary of K_eff, sampled in cylindrical coordinates.

    For each stress direction the rim radius of the zeta = 0 slice is found by
    bisection; along each radius the top (and mirrored bottom) zeta is found
    by bisection as well. Returns ``(sigma, zeta)`` arrays with
    ``2 * n_angles * n_radii`` points.
    """
    phi = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    u = unit_deviators(phi)
    B = K.outer_radius
    rim = _bisect_membership(
        lambda r: keff_contains(K, V, r[:, None] * u, np.zeros_like(r)), np.zeros(n_angles), np.full(n_angles, B)
    )
    frac = np.linspace(0.0, 1.0, n_radii)
    sigma = (rim[:, None, None] * frac[None, :, None]) * u[:, None, :]
    sigma = sigma.reshape(-1, 2)
    top = _bisect_membership(
        lambda z: keff_contains(K, V, sigma, z), np.zeros(len(sigma)), np.full(len(sigma), a_K(K))
    )
    return np.concatenate([sigma, sigma]), np.concatenate([top, -top])


def effective_radius(K: YieldSet, V: SofteningPotential) -> float:
    """r_eff with H_eff(xi, 0) = r_eff |xi|; defined only for isotropic yield sets."""
    if not K.isotropic:
        raise ValueError(f"{type(K).__name__} is anisotropic in the stress deviator; no scalar yield radius")
    return float(H_eff(K, V, DevTensor2(1 / SQRT2, 0.0), 0.0))


def coercivity_constant(K: YieldSet, V: SofteningPotential, n: int = 20000, seed: int = 0) -> float:
    """Sampled estimate of C in H(dxi, dth) + V(t + dth) - V(t) >= C (|dxi| + |dth|)."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    scale = 10.0 ** rng.uniform(-3, 3, size=n)
    dxi = scale[:, None] * x[:, :2] / SQRT2
    dth = scale * x[:, 2]
    base = rng.normal(scale=5.0, size=n)
    lhs = K.support(dxi, dth) + V.value(base + dth) - V.value(base)
    return float(np.min(lhs / (_fro(dxi) + np.abs(dth))))


# ---------------------------------------------------------------------------
# independent envelope oracle


@dataclass
class EnvelopeGrid:
    s: np.ndarray
    theta: np.ndarray
    values: np.ndarray  # shape (len(s), len(theta))
    raw: np.ndarray = field(repr=False)

    @property
    def spacing(self) -> float:
        return max(self.s[1] - self.s[0], self.theta[1] - self.theta[0])


def envelope_oracle(
    K: YieldSet,
    V: SofteningPotential,
    xi_dir: DevTensor2,
    n_s: int = 256,
    n_theta: int = 256,
    s_max: float = 2.0,
    theta_max: float = 2.0,
) -> EnvelopeGrid:
    """Lower convex envelope of (s, theta) -> G_inf(s xi_dir, theta) over a grid.

    Computed from the lower hull of the lifted grid samples, with no use of the
    one-dimensional convexification behind ``H_eff``.
    """
    from matplotlib.tri import LinearTriInterpolator, Triangulation

    if n_s < 8 or n_theta < 8:
        raise ValueError("envelope grid needs at least 8 points per axis")
    d, _ = _comp(xi_dir)
    if abs(_fro(d) - 1.0) > 1e-9:
        raise ValueError("xi_dir must have unit norm")
    s = np.linspace(0.0, s_max, n_s)
    th = np.linspace(-theta_max, theta_max, n_theta)
    S, T = np.meshgrid(s, th, indexing="ij")
    F = K.support(S[..., None] * d, T) + V.recession(T)
    pts = np.column_stack([S.ravel(), T.ravel(), F.ravel()])
    hull = ConvexHull(pts, qhull_options="Qt")
    lower = hull.equations[:, 2] < -1e-12
    tri = Triangulation(pts[:, 0], pts[:, 1], hull.simplices[lower])
    env = LinearTriInterpolator(tri, pts[:, 2])(S.ravel(), T.ravel())
    env = np.ma.filled(env, np.nan).reshape(S.shape)
    return EnvelopeGrid(s=s, theta=th, values=np.minimum(env, F), raw=F)
