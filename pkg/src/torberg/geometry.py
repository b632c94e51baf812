"""Model spaces: moment polytopes, subvariety descriptors, weight symbols, grids.

Everything lives in logarithmic coordinates ``t`` on the open torus orbit.  A
torus-invariant metric on the line bundle is encoded by its symbol
``u(t) = u0(t) + g(t)`` where ``u0`` is the reference potential whose gradient
image fills the interior of the moment polytope, and ``g`` is a bounded
twice-differentiable perturbation.  The curvature form corresponds to the
Hessian of ``u``; the top curvature power integrates to ``p! * vol(P)`` under
the normalization used throughout (so all headline masses are integers for the
shipped models).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import (
    GridTooCoarse,
    IncompatibleSubvariety,
    NonAmpleReference,
    ValidationError,
)

__all__ = [
    "MomentPolytope",
    "SubvarietyDescriptor",
    "Perturbation",
    "WeightSymbol",
    "LogGrid",
    "CurvatureField",
    "ZData",
    "Model",
    "interval",
    "rectangle",
    "simplex",
    "reference_symbol",
    "build_model",
    "restrict_symbol",
    "curvature_field",
]

# Grid resolution floor; the discrete-Hessian error model assumes at least this.
MIN_POINTS_PER_AXIS = 33


def _sigmoid(t):
    # exp(t)/(1+exp(t)) without overflow on either tail
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


def _log1pexp(t):
    # log(1+exp(t)) = max(t,0) + log1p(exp(-|t|))
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


@dataclass(frozen=True)
class MomentPolytope:
    """Lattice polytope encoding the toric pair (X, L).

    kind is one of ``interval`` ([0, a]), ``rectangle`` ([0,a] x [0,b]) or
    ``simplex`` ({x, y >= 0, x + y <= a}).  Side lengths are kept as exact
    rationals; ``level`` clears denominators so vertices are lattice points
    of the scaled lattice.
    """

    kind: str
    sides: tuple

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle", "simplex"):
            raise ValidationError(f"unknown polytope kind {self.kind!r}")
        sides = tuple(Fraction(s) for s in self.sides)
        if any(s <= 0 for s in sides):
            raise ValidationError("polytope side lengths must be positive")
        want = 2 if self.kind == "rectangle" else 1
        if len(sides) != want:
            raise ValidationError(f"{self.kind} takes {want} side length(s)")
        object.__setattr__(self, "sides", sides)

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def level(self) -> int:
        """Smallest integer clearing all vertex denominators."""
        lcm = 1
        for s in self.sides:
            lcm = lcm * s.denominator // np.gcd(lcm, s.denominator)
        return int(lcm)

    @property
    def vertices(self) -> tuple:
        a = self.sides[0]
        if self.kind == "interval":
            return ((Fraction(0),), (a,))
        if self.kind == "rectangle":
            b = self.sides[1]
            return (
                (Fraction(0), Fraction(0)),
                (a, Fraction(0)),
                (Fraction(0), b),
                (a, b),
            )
        return ((Fraction(0), Fraction(0)), (a, Fraction(0)), (Fraction(0), a))

    def volume(self) -> Fraction:
        a = self.sides[0]
        if self.kind == "interval":
            return a
        if self.kind == "rectangle":
            return a * self.sides[1]
        return a * a / 2

    def support(self, v) -> float:
        """Support function: max over vertices of <q, v>."""
        v = np.asarray(v, dtype=float)
        return max(float(np.dot([float(c) for c in q], v)) for q in self.vertices)

    def facet_normals(self):
        """(normal, offset) pairs with the polytope equal to {q : <n,q> <= offset}."""
        a = float(self.sides[0])
        if self.kind == "interval":
            return [((-1.0,), 0.0), ((1.0,), a)]
        if self.kind == "rectangle":
            b = float(self.sides[1])
            return [
                ((-1.0, 0.0), 0.0),
                ((1.0, 0.0), a),
                ((0.0, -1.0), 0.0),
                ((0.0, 1.0), b),
            ]
        return [((-1.0, 0.0), 0.0), ((0.0, -1.0), 0.0), ((1.0, 1.0), a)]

    def polygon(self) -> np.ndarray:
        """Vertices in counter-clockwise order (2D kinds only)."""
        a = float(self.sides[0])
        if self.kind == "rectangle":
            b = float(self.sides[1])
            return np.array([[0.0, 0.0], [a, 0.0], [a, b], [0.0, b]])
        if self.kind == "simplex":
            return np.array([[0.0, 0.0], [a, 0.0], [0.0, a]])
        raise ValidationError("polygon() requires a 2-dimensional polytope")


def interval(a) -> MomentPolytope:
    return MomentPolytope("interval", (a,))


def rectangle(a, b) -> MomentPolytope:
    return MomentPolytope("rectangle", (a, b))


def simplex(a) -> MomentPolytope:
    return MomentPolytope("simplex", (a,))


@dataclass(frozen=True)
class SubvarietyDescriptor:
    """Which cycle Z of the model the restricted objects live on.

    kind: ``ambient`` (Z = X), ``coordinate_curve`` (torus-invariant curve
    along ``axis`` with the other coordinate pushed to its lower face),
    ``diagonal_curve`` (t -> (t, t) in a rectangle) or ``line_in_p2``
    (a generic line in the simplex model).  ``p`` is the complex dimension.
    """

    kind: str
    axis: int = 0

    def __post_init__(self):
        if self.kind not in ("ambient", "coordinate_curve", "diagonal_curve", "line_in_p2"):
            raise ValidationError(f"unknown subvariety kind {self.kind!r}")
        if self.kind == "coordinate_curve" and self.axis not in (0, 1):
            raise IncompatibleSubvariety("coordinate_curve axis must be 0 or 1")

    def dimension(self, polytope: MomentPolytope) -> int:
        return polytope.dim if self.kind == "ambient" else 1

    def validate(self, polytope: MomentPolytope):
        if self.kind == "ambient":
            return
        if polytope.dim != 2:
            raise IncompatibleSubvariety(f"{self.kind} requires a surface model")
        if self.kind == "diagonal_curve" and polytope.kind != "rectangle":
            raise IncompatibleSubvariety("diagonal_curve requires a rectangle")
        if self.kind == "line_in_p2" and polytope.kind != "simplex":
            raise IncompatibleSubvariety("line_in_p2 requires a simplex")
        if self.kind == "coordinate_curve" and polytope.kind != "rectangle":
            raise IncompatibleSubvariety("coordinate_curve requires a rectangle")


@dataclass(frozen=True)
class Perturbation:
    """Bounded C^2 perturbation g added to the reference symbol.

    kinds: ``none``; ``gaussian_bump`` with g = amplitude * exp(-|t-center|^2 / width^2);
    ``tilt`` with g = <slope, t> (bounded on the truncated domain only, used to
    exercise the slope constraint of the envelope).
    """

    kind: str = "none"
    amplitude: float = 0.0
    center: tuple = (0.0,)
    width: float = 1.0
    slope: tuple = (0.0,)

    def __post_init__(self):
        if self.kind not in ("none", "gaussian_bump", "tilt"):
            raise ValidationError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "gaussian_bump" and self.width <= 0:
            raise ValidationError("gaussian_bump width must be positive")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "none":
            return np.zeros(pts.shape[0])
        if self.kind == "tilt":
            s = np.asarray(self.slope, dtype=float)
            return pts[:, : s.size] @ s
        c = np.asarray(self.center, dtype=float)
        d2 = np.sum((pts[:, : c.size] - c) ** 2, axis=1)
        return self.amplitude * np.exp(-d2 / self.width**2)

    def hessian(self, pts: np.ndarray) -> np.ndarray:
        """Analytic Hessian, shape (npts, d, d)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n, d = pts.shape
        out = np.zeros((n, d, d))
        if self.kind in ("none", "tilt"):
            return out
        c = np.asarray(self.center, dtype=float)
        w2 = self.width**2
        x = pts - c
        gv = self.amplitude * np.exp(-np.sum(x**2, axis=1) / w2)
        for i in range(d):
            for j in range(d):
                out[:, i, j] = gv * (4.0 * x[:, i] * x[:, j] / w2**2)
            out[:, i, i] -= gv * (2.0 / w2)
        return out


@dataclass(frozen=True)
class WeightSymbol:
    """Invariant weight in log coordinates: u = u0 + g.

    ``reference`` names the closed-form reference potential (``fubini_study``
    on intervals, ``product`` on rectangles, ``simplex`` on simplices); its
    scale is taken from ``polytope`` so that the gradient image of u0 is
    exactly the polytope interior.  ``halfwidth`` truncates the working
    domain to [-T, T]^dim.
    """

    reference: str
    polytope: MomentPolytope
    perturbation: Perturbation = Perturbation()
    halfwidth: float = 12.0
    samples: Optional[np.ndarray] = field(default=None, compare=False)

    _EXPECTED = {"interval": "fubini_study", "rectangle": "product", "simplex": "simplex"}

    def __post_init__(self):
        if self.halfwidth <= 0:
            raise ValidationError("halfwidth must be positive")
        if self.reference not in ("fubini_study", "product", "simplex"):
            raise ValidationError(f"unknown reference tag {self.reference!r}")
        if self._EXPECTED[self.polytope.kind] != self.reference:
            raise NonAmpleReference(
                f"reference {self.reference!r} does not match polytope kind "
                f"{self.polytope.kind!r}"
            )

    # -- reference potential -------------------------------------------------

    def u0(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        a = float(self.polytope.sides[0])
        if self.reference == "fubini_study":
            return a * _log1pexp(pts[:, 0])
        if self.reference == "product":
            b = float(self.polytope.sides[1])
            return a * _log1pexp(pts[:, 0]) + b * _log1pexp(pts[:, 1])
        # simplex: a * log(1 + e^{t1} + e^{t2}), stabilized
        m = np.maximum(np.maximum(pts[:, 0], pts[:, 1]), 0.0)
        return a * (m + np.log(np.exp(-m) + np.exp(pts[:, 0] - m) + np.exp(pts[:, 1] - m)))

    def grad0(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        a = float(self.polytope.sides[0])
        if self.reference == "fubini_study":
            return a * _sigmoid(pts[:, :1])
        if self.reference == "product":
            b = float(self.polytope.sides[1])
            return np.stack([a * _sigmoid(pts[:, 0]), b * _sigmoid(pts[:, 1])], axis=1)
        m = np.maximum(np.maximum(pts[:, 0], pts[:, 1]), 0.0)
        e1 = np.exp(pts[:, 0] - m)
        e2 = np.exp(pts[:, 1] - m)
        den = np.exp(-m) + e1 + e2
        return np.stack([a * e1 / den, a * e2 / den], axis=1)

    def hess0(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        a = float(self.polytope.sides[0])
        if self.reference == "fubini_study":
            s = _sigmoid(pts[:, 0])
            return (a * s * (1.0 - s)).reshape(n, 1, 1)
        if self.reference == "product":
            b = float(self.polytope.sides[1])
            s1 = _sigmoid(pts[:, 0])
            s2 = _sigmoid(pts[:, 1])
            out = np.zeros((n, 2, 2))
            out[:, 0, 0] = a * s1 * (1.0 - s1)
            out[:, 1, 1] = b * s2 * (1.0 - s2)
            return out
        g = self.grad0(pts)  # = a * y
        out = np.zeros((n, 2, 2))
        out[:, 0, 0] = g[:, 0] - g[:, 0] ** 2 / a
        out[:, 1, 1] = g[:, 1] - g[:, 1] ** 2 / a
        out[:, 0, 1] = out[:, 1, 0] = -g[:, 0] * g[:, 1] / a
        return out

    # -- full symbol ----------------------------------------------------------

    def g(self, pts) -> np.ndarray:
        return self.perturbation(pts)

    def u(self, pts) -> np.ndarray:
        return self.u0(pts) + self.perturbation(pts)

    def hess(self, pts) -> np.ndarray:
        return self.hess0(pts) + self.perturbation.hessian(pts)


@dataclass(frozen=True)
class LogGrid:
    """Uniform lattice on [-T, T]^dim with an odd number of points per axis."""

    dim: int
    halfwidth: float
    n_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError("grids are 1- or 2-dimensional")
        if self.n_per_axis < MIN_POINTS_PER_AXIS:
            raise GridTooCoarse(f"n_per_axis = {self.n_per_axis} < {MIN_POINTS_PER_AXIS}")
        if self.n_per_axis % 2 == 0:
            raise GridTooCoarse("n_per_axis must be odd so that 0 is a grid point")

    @property
    def spacing(self) -> float:
        return 2.0 * self.halfwidth / (self.n_per_axis - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.halfwidth, self.halfwidth, self.n_per_axis)

    def points(self) -> np.ndarray:
        """All grid points as an (N, dim) array in row-major axis order."""
        ax = self.axis
        if self.dim == 1:
            return ax.reshape(-1, 1)
        t1, t2 = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([t1.ravel(), t2.ravel()], axis=1)

    def refine(self, factor: int) -> "LogGrid":
        return LogGrid(self.dim, self.halfwidth, factor * (self.n_per_axis - 1) + 1)

    def interior_mask(self) -> np.ndarray:
        n = self.n_per_axis
        m1 = np.zeros(n, dtype=bool)
        m1[1:-1] = True
        if self.dim == 1:
            return m1
        return np.logical_and.outer(m1, m1).ravel()


@dataclass(frozen=True)
class CurvatureField:
    """Per-point symmetric Hessian matrices of the symbol on a grid.

    ``entries`` holds centered second differences (shape (N, d, d)); where the
    symbol has a closed form, ``analytic`` holds the exact Hessian for
    cross-checks.  Boundary points reuse their nearest interior stencil.
    """

    grid: LogGrid
    entries: np.ndarray
    analytic: Optional[np.ndarray] = None

    def min_eigenvalues(self) -> np.ndarray:
        if self.grid.dim == 1:
            return self.entries[:, 0, 0]
        return np.linalg.eigvalsh(self.entries)[:, 0]


@dataclass(frozen=True)
class ZData:
    """Restricted data on the cycle Z: symbol, reference measure, slope range.

    ``u`` is the pulled-back full symbol, ``u0`` the pulled-back reference,
    ``density`` the density of the canonical measure (the reference curvature
    measure of Z, total mass p! * vol of the restricted polytope) and
    ``slope_range`` the interval of slopes reachable by restricted invariant
    metrics (for p = 1; for ambient surfaces the polytope itself constrains).
    ``log_density`` is the closed-form logarithm (the density underflows to
    exactly zero in floating point far outside the window).
    """

    p: int
    grid: LogGrid
    u: Callable
    u0: Callable
    density: Callable
    log_density: Callable
    slope_range: tuple  # (lo, hi) for p = 1; unused for p = 2
    polytope: MomentPolytope  # ambient polytope (slope domain for p = dim)

    def total_mass(self) -> float:
        if self.p == 1:
            return self.slope_range[1] - self.slope_range[0]
        import math

        return math.factorial(self.p) * float(self.polytope.volume())


@dataclass(frozen=True)
class Model:
    """Immutable bundle: polytope, subvariety, weight, grids and derived caches."""

    polytope: MomentPolytope
    sub: SubvarietyDescriptor
    weight: WeightSymbol
    grid: LogGrid
    zdata: ZData
    curvature: CurvatureField

    @property
    def p(self) -> int:
        return self.sub.dimension(self.polytope)


def _discrete_hessian(func, grid: LogGrid) -> np.ndarray:
    """Centered second differences on the grid, nearest-interior at the edges."""
    h = grid.spacing
    n = grid.n_per_axis
    if grid.dim == 1:
        v = func(grid.points())
        dd = np.empty(n)
        dd[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
        dd[0], dd[-1] = dd[1], dd[-2]
        return dd.reshape(n, 1, 1)
    v = func(grid.points()).reshape(n, n)
    out = np.empty((n, n, 2, 2))
    pad = np.pad(v, 1, mode="edge")  # edge rows replaced below
    c = pad[1:-1, 1:-1]
    out[:, :, 0, 0] = (pad[2:, 1:-1] - 2 * c + pad[:-2, 1:-1]) / h**2
    out[:, :, 1, 1] = (pad[1:-1, 2:] - 2 * c + pad[1:-1, :-2]) / h**2
    mixed = (pad[2:, 2:] + pad[:-2, :-2] - pad[2:, :-2] - pad[:-2, 2:]) / (4 * h**2)
    out[:, :, 0, 1] = out[:, :, 1, 0] = mixed
    # nearest-interior stencil on the frame
    out[0, :] = out[1, :]
    out[-1, :] = out[-2, :]
    out[:, 0] = out[:, 1]
    out[:, -1] = out[:, -2]
    return out.reshape(n * n, 2, 2)


def curvature_field(model: Model) -> CurvatureField:
    """Discrete curvature of the full symbol on the ambient grid.

    The analytic Hessian rides along; the two agree to O(h^2) wherever the
    perturbation has a closed form (always, for the shipped perturbations).
    """
    entries = _discrete_hessian(model.weight.u, model.grid)
    analytic = model.weight.hess(model.grid.points())
    return CurvatureField(model.grid, entries, analytic)


def _check_ample_reference(weight: WeightSymbol, grid: LogGrid):
    """Gradient image of u0 must be the polytope interior.

    Interior: every grid gradient strictly inside.  Coverage: the gradient
    range must approach each vertex of the polytope within the truncation
    collar (otherwise the reference encodes a smaller polytope).
    """
    pts = grid.points()
    gr = weight.grad0(pts)
    poly = weight.polytope
    for normal, offset in poly.facet_normals():
        margin = offset - gr @ np.asarray(normal)
        if np.any(margin <= 0):
            raise NonAmpleReference("reference gradient leaves the polytope interior")
    collar = 40.0 * np.exp(-grid.halfwidth) * (1.0 + max(float(s) for s in poly.sides))
    for q in poly.vertices:
        qf = np.array([float(c) for c in q])
        if np.min(np.linalg.norm(gr - qf, axis=1)) > collar:
            raise NonAmpleReference(
                "reference gradient image does not fill the polytope "
                f"(vertex {tuple(map(float, qf))} unreached)"
            )


def restricted_slope_range(polytope: MomentPolytope, sub: SubvarietyDescriptor) -> tuple:
    """Slope interval reachable by invariant restrictions to the curve Z."""
    a = float(polytope.sides[0])
    if sub.kind == "ambient":
        if polytope.dim != 1:
            raise ValidationError("ambient surface models have no slope interval")
        return (0.0, a)
    if sub.kind == "coordinate_curve":
        side = float(polytope.sides[sub.axis])
        return (0.0, side)
    if sub.kind == "diagonal_curve":
        b = float(polytope.sides[1])
        return (0.0, a + b)
    return (0.0, a)  # generic line in the simplex model


def restrict_symbol(model_or_parts, sub: SubvarietyDescriptor = None) -> ZData:
    """Pull the symbol back along the curve parametrization.

    ambient: identity.  coordinate_curve (axis j): t -> u at (t on axis j,
    other coordinate at its lower face), the face value being the limit along
    the recession direction, evaluated at the truncation boundary.
    diagonal_curve: t -> u(t, t).  line_in_p2: the generic-line pullback,
    realized as the degree-a reference symbol on Z (perturbations must vanish:
    an invariant ambient perturbation does not restrict to an invariant symbol
    on a non-invariant line).
    """
    if isinstance(model_or_parts, Model):
        polytope = model_or_parts.polytope
        weight = model_or_parts.weight
        grid = model_or_parts.grid
        sub = model_or_parts.sub
    else:
        polytope, weight, grid = model_or_parts

    a = float(polytope.sides[0])

    def _fs_like(scale):
        def u0z(t):
            t = np.asarray(t, dtype=float).reshape(-1)
            return scale * _log1pexp(t)

        def dens(t):
            t = np.asarray(t, dtype=float).reshape(-1)
            s = _sigmoid(t)
            return scale * s * (1.0 - s)

        def logdens(t):
            t = np.asarray(t, dtype=float).reshape(-1)
            return np.log(scale) - _log1pexp(t) - _log1pexp(-t)

        return u0z, dens, logdens

    if sub.kind == "ambient":
        if polytope.dim == 1:
            u0z, dens, logdens = _fs_like(a)

            def uz(t):
                t = np.asarray(t, dtype=float).reshape(-1, 1)
                return weight.u(t)

            return ZData(1, grid, uz, u0z, dens, logdens, (0.0, a), polytope)

        # ambient surface: measure = reference curvature measure, mass 2 vol(P)
        def uz2(pts):
            return weight.u(pts)

        def u0z2(pts):
            return weight.u0(pts)

        def dens2(pts):
            h = weight.hess0(np.atleast_2d(pts))
            return 2.0 * (h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] ** 2)

        if polytope.kind == "rectangle":
            b = float(polytope.sides[1])

            def logdens2(pts):
                pts = np.atleast_2d(pts)
                t1, t2 = pts[:, 0], pts[:, 1]
                return (
                    np.log(2.0 * a * b)
                    - _log1pexp(t1)
                    - _log1pexp(-t1)
                    - _log1pexp(t2)
                    - _log1pexp(-t2)
                )

        else:  # simplex: det Hess = a^2 y1 y2 (1 - y1 - y2)

            def logdens2(pts):
                pts = np.atleast_2d(pts)
                t1, t2 = pts[:, 0], pts[:, 1]
                mx = np.maximum(np.maximum(t1, t2), 0.0)
                s = mx + np.log(np.exp(-mx) + np.exp(t1 - mx) + np.exp(t2 - mx))
                return np.log(2.0) + 2.0 * np.log(a) + t1 + t2 - 3.0 * s

        return ZData(2, grid, uz2, u0z2, dens2, logdens2, (0.0, 0.0), polytope)

    zgrid = LogGrid(1, grid.halfwidth, grid.n_per_axis)
    lo, hi = restricted_slope_range(polytope, sub)

    if sub.kind == "coordinate_curve":
        j = sub.axis
        face = -weight.halfwidth  # lower-face limit, evaluated at the boundary

        def uz(t):
            t = np.asarray(t, dtype=float).reshape(-1)
            pts = np.full((t.size, 2), face)
            pts[:, j] = t
            return weight.u(pts)

        u0z, dens, logdens = _fs_like(float(polytope.sides[j]))
        return ZData(1, zgrid, uz, u0z, dens, logdens, (lo, hi), polytope)

    if sub.kind == "diagonal_curve":

        def uz(t):
            t = np.asarray(t, dtype=float).reshape(-1)
            return weight.u(np.stack([t, t], axis=1))

        u0z, dens, logdens = _fs_like(hi)
        return ZData(1, zgrid, uz, u0z, dens, logdens, (lo, hi), polytope)

    # line_in_p2
    if weight.perturbation.kind != "none":
        raise IncompatibleSubvariety(
            "line_in_p2 models require an unperturbed weight (the pullback of "
            "an invariant perturbation along a generic line is not invariant)"
        )
    u0z, dens, logdens = _fs_like(a)

    def uz(t):
        return u0z(t)

    return ZData(1, zgrid, uz, u0z, dens, logdens, (lo, hi), polytope)


def reference_symbol(
    polytope: MomentPolytope,
    perturbation: Perturbation = Perturbation(),
    halfwidth: float = 12.0,
) -> WeightSymbol:
    """Reference weight symbol matching the polytope kind, plus a perturbation."""
    tag = WeightSymbol._EXPECTED[polytope.kind]
    return WeightSymbol(tag, polytope, perturbation, halfwidth)


def build_model(
    polytope: MomentPolytope,
    sub: SubvarietyDescriptor,
    weight: WeightSymbol,
    grid: LogGrid,
) -> Model:
    """Validate the four inputs and assemble the immutable model bundle.

    Raises IncompatibleSubvariety / NonAmpleReference / GridTooCoarse eagerly;
    derived caches (curvature field, restricted symbol data) are computed here
    so downstream operations are pure lookups plus numerics.
    """
    sub.validate(polytope)
    if weight.polytope is not polytope and weight.polytope != polytope:
        raise IncompatibleSubvariety("weight symbol built for a different polytope")
    if grid.dim != polytope.dim:
        raise IncompatibleSubvariety("grid dimension does not match the polytope")
    if abs(grid.halfwidth - weight.halfwidth) > 1e-12:
        raise ValidationError("grid halfwidth must match the weight truncation")
    _check_ample_reference(weight, grid)

    if sub.kind == "coordinate_curve":
        # the face-limit convention needs the perturbation to die out at the face
        j = 1 - sub.axis
        pts = grid.points()
        face_pts = pts[np.abs(pts[:, j] + grid.halfwidth) < 1e-9]
        if np.max(np.abs(weight.g(face_pts))) > 1e-8:
            raise ValidationError(
                "coordinate_curve models need the perturbation supported away "
                "from the face"
            )

    zdata = restrict_symbol((polytope, weight, grid), sub)
    samples = weight.u(grid.points())
    weight = WeightSymbol(
        weight.reference, polytope, weight.perturbation, weight.halfwidth, samples
    )
    model = Model(polytope, sub, weight, grid, zdata, None)  # type: ignore[arg-type]
    curv = curvature_field(model)
    return Model(polytope, sub, weight, grid, zdata, curv)
