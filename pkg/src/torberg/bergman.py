"""Weighted Gram matrices, orthonormalization, restricted kernel evaluation.

All integrals run in log coordinates where the invariant structure makes the
angular integral exact: distinct monomials on an invariant cycle are
orthogonal, so Gram matrices of the shipped models are diagonal and only the
log-radial quadrature is performed.  Assembly is stabilized by subtracting
each entry's maximal log-integrand before exponentiating, so tensor powers up
to 64 stay far from underflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import NotInImage, NotPositiveDefinite, QuadratureUnderflow
from .geometry import LogGrid, Model
from .quadrature import PanelRule, panel_rule, tail_margin
from .sections import RestrictionMap, section_basis

__all__ = [
    "GramMatrix",
    "OrthonormalTransform",
    "KernelGrid",
    "FsPotential",
    "ExtensionReport",
    "gram",
    "ambient_gram",
    "orthonormalize",
    "kernel_eval",
    "log_kernel_at",
    "kernel_trace",
    "fs_potential",
    "minimal_norm_extension",
    "extremal_check",
]

# Cholesky pivot-ratio guard: beyond this the digits are untrustworthy.
PIVOT_RATIO_CAP = 1e14


@dataclass(frozen=True)
class GramMatrix:
    """Weighted inner products of the (image) monomial basis at power m."""

    m: int
    entries: np.ndarray
    target_exponents: np.ndarray
    quadrature_meta: str

    @property
    def basis_size(self) -> int:
        return self.entries.shape[0]

    @property
    def is_diagonal(self) -> bool:
        off = self.entries - np.diag(np.diag(self.entries))
        return not np.any(off)

    def log_diagonal(self) -> np.ndarray:
        return np.log(np.diag(self.entries))


@dataclass(frozen=True)
class OrthonormalTransform:
    """C with C^T G C = I (transpose-inverse of the lower Cholesky factor)."""

    gram: GramMatrix
    matrix: np.ndarray
    pivot_min: float
    pivot_max: float

    @property
    def pivot_ratio(self) -> float:
        return self.pivot_max / self.pivot_min


@dataclass(frozen=True)
class KernelGrid:
    """Kernel values on a grid over Z; ``mask`` flags underflowed points."""

    m: int
    grid: LogGrid
    values: np.ndarray
    log_values: np.ndarray
    mask: np.ndarray


@dataclass(frozen=True)
class FsPotential:
    """Level-m potential: restricted symbol plus log-kernel over m."""

    m: int
    grid: LogGrid
    values: np.ndarray
    mask: np.ndarray


@dataclass(frozen=True)
class ExtensionReport:
    """Operator norm and per-basis ratios of the minimal-norm extension."""

    m: int
    operator_norm: float
    ratios: np.ndarray


def _logsumexp_rows(L: np.ndarray) -> np.ndarray:
    s = np.max(L, axis=-1)
    finite = np.isfinite(s)
    out = np.full(s.shape, -np.inf)
    if L.ndim == 1:
        return s + np.log(np.sum(np.exp(L - s))) if finite else s
    out[finite] = s[finite] + np.log(
        np.sum(np.exp(L[finite] - s[finite, None]), axis=-1)
    )
    return out


def _diag_entries_1d(
    targets: np.ndarray, m: int, zdata, rule: PanelRule
) -> np.ndarray:
    """Diagonal Gram entries on a curve: integral of e^{k t - m u(t)} density."""
    t = rule.nodes
    base = -m * zdata.u(t) + zdata.log_density(t) + np.log(rule.weights)
    L = targets[:, None] * t[None, :] + base[None, :]
    return np.exp(_logsumexp_rows(L))


def _diag_entries_2d(
    exps: np.ndarray, m: int, u_fn, logw_fn, rule: PanelRule, slack: float = 90.0
) -> np.ndarray:
    """Diagonal entries of a 2D invariant Gram via windowed tensor quadrature.

    The log-integrand ``<alpha, t> - m u(t) + log w(t)`` is scanned blockwise
    (8x8 node blocks) to find, per entry, the cells within ``slack`` of the
    maximum; only those cells are exponentiated.  ``slack`` covers both the
    tail target (~45) and the block-scale variation of the log-integrand.
    """
    c = 8
    t = rule.nodes
    lw = np.log(rule.weights)
    pts = np.stack(
        [np.repeat(t, t.size), np.tile(t, t.size)], axis=1
    )
    base = (-m * u_fn(pts) + logw_fn(pts)).reshape(t.size, t.size)
    base = base + lw[:, None] + lw[None, :]

    # pad to a multiple of the block size; padded cells never contribute
    pad = (-t.size) % c
    if pad:
        base = np.pad(base, ((0, pad), (0, pad)), constant_values=-np.inf)
        t = np.concatenate([t, np.full(pad, t[-1])])

    nb = base.shape[0] // c
    blocks = base.reshape(nb, c, nb, c).transpose(0, 2, 1, 3)  # (nb, nb, c, c)
    bmax = blocks.max(axis=(2, 3))
    xb = t.reshape(-1, c)
    xc = xb.mean(axis=1)

    out = np.empty(exps.shape[0])
    for i, (a1, a2) in enumerate(exps):
        lc = a1 * xc[:, None] + a2 * xc[None, :] + bmax
        mask = lc >= lc.max() - slack
        # dilate by one block in each direction
        grown = mask.copy()
        grown[1:, :] |= mask[:-1, :]
        grown[:-1, :] |= mask[1:, :]
        grown[:, 1:] |= mask[:, :-1]
        grown[:, :-1] |= mask[:, 1:]
        bi, bj = np.nonzero(grown)
        L = (
            a1 * xb[bi][:, :, None]
            + a2 * xb[bj][:, None, :]
            + blocks[bi, bj]
        )
        s = L.max()
        out[i] = np.exp(s) * float(np.sum(np.exp(L - s)))
    return out


def _gram_rule(model: Model, m: int, dim: int, order: int = 16) -> PanelRule:
    T = model.grid.halfwidth
    return panel_rule(T + tail_margin(m, dim), model.grid.spacing, order)


def _image_diag(model: Model, rmap: RestrictionMap, m: int, order: int = 16):
    """Diagonal of the image-basis Gram on Z plus the rule used."""
    zd = model.zdata
    if zd.p == 1:
        rule = _gram_rule(model, m, 1, order)
        diag = _diag_entries_1d(
            np.asarray(rmap.target_exponents, dtype=float).reshape(-1), m, zd, rule
        )
    else:
        rule = _gram_rule(model, m, 2, order)
        diag = _diag_entries_2d(
            np.asarray(rmap.target_exponents, dtype=float),
            m,
            zd.u,
            zd.log_density,
            rule,
        )
    return diag, rule


def gram(model: Model, rmap: RestrictionMap, m: int, order: int = 16) -> GramMatrix:
    """Gram matrix of the image basis on Z at tensor power m.

    Invariant weights on invariant cycles make the angular integral exact, so
    the matrix is diagonal by construction; the radial/log integral runs on a
    composite Gauss-Legendre tiling extended past the evaluation window.
    """
    if rmap.m != m:
        raise NotInImage(f"restriction map built at m={rmap.m}, requested m={m}")
    diag, rule = _image_diag(model, rmap, m, order)
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        raise QuadratureUnderflow("non-positive Gram diagonal")
    if np.max(diag) < 1e-300:
        raise QuadratureUnderflow("all Gram entries below 1e-300")
    meta = f"{rule.meta};angular=exact;halfwidth={rule.halfwidth:.3f}"
    return GramMatrix(m, np.diag(diag), np.asarray(rmap.target_exponents), meta)


def ambient_gram(model: Model, m: int, order: int = 16) -> GramMatrix:
    """Gram of the full ambient basis against the reference volume measure."""
    from .geometry import SubvarietyDescriptor, restrict_symbol

    basis = section_basis(model.polytope, m)
    w = model.weight
    ambient = restrict_symbol(
        (model.polytope, w, model.grid), SubvarietyDescriptor("ambient")
    )
    if model.polytope.dim == 1:
        rule = _gram_rule(model, m, 1, order)
        diag = _diag_entries_1d(basis.exponents[:, 0].astype(float), m, ambient, rule)
    else:
        rule = _gram_rule(model, m, 2, order)
        sep = w.reference == "product" and w.perturbation.kind in ("none", "tilt")
        if sep:
            diag = _separable_product_diag(model, basis.exponents, m, rule)
        else:
            diag = _diag_entries_2d(
                basis.exponents.astype(float), m, ambient.u, ambient.log_density, rule
            )
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise QuadratureUnderflow("non-positive ambient Gram diagonal")
    meta = f"{rule.meta};angular=exact;ambient"
    return GramMatrix(m, np.diag(diag), basis.exponents, meta)


def _separable_product_diag(model, exps, m, rule):
    """Product weights factor the 2D entries into two 1D integrals."""
    w = model.weight
    a = float(w.polytope.sides[0])
    b = float(w.polytope.sides[1])
    tilt = (
        np.asarray(w.perturbation.slope, dtype=float)
        if w.perturbation.kind == "tilt"
        else np.zeros(2)
    )
    t = rule.nodes
    from .geometry import _log1pexp, _sigmoid

    def axis_entries(scale, ti):
        base = (
            -m * (scale * _log1pexp(t) + ti * t)
            + np.log(scale)
            - _log1pexp(t)
            - _log1pexp(-t)
            + np.log(rule.weights)
        )
        ks = np.arange(int(np.max(exps)) + 1, dtype=float)
        L = ks[:, None] * t[None, :] + base[None, :]
        return np.exp(_logsumexp_rows(L))

    d1 = axis_entries(a, tilt[0])
    d2 = axis_entries(b, tilt[1])
    # reference measure 2 det Hess u0 = 2 w1(t1) w2(t2) factors exactly
    return 2.0 * d1[exps[:, 0]] * d2[exps[:, 1]]


def orthonormalize(g: GramMatrix) -> OrthonormalTransform:
    """Transpose-inverse lower Cholesky factor, with a conditioning guard."""
    try:
        chol = scipy.linalg.cholesky(g.entries, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky failed: {exc}") from exc
    piv = np.diag(chol)
    ratio = float(np.max(piv) / np.min(piv))
    if ratio > PIVOT_RATIO_CAP:
        raise NotPositiveDefinite(
            f"Cholesky pivot ratio {ratio:.3e} exceeds {PIVOT_RATIO_CAP:.0e}"
        )
    ident = np.eye(g.basis_size)
    c = scipy.linalg.solve_triangular(chol, ident, lower=True).T
    return OrthonormalTransform(g, c, float(np.min(piv)), float(np.max(piv)))


def _exponent_matrix(g: GramMatrix, pts: np.ndarray) -> np.ndarray:
    """<alpha_k, t_j> for each basis exponent and point."""
    exps = np.asarray(g.target_exponents, dtype=float)
    pts = np.atleast_2d(pts)
    if exps.ndim == 1:
        return exps[:, None] * pts[:, 0][None, :]
    return exps @ pts.T


def log_kernel_at(
    model: Model, onb: OrthonormalTransform, pts: np.ndarray
) -> np.ndarray:
    """log of the kernel at arbitrary points of Z (log coordinates).

    Diagonal Grams reduce the Cholesky solve to a log-sum-exp over the basis;
    dense Grams (non-invariant synthetic inputs) go through a shifted
    triangular solve against the Cholesky factor.
    """
    g = onb.gram
    m = g.m
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    uz = model.zdata.u(pts if model.zdata.p == 2 else pts[:, 0])
    A = _exponent_matrix(g, pts)
    if g.is_diagonal:
        L = A - g.log_diagonal()[:, None]
        return _logsumexp_rows(L.T) - m * uz
    # dense path: per-point shift keeps the evaluation vector representable
    shift = np.max(A, axis=0)
    v = np.exp(0.5 * (A - shift[None, :]))
    chol = scipy.linalg.cholesky(g.entries, lower=True)
    y = scipy.linalg.solve_triangular(chol, v, lower=True)
    return np.log(np.sum(y * y, axis=0)) + shift - m * uz


def kernel_eval(
    model: Model,
    rmap: RestrictionMap,
    onb: OrthonormalTransform,
    m: int,
    zgrid: Optional[LogGrid] = None,
) -> KernelGrid:
    """Kernel of the restricted section space, sampled on a grid over Z."""
    if onb.gram.m != m or rmap.m != m:
        raise NotInImage("orthonormal transform and restriction map disagree on m")
    grid = zgrid if zgrid is not None else model.zdata.grid
    logb = log_kernel_at(model, onb, grid.points())
    mask = np.isfinite(logb)
    vals = np.where(mask, np.exp(logb), 0.0)
    return KernelGrid(m, grid, vals, logb, mask)


def kernel_trace(model: Model, rmap: RestrictionMap, m: int) -> float:
    """Independent quadrature of the kernel against the reference measure on Z.

    Curves integrate the evaluated kernel over the assembly tiling; surface
    models recompute every Gram entry on a refined rule (17-point panels) and
    sum the ratios, which tests the same quadrature consistency without the
    quadratic blowup of a full 2D kernel integration.
    """
    g = gram(model, rmap, m)
    if model.zdata.p == 1:
        onb = orthonormalize(g)
        rule = _gram_rule(model, m, 1)
        t = rule.nodes.reshape(-1, 1)
        logb = log_kernel_at(model, onb, t)
        integrand = np.exp(logb + model.zdata.log_density(rule.nodes))
        return float(np.dot(rule.weights, integrand))
    refined, _ = _image_diag(model, rmap, m, order=17)
    return float(np.sum(refined / np.diag(g.entries)))


def fs_potential(
    model: Model,
    rmap: RestrictionMap,
    m: int,
    zgrid: Optional[LogGrid] = None,
    onb: Optional[OrthonormalTransform] = None,
) -> FsPotential:
    """Level-m potential u_m = (restricted symbol) + log(kernel)/m."""
    if onb is None:
        onb = orthonormalize(gram(model, rmap, m))
    grid = zgrid if zgrid is not None else model.zdata.grid
    pts = grid.points()
    logb = log_kernel_at(model, onb, pts)
    uz = model.zdata.u(pts if model.zdata.p == 2 else pts[:, 0])
    mask = np.isfinite(logb)
    vals = np.where(mask, uz + logb / m, np.nan)
    return FsPotential(m, grid, vals, mask)


def minimal_norm_extension(
    model: Model,
    rmap: RestrictionMap,
    m: int,
    target: np.ndarray,
    gx: Optional[GramMatrix] = None,
    gz: Optional[GramMatrix] = None,
):
    """Least ambient-norm coefficient vector restricting to the target section.

    Solved through the ambient Gram and the incidence map: within each fiber
    the optimal ambient mass distributes proportionally to the inverse entry,
    giving the Lagrange-multiplier solution in closed form.  Returns the
    ambient coefficients and the ratio ambient-norm^2 / restricted-norm^2.
    """
    target = np.asarray(target, dtype=float)
    if target.shape != (rmap.image_dims,):
        raise NotInImage(
            f"target length {target.shape} does not match image size {rmap.image_dims}"
        )
    if gx is None:
        gx = ambient_gram(model, m)
    if gz is None:
        gz = gram(model, rmap, m)
    dx = np.diag(gx.entries)
    dz = np.diag(gz.entries)
    inv_sums = np.zeros(rmap.image_dims)
    np.add.at(inv_sums, rmap.target_of_source, 1.0 / dx)
    lam = target / inv_sums
    coeffs = lam[rmap.target_of_source] / dx
    ambient_sq = float(np.sum(target**2 / inv_sums))
    restricted_sq = float(np.sum(target**2 * dz))
    return coeffs, ambient_sq / restricted_sq


def extension_report(model: Model, rmap: RestrictionMap, m: int) -> ExtensionReport:
    """Worst-case extension ratio over the unit sphere of the restricted space.

    With diagonal Grams the quadratic form diagonalizes over the image basis,
    so the operator norm is the largest per-basis ratio.
    """
    gx = ambient_gram(model, m)
    gz = gram(model, rmap, m)
    dx = np.diag(gx.entries)
    dz = np.diag(gz.entries)
    inv_sums = np.zeros(rmap.image_dims)
    np.add.at(inv_sums, rmap.target_of_source, 1.0 / dx)
    ratios = 1.0 / (inv_sums * dz)
    norm = float(np.max(ratios))
    if not np.isfinite(norm) or norm <= 0:
        raise QuadratureUnderflow("extension ratios degenerate")
    return ExtensionReport(m, norm, ratios)


def extremal_check(model: Model, rmap: RestrictionMap, m: int, z: np.ndarray):
    """Kernel value versus the extremal characterization at one point.

    The kernel equals the maximum of the weighted point evaluation over
    unit-norm sections; the latter is computed independently as the top
    generalized Rayleigh quotient of the rank-one evaluation form against the
    Gram (LAPACK generalized eigensolve, not the Cholesky evaluation path).
    """
    g = gram(model, rmap, m)
    onb = orthonormalize(g)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    b_val = float(np.exp(log_kernel_at(model, onb, z)[0]))

    A = _exponent_matrix(g, z)[:, 0]
    shift = float(np.max(A))
    v = np.exp(0.5 * (A - shift))
    rank_one = np.outer(v, v)
    eigvals = scipy.linalg.eigh(rank_one, g.entries, eigvals_only=True)
    uz = float(model.zdata.u(z if model.zdata.p == 2 else z[:, 0])[0])
    log_rayleigh = np.log(float(eigvals[-1])) + shift - m * uz
    return b_val, float(np.exp(log_rayleigh))
