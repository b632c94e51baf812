"""Monomial section bases from lattice points and restriction maps onto Z.

The space of global sections at tensor power m is indexed by the lattice
points of the dilated polytope mP; restriction to an invariant (or generic
line) cycle collapses each monomial to a single monomial on Z, so the map is
an incidence matrix and the image dimension is a count of distinct target
exponents.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ValidationError
from .geometry import MomentPolytope, SubvarietyDescriptor

__all__ = [
    "LatticeBasis",
    "RestrictionMap",
    "section_basis",
    "restriction_map",
    "dimension_sweep",
    "line_restriction_rank",
]

# Refuse to enumerate absurdly large section spaces.
MAX_BASIS_POINTS = 10**7


@dataclass(frozen=True)
class LatticeBasis:
    """Ordered monomial basis: lattice points of mP, lexicographic."""

    m: int
    polytope: MomentPolytope
    exponents: np.ndarray  # (N, dim) integer array

    @property
    def size(self) -> int:
        return self.exponents.shape[0]


@dataclass(frozen=True)
class RestrictionMap:
    """Incidence map from the ambient basis onto the image basis on Z.

    ``target_of_source[i]`` is the index into ``target_exponents`` that the
    i-th ambient monomial restricts to; ``fibers[k]`` lists the preimage
    indices of the k-th image monomial (needed when assembling Gram data of
    the image from ambient data).
    """

    source: LatticeBasis
    sub: SubvarietyDescriptor
    target_exponents: np.ndarray  # (image_dims,) or (image_dims, dim) ints
    target_of_source: np.ndarray  # (N,) ints
    fibers: tuple

    @property
    def image_dims(self) -> int:
        return len(self.target_exponents)

    @property
    def m(self) -> int:
        return self.source.m

    def incidence_matrix(self) -> np.ndarray:
        """Dense 0/1 matrix, image_dims x source size."""
        mat = np.zeros((self.image_dims, self.source.size))
        mat[self.target_of_source, np.arange(self.source.size)] = 1.0
        return mat


def section_basis(polytope: MomentPolytope, m: int) -> LatticeBasis:
    """All lattice points of mP in lexicographic order."""
    if m < 1:
        raise ValidationError("tensor power m must be >= 1")
    a = Fraction(polytope.sides[0]) * m
    if polytope.kind == "interval":
        hi = int(a)
        if hi + 1 > MAX_BASIS_POINTS:
            raise ValidationError("section basis would exceed the enumeration cap")
        exps = np.arange(hi + 1, dtype=int).reshape(-1, 1)
        return LatticeBasis(m, polytope, exps)
    if polytope.kind == "rectangle":
        b = Fraction(polytope.sides[1]) * m
        n1, n2 = int(a), int(b)
        if (n1 + 1) * (n2 + 1) > MAX_BASIS_POINTS:
            raise ValidationError("section basis would exceed the enumeration cap")
        e1, e2 = np.meshgrid(np.arange(n1 + 1), np.arange(n2 + 1), indexing="ij")
        exps = np.stack([e1.ravel(), e2.ravel()], axis=1)
        return LatticeBasis(m, polytope, exps)
    # simplex: alpha_0, alpha_1 >= 0 with alpha_0 + alpha_1 <= m a
    n = int(a)
    if (n + 1) * (n + 2) // 2 > MAX_BASIS_POINTS:
        raise ValidationError("section basis would exceed the enumeration cap")
    rows = [(i, j) for i in range(n + 1) for j in range(n - i + 1)]
    return LatticeBasis(m, polytope, np.array(rows, dtype=int))


def restriction_map(basis: LatticeBasis, sub: SubvarietyDescriptor) -> RestrictionMap:
    """Collapse ambient exponents onto Z's exponents and record the fibers.

    ambient: identity.  coordinate_curve along axis j: keep alpha_j (the
    exponent transverse to the collapsed face).  diagonal_curve: alpha_0 +
    alpha_1.  line_in_p2: total degree along the generic-line parametrization,
    m*a - alpha_0; genericity (surjectivity of the honest restriction onto
    each degree) is certified by a rank check on a brute-force monomial
    evaluation rather than assumed.
    """
    sub.validate(basis.polytope)
    exps = basis.exponents
    if sub.kind == "ambient":
        targets = exps
        tos = np.arange(basis.size)
        fibers = tuple((i,) for i in range(basis.size))
        return RestrictionMap(basis, sub, targets, tos, fibers)

    if sub.kind == "coordinate_curve":
        raw = exps[:, sub.axis]
    elif sub.kind == "diagonal_curve":
        raw = exps[:, 0] + exps[:, 1]
    else:  # line_in_p2: degree in the parameter of [1 : s] -> [1 : s : line(s)]
        deg = int(Fraction(basis.polytope.sides[0]) * basis.m)
        raw = deg - exps[:, 0]
        if deg <= 12:
            rank = line_restriction_rank(basis)
            if rank != deg + 1:
                raise ValidationError(
                    f"line restriction rank {rank} < {deg + 1}: line not generic"
                )

    targets, tos = np.unique(raw, return_inverse=True)
    fibers = tuple(tuple(np.nonzero(tos == k)[0]) for k in range(len(targets)))
    return RestrictionMap(basis, sub, targets, tos, fibers)


def line_restriction_rank(basis: LatticeBasis) -> int:
    """Rank of the honest restriction of the monomial basis to the line w = x + 2y.

    Parametrize the line by [x : y] = [1 : s]; the monomial with exponents
    (a0, a1) and complementary exponent a2 = deg - a0 - a1 restricts to
    s^{a1} (1 + 2 s)^{a2}.  Exact integer coefficient matrix; rank over the
    rationals via fraction-free elimination would be overkill -- float rank
    with a safe threshold is plenty at the certified degrees.
    """
    deg = int(Fraction(basis.polytope.sides[0]) * basis.m)
    coeffs = np.zeros((basis.size, deg + 1))
    for row, (a0, a1) in enumerate(basis.exponents):
        a2 = deg - a0 - a1
        # coefficients of s^a1 * (1 + 2 s)^a2
        binom = 1
        for k in range(a2 + 1):
            coeffs[row, a1 + k] = binom * (2**k)
            binom = binom * (a2 - k) // (k + 1)
    return int(np.linalg.matrix_rank(coeffs))


def dimension_sweep(polytope, sub, m_list) -> list:
    """(m, ambient dimension, image dimension) for each tensor power."""
    if not m_list:
        raise ValidationError("m_list must be nonempty")
    if list(m_list) != sorted(set(m_list)):
        raise ValidationError("m_list must be strictly increasing")
    out = []
    for m in m_list:
        basis = section_basis(polytope, m)
        rmap = restriction_map(basis, sub)
        out.append((m, basis.size, rmap.image_dims))
    return out
