import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import beta as beta_fn
from scipy.special import comb

from torberg.bergman import (
    GramMatrix,
    ambient_gram,
    extension_report,
    extremal_check,
    fs_potential,
    gram,
    kernel_eval,
    kernel_trace,
    log_kernel_at,
    minimal_norm_extension,
    orthonormalize,
)
from torberg.errors import NotInImage, NotPositiveDefinite
from torberg.geometry import (
    LogGrid,
    Perturbation,
    SubvarietyDescriptor,
    build_model,
    interval,
    rectangle,
    reference_symbol,
    simplex,
)
from torberg.sections import restriction_map, section_basis


def make_model(kind="interval", sub="ambient", pert=Perturbation(), n=257, T=12.0, axis=0):
    poly = {"interval": interval(1), "rectangle": rectangle(1, 1), "simplex": simplex(1)}[kind]
    weight = reference_symbol(poly, pert, T)
    grid = LogGrid(poly.dim, T, n)
    return build_model(poly, SubvarietyDescriptor(sub, axis), weight, grid)


def pipeline(model, m):
    basis = section_basis(model.polytope, m)
    rmap = restriction_map(basis, model.sub)
    g = gram(model, rmap, m)
    return rmap, g, orthonormalize(g)


# --- Gram ------------------------------------------------------------------


def test_gram_offdiagonals_vanish():
    model = make_model()
    _, g, _ = pipeline(model, 4)
    off = g.entries - np.diag(np.diag(g.entries))
    assert np.all(off == 0.0)


def test_gram_beta_function_diagonal():
    # closed form: int e^{kt - m log(1+e^t)} e^t/(1+e^t)^2 dt = B(k+1, m-k+1)
    model = make_model()
    for m in (2, 5):
        _, g, _ = pipeline(model, m)
        d = np.diag(g.entries)
        expect = np.array([beta_fn(k + 1, m - k + 1) for k in range(m + 1)])
        np.testing.assert_allclose(d, expect, rtol=1e-12)
        ratios = d / d[0]
        np.testing.assert_allclose(
            ratios, [1.0 / comb(m, k) for k in range(m + 1)], rtol=1e-8
        )


def test_gram_diagonal_curve_brute_force():
    # 3x3 Gram of the diagonal model at m=1 against direct quadrature at
    # double resolution over a wider window
    model = make_model("rectangle", "diagonal_curve", n=65)
    _, g, _ = pipeline(model, 1)
    assert g.basis_size == 3
    for k in range(3):
        val, _ = quad(
            lambda t, k=k: np.exp(k * t - 2.0 * np.log1p(np.exp(t)))
            * 2.0
            * np.exp(t)
            / (1 + np.exp(t)) ** 2,
            -60,
            60,
            limit=400,
        )
        assert g.entries[k, k] == pytest.approx(val, rel=1e-10)


def test_gram_rejects_mismatched_m():
    model = make_model()
    basis = section_basis(model.polytope, 3)
    rmap = restriction_map(basis, model.sub)
    with pytest.raises(NotInImage):
        gram(model, rmap, 4)


def test_ambient_gram_separable_matches_windowed():
    pert = Perturbation("gaussian_bump", amplitude=0.3, center=(0.0, 0.0), width=1.5)
    flat = make_model("rectangle", "diagonal_curve", n=65)
    bumped = make_model("rectangle", "diagonal_curve", pert=pert, n=65)
    m = 2
    ga = ambient_gram(flat, m)  # separable fast path
    # windowed generic path on the same weight
    from torberg.bergman import _diag_entries_2d, _gram_rule
    from torberg.geometry import restrict_symbol

    rule = _gram_rule(flat, m, 2)
    ambient = restrict_symbol((flat.polytope, flat.weight, flat.grid), SubvarietyDescriptor("ambient"))
    d_win = _diag_entries_2d(
        ga.target_exponents.astype(float), m, ambient.u, ambient.log_density, rule
    )
    np.testing.assert_allclose(np.diag(ga.entries), d_win, rtol=1e-11)
    # bumped weight goes through the windowed path and stays finite/positive
    gb = ambient_gram(bumped, m)
    assert np.all(np.diag(gb.entries) > 0)


def test_simplex_ambient_gram_against_dirichlet_integral():
    # P^2 reference at m: entries are Dirichlet integrals
    # int y1^a y2^b (1-y1-y2)^{m-a-b} * 2 dy over the simplex
    #   = 2 a! b! (m-a-b)! / (m+2)!
    import math

    model = make_model("simplex", "ambient", n=33)
    m = 3
    _, g, _ = pipeline(model, m)
    d = np.diag(g.entries)
    exps = g.target_exponents
    for val, (a, b) in zip(d, exps):
        c = m - a - b
        expect = 2.0 * math.factorial(a) * math.factorial(b) * math.factorial(c)
        expect /= math.factorial(m + 2)
        assert val == pytest.approx(expect, rel=1e-9)


# --- orthonormalization ----------------------------------------------------


def test_orthonormalize_identity():
    g = GramMatrix(1, np.eye(3), np.arange(3), "test")
    onb = orthonormalize(g)
    np.testing.assert_allclose(onb.matrix, np.eye(3))


def test_orthonormalize_explicit_diagonal():
    g = GramMatrix(1, np.diag([4.0, 9.0]), np.arange(2), "test")
    onb = orthonormalize(g)
    np.testing.assert_allclose(onb.matrix, np.diag([0.5, 1.0 / 3.0]))


def test_orthonormalize_random_spd():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(5, 5))
    g = GramMatrix(1, a @ a.T + 5 * np.eye(5), np.arange(5), "test")
    onb = orthonormalize(g)
    np.testing.assert_allclose(
        onb.matrix.T @ g.entries @ onb.matrix, np.eye(5), atol=1e-12
    )


def test_orthonormalize_rejects_indefinite():
    g = GramMatrix(1, np.diag([1.0, -1.0]), np.arange(2), "test")
    with pytest.raises(NotPositiveDefinite):
        orthonormalize(g)


def test_conditioning_guard():
    g = GramMatrix(1, np.diag([1.0, 1e-30]), np.arange(2), "test")
    with pytest.raises(NotPositiveDefinite):
        orthonormalize(g)


# --- kernel ----------------------------------------------------------------


@pytest.mark.parametrize("m", [1, 4, 16, 64])
def test_constant_kernel_oracle(m):
    # mass-1 reference measure forces the kernel to be the constant m+1
    model = make_model()
    _, _, onb = pipeline(model, m)
    k = kernel_eval(model, None or pipeline(model, m)[0], onb, m)
    assert np.all(np.abs(k.values - (m + 1)) < 1e-6)


def test_trace_identity_small():
    for kind, sub, dims in [
        ("interval", "ambient", lambda m: m + 1),
        ("rectangle", "diagonal_curve", lambda m: 2 * m + 1),
    ]:
        model = make_model(kind, sub, n=65)
        for m in (1, 2, 8):
            rmap, g, onb = pipeline(model, m)
            tr = kernel_trace(model, rmap, m)
            assert tr == pytest.approx(dims(m), rel=1e-10)


def test_trace_identity_surface():
    model = make_model("simplex", "ambient", n=33)
    for m in (1, 2, 4):
        rmap, _, _ = pipeline(model, m)
        tr = kernel_trace(model, rmap, m)
        expect = (m + 1) * (m + 2) // 2
        assert tr == pytest.approx(expect, rel=1e-8)


def test_gauge_covariance():
    # shifting the weight by a constant leaves the kernel unchanged
    model = make_model("interval", "ambient", n=65)
    m = 6
    rmap, g, onb = pipeline(model, m)
    base = kernel_eval(model, rmap, onb, m).values

    shifted = make_model(
        "interval", "ambient", pert=Perturbation("gaussian_bump", amplitude=2.5, center=(0.0,), width=1e6), n=65
    )
    # a gaussian of huge width is a constant shift up to ~1e-10 over the window
    rmap2, g2, onb2 = pipeline(shifted, m)
    vals = kernel_eval(shifted, rmap2, onb2, m).values
    np.testing.assert_allclose(vals, base, rtol=1e-8)


def test_fs_potential_constant_shift():
    model = make_model("interval", "ambient", n=65)
    for m in (2, 16):
        rmap, _, onb = pipeline(model, m)
        pot = fs_potential(model, rmap, m, onb=onb)
        uz = model.zdata.u(model.zdata.grid.axis)
        np.testing.assert_allclose(pot.values - uz, np.log(m + 1) / m, atol=1e-9)


# --- extension -------------------------------------------------------------


def test_extension_identity_on_ambient():
    model = make_model("interval", "ambient", n=65)
    m = 3
    rmap, _, _ = pipeline(model, m)
    target = np.array([1.0, 2.0, -0.5, 0.3])
    coeffs, ratio = minimal_norm_extension(model, rmap, m, target)
    np.testing.assert_allclose(coeffs, target, rtol=1e-12)
    assert ratio == pytest.approx(1.0, rel=1e-12)


def test_extension_diagonal_lagrange_cross_check():
    model = make_model("rectangle", "diagonal_curve", n=65)
    m = 1
    rmap, _, _ = pipeline(model, m)
    target = np.array([1.0, 0.0, 0.0])  # the constant section on Z
    coeffs, ratio = minimal_norm_extension(model, rmap, m, target)
    assert ratio > 0 and np.isfinite(ratio)

    # independent solve: min ||W^{1/2} c|| subject to R c = target
    gx = ambient_gram(model, m)
    dx = np.diag(gx.entries)
    R = rmap.incidence_matrix()
    A = R / np.sqrt(dx)[None, :]
    y, *_ = np.linalg.lstsq(A, target, rcond=None)
    c2 = y / np.sqrt(dx)
    np.testing.assert_allclose(coeffs, c2, atol=1e-12)


def test_extension_rejects_bad_target():
    model = make_model("rectangle", "diagonal_curve", n=65)
    rmap, _, _ = pipeline(model, 1)
    with pytest.raises(NotInImage):
        minimal_norm_extension(model, rmap, 1, np.ones(5))


def test_extension_sweep_bounded():
    model = make_model("rectangle", "diagonal_curve", n=65)
    norms = []
    for m in (4, 8, 16):
        basis = section_basis(model.polytope, m)
        rmap = restriction_map(basis, model.sub)
        norms.append(extension_report(model, rmap, m).operator_norm)
    assert max(norms) / min(norms) < 10.0


# --- extremal property -----------------------------------------------------


def test_extremal_check_constant_kernel():
    model = make_model("interval", "ambient", n=65)
    m = 5
    rmap, _, _ = pipeline(model, m)
    for z in (-3.0, 0.0, 2.5):
        b, ray = extremal_check(model, rmap, m, [z])
        assert b == pytest.approx(m + 1, rel=1e-9)
        assert ray == pytest.approx(b, rel=1e-9)


def test_extremal_check_random_points_seeded_weight():
    rng = np.random.default_rng(42)
    pert = Perturbation(
        "gaussian_bump",
        amplitude=float(rng.uniform(0.1, 0.4)),
        center=(float(rng.uniform(-1, 1)),),
        width=float(rng.uniform(0.8, 1.6)),
    )
    model = make_model("interval", "ambient", pert=pert, n=65)
    m = 7
    rmap, _, _ = pipeline(model, m)
    for z in rng.uniform(-11, 11, size=10):
        b, ray = extremal_check(model, rmap, m, [float(z)])
        assert ray == pytest.approx(b, rel=1e-8)


def test_claim_bound_kernel_dominated_by_envelope_gap():
    # B(z) <= exp(-m (u_Z - P u)) sup B on the grid
    from torberg.envelope import equilibrium_envelope

    pert = Perturbation("gaussian_bump", amplitude=0.5, center=(0.0,), width=1.0)
    model = make_model("interval", "ambient", pert=pert, n=257)
    env = equilibrium_envelope(model, on_Z=True)
    m = 16
    rmap, _, onb = pipeline(model, m)
    k = kernel_eval(model, rmap, onb, m)
    uz = model.zdata.u(model.zdata.grid.axis)
    bound = np.exp(-m * (uz - env.values)) * np.max(k.values)
    assert np.all(k.values <= bound * (1 + 1e-10))
