import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from frao import families as fam
from frao.errors import (
    DegenerateTruncationError,
    DomainError,
    InvalidTruncationError,
    NotAvailableError,
    RadiusTooLargeError,
    ValidationError,
)
from frao.families import FamilySpec, Kind

from oracles import normal_christoffel, trigamma_series, truncnorm_moments_quad

EULER_GAMMA = 0.57721566490153286

ALL_SPECS = {
    "normal": (FamilySpec.normal(), [(0.0, 1.0), (2.0, 0.5), (-1.0, 3.0)]),
    "truncated-normal": (FamilySpec.truncated_normal(-2.0, 2.0), [(0.0, 1.0), (0.5, 0.7), (-1.0, 2.0)]),
    "gumbel": (FamilySpec.gumbel(), [(0.0, 1.0), (3.0, 2.0), (-1.0, 0.5)]),
    "truncated-gumbel": (FamilySpec.truncated_gumbel(0.0, 3000.0), [(1013.0, 558.0), (800.0, 400.0), (1500.0, 700.0)]),
    "lognormal": (FamilySpec.lognormal(), [(0.0, 1.0), (1.0, 0.5), (-0.5, 0.8)]),
    "truncated-lognormal": (FamilySpec.truncated_lognormal(0.2, 5.0), [(0.0, 1.0), (0.3, 0.6), (-0.2, 1.5)]),
    "gamma": (FamilySpec.gamma(), [(2.0, 1.0), (0.7, 3.0), (5.0, 0.5)]),
    "exponential": (FamilySpec.exponential(), [(1.0,), (0.5,), (3.0,)]),
    "triangular": (FamilySpec.triangular(-1.0, 1.0), [(0.0,), (0.5,), (-0.8,)]),
    "location-scale": (FamilySpec.location_scale(fam.LOGISTIC_BASE), [(0.0, 1.0), (1.0, 2.0), (-2.0, 0.5)]),
}


# ---------------------------------------------------------------- spec and domain


def test_truncation_presence_rules():
    with pytest.raises(InvalidTruncationError):
        FamilySpec(Kind.TRUNCATED_NORMAL)
    with pytest.raises(InvalidTruncationError):
        FamilySpec(Kind.NORMAL, (0.0, 1.0))
    with pytest.raises(InvalidTruncationError):
        FamilySpec.truncated_normal(2.0, 2.0)
    with pytest.raises(InvalidTruncationError):
        FamilySpec.truncated_normal(-math.inf, 2.0)
    assert FamilySpec.triangular(-1, 1).param_dim == 1
    assert FamilySpec.exponential().param_dim == 1
    assert FamilySpec.gamma().param_dim == 2


def test_family_dict_round_trip():
    for spec, _ in ALL_SPECS.values():
        assert FamilySpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize("spec,theta", [
    (FamilySpec.normal(), (0.0, 0.0)),
    (FamilySpec.normal(), (0.0, -1.0)),
    (FamilySpec.gamma(), (0.0, 1.0)),
    (FamilySpec.exponential(), (-1.0,)),
    (FamilySpec.triangular(-1, 1), (1.0,)),
    (FamilySpec.triangular(-1, 1), (-1.5,)),
    (FamilySpec.normal(), (0.0, 1e-9)),
    (FamilySpec.normal(), (0.0,)),
    (FamilySpec.normal(), (math.nan, 1.0)),
])
def test_out_of_domain_rejected(spec, theta):
    with pytest.raises(DomainError):
        fam.fim(spec, theta)


# ---------------------------------------------------------------- densities


def test_pdf_examples():
    assert fam.pdf(FamilySpec.normal(), (0, 1), 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert fam.pdf(FamilySpec.truncated_normal(-2, 2), (0, 1), 3.0) == 0.0
    tri = FamilySpec.triangular(-1, 1)
    assert fam.pdf(tri, (0.5,), -1.0) == 0.0
    assert fam.pdf(tri, (0.5,), 0.5) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("name", list(ALL_SPECS))
def test_pdf_integrates_to_one(name):
    spec, points = ALL_SPECS[name]
    lo, hi = spec.support
    for theta in points:
        f = lambda x: float(fam.pdf(spec, theta, np.array([x]))[0])
        if math.isfinite(lo) and math.isfinite(hi):
            mode = theta[0] if spec.kind is Kind.TRIANGULAR else None
            pts = [mode] if mode is not None else None
            val = integrate.quad(f, lo, hi, points=pts, limit=400)[0]
        else:
            val = integrate.quad(f, lo, hi, limit=400)[0]
        assert val == pytest.approx(1.0, abs=1e-7), (name, theta)


@pytest.mark.parametrize("name", [n for n in ALL_SPECS if ALL_SPECS[n][0].truncation])
def test_pdf_zero_outside_truncation(name):
    spec, points = ALL_SPECS[name]
    a, b = spec.truncation
    x = np.array([a - 1.0, a - 1e-9, b + 1e-9, b + 10.0])
    if spec.kind is Kind.TRUNCATED_LOGNORMAL:
        x = np.array([a * 0.5, a * (1 - 1e-9), b * (1 + 1e-9), b * 3])
    for theta in points:
        assert np.all(fam.pdf(spec, theta, x) == 0.0)


def test_lognormal_pdf_is_change_of_variables():
    ln, n = FamilySpec.lognormal(), FamilySpec.normal()
    x = np.linspace(0.05, 8, 50)
    np.testing.assert_allclose(fam.pdf(ln, (0.3, 0.7), x), fam.pdf(n, (0.3, 0.7), np.log(x)) / x, rtol=1e-13)


# ---------------------------------------------------------------- sampling


def test_sample_exponential_mean():
    n = 100_000
    x = fam.sample(FamilySpec.exponential(), (1.0,), n, seed=11)
    assert abs(x.mean() - 1.0) < 3 / math.sqrt(n)


def test_sample_truncated_gumbel_in_bounds():
    x = fam.sample(FamilySpec.truncated_gumbel(0, 3000), (1013, 558), 10_000, seed=3)
    assert x.min() >= 0.0 and x.max() <= 3000.0


@pytest.mark.parametrize("name", list(ALL_SPECS))
def test_sample_in_support_and_deterministic(name):
    spec, points = ALL_SPECS[name]
    lo, hi = spec.support
    for theta in points:
        x = fam.sample(spec, theta, 2000, seed=5)
        assert np.all(np.isfinite(x))
        assert x.min() >= lo and x.max() <= hi
        np.testing.assert_array_equal(x, fam.sample(spec, theta, 2000, seed=5))
        assert not np.array_equal(x, fam.sample(spec, theta, 2000, seed=6))


def test_sample_size_zero_rejected():
    with pytest.raises(ValidationError):
        fam.sample(FamilySpec.normal(), (0, 1), 0, seed=1)


@pytest.mark.parametrize("name", ["truncated-normal", "truncated-gumbel", "gamma", "triangular", "gumbel"])
def test_ppf_inverts_cdf(name):
    spec, points = ALL_SPECS[name]
    u = np.linspace(0.01, 0.99, 25)
    for theta in points:
        x = fam.ppf(spec, theta, u)
        lo = spec.support[0]
        for ui, xi in zip(u, x):
            f = lambda t: float(fam.pdf(spec, theta, np.array([t]))[0])
            start = lo if math.isfinite(lo) else xi - 60 * max(abs(theta[-1]), 1.0)
            pts = [theta[0]] if spec.kind is Kind.TRIANGULAR and start < theta[0] < xi else None
            assert integrate.quad(f, start, xi, points=pts, limit=200)[0] == pytest.approx(ui, abs=1e-7)


# ---------------------------------------------------------------- FIM closed forms


def test_fim_normal_exact():
    g = fam.fim(FamilySpec.normal(), (0, 1))
    np.testing.assert_array_equal(g.entries, [[1.0, 0.0], [0.0, 2.0]])
    assert g.source == "closed-form"


def test_fim_exponential_triangular():
    np.testing.assert_array_equal(fam.fim(FamilySpec.exponential(), (2.0,)).entries, [[0.25]])
    np.testing.assert_array_equal(fam.fim(FamilySpec.triangular(-1, 1), (0.0,)).entries, [[1.0]])
    m, a, b = 0.3, -1.0, 2.0
    assert fam.fim(FamilySpec.triangular(a, b), (m,)).entries[0, 0] == pytest.approx(1 / ((m - a) * (b - m)), rel=1e-15)


@pytest.mark.parametrize("alpha,beta", [(2.0, 1.0), (0.5, 3.0), (7.5, 0.2)])
def test_fim_gamma_trigamma_series(alpha, beta):
    g = fam.fim(FamilySpec.gamma(), (alpha, beta)).entries
    ref = np.array([[trigamma_series(alpha), -1 / beta], [-1 / beta, alpha / beta**2]])
    np.testing.assert_allclose(g, ref, rtol=1e-10)


def test_fim_gamma_value_at_2_1():
    g = fam.fim(FamilySpec.gamma(), (2.0, 1.0)).entries
    assert g[0, 0] == pytest.approx(math.pi**2 / 6 - 1, rel=1e-14)
    assert g[0, 1] == -1.0 and g[1, 1] == 2.0


def test_fim_truncated_normal_wide_interval():
    g = fam.fim(FamilySpec.truncated_normal(-20, 20), (0, 1)).entries
    np.testing.assert_allclose(g, [[1, 0], [0, 2]], atol=1e-8)


def test_fim_truncated_normal_monotone_convergence():
    errs = []
    for R in (5.0, 10.0, 20.0):
        g = fam.fim(FamilySpec.truncated_normal(-R, R), (0, 1)).entries
        errs.append(np.max(np.abs(g - [[1, 0], [0, 2]])))
    assert errs[0] > errs[1] >= errs[2]
    assert errs[2] < 1e-12


def test_gumbel_constants_and_beta():
    beta = fam.beta_integral()
    # Gamma''(2) = (1 - gamma)^2 + pi^2/6 - 1
    assert beta == pytest.approx((1 - EULER_GAMMA) ** 2 + math.pi**2 / 6 - 1, rel=1e-12)
    c = fam.gumbel_constants()
    assert c[0, 0] == 1.0
    assert c[0, 1] == pytest.approx(EULER_GAMMA - 1, rel=1e-14)
    assert c[1, 1] == pytest.approx(beta + 1, rel=1e-14)


def test_truncated_gumbel_wide_limit_and_nodes():
    # mass of [-60 s, 60 s] Gumbel is 1 to double precision on the left tail scale
    tg = FamilySpec.truncated_gumbel(-30.0, 300.0)
    g = fam.fim(tg, (0.0, 1.0)).entries
    np.testing.assert_allclose(g, fam.fim(FamilySpec.gumbel(), (0.0, 1.0)).entries, atol=1e-7)
    from frao.families import gumbel as gm

    spec = FamilySpec.truncated_gumbel(0, 3000)
    g200 = gm.truncated_fim(1013.0, 558.0, 0.0, 3000.0, nodes=200)
    g400 = gm.truncated_fim(1013.0, 558.0, 0.0, 3000.0, nodes=400)
    np.testing.assert_allclose(g200, g400, rtol=1e-10)
    np.testing.assert_array_equal(fam.fim(spec, (1013, 558)).entries, g200)
    assert fam.fim(spec, (1013, 558)).source == "quadrature"


def test_lognormal_fim_equals_normal():
    for th in [(0, 1), (1.3, 0.2), (-4, 5)]:
        np.testing.assert_array_equal(fam.fim(FamilySpec.lognormal(), th).entries,
                                      fam.fim(FamilySpec.normal(), th).entries)


def test_truncated_lognormal_delegates_bitwise():
    tln = FamilySpec.truncated_lognormal(0.2, 5.0)
    tn = FamilySpec.truncated_normal(math.log(0.2), math.log(5.0))
    for th in [(0, 1), (0.4, 0.3), (-1, 2)]:
        np.testing.assert_array_equal(fam.fim(tln, th).entries, fam.fim(tn, th).entries)
        np.testing.assert_array_equal(fam.christoffel_closed(tln, th).symbols,
                                      fam.christoffel_closed(tn, th).symbols)


def test_pushforward_spec():
    assert fam.pushforward_spec(FamilySpec.normal()) == FamilySpec.lognormal()
    pf = fam.pushforward_spec(FamilySpec.truncated_normal(math.log(0.2), math.log(5.0)))
    assert pf.kind is Kind.TRUNCATED_LOGNORMAL
    np.testing.assert_allclose(pf.truncation, (0.2, 5.0), rtol=1e-15)
    with pytest.raises(InvalidTruncationError):
        FamilySpec.truncated_lognormal(-1.0, 5.0)
    with pytest.raises(ValidationError):
        fam.pushforward_spec(FamilySpec.gamma())


@pytest.mark.parametrize("name", list(ALL_SPECS))
def test_fim_symmetric_positive_definite_sweep(name):
    spec, points = ALL_SPECS[name]
    rng = np.random.default_rng(0)
    n = 1000
    if spec.param_dim == 1:
        if spec.kind is Kind.TRIANGULAR:
            c = rng.uniform(-0.999, 0.999, (n, 1))
        else:
            c = np.exp(rng.uniform(-5, 5, (n, 1)))
    else:
        loc = np.array(points)[:, 0]
        scale = np.array(points)[:, 1]
        c = np.stack([rng.uniform(loc.min() - 1, loc.max() + 1, n),
                      rng.uniform(0.5, 1.5, n) * rng.choice(scale, n)], -1)
        if spec.kind is Kind.GAMMA:
            c = np.exp(rng.uniform(-2, 2, (n, 2)))
    g = fam.fim_array(spec, c)
    assert np.all(np.isfinite(g))
    np.testing.assert_array_equal(g, np.swapaxes(g, -1, -2))
    assert np.all(np.linalg.eigvalsh(g) > 0)


@pytest.mark.parametrize("name", list(ALL_SPECS))
def test_fim_monte_carlo_agrees(name):
    spec, points = ALL_SPECS[name]
    theta = points[0]
    mc = fam.fim_monte_carlo(spec, theta, 200_000, seed=99)
    g = fam.fim(spec, theta).entries
    assert mc.source == "monte-carlo"
    assert np.all(np.abs(mc.entries - g) <= 4 * mc.stderr + 1e-12), (mc.entries, g, mc.stderr)


def test_fim_monte_carlo_examples():
    mc = fam.fim_monte_carlo(FamilySpec.normal(), (0, 1), 1_000_000, seed=1)
    np.testing.assert_allclose(mc.entries, [[1, 0], [0, 2]], atol=0.02)
    mc = fam.fim_monte_carlo(FamilySpec.exponential(), (1,), 1_000_000, seed=1)
    np.testing.assert_allclose(mc.entries, [[1]], atol=0.02)
    with pytest.raises(ValidationError):
        fam.fim_monte_carlo(FamilySpec.normal(), (0, 1), 999, seed=1)


# ---------------------------------------------------------------- truncated moments


def test_truncated_moments_symmetric():
    tm = fam.truncated_moments((0.0, 1.3), -2.0, 2.0)
    assert abs(tm.mean) < 1e-15
    assert abs(tm.ds_mean) < 1e-15


def test_truncated_moments_wide_limit():
    tm = fam.truncated_moments((0.0, 1.0), -20.0, 20.0)
    assert abs(tm.mean) < 1e-8 and abs(tm.var - 1.0) < 1e-8


@pytest.mark.parametrize("theta,a,b", [((0.3, 0.8), -1.0, 2.0), ((1.5, 1.0), -2.0, 2.0),
                                       ((30.0, 7.5), 15.0, 90.0), ((-0.5, 2.0), 0.0, 1.0)])
def test_truncated_moments_against_quadrature(theta, a, b):
    tm = fam.truncated_moments(theta, a, b)
    m, v = truncnorm_moments_quad(*theta, a, b)
    assert tm.mean == pytest.approx(m, rel=1e-10, abs=1e-12)
    assert tm.var == pytest.approx(v, rel=1e-9)
    assert a <= tm.mean <= b and tm.var > 0


@pytest.mark.parametrize("theta,a,b", [((0.3, 0.8), -1.0, 2.0), ((1.5, 1.0), -2.0, 2.0),
                                       ((-0.5, 2.0), 0.0, 1.0)])
def test_truncated_moment_derivatives_finite_difference(theta, a, b):
    h = 1e-6
    mu, s = theta
    mq = lambda mu_, s_: truncnorm_moments_quad(mu_, s_, a, b)
    tm = fam.truncated_moments(theta, a, b)

    def d1(idx):
        e = np.array([h, 0.0]) if idx == 0 else np.array([0.0, h])
        p, q = mq(*(np.array(theta) + e)), mq(*(np.array(theta) - e))
        return [(p[k] - q[k]) / (2 * h) for k in range(2)]

    dmu, ds = d1(0), d1(1)
    # second partials: differentiate the analytic first partials (smooth) numerically
    def first(th):
        t = fam.truncated_moments(th, a, b)
        return np.array([t.dm_mean, t.ds_mean, t.dm_var, t.ds_var])

    fm = (first((mu + h, s)) - first((mu - h, s))) / (2 * h)
    fs = (first((mu, s + h)) - first((mu, s - h))) / (2 * h)
    pairs = [
        (tm.dm_mean, dmu[0]), (tm.ds_mean, ds[0]), (tm.dm_var, dmu[1]), (tm.ds_var, ds[1]),
        (tm.dmm_mean, fm[0]), (tm.dsm_mean, fs[0]), (tm.dss_mean, fs[1]),
        (tm.dmm_var, fm[2]), (tm.dsm_var, fs[2]), (tm.dss_var, fs[3]),
    ]
    for got, ref in pairs:
        assert got == pytest.approx(ref, rel=1e-4, abs=1e-7)
    # mixed partials agree from both orders
    assert tm.dsm_mean == pytest.approx(fm[1], rel=1e-4, abs=1e-7)
    assert tm.dsm_var == pytest.approx(fm[3], rel=1e-4, abs=1e-7)


def test_truncated_moments_degenerate():
    with pytest.raises(DegenerateTruncationError):
        fam.truncated_moments((0.0, 1.0), 60.0, 61.0)


# ---------------------------------------------------------------- Christoffel symbols


def test_christoffel_normal_values():
    G = fam.christoffel_closed(FamilySpec.normal(), (0, 1)).symbols
    assert G[1, 0, 0] == 0.5 and G[0, 0, 1] == -1.0 and G[0, 1, 0] == -1.0
    G = fam.christoffel_closed(FamilySpec.normal(), (3, 2)).symbols
    assert G[1, 1, 1] == -0.5
    np.testing.assert_array_equal(G, normal_christoffel(2.0))


def test_christoffel_truncated_normal_wide_limit():
    G = fam.christoffel_closed(FamilySpec.truncated_normal(-20, 20), (0, 1)).symbols
    np.testing.assert_allclose(G, normal_christoffel(1.0), atol=1e-6)


def test_christoffel_not_available():
    for spec, _ in (ALL_SPECS["gumbel"], ALL_SPECS["gamma"], ALL_SPECS["exponential"]):
        with pytest.raises(NotAvailableError):
            fam.christoffel_closed(spec, ALL_SPECS[spec.kind.value][1][0])


@settings(max_examples=60, deadline=None)
@given(mu=st.floats(-3, 3), s=st.floats(0.2, 3), a=st.floats(-4, 0), w=st.floats(0.5, 6))
def test_christoffel_lower_symmetry(mu, s, a, w):
    spec = FamilySpec.truncated_normal(a, a + w)
    try:
        G = fam.christoffel_closed(spec, (mu, s)).symbols
    except DegenerateTruncationError:
        return
    np.testing.assert_array_equal(G, np.swapaxes(G, -1, -2))


# ---------------------------------------------------------------- 1-parameter closed forms


def test_fr_distance_closed_examples():
    ex = FamilySpec.exponential()
    assert fam.fr_distance_closed(ex, (1.0,), (math.e,)) == pytest.approx(1.0, rel=1e-15)
    tri = FamilySpec.triangular(-1, 1)
    assert fam.fr_distance_closed(tri, (0.3,), (0.3,)) == 0.0
    with pytest.raises(NotAvailableError):
        fam.fr_distance_closed(FamilySpec.normal(), (0, 1), (0, 2))


def test_triangular_distance_bounded_by_pi():
    tri = FamilySpec.triangular(2.0, 5.0)
    eps = [1e-2, 1e-4, 1e-6]
    d = [fam.fr_distance_closed(tri, (2.0 + 3 * e,), (5.0 - 3 * e,)) for e in eps]
    assert all(x < math.pi for x in d)
    assert d[0] < d[1] < d[2]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-0.999, 0.999), min_size=3, max_size=3))
def test_triangular_distance_is_metric(m):
    tri = FamilySpec.triangular(-1, 1)
    d = lambda x, y: fam.fr_distance_closed(tri, (x,), (y,))
    assert d(m[0], m[1]) == d(m[1], m[0])
    assert d(m[0], m[2]) <= d(m[0], m[1]) + d(m[1], m[2]) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-8, 8), min_size=3, max_size=3), st.floats(-5, 5))
def test_exponential_distance_metric_and_scale_invariant(logs, logc):
    ex = FamilySpec.exponential()
    l = [math.exp(x) for x in logs]
    c = math.exp(logc)
    d = lambda x, y: fam.fr_distance_closed(ex, (x,), (y,))
    assert d(l[0], l[1]) == d(l[1], l[0])
    assert d(l[0], l[2]) <= d(l[0], l[1]) + d(l[1], l[2]) + 1e-12
    assert d(c * l[0], c * l[1]) == pytest.approx(d(l[0], l[1]), abs=1e-12)


def test_closed_sphere_examples():
    lo, hi = fam.closed_sphere_1d(FamilySpec.exponential(), (1.0,), 0.5)
    assert lo[0] == pytest.approx(0.60653065971263342, rel=1e-15)
    assert hi[0] == pytest.approx(1.6487212707001282, rel=1e-15)
    lo, hi = fam.closed_sphere_1d(FamilySpec.triangular(-1, 1), (0.0,), 0.5)
    assert lo[0] == pytest.approx(-math.sin(0.5), rel=1e-15)
    assert hi[0] == pytest.approx(math.sin(0.5), rel=1e-15)
    with pytest.raises(ValidationError):
        fam.closed_sphere_1d(FamilySpec.exponential(), (1.0,), 0.0)
    with pytest.raises(RadiusTooLargeError):
        fam.closed_sphere_1d(FamilySpec.triangular(-1, 1), (0.5,), 1.2)


@settings(max_examples=100, deadline=None)
@given(m=st.floats(-0.9, 0.9), delta=st.floats(0.01, 0.6), a=st.floats(-10, 10), w=st.floats(0.1, 20))
def test_closed_sphere_at_distance_delta(m, delta, a, w):
    tri = FamilySpec.triangular(a, a + w)
    c = a + w * (m + 1) / 2
    try:
        pts = fam.closed_sphere_1d(tri, (c,), delta)
    except RadiusTooLargeError:
        return
    for p in pts:
        assert fam.fr_distance_closed(tri, (c,), p) == pytest.approx(delta, abs=1e-12)


# ---------------------------------------------------------------- location-scale


def test_loc_scale_normal_base():
    c = fam.loc_scale_constants(fam.NORMAL_BASE)
    assert c.alpha == pytest.approx(1.0, abs=1e-10)
    assert c.gamma == pytest.approx(0.0, abs=1e-10)
    assert c.beta == pytest.approx(2.0, abs=1e-10)


def test_loc_scale_gumbel_base():
    c = fam.loc_scale_constants(fam.GUMBEL_BASE)
    assert c.alpha == pytest.approx(1.0, abs=1e-9)
    assert c.gamma == pytest.approx(EULER_GAMMA - 1, abs=1e-9)
    assert c.beta == pytest.approx(fam.beta_integral() + 1, abs=1e-9)
    np.testing.assert_allclose(c.change_of_basis @ c.change_of_basis.T, c.matrix, atol=1e-12)


@pytest.mark.parametrize("base", [fam.NORMAL_BASE, fam.LOGISTIC_BASE, fam.student_base(5.0)])
def test_loc_scale_even_base_has_zero_gamma(base):
    c = fam.loc_scale_constants(base)
    assert abs(c.gamma) < 1e-10


def test_logistic_constants_closed_form():
    c = fam.loc_scale_constants(fam.LOGISTIC_BASE)
    assert c.alpha == pytest.approx(1 / 3, rel=1e-9)
    assert c.beta == pytest.approx((math.pi**2 + 3) / 9, rel=1e-9)


def test_scaled_fim_constant_over_grid():
    M, S = np.meshgrid(np.linspace(-3, 3, 5), np.linspace(0.2, 4, 5))
    c = np.stack([M.ravel(), S.ravel()], -1)
    for spec, tol in ((FamilySpec.normal(), 0.0), (FamilySpec.gumbel(), 1e-8),
                      (FamilySpec.location_scale(fam.LOGISTIC_BASE), 1e-8)):
        g = fam.fim_array(spec, c) * (c[:, 1] ** 2)[:, None, None]
        assert np.max(np.abs(g - g[0])) <= tol * np.max(np.abs(g[0]))


# ---------------------------------------------------------------- mean


@pytest.mark.parametrize("name", list(ALL_SPECS))
def test_mean_matches_quadrature(name):
    spec, points = ALL_SPECS[name]
    lo, hi = spec.support
    for theta in points:
        f = lambda x: x * float(fam.pdf(spec, theta, np.array([x]))[0])
        pts = [theta[0]] if spec.kind is Kind.TRIANGULAR else None
        ref = integrate.quad(f, lo, hi, points=pts, limit=400)[0] if pts else integrate.quad(f, lo, hi, limit=400)[0]
        assert fam.mean(spec, theta) == pytest.approx(ref, rel=1e-7, abs=1e-9)
