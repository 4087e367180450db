from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import exp1

from afmc.characteristics import (CharacteristicTable, DensityModel, MeasureSpec, Thm61Constants, ball_growth,
                                  characteristic_analytic_measure, characteristic_analytic_point,
                                  characteristic_lattice_exact, characteristic_mc, check_condition7,
                                  convolution_power, density_eval, lattice_transition, llt_discrepancy,
                                  llt_surface, modulus_H, modulus_moment, supnorm_gap, theorem61_report)
from afmc.errors import ConfigurationError, DomainError
from afmc.functionals import FunctionalSpec
from afmc.processes import ProcessSpec, walk_knots
from afmc.sources import IncrementLaw, streams


def test_density_examples():
    assert density_eval(DensityModel.gaussian(1), 1.0, 0.0, 0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert density_eval(DensityModel.stable(1.0), 1.0, 0.0, 0.0) == pytest.approx(1 / math.pi, abs=1e-12)
    assert density_eval(DensityModel.gaussian(2), 1.0, [0, 0], [1, 0]) == pytest.approx(
        math.exp(-0.5) / (2 * math.pi), abs=1e-12)
    with pytest.raises(DomainError):
        density_eval(DensityModel.gaussian(1), 0.0, 0, 0)


@pytest.mark.parametrize("z", [0.3, 1.0, 2.5, 7.0])
def test_cauchy_quadrature_vs_closed_form(z):
    assert density_eval(DensityModel.stable(1.0), 1.0, 0.0, z) == pytest.approx(1 / (math.pi * (1 + z * z)), abs=1e-8)


def test_stable_alpha2_is_n02_density():
    for z in (0.0, 0.7, 2.0):
        expect = math.exp(-z * z / 4) / math.sqrt(4 * math.pi)
        assert density_eval(DensityModel.stable(2.0), 1.0, 0.0, z) == pytest.approx(expect, abs=1e-8)


def test_gaussian_density_normalized():
    v, _ = integrate.quad(lambda y: density_eval(DensityModel.gaussian(1), 0.7, 0.2, y), -np.inf, np.inf)
    assert v == pytest.approx(1.0, abs=1e-8)
    v2, _ = integrate.dblquad(lambda y, x: density_eval(DensityModel.gaussian(2), 0.5, [0, 0], [x, y]),
                              -12, 12, -12, 12, epsabs=1e-10)
    assert v2 == pytest.approx(1.0, abs=1e-6)
    v3, _ = integrate.quad(lambda y: density_eval(DensityModel.ou(), 0.4, 1.0, y), -np.inf, np.inf)
    assert v3 == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("alpha", [1.3, 1.5, 1.8])
def test_stable_self_similarity(alpha):
    m = DensityModel.stable(alpha)
    for r in (0.1, 0.5, 1.0, 2.0, 5.0):
        for x in (-2.0, -0.5, 0.0, 0.7, 3.0):
            lhs = density_eval(m, r, 0.0, x)
            rhs = r ** (-1 / alpha) * density_eval(m, 1.0, 0.0, r ** (-1 / alpha) * x)
            assert lhs == pytest.approx(rhs, abs=1e-6)


def test_stable_density_integrates_to_one():
    v, _ = integrate.quad(lambda y: density_eval(DensityModel.stable(1.5), 1.0, 0.0, y), -200, 200, limit=400,
                          points=[0.0])
    assert v == pytest.approx(1.0, abs=2e-3)  # heavy tails beyond +-200 carry ~1e-3


def test_lattice_transition_examples():
    assert lattice_transition(IncrementLaw.rademacher(), 4, 2, 0.0, 0.0) == 0.5
    lazy = IncrementLaw.lazy_lattice(0.5)
    assert lattice_transition(lazy, 4, 1, 0.0, 0.0) == 0.5
    assert lattice_transition(lazy, 4, 2, 0.0, 0.0) == pytest.approx(0.375, abs=1e-15)
    with pytest.raises(DomainError):
        lattice_transition(lazy, 4, 1, 0.0, 0.1234)


def test_convolution_rows_sum_to_one_and_symmetric():
    law = IncrementLaw.finite_lattice((-2, -1, 0, 1, 2), (0.1, 0.2, 0.4, 0.2, 0.1))
    for k in (1, 2, 7, 64, 333):
        lo, p = convolution_power(law, k)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert lo == -2 * k
        assert np.allclose(p, p[::-1], atol=1e-15)
    # doubling agrees with naive iteration
    lo, p = convolution_power(law, 5)
    q = np.array([1.0])
    for _ in range(5):
        q = np.convolve(q, [0.1, 0.2, 0.4, 0.2, 0.1])
    assert np.allclose(p, q, atol=1e-16)


def test_llt_discrepancy():
    lazy = IncrementLaw.lazy_lattice(0.5)
    s = math.sqrt(0.5)
    phi = lambda z: math.exp(-z * z / 2) / math.sqrt(2 * math.pi)
    hand = max(abs(s * 0.5 - phi(0)), abs(s * 0.25 - phi(1 / s)))
    assert llt_discrepancy(lazy, 1) == pytest.approx(hand, abs=1e-15)
    assert llt_discrepancy(lazy, 1) == pytest.approx(0.0454, abs=1e-4)
    e = [llt_discrepancy(lazy, k) for k in (4, 64, 1024)]
    assert e[0] > e[1] > e[2]
    with pytest.raises(ConfigurationError, match="period 2"):
        llt_discrepancy(IncrementLaw.rademacher(), 4)


def test_llt_surface_shape():
    lazy = IncrementLaw.lazy_lattice(0.5)
    surf = llt_surface(lazy, 256, [4, 16, 64, 256])
    assert set(surf) == {4, 16, 64, 256}
    assert all(v >= 0 for v in surf.values())


def test_analytic_point():
    g = DensityModel.gaussian(1)
    assert characteristic_analytic_point(0.0, 1.0, g, 0.0, 1.0, 0.0) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
    assert characteristic_analytic_point(0.0, 1.0, g, 0.3, 0.3, 0.0) == 0.0
    # closed form against direct quadrature off the point
    direct, _ = integrate.quad(lambda r: math.exp(-0.49 / (2 * r)) / math.sqrt(2 * math.pi * r), 0, 2)
    assert characteristic_analytic_point(0.7, 0.5, g, 0.0, 2.0, 0.0) == pytest.approx(0.5 * direct, abs=1e-10)
    with pytest.raises(DomainError):
        characteristic_analytic_point(0.0, 1.0, DensityModel.stable(1.0), 0.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        characteristic_analytic_point(0.0, 1.0, g, 1.0, 0.5, 0.0)


def test_analytic_point_ou_and_stable():
    ou = characteristic_analytic_point(0.0, 1.0, DensityModel.ou(), 0.0, 1.0, 0.0)
    ref, _ = integrate.quad(lambda r: (2 * math.pi * (1 - math.exp(-2 * r)) / 2) ** -0.5, 0, 1, limit=200)
    assert ou == pytest.approx(ref, abs=1e-7)
    a = 1.5
    st_val = characteristic_analytic_point(0.0, 1.0, DensityModel.stable(a), 0.0, 1.0, 0.0)
    assert st_val == pytest.approx(math.gamma(1 + 1 / a) / math.pi * a / (a - 1), abs=1e-7)
    # off the point, compare with the substitution-free integral over a region away from r = 0
    off = characteristic_analytic_point(0.0, 1.0, DensityModel.stable(a), 0.0, 1.0, 1.0)
    ref, _ = integrate.quad(lambda r: density_eval(DensityModel.stable(a), r, 1.0, 0.0), 0, 1, limit=200)
    assert off == pytest.approx(ref, abs=1e-6)


def test_analytic_measure_circle():
    mu = MeasureSpec.circle(1.0)
    g2 = DensityModel.gaussian(2)
    v = characteristic_analytic_measure(mu, g2, 0.0, 1.0, np.zeros(2))
    assert v == pytest.approx(exp1(0.5) / (2 * math.pi), abs=1e-9)
    assert exp1(0.5) == pytest.approx(0.5598, abs=1e-4)
    assert characteristic_analytic_measure(mu, g2, 0.5, 0.5, np.zeros(2)) == 0.0
    assert characteristic_analytic_measure(mu, g2, 0.0, 1.0, np.array([10.0, 0.0])) < 1e-8
    on = characteristic_analytic_measure(mu, g2, 0.0, 1.0, np.array([1.0, 0.0]))
    assert math.isfinite(on) and on > v
    with pytest.raises(DomainError):
        characteristic_analytic_measure(MeasureSpec.point([0.0, 0.0]), g2, 0.0, 1.0, np.zeros(2))


def test_heat_integral_circle_by_quadrature():
    mu = MeasureSpec.circle(1.0)
    x = np.array([0.4, 0.3])
    r = 0.3
    direct, _ = integrate.quad(
        lambda th: density_eval(DensityModel.gaussian(2), r, x, [math.cos(th), math.sin(th)]) / (2 * math.pi),
        0, 2 * math.pi)
    assert mu.heat_integral(r, x) == pytest.approx(direct, rel=1e-10)


def test_characteristic_mc_constant_exact():
    spec = FunctionalSpec.constant(1 / 64)
    m, se = characteristic_mc(spec, ProcessSpec("walk", IncrementLaw.rademacher()), 0.0, 0.0, 0.5, 50, 1, 64)
    assert m == 0.5 and se == 0.0
    with pytest.raises(DomainError):
        characteristic_mc(spec, ProcessSpec("walk", IncrementLaw.rademacher()), 0.0, 0.01, 0.5, 5, 1, 64)


def test_characteristic_mc_doob_vs_censored():
    law = IncrementLaw.rademacher()
    proc = ProcessSpec("sde_chain", law)
    m1, s1 = characteristic_mc(FunctionalSpec.doob_zero(), proc, 0.0, 0.0, 1.0, 5000, 2, 256)
    m2, s2 = characteristic_mc(FunctionalSpec.censored_point(0.0, law), proc, 0.0, 0.0, 1.0, 5000, 2, 256)
    assert abs(m1 - m2) < 3 * math.hypot(s1, s2)


def test_characteristic_mc_worker_invariance():
    law = IncrementLaw.lazy_lattice(0.5)
    args = (FunctionalSpec.censored_point(0.0, law), ProcessSpec("walk", law), 0.0, 0.0, 1.0, 4500, 3, 64)
    a = characteristic_mc(*args, workers=1, return_samples=True)[2]
    b = characteristic_mc(*args, workers=3, return_samples=True)[2]
    assert np.array_equal(a, b)


def test_lattice_exact_matches_mc():
    law = IncrementLaw.lazy_lattice(0.5)
    n = 64
    spec = FunctionalSpec.censored_point(0.0, law)
    unit = law.unit(n)
    xs = [0.0, 2 * unit, -5 * unit]
    exact = characteristic_lattice_exact(spec, law, n, 0.0, 1.0, xs)
    for x, e in zip(xs, exact):
        m, se = characteristic_mc(spec, ProcessSpec("walk", law), x, 0.0, 1.0, 20_000, 4, n)
        assert abs(m - e) < 4 * se
    assert characteristic_lattice_exact(spec, law, n, 0.5, 0.5, [0.0])[0] == 0.0
    with pytest.raises(DomainError):
        characteristic_lattice_exact(spec, law, n, 0.0, 1.0, [0.3 * unit])


def test_lattice_exact_small_case_by_enumeration():
    law = IncrementLaw.rademacher()
    n = 4
    spec = FunctionalSpec.censored_point(0.0, law)
    # enumerate all 2^5 paths of 5 steps (4 windows need 5 increments)
    import itertools
    unit = law.unit(n)
    total = 0.0
    for signs in itertools.product((-1, 1), repeat=5):
        k = np.concatenate([[0], np.cumsum(signs)]) * unit
        total += spec.kernel(k[:-2], k[1:-1], n).sum() / 32  # windows 0..3
    assert characteristic_lattice_exact(spec, law, n, 0.0, 1.0, [0.0])[0] == pytest.approx(total, abs=1e-15)


def test_characteristic_table_invariants(tmp_path):
    g = DensityModel.gaussian(1)
    ts = [0.0, 0.25, 0.5, 1.0]
    for x in (0.0, 0.5, -1.0):
        vals = [characteristic_analytic_point(0.0, 1.0, g, 0.0, t, x) for t in ts]
        assert vals[0] == 0.0
        assert all(v >= 0 for v in vals) and all(a <= b for a, b in zip(vals, vals[1:]))
    tab = CharacteristicTable([0.0, 0.0], [1.0, 1.0], [np.zeros(2), np.ones(2)], [1.0, 2.0], [0.0, 0.1], "analytic", 8, 0)
    tab.write_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "s,t,x_1,x_2,value,se,provenance,n,M"
    assert len(lines) == 3


def test_supnorm_gap():
    a = CharacteristicTable([0, 0], [1, 1], [0.0, 1.0], [1.0, 2.0], [0.01, 0.02], "mc")
    assert supnorm_gap(a, a).gap == 0.0
    b = CharacteristicTable([0, 0], [1, 1], [0.0, 1.0], [1.0, 2.5], [0.0, 0.0], "analytic")
    r = supnorm_gap(a, b)
    assert r.gap == 0.5 and r.argmax == 1 and r.noise_floor == pytest.approx(0.06)
    c = CharacteristicTable([0], [1], [0.0], [1.0], [0.0], "analytic")
    with pytest.raises(DomainError):
        supnorm_gap(a, c)


def test_modulus():
    n = 16
    line = (np.arange(n + 1) / n)[None]
    assert modulus_H(line, n, 0.5)[0] == pytest.approx(1.0)
    assert modulus_H(np.zeros((1, n + 1)), n, 0.5)[0] == 0.0


def _modulus_ladder(seed=21, M=300):
    # one fine walk per path, read at n = 256, 1024, 4096 (coupled across n)
    W = walk_knots(4096, 1.0, IncrementLaw.gaussian(1), streams(seed, 0, M))
    return [modulus_moment(W[:, :: 4096 // n], n, 0.4, 6.0)[0] for n in (256, 1024, 4096)]


def test_modulus_moment_bounded_in_n():
    m256, m1024, m4096 = _modulus_ladder()
    r1, r2 = m1024 / m256, m4096 / m1024
    # H grows with n under the coupling, but by a shrinking factor
    assert 1.0 <= r2 < r1 < 1.4
    assert r2 < 1.2


@pytest.mark.xfail(strict=True, reason="E[H^6] still grows ~13% from n=1024 to 4096; the 10% band is reached only at larger n")
def test_modulus_moment_within_ten_percent_at_1024():
    _, m1024, m4096 = _modulus_ladder()
    assert abs(m4096 - m1024) / m1024 < 0.10


def test_ball_growth():
    rng = np.random.default_rng(0)
    ang = rng.uniform(0, 2 * np.pi, 100)
    rad = rng.uniform(0, 2, 100)
    centers = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    radii = np.linspace(0.01, 2.0, 50)
    circle = MeasureSpec.circle(1.0)
    rep = ball_growth(circle, 1.0, 1.0, centers, radii)
    assert not rep.violated and rep.max_ratio <= 1.0
    # arc mass by independent sampling of the circle
    th = np.linspace(0, 2 * np.pi, 200001)[:-1]
    pts = np.stack([np.cos(th), np.sin(th)], axis=1)
    for c, R in [(np.array([1.0, 0.0]), 0.5), (np.array([0.3, 0.2]), 1.1), (np.array([1.5, 0.0]), 0.7)]:
        frac = np.mean(np.linalg.norm(pts - c, axis=1) < R)
        assert circle.ball_mass(c, R) == pytest.approx(frac, abs=1e-4)
    point = ball_growth(MeasureSpec.point([0.0, 0.0]), 1.0, 1.0, [np.zeros(2)], [1e-3, 1e-2])
    assert point.violated and point.max_ratio == pytest.approx(1000.0)
    empty = MeasureSpec.lattice_symbol(np.zeros((0, 2)), np.zeros(0))
    assert ball_growth(empty, 1.0, 1.0, [np.zeros(2)], [0.5]).max_ratio == 0.0


def test_condition7_and_report():
    ok = Thm61Constants(gamma=1.0, delta=0.4, theta=1.0, C_delta=6.0)
    bad = Thm61Constants(gamma=2.0, delta=0.1, theta=1.0, C_delta=3.0)
    assert check_condition7(ok) and not check_condition7(bad)
    rep = theorem61_report(delta_n=0.02, llt={4: 0.1}, modulus=(1.0, 0.1), constants=ok,
                           ballgrowth=ball_growth(MeasureSpec.circle(), 1, 1, [np.zeros(2)], [1.0]),
                           supnorm=supnorm_gap(
                               CharacteristicTable([0], [1], [0.0], [1.0], [0.0], "a"),
                               CharacteristicTable([0], [1], [0.0], [1.0], [0.0], "a")))
    assert set(rep) == {"cond1_delta", "cond2_supnorm", "cond4_llt", "cond5_modulus", "cond6_ballgrowth",
                        "cond7_relations"}
    json.dumps(rep)


def test_density_model_validation():
    with pytest.raises(ConfigurationError):
        DensityModel("weird")
    with pytest.raises(ConfigurationError):
        DensityModel.stable(2.5)
    with pytest.raises(ConfigurationError):
        DensityModel.lattice(IncrementLaw.gaussian(1), 4)
    m = DensityModel.lattice(IncrementLaw.lazy_lattice(0.5), 4)
    assert m.reference_measure == "counting"
    assert density_eval(m, 0.5, 0.0, 0.0) == lattice_transition(IncrementLaw.lazy_lattice(0.5), 4, 2, 0.0, 0.0)
