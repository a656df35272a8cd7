from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import ks_2samp

from two_step_agent.errors import DegenerateCompositionError, InsufficientDofError
from two_step_agent.plate import (AuxDraw, PlateParams, compose_phi, compose_stats, dump_triples,
                                  explicit_plate_phi, explicit_plate_rows, sample_aux)
from two_step_agent.predictor import fit_ols_no_intercept


def aux_from_rows(ex, ey, ea):
    """The auxiliary variables that a given set of standard-normal rows implies."""
    n = len(ex)
    cx, cy, ca = ex - ex.mean(), ey - ey.mean(), ea - ea.mean()
    u_xy = np.sum(((cx + cy) / np.sqrt(2)) ** 2)
    v_xy = np.sum(((cx - cy) / np.sqrt(2)) ** 2)
    u_xa = np.sum(((cx + ca) / np.sqrt(2)) ** 2)
    v_xa = np.sum(((cx - ca) / np.sqrt(2)) ** 2)
    return AuxDraw(ex.sum(), ey.sum(), ea.sum(), np.sum(cx * cx), u_xy, v_xy, u_xa, v_xa)


def test_zero_noise_slope():
    # all noise scales zero: phi = b + d*e + (a + e*mu_a + mu_y) / mu_x
    p = PlateParams(alpha_x_sigma=0.0, alpha_a_sigma=0.0, alpha_y_sigma=0.0, n=1000)
    n = 1000
    aux = AuxDraw(0.0, 0.0, 0.0, n - 1.0, n - 1.0, n - 1.0, n - 1.0, n - 1.0)
    assert compose_phi(p, aux) == pytest.approx(0.2)


def test_stats_at_zero_aux():
    p = PlateParams(n=10)
    st = compose_stats(p, AuxDraw.zeros())
    assert st.s1 == pytest.approx(10 * 80.0 ** 2)
    assert st.s2 == 0.0 and st.s3 == 0.0 and st.s7 == 0.0
    assert st.s4 == pytest.approx(12.0 * 10 * 80.0)
    assert st.s5 == pytest.approx(1.0 * 10 * 80.0 * 2.0)


def test_composition_reproduces_explicit_ols_exactly():
    g = np.random.default_rng(3)
    for n in (5, 50, 400):
        ex, ey, ea = g.standard_normal((3, n))
        p = PlateParams(n=n, alpha_x_sigma=7.0, alpha_a_mu=1.5, alpha_y_mu=0.3, n_e=1.3)
        x = p.alpha_x_mu + p.alpha_x_sigma * ex
        a = p.d * x + p.alpha_a_mu + p.alpha_a_sigma * ea
        y = p.a + p.b * x + p.n_e * a + p.alpha_y_mu + p.alpha_y_sigma * ey
        direct = fit_ols_no_intercept((x, y)).phi
        assert compose_phi(p, aux_from_rows(ex, ey, ea)) == pytest.approx(direct, rel=1e-10)


def test_minus_sign_variant_breaks_exactness():
    g = np.random.default_rng(4)
    n = 20
    ex, ey, ea = g.standard_normal((3, n))
    aux = aux_from_rows(ex, ey, ea)
    st_plus = compose_stats(PlateParams(n=n), aux)
    st_minus = compose_stats(PlateParams(n=n), aux, s7_minus=True)
    assert st_plus.s7 == pytest.approx(np.sum(ex ** 2))
    assert st_minus.s7 != pytest.approx(np.sum(ex ** 2))


def test_sample_aux_moments():
    n = 50
    aux = sample_aux(n, seed=0, size=200_000)
    for v in (aux.s_x, aux.s_y, aux.s_a):
        assert np.mean(v) == pytest.approx(0.0, abs=0.05)
        assert np.var(v) == pytest.approx(n, rel=0.02)
    for v in (aux.z_xx, aux.u_xy, aux.v_xy, aux.u_xa, aux.v_xa):
        assert np.mean(v) == pytest.approx(n - 1, rel=0.01)
        assert np.var(v) == pytest.approx(2 * (n - 1), rel=0.03)


def test_sample_aux_scalar_and_errors():
    aux = sample_aux(10, seed=1)
    assert isinstance(aux.s_x, float)
    with pytest.raises(InsufficientDofError):
        sample_aux(1, seed=0)
    with pytest.raises(InsufficientDofError):
        PlateParams(n=1)


def test_mc_identity_sum_of_squares():
    # E[sum eps^2] = n; the plus-sign composition matches, the minus sign is off by 2
    n = 1000
    aux = sample_aux(n, seed=11, size=100_000)
    s7 = compose_stats(PlateParams(n=n), aux).s7
    se = np.std(s7) / np.sqrt(len(s7))
    assert abs(np.mean(s7) - n) < 3 * se
    s7_minus = compose_stats(PlateParams(n=n), aux, s7_minus=True).s7
    assert abs(np.mean(s7_minus) - n) > 3 * se


def test_mc_identity_cross_products():
    # sum eps_x eps_y: mean 0, variance n, Cov(., s_x s_y) = n
    n = 1000
    aux = sample_aux(n, seed=12, size=100_000)
    s8 = compose_stats(PlateParams(n=n), aux).s8
    m = len(s8)
    assert abs(np.mean(s8)) < 3 * np.sqrt(n / m)
    assert np.var(s8) == pytest.approx(n, rel=0.03)
    prod = aux.s_x * aux.s_y
    cov = np.cov(s8, prod)[0, 1]
    # explicit-sum oracle: Cov(sum ex*ey, sum ex * sum ey) = sum E[ex^2 ey^2] = n
    se = np.std((s8 - s8.mean()) * (prod - prod.mean())) / np.sqrt(m)
    assert abs(cov - n) < 3 * se


@pytest.mark.parametrize("n", [5, 50, 1000])
def test_phi_distribution_matches_explicit_plate(n):
    p = PlateParams(n=n)
    collapsed = compose_phi(p, sample_aux(n, seed=21, size=2000))
    g = np.random.default_rng(22)
    explicit = np.array([explicit_plate_phi(p, g) for _ in range(2000)])
    assert ks_2samp(collapsed, explicit).statistic <= 0.05


def test_explicit_rows_shapes():
    x, a, y = explicit_plate_rows(PlateParams(n=7), seed=0)
    assert x.shape == a.shape == y.shape == (7,)


def test_degenerate_denominator():
    p = PlateParams(n=10, alpha_x_mu=0.0)
    with pytest.raises(DegenerateCompositionError) as info:
        compose_phi(p, AuxDraw.zeros())
    assert info.value.aux == AuxDraw.zeros()


def test_vectorised_matches_scalar():
    p = PlateParams(n=30)
    aux = sample_aux(30, seed=5, size=4)
    vec = compose_phi(p, aux)
    for i in range(4):
        one = AuxDraw(*(getattr(aux, f)[i] for f in aux.as_dict()))
        assert compose_phi(p, one) == pytest.approx(vec[i])


def test_dump_triples(tmp_path):
    path = tmp_path / "t.csv"
    dump_triples(replace(PlateParams(), n=20), 3, 0, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0].split(",")[-1] == "phi"
