import math

import numpy as np
import pytest
from scipy.stats import poisson

from qubitdist.errors import ValidationError
from qubitdist.stats import (COLUMNS, coherent_grid, coherent_stats, pdc_grid, pdc_stats,
                             triggered_mu_window, triggered_plus_coherent_stats, write_csv)


def test_coherent_point_against_poisson_tables():
    r = coherent_stats(0.1, 0.1)
    assert r.p11 == pytest.approx(poisson.pmf(1, 0.1) ** 2, rel=1e-14)
    assert r.pmul == pytest.approx(1 - poisson.cdf(1, 0.1) ** 2, rel=1e-12)
    # frozen: exp(-0.2) * 0.01 and 1 - 1.21 exp(-0.2)
    assert r.p11 == pytest.approx(8.187307530779819e-03, rel=1e-14)
    assert r.pmul == pytest.approx(9.335788775641807e-03, rel=1e-12)
    assert not r.condition_met


def test_dual_coherent_never_meets_the_condition():
    rows = coherent_grid(30)
    assert all(r.p11 <= r.pmul for r in rows)
    assert all(r.pmul >= r.bound for r in rows)


def test_pmul_small_mean_no_cancellation():
    r = coherent_stats(1e-9, 1e-9)
    assert r.pmul == pytest.approx(1e-18, rel=1e-6)


def test_ratio_edge_cases():
    assert coherent_stats(0.0, 0.0).ratio is None
    t = triggered_plus_coherent_stats(1.0, 0.0, 0.0)
    assert t.p11 == 0.0 and t.ratio is None


def test_pdc_limit_constant():
    # k pairs ~ Poisson(p); each pulse gets Binomial(k, 1/2) photons.
    # p11 ~ p/4 and pmul ~ 7 p^2 / 32, so pmul / p11^2 -> 7/2
    for p in (1e-4, 1e-3):
        r = pdc_stats(p)
        assert r.extra["mul_over_p11_sq"] == pytest.approx(3.5, rel=5 * p)
    assert pdc_stats(0.01).ratio == pytest.approx(114.3, rel=1e-3)
    vals = [r.extra["mul_over_p11_sq"] for r in pdc_grid(20)]
    assert max(vals) < 4.0


def test_pdc_range():
    with pytest.raises(ValidationError):
        pdc_stats(0.3)


def test_triggered_frozen_values():
    r = triggered_plus_coherent_stats(1.0, 0.0, 0.05, threshold=10)
    assert r.p11 == pytest.approx(0.05 * math.exp(-0.05), rel=1e-14)
    assert r.pmul == pytest.approx(1 - 1.05 * math.exp(-0.05), rel=1e-12)
    assert r.condition_met
    lo, hi = r.extra["mu_min"], r.extra["mu_star"]
    assert lo == 0.0
    # mu_star solves mu e^-mu = 10 (1 - e^-mu (1 + mu))
    assert hi * math.exp(-hi) == pytest.approx(10 * (1 - math.exp(-hi) * (1 + hi)), abs=1e-12)
    assert hi == pytest.approx(0.1877, abs=1e-4)


def test_triggered_window_with_multi_photon_trigger():
    lo, hi = triggered_mu_window(0.5, 0.001, 5.0)
    assert 0 < lo < hi
    for mu in (lo, hi):
        p11 = 0.5 * mu * math.exp(-mu)
        pmul = 1 - 0.999 * math.exp(-mu) * (1 + mu)
        assert p11 == pytest.approx(5 * pmul, abs=1e-10)
    assert triggered_mu_window(0.01, 0.5, 20.0) == (None, None)


def test_csv_columns(tmp_path):
    path = tmp_path / "c.csv"
    write_csv(coherent_grid(3), path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(COLUMNS["coherent"])
    assert len(lines) == 10
