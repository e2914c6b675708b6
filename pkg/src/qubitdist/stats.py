"""Photon-number statistics of candidate sources.

``p11`` is the probability of exactly one photon in each of the reference and
signal pulses, ``pmul`` the probability of two or more photons in at least
one of them (the union event). A source is usable when ``p11`` exceeds
``pmul`` by a user-chosen margin.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.stats import poisson

from .errors import ValidationError

DEFAULT_THRESHOLD = 20.0
PDC_MAX_PAIR_PROB = 0.2
# pair-number terms kept in the PDC series; Poisson(0.2) tail beyond is < 1e-30
PDC_TERMS = 40
MU_SCAN_MAX = 10.0


@dataclass
class StatsResult:
    source: str
    p11: float
    pmul: float
    threshold: float
    bound: float | None = None
    extra: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.p11 <= 1.0 and 0.0 <= self.pmul <= 1.0):
            raise ValidationError("probabilities out of range")
        if self.p11 + self.pmul > 1.0 + 1e-12:
            raise ValidationError("p11 + pmul exceeds 1")

    @property
    def ratio(self) -> float | None:
        """p11 / pmul, ``inf`` when only pmul vanishes, ``None`` when both do."""
        if self.pmul == 0.0:
            return math.inf if self.p11 > 0 else None
        return self.p11 / self.pmul

    @property
    def condition_met(self) -> bool:
        return self.p11 > 0 and self.p11 >= self.threshold * self.pmul

    def as_dict(self) -> dict:
        return {"source": self.source, **self.params, "p11": self.p11, "pmul": self.pmul,
                "bound": self.bound, "ratio": self.ratio, "threshold": self.threshold,
                "condition_met": self.condition_met, **self.extra}


def _check_mean(name, x):
    if not (x >= 0 and math.isfinite(x)):
        raise ValidationError(f"{name} must be a finite non-negative number, got {x}")


def coherent_stats(nu: float, mu: float, threshold: float = DEFAULT_THRESHOLD) -> StatsResult:
    """Two independent weak coherent pulses with means ``nu`` (signal) and ``mu`` (reference).

    Also reports the leading-order lower bound ``exp(-(nu+mu)) (nu^2+mu^2)/2``
    on ``pmul``.
    """
    _check_mean("nu", nu)
    _check_mean("mu", mu)
    p11 = math.exp(-(nu + mu)) * nu * mu
    # 1 - P(signal <= 1) P(reference <= 1), written to avoid cancellation
    a = math.exp(-nu) * (1 + nu)
    b = math.exp(-mu) * (1 + mu)
    pmul = -math.expm1(math.log(a) + math.log(b))
    bound = math.exp(-(nu + mu)) * (nu ** 2 + mu ** 2) / 2
    return StatsResult("coherent", p11, pmul, threshold, bound, params={"nu": nu, "mu": mu})


def _pdc_distribution(p: float, terms: int = PDC_TERMS):
    """Pair-number weights with P(one in each pulse | k) and P(both pulses <= 1 | k)."""
    k = np.arange(terms)
    w = poisson.pmf(k, p)
    one = k / 2.0 ** k  # Binomial(k, 1/2) at 1
    low = (1 + k) / 2.0 ** k  # Binomial(k, 1/2) at 0 or 1
    return w, one, low


def pdc_stats(pair_prob: float, threshold: float = DEFAULT_THRESHOLD) -> StatsResult:
    """Pair source routed through the two-arm arrangement into a single output path.

    Pairs arrive as Poisson(``pair_prob``) events. Each pair sends its H
    photon into the reference pulse and its V photon into the signal pulse,
    and each photon survives the output beamsplitter with probability 1/2.
    The ``pmul / p11**2`` constant is reported as ``mul_over_p11_sq``; it
    tends to 7/2 as the pair probability vanishes.
    """
    if not 0.0 <= pair_prob <= PDC_MAX_PAIR_PROB:
        raise ValidationError(f"pair_prob must lie in [0, {PDC_MAX_PAIR_PROB}], got {pair_prob}")
    w, one, low = _pdc_distribution(pair_prob)
    p11 = float(np.sum(w * one ** 2))
    # 1 - sum w low^2; the k = 0, 1 terms have low = 1 and drop out
    pmul = float(np.sum(w[2:] * (1 - low[2:] ** 2)))
    extra = {"mul_over_p11_sq": pmul / p11 ** 2 if p11 > 0 else None}
    return StatsResult("pdc", p11, pmul, threshold, None, extra, params={"pair_prob": pair_prob})


def triggered_plus_coherent_stats(trigger_p1: float, trigger_pmul: float, mu: float,
                                  threshold: float = DEFAULT_THRESHOLD) -> StatsResult:
    """Heralded signal photon plus a weak coherent reference of mean ``mu``.

    ``extra`` holds ``mu_min`` and ``mu_star``: the condition
    ``p11 >= threshold * pmul`` holds for ``mu_min <= mu <= mu_star`` (both
    ``None`` if it holds nowhere on (0, 10]).
    """
    if trigger_p1 < 0 or trigger_pmul < 0 or trigger_p1 + trigger_pmul > 1 + 1e-12:
        raise ValidationError("trigger probabilities must be non-negative with p1 + pmul <= 1")
    _check_mean("mu", mu)
    p11, pmul = _triggered(trigger_p1, trigger_pmul, mu)
    lo, hi = triggered_mu_window(trigger_p1, trigger_pmul, threshold)
    return StatsResult("triggered", p11, pmul, threshold, None, {"mu_min": lo, "mu_star": hi},
                       params={"trigger_p1": trigger_p1, "trigger_pmul": trigger_pmul, "mu": mu})


def _triggered(p1, q, mu):
    p11 = p1 * math.exp(-mu) * mu
    pmul = 1.0 - (1.0 - q) * math.exp(-mu) * (1 + mu)
    return p11, max(pmul, 0.0)


def triggered_mu_window(p1: float, q: float, threshold: float) -> tuple[float | None, float | None]:
    """Range of reference means where ``p11 >= threshold * pmul``."""

    def margin(mu):
        p11, pmul = _triggered(p1, q, mu)
        return p11 - threshold * pmul

    grid = np.concatenate([[0.0], np.geomspace(1e-8, MU_SCAN_MAX, 2000)])
    vals = np.array([margin(m) for m in grid])
    ok = np.nonzero(vals >= 0)[0]
    ok = ok[grid[ok] > 0] if p1 > 0 else ok[:0]
    if ok.size == 0:
        return None, None
    i, j = ok[0], ok[-1]
    lo = grid[i] if i == 0 or vals[i - 1] >= 0 else brentq(margin, grid[i - 1], grid[i])
    if q == 0:
        lo = 0.0
    hi = grid[j] if j == len(grid) - 1 else brentq(margin, grid[j], grid[j + 1])
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# grids and CSV

COHERENT_COLUMNS = ("nu", "mu", "p11", "pmul", "bound", "ratio", "condition_met")
PDC_COLUMNS = ("pair_prob", "p11", "pmul", "ratio", "mul_over_p11_sq", "condition_met")
TRIGGERED_COLUMNS = ("trigger_p1", "trigger_pmul", "mu", "p11", "pmul", "ratio", "condition_met")
COLUMNS = {"coherent": COHERENT_COLUMNS, "pdc": PDC_COLUMNS, "triggered": TRIGGERED_COLUMNS}


def coherent_grid(n: int = 50, lo: float = 0.0, hi: float = 1.0, threshold=DEFAULT_THRESHOLD):
    axis = np.linspace(lo, hi, n)
    return [coherent_stats(float(a), float(b), threshold) for a in axis for b in axis]


def pdc_grid(n: int = 50, hi: float = PDC_MAX_PAIR_PROB, threshold=DEFAULT_THRESHOLD):
    return [pdc_stats(float(p), threshold) for p in np.geomspace(1e-5, hi, n)]


def triggered_grid(trigger_p1, trigger_pmul, n: int = 50, hi: float = 1.0, threshold=DEFAULT_THRESHOLD):
    return [triggered_plus_coherent_stats(trigger_p1, trigger_pmul, float(m), threshold)
            for m in np.linspace(0.0, hi, n)]


def write_csv(results, path, source: str | None = None):
    if not results:
        raise ValidationError("no results to write")
    source = source or results[0].source
    cols = COLUMNS[source]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for r in results:
            w.writerow({k: _csv_value(v) for k, v in r.as_dict().items()})


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    return v
