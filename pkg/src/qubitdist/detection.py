"""Detectors, the diagonal-basis analyzer on mode X, coincidence
post-selection and the feed-forward phase correction on mode Y.

Photon counting splits a pure state into branches labelled by the exact
occupation of the absorbed detector modes. Each branch keeps a pure
conditional state, so detector inefficiency enters only as a click
probability per branch and no density matrices are needed.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .fock import FockState, ModeLabel, apply_sequence, apply_transform
from .layout import WINDOW_BIN, decoder_paths
from .optics import ElementSpec, build_element

RESOLVING = ("threshold", "number-resolving")
POLICIES = ("abort", "random")
# Under the i-phase convention the decoder's two reflections leave Y with a
# fixed relative phase pi between H and V; a calibrated compensator on Y
# removes it, so it is folded into the feed-forward correction.
STATIC_Y_FLIP = {"real": False, "i": True}


@dataclass(frozen=True)
class DetectorModel:
    eta: float = 1.0
    resolving: str = "threshold"

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError(f"detector efficiency must lie in [0, 1], got {self.eta}")
        if self.resolving not in RESOLVING:
            raise ValidationError(f"detector resolving must be one of {RESOLVING}")

    def to_config(self) -> dict:
        return {"detector.eta": self.eta, "detector.resolving": self.resolving}


def click_probability(n: int, model: DetectorModel) -> float:
    """Probability that ``n`` incident photons produce a click (no dark counts)."""
    if n < 0:
        raise ValidationError("photon number must be non-negative")
    return 1.0 - (1.0 - model.eta) ** n


def count_distribution(n: int, model: DetectorModel) -> list[float]:
    """Registered-count distribution Binomial(n, eta) for ``k = 0..n``."""
    if n < 0:
        raise ValidationError("photon number must be non-negative")
    eta = model.eta
    return [math.comb(n, k) * eta ** k * (1 - eta) ** (n - k) for k in range(n + 1)]


def _response(n: int, model: DetectorModel) -> list[tuple[int, float]]:
    """(registered value, probability) pairs for one detector seeing ``n`` photons."""
    if model.resolving == "threshold":
        p = click_probability(n, model)
        return [(v, q) for v, q in ((0, 1.0 - p), (1, p)) if q > 0]
    return [(k, q) for k, q in enumerate(count_distribution(n, model)) if q > 0]


@dataclass
class DetectionOutcome:
    """One branch of an analyzer measurement.

    ``pattern`` maps ``(detector, timebin)`` to the registered click (or
    count) and lists non-zero entries only. ``photon_counts`` holds the actual
    photon numbers that reached each detector in this branch.
    """

    pattern: dict
    probability: float
    conditional: FockState
    photon_counts: dict = field(default_factory=dict)

    def registered(self, detector: str, timebin: int) -> int:
        return self.pattern.get((detector, timebin), 0)


@lru_cache(maxsize=None)
def _mode_sets(registry, port):
    p = decoder_paths(port)
    det = {}
    for name, path in (("D", p["D"]), ("Dbar", p["Db"])):
        for m in registry.path_modes(path):
            det[registry.index(m)] = (name, m.timebin)
    return det


@lru_cache(maxsize=None)
def analyzer_transforms(registry, port: str = "3", convention: str = "real"):
    p = decoder_paths(port)
    specs = [
        ElementSpec("HWP", (p["X"],), angle=45.0, name="HWP_X"),
        ElementSpec("PBS", (p["X"], p["vX"]), (p["D"], p["Db"]), convention=convention, name="PBS_X"),
    ]
    return tuple(build_element(s, registry) for s in specs)


def _branches(state: FockState, absorb: dict):
    """Group terms by the exact occupation of the absorbed modes."""
    groups = defaultdict(dict)
    for key, amp in state.items():
        hit = tuple(i for i in key if i in absorb)
        rest = tuple(i for i in key if i not in absorb)
        g = groups[hit]
        g[rest] = g.get(rest, 0j) + amp
    return groups


def _patterns(counts: dict, model: DetectorModel):
    """Enumerate registered patterns and their probabilities for given photon counts."""
    items = sorted(counts.items())
    out = [({}, 1.0)]
    for det, n in items:
        nxt = []
        for pat, p in out:
            for v, q in _response(n, model):
                new = dict(pat)
                if v:
                    new[det] = v
                nxt.append((new, p * q))
        out = nxt
    return out


def measure_analyzer_X(state: FockState, model: DetectorModel, port: str = "3",
                       convention: str = "real") -> list[DetectionOutcome]:
    """Project mode X onto the diagonal basis and count photons at D and Dbar.

    The analyzer's HWP(45) and PBS are applied here. The returned outcomes
    cover every branch and click pattern, including no-click events, and
    their probabilities sum to the squared norm of ``state``.
    """
    state = apply_sequence(state, analyzer_transforms(state.registry, port, convention))
    return count_analyzer(state, model, port)


def count_analyzer(state: FockState, model: DetectorModel, port: str = "3") -> list[DetectionOutcome]:
    """Photon counting at D and Dbar on a state that already passed the analyzer optics."""
    reg = state.registry
    absorb = _mode_sets(reg, port)
    outcomes = []
    for hit, rest in _branches(state, absorb).items():
        weight = sum(abs(a) ** 2 for a in rest.values())
        if weight <= 0:
            continue
        counts = Counter(absorb[i] for i in hit)
        nrm = math.sqrt(weight)
        cond = FockState(reg, {k: a / nrm for k, a in rest.items()}, _check=False)
        for pattern, q in _patterns(dict(counts), model):
            if q * weight > 0:
                outcomes.append(DetectionOutcome(pattern, weight * q, cond, dict(counts)))
    return outcomes


@dataclass
class AcceptedOutcome:
    """A coincidence that passed post-selection, before phase correction."""

    x_result: str  # "D" or "Dbar"
    probability: float
    conditional: FockState
    x_pattern: dict
    y_photons: int
    flagged: bool = False  # double click resolved by the random policy


@lru_cache(maxsize=None)
def _y_groups(registry, port, window):
    y = decoder_paths(port)["Y"]
    return frozenset(registry.index(m) for m in registry.path_modes(y) if m.timebin == window)


def postselect_coincidence(outcomes: Iterable[DetectionOutcome], model: DetectorModel,
                           window: int = WINDOW_BIN, port: str = "3",
                           policy: str = "abort") -> tuple[float, list[AcceptedOutcome]]:
    """Keep outcomes with an X click and a Y click, both in time bin ``window``.

    X clicks outside the window are ignored (the detectors are gated). With
    number-resolving detectors exactly one registered photon is required in
    each of X and Y. A double click in the analyzer aborts by default; with
    ``policy="random"`` it is assigned to D or Dbar with probability 1/2 each
    and flagged.
    """
    if policy not in POLICIES:
        raise ValidationError(f"unknown double-click policy {policy!r}")
    resolving = model.resolving == "number-resolving"
    accepted = []
    total = 0.0
    for out in outcomes:
        d = out.registered("D", window)
        db = out.registered("Dbar", window)
        if resolving:
            if d + db != 1:
                continue
            choices = [("D" if d else "Dbar", 1.0, False)]
        else:
            if not (d or db):
                continue
            if d and db:
                if policy == "abort":
                    continue
                choices = [("D", 0.5, True), ("Dbar", 0.5, True)]
            else:
                choices = [("D" if d else "Dbar", 1.0, False)]
        reg = out.conditional.registry
        ymodes = _y_groups(reg, port, window)
        by_n = defaultdict(dict)
        for key, amp in out.conditional.items():
            n = sum(1 for i in key if i in ymodes)
            by_n[n][key] = amp
        for n, terms in by_n.items():
            if n == 0:
                continue
            w = sum(abs(a) ** 2 for a in terms.values())
            if resolving:
                py = count_distribution(n, model)[1]
            else:
                py = click_probability(n, model)
            p = out.probability * w * py
            if p <= 0:
                continue
            nrm = math.sqrt(w)
            cond = FockState(reg, {k: a / nrm for k, a in terms.items()}, _check=False)
            for label, share, flag in choices:
                accepted.append(AcceptedOutcome(label, p * share, cond, out.pattern, n, flag))
                total += p * share
    return total, accepted


def correct_phase(state: FockState, outcome: str, port: str = "3", window: int = WINDOW_BIN,
                  convention: str = "real") -> FockState:
    """Undo the sign flip heralded by a Dbar click: PS(pi) on the V component of Y.

    ``convention`` adds the static compensator of :data:`STATIC_Y_FLIP`.

    Raises
    ------
    ValidationError
        If Y does not hold exactly one photon in the window bin.
    """
    if outcome not in ("D", "Dbar"):
        raise ValidationError(f"outcome must be 'D' or 'Dbar', got {outcome!r}")
    reg = state.registry
    ymodes = _y_groups(reg, port, window)
    for key in state._terms:
        if sum(1 for i in key if i in ymodes) != 1:
            raise ValidationError("phase correction needs exactly one photon in mode Y")
    if (outcome == "Dbar") == STATIC_Y_FLIP[convention]:
        return state
    y = decoder_paths(port)["Y"]
    ps = build_element(ElementSpec("PS", (y,), phase=math.pi, pols=("V",), name="PS_Y"), reg)
    return apply_transform(state, ps)


def y_density_matrix(state: FockState, port: str = "3", window: int = WINDOW_BIN) -> np.ndarray:
    """Reduced 2x2 polarization density matrix of the single Y photon in ``window``.

    Every term must hold exactly one photon in Y at that bin.
    """
    reg = state.registry
    y = decoder_paths(port)["Y"]
    ih = reg.index(ModeLabel(y, "H", window))
    iv = reg.index(ModeLabel(y, "V", window))
    groups = defaultdict(lambda: np.zeros(2, dtype=complex))
    for key, amp in state.items():
        ny = key.count(ih) + key.count(iv)
        if ny != 1:
            raise ValidationError("reduced Y state needs exactly one photon in the window bin")
        col = 0 if ih in key else 1
        rest = tuple(i for i in key if i != ih and i != iv)
        groups[rest][col] += amp
    rho = np.zeros((2, 2), dtype=complex)
    for v in groups.values():
        rho += np.outer(v, v.conj())
    tr = rho.trace().real
    if tr <= 0:
        raise ValidationError("empty Y state")
    return rho / tr
