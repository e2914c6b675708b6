"""Optical elements as :class:`~qubitdist.fock.ModeTransform` objects.

Conventions (exact matrices are listed in ``docs/CONVENTIONS.md``):

* BS, real convention: ``[[1, 1], [1, -1]] / sqrt(2)`` from inputs ``(a, b)``
  to outputs ``(c, d)``; the ``"i"`` convention uses ``[[1, i], [i, 1]] / sqrt(2)``.
  Polarization-insensitive, acts on every time bin.
* PBS: transmits H, reflects V. Input ``a``: H -> ``c``, V -> ``d``;
  input ``b``: H -> ``d``, V -> ``c``. Reflections carry a factor ``i``
  under the ``"i"`` convention.
* HWP(angle): polarization rotation by ``angle`` degrees,
  ``[[cos, sin], [sin, -cos]]`` on (H, V). HWP(90) swaps H and V, HWP(45)
  sends H -> D and V -> Dbar.
* PS(phase): ``exp(i * phase)`` on the listed modes.
* DELAY(d): shifts a path by ``d`` time bins.
* LOSS(T): couples a path to an ancilla path with ``sqrt(T)`` transmission.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError
from .fock import POLARIZATIONS, ModeLabel, ModeRegistry, ModeTransform

KINDS = ("BS", "PBS", "HWP", "PS", "DELAY", "LOSS")
CONVENTIONS = ("real", "i")

SQRT1_2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class ElementSpec:
    """Element kind, its parameters and the spatial ports it acts on.

    ``inputs``/``outputs`` are path names. Single-path elements (HWP, PS,
    DELAY) use ``inputs[0]``; LOSS uses ``inputs[0]`` and the ancilla path
    ``outputs[0]``. ``pols`` restricts HWP-free elements such as PS to a
    subset of polarizations; ``timebins`` restricts any element to some bins.
    """

    kind: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...] = ()
    angle: float = 0.0
    phase: float = 0.0
    delay: int = 0
    transmissivity: float = 1.0
    convention: str = "real"
    pols: tuple[str, ...] = POLARIZATIONS
    timebins: tuple[int, ...] | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown element kind {self.kind!r}")
        if self.convention not in CONVENTIONS:
            raise ValidationError(f"unknown phase convention {self.convention!r}")
        if self.kind == "HWP" and not 0.0 <= self.angle < 180.0:
            raise ValidationError(f"HWP angle must lie in [0, 180), got {self.angle}")
        if self.kind == "PS" and not 0.0 <= self.phase < 2 * math.pi:
            raise ValidationError(f"PS phase must lie in [0, 2pi), got {self.phase}")
        if self.kind == "LOSS" and not 0.0 <= self.transmissivity <= 1.0:
            raise ValidationError(f"transmissivity must lie in [0, 1], got {self.transmissivity}")
        need_in, need_out = {"BS": (2, 2), "PBS": (2, 2), "LOSS": (1, 1)}.get(self.kind, (1, 0))
        if len(self.inputs) != need_in or len(self.outputs) < need_out:
            raise ValidationError(
                f"{self.kind} needs {need_in} input and {need_out} output ports"
            )


def _bins(reg: ModeRegistry, spec: ElementSpec):
    lo, hi = reg.timebins
    bins = range(lo, hi + 1) if spec.timebins is None else spec.timebins
    for t in bins:
        if not lo <= t <= hi:
            raise ConfigurationError(f"time bin {t} outside registry range {reg.timebins}")
    return list(bins)


def _check_paths(reg: ModeRegistry, paths: Sequence[str]):
    for p in paths:
        if p not in reg.paths:
            raise ConfigurationError(f"port {p!r} is not registered")


def _swap_relabel(pairs):
    rel = {}
    for a, b in pairs:
        if a == b:
            continue
        rel[a] = b
        rel[b] = a
    return rel


def hwp_matrix(angle_deg: float) -> np.ndarray:
    r = math.radians(angle_deg)
    c, s = math.cos(r), math.sin(r)
    # snap exact zeros so HWP(90) is a clean swap
    c = 0.0 if abs(c) < 1e-15 else c
    s = 0.0 if abs(s) < 1e-15 else s
    return np.array([[c, s], [s, -c]], dtype=complex)


def bs_matrix(convention: str = "real") -> np.ndarray:
    if convention == "real":
        return np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2
    return np.array([[1, 1j], [1j, 1]], dtype=complex) * SQRT1_2


def build_element(spec: ElementSpec, registry: ModeRegistry) -> ModeTransform:
    """Build the transform for ``spec`` on ``registry``.

    Raises
    ------
    ConfigurationError
        Unregistered ports or time bins.
    ValidationError
        Out-of-range parameters (raised by :class:`ElementSpec`).
    """
    _check_paths(registry, spec.inputs + spec.outputs)
    bins = _bins(registry, spec)
    name = spec.name or spec.kind
    builder = _BUILDERS[spec.kind]
    return builder(spec, registry, bins, name)


def _build_bs(spec, reg, bins, name):
    a, b = spec.inputs
    c, d = spec.outputs[:2]
    u = bs_matrix(spec.convention)
    modes, blocks, pairs = [], [], []
    for t in bins:
        for pol in POLARIZATIONS:
            ma, mb = ModeLabel(a, pol, t), ModeLabel(b, pol, t)
            modes += [ma, mb]
            blocks.append(u)
            pairs += [(ma, ModeLabel(c, pol, t)), (mb, ModeLabel(d, pol, t))]
    mat = _block_diag(blocks)
    guard = frozenset(dst for _, dst in pairs if dst not in modes)
    return ModeTransform(tuple(modes), mat, _swap_relabel(pairs) or None, guard, name=name)


def _build_pbs(spec, reg, bins, name):
    a, b = spec.inputs
    c, d = spec.outputs[:2]
    r = 1j if spec.convention == "i" else 1.0
    modes, diag, pairs = [], [], []
    for t in bins:
        ah, av = ModeLabel(a, "H", t), ModeLabel(a, "V", t)
        bh, bv = ModeLabel(b, "H", t), ModeLabel(b, "V", t)
        modes += [ah, av, bh, bv]
        diag += [1.0, r, 1.0, r]
        # routing as a permutation so the relabel stays injective
        pairs += [
            (ah, ModeLabel(c, "H", t)),
            (av, ModeLabel(d, "V", t)),
            (bh, ModeLabel(d, "H", t)),
            (bv, ModeLabel(c, "V", t)),
        ]
    mat = np.diag(np.array(diag, dtype=complex))
    guard = frozenset(dst for _, dst in pairs if dst not in modes)
    return ModeTransform(tuple(modes), mat, _permutation(pairs), guard, name=name)


def _permutation(pairs):
    """Relabel sending each ``src -> dst`` and the displaced ``dst`` back to a freed ``src``."""
    fwd = {s: d for s, d in pairs if s != d}
    if not fwd:
        return None
    srcs, dsts = set(fwd), set(fwd.values())
    freed = sorted(srcs - dsts)
    incoming = sorted(dsts - srcs)
    # modes that are targets but not sources are displaced into freed slots
    for dst, slot in zip(incoming, freed):
        fwd[dst] = slot
    return fwd


def _build_hwp(spec, reg, bins, name):
    p = spec.inputs[0]
    u = hwp_matrix(spec.angle)
    modes = []
    for t in bins:
        modes += [ModeLabel(p, "H", t), ModeLabel(p, "V", t)]
    return ModeTransform(tuple(modes), _block_diag([u] * len(bins)), name=name)


def _build_ps(spec, reg, bins, name):
    p = spec.inputs[0]
    modes = [ModeLabel(p, pol, t) for t in bins for pol in spec.pols]
    ph = np.exp(1j * spec.phase)
    return ModeTransform(tuple(modes), np.eye(len(modes)) * ph, name=name)


def _build_delay(spec, reg, bins, name):
    p = spec.inputs[0]
    lo, hi = reg.timebins
    span = hi - lo + 1
    d = int(spec.delay)
    rel, guard = {}, set()
    if d % span:
        for t in range(lo, hi + 1):
            dest = t + d
            for pol in POLARIZATIONS:
                src = ModeLabel(p, pol, t)
                if not lo <= dest <= hi:
                    guard.add(src)
                rel[src] = ModeLabel(p, pol, lo + (dest - lo) % span)
    elif d:
        guard = {ModeLabel(p, pol, t) for t in range(lo, hi + 1) for pol in POLARIZATIONS}
    return ModeTransform((), np.zeros((0, 0)), rel or None, frozenset(guard), name=name)


def _build_loss(spec, reg, bins, name):
    p = spec.inputs[0]
    anc = spec.outputs[0]
    tr = math.sqrt(spec.transmissivity)
    lk = math.sqrt(1.0 - spec.transmissivity)
    u = np.array([[tr, -lk], [lk, tr]], dtype=complex)
    modes, blocks = [], []
    for t in bins:
        for pol in POLARIZATIONS:
            modes += [ModeLabel(p, pol, t), ModeLabel(anc, pol, t)]
            blocks.append(u)
    return ModeTransform(tuple(modes), _block_diag(blocks), name=name)


def _block_diag(blocks):
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


_BUILDERS = {
    "BS": _build_bs,
    "PBS": _build_pbs,
    "HWP": _build_hwp,
    "PS": _build_ps,
    "DELAY": _build_delay,
    "LOSS": _build_loss,
}


def polarization_transform(path: str, matrix, bins: Sequence[int], name="") -> ModeTransform:
    """Same 2x2 polarization unitary on ``path`` in each of ``bins``."""
    u = np.asarray(matrix, dtype=complex)
    modes = []
    for t in bins:
        modes += [ModeLabel(path, "H", t), ModeLabel(path, "V", t)]
    return ModeTransform(tuple(modes), _block_diag([u] * len(bins)), name=name)
