"""Collective noise on the two fiber channels and seeded noise samplers.

Channel 1 carries horizontally polarized photons and channel 2 vertically
polarized ones. A rotation is given by where it sends that carried
polarization:

* channel 1: ``H -> delta1 H + gamma1 V``
* channel 2: ``V -> delta2 H + gamma2 V``

so the identity channel is ``delta1 = gamma2 = 1`` and pure dephasing is
``delta1 = exp(i phi_H)``, ``gamma2 = exp(i phi_V)`` with the other two zero.
The orthogonal input of each channel is completed to an SU(2) matrix; it is
never populated by the encoder.

Noise is collective: the same parameters hit every time bin of a channel.
The optional ``late`` fields override the parameters seen by time bins >= 1
and exist only to model jitter between the reference and signal pulses.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError
from .fock import FockState, ModeTransform, apply_transform
from .optics import polarization_transform

TWO_PI = 2.0 * math.pi
NORM_TOL = 1e-12
CHANNELS = ("1", "2")
KINDS = ("dephasing", "haar-rotation", "product-su2")


@dataclass(frozen=True)
class DephasingParams:
    phi_h: float
    phi_v: float
    late: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "phi_h", float(self.phi_h) % TWO_PI)
        object.__setattr__(self, "phi_v", float(self.phi_v) % TWO_PI)
        if self.late is not None:
            object.__setattr__(self, "late", (float(self.late[0]) % TWO_PI, float(self.late[1]) % TWO_PI))

    kind = "dephasing"

    def as_rotation(self) -> "RotationParams":
        """The equivalent rotation on the carried polarizations."""
        late = None
        if self.late is not None:
            late = ((cmath.exp(1j * self.late[0]), 0j), (0j, cmath.exp(1j * self.late[1])))
        return RotationParams(
            (cmath.exp(1j * self.phi_h), 0j),
            (0j, cmath.exp(1j * self.phi_v)),
            late=late,
        )

    def to_config(self) -> dict:
        cfg = {"noise.kind": "dephasing", "noise.phi_h": self.phi_h, "noise.phi_v": self.phi_v}
        if self.late is not None:
            cfg["noise.late_phi_h"], cfg["noise.late_phi_v"] = self.late
        return cfg


@dataclass(frozen=True)
class RotationParams:
    channel1: tuple[complex, complex]
    channel2: tuple[complex, complex]
    late: tuple[tuple[complex, complex], tuple[complex, complex]] | None = None

    kind = "rotation"

    def __post_init__(self):
        c1 = tuple(complex(x) for x in self.channel1)
        c2 = tuple(complex(x) for x in self.channel2)
        object.__setattr__(self, "channel1", c1)
        object.__setattr__(self, "channel2", c2)
        pairs = [("channel1", c1), ("channel2", c2)]
        if self.late is not None:
            late = tuple(tuple(complex(x) for x in c) for c in self.late)
            object.__setattr__(self, "late", late)
            pairs += [("late channel1", late[0]), ("late channel2", late[1])]
        for name, (d, g) in pairs:
            if abs(abs(d) ** 2 + abs(g) ** 2 - 1.0) > NORM_TOL:
                raise ValidationError(f"{name}: |delta|^2 + |gamma|^2 must equal 1")

    @property
    def delta1(self):
        return self.channel1[0]

    @property
    def gamma1(self):
        return self.channel1[1]

    @property
    def delta2(self):
        return self.channel2[0]

    @property
    def gamma2(self):
        return self.channel2[1]

    def to_config(self) -> dict:
        cfg = {"noise.kind": "rotation"}
        for name, val in (("delta1", self.delta1), ("gamma1", self.gamma1),
                          ("delta2", self.delta2), ("gamma2", self.gamma2)):
            cfg[f"noise.{name}_re"] = val.real
            cfg[f"noise.{name}_im"] = val.imag
        if self.late is not None:
            for name, val in zip(("delta1", "gamma1", "delta2", "gamma2"),
                                 (*self.late[0], *self.late[1])):
                cfg[f"noise.late_{name}_re"] = val.real
                cfg[f"noise.late_{name}_im"] = val.imag
        return cfg


NoiseParams = DephasingParams | RotationParams


def channel1_matrix(delta: complex, gamma: complex) -> np.ndarray:
    """SU(2) with first column (delta, gamma), acting on (H, V)."""
    return np.array([[delta, -gamma.conjugate()], [gamma, delta.conjugate()]], dtype=complex)


def channel2_matrix(delta: complex, gamma: complex) -> np.ndarray:
    """SU(2) with second column (delta, gamma), acting on (H, V)."""
    return np.array([[gamma.conjugate(), delta], [-delta.conjugate(), gamma]], dtype=complex)


def _split_bins(registry):
    lo, hi = registry.timebins
    return [lo], list(range(lo + 1, hi + 1))


def channel_matrices(p: NoiseParams):
    """``((U1_early, U2_early), (U1_late, U2_late))`` polarization matrices on (H, V)."""
    if isinstance(p, DephasingParams):
        early = (np.eye(2) * cmath.exp(1j * p.phi_h), np.eye(2) * cmath.exp(1j * p.phi_v))
        if p.late is None:
            return early, early
        return early, (np.eye(2) * cmath.exp(1j * p.late[0]), np.eye(2) * cmath.exp(1j * p.late[1]))
    if isinstance(p, RotationParams):
        early = (channel1_matrix(*p.channel1), channel2_matrix(*p.channel2))
        if p.late is None:
            return early, early
        return early, (channel1_matrix(*p.late[0]), channel2_matrix(*p.late[1]))
    raise ValidationError(f"unsupported noise parameters {p!r}")


def channel_transforms(registry, p: NoiseParams, channels: Sequence[str] = CHANNELS) -> list[ModeTransform]:
    for c in channels:
        if c not in registry.paths:
            raise ConfigurationError(f"channel path {c!r} is not registered")
    first, rest = _split_bins(registry)
    early, late = channel_matrices(p)
    out = []
    for path, u_early, u_late in zip(channels, early, late):
        if p.late is None:
            out.append(polarization_transform(path, u_early, first + rest, name=f"channel {path}"))
        else:
            out.append(polarization_transform(path, u_early, first, name=f"channel {path} early"))
            out.append(polarization_transform(path, u_late, rest, name=f"channel {path} late"))
    return out


def apply_dephasing(state: FockState, p: DephasingParams, channels=CHANNELS) -> FockState:
    """Multiply every photon in channel 1 by exp(i phi_H) and in channel 2 by exp(i phi_V)."""
    for t in channel_transforms(state.registry, p, channels):
        state = apply_transform(state, t)
    return state


def apply_rotation(state: FockState, p: RotationParams, channels=CHANNELS) -> FockState:
    """Apply the collective polarization rotation of each channel."""
    for t in channel_transforms(state.registry, p, channels):
        state = apply_transform(state, t)
    return state


def apply_noise(state: FockState, p: NoiseParams, channels=CHANNELS) -> FockState:
    if isinstance(p, DephasingParams):
        return apply_dephasing(state, p, channels)
    return apply_rotation(state, p, channels)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class NoiseSampler:
    """Seeded description of a noise ensemble.

    ``jitter`` is the standard deviation (radians) of an independent
    perturbation applied to the late time bins only; zero keeps the noise
    collective.
    """

    kind: str
    seed: int = 0
    jitter: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        if self.jitter < 0:
            raise ValidationError("jitter must be non-negative")

    def draw(self, n: int) -> list[NoiseParams]:
        return sample_noise(self.kind, self.seed, n, jitter=self.jitter)


def _haar_columns(rng, n):
    u = rng.random(n)
    ph = rng.uniform(0.0, TWO_PI, size=(n, 2))
    d = np.sqrt(u) * np.exp(1j * ph[:, 0])
    g = np.sqrt(1.0 - u) * np.exp(1j * ph[:, 1])
    return d, g


def _euler_columns(rng, n):
    a = rng.uniform(0.0, TWO_PI, n)
    b = rng.uniform(0.0, math.pi, n)
    c = rng.uniform(0.0, TWO_PI, n)
    # first column of Rz(a) Ry(b) Rz(c)
    d = np.exp(-0.5j * (a + c)) * np.cos(b / 2)
    g = np.exp(0.5j * (a - c)) * np.sin(b / 2)
    return d, g


def _jitter_unitaries(rng, n, sigma):
    """Rotations by N(0, sigma) angles about uniformly random axes."""
    theta = rng.normal(0.0, sigma, n)
    axis = rng.normal(size=(n, 3))
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    nx, ny, nz = axis.T
    u = np.empty((n, 2, 2), dtype=complex)
    u[:, 0, 0] = c - 1j * s * nz
    u[:, 0, 1] = -1j * s * (nx - 1j * ny)
    u[:, 1, 0] = -1j * s * (nx + 1j * ny)
    u[:, 1, 1] = c + 1j * s * nz
    return u


def _unit(d, g):
    nrm = math.sqrt(abs(d) ** 2 + abs(g) ** 2)
    return complex(d) / nrm, complex(g) / nrm


def sample_noise(kind: str, seed: int, n: int, jitter: float = 0.0) -> list[NoiseParams]:
    """Draw ``n`` noise parameter sets deterministically from ``seed``.

    ``dephasing`` draws both phases uniformly on [0, 2pi). ``haar-rotation``
    draws each channel's SU(2) from the Haar measure, so ``|delta|^2`` is
    uniform on [0, 1]. ``product-su2`` draws uniform Euler angles, a non-Haar
    ensemble with the same mean ``|delta|^2``.
    """
    if kind not in KINDS:
        raise ConfigurationError(f"unknown noise kind {kind!r}; expected one of {KINDS}")
    if n < 1:
        raise ValidationError("n must be at least 1")
    rng = np.random.default_rng(seed)
    if kind == "dephasing":
        ph = rng.uniform(0.0, TWO_PI, size=(n, 2))
        late = None
        if jitter > 0:
            late = ph + rng.normal(0.0, jitter, size=(n, 2))
        return [
            DephasingParams(ph[i, 0], ph[i, 1], None if late is None else (late[i, 0], late[i, 1]))
            for i in range(n)
        ]
    columns = _haar_columns if kind == "haar-rotation" else _euler_columns
    d1, g1 = columns(rng, n)
    d2, g2 = columns(rng, n)
    lates = None
    if jitter > 0:
        j1 = _jitter_unitaries(rng, n, jitter)
        j2 = _jitter_unitaries(rng, n, jitter)
        c1 = np.einsum("nij,nj->ni", j1, np.stack([d1, g1], axis=1))
        c2 = np.einsum("nij,nj->ni", j2, np.stack([d2, g2], axis=1))
        lates = (c1, c2)
    out = []
    for i in range(n):
        late = None
        if lates is not None:
            late = (_unit(*lates[0][i]), _unit(*lates[1][i]))
        out.append(RotationParams(_unit(d1[i], g1[i]), _unit(d2[i], g2[i]), late))
    return out


def params_from_config(cfg: dict) -> NoiseParams:
    """Inverse of ``to_config`` for fixed (non-sampled) parameters."""
    kind = cfg.get("noise.kind", "dephasing")
    if kind == "dephasing":
        late = None
        if "noise.late_phi_h" in cfg:
            late = (float(cfg["noise.late_phi_h"]), float(cfg["noise.late_phi_v"]))
        return DephasingParams(float(cfg.get("noise.phi_h", 0.0)), float(cfg.get("noise.phi_v", 0.0)), late)
    if kind == "rotation":
        def z(name, default=0.0, prefix="noise."):
            return complex(float(cfg.get(f"{prefix}{name}_re", default)), float(cfg.get(f"{prefix}{name}_im", 0.0)))

        late = None
        if "noise.late_delta1_re" in cfg:
            late = ((z("delta1", prefix="noise.late_"), z("gamma1", prefix="noise.late_")),
                    (z("delta2", prefix="noise.late_"), z("gamma2", prefix="noise.late_")))
        return RotationParams((z("delta1", 1.0), z("gamma1")), (z("delta2"), z("gamma2", 1.0)), late)
    raise ConfigurationError(f"noise.kind {kind!r} does not describe fixed parameters")
