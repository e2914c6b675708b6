"""Initial photon states: the ideal reference/signal pair, the PDC
arrangement that produces it, and imperfect multi-photon sources."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError
from .fock import FockState, ModeLabel, ModeRegistry, apply_sequence, project_keys
from .layout import (ENCODER, ENCODER_DUMP, REFERENCE_BIN, SIGNAL_BIN,
                     default_registry)
from .optics import ElementSpec, build_element, polarization_transform

SQRT1_2 = 1.0 / math.sqrt(2.0)
KINDS = ("ideal", "pdc-fig3", "coherent-pair", "triggered-plus-coherent", "fock")


@dataclass(frozen=True)
class SignalState:
    """Signal qubit ``alpha|H> + beta|V>``."""

    alpha: complex = 1.0
    beta: complex = 0.0

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-12:
            raise ValidationError("signal must satisfy |alpha|^2 + |beta|^2 = 1")

    @classmethod
    def normalized(cls, alpha, beta) -> "SignalState":
        nrm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        if nrm == 0:
            raise ValidationError("alpha and beta cannot both vanish")
        return cls(complex(alpha) / nrm, complex(beta) / nrm)

    @classmethod
    def random(cls, rng) -> "SignalState":
        z = rng.normal(size=4)
        return cls.normalized(complex(z[0], z[1]), complex(z[2], z[3]))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    def unitary(self) -> np.ndarray:
        """SU(2) whose first column is (alpha, beta)."""
        a, b = self.alpha, self.beta
        return np.array([[a, -b.conjugate()], [b, a.conjugate()]], dtype=complex)


BB84_STATES = {
    "H": SignalState(1.0, 0.0),
    "V": SignalState(0.0, 1.0),
    "D": SignalState(SQRT1_2, SQRT1_2),
    "Dbar": SignalState(SQRT1_2, -SQRT1_2),
}


@dataclass(frozen=True)
class SourceSpec:
    """Source description.

    ``nu``/``mu`` are the mean photon numbers of the signal and reference
    pulses for the coherent kinds; ``cutoff`` is the per-pulse photon-number
    truncation. ``pair_prob`` is the mean number of PDC pairs per pulse for
    ``pdc-fig3`` (zero means the single-pair state). ``trigger_p1`` and
    ``trigger_pmul`` describe the heralded signal of
    ``triggered-plus-coherent`` (multi-photon emission taken as two photons).
    ``n_ref``/``n_sig`` fix exact photon numbers for kind ``fock``.
    """

    kind: str = "ideal"
    signal: SignalState = SignalState()
    nu: float = 0.0
    mu: float = 0.0
    cutoff: int = 2
    pair_prob: float = 0.0
    trigger_p1: float = 1.0
    trigger_pmul: float = 0.0
    n_ref: int = 1
    n_sig: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown source kind {self.kind!r}")
        if self.nu < 0 or self.mu < 0:
            raise ValidationError("mean photon numbers must be non-negative")
        if self.cutoff < 0:
            raise ValidationError("cutoff must be non-negative")
        if not 0 <= self.pair_prob <= 1:
            raise ValidationError("pair_prob must lie in [0, 1]")
        if self.trigger_p1 < 0 or self.trigger_pmul < 0 or self.trigger_p1 + self.trigger_pmul > 1 + 1e-12:
            raise ValidationError("trigger probabilities must be non-negative with p1 + pmul <= 1")
        if self.n_ref < 0 or self.n_sig < 0:
            raise ValidationError("photon numbers must be non-negative")

    def to_config(self) -> dict:
        cfg = {
            "source.kind": self.kind,
            "source.alpha": _fmt_complex(self.signal.alpha),
            "source.beta": _fmt_complex(self.signal.beta),
        }
        if self.kind == "coherent-pair":
            cfg.update({"source.nu": self.nu, "source.mu": self.mu, "source.cutoff": self.cutoff})
        elif self.kind == "triggered-plus-coherent":
            cfg.update({"source.mu": self.mu, "source.cutoff": self.cutoff,
                        "source.trigger_p1": self.trigger_p1, "source.trigger_pmul": self.trigger_pmul})
        elif self.kind == "pdc-fig3":
            cfg["source.pair_prob"] = self.pair_prob
        elif self.kind == "fock":
            cfg.update({"source.n_ref": self.n_ref, "source.n_sig": self.n_sig})
        return cfg


def _fmt_complex(z: complex):
    return z.real if z.imag == 0 else repr(z)


def _reg(registry):
    return default_registry() if registry is None else registry


def encoder_state(signal: SignalState, registry: ModeRegistry | None = None) -> FockState:
    """Reference photon in D at bin 0 and signal photon at bin 1, both in path A."""
    reg = _reg(registry)
    ref = {"H": SQRT1_2, "V": SQRT1_2}
    sig = {"H": signal.alpha, "V": signal.beta}
    terms = {}
    for pr, ar in ref.items():
        for ps, as_ in sig.items():
            if as_ == 0:
                continue
            key = tuple(sorted((reg.index(ModeLabel(ENCODER, pr, REFERENCE_BIN)),
                                reg.index(ModeLabel(ENCODER, ps, SIGNAL_BIN)))))
            terms[key] = ar * as_
    return FockState(reg, terms)


# ---------------------------------------------------------------------------
# PDC arrangement


def signal_waveplate_settings(signal: SignalState) -> tuple[float, float]:
    """(HWP_s angle in degrees, PS_s phase) turning |V> into the signal up to global phase."""
    a, b = abs(signal.alpha), abs(signal.beta)
    if a < 1e-15:
        return 0.0, 0.0
    # HWP(rho): V -> (sin rho, -cos rho)
    rho = math.degrees(math.atan2(a, -b))
    if rho >= 180.0:
        rho = 0.0
    phase = 0.0
    if b > 1e-15:
        phase = (cmath.phase(signal.beta) - cmath.phase(signal.alpha)) % (2 * math.pi)
    return rho, phase


def pdc_circuit(signal: SignalState, registry: ModeRegistry, convention: str = "real"):
    """Transforms of the PDC source: PBS split, HWP_r, delay, HWP_s, PS_s, BS merge."""
    rho, phase = signal_waveplate_settings(signal)
    specs = [
        ElementSpec("PBS", ("pdc", "vpdc"), ("short", "long"), convention=convention, name="PBS_src"),
        ElementSpec("HWP", ("short",), angle=45.0, name="HWP_r"),
        ElementSpec("DELAY", ("long",), delay=SIGNAL_BIN - REFERENCE_BIN, name="delay_src"),
        ElementSpec("HWP", ("long",), angle=rho, name="HWP_s"),
        ElementSpec("PS", ("long",), phase=phase, pols=("V",), name="PS_s"),
        ElementSpec("BS", ("short", "long"), (ENCODER, ENCODER_DUMP), convention=convention, name="BS_src"),
    ]
    return [build_element(s, registry) for s in specs]


def pdc_pair_input(registry: ModeRegistry, pairs: int = 1) -> FockState:
    """``pairs`` collinear H/V photon pairs in the crystal output mode at bin 0."""
    return FockState.from_counts(
        registry, {ModeLabel("pdc", "H", REFERENCE_BIN): pairs, ModeLabel("pdc", "V", REFERENCE_BIN): pairs}
    )


def pdc_source_state(signal: SignalState, registry: ModeRegistry | None = None,
                     convention: str = "real") -> tuple[float, FockState]:
    """Probability that both photons leave through port A, and that conditional state."""
    reg = _reg(registry)
    out = apply_sequence(pdc_pair_input(reg, 1), pdc_circuit(signal, reg, convention))
    enc = {reg.index(m) for m in reg.path_modes(ENCODER)}
    return project_keys(out, lambda k: len(k) == 2 and all(i in enc for i in k))


def pdc_multipair_state(signal: SignalState, pair_prob: float, registry: ModeRegistry,
                        max_pairs: int = 2, convention: str = "real") -> FockState:
    """Poisson superposition of 0..max_pairs pairs sent through the PDC arrangement.

    Branches with different pair numbers never interfere after photon
    counting, so the superposition stands in for the mixture.
    """
    if 2 * max_pairs > registry.cutoff:
        raise ValidationError(f"{max_pairs} pairs need a registry cutoff of at least {2 * max_pairs}")
    circuit = pdc_circuit(signal, registry, convention)
    total = None
    for k in range(max_pairs + 1):
        w = math.exp(-pair_prob) * pair_prob ** k / math.factorial(k)
        if w == 0:
            continue
        st = apply_sequence(pdc_pair_input(registry, k), circuit).scaled(math.sqrt(w))
        total = st if total is None else total + st
    return total.normalized()


# ---------------------------------------------------------------------------
# photon-number superpositions


def _pulse_basis(registry, n, bin_, unitary, label_path=ENCODER):
    """n photons in the polarization mode given by ``unitary``'s first column."""
    st = FockState.from_counts(registry, {ModeLabel(label_path, "H", bin_): n})
    if n == 0:
        return st
    t = polarization_transform(label_path, unitary, [bin_])
    return apply_sequence(st, [t])


def number_superposition(registry: ModeRegistry, ref_weights, sig_weights, signal: SignalState) -> FockState:
    """sum_{n, m} sqrt(p_ref(n) p_sig(m)) |n in D, bin 0> |m in signal pol, bin 1>."""
    d_unitary = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2
    s_unitary = signal.unitary()
    refs = {n: _pulse_basis(registry, n, REFERENCE_BIN, d_unitary) for n, w in enumerate(ref_weights) if w > 0}
    sigs = {m: _pulse_basis(registry, m, SIGNAL_BIN, s_unitary) for m, w in enumerate(sig_weights) if w > 0}
    total = None
    for n, r in refs.items():
        for m, s in sigs.items():
            amp = math.sqrt(ref_weights[n] * sig_weights[m])
            if n + m > registry.cutoff:
                raise ValidationError(
                    f"{n + m} photons exceed the registry cutoff {registry.cutoff}; raise it or lower the source cutoff"
                )
            term = r.tensor(s).scaled(amp)
            total = term if total is None else total + term
    if total is None:
        raise ValidationError("source has no photon-number support")
    return total


def poisson_weights(mean: float, cutoff: int) -> list[float]:
    return [math.exp(-mean) * mean ** n / math.factorial(n) for n in range(cutoff + 1)]


def coherent_pair_state(spec: SourceSpec, registry: ModeRegistry | None = None,
                        return_truncation: bool = False):
    """Truncated coherent reference (mean mu, polarization D) and signal (mean nu).

    Each pulse is cut at ``spec.cutoff`` photons and the product renormalized.
    With ``return_truncation`` the discarded probability is returned as well.
    """
    if spec.cutoff < 2:
        raise ValidationError("coherent-pair source needs cutoff >= 2")
    reg = _reg(registry)
    if 2 * spec.cutoff > reg.cutoff:
        raise ValidationError(
            f"per-pulse cutoff {spec.cutoff} needs a registry cutoff of {2 * spec.cutoff}, have {reg.cutoff}"
        )
    wr = poisson_weights(spec.mu, spec.cutoff)
    ws = poisson_weights(spec.nu, spec.cutoff)
    kept = sum(wr) * sum(ws)
    state = number_superposition(reg, wr, ws, spec.signal).normalized()
    if return_truncation:
        return state, 1.0 - kept
    return state


def triggered_plus_coherent_state(spec: SourceSpec, registry: ModeRegistry | None = None) -> FockState:
    """Heralded PDC signal (p0, p1, p2) with a coherent reference of mean mu."""
    reg = _reg(registry)
    if 2 + spec.cutoff > reg.cutoff:
        raise ValidationError(f"registry cutoff {reg.cutoff} too small for reference cutoff {spec.cutoff}")
    p0 = max(0.0, 1.0 - spec.trigger_p1 - spec.trigger_pmul)
    ws = [p0, spec.trigger_p1, spec.trigger_pmul]
    wr = poisson_weights(spec.mu, spec.cutoff)
    return number_superposition(reg, wr, ws, spec.signal).normalized()


def fock_pair_state(spec: SourceSpec, registry: ModeRegistry | None = None) -> FockState:
    """Exactly ``n_ref`` reference photons in D and ``n_sig`` signal photons."""
    reg = _reg(registry)
    wr = [0.0] * spec.n_ref + [1.0]
    ws = [0.0] * spec.n_sig + [1.0]
    return number_superposition(reg, wr, ws, spec.signal)


def source_state(spec: SourceSpec, registry: ModeRegistry | None = None) -> FockState:
    """State in path A (plus any PDC leftovers) for every source kind."""
    reg = _reg(registry)
    if spec.kind == "ideal":
        return encoder_state(spec.signal, reg)
    if spec.kind == "pdc-fig3":
        if spec.pair_prob == 0:
            return pdc_source_state(spec.signal, reg)[1]
        return pdc_multipair_state(spec.signal, spec.pair_prob, reg)
    if spec.kind == "coherent-pair":
        return coherent_pair_state(spec, reg)
    if spec.kind == "triggered-plus-coherent":
        return triggered_plus_coherent_state(spec, reg)
    return fock_pair_state(spec, reg)
