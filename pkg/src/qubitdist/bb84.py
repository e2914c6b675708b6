"""BB84 key distribution through the noise-immune decoder.

Alice picks one of the four BB84 signals and sends it with the diagonal
reference photon; Bob decodes, keeps coincidences (D outcomes only by
default) and measures Y in a random basis. Besides the session runner this
module checks two structural identities:

* Bob's D-accepted outcomes are rank-one projectors onto ``|h>``, ``|v>``,
  ``|h>+|v>`` and ``|h>-|v>`` of the two received pulses, where
  ``|h> = |V>_r|H>_s + |HV>_r|vac>_s`` and ``|v> = |H>_r|V>_s + |vac>_r|HV>_s``.
* In the virtual two-qubit basis ``AB`` the prepared state is
  ``(BB84 state)_A (sqrt3|0> + |1>)_B / 2`` and Bob's accepted POVM filters B
  onto ``(sqrt3|0> - |1>) / 2`` before measuring A.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement

import numpy as np

from .detection import DetectorModel
from .errors import ValidationError
from .fock import FockState, ModeLabel
from .layout import PORT3, REFERENCE_BIN, SIGNAL_BIN, WINDOW_BIN, decoder_paths, default_registry
from .noise import DephasingParams, NoiseSampler, RotationParams
from .protocol import ProtocolConfig, _accept_port, decode, transmit, transmit_and_decode
from .sources import BB84_STATES, SignalState, encoder_state

BASES = ("rectilinear", "diagonal")
STATE_BASIS = {"H": "rectilinear", "V": "rectilinear", "D": "diagonal", "Dbar": "diagonal"}
STATE_BIT = {"H": 0, "V": 1, "D": 0, "Dbar": 1}
BIT_VECTORS = {
    "rectilinear": (np.array([1, 0], complex), np.array([0, 1], complex)),
    "diagonal": (np.array([1, 1], complex) / math.sqrt(2), np.array([1, -1], complex) / math.sqrt(2)),
}
# bit probabilities within this distance of 0 or 1 are rounding noise
PROB_SNAP = 1e-12
RESIDUAL_TOL = 1e-9
VIRTUAL_TOL = 1e-10


@dataclass
class BB84Round:
    index: int
    alice_state: str
    alice_basis: str
    bob_basis: str
    accepted: bool
    x_outcome: str | None
    bob_bit: int | None
    noise_draw: dict = field(default_factory=dict)

    @property
    def alice_bit(self) -> int:
        return STATE_BIT[self.alice_state]

    @property
    def sifted(self) -> bool:
        return self.accepted and self.alice_basis == self.bob_basis

    def as_row(self) -> dict:
        return {
            "round": self.index,
            "state": self.alice_state,
            "alice_basis": self.alice_basis,
            "bob_basis": self.bob_basis,
            "outcome": self.x_outcome or "none",
            "accepted": int(self.accepted),
            "alice_bit": self.alice_bit,
            "bob_bit": "" if self.bob_bit is None else self.bob_bit,
        }


ROUND_COLUMNS = ("round", "state", "alice_basis", "bob_basis", "outcome", "accepted", "alice_bit", "bob_bit")


@dataclass
class SessionReport:
    rounds: int
    accepted: int
    sifted: int
    errors: int
    qber: float | None
    qber_by_basis: dict
    acceptance_rate: float
    sift_rate: float | None
    expected_acceptance: float
    config: dict
    log: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "accepted": self.accepted,
            "sifted": self.sifted,
            "errors": self.errors,
            "qber": self.qber,
            "qber_by_basis": self.qber_by_basis,
            "acceptance_rate": self.acceptance_rate,
            "sift_rate": self.sift_rate,
            "expected_acceptance": self.expected_acceptance,
            "config": self.config,
        }

    def write_log(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=ROUND_COLUMNS)
            w.writeheader()
            for r in self.log:
                w.writerow(r.as_row())


def _snap(p: float) -> float:
    if p < PROB_SNAP:
        return 0.0
    if p > 1.0 - PROB_SNAP:
        return 1.0
    return p


def _round_statistics(state: str, noise, detector, accept, convention):
    """Accept probability per X outcome and the corrected Y state for each."""
    cfg = ProtocolConfig(signal=BB84_STATES[state], noise=noise, detector=detector,
                         accept=accept, convention=convention)
    reg = default_registry()
    _, decoded = transmit_and_decode(encoder_state(cfg.signal, reg), cfg)
    probs, _, _, rho_w = _accept_port(decoded, PORT3, cfg, with_rho=True)
    rhos = {k: rho_w[k] / probs[k] for k in probs if probs[k] > 0}
    return probs, rhos


def run_bb84_session(rounds: int, noise=None, detector: DetectorModel | None = None,
                     seed: int = 0, accept: str = "d-only", convention: str = "real",
                     keep_log: bool = True) -> SessionReport:
    """Simulate ``rounds`` BB84 rounds.

    Parameters
    ----------
    noise : NoiseSampler, DephasingParams, RotationParams or None
        A sampler draws fresh collective noise per round (its own seed); fixed
        parameters apply to every round; ``None`` means a noiseless channel.
    accept : {"d-only", "both"}
        ``"both"`` also keeps Dbar outcomes after the phase correction.

    Notes
    -----
    Alice's states, Bob's bases and the accept/bit coin flips come from
    ``numpy.random.default_rng(seed)``, drawn up front.
    """
    if rounds < 1:
        raise ValidationError("rounds must be at least 1")
    detector = detector or DetectorModel()
    if noise is None:
        noise = DephasingParams(0.0, 0.0)
    if isinstance(noise, NoiseSampler):
        draws = noise.draw(rounds)
    elif isinstance(noise, (DephasingParams, RotationParams)):
        draws = [noise] * rounds
    else:
        raise ValidationError(f"unsupported noise {noise!r}")
    rng = np.random.default_rng(seed)
    names = list(BB84_STATES)
    states = rng.integers(0, 4, rounds)
    bob_bases = rng.integers(0, 2, rounds)
    coins = rng.random((rounds, 2))

    log = []
    accepted = sifted = errors = 0
    basis_counts = {b: [0, 0] for b in BASES}
    fixed_cache = {}
    for i in range(rounds):
        name = names[states[i]]
        bob_basis = BASES[bob_bases[i]]
        key = (name, id(draws[i]))
        stats = fixed_cache.get(key) if not isinstance(noise, NoiseSampler) else None
        if stats is None:
            stats = _round_statistics(name, draws[i], detector, accept, convention)
            if not isinstance(noise, NoiseSampler):
                fixed_cache[key] = stats
        probs, rhos = stats
        u, v = coins[i]
        x_outcome = None
        if u < probs["D"]:
            x_outcome = "D"
        elif u < probs["D"] + probs["Dbar"]:
            x_outcome = "Dbar"
        bit = None
        if x_outcome is not None:
            rho = rhos[x_outcome]
            b0 = BIT_VECTORS[bob_basis][0]
            p0 = _snap(float(np.real(b0.conj() @ rho @ b0)))
            bit = 0 if v < p0 else 1
        rnd = BB84Round(i, name, STATE_BASIS[name], bob_basis, x_outcome is not None, x_outcome, bit,
                        draws[i].to_config() if isinstance(noise, NoiseSampler) else {})
        if rnd.accepted:
            accepted += 1
            if rnd.sifted:
                sifted += 1
                wrong = int(rnd.bob_bit != rnd.alice_bit)
                errors += wrong
                basis_counts[bob_basis][0] += 1
                basis_counts[bob_basis][1] += wrong
        if keep_log:
            log.append(rnd)

    config = {
        "rounds": rounds,
        "seed": seed,
        "accept": accept,
        "convention": convention,
        **detector.to_config(),
        **_noise_echo(noise),
    }
    eta = detector.eta
    expected = _expected_acceptance(noise, eta, accept)
    return SessionReport(
        rounds=rounds,
        accepted=accepted,
        sifted=sifted,
        errors=errors,
        qber=errors / sifted if sifted else None,
        qber_by_basis={b: (e / n if n else None) for b, (n, e) in basis_counts.items()},
        acceptance_rate=accepted / rounds,
        sift_rate=sifted / accepted if accepted else None,
        expected_acceptance=expected,
        config=config,
        log=log,
    )


def _noise_echo(noise) -> dict:
    if isinstance(noise, NoiseSampler):
        return {"noise.kind": noise.kind, "noise.seed": noise.seed, "noise.jitter": noise.jitter}
    return noise.to_config()


def _expected_acceptance(noise, eta, accept) -> float | None:
    """Mean acceptance for threshold detectors and an ideal source, when known."""
    share = 0.5 if accept == "d-only" else 1.0
    if isinstance(noise, DephasingParams) and noise.late is None:
        return 0.5 * 0.25 * eta ** 2 * share
    if isinstance(noise, RotationParams) and noise.late is None:
        return abs(noise.delta1 * noise.gamma2) ** 2 / 2 * 0.25 * eta ** 2 * share
    if isinstance(noise, NoiseSampler) and noise.jitter == 0:
        if noise.kind == "dephasing":
            return 0.5 * 0.25 * eta ** 2 * share
        return 0.125 * 0.25 * eta ** 2 * share
    return None


# ---------------------------------------------------------------------------
# structural checks


@dataclass
class CheckReport:
    name: str
    passed: bool
    details: dict
    max_residual: float

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "max_residual": self.max_residual,
                "details": self.details}


def _pulse_basis(registry, port=PORT3):
    """All two-photon occupation keys of ``port`` in the reference and signal bins."""
    modes = [registry.index(ModeLabel(port, pol, t))
             for t in (REFERENCE_BIN, SIGNAL_BIN) for pol in ("H", "V")]
    return [tuple(sorted(k)) for k in combinations_with_replacement(modes, 2)]


def _pulse_vector(registry, keys, spec: dict) -> np.ndarray:
    """Vector over ``keys`` from ``{(("H", 0), ("V", 1)): amp, ...}`` in normalized Fock form."""
    st = FockState(registry, {}, _check=False)
    for photons, amp in spec.items():
        labels = [ModeLabel(PORT3, pol, t) for pol, t in photons]
        st = st + FockState.from_photons(registry, *labels, amplitude=amp)
    return np.array([st._terms.get(k, 0j) for k in keys])


def pulse_states(registry=None) -> dict:
    """``|h>``, ``|v>`` and the four virtual AB basis vectors over the port-3 pulse basis."""
    reg = registry or default_registry()
    keys = _pulse_basis(reg)
    r, s = REFERENCE_BIN, SIGNAL_BIN

    def vec(spec):
        return _pulse_vector(reg, keys, spec)

    VrHs = vec({(("V", r), ("H", s)): 1})
    HrVs = vec({(("H", r), ("V", s)): 1})
    HrHs = vec({(("H", r), ("H", s)): 1})
    VrVs = vec({(("V", r), ("V", s)): 1})
    HVr = vec({(("H", r), ("V", r)): 1})
    HVs = vec({(("H", s), ("V", s)): 1})
    out = {
        "h": VrHs + HVr,
        "v": HrVs + HVs,
        "00": (2 * VrHs + HrHs + HVr) / math.sqrt(6),
        "10": (2 * HrVs + VrVs + HVs) / math.sqrt(6),
        "01": (HrHs - HVr) / math.sqrt(2),
        "11": (VrVs - HVs) / math.sqrt(2),
    }
    return {"keys": keys, **out}


def _outcome_functionals(registry, convention="real"):
    """Rows ``A_o`` with amplitude(outcome o | input e_i) = A_o[i], ideal detectors.

    Outcomes are D_X in the window together with Y measured in H, V, D or Dbar.
    """
    keys = _pulse_basis(registry)
    p = decoder_paths(PORT3)
    d = registry.index(ModeLabel(p["D"], "H", WINDOW_BIN))
    yh = registry.index(ModeLabel(p["Y"], "H", WINDOW_BIN))
    yv = registry.index(ModeLabel(p["Y"], "V", WINDOW_BIN))
    kh = tuple(sorted((d, yh)))
    kv = tuple(sorted((d, yv)))
    a_h = np.zeros(len(keys), complex)
    a_v = np.zeros(len(keys), complex)
    for i, key in enumerate(keys):
        out = decode(FockState(registry, {key: 1.0 + 0j}, _check=False), (PORT3,), convention)
        a_h[i] = out._terms.get(kh, 0j)
        a_v[i] = out._terms.get(kv, 0j)
    s = 1 / math.sqrt(2)
    return {"H": a_h, "V": a_v, "D": s * (a_h + a_v), "Dbar": s * (a_h - a_v)}


def bob_povm(registry=None, convention="real") -> dict:
    """Rank-one POVM elements ``M_o = |phi_o><phi_o|`` on the 10-dimensional pulse space."""
    reg = registry or default_registry()
    return {o: np.outer(a.conj(), a) for o, a in _outcome_functionals(reg, convention).items()}


def _fit(m: np.ndarray, target: np.ndarray):
    """Best constant c with m ~ c |t><t| for unit t, and the max residual."""
    t = target / np.linalg.norm(target)
    proj = np.outer(t, t.conj())
    c = float(np.real(t.conj() @ m @ t))
    return c, float(np.max(np.abs(m - c * proj)))


def verify_projection_equivalence() -> CheckReport:
    """Bob's four D_X outcomes against projectors onto h, v, h+v and h-v.

    The identities are written for the real beamsplitter convention; under
    the ``i`` convention the same statements hold only after rephasing h and v.
    """
    convention = "real"
    reg = default_registry()
    ps = pulse_states(reg)
    povm = bob_povm(reg, convention)
    h, v = ps["h"], ps["v"]
    targets = {"H": h, "V": v, "D": h + v, "Dbar": h - v}
    consts, residuals = {}, {}
    for o, t in targets.items():
        consts[o], residuals[o] = _fit(povm[o], t)
    spread = max(consts.values()) - min(consts.values())
    # states outside span{h, v} are never accepted: |H>_r|H>_s and the
    # B-orthogonal partner |0>_A (|0> + sqrt3 |1>)_B / 2
    orth = [_pulse_vector(reg, ps["keys"], {(("H", REFERENCE_BIN), ("H", SIGNAL_BIN)): 1}),
            (ps["00"] + math.sqrt(3) * ps["01"]) / 2,
            (ps["10"] + math.sqrt(3) * ps["11"]) / 2]
    accept = povm["H"] + povm["V"]
    p_orth = max(float(np.real(o.conj() @ accept @ o)) for o in orth)
    worst = max(max(residuals.values()), spread, abs(p_orth))
    return CheckReport(
        name="projection-equivalence",
        passed=worst < RESIDUAL_TOL,
        details={"constants": consts, "residuals": residuals, "constant_spread": spread,
                 "orthogonal_acceptance": p_orth, "convention": convention},
        max_residual=worst,
    )


def verify_virtual_qubits() -> CheckReport:
    """Orthonormality of the AB basis, preparation and measurement factorization.

    Real beamsplitter convention, as in :func:`verify_projection_equivalence`.
    """
    convention = "real"
    reg = default_registry()
    ps = pulse_states(reg)
    keys = ps["keys"]
    basis = {ab: ps[ab] for ab in ("00", "01", "10", "11")}
    names = list(basis)
    gram = np.array([[basis[a].conj() @ basis[b] for b in names] for a in names])
    r_orth = float(np.max(np.abs(gram - np.eye(4))))

    def ab_vector(a_vec, b_vec):
        out = np.zeros(len(keys), complex)
        for ia in range(2):
            for ib in range(2):
                out += a_vec[ia] * b_vec[ib] * basis[f"{ia}{ib}"]
        return out

    b_prep = np.array([math.sqrt(3), 1]) / 2
    b_filter = np.array([math.sqrt(3), -1]) / 2
    a_states = {k: s.vector for k, s in BB84_STATES.items()}

    # preparation: the pulses arriving at port 3 through a noiseless channel
    r_prep = 0.0
    for k, s in BB84_STATES.items():
        received = transmit(encoder_state(s, reg), DephasingParams(0.0, 0.0), convention)
        got = np.array([received._terms.get(key, 0j) for key in keys])
        want = ab_vector(a_states[k], b_prep)
        r_prep = max(r_prep, float(np.max(np.abs(got - want))))

    # measurement: M_o = c |a_o>|b_filter> <...|, one c for all outcomes
    povm = bob_povm(reg, convention)
    consts, r_meas = {}, 0.0
    for o in ("H", "V", "D", "Dbar"):
        t = ab_vector(a_states[o], b_filter)
        consts[o], res = _fit(povm[o], t)
        r_meas = max(r_meas, res)
    spread = max(consts.values()) - min(consts.values())
    # |h> = sqrt2 |0>_A (sqrt3|0> - |1>)_B / 2
    r_h = float(np.max(np.abs(ps["h"] - math.sqrt(2) * ab_vector(a_states["H"], b_filter))))
    r_v = float(np.max(np.abs(ps["v"] - math.sqrt(2) * ab_vector(a_states["V"], b_filter))))
    worst = max(r_orth, r_prep, r_meas, spread, r_h, r_v)
    return CheckReport(
        name="virtual-qubits",
        passed=worst < VIRTUAL_TOL,
        details={"orthonormality": r_orth, "preparation": r_prep, "measurement": r_meas,
                 "measurement_constants": consts, "constant_spread": spread,
                 "h_identity": r_h, "v_identity": r_v, "convention": convention},
        max_residual=worst,
    )
