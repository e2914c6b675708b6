"""Encoder -> two collective-noise channels -> decoder(s) -> post-selection."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .detection import (STATIC_Y_FLIP, DetectorModel, _mode_sets, analyzer_transforms,
                        click_probability, correct_phase, count_analyzer,
                        postselect_coincidence, y_density_matrix)
from .errors import ConfigurationError, ValidationError
from .fock import (FockState, ModeLabel, apply_circuit, apply_columns,
                   compose_columns, occupied_modes, project_keys, PRUNE)
from .layout import (ALICE_SPARE, CH1, CH2, ENCODER, LOSS1, LOSS2, PORT3,
                     PORT4, REFERENCE_BIN, SIGNAL_BIN, WINDOW_BIN,
                     decoder_paths, default_registry, protocol_registry)
from .noise import (DephasingParams, NoiseSampler, RotationParams,
                    channel_matrices, channel_transforms)
from .optics import ElementSpec, build_element
from .sources import SignalState, SourceSpec, source_state

log = logging.getLogger(__name__)

VARIANTS = ("port3", "port3+port4")
ACCEPT_MODES = ("both", "d-only")
FIDELITY_TOL = 1e-9


@dataclass(frozen=True)
class ProtocolConfig:
    """One protocol configuration.

    ``noise`` is either fixed parameters or a :class:`NoiseSampler` (the
    latter only for :func:`run_monte_carlo`). ``accept="d-only"`` keeps only
    D outcomes of the X analyzer.
    """

    signal: SignalState = SignalState()
    noise: DephasingParams | RotationParams | NoiseSampler = DephasingParams(0.0, 0.0)
    detector: DetectorModel = DetectorModel()
    variant: str = "port3"
    accept: str = "both"
    convention: str = "real"
    double_click: str = "abort"
    transmissivity: float = 1.0
    source: SourceSpec | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}")
        if self.accept not in ACCEPT_MODES:
            raise ValidationError(f"accept must be one of {ACCEPT_MODES}")
        if not 0.0 <= self.transmissivity <= 1.0:
            raise ValidationError("transmissivity must lie in [0, 1]")

    @property
    def ports(self):
        return (PORT3,) if self.variant == "port3" else (PORT3, PORT4)

    def with_noise(self, noise) -> "ProtocolConfig":
        return replace(self, noise=noise)


@dataclass
class RunReport:
    """Result of one fixed-noise protocol run.

    The factors are reported separately: ``parity_factor`` (projection onto
    the noise-immune term, summed over decoded ports), ``routing_factor`` (the
    decoder's beamsplitter routing for that term) and ``detection_factor``
    (two single-photon detections). ``success_probability`` comes from the
    full simulation.
    """

    success_probability: float
    fidelity: float | None
    parity_factor: float
    routing_factor: float | None
    detection_factor: float
    outcome_breakdown: dict
    outcome_fidelity: dict
    parity_by_port: dict
    success_by_port: dict
    noise_draw: dict
    variant: str
    seed: int | None = None
    flagged_probability: float = 0.0

    @property
    def fidelity_defined(self) -> bool:
        return self.fidelity is not None

    def as_dict(self) -> dict:
        return {
            "success_probability": self.success_probability,
            "fidelity": self.fidelity,
            "fidelity_defined": self.fidelity_defined,
            "parity_factor": self.parity_factor,
            "routing_factor": self.routing_factor,
            "detection_factor": self.detection_factor,
            "outcome_breakdown": self.outcome_breakdown,
            "outcome_fidelity": self.outcome_fidelity,
            "parity_by_port": self.parity_by_port,
            "success_by_port": self.success_by_port,
            "noise_draw": self.noise_draw,
            "variant": self.variant,
            "seed": self.seed,
            "flagged_probability": self.flagged_probability,
        }


# ---------------------------------------------------------------------------
# circuit pieces


@lru_cache(maxsize=None)
def _alice(registry, convention):
    return [build_element(ElementSpec("PBS", (ENCODER, ALICE_SPARE), (CH1, CH2),
                                      convention=convention, name="PBS_Alice"), registry)]


@lru_cache(maxsize=None)
def _loss(registry, transmissivity):
    if transmissivity >= 1.0:
        return []
    return [build_element(ElementSpec("LOSS", (ch,), (anc,), transmissivity=transmissivity,
                                      name=f"loss {ch}"), registry)
            for ch, anc in ((CH1, LOSS1), (CH2, LOSS2))]


@lru_cache(maxsize=None)
def _bob(registry, convention):
    return [build_element(ElementSpec("PBS", (CH1, CH2), (PORT3, PORT4),
                                      convention=convention, name="PBS_Bob"), registry)]


@lru_cache(maxsize=None)
def decoder_circuit(registry, port: str = PORT3, convention: str = "real"):
    """BS split, HWP_L(90) and delay on the long arm, PBS merge to X and Y.

    The port-4 decoder adds HWP(90) on Y because its noise-immune term has
    the reference and signal polarizations swapped.
    """
    p = decoder_paths(port)
    specs = [
        ElementSpec("BS", (p["in"], p["vac"]), (p["L"], p["S"]), convention=convention, name="BS_dec"),
        ElementSpec("HWP", (p["L"],), angle=90.0, name="HWP_L"),
        ElementSpec("DELAY", (p["L"],), delay=SIGNAL_BIN - REFERENCE_BIN, name="delay_L"),
        ElementSpec("PBS", (p["L"], p["S"]), (p["Y"], p["X"]), convention=convention, name="PBS_dec"),
    ]
    if port == PORT4:
        specs.append(ElementSpec("HWP", (p["Y"],), angle=90.0, name="HWP_Y4"))
    return tuple(build_element(s, registry) for s in specs)


def transmit(state: FockState, noise, convention="real", transmissivity=1.0) -> FockState:
    """Alice's PBS, channel loss, collective noise and Bob's PBS."""
    reg = state.registry
    circuit = [*_alice(reg, convention), *_loss(reg, transmissivity),
               *channel_transforms(reg, noise), *_bob(reg, convention)]
    return apply_circuit(state, circuit)


@lru_cache(maxsize=None)
def _decoding_columns(registry, ports, convention):
    circuit = []
    modes = []
    for port in ports:
        circuit += list(decoder_circuit(registry, port, convention))
        circuit += list(analyzer_transforms(registry, port, convention))
        modes += [registry.index(m) for m in registry.path_modes(port)]
    # the last time bin cannot take the long-arm delay
    cols = compose_columns(registry, circuit, modes, strict=False)
    return cols, frozenset(modes) - cols.keys()


def decode(received: FockState, ports=(PORT3,), convention="real") -> FockState:
    """Send ports 3 (and 4) through their decoders and X analyzers."""
    cols, blocked = _decoding_columns(received.registry, tuple(ports), convention)
    if blocked and not blocked.isdisjoint(occupied_modes(received)):
        raise ConfigurationError("a photon would be delayed past the last registered time bin")
    return apply_columns(received, cols)


@lru_cache(maxsize=None)
def _pre_columns(registry, convention, transmissivity, modes):
    return compose_columns(registry, [*_alice(registry, convention), *_loss(registry, transmissivity)], modes)


@lru_cache(maxsize=None)
def _channel_modes(registry):
    """Channel mode index -> (channel slot, late bin?, pol column, H index, V index)."""
    lo = registry.timebins[0]
    out = {}
    for slot, path in enumerate((CH1, CH2)):
        for m in registry.path_modes(path):
            ih = registry.index(m.moved(pol="H"))
            iv = registry.index(m.moved(pol="V"))
            out[registry.index(m)] = (slot, m.timebin != lo, 0 if m.pol == "H" else 1, ih, iv)
    return out


@lru_cache(maxsize=None)
def _post_columns(registry, convention, ports):
    chan = list(_channel_modes(registry))
    bob = list(_bob(registry, convention))
    dec = []
    for port in ports:
        dec += list(decoder_circuit(registry, port, convention))
        dec += list(analyzer_transforms(registry, port, convention))
    received = compose_columns(registry, bob, chan)
    decoded = compose_columns(registry, bob + dec, chan, strict=False)
    return received, decoded, frozenset(chan) - decoded.keys()


def transmit_and_decode(state: FockState, cfg: ProtocolConfig) -> tuple[FockState, FockState]:
    """States after Bob's PBS and after the decoders, from one composed pass each.

    Equivalent to :func:`transmit` followed by :func:`decode`, without
    building per-draw transform objects.
    """
    reg = state.registry
    pre = _pre_columns(reg, cfg.convention, cfg.transmissivity, frozenset(occupied_modes(state)))
    post_r, post_d, blocked = _post_columns(reg, cfg.convention, cfg.ports)
    where = _channel_modes(reg)
    early, late = channel_matrices(cfg.noise)
    mats = {(0, False): early[0].tolist(), (1, False): early[1].tolist(),
            (0, True): late[0].tolist(), (1, True): late[1].tolist()}
    cols_r, cols_d = {}, {}
    for m, img in pre.items():
        r, d = {}, {}
        for k, c in img:
            w = where.get(k)
            if w is None:
                r[k] = r.get(k, 0j) + c
                d[k] = d.get(k, 0j) + c
                continue
            slot, is_late, j, ih, iv = w
            u = mats[slot, is_late]
            for kk, cc in ((ih, u[0][j]), (iv, u[1][j])):
                if cc == 0:
                    continue
                if kk in blocked:
                    raise ConfigurationError("a photon would be delayed past the last registered time bin")
                cc *= c
                for k2, c2 in post_r[kk]:
                    r[k2] = r.get(k2, 0j) + cc * c2
                for k2, c2 in post_d[kk]:
                    d[k2] = d.get(k2, 0j) + cc * c2
        cols_r[m] = tuple((k, c) for k, c in r.items() if abs(c) >= PRUNE)
        cols_d[m] = tuple((k, c) for k, c in d.items() if abs(c) >= PRUNE)
    return apply_columns(state, cols_r), apply_columns(state, cols_d)


@lru_cache(maxsize=None)
def _window_modes(registry, port):
    absorb = _mode_sets(registry, port)
    d = frozenset(i for i, v in absorb.items() if v == ("D", WINDOW_BIN))
    db = frozenset(i for i, v in absorb.items() if v == ("Dbar", WINDOW_BIN))
    y = decoder_paths(port)["Y"]
    yh = registry.index(ModeLabel(y, "H", WINDOW_BIN))
    yv = registry.index(ModeLabel(y, "V", WINDOW_BIN))
    return absorb, d, db, yh, yv


def _binom1(n, k, eta):
    return math.comb(n, k) * eta ** k * (1.0 - eta) ** (n - k)


def _accept_port(decoded: FockState, port: str, cfg: ProtocolConfig, with_rho: bool = False):
    """Fused version of :func:`_decode_port` without per-branch objects.

    Returns the same ``(probs, fid_w, flagged)`` triple. With ``with_rho`` a
    fourth item maps D/Dbar to the probability-weighted, phase-corrected Y
    density matrix of single-photon branches.
    """
    absorb, dset, dbset, yh, yv = _window_modes(decoded.registry, port)
    groups = {}
    for key, amp in decoded.items():
        hit = []
        rest = []
        ny = 0
        col = 0
        for i in key:
            if i in absorb:
                hit.append(i)
            elif i == yh:
                ny += 1
            elif i == yv:
                ny += 1
                col = 1
            else:
                rest.append(i)
        if ny == 0:
            continue
        g = groups.setdefault((tuple(hit), ny), {})
        if ny == 1:
            v = g.get(tuple(rest))
            if v is None:
                v = g[tuple(rest)] = [0j, 0j]
            v[col] += amp
        else:
            v = g.get(key)
            if v is None:
                v = g[key] = [0j, 0j]
            v[0] += amp

    model = cfg.detector
    eta = model.eta
    resolving = model.resolving == "number-resolving"
    sh, sv = (complex(x).conjugate() for x in cfg.signal.vector)
    d_only = cfg.accept == "d-only"
    flip = {"D": STATIC_Y_FLIP[cfg.convention]}
    flip["Dbar"] = not flip["D"]
    probs = {"D": 0.0, "Dbar": 0.0}
    fid_w = {"D": 0.0, "Dbar": 0.0}
    rho_w = {"D": np.zeros((2, 2), complex), "Dbar": np.zeros((2, 2), complex)}
    flagged = 0.0
    for (hit, ny), vecs in groups.items():
        nd = sum(1 for i in hit if i in dset)
        ndb = sum(1 for i in hit if i in dbset)
        if resolving:
            py = _binom1(ny, 1, eta)
            choices = [("D", _binom1(nd, 1, eta) * _binom1(ndb, 0, eta), False),
                       ("Dbar", _binom1(nd, 0, eta) * _binom1(ndb, 1, eta), False)]
        else:
            py = 1.0 - (1.0 - eta) ** ny
            qd = 1.0 - (1.0 - eta) ** nd
            qdb = 1.0 - (1.0 - eta) ** ndb
            choices = [("D", qd * (1.0 - qdb), False), ("Dbar", (1.0 - qd) * qdb, False)]
            if cfg.double_click == "random" and qd * qdb > 0:
                both = qd * qdb / 2
                choices += [("D", both, True), ("Dbar", both, True)]
        if py <= 0:
            continue
        w = 0.0
        fd = fdb = 0.0
        for a, b in vecs.values():
            w += abs(a) ** 2 + abs(b) ** 2
            if ny == 1:
                fd += abs(sh * a + sv * b) ** 2
                fdb += abs(sh * a - sv * b) ** 2
        if w <= 0:
            continue
        if with_rho and ny == 1:
            arr = np.array(list(vecs.values()))
            rho = arr.T @ arr.conj() / w
        for label, q, flag in choices:
            if q <= 0 or (d_only and label != "D"):
                continue
            p = w * py * q
            probs[label] += p
            if ny == 1:
                fid_w[label] += p * (fdb if flip[label] else fd) / w
                if with_rho:
                    rho_w[label] += p * (rho * _ZZ if flip[label] else rho)
            if flag:
                flagged += p
    if with_rho:
        return probs, fid_w, flagged, rho_w
    return probs, fid_w, flagged


# sign pattern of PS(pi) on V applied to a 2x2 density matrix
_ZZ = np.array([[1, -1], [-1, 1]])


def good_term_keys(registry, port: str):
    """Keys of the two noise-immune two-photon terms arriving at ``port``.

    Port 3 keeps (V ref, H sig) and (H ref, V sig); port 4 the same pairs.
    """
    def k(pr, ps):
        return tuple(sorted((registry.index(ModeLabel(port, pr, REFERENCE_BIN)),
                             registry.index(ModeLabel(port, ps, SIGNAL_BIN)))))

    return {k("V", "H"), k("H", "V")}


def parity_projection(received: FockState, port: str = PORT3):
    """Probability and state of the noise-immune term at ``port``."""
    keys = good_term_keys(received.registry, port)
    return project_keys(received, keys.__contains__)


def fidelity_to(signal: SignalState, rho: np.ndarray) -> float:
    v = signal.vector
    return float(np.real(v.conj() @ rho @ v))


def _decode_port(decoded, port, cfg: ProtocolConfig):
    """Accepted probability per X outcome and probability-weighted fidelities."""
    outcomes = count_analyzer(decoded, cfg.detector, port)
    _, accepted = postselect_coincidence(outcomes, cfg.detector, WINDOW_BIN, port, cfg.double_click)
    probs = {"D": 0.0, "Dbar": 0.0}
    fid_w = {"D": 0.0, "Dbar": 0.0}
    flagged = 0.0
    branches = []
    for acc in accepted:
        if cfg.accept == "d-only" and acc.x_result != "D":
            continue
        if acc.y_photons == 1:
            fixed = correct_phase(acc.conditional, acc.x_result, port, convention=cfg.convention)
            f = fidelity_to(cfg.signal, y_density_matrix(fixed, port))
        else:
            fixed, f = acc.conditional, 0.0
        probs[acc.x_result] += acc.probability
        fid_w[acc.x_result] += acc.probability * f
        if acc.flagged:
            flagged += acc.probability
        branches.append((acc, fixed, f))
    return probs, fid_w, flagged, branches


def run_distribution(cfg: ProtocolConfig, *, breakdown: bool = True, seed: int | None = None) -> RunReport:
    """Simulate one protocol round for fixed noise parameters.

    With ``breakdown`` the routing factor is measured by sending the
    normalized noise-immune term alone through an ideal decoder.
    """
    if isinstance(cfg.noise, NoiseSampler):
        raise ValidationError("run_distribution needs fixed noise parameters; use run_monte_carlo")
    reg = _registry_for(cfg)
    spec = cfg.source or SourceSpec("ideal", cfg.signal)
    if spec.signal != cfg.signal:
        spec = replace(spec, signal=cfg.signal)
    state = source_state(spec, reg)
    received, decoded = transmit_and_decode(state, cfg)

    breakdown_p, breakdown_f = {}, {}
    parity_by_port, success_by_port = {}, {}
    success = 0.0
    fid_total = 0.0
    flagged = 0.0
    routing = []
    for port in cfg.ports:
        parity, good = parity_projection(received, port)
        parity_by_port[port] = parity
        probs, fid_w, fl = _accept_port(decoded, port, cfg)
        flagged += fl
        port_success = probs["D"] + probs["Dbar"]
        success_by_port[port] = port_success
        success += port_success
        fid_total += fid_w["D"] + fid_w["Dbar"]
        for name in ("D", "Dbar"):
            breakdown_p[f"port{port}:{name}"] = probs[name]
            breakdown_f[f"port{port}:{name}"] = fid_w[name] / probs[name] if probs[name] > 0 else None
        if breakdown and parity > 0:
            ideal = replace(cfg, detector=DetectorModel(1.0, cfg.detector.resolving), double_click="abort")
            rp, _, _, _ = _decode_port(decode(good, (port,), cfg.convention), port, ideal)
            routing.append(rp["D"] + rp["Dbar"])
    fidelity = fid_total / success if success > 0 else None
    detection = click_probability(1, cfg.detector) ** 2
    routing_factor = float(np.mean(routing)) if routing else None
    return RunReport(
        success_probability=success,
        fidelity=fidelity,
        parity_factor=sum(parity_by_port.values()),
        routing_factor=routing_factor,
        detection_factor=detection,
        outcome_breakdown=breakdown_p,
        outcome_fidelity=breakdown_f,
        parity_by_port=parity_by_port,
        success_by_port=success_by_port,
        noise_draw=cfg.noise.to_config(),
        variant=cfg.variant,
        seed=seed,
        flagged_probability=flagged,
    )


def _registry_for(cfg: ProtocolConfig):
    need = required_cutoff(cfg.source)
    return default_registry(max(4, need))


def required_cutoff(spec: SourceSpec | None) -> int:
    """Total photon number the registry must hold for ``spec``."""
    if spec is None or spec.kind == "ideal":
        return 2
    if spec.kind == "coherent-pair":
        return 2 * spec.cutoff
    if spec.kind == "triggered-plus-coherent":
        return 2 + spec.cutoff
    if spec.kind == "pdc-fig3":
        return 4
    return spec.n_ref + spec.n_sig


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MonteCarloReport:
    trials: int
    seed: int
    noise_kind: str
    mean_success: float
    stderr_success: float
    mean_parity_factor: float
    stderr_parity_factor: float
    mean_fidelity: float | None
    min_fidelity: float | None
    zero_acceptance_trials: int
    variant: str
    mean_parity_by_port: dict = field(default_factory=dict)
    stderr_parity_by_port: dict = field(default_factory=dict)
    per_trial: list = field(default_factory=list)

    def as_dict(self, include_trials=False) -> dict:
        d = {
            "trials": self.trials,
            "seed": self.seed,
            "noise_kind": self.noise_kind,
            "mean_success": self.mean_success,
            "stderr_success": self.stderr_success,
            "mean_parity_factor": self.mean_parity_factor,
            "stderr_parity_factor": self.stderr_parity_factor,
            "mean_fidelity": self.mean_fidelity,
            "min_fidelity": self.min_fidelity,
            "zero_acceptance_trials": self.zero_acceptance_trials,
            "variant": self.variant,
            "mean_parity_by_port": self.mean_parity_by_port,
            "stderr_parity_by_port": self.stderr_parity_by_port,
        }
        if include_trials:
            d["per_trial"] = self.per_trial
        return d


def _trial_chunk(args):
    cfg, draws, start = args
    rows = []
    for i, noise in enumerate(draws):
        rep = run_distribution(cfg.with_noise(noise), breakdown=False)
        rows.append((start + i, rep.success_probability, rep.parity_factor, rep.fidelity,
                     tuple(rep.parity_by_port[p] for p in cfg.ports)))
    return rows


def run_monte_carlo(cfg: ProtocolConfig, trials: int, *, workers: int = 1,
                    keep_trials: bool = False) -> MonteCarloReport:
    """Average over ``trials`` noise draws from ``cfg.noise`` (a sampler).

    All draws are generated up front from the sampler seed, so the result is
    identical for any ``workers`` count.
    """
    if not isinstance(cfg.noise, NoiseSampler):
        raise ValidationError("run_monte_carlo needs a NoiseSampler in cfg.noise")
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    sampler = cfg.noise
    draws = sampler.draw(trials)
    if workers > 1:
        size = math.ceil(trials / workers)
        chunks = [(cfg, draws[i:i + size], i) for i in range(0, trials, size)]
        with ProcessPoolExecutor(workers) as ex:
            rows = [r for part in ex.map(_trial_chunk, chunks) for r in part]
    else:
        rows = _trial_chunk((cfg, draws, 0))
    rows.sort()
    success = np.array([r[1] for r in rows])
    parity = np.array([r[2] for r in rows])
    fids = np.array([r[3] if r[3] is not None else np.nan for r in rows])
    by_port = np.array([r[4] for r in rows])
    ok = ~np.isnan(fids)
    mean_fid = float(np.sum(fids[ok] * success[ok]) / np.sum(success[ok])) if ok.any() and success[ok].sum() > 0 else None
    per_trial = []
    if keep_trials:
        for (i, s, p, f, _), noise in zip(rows, draws):
            per_trial.append({"trial": i, "success_probability": s, "parity_factor": p,
                              "fidelity": f, **noise.to_config()})
    return MonteCarloReport(
        trials=trials,
        seed=sampler.seed,
        noise_kind=sampler.kind,
        mean_success=float(success.mean()),
        stderr_success=float(success.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
        mean_parity_factor=float(parity.mean()),
        stderr_parity_factor=float(parity.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
        mean_fidelity=mean_fid,
        min_fidelity=float(np.min(fids[ok])) if ok.any() else None,
        zero_acceptance_trials=int(np.sum(~ok)),
        variant=cfg.variant,
        mean_parity_by_port={p: float(by_port[:, j].mean()) for j, p in enumerate(cfg.ports)},
        stderr_parity_by_port={p: _stderr(by_port[:, j]) for j, p in enumerate(cfg.ports)},
        per_trial=per_trial,
    )


def _stderr(x) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


# ---------------------------------------------------------------------------
# multi-photon errors


@dataclass
class MultiphotonReport:
    accepted_probability: float
    true_accept_probability: float
    false_accept_probability: float
    conditional_error_rate: float | None
    mean_infidelity: float | None
    registry_cutoff: int
    source: dict

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def run_multiphoton_error(source: SourceSpec, cfg: ProtocolConfig, cutoff: int | None = None) -> MultiphotonReport:
    """Accepted coincidences split by whether the decoded photon is faithful.

    A branch is a false accept when its Y photon has fidelity below 1 with
    the signal (multi-photon Y counts as fidelity 0).
    ``cutoff`` is the registry's total photon cutoff; it must be at least 3.
    """
    if isinstance(cfg.noise, NoiseSampler):
        raise ValidationError("run_multiphoton_error needs fixed noise parameters")
    need = required_cutoff(source)
    if cutoff is None:
        cutoff = max(3, need)
    if cutoff < 3:
        raise ValidationError("multi-photon analysis needs a registry cutoff of at least 3")
    if cutoff < need:
        raise ValidationError(f"source needs a registry cutoff of {need}, got {cutoff}")
    spec = replace(source, signal=cfg.signal)
    reg = default_registry(cutoff)
    received = transmit(source_state(spec, reg), cfg.noise, cfg.convention, cfg.transmissivity)
    accepted = true = false = infid = 0.0
    decoded = decode(received, cfg.ports, cfg.convention)
    for port in cfg.ports:
        _, _, _, branches = _decode_port(decoded, port, cfg)
        for acc, _, f in branches:
            accepted += acc.probability
            infid += acc.probability * (1.0 - f)
            if f < 1.0 - FIDELITY_TOL:
                false += acc.probability
            else:
                true += acc.probability
    return MultiphotonReport(
        accepted_probability=accepted,
        true_accept_probability=true,
        false_accept_probability=false,
        conditional_error_rate=false / accepted if accepted > 0 else None,
        mean_infidelity=infid / accepted if accepted > 0 else None,
        registry_cutoff=cutoff,
        source=spec.to_config(),
    )
