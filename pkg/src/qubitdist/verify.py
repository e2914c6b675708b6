"""Acceptance and invariant checks behind ``qubitdist verify``.

Each ``criterion_N`` function returns a :class:`CriterionResult`. The
reference values come from closed-form expressions evaluated here
(coefficient formulas for the channel outputs, permanents for multi-photon
interference) rather than from the simulator under test.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .bb84 import run_bb84_session, verify_projection_equivalence, verify_virtual_qubits
from .detection import DetectorModel
from .fock import FockState, ModeLabel, ModeRegistry, ModeTransform, apply_transform
from .layout import CH1, CH2, ENCODER, LOSS1, PORT3, PORT4, REFERENCE_BIN, SIGNAL_BIN, default_registry
from .noise import DephasingParams, NoiseSampler, RotationParams, sample_noise
from .optics import ElementSpec, build_element
from .protocol import (ProtocolConfig, run_distribution, run_monte_carlo, run_multiphoton_error,
                       transmit)
from .sources import SignalState, SourceSpec, encoder_state
from .stats import coherent_grid, pdc_stats

SQ2 = math.sqrt(2.0)


@dataclass
class CriterionResult:
    criterion: int
    name: str
    passed: bool
    seconds: float
    detail: str

    def as_dict(self) -> dict:
        return {"criterion": self.criterion, "name": self.name, "passed": self.passed,
                "seconds": round(self.seconds, 3), "detail": self.detail}

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.criterion}. {self.name} ({self.seconds:.2f} s): {self.detail}"


def _timed(number, name, fn, limit=None):
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if limit is not None and dt >= limit:
        ok = False
        detail += f"; runtime {dt:.1f} s exceeds {limit:.0f} s"
    return CriterionResult(number, name, bool(ok), dt, detail)


def _random_su2_column(rng):
    u = rng.random()
    ph = rng.uniform(0, 2 * math.pi, 2)
    return math.sqrt(u) * np.exp(1j * ph[0]), math.sqrt(1 - u) * np.exp(1j * ph[1])


def _pulse_amp(state, r, s):
    """Amplitude of one photon ``r=(port, pol)`` in bin 0 and one ``s`` in bin 1."""
    reg = state.registry
    return state.amplitude({ModeLabel(r[0], r[1], REFERENCE_BIN): 1, ModeLabel(s[0], s[1], SIGNAL_BIN): 1})


# ---------------------------------------------------------------------------
# closed-form channel outputs


def dephasing_output_oracle(alpha, beta, phi_h, phi_v) -> dict:
    """Two-photon amplitudes at port 3 after collective dephasing, keyed (ref pol, sig pol)."""
    eh, ev = np.exp(1j * phi_h), np.exp(1j * phi_v)
    return {
        ("H", "H"): alpha * eh * eh / SQ2,
        ("V", "V"): beta * ev * ev / SQ2,
        ("V", "H"): alpha * eh * ev / SQ2,
        ("H", "V"): beta * eh * ev / SQ2,
    }


def rotation_output_oracle(alpha, beta, d1, g1, d2, g2) -> dict:
    """The 16 amplitudes after collective rotations, keyed ((ref pol, port), (sig pol, port))."""
    a, b = alpha / SQ2, beta / SQ2
    return {
        (("H", "3"), ("H", "3")): a * d1 * d1,
        (("H", "3"), ("V", "4")): a * d1 * g1,
        (("V", "4"), ("H", "3")): a * d1 * g1,
        (("V", "4"), ("V", "4")): a * g1 * g1,
        (("H", "4"), ("H", "4")): b * d2 * d2,
        (("H", "4"), ("V", "3")): b * d2 * g2,
        (("V", "3"), ("H", "4")): b * d2 * g2,
        (("V", "3"), ("V", "3")): b * g2 * g2,
        (("H", "4"), ("H", "3")): a * d1 * d2,
        (("H", "4"), ("V", "4")): a * g1 * d2,
        (("V", "3"), ("H", "3")): a * d1 * g2,
        (("V", "3"), ("V", "4")): a * g1 * g2,
        (("H", "3"), ("H", "4")): b * d1 * d2,
        (("H", "3"), ("V", "3")): b * d1 * g2,
        (("V", "4"), ("H", "4")): b * d2 * g1,
        (("V", "4"), ("V", "3")): b * g1 * g2,
    }


# ---------------------------------------------------------------------------
# brute-force multi-photon oracle


def permanent(m: np.ndarray) -> complex:
    n = m.shape[0]
    if n == 0:
        return 1.0 + 0j
    return sum(np.prod([m[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def dense_transform_oracle(u: np.ndarray, n_photons: int):
    """Matrix of ``u`` on the ``n_photons`` sector, via permanents.

    Returns ``(basis, matrix)`` with ``basis`` the sorted multisets of mode
    indices. ``<out|U|in> = Perm(U[out, in]) / sqrt(prod n_i! prod m_j!)``.
    """
    m = u.shape[0]
    basis = list(itertools.combinations_with_replacement(range(m), n_photons))

    def fact(key):
        return math.prod(math.factorial(c) for c in np.bincount(key, minlength=m)) if key else 1

    mat = np.zeros((len(basis), len(basis)), complex)
    for j, kin in enumerate(basis):
        for i, kout in enumerate(basis):
            sub = u[np.ix_(list(kout), list(kin))]
            mat[i, j] = permanent(sub) / math.sqrt(fact(kin) * fact(kout))
    return basis, mat


# ---------------------------------------------------------------------------
# criteria


def criterion_1(n_signals=100, n_noise=100, seed=11):
    rng = np.random.default_rng(seed)
    signals = [SignalState.random(rng) for _ in range(n_signals)]
    noises = sample_noise("dephasing", seed, n_noise)

    def run():
        worst_f = worst_p = 0.0
        for s in signals:
            base = ProtocolConfig(signal=s)
            for p in noises:
                rep = run_distribution(base.with_noise(p), breakdown=False)
                worst_f = max(worst_f, abs(rep.fidelity - 1.0))
                worst_p = max(worst_p, abs(rep.parity_factor - 0.5))
        ok = worst_f < 1e-10 and worst_p < 1e-10
        return ok, f"{n_signals}x{n_noise} runs, max |F-1| = {worst_f:.1e}, max |parity-1/2| = {worst_p:.1e}"

    return _timed(1, "exact recovery under dephasing", run, limit=5.0)


def criterion_2(n=20, seed=12):
    def run():
        rng = np.random.default_rng(seed)
        reg = default_registry()
        worst = 0.0
        for _ in range(n):
            s = SignalState.random(rng)
            ph, pv = rng.uniform(0, 2 * math.pi, 2)
            out = transmit(encoder_state(s, reg), DephasingParams(ph, pv))
            want = dephasing_output_oracle(s.alpha, s.beta, ph, pv)
            for (pr, ps), amp in want.items():
                worst = max(worst, abs(_pulse_amp(out, (PORT3, pr), (PORT3, ps)) - amp))
            worst = max(worst, abs(out.norm_squared - sum(abs(a) ** 2 for a in want.values())))
        return worst < 1e-12, f"{n} draws, max coefficient error {worst:.1e}"

    return _timed(2, "collective dephasing output", run)


def criterion_3(n=20, seed=13):
    def run():
        rng = np.random.default_rng(seed)
        reg = default_registry()
        worst = worst3 = 0.0
        for _ in range(n):
            s = SignalState.random(rng)
            d1, g1 = _random_su2_column(rng)
            d2, g2 = _random_su2_column(rng)
            out = transmit(encoder_state(s, reg), RotationParams((d1, g1), (d2, g2)))
            want = rotation_output_oracle(s.alpha, s.beta, d1, g1, d2, g2)
            for ((pr, qr), (ps, qs)), amp in want.items():
                worst = max(worst, abs(_pulse_amp(out, (qr, pr), (qs, ps)) - amp))
            worst = max(worst, abs(out.norm_squared - 1.0))
            # both photons in port 3
            a, b = s.alpha, s.beta
            port3 = {("H", "H"): a * d1 ** 2, ("V", "V"): b * g2 ** 2,
                     ("V", "H"): d1 * g2 * a, ("H", "V"): d1 * g2 * b}
            for (pr, ps), amp in port3.items():
                worst3 = max(worst3, abs(_pulse_amp(out, (PORT3, pr), (PORT3, ps)) - amp / SQ2))
        ok = worst < 1e-12 and worst3 < 1e-12
        return ok, f"{n} SU(2) pairs, max error {worst:.1e} (16 terms), {worst3:.1e} (port 3)"

    return _timed(3, "collective rotation output", run)


def criterion_4(n=20, seed=14, etas=(0.3, 0.6, 1.0)):
    def run():
        rng = np.random.default_rng(seed)
        worst = worst_f = 0.0
        for _ in range(n):
            s = SignalState.random(rng)
            d1, g1 = _random_su2_column(rng)
            d2, g2 = _random_su2_column(rng)
            p = RotationParams((d1, g1), (d2, g2))
            for eta in etas:
                rep = run_distribution(ProtocolConfig(signal=s, noise=p, detector=DetectorModel(eta)),
                                       breakdown=False)
                want = abs(d1 * g2) ** 2 / 2 * eta ** 2 / 4
                worst = max(worst, abs(rep.success_probability - want))
                if rep.fidelity is not None:
                    worst_f = max(worst_f, abs(rep.fidelity - 1.0))
        ok = worst < 1e-10 and worst_f < 1e-10
        return ok, f"{n} draws x eta {list(etas)}, max |P - law| = {worst:.1e}, max |F-1| = {worst_f:.1e}"

    return _timed(4, "rotation success law", run)


def criterion_5(trials=100_000, seed=7):
    def run():
        cfg = ProtocolConfig(noise=NoiseSampler("haar-rotation", seed), variant="port3+port4")
        rep = run_monte_carlo(cfg, trials)
        p3 = rep.mean_parity_by_port[PORT3]
        both = rep.mean_parity_factor
        ok = abs(p3 - 0.125) < 0.005 and abs(both - 0.25) < 0.01 and abs(rep.mean_fidelity - 1) < 1e-10
        return ok, (f"{trials} trials, port 3 parity {p3:.5f} (target 0.125 +- 0.005), "
                    f"ports 3+4 {both:.5f} (target 0.25 +- 0.01), fidelity {rep.mean_fidelity:.12f}")

    return _timed(5, "Haar averaging", run, limit=60.0)


def criterion_6(rounds=10_000, seed=21):
    def run():
        ses = run_bb84_session(rounds, NoiseSampler("haar-rotation", seed), seed=seed, keep_log=False)
        proj = verify_projection_equivalence()
        virt = verify_virtual_qubits()
        ok = ses.qber == 0.0 and ses.sifted > 0 and proj.max_residual < 1e-9 and virt.max_residual < 1e-10
        return ok, (f"QBER {ses.qber} over {ses.sifted} sifted of {rounds} rounds, projection residual "
                    f"{proj.max_residual:.1e}, virtual-qubit residual {virt.max_residual:.1e}")

    return _timed(6, "BB84 equivalence", run)


def criterion_7():
    def run():
        grid = coherent_grid(50)
        bad_order = sum(1 for r in grid if r.p11 > r.pmul)
        bad_bound = sum(1 for r in grid if r.pmul < r.bound)
        ps = np.geomspace(1e-6, 0.2, 40)
        consts = [pdc_stats(float(p)).extra["mul_over_p11_sq"] for p in ps]
        small = [c for p, c in zip(ps, consts) if p <= 1e-3]
        bounded = max(consts) < 10 and max(small) - min(small) < 0.01
        ok = bad_order == 0 and bad_bound == 0 and bounded
        return ok, (f"{len(grid)} coherent points: {bad_order} with p11 > pmul, {bad_bound} below bound; "
                    f"pdc pmul/p11^2 in [{min(consts):.3f}, {max(consts):.3f}], limit {consts[0]:.4f}")

    return _timed(7, "source statistics", run)


def criterion_8():
    def run():
        sig = SignalState(0.6, 0.8j)
        cfg = ProtocolConfig(signal=sig)
        two_ref = run_multiphoton_error(SourceSpec("fock", sig, n_ref=2, n_sig=0), cfg, cutoff=3)
        two_ref_sig = run_multiphoton_error(SourceSpec("fock", sig, n_ref=2, n_sig=1), cfg, cutoff=3)
        ideal = run_multiphoton_error(SourceSpec("ideal", sig), cfg, cutoff=3)
        ok = (two_ref.false_accept_probability > 0 and two_ref_sig.false_accept_probability > 0
              and ideal.false_accept_probability == 0.0)
        return ok, (f"false accepts: 2 ref + lost signal {two_ref.false_accept_probability:.4g}, "
                    f"2 ref + signal {two_ref_sig.false_accept_probability:.4g}, "
                    f"ideal {ideal.false_accept_probability}")

    return _timed(8, "multi-photon false accepts", run)


def _small_registry(paths):
    return ModeRegistry(paths, timebins=(0, 0), cutoff=4)


def check_oracle(seed=31, max_photons=3) -> float:
    """Max deviation of apply_transform from the permanent oracle, 4 modes."""
    rng = np.random.default_rng(seed)
    reg = _small_registry(["a", "b"])
    worst = 0.0
    for n in range(max_photons + 1):
        for trial in range(3):
            u = unitary_group.rvs(4, random_state=rng)
            t = ModeTransform(reg.modes, u)
            basis, mat = dense_transform_oracle(u, n)
            for j, key in enumerate(basis):
                out = apply_transform(FockState(reg, {key: 1.0}), t)
                got = np.array([out._terms.get(k, 0j) for k in basis])
                worst = max(worst, float(np.max(np.abs(got - mat[:, j]))))
    return worst


def _random_state(rng, reg, max_photons):
    m = len(reg)
    terms = {}
    for _ in range(rng.integers(1, 6)):
        n = int(rng.integers(0, max_photons + 1))
        key = tuple(sorted(rng.integers(0, m, n).tolist()))
        terms[key] = complex(*rng.normal(size=2))
    return FockState(reg, terms).normalized()


def check_norm(cases=1000, seed=32) -> float:
    rng = np.random.default_rng(seed)
    reg = _small_registry(["a", "b", "c", "d"])
    worst = 0.0
    for _ in range(cases):
        k = int(rng.integers(1, 9))
        modes = tuple(rng.choice(len(reg), k, replace=False).tolist())
        u = unitary_group.rvs(k, random_state=rng) if k > 1 else np.array([[np.exp(1j * rng.uniform(0, 6))]])
        t = ModeTransform(tuple(reg.modes[i] for i in modes), u)
        st = _random_state(rng, reg, 4)
        worst = max(worst, abs(apply_transform(st, t).norm - 1.0))
    return worst


def builtin_elements(reg):
    specs = [
        ElementSpec("BS", (CH1, CH2), (CH1, CH2)),
        ElementSpec("BS", (CH1, CH2), (CH1, CH2), convention="i"),
        ElementSpec("BS", (ENCODER, CH1), (PORT3, PORT4)),
        ElementSpec("PBS", (CH1, CH2), (PORT3, PORT4)),
        ElementSpec("PBS", (CH1, CH2), (PORT3, PORT4), convention="i"),
        ElementSpec("HWP", (CH1,), angle=90.0),
        ElementSpec("HWP", (CH1,), angle=45.0),
        ElementSpec("HWP", (CH1,), angle=22.5),
        ElementSpec("PS", (CH1,), phase=1.2, pols=("V",)),
        ElementSpec("DELAY", (CH1,), delay=1),
        ElementSpec("LOSS", (CH1,), (LOSS1,), transmissivity=0.3),
    ]
    return [build_element(s, reg) for s in specs]


def check_unitarity(seed=33, states=20) -> float:
    """Max amplitude error of element-then-inverse on random states, plus U^dagger U - I."""
    rng = np.random.default_rng(seed)
    reg = ModeRegistry([ENCODER, CH1, CH2, PORT3, PORT4, LOSS1], timebins=(0, 3), cutoff=4)
    worst = 0.0
    # photons only in bins 0..2 so the delay stays inside the registry
    low = [i for i, m in enumerate(reg.modes) if m.timebin < 3 and m.path in (ENCODER, CH1, CH2)]
    for t in builtin_elements(reg):
        u = t.matrix
        if u.size:
            worst = max(worst, float(np.max(np.abs(u.conj().T @ u - np.eye(len(u))))))
        for _ in range(states):
            terms = {}
            for _ in range(3):
                n = int(rng.integers(0, 4))
                terms[tuple(sorted(rng.choice(low, n).tolist()))] = complex(*rng.normal(size=2))
            st = FockState(reg, terms).normalized()
            back = apply_transform(apply_transform(st, t), t.inverse())
            keys = set(back._terms) | set(st._terms)
            worst = max(worst, max(abs(back._terms.get(k, 0) - st._terms.get(k, 0)) for k in keys))
    return worst


def check_conventions(seed=34, draws=10) -> float:
    """Largest change in any post-selected probability when switching to the i convention."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    noises = sample_noise("haar-rotation", seed, draws)
    for i, p in enumerate(noises):
        s = SignalState.random(rng)
        for variant in ("port3", "port3+port4"):
            for det in (DetectorModel(0.7), DetectorModel(0.9, "number-resolving")):
                reps = [run_distribution(ProtocolConfig(signal=s, noise=p, detector=det, variant=variant,
                                                        convention=c)) for c in ("real", "i")]
                a, b = reps
                worst = max(worst, abs(a.success_probability - b.success_probability))
                for k in a.outcome_breakdown:
                    worst = max(worst, abs(a.outcome_breakdown[k] - b.outcome_breakdown[k]))
                worst = max(worst, abs(a.fidelity - b.fidelity) if a.fidelity is not None else 0.0)
        src = SourceSpec("fock", s, n_ref=2, n_sig=1)
        m = [run_multiphoton_error(src, ProtocolConfig(signal=s, noise=p, convention=c), cutoff=3)
             for c in ("real", "i")]
        worst = max(worst, abs(m[0].accepted_probability - m[1].accepted_probability),
                    abs(m[0].false_accept_probability - m[1].false_accept_probability))
    return worst


def criterion_9():
    def run():
        r_unit = check_unitarity()
        r_norm = check_norm()
        r_oracle = check_oracle()
        r_conv = check_conventions()
        ok = r_unit < 1e-10 and r_norm < 1e-12 and r_oracle < 1e-12 and r_conv < 1e-10
        return ok, (f"inverse round trip {r_unit:.1e}, norm drift {r_norm:.1e} (1000 states), "
                    f"permanent oracle {r_oracle:.1e}, convention change {r_conv:.1e}")

    return _timed(9, "property suite", run)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}


def run_all(only=None, echo=None) -> list[CriterionResult]:
    results = []
    for n, fn in CRITERIA.items():
        if only and n not in only:
            continue
        r = fn()
        if echo:
            echo(r.line())
        results.append(r)
    return results
