import math
from dataclasses import replace

import numpy as np
import pytest

from qubitdist.detection import DetectorModel
from qubitdist.errors import ValidationError
from qubitdist.fock import ModeLabel
from qubitdist.layout import PORT3, REFERENCE_BIN, SIGNAL_BIN, default_registry
from qubitdist.noise import DephasingParams, NoiseSampler, RotationParams, sample_noise
from qubitdist.protocol import (ProtocolConfig, _accept_port, _decode_port, _registry_for, decode,
                                parity_projection, run_distribution, run_monte_carlo, run_multiphoton_error,
                                transmit, transmit_and_decode)
from qubitdist.sources import SignalState, SourceSpec, encoder_state, source_state

from conftest import random_su2, rotation_link_oracle

SQ = 1 / math.sqrt(2)


def amp(state, ref, sig):
    (pr, polr, tr), (ps, pols, ts) = ref, sig
    a, b = ModeLabel(pr, polr, tr), ModeLabel(ps, pols, ts)
    return state.amplitude({a: 1, b: 1} if a != b else {a: 2})


def test_link_amplitudes_match_hand_derivation(rng):
    reg = default_registry()
    for _ in range(20):
        sig = SignalState.random(rng)
        (d1, g1), (d2, g2) = random_su2(rng), random_su2(rng)
        out = transmit(encoder_state(sig, reg), RotationParams((d1, g1), (d2, g2)))
        expect = rotation_link_oracle(sig.alpha, sig.beta, d1, g1, d2, g2)
        assert len(out) == 16
        for (ref, s), a in expect.items():
            assert abs(amp(out, ref, s) - a) < 1e-12


def test_dephasing_sends_everything_to_port3(rng):
    reg = default_registry()
    sig = SignalState.random(rng)
    ph, pv = rng.uniform(0, 2 * math.pi, 2)
    out = transmit(encoder_state(sig, reg), DephasingParams(ph, pv))
    eh, ev = np.exp(1j * ph), np.exp(1j * pv)
    for polr, ar in (("H", SQ * eh), ("V", SQ * ev)):
        for pols, as_ in (("H", sig.alpha * eh), ("V", sig.beta * ev)):
            got = amp(out, (PORT3, polr, REFERENCE_BIN), (PORT3, pols, SIGNAL_BIN))
            assert abs(got - ar * as_) < 1e-12


def test_parity_projection_keeps_noise_immune_term(rng):
    reg = default_registry()
    sig = SignalState.random(rng)
    (d1, g1), (d2, g2) = random_su2(rng), random_su2(rng)
    received = transmit(encoder_state(sig, reg), RotationParams((d1, g1), (d2, g2)))
    p, good = parity_projection(received, PORT3)
    assert p == pytest.approx(abs(d1 * g2) ** 2 / 2, abs=1e-12)
    # alpha |V>_r |H>_s + beta |H>_r |V>_s
    a = amp(good, (PORT3, "V", REFERENCE_BIN), (PORT3, "H", SIGNAL_BIN))
    b = amp(good, (PORT3, "H", REFERENCE_BIN), (PORT3, "V", SIGNAL_BIN))
    assert abs(a.conjugate() * sig.alpha + b.conjugate() * sig.beta) == pytest.approx(1.0, abs=1e-12)


def test_dephasing_exact_recovery(rng):
    for _ in range(10):
        sig = SignalState.random(rng)
        rep = run_distribution(ProtocolConfig(signal=sig, noise=DephasingParams(*rng.uniform(0, 7, 2))))
        assert rep.fidelity == pytest.approx(1.0, abs=1e-10)
        assert rep.parity_factor == pytest.approx(0.5, abs=1e-10)
        assert rep.success_probability == pytest.approx(0.125, abs=1e-10)
        assert rep.routing_factor == pytest.approx(0.25, abs=1e-10)


@pytest.mark.parametrize("eta", [0.3, 0.6, 1.0])
def test_rotation_success_law(rng, eta):
    for _ in range(5):
        (d1, g1), (d2, g2) = random_su2(rng), random_su2(rng)
        cfg = ProtocolConfig(signal=SignalState.random(rng), noise=RotationParams((d1, g1), (d2, g2)),
                             detector=DetectorModel(eta))
        rep = run_distribution(cfg)
        assert rep.success_probability == pytest.approx(abs(d1 * g2) ** 2 / 2 * eta ** 2 / 4, abs=1e-12)
        assert rep.fidelity == pytest.approx(1.0, abs=1e-10)


def test_port4_recovers_the_complementary_term(rng):
    (d1, g1), (d2, g2) = random_su2(rng), random_su2(rng)
    cfg = ProtocolConfig(signal=SignalState(0.6, 0.8j), noise=RotationParams((d1, g1), (d2, g2)),
                         variant="port3+port4")
    rep = run_distribution(cfg)
    assert rep.parity_by_port["4"] == pytest.approx(abs(g1 * d2) ** 2 / 2, abs=1e-12)
    assert rep.fidelity == pytest.approx(1.0, abs=1e-10)


def test_zero_acceptance_reports_undefined_fidelity():
    rep = run_distribution(ProtocolConfig(noise=RotationParams((0, 1), (1, 0))))
    assert rep.success_probability == 0.0
    assert rep.fidelity is None and not rep.fidelity_defined


def test_transmission_loss_scales_success():
    cfg = ProtocolConfig(signal=SignalState(SQ, SQ), transmissivity=0.5)
    assert run_distribution(cfg).success_probability == pytest.approx(0.125 * 0.25, abs=1e-12)


def _configs(rng):
    kinds = ["dephasing", "haar-rotation", "product-su2"]
    for i in range(16):
        noise = sample_noise(kinds[i % 3], i, 1, jitter=0.2 * (i % 2))[0]
        yield ProtocolConfig(
            signal=SignalState.random(rng), noise=noise,
            detector=DetectorModel(rng.uniform(0.3, 1), ["threshold", "number-resolving"][(i // 2) % 2]),
            variant=["port3", "port3+port4"][i % 2], accept=["both", "d-only"][(i // 4) % 2],
            double_click=["abort", "random"][(i // 3) % 2], transmissivity=[1.0, 0.8][(i // 5) % 2],
            convention=["real", "i"][(i // 8) % 2],
            source=[None, SourceSpec("coherent-pair", nu=0.2, mu=0.2, cutoff=2)][(i // 6) % 2],
        )


def test_fast_path_matches_element_by_element_path(rng):
    for cfg in _configs(rng):
        reg = _registry_for(cfg)
        st = source_state(replace(cfg.source or SourceSpec("ideal"), signal=cfg.signal), reg)
        rec, dec = transmit_and_decode(st, cfg)
        rec2 = transmit(st, cfg.noise, cfg.convention, cfg.transmissivity)
        dec2 = decode(rec2, cfg.ports, cfg.convention)
        assert rec.allclose(rec2) and dec.allclose(dec2)
        for port in cfg.ports:
            fast = _accept_port(dec, port, cfg)
            slow = _decode_port(dec2, port, cfg)
            for k in ("D", "Dbar"):
                assert fast[0][k] == pytest.approx(slow[0][k], abs=1e-12)
                assert fast[1][k] == pytest.approx(slow[1][k], abs=1e-12)
            assert fast[2] == pytest.approx(slow[2], abs=1e-12)


def test_convention_independence(rng):
    for cfg in _configs(rng):
        if isinstance(cfg.noise, DephasingParams) or cfg.source is not None:
            continue
        a = run_distribution(replace(cfg, convention="real"))
        b = run_distribution(replace(cfg, convention="i"))
        assert a.success_probability == pytest.approx(b.success_probability, abs=1e-12)
        for k in a.outcome_breakdown:
            assert a.outcome_breakdown[k] == pytest.approx(b.outcome_breakdown[k], abs=1e-12)
        assert a.fidelity == pytest.approx(b.fidelity, abs=1e-12)


def test_monte_carlo_independent_of_workers():
    cfg = ProtocolConfig(signal=SignalState(0.6, 0.8), noise=NoiseSampler("haar-rotation", seed=5),
                         variant="port3+port4")
    one = run_monte_carlo(cfg, 40, keep_trials=True)
    two = run_monte_carlo(cfg, 40, workers=2, keep_trials=True)
    assert one.as_dict(True) == two.as_dict(True)
    assert len(one.per_trial) == 40


def test_haar_average_small_sample():
    cfg = ProtocolConfig(noise=NoiseSampler("haar-rotation", seed=2), variant="port3+port4")
    rep = run_monte_carlo(cfg, 4000)
    # E|d1 g2|^2 / 2 = 1/8 per port; the per-trial spread is below 0.2
    assert rep.mean_parity_by_port["3"] == pytest.approx(0.125, abs=4 * 0.2 / math.sqrt(4000))
    assert rep.mean_parity_factor == pytest.approx(0.25, abs=8 * 0.2 / math.sqrt(4000))


def test_sampler_rejected_by_single_run():
    with pytest.raises(ValidationError):
        run_distribution(ProtocolConfig(noise=NoiseSampler("dephasing")))


def test_multiphoton_false_accepts():
    sig = SignalState(0.6, 0.8j)
    cfg = ProtocolConfig(signal=sig)
    ideal = run_multiphoton_error(SourceSpec("ideal", sig), cfg)
    assert ideal.false_accept_probability == 0.0
    assert ideal.accepted_probability == pytest.approx(0.125)
    two = run_multiphoton_error(SourceSpec("fock", sig, n_ref=2, n_sig=0), cfg, cutoff=3)
    assert two.false_accept_probability > 0
    assert two.true_accept_probability == 0.0
    with pytest.raises(ValidationError):
        run_multiphoton_error(SourceSpec("ideal", sig), cfg, cutoff=2)
