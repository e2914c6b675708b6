import math

import pytest
from scipy.stats import poisson

from qubitdist.errors import ConfigurationError, ValidationError
from qubitdist.fock import ModeLabel, inner_product
from qubitdist.layout import ENCODER, REFERENCE_BIN, SIGNAL_BIN, default_registry
from qubitdist.sources import (BB84_STATES, SignalState, SourceSpec, coherent_pair_state, encoder_state,
                               pdc_source_state, signal_waveplate_settings, source_state)

SQ = 1 / math.sqrt(2)


def photons_by_bin(state):
    """{(n_ref, n_sig): probability} for states living in path A."""
    out = {}
    for key, amp in state.items():
        labels = [state.registry.modes[i] for i in key]
        n = (sum(m.timebin == REFERENCE_BIN for m in labels), sum(m.timebin == SIGNAL_BIN for m in labels))
        out[n] = out.get(n, 0.0) + abs(amp) ** 2
    return out


def test_signal_validation_and_unitary():
    with pytest.raises(ValidationError):
        SignalState(1.0, 1.0)
    s = SignalState.normalized(3, 4j)
    assert s.alpha == pytest.approx(0.6) and s.beta == pytest.approx(0.8j)
    assert s.unitary()[:, 0] == pytest.approx([0.6, 0.8j])


def test_encoder_state_amplitudes():
    reg = default_registry()
    s = encoder_state(SignalState(0.6, 0.8j), reg)
    a = lambda pr, ps: s.amplitude({ModeLabel(ENCODER, pr, REFERENCE_BIN): 1, ModeLabel(ENCODER, ps, SIGNAL_BIN): 1})
    assert a("H", "H") == pytest.approx(SQ * 0.6)
    assert a("V", "V") == pytest.approx(SQ * 0.8j)
    assert s.norm == pytest.approx(1.0)


def test_coherent_pair_number_distribution():
    reg = default_registry(4)
    spec = SourceSpec("coherent-pair", nu=0.3, mu=0.2, cutoff=2)
    state, lost = coherent_pair_state(spec, reg, return_truncation=True)
    kept = poisson.cdf(2, 0.2) * poisson.cdf(2, 0.3)
    assert lost == pytest.approx(1 - kept)
    dist = photons_by_bin(state)
    for (n, m), p in dist.items():
        assert p == pytest.approx(poisson.pmf(n, 0.2) * poisson.pmf(m, 0.3) / kept, rel=1e-12)


def test_coherent_cutoff_needs_registry_room():
    with pytest.raises(ValidationError):
        coherent_pair_state(SourceSpec("coherent-pair", nu=0.1, mu=0.1, cutoff=3), default_registry(4))


def test_fock_source_photon_numbers():
    st = source_state(SourceSpec("fock", n_ref=2, n_sig=1), default_registry(3))
    assert photons_by_bin(st) == {(2, 1): pytest.approx(1.0)}


@pytest.mark.parametrize("name", list(BB84_STATES))
def test_pdc_arrangement_reproduces_encoder_state(name):
    # each photon leaves the output BS through A with probability 1/2
    reg = default_registry()
    sig = BB84_STATES[name]
    p, cond = pdc_source_state(sig, reg)
    assert p == pytest.approx(0.25)
    assert abs(inner_product(encoder_state(sig, reg), cond)) == pytest.approx(1.0, abs=1e-12)


def test_waveplate_settings_for_general_signal():
    reg = default_registry()
    sig = SignalState.normalized(0.3, 0.7 * complex(math.cos(1.1), math.sin(1.1)))
    rho, phase = signal_waveplate_settings(sig)
    assert 0 <= rho < 180 and 0 <= phase < 2 * math.pi
    _, cond = pdc_source_state(sig, reg)
    assert abs(inner_product(encoder_state(sig, reg), cond)) == pytest.approx(1.0, abs=1e-12)


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        SourceSpec("laser")
