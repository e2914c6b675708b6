import math

import numpy as np
import pytest

from qubitdist.errors import ConfigurationError, ValidationError
from qubitdist.fock import FockState, ModeLabel, ModeRegistry, apply_transform
from qubitdist.optics import ElementSpec, bs_matrix, build_element, hwp_matrix

SQ = 1 / math.sqrt(2)


@pytest.fixture
def reg():
    return ModeRegistry(["a", "b", "c", "d"], timebins=(0, 2))


def one(reg, path, pol, t=0, amp=1.0):
    return FockState.from_counts(reg, {ModeLabel(path, pol, t): 1}, amplitude=amp)


@pytest.mark.parametrize("convention", ["real", "i"])
def test_bs_matrix_unitary(convention):
    u = bs_matrix(convention)
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-15)


def test_hwp_special_angles():
    assert np.array_equal(hwp_matrix(90.0), np.array([[0, 1], [1, 0]]))
    assert np.allclose(hwp_matrix(45.0) @ [1, 0], [SQ, SQ])
    assert np.allclose(hwp_matrix(45.0) @ [0, 1], [SQ, -SQ])


def test_pbs_routing_real_and_i(reg):
    real = build_element(ElementSpec("PBS", ("a", "b"), ("c", "d")), reg)
    ii = build_element(ElementSpec("PBS", ("a", "b"), ("c", "d"), convention="i"), reg)
    cases = [(("a", "H"), ("c", "H"), 1), (("a", "V"), ("d", "V"), 1j),
             (("b", "H"), ("d", "H"), 1), (("b", "V"), ("c", "V"), 1j)]
    for (p, pol), (q, qpol), r in cases:
        out = apply_transform(one(reg, p, pol), real)
        assert out.amplitude({ModeLabel(q, qpol, 0): 1}) == pytest.approx(1.0)
        out = apply_transform(one(reg, p, pol), ii)
        assert out.amplitude({ModeLabel(q, qpol, 0): 1}) == pytest.approx(r)


def test_bs_acts_on_both_polarizations(reg):
    bs = build_element(ElementSpec("BS", ("a", "b"), ("c", "d")), reg)
    out = apply_transform(one(reg, "b", "V", 2), bs)
    assert out.amplitude({ModeLabel("c", "V", 2): 1}) == pytest.approx(SQ)
    assert out.amplitude({ModeLabel("d", "V", 2): 1}) == pytest.approx(-SQ)


def test_phase_shift_selected_polarization(reg):
    ps = build_element(ElementSpec("PS", ("a",), phase=math.pi, pols=("V",)), reg)
    s = one(reg, "a", "H", amp=0.6) + one(reg, "a", "V", amp=0.8)
    out = apply_transform(s, ps)
    assert out.amplitude({ModeLabel("a", "H", 0): 1}) == pytest.approx(0.6)
    assert out.amplitude({ModeLabel("a", "V", 0): 1}) == pytest.approx(-0.8)


def test_delay_moves_bins_and_guards_overflow(reg):
    dl = build_element(ElementSpec("DELAY", ("a",), delay=1), reg)
    out = apply_transform(one(reg, "a", "H", 0), dl)
    assert out.amplitude({ModeLabel("a", "H", 1): 1}) == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        apply_transform(one(reg, "a", "H", 2), dl)


def test_loss_splits_into_ancilla(reg):
    loss = build_element(ElementSpec("LOSS", ("a",), ("b",), transmissivity=0.36), reg)
    out = apply_transform(one(reg, "a", "V", 1), loss)
    assert abs(out.amplitude({ModeLabel("a", "V", 1): 1})) ** 2 == pytest.approx(0.36)
    assert abs(out.amplitude({ModeLabel("b", "V", 1): 1})) ** 2 == pytest.approx(0.64)


@pytest.mark.parametrize("spec", [
    dict(kind="HWP", inputs=("a",), angle=180.0),
    dict(kind="PS", inputs=("a",), phase=-0.1),
    dict(kind="LOSS", inputs=("a",), outputs=("b",), transmissivity=1.5),
    dict(kind="BS", inputs=("a",), outputs=("c", "d")),
    dict(kind="MIRROR", inputs=("a",)),
])
def test_invalid_specs(spec):
    with pytest.raises(ValidationError):
        ElementSpec(**spec)


def test_unregistered_port(reg):
    with pytest.raises(ConfigurationError):
        build_element(ElementSpec("HWP", ("zz",), angle=45.0), reg)
