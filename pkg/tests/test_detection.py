import math

import numpy as np
import pytest

from qubitdist.detection import (DetectorModel, click_probability, correct_phase, count_analyzer,
                                 count_distribution, postselect_coincidence, y_density_matrix)
from qubitdist.errors import ValidationError
from qubitdist.fock import FockState, ModeLabel
from qubitdist.layout import WINDOW_BIN, default_registry


def state(reg, *photons, amp=1.0):
    counts = {}
    for path, pol, t in photons:
        m = ModeLabel(path, pol, t)
        counts[m] = counts.get(m, 0) + 1
    return FockState.from_counts(reg, counts, amplitude=amp)


def test_click_probability_and_counts():
    m = DetectorModel(0.3)
    assert click_probability(0, m) == 0.0
    assert click_probability(2, m) == pytest.approx(1 - 0.7 ** 2)
    assert count_distribution(2, m) == pytest.approx([0.49, 0.42, 0.09])
    with pytest.raises(ValidationError):
        DetectorModel(1.2)


def test_single_coincidence_accepted_with_eta_squared():
    reg = default_registry()
    s = state(reg, ("XD3", "H", WINDOW_BIN), ("Y3", "V", WINDOW_BIN))
    m = DetectorModel(0.6)
    total, acc = postselect_coincidence(count_analyzer(s, m), m)
    assert total == pytest.approx(0.36)
    assert [a.x_result for a in acc] == ["D"]


def test_gated_window_ignores_other_bins():
    reg = default_registry()
    s = state(reg, ("XD3", "H", 2), ("Y3", "V", WINDOW_BIN))
    total, _ = postselect_coincidence(count_analyzer(s, DetectorModel()), DetectorModel())
    assert total == 0.0


def test_double_click_policies():
    reg = default_registry()
    s = state(reg, ("XD3", "H", WINDOW_BIN), ("XDb3", "V", WINDOW_BIN), ("Y3", "H", WINDOW_BIN))
    m = DetectorModel()
    out = count_analyzer(s, m)
    assert postselect_coincidence(out, m)[0] == 0.0
    total, acc = postselect_coincidence(out, m, policy="random")
    assert total == pytest.approx(1.0)
    assert sorted(a.x_result for a in acc) == ["D", "Dbar"]
    assert all(a.flagged and a.probability == pytest.approx(0.5) for a in acc)


def test_number_resolving_rejects_two_photons_in_x():
    reg = default_registry()
    s = state(reg, ("XD3", "H", WINDOW_BIN), ("XD3", "H", WINDOW_BIN), ("Y3", "H", WINDOW_BIN))
    thr, res = DetectorModel(), DetectorModel(1.0, "number-resolving")
    assert postselect_coincidence(count_analyzer(s, thr), thr)[0] == pytest.approx(1.0)
    assert postselect_coincidence(count_analyzer(s, res), res)[0] == 0.0


@pytest.mark.parametrize("convention,flip_on", [("real", "Dbar"), ("i", "D")])
def test_phase_correction(convention, flip_on):
    reg = default_registry()
    s = state(reg, ("Y3", "H", WINDOW_BIN), amp=0.6) + state(reg, ("Y3", "V", WINDOW_BIN), amp=0.8)
    for outcome in ("D", "Dbar"):
        rho = y_density_matrix(correct_phase(s, outcome, convention=convention))
        sign = -1 if outcome == flip_on else 1
        assert np.allclose(rho, [[0.36, sign * 0.48], [sign * 0.48, 0.64]])
    with pytest.raises(ValidationError):
        correct_phase(state(reg, ("Y3", "H", WINDOW_BIN), ("Y3", "V", WINDOW_BIN)), "D")
