import cmath
import math

import numpy as np
import pytest

from qubitdist.errors import ConfigurationError, ValidationError
from qubitdist.noise import (DephasingParams, NoiseSampler, RotationParams, channel1_matrix, channel2_matrix,
                             channel_matrices, params_from_config, sample_noise)

from conftest import random_su2


def test_channel_matrices_special_unitary(rng):
    for _ in range(20):
        for m in (channel1_matrix(*random_su2(rng)), channel2_matrix(*random_su2(rng))):
            assert np.allclose(m.conj().T @ m, np.eye(2), atol=1e-14)
            assert abs(np.linalg.det(m) - 1) < 1e-14


def test_channel_columns_act_on_carried_polarization():
    d, g = 0.6, 0.8j
    assert np.allclose(channel1_matrix(d, g) @ [1, 0], [d, g])
    assert np.allclose(channel2_matrix(d, g) @ [0, 1], [d, g])


def test_dephasing_is_rotation_special_case():
    p = DephasingParams(0.3, 1.9)
    (u1, u2), _ = channel_matrices(p)
    assert np.allclose(u1, cmath.exp(0.3j) * np.eye(2))
    r = p.as_rotation()
    assert r.delta1 == pytest.approx(cmath.exp(0.3j))
    assert r.gamma2 == pytest.approx(cmath.exp(1.9j))
    assert r.gamma1 == 0 and r.delta2 == 0


def test_phases_wrap():
    p = DephasingParams(2 * math.pi + 0.5, -0.5)
    assert p.phi_h == pytest.approx(0.5)
    assert p.phi_v == pytest.approx(2 * math.pi - 0.5)


def test_rotation_must_be_normalized():
    with pytest.raises(ValidationError):
        RotationParams((1.0, 0.1), (0.0, 1.0))


@pytest.mark.parametrize("kind", ["dephasing", "haar-rotation", "product-su2"])
def test_sampling_is_seeded(kind):
    a = sample_noise(kind, 42, 5, jitter=0.2)
    b = sample_noise(kind, 42, 5, jitter=0.2)
    c = sample_noise(kind, 43, 5, jitter=0.2)
    assert [x.to_config() for x in a] == [x.to_config() for x in b]
    assert [x.to_config() for x in a] != [x.to_config() for x in c]


def test_haar_moments():
    # Haar SU(2): |delta|^2 ~ U(0, 1), so the mean is 1/2 and the mean of |d1 g2|^2 is 1/4
    draws = sample_noise("haar-rotation", 1, 20000)
    d1 = np.array([abs(p.delta1) ** 2 for p in draws])
    g2 = np.array([abs(p.gamma2) ** 2 for p in draws])
    assert abs(d1.mean() - 0.5) < 0.01
    assert abs(np.var(d1) - 1 / 12) < 0.005
    assert abs((d1 * g2).mean() - 0.25) < 0.01


def test_product_su2_differs_from_haar():
    # uniform Euler angle b: |delta|^2 = cos^2(b/2) has mean 1/2 but variance 1/8
    d = np.array([abs(p.delta1) ** 2 for p in sample_noise("product-su2", 1, 20000)])
    assert abs(d.mean() - 0.5) < 0.01
    assert abs(np.var(d) - 1 / 8) < 0.005


def test_jitter_only_touches_late_bins():
    clean = sample_noise("haar-rotation", 9, 3)
    noisy = sample_noise("haar-rotation", 9, 3, jitter=0.5)
    for a, b in zip(clean, noisy):
        assert a.late is None and b.late is not None
        assert b.late != (b.channel1, b.channel2)


@pytest.mark.parametrize("p", [
    DephasingParams(0.1, 0.2),
    DephasingParams(0.1, 0.2, late=(0.3, 0.4)),
    RotationParams((0.6, 0.8j), (0.8, -0.6j)),
    sample_noise("haar-rotation", 3, 1, jitter=0.1)[0],
])
def test_config_round_trip(p):
    a, b = p.to_config(), params_from_config(p.to_config()).to_config()
    assert a.keys() == b.keys()
    for k in a:
        assert b[k] == a[k] if isinstance(a[k], str) else b[k] == pytest.approx(a[k], abs=1e-15)


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        NoiseSampler("thermal")
    with pytest.raises(ValidationError):
        NoiseSampler("dephasing", jitter=-1)
