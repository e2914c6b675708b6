import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs

from qubitdist.errors import ConfigurationError, ValidationError
from qubitdist.fock import (FockState, ModeLabel, ModeRegistry, ModeTransform, apply_circuit, apply_sequence,
                            apply_transform, inner_product, project, single_mode_transform)

SQ = 1 / math.sqrt(2)


def reg4(cutoff=4):
    return ModeRegistry(["a", "b"], timebins=(0, 0), cutoff=cutoff)


def haar(n, rng):
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


def perm(m):
    n = m.shape[0]
    if n == 0:
        return 1.0
    return sum(np.prod([m[i, s[i]] for i in range(n)]) for s in itertools.permutations(range(n)))


def oracle_amplitude(u, n_in, n_out):
    """<n_out| U |n_in> = Perm(U[out rows, in cols]) / sqrt(prod n_in! n_out!)."""
    rows = [i for i, n in enumerate(n_out) for _ in range(n)]
    cols = [j for j, n in enumerate(n_in) for _ in range(n)]
    norm = math.prod(math.factorial(n) for n in n_in) * math.prod(math.factorial(n) for n in n_out)
    return perm(u[np.ix_(rows, cols)]) / math.sqrt(norm)


def test_registry_indexing_and_unknown_mode():
    reg = ModeRegistry(["a"], timebins=(0, 1))
    assert len(reg) == 4
    assert reg.index(ModeLabel("a", "V", 1)) == 3
    with pytest.raises(ConfigurationError):
        reg.index(ModeLabel("zz", "H", 0))
    with pytest.raises(ValidationError):
        ModeLabel("a", "D", 0)


def test_state_rejects_cutoff_and_unknown_index():
    reg = reg4(cutoff=2)
    with pytest.raises(ValidationError):
        FockState(reg, {(0, 0, 1): 1.0})
    with pytest.raises(ConfigurationError):
        FockState(reg, {(99,): 1.0})


def test_from_counts_amplitude_and_norm():
    reg = reg4()
    s = FockState.from_counts(reg, {ModeLabel("a", "H"): 2, ModeLabel("b", "V"): 1}, amplitude=0.5j)
    assert s.amplitude({ModeLabel("a", "H"): 2, ModeLabel("b", "V"): 1}) == 0.5j
    assert s.norm_squared == pytest.approx(0.25)
    assert s.photon_numbers() == {3}


def test_hong_ou_mandel_dip():
    # |1,1> on a 50:50 beamsplitter: no coincidences, (|2,0> - |0,2>)/sqrt 2
    reg = ModeRegistry(["a", "b"], timebins=(0, 0))
    a, b = ModeLabel("a", "H"), ModeLabel("b", "H")
    bs = single_mode_transform([a, b], np.array([[1, 1], [1, -1]]) * SQ)
    out = apply_transform(FockState.from_photons(reg, a, b), bs)
    assert abs(out.amplitude({a: 1, b: 1})) < 1e-15
    assert out.amplitude({a: 2}) == pytest.approx(SQ)
    assert out.amplitude({b: 2}) == pytest.approx(-SQ)


def test_matches_permanent_oracle_up_to_three_photons(rng):
    reg = reg4()
    modes = list(reg.modes)
    for n in range(4):
        for n_in in itertools.product(range(n + 1), repeat=4):
            if sum(n_in) != n:
                continue
            u = haar(4, rng)
            out = apply_transform(FockState.from_counts(reg, dict(zip(modes, n_in))),
                                  single_mode_transform(modes, u))
            for n_out in itertools.product(range(n + 1), repeat=4):
                if sum(n_out) != n:
                    continue
                got = out.amplitude({m: k for m, k in zip(modes, n_out) if k})
                assert abs(got - oracle_amplitude(u, n_in, n_out)) < 1e-12


def test_inverse_round_trip_with_relabel(rng):
    reg = ModeRegistry(["a", "b", "c"], timebins=(0, 0))
    a, b, c = (ModeLabel(p, "H") for p in "abc")
    t = ModeTransform((a, b), haar(2, rng), relabel={a: c, c: a})
    s = FockState.from_counts(reg, {a: 1, b: 2}, amplitude=0.6) + FockState.from_counts(reg, {b: 1}, amplitude=0.8)
    back = apply_transform(apply_transform(s, t), t.inverse())
    assert back.allclose(s, atol=1e-13)


def test_non_unitary_and_colliding_relabel_rejected():
    a, b = ModeLabel("a", "H"), ModeLabel("b", "H")
    with pytest.raises(ValidationError):
        ModeTransform((a, b), np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValidationError):
        ModeTransform((a,), np.eye(1), relabel={a: b, b: b})


def test_apply_circuit_equals_sequence(rng):
    reg = ModeRegistry(["a", "b"], timebins=(0, 1))
    modes = list(reg.modes)
    ts = [single_mode_transform(modes, haar(len(modes), rng)) for _ in range(3)]
    s = FockState.from_counts(reg, {modes[0]: 1, modes[5]: 2})
    assert apply_circuit(s, ts).allclose(apply_sequence(s, ts), atol=1e-12)


def test_projection_and_zero_probability_flag():
    reg = reg4()
    a, b = ModeLabel("a", "H"), ModeLabel("b", "H")
    s = FockState.from_counts(reg, {a: 1}, amplitude=0.6) + FockState.from_counts(reg, {b: 1}, amplitude=0.8)
    p, cond = project(s, lambda occ: occ.get(a, 0) == 1)
    assert p == pytest.approx(0.36)
    assert cond.norm == pytest.approx(1.0)
    p0, empty = project(s, lambda occ: False)
    assert p0 == 0.0 and empty.empty and len(empty) == 0


def test_inner_product_conjugate_linear():
    reg = reg4()
    a = FockState.from_counts(reg, {ModeLabel("a", "H"): 1}, amplitude=1j)
    assert inner_product(a, a) == pytest.approx(1.0)
    assert inner_product(a, a.scaled(2.0)) == pytest.approx(2.0)


_counts = hs.lists(hs.integers(0, 2), min_size=8, max_size=8).filter(lambda c: 0 < sum(c) <= 3)


@settings(max_examples=1000)
@given(
    terms=hs.lists(hs.tuples(_counts, hs.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False)),
                   min_size=1, max_size=4),
    seed=hs.integers(0, 2**32 - 1),
)
def test_norm_preserved_by_random_unitaries(terms, seed):
    reg = ModeRegistry(["a", "b", "c", "d"], timebins=(0, 0), cutoff=3)
    modes = list(reg.modes)
    s = FockState(reg, {})
    for counts, amp in terms:
        s = s + FockState.from_counts(reg, {m: k for m, k in zip(modes, counts) if k}, amplitude=amp)
    if s.norm_squared < 1e-6:
        return
    s = s.normalized()
    u = haar(len(modes), np.random.default_rng(seed))
    out = apply_transform(s, single_mode_transform(modes, u))
    assert abs(out.norm_squared - 1.0) < 1e-12
