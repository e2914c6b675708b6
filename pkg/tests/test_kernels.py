import json
import os
import subprocess
import sys

import numpy as np
import pytest

from qubitdist import kernels
from qubitdist.fock import PRUNE

needs_compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernel not built")


def random_case(rng, n_modes=10, photons=3, n_terms=6):
    terms = {}
    for _ in range(n_terms):
        key = tuple(sorted(rng.integers(0, n_modes, photons).tolist()))
        terms[key] = complex(*rng.normal(size=2))
    columns = {}
    for m in rng.choice(n_modes, n_modes // 2, replace=False).tolist():
        outs = rng.choice(n_modes, 3, replace=False).tolist()
        columns[m] = tuple((o, complex(*rng.normal(size=2))) for o in outs)
    relabel = rng.permutation(n_modes).tolist() if rng.random() < 0.5 else None
    return terms, columns, relabel


def same(a, b):
    return a.keys() == b.keys() and all(abs(a[k] - b[k]) < 1e-12 for k in a)


@needs_compiled
def test_compiled_matches_python(rng):
    for _ in range(200):
        terms, cols, rel = random_case(rng)
        assert same(kernels.substitute(terms, cols, rel, PRUNE), kernels.python_substitute(terms, cols, rel, PRUNE))


def test_python_kernel_bosonic_factor():
    # one mode doubled by a 1 -> 1 map keeps amplitude; splitting gives sqrt 2 weights
    out = kernels.python_substitute({(0, 0): 1.0}, {0: ((0, 2 ** -0.5), (1, 2 ** -0.5))}, None, PRUNE)
    assert out[(0, 0)] == pytest.approx(0.5)
    assert out[(0, 1)] == pytest.approx(2 ** -0.5)
    assert out[(1, 1)] == pytest.approx(0.5)


def test_pure_python_env_selects_fallback():
    code = ("import json\nfrom qubitdist import kernels\nfrom qubitdist.protocol import ProtocolConfig, run_distribution\n"
            "from qubitdist.noise import RotationParams\nfrom qubitdist.sources import SignalState\n"
            "r = run_distribution(ProtocolConfig(signal=SignalState(0.6, 0.8j), "
            "noise=RotationParams((0.6, 0.8j), (0.8, 0.6j)), variant='port3+port4'))\n"
            "print(json.dumps([kernels.BACKEND, r.success_probability, r.fidelity]))")
    runs = {}
    for flag in ("1", "0"):
        env = dict(os.environ, QUBITDIST_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        runs[flag] = json.loads(out.stdout)
    assert runs["1"][0] == "python"
    assert runs["1"][1:] == pytest.approx(runs["0"][1:], abs=1e-14)
