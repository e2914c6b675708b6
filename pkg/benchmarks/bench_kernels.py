"""Compare the compiled and pure-Python substitution kernels.

Each workload is a real protocol stage: a source state pushed through the
sender, a collective rotation and the receiver's polarizing beamsplitter,
then the received state pushed through the parity-check decoders. Both
backends run on identical inputs and their outputs are checked against each
other before timing.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import sys
import timeit

from qubitdist import kernels
from qubitdist.fock import PRUNE, compose_columns, occupied_modes
from qubitdist.layout import PORT3, PORT4, default_registry
from qubitdist.noise import channel_transforms, sample_noise
from qubitdist.protocol import _alice, _bob, _decoding_columns
from qubitdist.sources import SignalState, SourceSpec, source_state


def _stages(spec: SourceSpec, cutoff: int):
    reg = default_registry(cutoff)
    state = source_state(spec, reg)
    noise = sample_noise("haar-rotation", 11, 1)[0]
    chain = list(_alice(reg, "real")) + channel_transforms(reg, noise) + list(_bob(reg, "real"))
    cols = compose_columns(reg, chain, occupied_modes(state))
    received = kernels.python_substitute(state._terms, cols, None, PRUNE)
    dec, _ = _decoding_columns(reg, (PORT3, PORT4), "real")
    return [("transmit", state._terms, cols), ("decode", received, dec)]


def workloads():
    sig = SignalState(0.6, 0.8j)
    cases = [
        ("ideal pair", SourceSpec("ideal", sig), 2),
        ("fock 2+1", SourceSpec("fock", sig, n_ref=2, n_sig=1), 3),
        ("coherent c=2", SourceSpec("coherent-pair", sig, nu=0.1, mu=0.1, cutoff=2), 4),
        ("fock 3+3", SourceSpec("fock", sig, n_ref=3, n_sig=3), 6),
    ]
    for name, spec, cutoff in cases:
        for stage, terms, cols in _stages(spec, cutoff):
            yield f"{name} / {stage}", terms, cols


def _same(a: dict, b: dict, tol=1e-12) -> bool:
    return a.keys() == b.keys() and all(abs(a[k] - b[k]) <= tol for k in a)


def _best(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", metavar="PATH", help="also write the timings as JSON")
    args = ap.parse_args(argv)

    compiled = kernels.substitute if kernels.BACKEND == "cython" else None
    py = kernels.python_substitute
    if compiled is None:
        print("compiled kernel not available; timing the Python kernel only")

    rows = []
    print(f"{'workload':<28} {'terms':>6} {'python us':>11} {'cython us':>11} {'speedup':>8}")
    for name, terms, cols in workloads():
        ref = py(terms, cols, None, PRUNE)
        t_py = _best(lambda: py(terms, cols, None, PRUNE), args.repeat)
        t_c = None
        if compiled is not None:
            if not _same(ref, compiled(terms, cols, None, PRUNE)):
                print(f"{name}: backends disagree", file=sys.stderr)
                return 1
            t_c = _best(lambda: compiled(terms, cols, None, PRUNE), args.repeat)
        speed = f"{t_py / t_c:8.1f}" if t_c else f"{'-':>8}"
        tc = f"{t_c * 1e6:11.1f}" if t_c else f"{'-':>11}"
        print(f"{name:<28} {len(terms):>6} {t_py * 1e6:11.1f} {tc} {speed}")
        rows.append({"workload": name, "terms": len(terms), "python_s": t_py, "cython_s": t_c})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"backend": kernels.BACKEND, "rows": rows}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
