import math

import numpy as np
import pytest
from hypothesis import settings

from qubitdist.fock import ModeLabel
from qubitdist.layout import PORT3, PORT4, REFERENCE_BIN, SIGNAL_BIN

settings.register_profile("ci", deadline=None, print_blob=True)
settings.load_profile("ci")

SQ = 1.0 / math.sqrt(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def occ(*labels):
    """Occupation dict from (path, pol, bin) triples; repeats add photons."""
    out = {}
    for p, pol, t in labels:
        m = ModeLabel(p, pol, t)
        out[m] = out.get(m, 0) + 1
    return out


def random_su2(rng):
    z = rng.normal(size=4)
    d, g = complex(z[0], z[1]), complex(z[2], z[3])
    n = math.sqrt(abs(d) ** 2 + abs(g) ** 2)
    return d / n, g / n


def rotation_link_oracle(alpha, beta, d1, g1, d2, g2):
    """Two-photon amplitudes after the link, derived by hand.

    The reference D photon and the signal photon each split on the sender's
    PBS (H into channel 1, V into channel 2). Channel 1 sends H to d1 H + g1 V,
    channel 2 sends V to d2 H + g2 V. The receiver's PBS routes channel 1 H and
    channel 2 V to port 3, the other two components to port 4.
    """
    def photon(h, v):
        return {
            (PORT3, "H"): h * d1, (PORT4, "V"): h * g1,
            (PORT4, "H"): v * d2, (PORT3, "V"): v * g2,
        }

    ref = photon(SQ, SQ)
    sig = photon(alpha, beta)
    out = {}
    for (pr, polr), ar in ref.items():
        for (ps, pols), as_ in sig.items():
            out[((pr, polr, REFERENCE_BIN), (ps, pols, SIGNAL_BIN))] = ar * as_
    return out
