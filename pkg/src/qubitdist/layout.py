"""Spatial path names shared by the encoder, channels and decoders.

::

    pdc --PBS--> short --HWP_r------------\\
            \\--> long --DELAY--HWP_s--PS_s--BS--> A --PBS--> 1 --channel 1--\\
                                          \\--> A_dump       \\-> 2 --channel 2--PBS--> 3, 4

    3 --BS--> L3 --HWP_L--DELAY--\\
         \\--> S3 -----------------PBS--> X3 --HWP_X--PBS_X--> XD3, XDb3
                                     \\--> Y3

Port 4 has the same decoder with suffix ``4`` plus a HWP(90) on ``Y4``.
Paths starting with ``v`` are unused (vacuum) input ports.
"""
from .fock import ModeRegistry

ENCODER = "A"
ENCODER_DUMP = "A_dump"
ALICE_SPARE = "vA"
CH1, CH2 = "1", "2"
LOSS1, LOSS2 = "loss1", "loss2"
PORT3, PORT4 = "3", "4"

PDC_PATHS = ("pdc", "vpdc", "short", "long")

REFERENCE_BIN = 0
SIGNAL_BIN = 1
WINDOW_BIN = 1


def decoder_paths(port: str) -> dict:
    """Path names of the decoder attached to ``port``."""
    return {
        "in": port,
        "vac": f"v{port}",
        "L": f"L{port}",
        "S": f"S{port}",
        "X": f"X{port}",
        "Y": f"Y{port}",
        "vX": f"vX{port}",
        "D": f"XD{port}",
        "Db": f"XDb{port}",
    }


def protocol_paths(include_pdc=True) -> list[str]:
    paths = []
    if include_pdc:
        paths += list(PDC_PATHS)
    paths += [ENCODER, ENCODER_DUMP, ALICE_SPARE, CH1, CH2, LOSS1, LOSS2]
    for port in (PORT3, PORT4):
        paths += list(decoder_paths(port).values())
    return list(dict.fromkeys(paths))


def protocol_registry(cutoff: int = 4, include_pdc: bool = True) -> ModeRegistry:
    return ModeRegistry(protocol_paths(include_pdc), timebins=(0, 3), cutoff=cutoff)


_DEFAULT = {}


def default_registry(cutoff: int = 4) -> ModeRegistry:
    """Shared registry instance per cutoff, so compiled transforms are reused."""
    reg = _DEFAULT.get(cutoff)
    if reg is None:
        reg = _DEFAULT[cutoff] = protocol_registry(cutoff)
    return reg
