"""Command-line runner.

Each subcommand resolves a flat ``key=value`` configuration and runs one
experiment, then writes a JSON or CSV report that echoes the resolved
configuration. Precedence, lowest first: built-in defaults, the ``--config``
file, ``--set KEY=VALUE`` pairs, dedicated flags.

Exit codes: 0 success, 2 usage or configuration error, 3 validation failure
(including a failing ``verify``), 4 internal or I/O error.
"""
from __future__ import annotations

import argparse
import difflib
import json
import math
import os
import sys
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from . import __version__
from . import reports
from .bb84 import ROUND_COLUMNS, run_bb84_session
from .detection import POLICIES, RESOLVING, DetectorModel
from .errors import ConfigurationError, ValidationError
from .noise import DephasingParams, NoiseSampler, params_from_config
from .protocol import ACCEPT_MODES, VARIANTS, ProtocolConfig, run_distribution, run_monte_carlo, run_multiphoton_error
from .sources import KINDS as SOURCE_KINDS, SignalState, SourceSpec
from . import stats as st

OUTPUT_DIR_ENV = "QUBITDIST_OUTPUT_DIR"
COMMANDS = ("dephasing", "rotation", "bb84", "stats", "verify", "multiphoton")
EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_INTERNAL = 0, 2, 3, 4

NOISE_KINDS = ("none", "dephasing", "rotation", "haar-rotation", "product-su2")
STATS_SOURCES = ("coherent", "pdc", "triggered")
CONVENTIONS = ("real", "i")
FORMATS = ("json", "csv")


# ---------------------------------------------------------------------------
# config keys


def _float(s):
    return float(s)


def _int(s):
    if isinstance(s, float) and s.is_integer():
        return int(s)
    return int(str(s))


def _bool(s):
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _complex(s):
    if isinstance(s, (int, float, complex)):
        return complex(s)
    return complex(str(s).replace(" ", "").replace("i", "j"))


def _text(s):
    return str(s)


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[Any], Any]
    default: Any = None
    choices: tuple | None = None
    check: Callable[[Any], bool] | None = None
    requirement: str = ""
    help: str = ""


def _nonneg(x):
    return x >= 0 and math.isfinite(x)


def _unit_interval(x):
    return 0.0 <= x <= 1.0


def _positive(x):
    return x >= 1


_KEYS = [
    Key("noise.kind", _text, None, NOISE_KINDS, help="noise model; sampled kinds draw one setting per trial"),
    Key("noise.sampled", _bool, False, help="draw dephasing phases per trial instead of using fixed values"),
    Key("noise.seed", _int, None, help="seed of the noise draws (defaults to run.seed)"),
    Key("noise.jitter", _float, 0.0, check=_nonneg, requirement="must be non-negative",
        help="std dev (rad) of the non-collective perturbation of late time bins"),
    Key("noise.phi_h", _float, 0.0),
    Key("noise.phi_v", _float, 0.0),
    Key("noise.late_phi_h", _float, None),
    Key("noise.late_phi_v", _float, None),
]
for _late in ("", "late_"):
    for _name, _re in (("delta1", 1.0), ("gamma1", 0.0), ("delta2", 0.0), ("gamma2", 1.0)):
        _KEYS.append(Key(f"noise.{_late}{_name}_re", _float, None if _late else _re))
        _KEYS.append(Key(f"noise.{_late}{_name}_im", _float, None if _late else 0.0))
_KEYS += [
    Key("source.kind", _text, "ideal", SOURCE_KINDS),
    Key("source.alpha", _complex, 1.0, help="H amplitude of the signal qubit"),
    Key("source.beta", _complex, 0.0, help="V amplitude of the signal qubit"),
    Key("source.nu", _float, 0.0, check=_nonneg, requirement="must be a finite non-negative number"),
    Key("source.mu", _float, 0.0, check=_nonneg, requirement="must be a finite non-negative number"),
    Key("source.cutoff", _int, 2, check=_nonneg, requirement="must be non-negative"),
    Key("source.pair_prob", _float, 0.0, check=_unit_interval, requirement="must lie in [0, 1]"),
    Key("source.trigger_p1", _float, 1.0, check=_unit_interval, requirement="must lie in [0, 1]"),
    Key("source.trigger_pmul", _float, 0.0, check=_unit_interval, requirement="must lie in [0, 1]"),
    Key("source.n_ref", _int, 1, check=_nonneg, requirement="must be non-negative"),
    Key("source.n_sig", _int, 1, check=_nonneg, requirement="must be non-negative"),
    Key("detector.eta", _float, 1.0, check=_unit_interval, requirement="must lie in [0, 1]"),
    Key("detector.resolving", _text, "threshold", RESOLVING),
    Key("detector.double_click", _text, "abort", POLICIES),
    Key("protocol.variant", _text, "port3", VARIANTS),
    Key("protocol.accept", _text, "both", ACCEPT_MODES),
    Key("protocol.convention", _text, "real", CONVENTIONS),
    Key("protocol.transmissivity", _float, 1.0, check=_unit_interval, requirement="must lie in [0, 1]"),
    Key("run.seed", _int, 0),
    Key("run.trials", _int, 1, check=_positive, requirement="must be at least 1"),
    Key("run.workers", _int, 1, check=_positive, requirement="must be at least 1"),
    Key("bb84.rounds", _int, 10000, check=_positive, requirement="must be at least 1"),
    Key("stats.source", _text, "coherent", STATS_SOURCES),
    Key("stats.grid", _int, 0, check=_nonneg, requirement="must be non-negative",
        help="grid points per axis; 0 evaluates a single point"),
    Key("stats.max", _float, 1.0, check=lambda x: x > 0, requirement="must be positive",
        help="upper end of the grid axis"),
    Key("stats.threshold", _float, st.DEFAULT_THRESHOLD, check=lambda x: x > 0, requirement="must be positive"),
    Key("multiphoton.cutoff", _int, None, check=lambda x: x >= 3, requirement="must be at least 3"),
    Key("verify.only", _text, "", help="comma-separated criterion numbers; empty runs all"),
    Key("output.format", _text, "json", FORMATS),
    Key("output.per_trial", _bool, False),
    Key("output.dir", _text, None, help=f"report directory (default ${OUTPUT_DIR_ENV} or the working directory)"),
    Key("output.path", _text, None, help="explicit report path"),
    Key("output.log", _text, None, help="bb84 per-round CSV log path"),
]
KEYS = {k.name: k for k in _KEYS}

_NOISE = tuple(k for k in KEYS if k.startswith("noise."))
_SIGNAL = ("source.alpha", "source.beta")
_DETECTOR = ("detector.eta", "detector.resolving", "detector.double_click")
_PROTOCOL = ("protocol.variant", "protocol.accept", "protocol.convention", "protocol.transmissivity")
_OUTPUT = ("output.format", "output.per_trial", "output.dir", "output.path")

APPLICABLE = {
    "dephasing": _NOISE + _SIGNAL + _DETECTOR + _PROTOCOL + ("run.seed", "run.trials", "run.workers") + _OUTPUT,
    "rotation": _NOISE + _SIGNAL + _DETECTOR + _PROTOCOL + ("run.seed", "run.trials", "run.workers") + _OUTPUT,
    "bb84": _NOISE + _DETECTOR + ("protocol.accept", "protocol.convention", "run.seed", "bb84.rounds",
                                  "output.log") + _OUTPUT,
    "stats": ("stats.source", "stats.grid", "stats.max", "stats.threshold", "source.nu", "source.mu",
              "source.pair_prob", "source.trigger_p1", "source.trigger_pmul") + _OUTPUT,
    "multiphoton": _NOISE + tuple(k for k in KEYS if k.startswith("source.")) + _DETECTOR + _PROTOCOL
    + ("multiphoton.cutoff",) + _OUTPUT,
    "verify": ("verify.only",) + _OUTPUT,
}

COMMAND_DEFAULTS = {
    "dephasing": {"noise.kind": "dephasing"},
    "rotation": {"noise.kind": "rotation"},
    "bb84": {"noise.kind": "haar-rotation", "protocol.accept": "d-only"},
    "stats": {"source.nu": 0.1, "source.mu": 0.1, "source.pair_prob": 0.01},
    "multiphoton": {"noise.kind": "dephasing", "source.kind": "coherent-pair", "source.nu": 0.1, "source.mu": 0.1},
    "verify": {},
}

# never echoed: where a report lands does not change the experiment
_NOT_ECHOED = ("output.dir", "output.path", "output.log")


def read_config_file(path) -> dict:
    """Parse a ``key=value`` file (``#`` comments) or the config block of a JSON report."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc.msg})") from exc
        data = data.get("config", data) if isinstance(data, dict) else data
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: expected a JSON object")
        return {str(k): v for k, v in data.items()}
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{n}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _parse_pairs(pairs) -> dict:
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _unknown(key: str) -> ConfigurationError:
    close = difflib.get_close_matches(key, KEYS, n=1)
    hint = f"; did you mean {close[0]!r}?" if close else ""
    return ConfigurationError(f"unknown config key {key!r}{hint}")


def resolve_config(command: str, *layers: dict) -> dict:
    """Merge override layers over the defaults and type-check every key.

    Unknown keys and keys the command does not use raise
    :class:`ConfigurationError`; values outside their range raise
    :class:`ValidationError`. Both messages name the key.
    """
    allowed = APPLICABLE[command]
    raw = {k: KEYS[k].default for k in allowed}
    raw.update({k: v for k, v in COMMAND_DEFAULTS[command].items() if k in allowed})
    if "output.dir" in raw and raw["output.dir"] is None:
        raw["output.dir"] = os.environ.get(OUTPUT_DIR_ENV) or "."
    for layer in layers:
        for key, value in layer.items():
            if key not in KEYS:
                raise _unknown(key)
            if key not in allowed:
                raise ConfigurationError(f"config key {key!r} is not used by the {command} command")
            raw[key] = value
    cfg = {}
    for key in allowed:
        spec, value = KEYS[key], raw[key]
        if value is None or (value == "" and spec.parse is not _text):
            cfg[key] = None
            continue
        try:
            value = spec.parse(value)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{key}: cannot parse {raw[key]!r} ({exc})") from None
        if spec.choices is not None and value not in spec.choices:
            raise ConfigurationError(f"{key}: {value!r} is not one of {', '.join(spec.choices)}")
        if isinstance(value, float) and not math.isfinite(value):
            raise ValidationError(f"{key}: must be finite")
        if spec.check is not None and not spec.check(value):
            raise ValidationError(f"{key}: {spec.requirement or 'out of range'} (got {value})")
        cfg[key] = value
    return cfg


def echo_config(command: str, cfg: dict) -> dict:
    """The subset of ``cfg`` that defines the experiment, in a re-readable form."""
    kind = cfg.get("noise.kind")
    sampled = kind in ("haar-rotation", "product-su2") or (kind == "dephasing" and cfg.get("noise.sampled"))
    out = {}
    for key, value in cfg.items():
        if key in _NOT_ECHOED or value is None:
            continue
        if key.startswith("noise.") and not _noise_key_relevant(key, kind, sampled):
            continue
        if isinstance(value, complex):
            value = value.real if value.imag == 0 else str(value)
        out[key] = value
    return out


def _noise_key_relevant(key, kind, sampled) -> bool:
    if key == "noise.kind" or kind == "none":
        return key == "noise.kind"
    if sampled:
        return key in ("noise.kind", "noise.sampled", "noise.seed", "noise.jitter")
    if key in ("noise.seed", "noise.jitter"):
        return False
    if kind == "dephasing":
        return "phi" in key or key == "noise.sampled"
    return "phi" not in key and key != "noise.sampled"


# ---------------------------------------------------------------------------
# builders


def build_noise(cfg: dict):
    """``None`` (noiseless), fixed parameters or a :class:`NoiseSampler`."""
    kind = cfg["noise.kind"]
    seed = cfg["noise.seed"] if cfg["noise.seed"] is not None else cfg.get("run.seed", 0)
    if kind == "none":
        return None
    if kind in ("haar-rotation", "product-su2") or (kind == "dephasing" and cfg["noise.sampled"]):
        cfg["noise.seed"] = seed
        return NoiseSampler(kind, seed=seed, jitter=cfg["noise.jitter"])
    if cfg["noise.sampled"]:
        raise ConfigurationError("noise.sampled: noise.kind=rotation has fixed parameters; "
                                 "use haar-rotation or product-su2 to sample")
    if cfg["noise.jitter"]:
        raise ValidationError("noise.jitter: only sampled noise takes a jitter; set noise.late_* for fixed noise")
    flat = {k: v for k, v in cfg.items() if k.startswith("noise.") and v is not None}
    late = [k for k in flat if ".late_" in k]
    if kind == "dephasing" and late and len(late) != 2:
        raise ConfigurationError("noise.late_phi_h: set both late phases or neither")
    if kind == "rotation" and late and len([k for k in late if "phi" not in k]) != 8:
        raise ConfigurationError("noise.late_delta1_re: set all eight late rotation components or none")
    try:
        return params_from_config(flat)
    except ValidationError as exc:
        raise ValidationError(f"noise.delta1_re..noise.gamma2_im: {exc}") from None


def build_signal(cfg: dict) -> SignalState:
    a, b = cfg["source.alpha"], cfg["source.beta"]
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-12:
        raise ValidationError(f"source.alpha, source.beta: |alpha|^2 + |beta|^2 must equal 1 "
                              f"(got {abs(a) ** 2 + abs(b) ** 2:.12g})")
    return SignalState(a, b)


def build_detector(cfg: dict) -> DetectorModel:
    return DetectorModel(cfg["detector.eta"], cfg["detector.resolving"])


def build_protocol(cfg: dict, noise) -> ProtocolConfig:
    return ProtocolConfig(
        signal=build_signal(cfg),
        noise=noise if noise is not None else DephasingParams(0.0, 0.0),
        detector=build_detector(cfg),
        variant=cfg["protocol.variant"],
        accept=cfg["protocol.accept"],
        convention=cfg["protocol.convention"],
        double_click=cfg["detector.double_click"],
        transmissivity=cfg["protocol.transmissivity"],
    )


def build_source(cfg: dict, signal: SignalState) -> SourceSpec:
    return SourceSpec(
        kind=cfg["source.kind"], signal=signal, nu=cfg["source.nu"], mu=cfg["source.mu"],
        cutoff=cfg["source.cutoff"], pair_prob=cfg["source.pair_prob"],
        trigger_p1=cfg["source.trigger_p1"], trigger_pmul=cfg["source.trigger_pmul"],
        n_ref=cfg["source.n_ref"], n_sig=cfg["source.n_sig"],
    )


# ---------------------------------------------------------------------------
# commands
#
# Each returns (result dict, per-trial rows or None, summary lines, exit code).


def _cmd_distribution(command: str, cfg: dict):
    kind = cfg["noise.kind"]
    expected = ("dephasing",) if command == "dephasing" else ("rotation", "haar-rotation", "product-su2")
    if kind not in expected:
        raise ConfigurationError(f"noise.kind: the {command} command needs one of {', '.join(expected)}")
    noise = build_noise(cfg)
    pcfg = build_protocol(cfg, noise)
    if isinstance(noise, NoiseSampler):
        rep = run_monte_carlo(pcfg, cfg["run.trials"], workers=cfg["run.workers"],
                              keep_trials=cfg["output.per_trial"])
        result = rep.as_dict(include_trials=cfg["output.per_trial"])
        rows = rep.per_trial
        fid = "undefined" if rep.mean_fidelity is None else f"{rep.mean_fidelity:.12f}"
        lines = [f"trials {rep.trials}  seed {rep.seed}  noise {rep.noise_kind}",
                 f"mean parity factor {rep.mean_parity_factor:.6f} +- {rep.stderr_parity_factor:.6f}",
                 f"mean success {rep.mean_success:.6f} +- {rep.stderr_success:.6f}",
                 f"mean fidelity {fid}"]
        return result, rows, lines, EXIT_OK
    if cfg["run.trials"] != 1:
        raise ConfigurationError("run.trials: fixed noise runs a single trial; sample noise to average")
    rep = run_distribution(pcfg, seed=cfg["run.seed"])
    result = rep.as_dict()
    row = {"trial": 0, **reports.flatten(reports._clean(result))}
    fid = "undefined" if rep.fidelity is None else f"{rep.fidelity:.12f}"
    lines = [f"success probability {rep.success_probability:.12f}",
             f"parity factor {rep.parity_factor:.12f}",
             f"fidelity {fid}"]
    return result, [row], lines, EXIT_OK


def _cmd_bb84(cfg: dict):
    noise = build_noise(cfg)
    keep = bool(cfg["output.per_trial"] or cfg["output.log"])
    rep = run_bb84_session(cfg["bb84.rounds"], noise=noise, detector=build_detector(cfg), seed=cfg["run.seed"],
                           accept=cfg["protocol.accept"], convention=cfg["protocol.convention"], keep_log=keep)
    if cfg["output.log"]:
        try:
            rep.write_log(cfg["output.log"])
        except OSError as exc:
            raise reports.ReportError(f"cannot write log to {cfg['output.log']}: {exc.strerror or exc}") from exc
    result = rep.as_dict()
    rows = [r.as_row() for r in rep.log] if keep else None
    if cfg["output.per_trial"] and cfg["output.format"] == "json":
        result["log"] = rows
    qber = "undefined" if rep.qber is None else f"{rep.qber:.6f}"
    lines = [f"rounds {rep.rounds}  accepted {rep.accepted}  sifted {rep.sifted}  errors {rep.errors}",
             f"QBER {qber}  acceptance rate {rep.acceptance_rate:.6f}"]
    return result, rows, lines, EXIT_OK


def _cmd_stats(cfg: dict):
    src, n, hi, thr = cfg["stats.source"], cfg["stats.grid"], cfg["stats.max"], cfg["stats.threshold"]
    try:
        if src == "coherent":
            res = st.coherent_grid(n, 0.0, hi, thr) if n else [st.coherent_stats(cfg["source.nu"], cfg["source.mu"], thr)]
        elif src == "pdc":
            if n and hi > st.PDC_MAX_PAIR_PROB:
                hi = st.PDC_MAX_PAIR_PROB
            res = st.pdc_grid(n, hi, thr) if n else [st.pdc_stats(cfg["source.pair_prob"], thr)]
        else:
            p1, q = cfg["source.trigger_p1"], cfg["source.trigger_pmul"]
            res = (st.triggered_grid(p1, q, n, hi, thr) if n
                   else [st.triggered_plus_coherent_stats(p1, q, cfg["source.mu"], thr)])
    except ValidationError as exc:
        raise ValidationError(f"{_stats_key(src)}: {exc}") from None
    rows = [r.as_dict() for r in res]
    met = sum(r.condition_met for r in res)
    result = {"source": src, "points": len(rows), "threshold": thr, "condition_met_count": met, "rows": rows}
    if n == 0:
        r = res[0]
        ratio = "undefined" if r.ratio is None else f"{r.ratio:.6g}"
        lines = [f"p11 {r.p11:.6e}  pmul {r.pmul:.6e}  ratio {ratio}  condition met: {r.condition_met}"]
    else:
        lines = [f"{len(rows)} {src} points, condition p11 >= {thr:g} pmul met at {met}"]
    return result, rows, lines, EXIT_OK


def _stats_key(src):
    return {"coherent": "source.nu/source.mu", "pdc": "source.pair_prob",
            "triggered": "source.trigger_p1/source.trigger_pmul"}[src]


def _cmd_multiphoton(cfg: dict):
    if cfg["noise.kind"] not in ("dephasing", "rotation") or cfg["noise.sampled"]:
        raise ConfigurationError("noise.kind: multiphoton needs fixed dephasing or rotation parameters")
    noise = build_noise(cfg)
    pcfg = build_protocol(cfg, noise)
    source = build_source(cfg, pcfg.signal)
    rep = run_multiphoton_error(source, pcfg, cfg["multiphoton.cutoff"])
    result = rep.as_dict()
    rate = "undefined" if rep.conditional_error_rate is None else f"{rep.conditional_error_rate:.6e}"
    lines = [f"accepted {rep.accepted_probability:.6e}  false accepts {rep.false_accept_probability:.6e}",
             f"conditional error rate {rate}"]
    return result, [reports.flatten(reports._clean(result))], lines, EXIT_OK


def _cmd_verify(cfg: dict, echo):
    from .verify import CRITERIA, run_all

    only = None
    if cfg["verify.only"]:
        try:
            only = {int(x) for x in cfg["verify.only"].split(",") if x.strip()}
        except ValueError:
            raise ConfigurationError(f"verify.only: expected comma-separated integers, got {cfg['verify.only']!r}") from None
        bad = only - set(CRITERIA)
        if bad:
            raise ConfigurationError(f"verify.only: no criterion {sorted(bad)}; choose from {sorted(CRITERIA)}")
    results = run_all(only, echo=echo)
    passed = all(r.passed for r in results)
    rows = [r.as_dict() for r in results]
    result = {"passed": passed, "criteria": rows}
    lines = [f"{sum(r.passed for r in results)}/{len(results)} criteria passed"]
    return result, rows, lines, EXIT_OK if passed else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# argument parsing

# flags that fill a config key; (flag, key, kwargs)
_COMMON = [
    ("--seed", "run.seed", {"help": "master seed"}),
    ("--out", "output.path", {"metavar": "PATH", "help": "report path (default DIR/<command>.<format>)"}),
    ("--output-dir", "output.dir", {"metavar": "DIR", "help": f"report directory (default ${OUTPUT_DIR_ENV} or .)"}),
    ("--format", "output.format", {"choices": FORMATS}),
    ("--per-trial", "output.per_trial", {"action": "store_const", "const": "true",
                                         "help": "one row per trial instead of one aggregate row"}),
]
_DETECTION = [
    ("--eta", "detector.eta", {"help": "detector efficiency"}),
    ("--resolving", "detector.resolving", {"choices": RESOLVING}),
    ("--double-click", "detector.double_click", {"choices": POLICIES}),
    ("--accept", "protocol.accept", {"choices": ACCEPT_MODES}),
    ("--convention", "protocol.convention", {"choices": CONVENTIONS, "help": "beamsplitter phase convention"}),
]
_RUN = [
    ("--alpha", "source.alpha", {"help": "H amplitude, e.g. 0.6 or 0.6+0.8j"}),
    ("--beta", "source.beta", {"help": "V amplitude"}),
    ("--variant", "protocol.variant", {"choices": VARIANTS}),
    ("--transmissivity", "protocol.transmissivity", {}),
    ("--trials", "run.trials", {}),
    ("--workers", "run.workers", {"help": "worker processes for sampled noise"}),
]
_FLAGS = {
    "dephasing": _COMMON + _DETECTION + _RUN + [
        ("--phi-h", "noise.phi_h", {}),
        ("--phi-v", "noise.phi_v", {}),
        ("--random", "noise.sampled", {"action": "store_const", "const": "true",
                                       "help": "draw uniform phases per trial"}),
    ],
    "rotation": _COMMON + _DETECTION + _RUN + [
        ("--haar", "noise.kind", {"action": "store_const", "const": "haar-rotation",
                                  "help": "Haar-random SU(2) per channel and trial"}),
        ("--product-su2", "noise.kind", {"action": "store_const", "const": "product-su2",
                                         "help": "uniform Euler angles per channel and trial"}),
        ("--jitter", "noise.jitter", {"help": "late-bin perturbation std dev (rad)"}),
        ("--delta1", "noise.delta1", {"help": "complex delta1 of a fixed rotation"}),
        ("--gamma1", "noise.gamma1", {}),
        ("--delta2", "noise.delta2", {}),
        ("--gamma2", "noise.gamma2", {}),
    ],
    "bb84": _COMMON + _DETECTION + [
        ("--rounds", "bb84.rounds", {}),
        ("--noise", "noise.kind", {"choices": NOISE_KINDS}),
        ("--jitter", "noise.jitter", {}),
        ("--log", "output.log", {"metavar": "CSV", "help": "write the per-round log here"}),
    ],
    "stats": _COMMON[1:] + [
        ("--source", "stats.source", {"choices": STATS_SOURCES}),
        ("--nu", "source.nu", {}),
        ("--mu", "source.mu", {}),
        ("--pair-prob", "source.pair_prob", {}),
        ("--trigger-p1", "source.trigger_p1", {}),
        ("--trigger-pmul", "source.trigger_pmul", {}),
        ("--grid", "stats.grid", {"help": "points per axis (0: single point)"}),
        ("--max", "stats.max", {"help": "upper end of the grid axis"}),
        ("--threshold", "stats.threshold", {}),
    ],
    "multiphoton": _COMMON + _DETECTION + _RUN[:4] + [
        ("--source", "source.kind", {"choices": SOURCE_KINDS}),
        ("--nu", "source.nu", {}),
        ("--mu", "source.mu", {}),
        ("--cutoff", "source.cutoff", {"help": "per-pulse photon-number cutoff"}),
        ("--n-ref", "source.n_ref", {}),
        ("--n-sig", "source.n_sig", {}),
        ("--pair-prob", "source.pair_prob", {}),
        ("--registry-cutoff", "multiphoton.cutoff", {}),
        ("--phi-h", "noise.phi_h", {}),
        ("--phi-v", "noise.phi_v", {}),
    ],
    "verify": _COMMON[1:] + [
        ("--only", "verify.only", {"metavar": "N[,N...]", "help": "run only these criteria"}),
    ],
}
_COMPLEX_FLAGS = ("noise.delta1", "noise.gamma1", "noise.delta2", "noise.gamma2")

_HELP = {
    "dephasing": "fixed or sampled collective dephasing",
    "rotation": "fixed or sampled collective rotation",
    "bb84": "BB84 session over the noisy link",
    "stats": "photon-number statistics of candidate sources",
    "verify": "run the acceptance checks",
    "multiphoton": "false accepts caused by multi-photon pulses",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qubitdist",
        description="Simulate single-photon qubit distribution over collective-noise channels.",
        epilog="exit codes: 0 ok, 2 usage or config error, 3 invalid parameters or failed verify, 4 I/O or internal")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HELP[name], description=_HELP[name])
        p.add_argument("--config", metavar="FILE", help="key=value file, or a JSON report to re-run")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("-q", "--quiet", action="store_true", help="print only errors")
        for flag, key, kw in _FLAGS[name]:
            if "action" not in kw and "choices" not in kw:
                kw = {"metavar": key.split(".")[-1].upper(), **kw}
            p.add_argument(flag, dest=key, default=argparse.SUPPRESS, **kw)
    return parser


def _flag_overrides(ns: argparse.Namespace) -> dict:
    out = {}
    for key, value in vars(ns).items():
        if "." not in key:
            continue
        if key in _COMPLEX_FLAGS:
            try:
                z = _complex(value)
            except ValueError:
                raise ConfigurationError(f"{key}: cannot parse {value!r} as a complex number") from None
            out[f"{key}_re"], out[f"{key}_im"] = z.real, z.imag
        else:
            out[key] = value
    return out


def _report_path(cfg: dict, command: str) -> Path:
    if cfg.get("output.path"):
        return Path(cfg["output.path"])
    return Path(cfg["output.dir"]) / f"{command}.{cfg['output.format']}"


def emit_report(command: str, config: dict, result: dict, rows, path, fmt: str, per_trial: bool) -> Path:
    """Write the JSON envelope, or CSV: one aggregate row, or ``rows`` in per-trial mode."""
    if fmt == "json":
        return reports.write_json(reports.build_report(command, config, result), path)
    if command == "stats":
        return reports.write_csv(rows, path, st.COLUMNS[result["source"]])
    if command == "verify":
        return reports.write_csv(rows, path, ("criterion", "name", "passed", "seconds", "detail"))
    if per_trial:
        cols = ROUND_COLUMNS if command == "bb84" else None
        return reports.write_csv([reports.flatten(reports._clean(r)) for r in rows], path, cols)
    return reports.write_csv([reports.aggregate_row(config, result)], path)


def run_command(command: str, cfg: dict, out=print) -> int:
    """Run one resolved configuration and write its report; returns the exit code."""
    if command in ("dephasing", "rotation"):
        result, rows, lines, code = _cmd_distribution(command, cfg)
    elif command == "bb84":
        result, rows, lines, code = _cmd_bb84(cfg)
    elif command == "stats":
        result, rows, lines, code = _cmd_stats(cfg)
    elif command == "multiphoton":
        result, rows, lines, code = _cmd_multiphoton(cfg)
    else:
        result, rows, lines, code = _cmd_verify(cfg, out)
    echo = echo_config(command, cfg)
    path = emit_report(command, echo, result, rows, _report_path(cfg, command),
                       cfg["output.format"], cfg["output.per_trial"])
    for line in lines:
        out(line)
    out(f"report: {path}")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version or a usage error
        return int(exc.code or 0)
    out = (lambda *_: None) if ns.quiet else print
    try:
        layers = []
        if ns.config:
            layers.append(read_config_file(ns.config))
        layers.append(_parse_pairs(ns.overrides))
        layers.append(_flag_overrides(ns))
        cfg = resolve_config(ns.command, *layers)
        return run_command(ns.command, cfg, out)
    except ConfigurationError as exc:
        print(f"qubitdist {ns.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"qubitdist {ns.command}: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except reports.ReportError as exc:
        print(f"qubitdist {ns.command}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:  # pragma: no cover - reported, not swallowed
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
