"""Sparse multimode Fock states and linear-optical mode transforms.

A state is stored as ``{key: amplitude}`` where ``key`` is a sorted tuple of
mode indices with one entry per photon, so ``(3, 3, 7)`` is two photons in
mode 3 and one in mode 7. That multiset form is canonical: zero-occupation
modes never appear.

Transforms substitute creation operators column-wise,
``a_j^dagger -> sum_k U[k, j] a_k^dagger``, so a single photon with amplitude
vector ``v`` over ``t.modes`` ends up in ``U @ v``.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError
from .kernels import mult_factor, substitute

log = logging.getLogger(__name__)

POLARIZATIONS = ("H", "V")
PRUNE = 1e-14
UNITARY_TOL = 1e-12
DEFAULT_CUTOFF = 4
DEFAULT_TIMEBINS = (0, 3)


@dataclass(frozen=True, order=True)
class ModeLabel:
    """One optical mode: spatial path, polarization and time bin."""

    path: str
    pol: str
    timebin: int = 0

    def __post_init__(self):
        if self.pol not in POLARIZATIONS:
            raise ValidationError(f"polarization must be H or V, got {self.pol!r}")

    def __str__(self):
        return f"{self.path}:{self.pol}@{self.timebin}"

    def moved(self, path=None, pol=None, timebin=None) -> "ModeLabel":
        return ModeLabel(
            self.path if path is None else path,
            self.pol if pol is None else pol,
            self.timebin if timebin is None else timebin,
        )


class ModeRegistry:
    """Indexed set of modes built from spatial paths x {H, V} x time bins.

    Parameters
    ----------
    paths : iterable of str
        Spatial port identifiers.
    timebins : (int, int)
        Inclusive time-bin range, default ``(0, 3)``.
    cutoff : int
        Maximum total photon number any state on this registry may hold.
    """

    def __init__(self, paths: Iterable[str], timebins=DEFAULT_TIMEBINS, cutoff=DEFAULT_CUTOFF):
        lo, hi = timebins
        if lo > hi:
            raise ValidationError("empty time-bin range")
        if cutoff < 0:
            raise ValidationError("cutoff must be non-negative")
        self.paths = tuple(dict.fromkeys(paths))
        self.timebins = (int(lo), int(hi))
        self.cutoff = int(cutoff)
        self.modes: tuple[ModeLabel, ...] = tuple(
            ModeLabel(p, pol, t)
            for p in self.paths
            for t in range(lo, hi + 1)
            for pol in POLARIZATIONS
        )
        self._index = {m: i for i, m in enumerate(self.modes)}
        self._hash = hash((self.modes, self.cutoff))

    def __len__(self):
        return len(self.modes)

    def __contains__(self, label):
        return label in self._index

    def __eq__(self, other):
        if not isinstance(other, ModeRegistry):
            return NotImplemented
        return (self.modes, self.cutoff) == (other.modes, other.cutoff)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"ModeRegistry(paths={list(self.paths)}, timebins={self.timebins}, cutoff={self.cutoff})"

    def index(self, label: ModeLabel) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ConfigurationError(f"mode {label} is not registered") from None

    def mode(self, path: str, pol: str, timebin: int = 0) -> ModeLabel:
        label = ModeLabel(path, pol, timebin)
        self.index(label)
        return label

    def path_modes(self, path: str) -> list[ModeLabel]:
        if path not in self.paths:
            raise ConfigurationError(f"path {path!r} is not registered")
        return [m for m in self.modes if m.path == path]

    def with_cutoff(self, cutoff: int) -> "ModeRegistry":
        return ModeRegistry(self.paths, self.timebins, cutoff)


class FockState:
    """Immutable sparse superposition of occupation vectors.

    Build states with :meth:`from_photons`, :meth:`from_counts` or
    :meth:`vacuum` rather than the raw constructor.
    """

    __slots__ = ("registry", "_terms", "empty")

    def __init__(self, registry: ModeRegistry, terms: Mapping[tuple, complex], *, empty=False, _check=True):
        self.registry = registry
        if _check:
            n = len(registry)
            clean = {}
            for key, amp in terms.items():
                key = tuple(sorted(int(k) for k in key))
                if key and (key[0] < 0 or key[-1] >= n):
                    raise ConfigurationError(f"occupation references unknown mode index in {key}")
                if len(key) > registry.cutoff:
                    raise ValidationError(
                        f"{len(key)} photons exceed the registry cutoff {registry.cutoff}"
                    )
                clean[key] = clean.get(key, 0j) + complex(amp)
            terms = clean
        self._terms = terms
        self.empty = empty

    # construction -------------------------------------------------------
    @classmethod
    def vacuum(cls, registry: ModeRegistry) -> "FockState":
        return cls(registry, {(): 1.0 + 0j}, _check=False)

    @classmethod
    def from_counts(cls, registry: ModeRegistry, counts: Mapping[ModeLabel, int], amplitude=1.0):
        """Single occupation vector ``{mode: count}``."""
        key = []
        for label, n in counts.items():
            if n < 0:
                raise ValidationError("photon counts must be non-negative")
            key.extend([registry.index(label)] * int(n))
        return cls(registry, {tuple(key): amplitude})

    @classmethod
    def from_photons(cls, registry: ModeRegistry, *labels: ModeLabel, amplitude=1.0):
        """One photon per listed label (repeat a label for bunched photons)."""
        return cls.from_counts(registry, Counter(labels), amplitude)

    # views ---------------------------------------------------------------
    @property
    def terms(self) -> dict:
        """Copy of the internal ``{key: amplitude}`` map."""
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def occupation(self, key) -> dict[ModeLabel, int]:
        """Translate an internal key into ``{ModeLabel: count}``."""
        modes = self.registry.modes
        return {modes[i]: n for i, n in Counter(key).items()}

    def occupations(self):
        """Yield ``(occupation_dict, amplitude)`` pairs."""
        for key, amp in self._terms.items():
            yield self.occupation(key), amp

    def amplitude(self, counts: Mapping[ModeLabel, int]) -> complex:
        key = []
        for label, n in counts.items():
            key.extend([self.registry.index(label)] * int(n))
        return self._terms.get(tuple(sorted(key)), 0j)

    def photon_numbers(self) -> set[int]:
        return {len(k) for k in self._terms}

    @property
    def norm_squared(self) -> float:
        return float(sum(abs(a) ** 2 for a in self._terms.values()))

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm_squared))

    def normalized(self) -> "FockState":
        nrm = self.norm
        if nrm == 0.0:
            raise ValidationError("cannot normalize a zero state")
        return FockState(self.registry, {k: a / nrm for k, a in self._terms.items()}, _check=False)

    def scaled(self, factor: complex) -> "FockState":
        return FockState(self.registry, {k: a * factor for k, a in self._terms.items()}, _check=False)

    def __add__(self, other: "FockState") -> "FockState":
        _same_registry(self, other)
        out = dict(self._terms)
        for k, a in other._terms.items():
            out[k] = out.get(k, 0j) + a
        return FockState(self.registry, {k: a for k, a in out.items() if abs(a) >= PRUNE}, _check=False)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def __mul__(self, factor):
        return self.scaled(factor)

    __rmul__ = __mul__

    def filter(self, keep: Callable[[tuple], bool]) -> "FockState":
        """Unnormalized restriction to the keys for which ``keep(key)`` holds."""
        return FockState(self.registry, {k: a for k, a in self._terms.items() if keep(k)}, _check=False)

    def tensor(self, other: "FockState") -> "FockState":
        """Product state; the two states are assumed to occupy disjoint modes."""
        _same_registry(self, other)
        out = {}
        for k1, a1 in self._terms.items():
            for k2, a2 in other._terms.items():
                k = tuple(sorted(k1 + k2))
                amp = a1 * a2 * mult_factor(k) / (mult_factor(k1) * mult_factor(k2))
                out[k] = out.get(k, 0j) + amp
        return FockState(self.registry, out)

    def allclose(self, other: "FockState", atol=1e-12) -> bool:
        _same_registry(self, other)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) <= atol for k in keys)

    def __repr__(self):
        parts = []
        for key, amp in sorted(self._terms.items()):
            occ = ", ".join(f"{m}:{n}" if n > 1 else str(m) for m, n in self.occupation(key).items())
            parts.append(f"({amp:.4g})|{occ or 'vac'}>")
        body = " + ".join(parts) if parts else "0"
        return f"FockState({body}{', empty' if self.empty else ''})"


def _same_registry(a: FockState, b: FockState):
    if a.registry is not b.registry and a.registry != b.registry:
        raise ValidationError("states live on different mode registries")


@dataclass(frozen=True, eq=False)
class ModeTransform:
    """Unitary over an ordered subset of modes, followed by an optional relabeling.

    ``relabel`` must be injective on the whole registry once unlisted modes
    are taken to map to themselves. ``guard`` lists modes that must be empty
    when the transform is applied (for instance photons a delay would push
    past the last registered time bin).
    """

    modes: tuple[ModeLabel, ...]
    matrix: np.ndarray
    relabel: Mapping[ModeLabel, ModeLabel] | None = None
    guard: frozenset = field(default_factory=frozenset)
    name: str = ""

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        if len(set(modes)) != len(modes):
            raise ValidationError("transform modes must be distinct")
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        if mat.shape != (len(modes), len(modes)):
            raise ValidationError(f"matrix shape {mat.shape} does not match {len(modes)} modes")
        if mat.size and np.max(np.abs(mat.conj().T @ mat - np.eye(len(modes)))) >= UNITARY_TOL:
            raise ValidationError(f"transform {self.name or ''} is not unitary")
        if self.relabel:
            targets = list(self.relabel.values())
            if len(set(targets)) != len(targets):
                raise ValidationError("relabel maps two modes onto one")
            moved_in = set(targets) - set(self.relabel)
            if moved_in:
                raise ValidationError(
                    "relabel targets must themselves be relabeled (use a permutation): "
                    + ", ".join(sorted(map(str, moved_in)))
                )

    def inverse(self) -> "ModeTransform":
        """Transform undoing this one.

        With ``T = R . U`` the inverse ``U^-1 . R^-1`` equals ``R^-1`` applied
        after ``U^dagger`` acting on the relabeled modes.
        """
        if not self.relabel:
            return ModeTransform(self.modes, self.matrix.conj().T, name=self.name + "^-1")
        rel = self.relabel
        modes = tuple(rel.get(m, m) for m in self.modes)
        inv = {b: a for a, b in rel.items()}
        return ModeTransform(modes, self.matrix.conj().T, inv, name=self.name + "^-1")

    def compiled(self, registry: ModeRegistry):
        """Column map and relabel array in index space, cached per registry."""
        cache = self.__dict__.setdefault("_compiled", {})
        hit = cache.get(id(registry))
        if hit is not None and hit[0] is registry:
            return hit[1]
        idx = [registry.index(m) for m in self.modes]
        mat = self.matrix
        columns = {}
        nz_rows, nz_cols = np.nonzero(mat)
        per_col = {}
        for k, j in zip(nz_rows.tolist(), nz_cols.tolist()):
            per_col.setdefault(j, []).append((idx[k], complex(mat[k, j])))
        for j, src in enumerate(idx):
            columns[src] = tuple(per_col.get(j, ()))
        relabel = None
        if self.relabel:
            relabel = list(range(len(registry)))
            for a, b in self.relabel.items():
                relabel[registry.index(a)] = registry.index(b)
        guard = frozenset(registry.index(m) for m in self.guard)
        compiled = (columns, relabel, guard)
        cache[id(registry)] = (registry, compiled)
        return compiled


def apply_transform(state: FockState, t: ModeTransform) -> FockState:
    """Apply a linear-optical transform to ``state``.

    Raises
    ------
    ConfigurationError
        If the transform references an unregistered mode, or a guarded mode
        is occupied.
    """
    reg = state.registry
    columns, relabel, guard = t.compiled(reg)
    if guard:
        for key in state._terms:
            if guard.intersection(key):
                raise ConfigurationError(
                    f"transform {t.name or ''} would move a photon outside the registered modes"
                )
    out = substitute(state._terms, columns, relabel, PRUNE)
    return FockState(reg, out, _check=False)


def apply_sequence(state: FockState, transforms: Sequence[ModeTransform]) -> FockState:
    for t in transforms:
        state = apply_transform(state, t)
    return state


def compose_columns(registry: ModeRegistry, transforms: Sequence[ModeTransform],
                    modes: Iterable[int], strict: bool = True) -> dict:
    """Single-photon images of ``modes`` (indices) under ``transforms`` applied in order.

    Returns ``{mode: ((out_mode, coefficient), ...)}``; because the optics is
    linear, substituting these columns once equals applying every transform.
    With ``strict=False`` modes whose photons would leave the registry are
    left out of the result instead of raising.
    """
    images = {m: {m: 1.0 + 0j} for m in modes}
    for t in transforms:
        columns, relabel, guard = t.compiled(registry)
        for m, img in list(images.items()):
            if guard and not guard.isdisjoint(img):
                if not strict:
                    del images[m]
                    continue
                raise ConfigurationError(
                    f"transform {t.name or ''} would move a photon outside the registered modes"
                )
            new = {}
            for k, c in img.items():
                col = columns.get(k)
                if col is None:
                    dst = k if relabel is None else relabel[k]
                    new[dst] = new.get(dst, 0j) + c
                else:
                    for k2, c2 in col:
                        dst = k2 if relabel is None else relabel[k2]
                        new[dst] = new.get(dst, 0j) + c * c2
            images[m] = {k: c for k, c in new.items() if abs(c) >= PRUNE}
    return {m: tuple(img.items()) for m, img in images.items()}


def apply_columns(state: FockState, columns: Mapping[int, tuple]) -> FockState:
    """Substitute precomposed columns (see :func:`compose_columns`)."""
    return FockState(state.registry, substitute(state._terms, columns, None, PRUNE), _check=False)


def occupied_modes(state: FockState) -> set[int]:
    return {i for key in state._terms for i in key}


def apply_circuit(state: FockState, transforms: Sequence[ModeTransform]) -> FockState:
    """Same result as :func:`apply_sequence`, with a single multi-photon expansion."""
    cols = compose_columns(state.registry, transforms, occupied_modes(state))
    return apply_columns(state, cols)


def inner_product(a: FockState, b: FockState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    _same_registry(a, b)
    small, large = (a._terms, b._terms) if len(a) <= len(b) else (b._terms, a._terms)
    total = 0j
    for k in small:
        if k in large:
            total += a._terms[k].conjugate() * b._terms[k]
    return total


def project(state: FockState, pattern: Callable[[dict], bool]) -> tuple[float, FockState]:
    """Post-select on occupation vectors matching ``pattern``.

    ``pattern`` receives ``{ModeLabel: count}``. Returns the matched squared
    norm and the renormalized matched state; a zero probability yields an
    empty state with ``empty=True`` instead of raising.
    """
    kept = {k: a for k, a in state._terms.items() if pattern(state.occupation(k))}
    return _finish_projection(state, kept)


def project_keys(state: FockState, keep: Callable[[tuple], bool]) -> tuple[float, FockState]:
    """:func:`project` with a predicate on raw index keys (no label decoding)."""
    kept = {k: a for k, a in state._terms.items() if keep(k)}
    return _finish_projection(state, kept)


def _finish_projection(state, kept):
    prob = float(sum(abs(a) ** 2 for a in kept.values()))
    total = state.norm_squared
    if total > 0 and abs(total - 1.0) > 1e-9:
        prob /= total
    if prob <= 0.0:
        return 0.0, FockState(state.registry, {}, empty=True, _check=False)
    nrm = np.sqrt(sum(abs(a) ** 2 for a in kept.values()))
    return prob, FockState(state.registry, {k: a / nrm for k, a in kept.items()}, _check=False)


def single_mode_transform(modes: Sequence[ModeLabel], matrix, name="") -> ModeTransform:
    return ModeTransform(tuple(modes), np.asarray(matrix, dtype=complex), name=name)


def dense_vector(state: FockState, basis: Sequence[tuple]) -> np.ndarray:
    """Amplitudes of ``state`` on an explicit list of keys."""
    return np.array([state._terms.get(k, 0j) for k in basis], dtype=complex)
