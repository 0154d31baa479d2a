"""Disorder models: vertex conditions, interaction measures, and realizations.

A model is a finitely supported probability measure on interaction atoms
(ell, condition): a cell length together with the self-adjoint vertex condition
imposed at the cell's right endpoint.  Conditions come in three flavors:

* ``Trivial(theta)``     -- pure gauge phase, coupling matrix is the identity;
* ``Connecting(theta, b)`` -- phase times a real SL(2,R) matrix acting on (u, u');
* ``Separating(x, y, w, z)`` -- Robin-type rows that decouple the two sides:
  x*u(t+) + y*u'(t+) = 0 and w*u(t-) + z*u'(t-) = 0.

Realizations draw i.i.d. atoms per integer index with a counter-based
generator, so draws depend only on (seed, index): enlarging or shifting the
window never reshuffles previously seen cells.
"""

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar, Sequence, Union

import numpy as np

from . import sl2
from .errors import DomainError, UnsupportedModelError

TWO_PI = 2.0 * math.pi
DUPLICATE_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12


def _wrap_phase(theta: float) -> float:
    if not math.isfinite(theta):
        raise DomainError(f"phase must be finite, got {theta!r}")
    return float(theta) % TWO_PI


@dataclass(frozen=True)
class Trivial:
    """Gauge-phase vertex: u and u' continuous up to the phase e^{i theta}."""

    theta: float = 0.0
    kind: ClassVar[str] = "trivial"

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap_phase(self.theta))

    @property
    def matrix(self) -> np.ndarray:
        return np.eye(2)


@dataclass(frozen=True)
class Connecting:
    """Vertex coupling e^{i theta} B with B real and unimodular (row-major tuple)."""

    theta: float
    b: tuple

    kind: ClassVar[str] = "connecting"

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap_phase(self.theta))
        m = sl2.as_mat2(np.asarray(self.b, dtype=float).reshape(2, 2))
        object.__setattr__(self, "b", tuple(float(v) for v in m.ravel()))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.b, dtype=float).reshape(2, 2)


@dataclass(frozen=True)
class Separating:
    """Decoupling vertex: x u(t+) + y u'(t+) = 0 and w u(t-) + z u'(t-) = 0."""

    x: float
    y: float
    w: float
    z: float

    kind: ClassVar[str] = "separating"

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.z)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("separating coefficients must be finite")
        if math.hypot(self.x, self.y) == 0.0 or math.hypot(self.w, self.z) == 0.0:
            raise DomainError("each separating row needs a nonzero coefficient pair")
        for name, v in zip("xywz", vals):
            object.__setattr__(self, name, float(v))

    @property
    def plus_row(self) -> tuple:
        """Row constraining the right limit (u, u')(t+)."""
        return (self.x, self.y)

    @property
    def minus_row(self) -> tuple:
        """Row constraining the left limit (u, u')(t-)."""
        return (self.w, self.z)


VertexCondition = Union[Trivial, Connecting, Separating]


def coupling_matrix(cond: VertexCondition) -> np.ndarray:
    """Real SL(2,R) part of a trivial/connecting vertex; separating have none."""
    if isinstance(cond, (Trivial, Connecting)):
        return cond.matrix
    raise UnsupportedModelError("separating vertex has no transfer coupling matrix")


@dataclass(frozen=True)
class SupportAtom:
    """One point of the disorder measure: cell length, condition, probability."""

    ell: float
    condition: VertexCondition
    weight: float

    def __post_init__(self):
        if not (math.isfinite(self.ell) and self.ell > 0.0):
            raise DomainError(f"cell length must be positive and finite, got {self.ell!r}")
        if not (math.isfinite(self.weight) and self.weight > 0.0):
            raise DomainError(f"atom weight must be positive and finite, got {self.weight!r}")
        if not isinstance(self.condition, (Trivial, Connecting, Separating)):
            raise DomainError(f"unknown vertex condition {self.condition!r}")
        object.__setattr__(self, "ell", float(self.ell))
        object.__setattr__(self, "weight", float(self.weight))


def _atom_key(atom: SupportAtom) -> tuple:
    c = atom.condition
    if isinstance(c, Separating):
        return ("s", atom.ell, c.x, c.y, c.w, c.z)
    # trivial is the identity-coupled connecting vertex
    b = (1.0, 0.0, 0.0, 1.0) if isinstance(c, Trivial) else c.b
    return ("c", atom.ell, c.theta) + b


def _keys_collide(k1: tuple, k2: tuple) -> bool:
    if k1[0] != k2[0]:
        return False
    for i, (a, b) in enumerate(zip(k1[1:], k2[1:])):
        d = abs(a - b)
        if k1[0] == "c" and i == 1:  # phase distance is circular
            d = min(d, TWO_PI - d)
        if d > DUPLICATE_TOL:
            return False
    return True


@dataclass(frozen=True)
class DisorderMeasure:
    """Finitely supported probability measure on interaction atoms."""

    atoms: tuple
    name: str = ""

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise DomainError("measure needs at least one atom")
        total = math.fsum(a.weight for a in atoms)
        if not (math.isfinite(total) and total > 0.0):
            raise DomainError(f"total weight must be positive, got {total!r}")
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            atoms = tuple(
                SupportAtom(a.ell, a.condition, a.weight / total) for a in atoms
            )
        keys = [_atom_key(a) for a in atoms]
        for i in range(len(keys)):
            for j in range(i + 1, len(keys)):
                if _keys_collide(keys[i], keys[j]):
                    raise DomainError(f"atoms {i} and {j} coincide within {DUPLICATE_TOL:g}")
        object.__setattr__(self, "atoms", atoms)

    @cached_property
    def ells(self) -> np.ndarray:
        return np.array([a.ell for a in self.atoms])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.atoms])

    @cached_property
    def _cum_weights(self) -> np.ndarray:
        return np.cumsum(self.weights)

    @property
    def ell_min(self) -> float:
        return float(np.min(self.ells))

    @property
    def ell_max(self) -> float:
        return float(np.max(self.ells))

    @property
    def has_separating(self) -> bool:
        return any(isinstance(a.condition, Separating) for a in self.atoms)


def mean_length(measure: DisorderMeasure) -> float:
    """Weighted mean cell length of the measure."""
    return float(np.dot(measure.weights, measure.ells))


# --------------------------------------------------------------------------
# counter-based sampling
# --------------------------------------------------------------------------

_PHI64 = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on uint64 data (vectorized, wraparound arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _to_u64(x) -> np.ndarray:
    return np.asarray(x).astype(np.int64).view(np.uint64)


def index_uniform(seed: int, indices) -> np.ndarray:
    """Uniform [0,1) draw for each integer index, keyed only by (seed, index)."""
    with np.errstate(over="ignore"):
        smix = _mix64(_to_u64(np.array([seed])) + _PHI64)[0]
        h = _mix64(_to_u64(indices) * _PHI64 ^ smix)
    return (h >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic child seed from a parent seed and integer tags."""
    with np.errstate(over="ignore"):
        s = _mix64(_to_u64(np.array([seed])) + _PHI64)
        for t in tags:
            s = _mix64(s ^ _mix64(_to_u64(np.array([t])) * _PHI64 + _PHI64))
    return int(s[0])


@dataclass(frozen=True, eq=False)
class Realization:
    """Draws of a measure over an integer index window, with vertex positions.

    Index j owns the cell (t_{j-1}, t_j) of length ell_j and the vertex
    condition at t_j.  Positions are anchored at t_0 = 0 and accumulate by
    iterated summation, so t_j - t_{j-1} reproduces ell_j exactly as floats.
    """

    measure: DisorderMeasure
    seed: int
    jmin: int
    jmax: int
    atom_indices: np.ndarray = field(repr=False)
    ells: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)  # t_j for j in [jmin-1, jmax]

    def ell(self, j: int) -> float:
        return float(self.ells[j - self.jmin])

    def atom_index(self, j: int) -> int:
        return int(self.atom_indices[j - self.jmin])

    def condition(self, j: int) -> VertexCondition:
        return self.measure.atoms[self.atom_index(j)].condition

    def t(self, j: int) -> float:
        """Vertex position t_j, defined for jmin-1 <= j <= jmax."""
        return float(self.positions[j - (self.jmin - 1)])

    @property
    def window(self) -> tuple:
        return (self.jmin, self.jmax)


def _draw_atom_indices(measure: DisorderMeasure, seed: int, indices: np.ndarray) -> np.ndarray:
    u = index_uniform(seed, indices)
    idx = np.searchsorted(measure._cum_weights, u, side="right")
    return np.minimum(idx, len(measure.atoms) - 1).astype(np.int64)


def sample_atom_indices(measure: DisorderMeasure, seed: int, start: int, stop: int) -> np.ndarray:
    """Atom index drawn at each j in range(start, stop); no positions attached."""
    return _draw_atom_indices(measure, seed, np.arange(start, stop, dtype=np.int64))


def sample_realization(measure: DisorderMeasure, seed: int, jmin: int, jmax: int) -> Realization:
    """Materialize the draws over the inclusive window [jmin, jmax].

    Cost grows with max(|jmin|, |jmax|) because positions are anchored at
    t_0 = 0 regardless of where the window sits.
    """
    if jmax < jmin:
        raise DomainError(f"empty window [{jmin}, {jmax}]")
    window = np.arange(jmin, jmax + 1, dtype=np.int64)
    atom_idx = _draw_atom_indices(measure, seed, window)
    ells = measure.ells[atom_idx]

    # positions need every cell between the anchor t_0 and the window
    lo = min(jmin, 1)
    hi = max(jmax, 0)
    full = np.arange(lo, hi + 1, dtype=np.int64)
    full_ells = measure.ells[_draw_atom_indices(measure, seed, full)]
    pos = np.empty(hi - lo + 2)  # t_j for j in [lo-1, hi]
    k0 = 0 - (lo - 1)
    pos[k0] = 0.0
    for k in range(k0 + 1, pos.size):
        pos[k] = pos[k - 1] + full_ells[k - 1]
    for k in range(k0 - 1, -1, -1):
        pos[k] = pos[k + 1] - full_ells[k]
    first = (jmin - 1) - (lo - 1)
    positions = pos[first: first + (jmax - jmin + 2)].copy()

    return Realization(measure=measure, seed=int(seed), jmin=int(jmin), jmax=int(jmax),
                       atom_indices=atom_idx, ells=ells, positions=positions)


# --------------------------------------------------------------------------
# standard presets
# --------------------------------------------------------------------------

def _weights_for(n: int, weights) -> list:
    if weights is None:
        return [1.0 / n] * n
    if len(weights) != n:
        raise DomainError(f"expected {n} weights, got {len(weights)}")
    return [float(w) for w in weights]


def preset_delta(alphas: Sequence[float], weights=None, ell: float = 1.0,
                 name: str = "delta") -> DisorderMeasure:
    """Delta couplings of strengths alpha: u continuous, u' jumps by alpha*u."""
    ws = _weights_for(len(alphas), weights)
    atoms = tuple(
        SupportAtom(ell, Connecting(0.0, (1.0, 0.0, float(a), 1.0)), w)
        for a, w in zip(alphas, ws)
    )
    return DisorderMeasure(atoms, name=name)


def preset_delta_prime(alphas: Sequence[float], weights=None, ell: float = 1.0,
                       name: str = "delta-prime") -> DisorderMeasure:
    """Delta-prime couplings: u' continuous, u jumps by -alpha*u'."""
    ws = _weights_for(len(alphas), weights)
    atoms = tuple(
        SupportAtom(ell, Connecting(0.0, (1.0, -float(a), 0.0, 1.0)), w)
        for a, w in zip(alphas, ws)
    )
    return DisorderMeasure(atoms, name=name)


def preset_gauge(alphas: Sequence[float], weights=None, ell: float = 1.0,
                 name: str = "gauge") -> DisorderMeasure:
    """Pure gauge-phase vertices with theta(alpha) = arg((2+i alpha)/(2-i alpha))."""
    ws = _weights_for(len(alphas), weights)
    atoms = tuple(
        SupportAtom(ell, Trivial(2.0 * math.atan2(0.5 * float(a), 1.0)), w)
        for a, w in zip(alphas, ws)
    )
    return DisorderMeasure(atoms, name=name)


def preset_radial_tree(pairs: Sequence[tuple], weights=None, ell: float = 1.0,
                       name: str = "radial-tree") -> DisorderMeasure:
    """Radial-tree vertices (alpha, beta): beta is the integer branching number."""
    ws = _weights_for(len(pairs), weights)
    atoms = []
    for (alpha, beta), w in zip(pairs, ws):
        if not (isinstance(beta, (int, np.integer)) or float(beta).is_integer()):
            raise DomainError(f"branching number must be an integer, got {beta!r}")
        if beta < 1:
            raise DomainError(f"branching number must be >= 1, got {beta!r}")
        rb = math.sqrt(float(beta))
        atoms.append(SupportAtom(
            ell, Connecting(0.0, (rb, 0.0, float(alpha) / rb, 1.0 / rb)), w))
    return DisorderMeasure(tuple(atoms), name=name)


# --------------------------------------------------------------------------
# model files
# --------------------------------------------------------------------------

def model_to_dict(measure: DisorderMeasure) -> dict:
    out = []
    for a in measure.atoms:
        c = a.condition
        if isinstance(c, Trivial):
            params = {"theta": c.theta}
        elif isinstance(c, Connecting):
            params = {"theta": c.theta, "b": [list(c.b[:2]), list(c.b[2:])]}
        else:
            params = {"x": c.x, "y": c.y, "w": c.w, "z": c.z}
        out.append({"ell": a.ell, "kind": c.kind, "params": params, "weight": a.weight})
    return {"name": measure.name, "atoms": out}


def model_from_dict(data: dict) -> DisorderMeasure:
    try:
        raw_atoms = data["atoms"]
    except (KeyError, TypeError):
        raise DomainError("model dict needs an 'atoms' list")
    if not isinstance(raw_atoms, list) or not raw_atoms:
        raise DomainError("'atoms' must be a nonempty list")
    atoms = []
    for i, entry in enumerate(raw_atoms):
        try:
            ell = float(entry["ell"])
            kind = entry["kind"]
            params = entry["params"]
            weight = float(entry["weight"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"atom {i}: missing or malformed field ({exc})")
        try:
            if kind == "trivial":
                cond = Trivial(float(params["theta"]))
            elif kind == "connecting":
                b = np.asarray(params["b"], dtype=float).reshape(2, 2)
                cond = Connecting(float(params.get("theta", 0.0)), tuple(b.ravel()))
            elif kind == "separating":
                cond = Separating(float(params["x"]), float(params["y"]),
                                  float(params["w"]), float(params["z"]))
            else:
                raise DomainError(f"atom {i}: unknown kind {kind!r}")
            atoms.append(SupportAtom(ell, cond, weight))
        except (KeyError, TypeError) as exc:
            raise DomainError(f"atom {i}: bad params for kind {kind!r} ({exc})")
    return DisorderMeasure(tuple(atoms), name=str(data.get("name", "")))


def save_model(measure: DisorderMeasure, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(measure), fh, indent=2)
        fh.write("\n")


def load_model(path) -> DisorderMeasure:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
