"""Lyapunov exponents of the random transfer cocycle.

The top exponent at energy E is estimated by averaging (1/n) log || M_n ||
over independent disorder replicas, where M_n is the ordered product of n
one-cell transfer matrices.  Values are reported per step (per vertex); divide
by the mean cell length for the per-unit-length normalization.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import model as _model
from . import sl2
from .errors import DomainError, PrecisionError, UnsupportedModelError

DEFAULT_STEPS = 10**5
DEFAULT_REPLICAS = 32
DEFAULT_THRESHOLD = 0.01

_MIN_STEPS = 10**3


@dataclass(frozen=True)
class LyapunovEstimate:
    """Monte Carlo estimate of the top Lyapunov exponent at one energy."""

    energy: float
    value: float     # per step, clamped at 0
    stderr: float
    steps: int
    replicas: int


@dataclass(frozen=True, eq=False)
class LyapunovCurve:
    """Estimates over an energy grid, plus the measure's mean cell length."""

    energies: np.ndarray
    estimates: tuple
    mean_length: float

    def continuum_values(self) -> np.ndarray:
        """Per-unit-length exponents: estimate / mean cell length."""
        return np.array([e.value for e in self.estimates]) / self.mean_length


def _transfer_stack(measure: _model.DisorderMeasure, E: float) -> np.ndarray:
    """One transfer matrix per atom of the measure, stacked (k, 2, 2)."""
    if measure.has_separating:
        raise UnsupportedModelError(
            "transfer cocycle undefined through separating vertices")
    mats = np.stack([
        sl2.transfer(E, a.ell, _model.coupling_matrix(a.condition))
        for a in measure.atoms
    ])
    if not np.all(np.isfinite(mats)):
        raise DomainError(
            "transfer matrices overflow at E=%r (hyperbolic factor too large "
            "for float64)" % E)
    return np.ascontiguousarray(mats)


def lyapunov_mc(measure: _model.DisorderMeasure, E: float, n: int = DEFAULT_STEPS,
                replicas: int = DEFAULT_REPLICAS, seed: int = 0) -> LyapunovEstimate:
    """Replica-averaged finite-n Lyapunov exponent at energy E.

    Each replica r draws its own index stream from derive_seed(seed, 1, r).
    The reported stderr is the replica standard error floored at ln(n)/n, the
    resolution limit of the finite-n estimator (sample spread is exactly zero
    for single-atom measures).
    """
    n = int(n)
    replicas = int(replicas)
    if n < _MIN_STEPS:
        raise DomainError(f"need at least {_MIN_STEPS} steps, got {n}")
    if replicas < 1:
        raise DomainError(f"need at least one replica, got {replicas}")
    mats = _transfer_stack(measure, E)
    vals = np.empty(replicas)
    for r in range(replicas):
        rseed = _model.derive_seed(seed, 1, r)
        idx = _model.sample_atom_indices(measure, rseed, 0, n)
        lognorm, _, _ = sl2._product_kernel(mats, idx)
        vals[r] = lognorm / n
    value = max(float(np.mean(vals)), 0.0)
    floor = math.log(n) / n
    if replicas >= 2:
        spread = float(np.std(vals, ddof=1)) / math.sqrt(replicas)
        stderr = max(spread, floor)
    else:
        stderr = math.inf
    return LyapunovEstimate(energy=float(E), value=value, stderr=stderr,
                            steps=n, replicas=replicas)


def lyapunov_periodic(ell: float, B, E: float) -> float:
    """Exponent of the single-atom (periodic) model, from the one-step spectrum.

    Exactly 0 when |trace| <= 2, else log of the spectral radius.
    """
    m = sl2.transfer(E, ell, B)
    tr = abs(float(m[0, 0] + m[1, 1]))
    if tr <= 2.0:
        return 0.0
    return math.log(0.5 * (tr + math.sqrt(tr * tr - 4.0)))


def lyapunov_curve(measure: _model.DisorderMeasure, energies, n: int = DEFAULT_STEPS,
                   replicas: int = DEFAULT_REPLICAS, seed: int = 0,
                   workers: int = 1) -> LyapunovCurve:
    """lyapunov_mc over an energy grid with independent per-energy seeds.

    Seeds are derived from the grid index, so results do not depend on the
    worker count or scheduling order.
    """
    grid = np.asarray(energies, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("energy grid must be a nonempty 1-D array")

    def job(i):
        eseed = _model.derive_seed(seed, 7, i)
        return lyapunov_mc(measure, float(grid[i]), n=n, replicas=replicas, seed=eseed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ests = tuple(pool.map(job, range(grid.size)))
    else:
        ests = tuple(job(i) for i in range(grid.size))
    return LyapunovCurve(energies=grid, estimates=ests,
                         mean_length=_model.mean_length(measure))


def exceptional_scan(curve: LyapunovCurve, threshold: float = DEFAULT_THRESHOLD) -> list:
    """Maximal grid runs where the estimate dips below threshold.

    Demands stderr < threshold/3 at every grid point first; anything less
    precise cannot certify a dip.  Returns [(E_first, E_last), ...].
    """
    for est in curve.estimates:
        if not est.stderr < threshold / 3.0:
            raise PrecisionError(
                f"stderr {est.stderr:g} at E={est.energy:g} exceeds {threshold / 3.0:g}")
    flagged = [est.value < threshold for est in curve.estimates]
    out = []
    start = None
    for i, f in enumerate(flagged):
        if f and start is None:
            start = i
        if not f and start is not None:
            out.append((float(curve.energies[start]), float(curve.energies[i - 1])))
            start = None
    if start is not None:
        out.append((float(curve.energies[start]), float(curve.energies[-1])))
    return out
