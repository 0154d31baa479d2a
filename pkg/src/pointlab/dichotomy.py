"""Spectral-type classification of disorder measures.

A measure of point interactions either localizes (pure point spectrum with
exponentially decaying eigenfunctions almost surely) or is gauge-equivalent to
a free or periodic operator with purely absolutely continuous spectrum.  The
decision is structural: it only inspects the support atoms, never the energy.

Localization witnesses, in the order they are checked:

* bullet 3 -- some atom is separating (the line decouples into compact pieces);
* bullet 2 -- two atoms carry couplings that differ beyond an overall sign;
* bullet 1 -- two distinct cell lengths occur and some coupling is not +/-I.

Anything else is absolutely continuous: "free-equivalent" when every coupling
is a signed identity, "periodic-equivalent" when a single nontrivial coupling
class (necessarily with a single cell length) repeats.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import sl2
from .model import DisorderMeasure, Separating, coupling_matrix
from .errors import ConsistencyError, UnsupportedModelError

PHASE_TOL = 1e-10
LENGTH_TOL = 1e-12


def phase_equivalent(B1, B2, tol: float = PHASE_TOL) -> bool:
    """True if B1 equals B2 up to an overall sign (entrywise within tol)."""
    return sl2.phase_equal(B1, B2, tol)


@dataclass(frozen=True)
class DichotomyVerdict:
    verdict: str                  # "localized" | "absolutely-continuous"
    bullet: Optional[int]         # 1 | 2 | 3 for localized, None otherwise
    witness: tuple                # indices of the atoms that triggered the call
    reason: str

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "bullet": self.bullet,
                "witness": list(self.witness), "reason": self.reason}


def classify(measure: DisorderMeasure) -> DichotomyVerdict:
    """Decide localized vs. absolutely continuous from the support structure.

    Invariant under atom permutation, weight rescaling, and per-atom sign
    flips of the couplings.
    """
    atoms = measure.atoms
    for i, a in enumerate(atoms):
        if isinstance(a.condition, Separating):
            return DichotomyVerdict(
                "localized", 3, (i,),
                "separating vertex decouples the line into finite segments")

    couplings = [coupling_matrix(a.condition) for a in atoms]
    for i in range(len(atoms)):
        for j in range(i + 1, len(atoms)):
            if not phase_equivalent(couplings[i], couplings[j]):
                return DichotomyVerdict(
                    "localized", 2, (i, j),
                    "two couplings differ beyond an overall sign")

    eye = np.eye(2)
    nontrivial = [i for i, b in enumerate(couplings) if not phase_equivalent(b, eye)]
    if nontrivial:
        i = nontrivial[0]
        for j in range(len(atoms)):
            if abs(atoms[j].ell - atoms[i].ell) > LENGTH_TOL:
                return DichotomyVerdict(
                    "localized", 1, (i, j),
                    "nontrivial coupling meets a second cell length")
        return DichotomyVerdict(
            "absolutely-continuous", None, (),
            "periodic-equivalent")
    return DichotomyVerdict("absolutely-continuous", None, (), "free-equivalent")


def consistency_with_commutator(measure: DisorderMeasure) -> bool:
    """Cross-check the classifier against the transfer-commutator criterion.

    For connecting-type measures, bullets 1-2 fire exactly when some pair of
    atoms has a non-vanishing transfer commutator.  Raises ConsistencyError if
    the two routes disagree, returns True otherwise.
    """
    if measure.has_separating:
        raise UnsupportedModelError("commutator criterion needs connecting atoms only")
    atoms = measure.atoms
    couplings = [coupling_matrix(a.condition) for a in atoms]
    noncommuting = None
    for i in range(len(atoms)):
        for j in range(i + 1, len(atoms)):
            if not sl2.commutes_identically(atoms[i].ell, couplings[i],
                                            atoms[j].ell, couplings[j]):
                noncommuting = (i, j)
                break
        if noncommuting:
            break

    verdict = classify(measure)
    localized = verdict.verdict == "localized" and verdict.bullet in (1, 2)
    if localized != (noncommuting is not None):
        raise ConsistencyError(
            f"classifier says {verdict}, commutator scan says pair {noncommuting}")
    return True
