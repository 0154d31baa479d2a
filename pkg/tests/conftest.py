"""Shared helpers: randomized measures used by unit and acceptance tests."""

import math

import numpy as np

from pointlab import model

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def random_coupling(rng, scale=2.5):
    """Random SL(2,R) matrix from rotation/diagonal/shear factors."""
    t = rng.uniform(0.0, math.pi)
    b = rng.uniform(0.5, 2.0)
    q = rng.uniform(-scale, scale)
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    m = rot @ np.diag([b, 1.0 / b]) @ np.array([[1.0, 0.0], [q, 1.0]])
    return -m if rng.random() < 0.5 else m


def random_connecting_measure(rng) -> model.DisorderMeasure:
    """Random connecting-type measure; mixes localized and a.c. structures.

    Roughly half the draws force the absolutely continuous structure (all
    couplings share one sign class, and lengths are equal unless that class is
    the identity); the other half draw freely, which almost surely localizes
    once two atoms differ.
    """
    k = int(rng.integers(1, 5))
    lengths = [1.0, 1.5, GOLDEN, float(rng.uniform(0.4, 2.4))]
    ac_style = rng.random() < 0.5
    atoms = []
    if ac_style:
        free = rng.random() < 0.5
        shared = np.eye(2) if free else random_coupling(rng)
        ell = lengths[int(rng.integers(0, len(lengths)))]
        for i in range(k):
            sign = -1.0 if rng.random() < 0.5 else 1.0
            b = sign * shared
            cell = lengths[int(rng.integers(0, len(lengths)))] if free else ell
            atoms.append((cell, b))
    else:
        for i in range(k):
            ell = lengths[int(rng.integers(0, len(lengths)))]
            b = np.eye(2) if rng.random() < 0.25 else random_coupling(rng)
            atoms.append((ell, b))
    support = []
    seen = set()
    for ell, b in atoms:
        key = (round(ell, 9),) + tuple(np.round(b.ravel(), 9))
        if key in seen:
            continue
        seen.add(key)
        support.append(model.SupportAtom(ell, model.Connecting(0.0, tuple(b.ravel())),
                                         float(rng.uniform(0.2, 1.0))))
    return model.DisorderMeasure(tuple(support))
