"""Shared fixtures: hand-checkable scalar systems and the property grid.

The scalar systems S1/S2 are small enough that every expected value in
the unit tests was derived by hand (2x2 solves, quadratic roots). The
grid constants parametrize the seeded property tests; reduction orders
are capped per case because the shifted tangential solutions of this
system class span a low-dimensional subspace and stacking more columns
than its rank makes basis deflation kick in, after which two exact
reduction routes may legitimately differ.
"""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from morkit import InterpolationData, SecondOrderIndex1System, generate_synthetic

# dimensions (n1, n2), port layouts (m, p, symmetric), generator seeds
DIMS = [(40, 10), (120, 25), (200, 40)]
PORTS = [(1, 1, True), (2, 2, True), (3, 3, True), (2, 3, False)]
SEEDS = [0, 1]

GRID = [
    (n1, n2, m, p, sym, seed)
    for (n1, n2) in DIMS
    for (m, p, sym) in PORTS
    for seed in SEEDS
]


def grid_ids():
    return [f"n{n1}x{n2}_m{m}p{p}_{'sym' if sym else 'asym'}_s{seed}"
            for (n1, n2, m, p, sym, seed) in GRID]


def rs_for(n1, m):
    """Reduction orders that stay below the tangential-subspace rank."""
    if m == 1:
        return (3, 4, 6)
    if n1 >= 120:
        return (3, 4, 10)
    return (3, 4, 8)


def scalar_system(F2=0.0, H2=0.0, Da=0.0, K12=1.0, K21=1.0, H1=1.0, K22=2.0):
    """1x1-block system; defaults give S1 with Schur (M, L, K) = (1, 2, 4.5)."""

    def blk(v):
        return sp.csc_array(np.array([[float(v)]]))

    return SecondOrderIndex1System(
        M11=blk(1.0), L11=blk(2.0), K11=blk(5.0),
        K12=blk(K12), K21=blk(K21), K22=blk(K22),
        F1=np.array([[1.0]]), F2=np.array([[float(F2)]]),
        H1=np.array([[float(H1)]]), H2=np.array([[float(H2)]]),
        Da=np.array([[float(Da)]]),
    )


@pytest.fixture
def s1():
    return scalar_system()


@pytest.fixture
def s2():
    # extra second-block ports: Schur arithmetic gives Fc = Hc = 0, Dc = 2,
    # so the transfer function is the constant 2
    return scalar_system(F2=2.0, H2=2.0)


def damped_pairs(r, m, p, seed, lo=10.0, hi=2.0e4, ratio=0.1):
    """Conjugate-closed interpolation data off the imaginary axis.

    Shifts are omega*(ratio + 1j) with omega log-spaced over [lo, hi]
    (plus one real shift at the geometric mean when r is odd); the
    spread keeps stacked tangential bases well conditioned, which the
    equal-routes property tests rely on.
    """
    rng = np.random.default_rng(seed)
    shifts, rows_b, rows_c = [], [], []

    def unit_complex(k):
        v = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        return v / np.linalg.norm(v)

    def unit_real(k):
        v = rng.standard_normal(k)
        return v / np.linalg.norm(v)

    npairs = r // 2
    if npairs:
        for om in np.logspace(math.log10(lo), math.log10(hi), npairs):
            s = om * (ratio + 1j)
            b = unit_complex(m)
            c = unit_complex(p)
            shifts += [s, np.conj(s)]
            rows_b += [b, np.conj(b)]
            rows_c += [c, np.conj(c)]
    if r % 2:
        shifts.append(complex(math.sqrt(lo * hi)))
        rows_b.append(unit_real(m).astype(complex))
        rows_c.append(unit_real(p).astype(complex))
    return InterpolationData(np.array(shifts), np.array(rows_b), np.array(rows_c))


@pytest.fixture(scope="session")
def make_system():
    """Session-cached generator so repeated grid cases build once."""
    cache = {}

    def build(n1, n2, m, p, seed, symmetric=True, damping=(0.5, 1e-4)):
        key = (n1, n2, m, p, seed, symmetric, damping)
        if key not in cache:
            cache[key] = generate_synthetic(
                n1, n2, m, p, seed=seed, symmetric=symmetric,
                proportional_damping=damping,
            )
        return cache[key]

    return build
