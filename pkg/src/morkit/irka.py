"""Tangential-interpolation model reduction for second-order index-1 systems.

The driver :func:`irka_second_order_index1` iterates Hermite
bi-tangential interpolation (IRKA): projection bases are built from
tangential solves with the *sparse augmented* blocks — the dense Schur
complement of the algebraic part is never formed — and the next shift
set is the mirrored spectrum of a small reduced model. Because a
second-order reduced model of order r has 2r poles but only r shifts
are needed, the shift update runs a first-order IRKA
(:func:`irka_first_order`) on the companion form of the intermediate
reduced model and mirrors the poles of *its* r-dimensional result.

The reduced model keeps second-order structure throughout:

    Mr = W^T M11 V                   Fr = W^T F1 - (W^T K12) K22^-1 F2
    Lr = W^T L11 V                   Hr = H1 V - H2 K22^-1 (K21 V)
    Kr = W^T K11 V - (W^T K12) K22^-1 (K21 V)
    Dr = Da + H2 K22^-1 F2

with K22^-1 applied only through the retained sparse factorization.
For structurally symmetric systems a one-sided basis (W = V) preserves
symmetry and, for positive definite blocks, stability of the reduced
model.
"""

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import lu
from .dense import dense_solve, eig_generalized, orthonormalize
from .errors import (
    ConvergenceWarning,
    DimensionError,
    PencilSingularError,
    RankDeficiencyWarning,
    ShiftCollisionError,
    SingularMatrixError,
    StructuralError,
)
from .sparse import assemble_shifted_augmented
from .system import SecondOrderIndex1System, validate

DEFAULT_FREQ_RANGE = (10.0, 1.0e4)

_CLOSURE_RTOL = 1e-8
_PERTURB = 1e-8


# ---------------------------------------------------------------------------
# interpolation data


@dataclass
class InterpolationData:
    """One IRKA iterate: shifts with right and left tangential directions.

    ``shifts`` has shape (r,), ``b`` (r, m) and ``c`` (r, p); row i of
    b/c belongs to shift i. A valid iterate is closed under complex
    conjugation (shifts and directions jointly) so that real projection
    bases exist.
    """

    shifts: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.shifts = np.atleast_1d(np.asarray(self.shifts, dtype=np.complex128))
        self.b = np.atleast_2d(np.asarray(self.b, dtype=np.complex128))
        self.c = np.atleast_2d(np.asarray(self.c, dtype=np.complex128))
        r = self.shifts.shape[0]
        if self.b.shape[0] != r or self.c.shape[0] != r:
            raise DimensionError(
                f"direction rows ({self.b.shape[0]}, {self.c.shape[0]}) "
                f"do not match {r} shifts"
            )

    @property
    def r(self):
        return self.shifts.shape[0]

    @property
    def m(self):
        return self.b.shape[1]

    @property
    def p(self):
        return self.c.shape[1]

    def is_conjugate_closed(self, rtol=_CLOSURE_RTOL):
        """True if shifts and directions are closed under conjugation."""
        used = np.zeros(self.r, dtype=bool)
        for i in range(self.r):
            if used[i]:
                continue
            s = self.shifts[i]
            tol = rtol * max(1.0, abs(s))
            if abs(s.imag) <= tol:
                used[i] = True
                if (np.max(np.abs(self.b[i].imag), initial=0.0) > rtol
                        or np.max(np.abs(self.c[i].imag), initial=0.0) > rtol):
                    return False
                continue
            partner = -1
            for j in range(self.r):
                if used[j] or j == i:
                    continue
                if (abs(self.shifts[j] - np.conj(s)) <= tol
                        and np.max(np.abs(self.b[j] - np.conj(self.b[i]))) <= rtol
                        and np.max(np.abs(self.c[j] - np.conj(self.c[i]))) <= rtol):
                    partner = j
                    break
            if partner < 0:
                return False
            used[i] = used[partner] = True
        return True


def _canonical_phase(vec):
    """Rotate a direction so its largest component is real positive.

    Tangential directions are eigenvector-derived and therefore unique
    only up to complex phase; fixing the phase makes iterates (and the
    reduced model entries) deterministic.
    """
    k = int(np.argmax(np.abs(vec)))
    a = vec[k]
    if a == 0:
        out = np.zeros_like(vec)
        out[0] = 1.0
        return out
    return vec * (np.abs(a) / a)


def _unit_direction(vec):
    norm = np.linalg.norm(vec)
    if norm == 0:
        out = np.zeros_like(vec)
        out[0] = 1.0
        return out
    return _canonical_phase(vec / norm)


def _real_direction(vec):
    """Self-conjugate (real) representative for a real shift's direction."""
    rotated = _canonical_phase(vec)
    return _unit_direction(rotated.real.astype(np.complex128))


def enforce_conjugate_closure(shifts, b, c, rtol=_CLOSURE_RTOL):
    """Build a closed, unit-direction, deterministically ordered iterate.

    Shifts with negligible imaginary part collapse to the real axis;
    complex shifts are matched with their conjugates (averaging the
    pair), and any unmatched complex leftover is demoted to its real
    part rather than breaking closure. Directions are renormalized to
    unit length with canonical phase. The result is sorted by (real,
    imaginary) part.
    """
    shifts = np.atleast_1d(np.asarray(shifts, dtype=np.complex128))
    b = np.atleast_2d(np.asarray(b, dtype=np.complex128))
    c = np.atleast_2d(np.asarray(c, dtype=np.complex128))
    r = shifts.shape[0]
    entries = []  # (shift, b_row, c_row)
    used = np.zeros(r, dtype=bool)
    for i in np.lexsort((shifts.imag, shifts.real)):
        if used[i]:
            continue
        used[i] = True
        s = shifts[i]
        tol = rtol * max(1.0, abs(s))
        if abs(s.imag) <= tol:
            entries.append((complex(s.real), _real_direction(b[i]), _real_direction(c[i])))
            continue
        candidates = [j for j in range(r) if not used[j]]
        partner = -1
        if candidates:
            dist = [abs(shifts[j] - np.conj(s)) for j in candidates]
            best = int(np.argmin(dist))
            if dist[best] <= 1e-6 * max(1.0, abs(s)):
                partner = candidates[best]
        if partner < 0:
            # no conjugate partner: keep the iteration alive on the real axis
            entries.append((complex(s.real), _real_direction(b[i]), _real_direction(c[i])))
            continue
        used[partner] = True
        pair = (s + np.conj(shifts[partner])) / 2.0
        b_row = _unit_direction((b[i] + np.conj(b[partner])) / 2.0)
        c_row = _unit_direction((c[i] + np.conj(c[partner])) / 2.0)
        entries.append((pair, b_row, c_row))
        entries.append((np.conj(pair), np.conj(b_row), np.conj(c_row)))
    out_s = np.array([e[0] for e in entries], dtype=np.complex128)
    out_b = np.array([e[1] for e in entries])
    out_c = np.array([e[2] for e in entries])
    order = np.lexsort((out_s.imag, out_s.real))
    return InterpolationData(out_s[order], out_b[order], out_c[order])


def initial_interpolation(r, m, p, freq_range=DEFAULT_FREQ_RANGE, seed=0):
    """Starting iterate: log-spaced real shifts across a frequency band.

    Shifts are the r points log-uniformly spaced on [lo, hi] (rad/s, on
    the positive real axis); directions are seeded pseudo-random real
    unit vectors, so the whole iterate is deterministic in `seed`.
    """
    lo, hi = freq_range
    if not (0.0 < lo <= hi):
        raise ValueError(f"frequency range must satisfy 0 < lo <= hi, got {freq_range}")
    if min(r, m, p) < 1:
        raise DimensionError("r, m and p must all be at least 1")
    shifts = np.logspace(math.log10(lo), math.log10(hi), r).astype(np.complex128)
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((r, m))
    c = rng.standard_normal((r, p))
    b = b / np.linalg.norm(b, axis=1, keepdims=True)
    c = c / np.linalg.norm(c, axis=1, keepdims=True)
    return InterpolationData(shifts, b.astype(np.complex128), c.astype(np.complex128))


def convergence_metric(old_shifts, new_shifts):
    """Largest relative shift movement between consecutive iterates.

    Both shift sets are sorted by (real, imaginary) part before being
    compared entrywise; a change of effective order makes the iterates
    incomparable, which reports as ``inf``.
    """
    old = np.atleast_1d(np.asarray(old_shifts, dtype=np.complex128))
    new = np.atleast_1d(np.asarray(new_shifts, dtype=np.complex128))
    if old.shape != new.shape:
        return math.inf
    old = old[np.lexsort((old.imag, old.real))]
    new = new[np.lexsort((new.imag, new.real))]
    denom = np.maximum(np.abs(old), np.finfo(np.float64).eps)
    return float(np.max(np.abs(new - old) / denom))


def _perturb(interp):
    """Nudge every shift off a resonance; conjugate closure is preserved."""
    return InterpolationData(
        interp.shifts * (1.0 + _PERTURB) + _PERTURB, interp.b, interp.c
    )


def _representatives(interp, rtol=_CLOSURE_RTOL):
    """One entry per real shift / conjugate pair (positive-imag member)."""
    reps = []
    used = np.zeros(interp.r, dtype=bool)
    for i in range(interp.r):
        if used[i]:
            continue
        used[i] = True
        s = interp.shifts[i]
        tol = rtol * max(1.0, abs(s))
        if abs(s.imag) <= tol:
            reps.append((complex(s.real), interp.b[i], interp.c[i], False))
            continue
        partner = -1
        for j in range(interp.r):
            if not used[j] and abs(interp.shifts[j] - np.conj(s)) <= 1e-6 * max(1.0, abs(s)):
                partner = j
                break
        if partner < 0:
            raise StructuralError(
                "interpolation data is not conjugate closed (unmatched complex shift)"
            )
        used[partner] = True
        if s.imag > 0:
            reps.append((complex(s), interp.b[i], interp.c[i], True))
        else:
            reps.append((complex(interp.shifts[partner]), interp.b[partner],
                         interp.c[partner], True))
    return reps


# ---------------------------------------------------------------------------
# tangential solves against the sparse augmented blocks


@dataclass
class SolveCounter:
    """Bookkeeping of large sparse triangular solves."""

    right: int = 0
    left: int = 0
    factorizations: int = 0


def factor_augmented(system, sigma, transposed=False):
    """Sparse LU of the shifted augmented matrix at one shift.

    A singular factorization means sigma collided with an eigenvalue of
    the underlying pencil and raises :class:`ShiftCollisionError`.
    """
    A = assemble_shifted_augmented(system, sigma, transposed=transposed)
    try:
        return lu.factor(A, ordering="amd")
    except SingularMatrixError as exc:
        raise ShiftCollisionError(sigma, f"augmented matrix singular at sigma={sigma}: {exc}") from exc


def tangential_solve_right(system, sigma, direction, factorization=None):
    """Right tangential solution v(sigma, b), length n1.

    Solves the sparse augmented system

        [ sigma^2 M11 + sigma L11 + K11   K12 ] [v    ]   [F1 b]
        [             K21                 K22 ] [gamma] = [F2 b]

    and returns v (the auxiliary block gamma is discarded). When a
    factorization of the untransposed augmented matrix at this shift is
    supplied it is reused, which is how the basis builder amortizes one
    LU across the right and left solves of a shift.
    """
    direction = np.asarray(direction, dtype=np.complex128).ravel()
    if direction.shape[0] != system.m:
        raise DimensionError(
            f"right direction has length {direction.shape[0]}, system has m={system.m}"
        )
    if factorization is None:
        factorization = factor_augmented(system, sigma)
    rhs = np.concatenate([system.F1 @ direction, system.F2 @ direction])
    sol = factorization.solve(rhs)
    return sol[: system.n1]


def tangential_solve_left(system, sigma, direction, factorization=None):
    """Left tangential solution w(sigma, c), length n1.

    Same augmented structure as the right solve but with the transposed
    blocks (K21^T in the (1,2) position) and right-hand side
    [H1^T c; H2^T c]. With a supplied factorization of the
    *untransposed* augmented matrix, the transposed system is solved
    through it directly (no second factorization).
    """
    direction = np.asarray(direction, dtype=np.complex128).ravel()
    if direction.shape[0] != system.p:
        raise DimensionError(
            f"left direction has length {direction.shape[0]}, system has p={system.p}"
        )
    rhs = np.concatenate([system.H1.T @ direction, system.H2.T @ direction])
    if factorization is None:
        factorization = factor_augmented(system, sigma, transposed=True)
        sol = factorization.solve(rhs)
    else:
        sol = factorization.solve_transposed(rhs)
    return sol[: system.n1]


# ---------------------------------------------------------------------------
# projection bases and structure-preserving reduction


@dataclass
class ProjectionBasis:
    """Real orthonormal projection bases (column counts always match)."""

    V: np.ndarray
    W: np.ndarray
    one_sided: bool = False

    @property
    def r(self):
        return self.V.shape[1]


def build_bases(system, interp, one_sided=False, counter=None):
    """Assemble real projection bases from one interpolation iterate.

    For each real shift one real column enters V (and W); for each
    conjugate pair the real and imaginary parts of the positive-imag
    member's solution enter, which spans the same space as the complex
    pair. One sparse LU per distinct shift serves both the right solve
    and (two-sided case) the transposed left solve. A shift whose
    augmented matrix is singular is perturbed once
    (sigma -> sigma (1 + 1e-8) + 1e-8) before giving up.

    With ``one_sided=True`` no left solves happen and W is V; the
    reduction is then a Galerkin projection, which preserves symmetry.
    """
    if not interp.is_conjugate_closed():
        raise StructuralError("interpolation data is not conjugate closed")
    cols_v, cols_w = [], []
    for sigma, b_row, c_row, is_pair in _representatives(interp):
        v = w = None
        attempt_sigma = sigma
        for attempt in range(2):
            try:
                fact = factor_augmented(system, attempt_sigma)
                if counter is not None:
                    counter.factorizations += 1
                v = tangential_solve_right(system, attempt_sigma, b_row, factorization=fact)
                if counter is not None:
                    counter.right += 1
                if not one_sided:
                    w = tangential_solve_left(system, attempt_sigma, c_row, factorization=fact)
                    if counter is not None:
                        counter.left += 1
                break
            except ShiftCollisionError:
                if attempt:
                    raise
                attempt_sigma = attempt_sigma * (1.0 + _PERTURB) + _PERTURB
        if is_pair:
            cols_v.extend([v.real, v.imag])
            if w is not None:
                cols_w.extend([w.real, w.imag])
        else:
            cols_v.append(v.real)
            if w is not None:
                cols_w.append(w.real)
    V = orthonormalize(np.column_stack(cols_v))
    if one_sided:
        return ProjectionBasis(V=V, W=V, one_sided=True)
    W = orthonormalize(np.column_stack(cols_w))
    if V.shape[1] != W.shape[1]:
        k = min(V.shape[1], W.shape[1])
        warnings.warn(
            f"projection bases have ranks {V.shape[1]} and {W.shape[1]}; "
            f"truncating both to {k}",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        V, W = V[:, :k], W[:, :k]
    return ProjectionBasis(V=V, W=W, one_sided=False)


@dataclass
class ReducedSecondOrderModel:
    """Dense second-order reduced model with feed-through."""

    M: np.ndarray
    L: np.ndarray
    K: np.ndarray
    F: np.ndarray
    H: np.ndarray
    D: np.ndarray

    @property
    def order(self):
        return self.M.shape[0]

    @property
    def m(self):
        return self.F.shape[1]

    @property
    def p(self):
        return self.H.shape[0]


def reduce(system, basis):
    """Project the index-1 system onto a basis, eliminating the algebraic part.

    The algebraic block enters only through solves with the retained
    K22 factorization against r (plus m) skinny right-hand sides; the
    n1 x n1 Schur complement itself is never formed.
    """
    V, W = basis.V, basis.W
    if V.shape[0] != system.n1:
        raise DimensionError(
            f"basis has {V.shape[0]} rows, system has n1 = {system.n1}"
        )
    k22 = system.k22_lu
    K21V = system.K21 @ V                     # (n2, r)
    X = k22.solve(K21V)                       # K22^-1 K21 V
    XF2 = k22.solve(system.F2)                # K22^-1 F2
    WtK12 = (system.K12.T @ W).T              # W^T K12, kept skinny
    return ReducedSecondOrderModel(
        M=W.T @ (system.M11 @ V),
        L=W.T @ (system.L11 @ V),
        K=W.T @ (system.K11 @ V) - WtK12 @ X,
        F=W.T @ system.F1 - WtK12 @ XF2,
        H=system.H1 @ V - system.H2 @ X,
        D=system.Da + system.H2 @ XF2,
    )


@dataclass
class CompanionPencil:
    """First-order (E, A, B, C) form of a second-order reduced model."""

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def companion(rom):
    """First-order companion realization of a reduced second-order model.

    The pencil (A, E) with

        E = [0  M]    A = [M   0]    B = [0]    C = [0  H]
            [M  L]        [0  -K]        [F]

    has exactly the 2r quadratic eigenvalues of (M, L, K), and its
    transfer function C (sE - A)^-1 B matches the second-order model
    without feed-through.
    """
    r = rom.order
    Z = np.zeros((r, r))
    E = np.block([[Z, rom.M], [rom.M, rom.L]])
    A = np.block([[rom.M, Z], [Z, -rom.K]])
    B = np.vstack([np.zeros((r, rom.m)), rom.F])
    C = np.hstack([np.zeros((rom.p, r)), rom.H])
    return CompanionPencil(E=E, A=A, B=B, C=C)


# ---------------------------------------------------------------------------
# first-order IRKA (shift update engine)


@dataclass
class FirstOrderReduction:
    """Result of a first-order IRKA run."""

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    interpolation: InterpolationData
    converged: bool
    iterations: int


def _dense_tangential_bases(E, A, B, C, interp):
    """Real bases for a dense first-order pencil (per-shift retry inside)."""
    cols_v, cols_w = [], []
    for sigma, b_row, c_row, is_pair in _representatives(interp):
        attempt_sigma = sigma
        for attempt in range(2):
            try:
                Ms = attempt_sigma * E - A
                v = dense_solve(Ms, B @ b_row)
                w = dense_solve(Ms.T, C.T @ c_row)
                break
            except SingularMatrixError as exc:
                if attempt:
                    raise ShiftCollisionError(attempt_sigma, str(exc)) from exc
                attempt_sigma = attempt_sigma * (1.0 + _PERTURB) + _PERTURB
        if is_pair:
            cols_v.extend([v.real, v.imag])
            cols_w.extend([w.real, w.imag])
        else:
            cols_v.append(v.real)
            cols_w.append(w.real)
    V = orthonormalize(np.column_stack(cols_v))
    W = orthonormalize(np.column_stack(cols_w))
    if V.shape[1] != W.shape[1]:
        k = min(V.shape[1], W.shape[1])
        V, W = V[:, :k], W[:, :k]
    return V, W


def _mirror_interpolation(triplets, B, C):
    """Next iterate from reduced eigentriplets: sigma = -lambda, tangential
    directions from the eigenvectors (b = -B^H y, c = C z)."""
    shifts = np.array([-t.value for t in triplets], dtype=np.complex128)
    b = np.array([-(B.conj().T @ t.left) for t in triplets])
    c = np.array([C @ t.right for t in triplets])
    return enforce_conjugate_closure(shifts, b, c)


def _truncate_closed(interp, k):
    """Largest closure-preserving head of the iterate with at most k shifts."""
    entries = []
    count = 0
    for sigma, b_row, c_row, is_pair in _representatives(interp):
        if not is_pair:
            if count + 1 > k:
                break
            entries.append((sigma, b_row, c_row))
            count += 1
        else:
            if count + 2 > k:
                # demote the pair to its real part if a single slot remains
                if count + 1 <= k:
                    entries.append((complex(sigma.real), _real_direction(b_row),
                                    _real_direction(c_row)))
                    count += 1
                break
            entries.append((sigma, b_row, c_row))
            entries.append((np.conj(sigma), np.conj(b_row), np.conj(c_row)))
            count += 2
    shifts = np.array([e[0] for e in entries], dtype=np.complex128)
    b = np.array([e[1] for e in entries])
    c = np.array([e[2] for e in entries])
    return enforce_conjugate_closure(shifts, b, c)


def _dominant_initialization(E, A, B, C, r):
    """Interpolation data seeded from the r most dominant pencil poles.

    Dominance of an eigentriplet (lambda, z, y) is measured by
    ||C z|| ||B^H y|| / |Re lambda|, the usual residue-over-decay
    weight. Conjugate partners are pulled in together so the selection
    stays closed under conjugation.
    """
    triplets = eig_generalized(A, E)
    weights = []
    for t in triplets:
        num = np.linalg.norm(C @ t.right) * np.linalg.norm(B.conj().T @ t.left)
        weights.append(num / max(abs(t.value.real), np.finfo(float).tiny))
    order = sorted(range(len(triplets)), key=lambda i: -weights[i])
    used = set()
    chosen = []
    for i in order:
        if i in used or len(chosen) >= r:
            continue
        t = triplets[i]
        if abs(t.value.imag) <= 1e-12 * max(1.0, abs(t.value)):
            used.add(i)
            chosen.append(t)
            continue
        partner = None
        for j in order:
            if j in used or j == i:
                continue
            tj = triplets[j]
            if abs(tj.value - np.conj(t.value)) <= 1e-6 * max(1.0, abs(t.value)):
                partner = j
                break
        if partner is None or len(chosen) + 2 > r:
            continue
        used.update((i, partner))
        chosen.extend((t, triplets[partner]))
    if not chosen:
        chosen = [triplets[0]]
    return _mirror_interpolation(chosen, B, C)


def irka_first_order(E, A, B, C, r, max_iter=20, tol=1e-5, init=None):
    """IRKA for a dense first-order MIMO system (E, A, B, C).

    Iterates Hermite interpolation at mirrored reduced poles until the
    shift set is stationary up to `tol` (relative movement of sorted
    shifts) or `max_iter` is reached. Intended for the small companion
    pencils arising in the second-order shift update; everything here
    is dense.

    Returns a :class:`FirstOrderReduction`; its interpolation field is
    the final iterate (mirrored poles of the second-to-last projection).
    """
    E, A = np.asarray(E, dtype=float), np.asarray(A, dtype=float)
    B, C = np.asarray(B, dtype=float), np.asarray(C, dtype=float)
    n = E.shape[0]
    if A.shape != E.shape or E.ndim != 2 or E.shape[0] != E.shape[1]:
        raise DimensionError("E and A must be square and of equal shape")
    if B.shape[0] != n or C.shape[1] != n:
        raise DimensionError("B/C dimensions do not match the pencil")
    if not 1 <= r <= n:
        raise DimensionError(f"reduced order r={r} must lie in [1, {n}]")
    if init is None:
        init = initial_interpolation(r, B.shape[1], C.shape[0])
    if init.m != B.shape[1] or init.p != C.shape[0]:
        raise DimensionError("interpolation directions do not match B/C")
    interp = init if init.r <= n else _truncate_closed(init, n)

    V, W = _dense_tangential_bases(E, A, B, C, interp)
    converged = False
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        try:
            triplets = eig_generalized(W.T @ A @ V, W.T @ E @ V)
        except PencilSingularError:
            # a deflated or resonant projection: nudge the shifts and retry once
            interp = _perturb(interp)
            V, W = _dense_tangential_bases(E, A, B, C, interp)
            triplets = eig_generalized(W.T @ A @ V, W.T @ E @ V)
        new_interp = _mirror_interpolation(triplets, W.T @ B, C @ V)
        metric = convergence_metric(interp.shifts, new_interp.shifts)
        interp = new_interp
        V, W = _dense_tangential_bases(E, A, B, C, interp)
        if metric <= tol:
            converged = True
            break
    return FirstOrderReduction(
        E=W.T @ E @ V,
        A=W.T @ A @ V,
        B=W.T @ B,
        C=C @ V,
        interpolation=interp,
        converged=converged,
        iterations=iterations,
    )


def update_interpolation(pencil, config, warm_start=None):
    """Next outer iterate from an intermediate companion pencil.

    Runs the inner first-order IRKA on the companion form (warm-started
    from the current outer iterate when given — the companion pencil
    shares the outer system's input/output spaces, so the outer iterate
    is dimensionally valid as-is) and mirrors the poles of the inner
    result: sigma = -lambda, b = -B^H y, c = C z, renormalized and
    conjugate-closed.

    The warm start occasionally parks the inner iteration in a limit
    cycle; if it fails to settle, the run is repeated once from the
    most dominant poles of the companion pencil, which restarts it
    inside the basin of the dominant-subspace fixed point. The retried
    result is kept only when it actually converged.
    """
    m, p = pencil.B.shape[1], pencil.C.shape[0]
    if warm_start is None:
        warm_start = initial_interpolation(
            config.r, m, p, config.freq_range, config.seed
        )
    reduction = irka_first_order(
        pencil.E, pencil.A, pencil.B, pencil.C,
        r=warm_start.r,
        max_iter=config.inner_max_iter,
        tol=config.inner_tol,
        init=warm_start,
    )
    if not reduction.converged:
        restart = _dominant_initialization(
            pencil.E, pencil.A, pencil.B, pencil.C, warm_start.r
        )
        retried = irka_first_order(
            pencil.E, pencil.A, pencil.B, pencil.C,
            r=restart.r,
            max_iter=config.inner_max_iter,
            tol=config.inner_tol,
            init=restart,
        )
        if retried.converged:
            reduction = retried
    triplets = eig_generalized(reduction.A, reduction.E)
    return _mirror_interpolation(triplets, reduction.B, reduction.C)


# ---------------------------------------------------------------------------
# outer driver


@dataclass
class IrkaConfig:
    """Settings for the second-order reduction driver.

    ``force_one_sided=None`` chooses automatically: one-sided (W = V)
    for structurally symmetric systems, two-sided otherwise.
    """

    r: int
    max_iter: int = 20
    shift_tol: float = 1e-3
    inner_max_iter: int = 20
    inner_tol: float = 1e-5
    freq_range: tuple = DEFAULT_FREQ_RANGE
    seed: int = 0
    force_one_sided: bool | None = None

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"reduced order must be positive, got r={self.r}")
        if self.max_iter < 1 or self.inner_max_iter < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.shift_tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")
        lo, hi = self.freq_range
        if not (0.0 < lo <= hi):
            raise ValueError(f"invalid frequency range {self.freq_range}")


@dataclass
class IterationRecord:
    """One outer IRKA iteration as recorded in the trace."""

    iteration: int
    metric: float
    shifts: np.ndarray
    right_solves: int
    left_solves: int
    seconds: dict = field(default_factory=dict)


def _format_complex(z):
    return f"{z.real:.17g}{z.imag:+.17g}j"


@dataclass
class IterationTrace:
    """Append-only record of an outer IRKA run.

    ``format()`` emits a stable plain-text form intended for
    diff-based regression; timing lines are opt-in because wall-clock
    values are the one part of a run that is not reproducible.
    """

    requested_order: int
    one_sided: bool
    records: list = field(default_factory=list)
    converged: bool = False
    final_order: int = 0
    final_interpolation: InterpolationData | None = None
    final_basis: ProjectionBasis | None = None

    @property
    def iterations(self):
        return len(self.records)

    @property
    def right_solves(self):
        return sum(rec.right_solves for rec in self.records)

    @property
    def left_solves(self):
        return sum(rec.left_solves for rec in self.records)

    def format(self, include_timings=False):
        lines = [
            "# second-order IRKA trace",
            f"requested_order {self.requested_order}",
            f"one_sided {str(self.one_sided).lower()}",
        ]
        for rec in self.records:
            lines.append(f"iteration {rec.iteration}")
            lines.append(f"  metric {rec.metric:.17g}")
            lines.append("  shifts " + " ".join(_format_complex(s) for s in rec.shifts))
            lines.append(f"  right_solves {rec.right_solves}")
            lines.append(f"  left_solves {rec.left_solves}")
            if include_timings:
                lines.append(
                    "  seconds "
                    + " ".join(f"{k}={v:.6f}" for k, v in sorted(rec.seconds.items()))
                )
        lines.append(f"converged {str(self.converged).lower()}")
        lines.append(f"iterations {self.iterations}")
        lines.append(f"final_order {self.final_order}")
        lines.append(f"right_solves {self.right_solves}")
        lines.append(f"left_solves {self.left_solves}")
        return "\n".join(lines) + "\n"


def irka_second_order_index1(system, config):
    """Reduce a second-order index-1 system by two-level IRKA.

    Each outer iteration: build projection bases by sparse augmented
    tangential solves at the current shifts, project to an intermediate
    second-order model of order r, and obtain the next shift set by
    running the dense first-order IRKA on its companion pencil and
    mirroring the result's poles. Convergence is declared when the
    sorted shift set moves by less than ``config.shift_tol`` in
    relative terms; hitting ``config.max_iter`` emits a
    :class:`ConvergenceWarning` and returns the last iterate.

    Returns
    -------
    (ReducedSecondOrderModel, IterationTrace)
        The model is built from the final (post-update) bases; the
        trace also carries those bases for follow-up transformations.
    """
    report = validate(system)
    if config.r > system.n1:
        raise DimensionError(
            f"reduced order r={config.r} exceeds differential dimension n1={system.n1}"
        )
    one_sided = report.symmetric if config.force_one_sided is None else config.force_one_sided
    interp = initial_interpolation(
        config.r, system.m, system.p, config.freq_range, config.seed
    )
    trace = IterationTrace(requested_order=config.r, one_sided=one_sided)
    counter = SolveCounter()

    marks = [0, 0]
    basis = build_bases(system, interp, one_sided=one_sided, counter=counter)
    for it in range(1, config.max_iter + 1):
        t0 = time.perf_counter()
        rom = reduce(system, basis)
        pencil = companion(rom)
        t1 = time.perf_counter()
        try:
            new_interp = update_interpolation(pencil, config, warm_start=interp)
        except PencilSingularError:
            # resonant intermediate model: nudge all shifts, rebuild, retry once
            interp = _perturb(interp)
            basis = build_bases(system, interp, one_sided=one_sided, counter=counter)
            rom = reduce(system, basis)
            pencil = companion(rom)
            new_interp = update_interpolation(pencil, config, warm_start=interp)
        t2 = time.perf_counter()
        metric = convergence_metric(interp.shifts, new_interp.shifts)
        interp = new_interp
        basis = build_bases(system, interp, one_sided=one_sided, counter=counter)
        t3 = time.perf_counter()
        trace.records.append(
            IterationRecord(
                iteration=it,
                metric=metric,
                shifts=interp.shifts.copy(),
                right_solves=counter.right - marks[0],
                left_solves=counter.left - marks[1],
                seconds={
                    "reduce": t1 - t0,
                    "update": t2 - t1,
                    "solve": t3 - t2,
                },
            )
        )
        marks = [counter.right, counter.left]
        if metric <= config.shift_tol:
            trace.converged = True
            break
    rom = reduce(system, basis)
    trace.final_order = rom.order
    trace.final_interpolation = interp
    trace.final_basis = basis
    if not trace.converged:
        warnings.warn(
            f"IRKA hit the iteration cap ({config.max_iter}) with shift movement "
            f"{trace.records[-1].metric:.3e} > {config.shift_tol:.3e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return rom, trace


_ROM_FILES = {
    "M": "rom_M.mtx",
    "L": "rom_L.mtx",
    "K": "rom_K.mtx",
    "F": "rom_F.mtx",
    "H": "rom_H.mtx",
    "D": "rom_D.mtx",
}


def save_reduced_model(rom, directory):
    """Write the six reduced matrices as dense Matrix Market files."""
    from pathlib import Path

    from .system import _write_matrix

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, filename in _ROM_FILES.items():
        _write_matrix(directory / filename, np.asarray(getattr(rom, name)))
    return directory


def load_reduced_model(directory):
    """Load a reduced model written by :func:`save_reduced_model`."""
    from pathlib import Path

    import scipy.io

    directory = Path(directory)
    blocks = {}
    for name, filename in _ROM_FILES.items():
        target = directory / filename
        if not target.is_file():
            raise StructuralError(f"reduced-model file missing: {target}")
        data = scipy.io.mmread(str(target))
        blocks[name] = np.asarray(
            data.toarray() if sp.issparse(data) else data, dtype=np.float64
        )
    rom = ReducedSecondOrderModel(**blocks)
    if rom.M.shape != rom.L.shape or rom.M.shape != rom.K.shape:
        raise StructuralError("reduced blocks M, L, K must share a square shape")
    return rom


def back_to_index1(rom, system, basis):
    """Re-attach the untouched algebraic part to a reduced model.

    Builds the (r + n2)-dimensional second-order index-1 system whose
    differential blocks are the projections W^T M11 V, W^T L11 V,
    W^T K11 V (plain, without the algebraic correction), with coupling
    W^T K12 and K21 V and the original K22, F2, H2, Da. Its transfer
    function coincides with the reduced model's, while the algebraic
    variables (and any quantities attached to them) remain explicit.
    """
    V, W = basis.V, basis.W
    if rom.order != basis.r:
        raise DimensionError(
            f"reduced model order {rom.order} does not match basis rank {basis.r}"
        )
    if V.shape[0] != system.n1:
        raise DimensionError("basis does not belong to this system")
    K11h = W.T @ (system.K11 @ V)
    K12h = (system.K12.T @ W).T
    K21h = system.K21 @ V
    return SecondOrderIndex1System(
        M11=sp.csc_array(rom.M),
        L11=sp.csc_array(rom.L),
        K11=sp.csc_array(K11h),
        K12=sp.csc_array(K12h),
        K21=sp.csc_array(K21h),
        K22=system.K22,
        F1=W.T @ system.F1,
        F2=system.F2,
        H1=system.H1 @ V,
        H2=system.H2,
        Da=system.Da,
    )
