"""Haar-random orthonormal projections and distortion measurements.

The distortion of a vector u under an M-by-N row-orthonormal projection A
is ``|sqrt(N/M) ||Au|| / ||u|| - 1|``; the sqrt(N/M) factor makes the
expected value zero over a uniformly random projection subspace.  This
module samples such projections, measures vector / point-set / subspace
distortions, and computes principal angles between subspaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBreakdown

__all__ = [
    "Projector",
    "SubspaceBasis",
    "PrincipalAngles",
    "DistortionSummary",
    "PairPolicy",
    "WeylGapResult",
    "sample_projector",
    "random_subspace",
    "vector_distortion",
    "pointset_distortion",
    "subspace_distortion",
    "principal_angles",
    "weyl_gap",
]

_ORTHO_TOL = 1e-10


def _haar_columns(N: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """N x K column-orthonormal matrix, Haar-distributed.

    QR of a standard Gaussian matrix with the sign of the triangular
    factor's diagonal fixed to be nonnegative; without the sign fix the
    distribution of Q is not unbiased.
    """
    g = rng.standard_normal((N, K))
    q, r = np.linalg.qr(g)
    sign = np.sign(np.diagonal(r))
    sign[sign == 0] = 1.0
    return q * sign


@dataclass(frozen=True)
class Projector:
    """Row-orthonormal M x N random projection."""

    rows: np.ndarray = field(repr=False)
    M: int
    N: int
    seed: int

    def __post_init__(self):
        if not (1 <= self.M <= self.N):
            raise ValueError(f"need 1 <= M <= N, got M={self.M}, N={self.N}")
        if self.rows.shape != (self.M, self.N):
            raise ValueError(f"rows must be {(self.M, self.N)}, got {self.rows.shape}")
        self.rows.flags.writeable = False

    def check_orthonormal(self, tol: float = _ORTHO_TOL) -> None:
        gram = self.rows @ self.rows.T
        err = np.linalg.norm(gram - np.eye(self.M))
        if err > tol:
            raise ValueError(f"projector rows not orthonormal: ||AA^T - I||_F = {err:.3g}")


@dataclass(frozen=True)
class SubspaceBasis:
    """Column-orthonormal N x K basis of a K-dimensional subspace."""

    cols: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.cols.ndim != 2:
            raise ValueError("basis must be a 2-d array")
        n, k = self.cols.shape
        if k > n:
            raise ValueError(f"basis cannot have more columns than rows, got {self.cols.shape}")
        err = np.abs(self.cols.T @ self.cols - np.eye(k)).max()
        if err > _ORTHO_TOL:
            raise ValueError(f"basis not orthonormal: max |U^T U - I| = {err:.3g}")
        self.cols.flags.writeable = False

    @property
    def N(self) -> int:
        return self.cols.shape[0]

    @property
    def K(self) -> int:
        return self.cols.shape[1]


@dataclass(frozen=True)
class PrincipalAngles:
    """Principal angles between two equal-dimension subspaces.

    ``cosines`` are the singular values of U1^T U2, clipped to [0, 1] and
    sorted descending (floating point can overshoot 1 by ~1e-16, which
    would break arccos).  The orthogonal SVD factors are kept when
    requested so the extremal vector pairs can be reconstructed.
    """

    cosines: np.ndarray
    W: np.ndarray | None = field(default=None, repr=False)
    V: np.ndarray | None = field(default=None, repr=False)

    @property
    def angles(self) -> np.ndarray:
        return np.arccos(self.cosines)


@dataclass(frozen=True)
class PairPolicy:
    """Which unordered point pairs a point-set scan visits.

    ``all()`` enumerates every pair; ``subsample(n, seed)`` draws n pairs
    uniformly (with replacement over unordered pairs) from a seeded stream,
    recorded here so a summary can be reproduced.
    """

    kind: str
    n_pairs: int | None = None
    seed: int | None = None

    @classmethod
    def all(cls) -> "PairPolicy":
        return cls(kind="all")

    @classmethod
    def subsample(cls, n_pairs: int, seed: int) -> "PairPolicy":
        if n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        return cls(kind="subsample", n_pairs=int(n_pairs), seed=int(seed))


@dataclass(frozen=True)
class DistortionSummary:
    """Empirical distortion samples with max and provenance.

    ``samples`` may be None for streaming scans that only track the max.
    ``argmax`` records where the worst element came from (a pair of point
    indices for point sets, a projector index for projector ensembles).
    """

    max: float
    argmax: tuple
    n_evaluated: int
    samples: np.ndarray | None = field(default=None, repr=False)
    policy: PairPolicy | None = None

    def __post_init__(self):
        if self.samples is not None and len(self.samples) and not math.isclose(
            float(np.max(self.samples)), self.max, rel_tol=0.0, abs_tol=0.0
        ):
            raise ValueError("summary max does not equal max of samples")


def sample_projector(N: int, M: int, seed: int) -> Projector:
    """Draw a uniformly random M-dimensional orthonormal projection of R^N.

    Rows are the transposed Q factor of a Gaussian N x M matrix with the
    sign convention fixed, which makes the row span uniform over the
    space of M-dimensional subspaces and the draw deterministic in seed.
    """
    if not (1 <= M <= N):
        raise ValueError(f"need 1 <= M <= N, got M={M}, N={N}")
    rng = np.random.default_rng(seed)
    q = _haar_columns(N, M, rng)
    return Projector(rows=np.ascontiguousarray(q.T), M=M, N=N, seed=int(seed))


def random_subspace(N: int, K: int, seed: int) -> SubspaceBasis:
    """Haar-random K-dimensional subspace of R^N as an orthonormal basis."""
    if not (1 <= K <= N):
        raise ValueError(f"need 1 <= K <= N, got K={K}, N={N}")
    rng = np.random.default_rng(seed)
    return SubspaceBasis(cols=_haar_columns(N, K, rng))


def vector_distortion(A: Projector, u: np.ndarray) -> float:
    """Scaled fractional length change |sqrt(N/M) ||Au||/||u|| - 1|."""
    u = np.asarray(u, dtype=float)
    nu = np.linalg.norm(u)
    if nu == 0.0:
        raise ValueError("distortion of the zero vector is undefined")
    return abs(math.sqrt(A.N / A.M) * np.linalg.norm(A.rows @ u) / nu - 1.0)


def _pair_blocks_all(P: int, block: int):
    for i0 in range(0, P, block):
        i1 = min(i0 + block, P)
        for j0 in range(i0, P, block):
            j1 = min(j0 + block, P)
            yield i0, i1, j0, j1


def pointset_distortion(
    A: Projector,
    points: np.ndarray,
    pair_policy: PairPolicy | None = None,
    block: int = 1024,
    keep_samples: bool = False,
) -> DistortionSummary:
    """Worst distortion over chords (displacement vectors) of a point set.

    Streams over blocks of pairs with a running max, never materializing a
    P x P matrix of chords: per block pair, squared chord lengths in the
    ambient and projected spaces come from block Gram products, so the cost
    is O(P^2 (N + M)) time and O(block^2 + block (N + M)) memory.

    Zero-length chords (coincident points) carry no distortion and are
    skipped.  With ``keep_samples`` the per-pair distortions are retained,
    which is only sensible for small scans.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[1] != A.N:
        raise ValueError(f"points must be (P, {A.N}), got {X.shape}")
    P = X.shape[0]
    if P < 2:
        raise ValueError("need at least 2 points")
    if pair_policy is None:
        pair_policy = PairPolicy.all()
    scale = A.N / A.M

    Y = X @ A.rows.T
    xsq = np.einsum("ij,ij->i", X, X)
    ysq = np.einsum("ij,ij->i", Y, Y)

    best = -1.0
    best_pair = (-1, -1)
    n_eval = 0
    collected = [] if keep_samples else None

    def consume(ratio: np.ndarray, rows: np.ndarray, cols: np.ndarray):
        nonlocal best, best_pair, n_eval
        dist = np.abs(np.sqrt(scale * ratio) - 1.0)
        n_eval += dist.size
        if collected is not None:
            collected.append(dist)
        k = int(np.argmax(dist))
        if dist[k] > best:
            best = float(dist[k])
            best_pair = (int(rows[k]), int(cols[k]))

    if pair_policy.kind == "all":
        for i0, i1, j0, j1 in _pair_blocks_all(P, block):
            da = xsq[i0:i1, None] + xsq[None, j0:j1] - 2.0 * (X[i0:i1] @ X[j0:j1].T)
            dp = ysq[i0:i1, None] + ysq[None, j0:j1] - 2.0 * (Y[i0:i1] @ Y[j0:j1].T)
            if i0 == j0:
                iu, ju = np.triu_indices(i1 - i0, k=1, m=j1 - j0)
            else:
                iu, ju = np.indices((i1 - i0, j1 - j0))
                iu, ju = iu.ravel(), ju.ravel()
            num, den = dp[iu, ju], da[iu, ju]
            ok = den > 0.0
            if not np.all(ok):
                num, den, iu, ju = num[ok], den[ok], iu[ok], ju[ok]
            if den.size:
                consume(np.maximum(num, 0.0) / den, iu + i0, ju + j0)
    elif pair_policy.kind == "subsample":
        rng = np.random.default_rng(pair_policy.seed)
        remaining = pair_policy.n_pairs
        while remaining > 0:
            m = min(remaining, block * block)
            ii = rng.integers(0, P, size=m)
            jj = rng.integers(0, P - 1, size=m)
            jj = np.where(jj >= ii, jj + 1, jj)  # uniform over ordered pairs with i != j
            da = xsq[ii] + xsq[jj] - 2.0 * np.einsum("ij,ij->i", X[ii], X[jj])
            dp = ysq[ii] + ysq[jj] - 2.0 * np.einsum("ij,ij->i", Y[ii], Y[jj])
            ok = da > 0.0
            if np.any(ok):
                consume(np.maximum(dp[ok], 0.0) / da[ok], ii[ok], jj[ok])
            remaining -= m
    else:
        raise ValueError(f"unknown pair policy kind {pair_policy.kind!r}")

    samples = np.concatenate(collected) if collected else None
    return DistortionSummary(
        max=best, argmax=best_pair, n_evaluated=n_eval, samples=samples, policy=pair_policy
    )


def subspace_distortion(A: Projector, U: SubspaceBasis) -> float:
    """Worst distortion over all unit vectors of a subspace.

    Equals ``max(sqrt(N/M) s_max - 1, 1 - sqrt(N/M) s_min)`` where s are
    the singular values of A U.
    """
    if U.K > A.M:
        raise ValueError(f"requires K <= M, got K={U.K}, M={A.M}")
    if U.N != A.N:
        raise ValueError(f"ambient dimensions differ: {U.N} vs {A.N}")
    s = np.linalg.svd(A.rows @ U.cols, compute_uv=False)
    scale = math.sqrt(A.N / A.M)
    return max(scale * float(s[0]) - 1.0, 1.0 - scale * float(s[-1]))


def principal_angles(U: SubspaceBasis, U2: SubspaceBasis, keep_factors: bool = False) -> PrincipalAngles:
    """Principal angles between two subspaces of equal dimension.

    Cosines are the singular values of U^T U2, clipped to [0, 1].
    """
    if U.K != U2.K:
        raise ValueError(f"subspace dimensions differ: {U.K} vs {U2.K}")
    if U.N != U2.N:
        raise ValueError(f"ambient dimensions differ: {U.N} vs {U2.N}")
    m = U.cols.T @ U2.cols
    if keep_factors:
        w, s, vt = np.linalg.svd(m)
        return PrincipalAngles(cosines=np.clip(s, 0.0, 1.0), W=w, V=vt.T)
    s = np.linalg.svd(m, compute_uv=False)
    return PrincipalAngles(cosines=np.clip(s, 0.0, 1.0))


@dataclass(frozen=True)
class WeylGapResult:
    """Per-index gaps |sin(phi_a) - sin(phi'_a)| and their certified bound."""

    gaps: np.ndarray
    bound: float

    @property
    def max_gap(self) -> float:
        return float(np.max(self.gaps))


def weyl_gap(A: Projector, U: SubspaceBasis, U2: SubspaceBasis, tol: float = 1e-10) -> WeylGapResult:
    """Certify the singular-value perturbation bound between two subspaces.

    phi_a (phi'_a) are the principal angles between the projection subspace
    and U (U2).  Additive perturbation of singular values gives
    ``|sin(phi_a) - sin(phi'_a)| <= sin(theta_max(U, U2))`` index by index,
    valid only for row-orthonormal projections, which is checked first.

    Raises
    ------
    NumericalBreakdown
        If any gap exceeds the bound beyond ``tol`` (this would mean a
        broken invariant, not a statistical fluctuation).
    """
    if U.K != U2.K:
        raise ValueError(f"subspace dimensions differ: {U.K} vs {U2.K}")
    if U.K > A.M:
        raise ValueError(f"requires K <= M, got K={U.K}, M={A.M}")
    A.check_orthonormal()
    cos_phi = np.clip(np.linalg.svd(A.rows @ U.cols, compute_uv=False), 0.0, 1.0)
    cos_phi2 = np.clip(np.linalg.svd(A.rows @ U2.cols, compute_uv=False), 0.0, 1.0)
    sin_phi = np.sqrt(1.0 - cos_phi**2)
    sin_phi2 = np.sqrt(1.0 - cos_phi2**2)
    gaps = np.abs(np.sort(sin_phi) - np.sort(sin_phi2))
    cos_min = principal_angles(U, U2).cosines[-1]
    bound = math.sqrt(max(0.0, 1.0 - cos_min * cos_min))
    if np.any(gaps > bound + tol):
        raise NumericalBreakdown(
            f"singular-value gap {gaps.max():.3e} exceeds bound {bound:.3e} + {tol:g}"
        )
    return WeylGapResult(gaps=gaps, bound=bound)
