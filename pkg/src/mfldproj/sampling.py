"""Grid realizations of the Gaussian-process embedding and their geometry.

Each ambient coordinate of the embedding is an independent draw from a
stationary Gaussian process on a regular intrinsic grid, with covariance
``(ell^2/N) exp(-rho/2)``.  The kernel factorizes across intrinsic axes,
so a realization is obtained from per-axis Cholesky factors applied along
each grid axis (Kronecker structure): cost O(sum_a n_a^3) for the factors
plus O(P N sum_a n_a) to apply them, never O(P^3).

Also provided: concentration audits of the squared point norms, empirical
chord lengths, finite-difference tangent frames orthonormalized under the
empirical induced metric, and principal angles between those frames.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBreakdown
from .manifold import ManifoldSpec

__all__ = [
    "ManifoldSample",
    "TangentFrames",
    "SelfAveragingAudit",
    "sample_manifold",
    "grid_axes",
    "self_averaging_audit",
    "empirical_chord_sq",
    "tangent_frames",
    "empirical_principal_angles",
    "empirical_tangent_cosine",
    "save_sample",
    "load_sample",
]

_JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
_MAGIC = b"MFLD"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ManifoldSample:
    """One realization of the embedding on the intrinsic grid.

    ``points[p, i]`` is ambient coordinate i of grid point p, with p the
    row-major (C-order) flattening of the grid indices.  Identical
    (spec, seed) reproduce identical points bit for bit.  Arrays are
    read-only; a sample is safe to share.
    """

    spec: ManifoldSpec
    sigma_axes: tuple[np.ndarray, ...]
    points: np.ndarray = field(repr=False)
    seed: int

    def __post_init__(self):
        if self.points.shape != (self.spec.n_points, self.spec.N):
            raise ValueError(
                f"points must be {(self.spec.n_points, self.spec.N)}, got {self.points.shape}"
            )
        if not np.all(np.isfinite(self.points)):
            raise ValueError("sample contains non-finite values")
        self.points.flags.writeable = False
        for ax in self.sigma_axes:
            ax.flags.writeable = False

    def grid_index(self, p: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(p, self.spec.grid))

    def sigma(self, p: int) -> np.ndarray:
        idx = self.grid_index(p)
        return np.array([ax[i] for ax, i in zip(self.sigma_axes, idx)])


def grid_axes(spec: ManifoldSpec) -> tuple[np.ndarray, ...]:
    """Evenly spaced intrinsic coordinates covering [0, L_a) per axis."""
    return tuple(np.arange(n) * (L / n) for n, L in zip(spec.grid, spec.L))


def _chol_with_jitter(corr: np.ndarray, jitters=_JITTERS) -> np.ndarray:
    """Cholesky factor of a unit-diagonal correlation matrix, with jitter.

    Squared-exponential correlation matrices on fine grids are numerically
    rank-deficient, so a relative diagonal jitter is always added, starting
    at the smallest value and escalating tenfold on failure.
    """
    for j in jitters:
        try:
            return np.linalg.cholesky(corr + j * np.eye(corr.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise NumericalBreakdown(
        f"covariance factorization failed even at jitter {jitters[-1]:g}"
    )


def _apply_along_axis(mat: np.ndarray, z: np.ndarray, axis: int) -> np.ndarray:
    """Matrix-multiply ``mat`` onto tensor ``z`` along one axis."""
    z = np.moveaxis(z, axis, 0)
    head = z.shape[0]
    out = mat @ z.reshape(head, -1)
    out = out.reshape((mat.shape[0],) + z.shape[1:])
    return np.moveaxis(out, 0, axis)


def sample_manifold(spec: ManifoldSpec, seed: int) -> ManifoldSample:
    """Draw one realization of the random embedding on the grid.

    Each ambient coordinate is an independent zero-mean Gaussian process
    with covariance ``(ell^2/N) exp(-rho/2)``; the per-axis correlation
    factors ``exp(-(ds/lam_a)^2 / 2)`` are Cholesky-factorized separately
    and applied along the corresponding grid axes.

    Raises
    ------
    NumericalBreakdown
        If a per-axis factorization fails after jitter escalation.
    """
    axes = grid_axes(spec)
    factors = []
    for ax, lam in zip(axes, spec.lam):
        d = (ax[:, None] - ax[None, :]) / lam
        corr = np.exp(-0.5 * d * d)
        factors.append(_chol_with_jitter(corr))
    rng = np.random.default_rng(int(seed))
    z = rng.standard_normal(spec.grid + (spec.N,))
    for a, f in enumerate(factors):
        z = _apply_along_axis(f, z, a)
    pts = (spec.ell / math.sqrt(spec.N)) * z.reshape(spec.n_points, spec.N)
    return ManifoldSample(
        spec=spec, sigma_axes=axes, points=np.ascontiguousarray(pts), seed=int(seed)
    )


@dataclass(frozen=True)
class SelfAveragingAudit:
    """Concentration of the squared point norms at ell^2.

    Sums over the N ambient coordinates are self-averaging: for each grid
    point ``||phi||^2`` is an ell^2/N-scaled chi-square with N degrees of
    freedom, so its relative standard deviation is sqrt(2/N).
    """

    sq_norms: np.ndarray = field(repr=False)
    mean: float
    rel_sd: float
    expected_mean: float
    expected_rel_sd: float


def self_averaging_audit(sample: ManifoldSample) -> SelfAveragingAudit:
    sq = np.einsum("ij,ij->i", sample.points, sample.points)
    mean = float(sq.mean())
    rel_sd = float(sq.std() / mean) if mean > 0 else math.inf
    return SelfAveragingAudit(
        sq_norms=sq,
        mean=mean,
        rel_sd=rel_sd,
        expected_mean=sample.spec.ell**2,
        expected_rel_sd=math.sqrt(2.0 / sample.spec.N),
    )


def _check_index(p: int, n: int):
    if not (0 <= p < n):
        raise IndexError(f"point index {p} out of range [0, {n})")


def empirical_chord_sq(sample: ManifoldSample, i: int, j: int) -> float:
    """Squared Euclidean chord length between grid points i and j."""
    _check_index(i, sample.spec.n_points)
    _check_index(j, sample.spec.n_points)
    d = sample.points[i] - sample.points[j]
    return float(d @ d)


@dataclass(frozen=True)
class TangentFrames:
    """Finite-difference tangent data at every grid point.

    ``derivs[p, a, :]`` is the raw derivative of the embedding along
    intrinsic axis a; ``metric[p]`` the empirical induced metric
    ``derivs derivs^T``; ``bases[p]`` an N x K column-orthonormal basis of
    the tangent plane obtained by applying the inverse metric square root
    (the empirical vielbein) to the derivatives.  ``boundary[p]`` flags
    points within one stencil of a grid edge, where the derivative is
    one-sided and should be excluded from statistical checks.
    """

    spec: ManifoldSpec
    derivs: np.ndarray = field(repr=False)
    bases: np.ndarray = field(repr=False)
    metric: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.derivs, self.bases, self.metric, self.boundary):
            arr.flags.writeable = False


def _gradient_order4(values: np.ndarray, spacing: float, axis: int) -> np.ndarray:
    """Fourth-order central differences, falling back to np.gradient near edges."""
    out = np.gradient(values, spacing, axis=axis)
    n = values.shape[axis]
    if n >= 5:
        sl = [slice(None)] * values.ndim

        def shifted(k):
            sl2 = list(sl)
            sl2[axis] = slice(2 + k, n - 2 + k)
            return values[tuple(sl2)]

        interior = (-shifted(2) + 8.0 * shifted(1) - 8.0 * shifted(-1) + shifted(-2)) / (12.0 * spacing)
        sl_out = list(sl)
        sl_out[axis] = slice(2, n - 2)
        out[tuple(sl_out)] = interior
    return out


def tangent_frames(sample: ManifoldSample, scheme: int = 2) -> TangentFrames:
    """Tangent frames by finite differences of the gridded embedding.

    ``scheme`` is the central-difference order (2 or 4).  Interior points
    use the centered stencil; edge points fall back to one-sided
    differences and are flagged as boundary.

    Raises
    ------
    NumericalBreakdown
        If the empirical metric is singular at some point.
    """
    spec = sample.spec
    if scheme not in (2, 4):
        raise ValueError(f"scheme must be 2 or 4, got {scheme}")
    pad = scheme // 2
    if any(n < 2 * pad + 1 for n in spec.grid):
        raise ValueError(f"need at least {2 * pad + 1} points per axis for scheme {scheme}")
    values = sample.points.reshape(spec.grid + (spec.N,))
    derivs = np.empty((spec.K,) + spec.grid + (spec.N,))
    for a in range(spec.K):
        spacing = spec.L[a] / spec.grid[a]
        if scheme == 2:
            derivs[a] = np.gradient(values, spacing, axis=a)
        else:
            derivs[a] = _gradient_order4(values, spacing, axis=a)
    derivs = np.moveaxis(derivs.reshape((spec.K, spec.n_points, spec.N)), 0, 1)

    metric = np.einsum("pan,pbn->pab", derivs, derivs)
    w, Q = np.linalg.eigh(metric)
    if np.any(w <= 1e-12 * w[:, -1:].clip(min=np.finfo(float).tiny)):
        raise NumericalBreakdown("singular empirical metric in tangent frames")
    inv_sqrt = np.einsum("pab,pb,pcb->pac", Q, 1.0 / np.sqrt(w), Q)
    bases = np.einsum("pab,pbn->pna", inv_sqrt, derivs)

    boundary = np.zeros(spec.grid, dtype=bool)
    for a, n in enumerate(spec.grid):
        sl = [slice(None)] * spec.K
        sl[a] = np.r_[0:pad, n - pad : n]
        boundary[tuple(sl)] = True
    return TangentFrames(
        spec=spec,
        derivs=np.ascontiguousarray(derivs),
        bases=np.ascontiguousarray(bases),
        metric=np.ascontiguousarray(metric),
        boundary=boundary.reshape(spec.n_points),
    )


def empirical_principal_angles(frames: TangentFrames, i: int, j: int) -> np.ndarray:
    """Cosines of principal angles between tangent planes at points i and j.

    Singular values of U_i^T U_j, sorted descending and clipped to [0, 1];
    invariant under right-orthogonal changes of either basis.
    """
    n = frames.spec.n_points
    _check_index(i, n)
    _check_index(j, n)
    s = np.linalg.svd(frames.bases[i].T @ frames.bases[j], compute_uv=False)
    return np.clip(s, 0.0, 1.0)


def empirical_tangent_cosine(frames: TangentFrames, i: int, j: int) -> float:
    """Signed cosine between raw tangent vectors of a curve (K = 1 only)."""
    if frames.spec.K != 1:
        raise ValueError("signed tangent cosine is defined for curves (K = 1) only")
    n = frames.spec.n_points
    _check_index(i, n)
    _check_index(j, n)
    ti = frames.derivs[i, 0]
    tj = frames.derivs[j, 0]
    return float(ti @ tj / (np.linalg.norm(ti) * np.linalg.norm(tj)))


def save_sample(sample: ManifoldSample, path) -> None:
    """Write a sample to the binary dump format.

    Layout (all little-endian): magic ``b"MFLD"``, uint32 version, uint32
    K, uint32 N, K x uint64 grid shape, float64 ell, K x float64 lam,
    K x float64 L, uint64 seed, then the P x N float64 points row-major.
    """
    spec = sample.spec
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<III", _FORMAT_VERSION, spec.K, spec.N))
    buf.write(struct.pack(f"<{spec.K}Q", *spec.grid))
    buf.write(struct.pack("<d", spec.ell))
    buf.write(struct.pack(f"<{spec.K}d", *spec.lam))
    buf.write(struct.pack(f"<{spec.K}d", *spec.L))
    buf.write(struct.pack("<Q", sample.seed))
    buf.write(np.ascontiguousarray(sample.points, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_sample(path) -> ManifoldSample:
    """Read a sample written by :func:`save_sample`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise ValueError("not a manifold sample dump (bad magic)")
    off = 4
    version, K, N = struct.unpack_from("<III", raw, off)
    off += 12
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported dump version {version}")
    grid = struct.unpack_from(f"<{K}Q", raw, off)
    off += 8 * K
    (ell,) = struct.unpack_from("<d", raw, off)
    off += 8
    lam = struct.unpack_from(f"<{K}d", raw, off)
    off += 8 * K
    L = struct.unpack_from(f"<{K}d", raw, off)
    off += 8 * K
    (seed,) = struct.unpack_from("<Q", raw, off)
    off += 8
    spec = ManifoldSpec(K=K, N=N, ell=ell, lam=lam, L=L, grid=grid)
    pts = np.frombuffer(raw[off:], dtype="<f8").reshape(spec.n_points, spec.N).copy()
    return ManifoldSample(spec=spec, sigma_axes=grid_axes(spec), points=pts, seed=seed)
