"""Empirical distortion experiments and the projection-count scaling law.

Pipeline: generate one random manifold per parameter point, sample many
random projections, record the worst chord distortion per projection,
extract the distortion achieved with probability 1 - delta, locate the
smallest M whose quantile meets a target (after isotonic smoothing of the
quantile-vs-M curve), and fit the resulting counts against intrinsic
dimension and log volume ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficient, Unachievable
from .manifold import ManifoldSpec
from .projections import DistortionSummary, PairPolicy, sample_projector
from .sampling import sample_manifold, tangent_frames
from .seeding import derive_seed
from . import bounds

__all__ = [
    "ExperimentPoint",
    "MStarResult",
    "FigureTable",
    "spec_for_volume",
    "resolve_pair_policy",
    "distortion_distribution",
    "measure_point",
    "epsilon_at_delta",
    "isotonic_nonincreasing",
    "invert_quantile_curve",
    "m_star_empirical",
    "scaling_fit",
    "figure_data",
]

ALL_PAIRS_MAX_POINTS = 4096
SUBSAMPLE_PAIRS = 10_000_000


def spec_for_volume(K: int, N: int, lnV: float, grid_per_axis: int, ell: float = 1.0) -> ManifoldSpec:
    """Ensemble spec realizing a target log volume ratio.

    The volume ratio is split equally across axes: lam_a = 1 and
    L_a = V^(1/K) (the split is a convention; only the product matters to
    the theory).
    """
    side = math.exp(lnV / K)
    return ManifoldSpec(
        K=K, N=N, ell=ell, lam=(1.0,) * K, L=(side,) * K, grid=(int(grid_per_axis),) * K
    )


def resolve_pair_policy(n_points: int, seed: int) -> PairPolicy:
    """Default chord enumeration: all pairs up to 4096 points, then a
    seeded subsample of 1e7 pairs."""
    if n_points <= ALL_PAIRS_MAX_POINTS:
        return PairPolicy.all()
    return PairPolicy.subsample(SUBSAMPLE_PAIRS, seed)


@dataclass(frozen=True)
class ExperimentPoint:
    """Empirical distortion quantile at one (manifold, M) point."""

    spec: ManifoldSpec
    M: int
    n_proj: int
    eps_quantile: float
    seed: int

    def __post_init__(self):
        if self.eps_quantile < 0:
            raise ValueError("eps_quantile must be nonnegative")
        if self.n_proj < 20:
            raise ValueError("need at least 20 projections for a stable quantile")


@dataclass(frozen=True)
class MStarResult:
    """Smallest projection count meeting a distortion target empirically.

    ``m_star_emp`` interpolates the isotonically smoothed quantile curve in
    (log M, eps) space; ``isotonic_adjusted`` records whether smoothing
    changed the raw quantiles.
    """

    eps_target: float
    delta: float
    M_grid: tuple[int, ...]
    eps_quantiles: np.ndarray
    eps_isotonic: np.ndarray
    m_star_emp: float
    isotonic_adjusted: bool
    seed: int


class _ChordScan:
    """Ambient chord geometry of a fixed point set, reused across projectors.

    Squared chord lengths depend only on the points, so for a projector
    ensemble they are computed once per block of pairs; each projector then
    only pays for its own projected Gram blocks.  Blocks follow the same
    layout as :func:`mfldproj.projections.pointset_distortion`, so for
    point sets that fit one block the per-projector maxima agree bit for
    bit with the general scan.
    """

    def __init__(self, points: np.ndarray, policy: PairPolicy, block: int = 1024):
        self.X = np.asarray(points, dtype=float)
        self.policy = policy
        P = self.X.shape[0]
        xsq = np.einsum("ij,ij->i", self.X, self.X)
        # for the all-pairs policy, blocks hold the upper-triangle indices
        # relative to the block so projected distances per projector come
        # out of one block Gram product; the subsampled policy gathers
        # explicit pair lists instead
        self.gram_blocks = []  # (i0, i1, j0, j1, iu, ju, da[iu, ju])
        self.pair_blocks = []  # (i_idx, j_idx, da)
        if policy.kind == "all":
            for i0 in range(0, P, block):
                i1 = min(i0 + block, P)
                for j0 in range(i0, P, block):
                    j1 = min(j0 + block, P)
                    da = xsq[i0:i1, None] + xsq[None, j0:j1] - 2.0 * (self.X[i0:i1] @ self.X[j0:j1].T)
                    if i0 == j0:
                        iu, ju = np.triu_indices(i1 - i0, k=1, m=j1 - j0)
                    else:
                        iu, ju = np.indices((i1 - i0, j1 - j0))
                        iu, ju = iu.ravel(), ju.ravel()
                    da = da[iu, ju]
                    ok = da > 0.0
                    if not np.all(ok):
                        iu, ju, da = iu[ok], ju[ok], da[ok]
                    self.gram_blocks.append((i0, i1, j0, j1, iu, ju, da))
        else:
            rng = np.random.default_rng(policy.seed)
            remaining = policy.n_pairs
            while remaining > 0:
                m = min(remaining, block * block)
                ii = rng.integers(0, P, size=m)
                jj = rng.integers(0, P - 1, size=m)
                jj = np.where(jj >= ii, jj + 1, jj)
                da = xsq[ii] + xsq[jj] - 2.0 * np.einsum("ij,ij->i", self.X[ii], self.X[jj])
                ok = da > 0.0
                self.pair_blocks.append((ii[ok], jj[ok], da[ok]))
                remaining -= m

    def max_distortion(self, A) -> float:
        scale = A.N / A.M
        Y = self.X @ A.rows.T
        ysq = np.einsum("ij,ij->i", Y, Y)
        best = -1.0
        for i0, i1, j0, j1, iu, ju, da in self.gram_blocks:
            dp = ysq[i0:i1, None] + ysq[None, j0:j1] - 2.0 * (Y[i0:i1] @ Y[j0:j1].T)
            ratio = np.maximum(dp[iu, ju], 0.0) / da
            d = np.abs(np.sqrt(scale * ratio) - 1.0)
            if d.size:
                best = max(best, float(d.max()))
        for ii, jj, da in self.pair_blocks:
            dp = ysq[ii] + ysq[jj] - 2.0 * np.einsum("ij,ij->i", Y[ii], Y[jj])
            ratio = np.maximum(dp, 0.0) / da
            d = np.abs(np.sqrt(scale * ratio) - 1.0)
            if d.size:
                best = max(best, float(d.max()))
        return best


def distortion_distribution(
    spec: ManifoldSpec,
    M: int,
    n_proj: int,
    seed: int,
    pair_policy: PairPolicy | None = None,
    include_frames: bool = False,
) -> DistortionSummary:
    """Worst-chord distortion of one manifold under n_proj random projections.

    One manifold realization per call (seeded from ``seed``); projector i
    uses a child seed independent of ``n_proj``, so growing the ensemble
    extends the sample list without perturbing it.  With
    ``include_frames``, the worst tangent-plane distortion is folded into
    each sample (off by default: the headline experiments measure chords).
    """
    if M > spec.N:
        raise ValueError(f"need M <= N, got M={M}, N={spec.N}")
    sample = sample_manifold(spec, derive_seed(seed, ["manifold"]))
    if pair_policy is None:
        pair_policy = resolve_pair_policy(spec.n_points, derive_seed(seed, ["pairs"]))
    scan = _ChordScan(sample.points, pair_policy)
    frames = tangent_frames(sample) if include_frames else None
    scale = math.sqrt(spec.N / M)
    out = np.empty(n_proj)
    for i in range(n_proj):
        A = sample_projector(spec.N, M, derive_seed(seed, ["proj", i]))
        worst = scan.max_distortion(A)
        if frames is not None:
            au = np.einsum("mn,pnk->pmk", A.rows, frames.bases, optimize=True)
            s = np.linalg.svd(au, compute_uv=False)
            worst = max(worst, float(np.max(np.maximum(scale * s[:, 0] - 1.0, 1.0 - scale * s[:, -1]))))
        out[i] = worst
    k = int(np.argmax(out))
    return DistortionSummary(
        max=float(out[k]), argmax=("projector", k), n_evaluated=n_proj, samples=out, policy=pair_policy
    )


def measure_point(
    spec: ManifoldSpec,
    M: int,
    n_proj: int,
    delta: float,
    seed: int,
    pair_policy: PairPolicy | None = None,
) -> ExperimentPoint:
    """One grid point of the empirical pipeline: distortion distribution
    plus its 1 - delta quantile."""
    summary = distortion_distribution(spec, M, n_proj, seed, pair_policy=pair_policy)
    return ExperimentPoint(
        spec=spec, M=M, n_proj=n_proj, eps_quantile=epsilon_at_delta(summary, delta), seed=seed
    )


def epsilon_at_delta(summary: DistortionSummary, delta: float) -> float:
    """Smallest distortion level achieved with probability >= 1 - delta.

    The ceil((1-delta) n)-th order statistic of the samples: the smallest
    value eps with #(samples <= eps)/n >= 1 - delta.
    """
    if summary.samples is None:
        raise ValueError("summary does not retain samples")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    n = len(summary.samples)
    if n < math.ceil(1.0 / delta):
        raise ValueError(f"need at least ceil(1/delta) = {math.ceil(1.0 / delta)} samples, got {n}")
    k = math.ceil((1.0 - delta) * n)
    return float(np.sort(summary.samples)[k - 1])


def isotonic_nonincreasing(y: np.ndarray) -> np.ndarray:
    """Least-squares nonincreasing fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    levels = []  # (value, weight) blocks
    for v in y:
        levels.append([v, 1.0])
        while len(levels) > 1 and levels[-2][0] < levels[-1][0]:
            v1, w1 = levels.pop()
            v0, w0 = levels.pop()
            levels.append([(v0 * w0 + v1 * w1) / (w0 + w1), w0 + w1])
    out = np.empty_like(y)
    pos = 0
    for v, w in levels:
        out[pos : pos + int(w)] = v
        pos += int(w)
    return out


def invert_quantile_curve(M_grid, eps_q, eps_target: float) -> tuple[float, np.ndarray, bool]:
    """Smallest M with (smoothed) quantile <= target.

    Applies the nonincreasing isotonic fit (raw quantile curves wiggle at
    finite projector counts), then interpolates linearly in (log M, eps):
    the quantile scales like M^(-1/2), which is near-linear there.

    Returns (m_star, smoothed curve, whether smoothing changed anything).

    Raises
    ------
    Unachievable
        If even the largest M leaves the quantile above the target.
    """
    M_grid = np.asarray(M_grid, dtype=float)
    eps_q = np.asarray(eps_q, dtype=float)
    if M_grid.ndim != 1 or len(M_grid) < 2 or np.any(np.diff(M_grid) <= 0):
        raise ValueError("M_grid must be sorted ascending with at least 2 entries")
    iso = isotonic_nonincreasing(eps_q)
    adjusted = bool(np.any(iso != eps_q))
    if iso[-1] > eps_target:
        raise Unachievable(
            f"quantile {iso[-1]:.4g} at the largest M={int(M_grid[-1])} exceeds target {eps_target}"
        )
    j = int(np.argmax(iso <= eps_target))
    if j == 0:
        return float(M_grid[0]), iso, adjusted
    lm0, lm1 = math.log(M_grid[j - 1]), math.log(M_grid[j])
    e0, e1 = iso[j - 1], iso[j]
    frac = (e0 - eps_target) / (e0 - e1)
    return float(math.exp(lm0 + frac * (lm1 - lm0))), iso, adjusted


def m_star_empirical(
    spec: ManifoldSpec,
    eps_target: float,
    delta: float,
    M_grid,
    n_proj: int,
    seed: int,
    pair_policy: PairPolicy | None = None,
    threads: int = 1,
) -> MStarResult:
    """Empirical minimum projection count for a distortion target.

    Computes the 1 - delta distortion quantile at every M in the grid
    (fresh projector ensembles per M, all derived from ``seed``), smooths
    the curve isotonically, and interpolates in (log M, eps).  Grid points
    are independent jobs; with ``threads > 1`` they run on a thread pool,
    with identical results for any thread count.
    """
    M_grid = tuple(int(m) for m in M_grid)

    def point_at(M: int) -> ExperimentPoint:
        return measure_point(
            spec, M, n_proj, delta, derive_seed(seed, ["M", M]), pair_policy=pair_policy
        )

    if threads > 1 and len(M_grid) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(point_at, M_grid))
    else:
        points = [point_at(M) for M in M_grid]
    quantiles = np.array([p.eps_quantile for p in points])
    m_star, iso, adjusted = invert_quantile_curve(M_grid, quantiles, eps_target)
    return MStarResult(
        eps_target=eps_target,
        delta=delta,
        M_grid=M_grid,
        eps_quantiles=quantiles,
        eps_isotonic=iso,
        m_star_emp=m_star,
        isotonic_adjusted=adjusted,
        seed=seed,
    )


def scaling_fit(results) -> tuple[float, float, np.ndarray]:
    """Least-squares coefficients (a, b) of M* = (a lnV + b K) / eps^2.

    ``results`` is an iterable of (K, lnV, eps, m_star_emp) tuples; the fit
    regresses m_star * eps^2 on (lnV, K) through the origin and returns
    the coefficients with per-point residuals.

    Raises
    ------
    RankDeficient
        If the (lnV, K) design has rank below 2.
    """
    rows = list(results)
    if len(rows) < 2:
        raise RankDeficient("need at least 2 points to fit two coefficients")
    X = np.array([[lnV, K] for (K, lnV, _, _) in rows], dtype=float)
    y = np.array([m * eps * eps for (_, _, eps, m) in rows], dtype=float)
    if np.linalg.matrix_rank(X) < 2:
        raise RankDeficient("parameter points do not span independent (lnV, K) directions")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    residuals = y - X @ coef
    return float(coef[0]), float(coef[1]), residuals


@dataclass(frozen=True)
class FigureTable:
    """Column-oriented data behind one figure, with its parameter echo."""

    kind: str
    columns: dict[str, np.ndarray]
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(next(iter(self.columns.values())))


# Volume convention of the ambient-dimension sweep: V = (10 sqrt(2)/3)^K.
LNV_PER_K_DEFAULT = math.log(10.0 * math.sqrt(2.0) / 3.0)

_FIG_DEFAULTS = {
    "fig4": {"N": 1000, "L": 10.0, "lam": 1.0, "n_grid": 1024, "ell": 1.0},
    "fig5": {"N": 200, "L": (12.0, 20.0), "lam": (1.0, 1.8), "n_grid": (64, 64), "ell": 1.0},
    "fig6a": {
        "N": 1000,
        "eps_target": 0.2,
        "delta": 0.05,
        "K_values": (1, 2),
        "lnV_over_K": (1.0, LNV_PER_K_DEFAULT, 2.2),
        "M_grid": (4, 6, 10, 16, 25, 40, 63, 100, 158, 200),
        "n_proj": 100,
        "grid_per_axis": {1: 512, 2: 32},
    },
    "fig6b": {
        "eps_target": 0.2,
        "delta": 0.05,
        "K_values": (1,),
        "N_values": (200, 500, 1000, 2000),
        "M_grid": (4, 6, 10, 16, 25, 40, 63, 100, 158, 200),
        "n_proj": 100,
        "grid_per_axis": {1: 512, 2: 32},
    },
}


def _merge_params(kind: str, params: dict | None) -> dict:
    if kind not in _FIG_DEFAULTS:
        raise ValueError(f"unknown figure kind {kind!r}; expected one of {sorted(_FIG_DEFAULTS)}")
    merged = dict(_FIG_DEFAULTS[kind])
    for key, val in (params or {}).items():
        if key not in merged:
            raise ValueError(f"unknown parameter {key!r} for {kind}; allowed: {sorted(merged)}")
        merged[key] = val
    return merged


def figure_data(kind: str, params: dict | None = None, seed: int = 0) -> FigureTable:
    """Empirical-versus-theory tables behind the headline figures.

    fig4: random curve (K=1), chord lengths and signed tangent cosines
    against the central grid point, with their expected curves.
    fig5: random surface (K=2), chord lengths and principal-angle cosines
    against the central grid point, with their expected curves.
    fig6a: empirical and analytic projection counts while varying the
    volume ratio at fixed N.
    fig6b: the same while varying N at fixed volume per dimension.
    """
    p = _merge_params(kind, params)
    if kind == "fig4":
        return _fig4(p, seed)
    if kind == "fig5":
        return _fig5(p, seed)
    if kind == "fig6a":
        return _fig6(p, seed, vary="lnV")
    return _fig6(p, seed, vary="N")


def _fig4(p: dict, seed: int) -> FigureTable:
    from .manifold import expected_chord_sq, expected_tangent_cosine

    spec = ManifoldSpec(
        K=1, N=int(p["N"]), ell=p["ell"], lam=(p["lam"],), L=(p["L"],), grid=(int(p["n_grid"]),)
    )
    sample = sample_manifold(spec, derive_seed(seed, ["fig4", "manifold"]))
    frames = tangent_frames(sample)
    center = spec.n_points // 2
    sig = sample.sigma_axes[0]
    rho = ((sig - sig[center]) / spec.lam[0]) ** 2
    diffs = sample.points - sample.points[center]
    chord_emp = np.einsum("ij,ij->i", diffs, diffs)
    tc = frames.derivs[:, 0, :]
    norms = np.linalg.norm(tc, axis=1)
    cos_emp = (tc @ tc[center]) / (norms * norms[center])
    keep = np.arange(spec.n_points) != center
    return FigureTable(
        kind="fig4",
        columns={
            "rho": rho[keep],
            "chord_sq_emp": chord_emp[keep],
            "chord_sq_theory": np.array([expected_chord_sq(r, spec.ell) for r in rho[keep]]),
            "tangent_cos_emp": cos_emp[keep],
            "tangent_cos_theory": np.array([expected_tangent_cosine(r) for r in rho[keep]]),
            "boundary": frames.boundary[keep].astype(float),
        },
        params={**p, "seed": seed},
    )


def _fig5(p: dict, seed: int) -> FigureTable:
    from .manifold import expected_chord_sq, expected_principal_cosines

    n1, n2 = (int(v) for v in p["n_grid"])
    spec = ManifoldSpec(
        K=2, N=int(p["N"]), ell=p["ell"], lam=tuple(p["lam"]), L=tuple(p["L"]), grid=(n1, n2)
    )
    sample = sample_manifold(spec, derive_seed(seed, ["fig5", "manifold"]))
    frames = tangent_frames(sample)
    center = np.ravel_multi_index((n1 // 2, n2 // 2), spec.grid)
    mesh = np.meshgrid(*sample.sigma_axes, indexing="ij")
    sig = np.stack([m.ravel() for m in mesh], axis=-1)
    d = (sig - sig[center]) / np.asarray(spec.lam)
    rho = np.einsum("ij,ij->i", d, d)
    diffs = sample.points - sample.points[center]
    chord_emp = np.einsum("ij,ij->i", diffs, diffs)
    cross = np.einsum("nk,pnl->pkl", frames.bases[center], frames.bases, optimize=True)
    cos_emp = np.clip(np.linalg.svd(cross, compute_uv=False), 0.0, 1.0)
    theory = np.stack([np.sort(expected_principal_cosines(r, 2))[::-1] for r in rho])
    keep = np.arange(spec.n_points) != center
    return FigureTable(
        kind="fig5",
        columns={
            "rho": rho[keep],
            "chord_sq_emp": chord_emp[keep],
            "chord_sq_theory": np.array([expected_chord_sq(r, spec.ell) for r in rho[keep]]),
            "cos1_emp": cos_emp[keep, 0],
            "cos2_emp": cos_emp[keep, 1],
            "cos1_theory": theory[keep, 0],
            "cos2_theory": theory[keep, 1],
            "boundary": frames.boundary[keep].astype(float),
        },
        params={**p, "seed": seed},
    )


def _fig6(p: dict, seed: int, vary: str) -> FigureTable:
    eps, delta = float(p["eps_target"]), float(p["delta"])
    rows = {
        k: []
        for k in ("K", "lnV", "N", "eps_target", "delta", "m_star_emp", "m_star_new", "m_star_bw", "m_star_nv")
    }
    if vary == "lnV":
        points = [
            (K, float(r) * K, int(p["N"]))
            for K in p["K_values"]
            for r in p["lnV_over_K"]
        ]
    else:
        points = [
            (K, LNV_PER_K_DEFAULT * K, int(N))
            for K in p["K_values"]
            for N in p["N_values"]
        ]
    for K, lnV, N in points:
        grid = p["grid_per_axis"][K] if isinstance(p["grid_per_axis"], dict) else p["grid_per_axis"]
        spec = spec_for_volume(K, N, lnV, grid)
        res = m_star_empirical(
            spec,
            eps,
            delta,
            [m for m in p["M_grid"] if m <= N],
            int(p["n_proj"]),
            derive_seed(seed, ["fig6", K, f"{lnV:.6f}", N]),
        )
        rows["K"].append(K)
        rows["lnV"].append(lnV)
        rows["N"].append(N)
        rows["eps_target"].append(eps)
        rows["delta"].append(delta)
        rows["m_star_emp"].append(res.m_star_emp)
        rows["m_star_new"].append(bounds.m_star_bound(eps, delta, K, N, lnV))
        rows["m_star_bw"].append(bounds.bw_underestimate(eps, delta, K, N, lnV))
        rows["m_star_nv"].append(bounds.nv_underestimate(eps, delta, K, lnV))
    return FigureTable(
        kind="fig6a" if vary == "lnV" else "fig6b",
        columns={k: np.asarray(v, dtype=float) for k, v in rows.items()},
        params={**p, "seed": seed},
    )
