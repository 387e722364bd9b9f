"""Cone guarantee functions and their Monte Carlo verification.

Two constructions reduce "all chords / all tangent planes" statements to
single representatives:

* chordal cone: all chords between two balls of diameter d whose centers
  are x apart lie within angle theta_C = asin(d/x) of the central chord.
  If the central chord's distortion is below
  ``g_C(eps, theta_C) = eps - sqrt(N/M) sin(theta_C)``, every chord in the
  cone has distortion below eps.

* tangential cone: all K-dimensional subspaces within maximal principal
  angle theta_T of a central plane.  The approximate budget is
  ``g_T(eps, theta_T) = eps - (N/M) sin(theta_T)``; the exact form is the
  minimum of two closed-form branches (upper/lower singular value).

Both guarantees are derived in the large-N, small-angle limit, so the
verifiers report violation fractions and margins instead of demanding
exact zero violations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GuaranteeVacuous
from .projections import (
    SubspaceBasis,
    random_subspace,
    sample_projector,
    subspace_distortion,
    vector_distortion,
)
from .seeding import derive_seed

__all__ = [
    "ChordalCone",
    "TangentialCone",
    "VerificationReport",
    "g_chordal",
    "invert_g_chordal",
    "g_tangential",
    "invert_g_tangential",
    "sample_chordal_boundary",
    "sample_tangential_boundary",
    "verify_chordal_guarantee",
    "verify_tangential_guarantee",
]


@dataclass(frozen=True)
class ChordalCone:
    """Cone of chords around a central chord x with half-angle asin(sin_theta)."""

    center: np.ndarray = field(repr=False)
    sin_theta: float

    def __post_init__(self):
        if np.linalg.norm(self.center) == 0.0:
            raise ValueError("cone center must be nonzero")
        if not (0.0 < self.sin_theta <= 1.0):
            raise ValueError(f"sin_theta must be in (0, 1], got {self.sin_theta}")


@dataclass(frozen=True)
class TangentialCone:
    """Subspaces within maximal principal angle asin(sin_theta) of a center."""

    center: SubspaceBasis
    sin_theta: float

    def __post_init__(self):
        if not (0.0 < self.sin_theta <= 1.0):
            raise ValueError(f"sin_theta must be in (0, 1], got {self.sin_theta}")


def _check_eps_nm(eps: float, N: int, M: int):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not (1 <= M <= N):
        raise ValueError(f"need 1 <= M <= N, got M={M}, N={N}")


def g_chordal(eps: float, sin_theta_c: float, N: int, M: int) -> float:
    """Distortion budget at the central chord guaranteeing eps over the cone.

    ``eps - sqrt(N/M) sin(theta_C)``.

    Raises
    ------
    GuaranteeVacuous
        If the budget is not positive: the cone is too wide for this eps
        at this (N, M).
    """
    _check_eps_nm(eps, N, M)
    g = eps - math.sqrt(N / M) * sin_theta_c
    if g <= 0.0:
        raise GuaranteeVacuous(
            f"g_C = {g:.6g} <= 0 at eps={eps}, sin_theta_C={sin_theta_c}, N/M={N / M:.3g}"
        )
    return g


def invert_g_chordal(d: float, sin_theta_c: float, N: int, M: int) -> float:
    """The eps whose chordal budget equals d: ``d + sqrt(N/M) sin(theta_C)``."""
    if not (1 <= M <= N):
        raise ValueError(f"need 1 <= M <= N, got M={M}, N={N}")
    return d + math.sqrt(N / M) * sin_theta_c


def _g_tangential_exact_raw(eps: float, s: float, N: int, M: int) -> float:
    n = N / M
    if n < (1.0 + eps) ** 2:
        raise ValueError(f"exact mode requires N/M >= (1+eps)^2, got N/M={n:.4g}, eps={eps}")
    inside_plus = (1.0 + eps) ** 2 - 2.0 * s * math.sqrt(n * (n - (1.0 + eps) ** 2)) - n * s * s
    inside_minus = (1.0 - eps) ** 2 + 2.0 * s * math.sqrt(n * (n - (1.0 - eps) ** 2)) - n * s * s
    if inside_plus < 0.0 or inside_minus < 0.0:
        raise ValueError(
            f"exact tangential budget undefined (negative square root) at "
            f"eps={eps}, sin_theta_T={s}, N/M={n:.4g}"
        )
    g_plus = math.sqrt(inside_plus) - 1.0
    g_minus = 1.0 - math.sqrt(inside_minus)
    return min(g_plus, g_minus)


def g_tangential(eps: float, sin_theta_t: float, N: int, M: int, mode: str = "approx") -> float:
    """Distortion budget at the central plane guaranteeing eps over the cone.

    ``mode="approx"`` evaluates ``eps - (N/M) sin(theta_T)``, the small
    M/N limit; ``mode="exact"`` evaluates the minimum of the two exact
    singular-value branches, which additionally requires
    ``N/M >= (1+eps)^2`` and raises ValueError when either square root
    goes negative (the budget does not exist there).

    Raises
    ------
    GuaranteeVacuous
        If the budget is not positive.
    """
    _check_eps_nm(eps, N, M)
    if mode == "approx":
        g = eps - (N / M) * sin_theta_t
    elif mode == "exact":
        g = _g_tangential_exact_raw(eps, sin_theta_t, N, M)
    else:
        raise ValueError(f"mode must be 'exact' or 'approx', got {mode!r}")
    if g <= 0.0:
        raise GuaranteeVacuous(
            f"g_T = {g:.6g} <= 0 at eps={eps}, sin_theta_T={sin_theta_t}, N/M={N / M:.3g}"
        )
    return g


def invert_g_tangential(d: float, sin_theta_t: float, N: int, M: int, mode: str = "approx") -> float:
    """The eps whose tangential budget equals d.

    Closed form ``d + (N/M) sin(theta_T)`` in approx mode; bracketed
    bisection to 1e-12 on the exact branches otherwise (the exact budget is
    strictly increasing in eps on its domain).
    """
    if not (1 <= M <= N):
        raise ValueError(f"need 1 <= M <= N, got M={M}, N={N}")
    if mode == "approx":
        return d + (N / M) * sin_theta_t
    if mode != "exact":
        raise ValueError(f"mode must be 'exact' or 'approx', got {mode!r}")
    lo = max(d, 1e-300)
    hi = d + 2.0 * (N / M) * sin_theta_t + 1e-6
    hi = min(hi, math.sqrt(N / M) - 1.0 - 1e-12)  # exact-mode domain ceiling
    if hi <= lo:
        raise ValueError("no exact-mode eps brackets this budget")
    f_lo = _g_tangential_exact_raw(lo, sin_theta_t, N, M) - d
    f_hi = _g_tangential_exact_raw(hi, sin_theta_t, N, M) - d
    if f_lo > 0.0 or f_hi < 0.0:
        raise ValueError("no exact-mode eps brackets this budget")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _g_tangential_exact_raw(mid, sin_theta_t, N, M) - d > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12:
            break
    return 0.5 * (lo + hi)


def sample_chordal_boundary(x: np.ndarray, sin_theta_c: float, seed: int, size: int | None = None) -> np.ndarray:
    """Vectors on the boundary of the chordal cone around x.

    Each draw has exactly the cone angle to x, the same norm as x (the
    distortion depends only on direction, so fixing the norm loses
    nothing), and a uniformly random direction in the orthogonal
    complement.  Returns shape (N,) or (size, N).
    """
    x = np.asarray(x, dtype=float)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ValueError("cone center must be nonzero")
    if not (0.0 <= sin_theta_c <= 1.0):
        raise ValueError(f"sin_theta_c must be in [0, 1], got {sin_theta_c}")
    rng = np.random.default_rng(seed)
    n = 1 if size is None else int(size)
    xhat = x / nx
    g = rng.standard_normal((n, x.size))
    w = g - np.outer(g @ xhat, xhat)
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    cos_t = math.sqrt(1.0 - sin_theta_c**2)
    y = nx * (cos_t * xhat[None, :] + sin_theta_c * w)
    return y[0] if size is None else y


def sample_tangential_boundary(U: SubspaceBasis, sin_theta_t: float, seed: int) -> SubspaceBasis:
    """A subspace with every principal angle to U equal to asin(sin_theta_t).

    Constructs U' = U cos(theta) + V sin(theta) with V a random orthonormal
    frame orthogonal to U, which needs 2K <= N.
    """
    if 2 * U.K > U.N:
        raise ValueError(f"need 2K <= N, got K={U.K}, N={U.N}")
    if not (0.0 <= sin_theta_t <= 1.0):
        raise ValueError(f"sin_theta_t must be in [0, 1], got {sin_theta_t}")
    rng = np.random.default_rng(seed)
    v = _complement_frames(U.cols, rng, 1)[0]
    cos_t = math.sqrt(1.0 - sin_theta_t**2)
    return SubspaceBasis(cols=cos_t * U.cols + sin_theta_t * v)


def _complement_frames(u: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
    """(size, N, K) stack of orthonormal frames orthogonal to the columns of u."""
    n, k = u.shape
    g = rng.standard_normal((size, n, k))
    g -= u @ (u.T @ g)
    q, r = np.linalg.qr(g)
    sign = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    sign[sign == 0] = 1.0
    return q * sign[:, None, :]


@dataclass(frozen=True)
class VerificationReport:
    """Per-trial outcome of a cone-guarantee Monte Carlo test.

    For each trial, ``dist_x`` is the distortion of the central object,
    ``worst_dist_y`` the largest distortion among boundary samples,
    ``g_value`` the budget evaluated at ``worst_dist_y`` (may be <= 0, in
    which case that trial's bound claims nothing and ``vacuous`` is set),
    and ``eps_x`` the inverted budget at ``dist_x``.  A violation means
    ``worst_dist_y > eps_x`` (for the linear budgets this is the same
    condition as ``dist_x < g_value``).
    """

    kind: str
    params: dict
    dist_x: np.ndarray
    worst_dist_y: np.ndarray
    g_value: np.ndarray
    eps_x: np.ndarray
    violated: np.ndarray
    vacuous: np.ndarray

    @property
    def n_trials(self) -> int:
        return len(self.dist_x)

    @property
    def violation_fraction(self) -> float:
        return float(np.mean(self.violated))

    @property
    def margins(self) -> np.ndarray:
        """Slack eps_x - worst_dist_y per trial (negative means violated)."""
        return self.eps_x - self.worst_dist_y

    def to_csv(self, path, preamble=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in preamble:
                fh.write(line + "\n")
            writer = csv.writer(fh)
            writer.writerow(["trial", "dist_x", "worst_dist_y", "g_value", "eps_x", "violated"])
            for t in range(self.n_trials):
                writer.writerow(
                    [
                        t,
                        format(self.dist_x[t], ".17g"),
                        format(self.worst_dist_y[t], ".17g"),
                        format(self.g_value[t], ".17g"),
                        format(self.eps_x[t], ".17g"),
                        int(self.violated[t]),
                    ]
                )


def _chordal_boundary_distortions_reduced(
    a_xhat: np.ndarray, N: int, M: int, sin_t: float, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Distortions of uniform boundary samples, without ambient vectors.

    A boundary draw is y = ||x|| (cos(t) xhat + sin(t) w) with w the
    normalized part of g ~ N(0, I_N) orthogonal to xhat.  Decompose g into
    independent pieces: a = A g ~ N(0, I_M), the component s0 along the
    out-of-span direction of xhat, and the chi^2_(N-M-1) remainder q.
    Everything dist(y) needs is a function of (a, s0, q):

        t       = g.xhat = a.v + w_perp s0,   v = A xhat
        A g_perp = a - t v
        ||g_perp||^2 = ||a - t v||^2 + (s0 - t w_perp)^2 + q

    so the distribution of dist(y) is reproduced exactly at O(M) cost per
    draw instead of O(N M).
    """
    v = a_xhat
    c0_sq = float(v @ v)
    w_perp = math.sqrt(max(0.0, 1.0 - c0_sq))
    cos_t = math.sqrt(1.0 - sin_t * sin_t)

    a = rng.standard_normal((n_samples, M))
    s0 = rng.standard_normal(n_samples)
    dof = N - M - 1
    q = rng.chisquare(dof, size=n_samples) if dof > 0 else np.zeros(n_samples)
    t = a @ v + w_perp * s0
    az = a - np.outer(t, v)
    proj_sq = np.einsum("ij,ij->i", az, az)
    norm_sq = proj_sq + (s0 - t * w_perp) ** 2 + q
    inv_norm = 1.0 / np.sqrt(norm_sq)
    ay_sq = (
        cos_t * cos_t * c0_sq
        + 2.0 * cos_t * sin_t * (az @ v) * inv_norm
        + sin_t * sin_t * proj_sq * inv_norm**2
    )
    return np.abs(np.sqrt((N / M) * np.maximum(ay_sq, 0.0)) - 1.0)


def verify_chordal_guarantee(
    N: int,
    M: int,
    sin_theta_c: float,
    n_boundary: int,
    n_trials: int,
    seed: int,
    sampler: str = "reduced",
    chunk: int = 8192,
) -> VerificationReport:
    """Monte Carlo test of the chordal guarantee.

    Each trial draws a random central chord x and projection A, samples
    ``n_boundary`` chords on the cone boundary, records the worst boundary
    distortion, and checks both directions of the guarantee:
    ``dist(x) >= g_C(worst, theta_C)`` and ``worst <= eps_x`` with
    ``g_C(eps_x, theta_C) = dist(x)``.

    ``sampler="reduced"`` draws the boundary distortions from their exact
    pushforward distribution (fast); ``sampler="ambient"`` materializes
    boundary vectors and projects them (slow, used for cross-validation).
    """
    if n_boundary < 1 or n_trials < 1:
        raise ValueError("n_boundary and n_trials must be >= 1")
    if not (0.0 <= sin_theta_c < 1.0):
        raise ValueError(f"sin_theta_c must be in [0, 1), got {sin_theta_c}")
    if sampler not in ("reduced", "ambient"):
        raise ValueError(f"sampler must be 'reduced' or 'ambient', got {sampler!r}")

    dist_x = np.empty(n_trials)
    worst = np.empty(n_trials)
    for t in range(n_trials):
        rng = np.random.default_rng(derive_seed(seed, ["chordal", t]))
        x = rng.standard_normal(N)
        A = sample_projector(N, M, derive_seed(seed, ["chordal", t, "proj"]))
        dist_x[t] = vector_distortion(A, x)
        xhat = x / np.linalg.norm(x)
        if sampler == "reduced":
            d = _chordal_boundary_distortions_reduced(
                A.rows @ xhat, N, M, sin_theta_c, n_boundary, rng
            )
            worst[t] = float(d.max())
        else:
            w = -np.inf
            done = 0
            while done < n_boundary:
                m = min(chunk, n_boundary - done)
                y = sample_chordal_boundary(
                    x, sin_theta_c, derive_seed(seed, ["chordal", t, "boundary", done]), size=m
                )
                ratios = np.linalg.norm(y @ A.rows.T, axis=1) / np.linalg.norm(y, axis=1)
                w = max(w, float(np.abs(math.sqrt(N / M) * ratios - 1.0).max()))
                done += m
            worst[t] = w

    g_value = worst - math.sqrt(N / M) * sin_theta_c
    eps_x = dist_x + math.sqrt(N / M) * sin_theta_c
    violated = worst > eps_x + 1e-12
    vacuous = g_value <= 0.0
    return VerificationReport(
        kind="chordal",
        params={
            "N": N,
            "M": M,
            "sin_theta_c": sin_theta_c,
            "n_boundary": n_boundary,
            "n_trials": n_trials,
            "seed": seed,
            "sampler": sampler,
        },
        dist_x=dist_x,
        worst_dist_y=worst,
        g_value=g_value,
        eps_x=eps_x,
        violated=violated,
        vacuous=vacuous,
    )


def _tangential_boundary_proj_reduced(
    au: np.ndarray, N: int, M: int, K: int, size: int, rng: np.random.Generator
) -> np.ndarray:
    """(size, M, K) stack of A V for random complement frames V, without
    touching the ambient space.

    For Gaussian G (N x K), the frame is V = G_perp R^{-1} with
    G_perp = (I - U U^T) G and R the positive-diagonal triangular factor of
    G_perp^T G_perp.  Writing B = A - (A U) U^T, the projected frame is
    A V = (B G) R^{-1}, and

        B G           ~  C H,  C = chol(I - (A U)(A U)^T),  H iid M x K
        G_perp^T G_perp = H^T H + W,  W ~ Wishart_K(N - K - M) independent

    (the Wishart term is the part of the complement invisible to A,
    sampled by Bartlett factorization).  This is the exact joint law, at
    O(M^2 K) per draw instead of O(N M K).
    """
    sigma = np.eye(M) - au @ au.T
    c = np.linalg.cholesky(sigma)
    nu = N - K - M
    h = rng.standard_normal((size, M, K))
    bart = np.zeros((size, K, K))
    rows, cols = np.tril_indices(K, -1)
    if rows.size:
        bart[:, rows, cols] = rng.standard_normal((size, rows.size))
    for i in range(K):
        bart[:, i, i] = np.sqrt(rng.chisquare(nu - i, size=size))
    gram = h.transpose(0, 2, 1) @ h + bart @ bart.transpose(0, 2, 1)
    ch = c @ h
    ltri = np.linalg.cholesky(gram)
    # A V = (C H) R^{-1} with R = ltri^T
    return np.linalg.solve(ltri, ch.transpose(0, 2, 1)).transpose(0, 2, 1)


def verify_tangential_guarantee(
    N: int,
    M: int,
    K: int,
    sin_theta_t: float,
    n_boundary: int,
    n_trials: int,
    seed: int,
    mode: str = "approx",
    sampler: str = "reduced",
    chunk: int = 1024,
) -> VerificationReport:
    """Monte Carlo test of the tangential guarantee.

    Each trial draws a random K-dimensional subspace U and projection A,
    samples boundary subspaces with all principal angles equal to the cone
    angle, and checks ``dist(U) >= g_T(worst dist(U'), theta_T)`` via the
    inverted form ``worst <= eps_x``.

    ``sampler="reduced"`` draws the projected boundary frames from their
    exact pushforward law (fast); ``sampler="ambient"`` materializes the
    frames in R^N (slow, used for cross-validation).  The reduced law
    needs N - K - M >= K and falls back to ambient otherwise.
    """
    if not (1 <= K <= M <= N):
        raise ValueError(f"need K <= M <= N, got K={K}, M={M}, N={N}")
    if 2 * K > N:
        raise ValueError(f"need 2K <= N, got K={K}, N={N}")
    if not (0.0 <= sin_theta_t < 1.0):
        raise ValueError(f"sin_theta_t must be in [0, 1), got {sin_theta_t}")
    if sampler not in ("reduced", "ambient"):
        raise ValueError(f"sampler must be 'reduced' or 'ambient', got {sampler!r}")
    if sampler == "reduced" and N - K - M < K:
        sampler = "ambient"

    scale = math.sqrt(N / M)
    cos_t = math.sqrt(1.0 - sin_theta_t**2)
    dist_u = np.empty(n_trials)
    worst = np.empty(n_trials)
    for t in range(n_trials):
        U = random_subspace(N, K, derive_seed(seed, ["tangential", t, "subspace"]))
        A = sample_projector(N, M, derive_seed(seed, ["tangential", t, "proj"]))
        dist_u[t] = subspace_distortion(A, U)
        au = A.rows @ U.cols
        rng = np.random.default_rng(derive_seed(seed, ["tangential", t, "boundary"]))
        w = -np.inf
        done = 0
        while done < n_boundary:
            m = min(chunk, n_boundary - done)
            if sampler == "reduced":
                av = _tangential_boundary_proj_reduced(au, N, M, K, m, rng)
            else:
                frames = _complement_frames(U.cols, rng, m)
                av = np.einsum("mn,snk->smk", A.rows, frames, optimize=True)
            au_prime = cos_t * au[None, :, :] + sin_theta_t * av
            s = np.linalg.svd(au_prime, compute_uv=False)
            d = np.maximum(scale * s[:, 0] - 1.0, 1.0 - scale * s[:, -1])
            w = max(w, float(d.max()))
            done += m
        worst[t] = w

    if mode == "approx":
        g_value = worst - (N / M) * sin_theta_t
        eps_x = dist_u + (N / M) * sin_theta_t
    else:
        g_value = np.array([_g_tangential_exact_raw(w_, sin_theta_t, N, M) for w_ in worst])
        eps_x = np.array([invert_g_tangential(d_, sin_theta_t, N, M, mode="exact") for d_ in dist_u])
    violated = worst > eps_x + 1e-12
    vacuous = g_value <= 0.0
    return VerificationReport(
        kind="tangential",
        params={
            "N": N,
            "M": M,
            "K": K,
            "sin_theta_t": sin_theta_t,
            "n_boundary": n_boundary,
            "n_trials": n_trials,
            "seed": seed,
            "mode": mode,
            "sampler": sampler,
        },
        dist_x=dist_u,
        worst_dist_y=worst,
        g_value=g_value,
        eps_x=eps_x,
        violated=violated,
        vacuous=vacuous,
    )
