"""Empirical harmonic fiber measures, the drift formula for λ(ν),
degree reports, support-gap statistics, and the ball Poisson kernel.

The harmonic measure is approximated by pairs (base, fiber direction):
the reduced endpoint of a Brownian path at the horizon together with the
projective image of a fixed generic wedge vector under the path's
parallel transport, everything expressed in the flat trivialization over
the fundamental domain.  In that trivialization the transport along a
path with deck word w is ρ(w)⁻¹ (moving back from the w-translate chart
into the domain chart), so appending path increments multiplies the
fiber vector on the left by the increment's inverse transport: the fiber
process is a genuine Markov chain and the sampled pairs are stationary
targets for the drift probe.  Convergence is certified only empirically,
by comparing against the half-horizon law; the flag rides on the sample.

λ(ν) is realized as the short-increment drift E[Δ log‖·‖]/Δt started
from the sampled (base, direction) pairs: for a harmonic measure the
cocycle mean is exactly linear in t, so the probe length only trades
variance against nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .brownian import PathConfig, batch_ci, cached_trajectories, sample_trajectories
from .cocycle import Representation, exterior_power_rep, transport_vector
from .geometry import HPoint, SurfaceModel
from .grassmann import DivisorForm, Subspace, plucker_embed
from .lyapunov import batched_transport_vectors, estimate_top, window_letters
from .rng import derived_stream


@dataclass(frozen=True)
class FiberSample:
    """Weighted empirical measure approximating the harmonic measure.

    `points` are unit vectors of Λ^k C^n (rows, projective classes) in
    the fundamental-domain trivialization; `base_points` are the reduced
    path endpoints they sit over.  `half_horizon_discrepancy` compares
    the horizon-T and horizon-T/2 empirical laws through fixed probe
    statistics; `converged` is the corresponding flag, not a proof.
    """

    points: np.ndarray
    base_points: tuple[HPoint, ...]
    weights: np.ndarray
    horizon: float
    n_paths: int
    k: int
    fiber_dim: int
    chart: str
    half_horizon_discrepancy: float
    converged: bool
    v0: np.ndarray
    discarded: int = 0

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=complex)
        if pts.size:
            nrm = np.linalg.norm(pts, axis=1)
            if np.max(np.abs(nrm - 1.0)) > 1e-9:
                raise ValueError("fiber sample points must be unit vectors")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))


@dataclass(frozen=True)
class GapReport:
    min_distance: float
    fraction_below: dict[float, float]
    histogram_counts: tuple[int, ...]
    histogram_edges: tuple[float, ...]


@dataclass(frozen=True)
class DegreeReport:
    """λ(Λ^k)-estimate against π times the configured degree.

    `degree` is the topological degree as a rational; the analytic
    (volume-normalized) degree divides by the surface area, and
    delta_est = lambda_sum_est - pi_deg by construction.
    """

    lambda_sum_est: float
    lambda_ci: float
    degree: Fraction
    degree_analytic: float
    pi_deg: float
    delta_est: float
    support_gap: float
    gap_fraction_near: float
    verdict: str
    warning: str | None
    k: int


GAP_NEAR_EPS = 0.02  # "support touches the divisor" threshold for cross-checks
PROBE_DIRECTIONS = 8


def generic_wedge_vector(n: int, k: int, seed: int = 0) -> np.ndarray:
    """Unit decomposable vector of Λ^k C^n (wedge of a seeded k-plane),
    so transported samples stay on the Grassmannian cone."""
    rng = derived_stream(seed, 13, n, k)
    basis = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return plucker_embed(Subspace.from_spanning(basis)).coords


def inverse_word(word) -> list[int]:
    """Deck word of the inverse element: reversed letters, signs flipped.

    transport(rep, inverse_word(w)) is the matrix inverse of
    transport(rep, w); it is the parallel transport along the path in the
    domain trivialization.
    """
    return [-letter for letter in reversed(list(word))]


def _probe_statistics(points: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Mean |⟨w_j, u⟩|² per probe direction (phase-invariant moments)."""
    return (np.abs(points @ directions.conj().T) ** 2).mean(axis=0)


def sample_fiber_measure(
    rep: Representation,
    surface: SurfaceModel,
    cfg: PathConfig,
    n_paths: int,
    k: int = 1,
    v0: np.ndarray | None = None,
    dim_cap: int = 4096,
) -> FiberSample:
    """Forward-transport sample of the harmonic measure at horizon T.

    Each path contributes ([Λ^k ρ(word)] v0 normalized, reduced endpoint).
    The same words cut at T/2 give the half-horizon law; the discrepancy
    between the two (max over fixed quadratic probe statistics, in units
    of its standard error) drives the non-convergence flag.
    """
    if math.comb(rep.n, k) > dim_cap:
        raise ValueError(f"C({rep.n},{k}) exceeds dimension cap {dim_cap}")
    rep_k = exterior_power_rep(rep, k) if k > 1 else rep
    dim = rep_k.n
    if v0 is None:
        v0 = generic_wedge_vector(rep.n, k, seed=cfg.rng_seed)
    v0 = np.asarray(v0, dtype=complex)
    v0 = v0 / np.linalg.norm(v0)

    summaries = cached_trajectories(surface, cfg, n_paths)
    kept = [s for s in summaries if not s.discarded]
    discarded = n_paths - len(kept)

    pts, _ = batched_transport_vectors(rep_k, [inverse_word(s.word) for s in kept], v0)
    half_pts, _ = batched_transport_vectors(
        rep_k, [inverse_word(window_letters(s, 0.0, cfg.horizon / 2.0)) for s in kept], v0
    )
    bases = [s.endpoint for s in kept]

    dirs_rng = derived_stream(cfg.rng_seed, 17, dim)
    dirs = dirs_rng.standard_normal((PROBE_DIRECTIONS, dim)) + 1j * dirs_rng.standard_normal(
        (PROBE_DIRECTIONS, dim)
    )
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    stat_full = _probe_statistics(pts, dirs)
    stat_half = _probe_statistics(half_pts, dirs)
    # scale: moments are in [0,1]; se of a mean of bounded quantities
    se = 1.0 / math.sqrt(max(len(kept), 2))
    discrepancy = float(np.max(np.abs(stat_full - stat_half)) / se)
    return FiberSample(
        points=pts,
        base_points=tuple(bases),
        weights=np.full(len(kept), 1.0 / max(len(kept), 1)),
        horizon=cfg.horizon,
        n_paths=n_paths,
        k=k,
        fiber_dim=dim,
        chart=f"{surface.name}:basepoint",
        half_horizon_discrepancy=discrepancy,
        converged=discrepancy <= 4.0,
        v0=v0,
        discarded=discarded,
    )


def v0_sensitivity(
    rep: Representation,
    surface: SurfaceModel,
    cfg: PathConfig,
    n_paths: int,
    k: int = 1,
) -> float:
    """Probe-statistic discrepancy between two independent choices of v0
    (reported for reps not asserted strongly irreducible)."""
    a = sample_fiber_measure(rep, surface, cfg, n_paths, k, generic_wedge_vector(rep.n, k, 1))
    b = sample_fiber_measure(rep, surface, cfg, n_paths, k, generic_wedge_vector(rep.n, k, 2))
    dirs_rng = derived_stream(cfg.rng_seed, 17, a.fiber_dim)
    dirs = dirs_rng.standard_normal((PROBE_DIRECTIONS, a.fiber_dim)) + 1j * dirs_rng.standard_normal(
        (PROBE_DIRECTIONS, a.fiber_dim)
    )
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    se = 1.0 / math.sqrt(max(len(a.points), 2))
    return float(
        np.max(np.abs(_probe_statistics(a.points, dirs) - _probe_statistics(b.points, dirs))) / se
    )


def support_divisor_gap(sample: FiberSample, d: DivisorForm) -> GapReport:
    """Distances from the sampled fiber points to the divisor form."""
    if len(sample.points) == 0:
        raise ValueError("empty fiber sample")
    if d.coeffs.shape[0] != sample.fiber_dim:
        raise ValueError("divisor form dimension does not match the sample")
    dists = np.abs(sample.points @ d.coeffs)
    counts, edges = np.histogram(dists, bins=20, range=(0.0, 1.0))
    fractions = {eps: float((dists < eps).mean()) for eps in (1e-3, 1e-2, 0.05, 0.1)}
    return GapReport(
        min_distance=float(dists.min()),
        fraction_below=fractions,
        histogram_counts=tuple(int(c) for c in counts),
        histogram_edges=tuple(float(e) for e in edges),
    )


def lambda_from_measure(
    rep: Representation,
    surface: SurfaceModel,
    sample: FiberSample,
    probe_dt: float = 0.25,
    n_probes: int = 8,
    seed: int | None = None,
    n_batches: int = 20,
    require_converged: bool = True,
) -> tuple[float, float]:
    """Spatial-formula estimate of λ(ν): mean short-increment drift
    E[log‖transport over probe_dt · u‖]/probe_dt over the sampled
    (base, direction) pairs.  Returns (value, 95% CI half-width).
    """
    if require_converged and not sample.converged:
        raise ValueError("fiber sample has not converged; rerun with a longer horizon")
    rep_k = exterior_power_rep(rep, sample.k) if sample.k > 1 else rep
    base_seed = sample.n_paths if seed is None else seed
    m = len(sample.points)
    dt = min(0.01, probe_dt / 10.0)
    per_point = np.zeros(m)
    for probe in range(n_probes):
        cfg = PathConfig(
            dt=dt,
            horizon=probe_dt,
            rng_seed=int(derived_stream(base_seed, 29, probe).integers(2**62)),
        )
        trajs = sample_trajectories(
            surface, cfg, m, starts=list(sample.base_points), track_sup=False
        )
        for i, t in enumerate(trajs):
            if t.word:
                _, log_norm = transport_vector(rep_k, inverse_word(t.word), sample.points[i])
            else:
                log_norm = 0.0
            per_point[i] += log_norm / probe_dt / n_probes
    value = float(per_point.mean())
    return value, batch_ci(per_point, n_batches)


def degree_report(
    rep: Representation,
    surface: SurfaceModel,
    cfg: PathConfig,
    divisor: DivisorForm,
    degree: Fraction,
    n_paths: int,
    k: int | None = None,
    burn_in_fraction: float = 0.1,
    n_batches: int = 20,
) -> DegreeReport:
    """Assemble λ₁+…+λ_k (as λ of the k-th exterior power), the configured
    degree, δ = λ − π·deg, and the support-gap statistic.

    Verdict: equality-plausible when |δ| <= CI, strict-inequality when
    δ > 3·CI, else inconclusive; a warning is attached when the verdict
    disagrees with the geometric side (gap below/above GAP_NEAR_EPS).
    """
    kk = divisor.k if k is None else k
    if kk != divisor.k:
        raise ValueError("divisor form was built for a different codimension")
    rep_k = exterior_power_rep(rep, kk) if kk > 1 else rep
    top = estimate_top(rep_k, surface, cfg, n_paths, burn_in_fraction, n_batches)
    deg_analytic = float(degree) / surface.area
    pi_deg = math.pi * deg_analytic
    delta = top.value - pi_deg
    sample = sample_fiber_measure(rep, surface, cfg, n_paths, kk)
    gap = support_divisor_gap(sample, divisor)

    if abs(delta) <= top.ci_half_width:
        verdict = "equality-plausible"
    elif delta > 3.0 * top.ci_half_width:
        verdict = "strict-inequality"
    else:
        verdict = "inconclusive"

    warning = None
    near = gap.min_distance < GAP_NEAR_EPS
    if verdict == "equality-plausible" and near:
        warning = (
            f"delta is consistent with 0 but the sampled support comes within "
            f"{gap.min_distance:.2e} of the divisor"
        )
    elif verdict == "strict-inequality" and not near:
        warning = (
            f"delta is positive beyond 3 CI but the sampled support stays "
            f"{gap.min_distance:.3f} away from the divisor"
        )
    return DegreeReport(
        lambda_sum_est=top.value,
        lambda_ci=top.ci_half_width,
        degree=degree,
        degree_analytic=deg_analytic,
        pi_deg=pi_deg,
        delta_est=delta,
        support_gap=gap.min_distance,
        gap_fraction_near=gap.fraction_below[1e-2],
        verdict=verdict,
        warning=warning,
        k=kk,
    )


# ---------------------------------------------------------------------------
# the ball Poisson kernel


class DomainError(ValueError):
    """Argument outside the unit ball / sphere."""


def poisson_kernel(z: np.ndarray, u: np.ndarray, n: int) -> float:
    """P(z, u) = (1 - |z|²)^n / |1 - z·ū|^{2n} on the complex n-ball."""
    z = np.asarray(z, dtype=complex).reshape(n)
    u = np.asarray(u, dtype=complex).reshape(n)
    z2 = float(np.real(z @ z.conj()))
    if z2 >= 1.0:
        raise DomainError(f"|z|² = {z2} must be < 1")
    if abs(float(np.real(u @ u.conj())) - 1.0) > 1e-9:
        raise DomainError("u must lie on the unit sphere")
    den = abs(1.0 - complex(z @ u.conj()))
    return (1.0 - z2) ** n / den ** (2 * n)


def _complex_hessian(f, z: np.ndarray, n: int, h: float) -> np.ndarray:
    """∂²f/∂z_j∂z̄_k by central differences in the 2n real coordinates."""
    base = np.concatenate([z.real, z.imag])

    def ev(vec: np.ndarray) -> float:
        return f(vec[:n] + 1j * vec[n:])

    dim = 2 * n
    hess = np.empty((dim, dim))
    f0 = ev(base)
    for p in range(dim):
        ep = np.zeros(dim)
        ep[p] = h
        hess[p, p] = (ev(base + ep) - 2.0 * f0 + ev(base - ep)) / (h * h)
        for q in range(p + 1, dim):
            eq = np.zeros(dim)
            eq[q] = h
            val = (
                ev(base + ep + eq) - ev(base + ep - eq) - ev(base - ep + eq) + ev(base - ep - eq)
            ) / (4.0 * h * h)
            hess[p, q] = hess[q, p] = val
    out = np.empty((n, n), dtype=complex)
    for j in range(n):
        for kk in range(n):
            out[j, kk] = 0.25 * (
                hess[j, kk]
                + hess[n + j, n + kk]
                + 1j * (hess[j, n + kk] - hess[n + j, kk])
            )
    return out


def pluriharmonicity_residual(
    z: np.ndarray, u: np.ndarray, n: int, fd_step: float = 1e-3
) -> tuple[float, float]:
    """(invariant-Laplacian residual, Levi-form norm) of P(·, u) at z.

    The invariant Laplacian is 4(1-|z|²) Σ (δ_jk - z_j z̄_k) ∂²/∂z_j∂z̄_k;
    it annihilates the kernel for every n, while the Levi form ∂∂̄P
    vanishes only for n = 1 (harmonic = pluriharmonic on a curve).
    """
    import warnings as _warnings

    z = np.asarray(z, dtype=complex).reshape(n)
    u = np.asarray(u, dtype=complex).reshape(n)
    if fd_step > 1e-2:
        _warnings.warn("fd_step above 1e-2 is coarse for the curvature scale", stacklevel=2)
    hess = _complex_hessian(lambda w: poisson_kernel(w, u, n), z, n, fd_step)
    weight = np.eye(n) - np.outer(z, z.conj())
    lap = 4.0 * (1.0 - float(np.real(z @ z.conj()))) * np.sum(weight * hess)
    return abs(complex(lap)), float(np.linalg.norm(hess))
