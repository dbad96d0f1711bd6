"""Hyperbolic Brownian motion with fundamental-domain tracking.

On the half-plane the Laplace-Beltrami operator is y²(∂²_x + ∂²_y), so
the Δ/2-diffusion solves dx = y dB¹, dy = y dB².  The ordinate equation
is closed and is integrated exactly over a step:

    y' = y · exp(√dt ξ₂ − dt/2)

(the driftless geometric law; E[y'] = y, E[log y'] − log y = −dt/2).
The abscissa uses the geometric mean of the two ordinates as the
quadrature point, x' = x + √(y y') √dt ξ₁ — the only approximated piece.

Trajectories are reduced to the fundamental domain on the fly: a step
that exits is bisected in time to localize the first crossing, the
exit side's pairing map re-enters the point, and the deck word picks up
the corresponding inverse-generator letter.  Applying the recorded
word's Möbius product to the reduced endpoint reproduces the unreduced
endpoint by construction.

Each trajectory consumes noise from its own counter-based stream keyed
by (seed, trajectory index): results are reproducible for a fixed seed
and index no matter how many trajectories run or in what order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import BOUNDARY_TOL, HPoint, SurfaceModel, locate
from .rng import trajectory_stream

_NOISE_BLOCK = 512  # steps drawn per stream request in the batch kernel


class CrossingError(RuntimeError):
    """A domain crossing could not be localized within the refinement cap."""


class CuspTrapError(RuntimeError):
    """Adaptive time step collapsed below dt·2^-20 in a cusp excursion."""


@dataclass(frozen=True)
class PathConfig:
    """Time discretization and reproducibility knobs for one experiment."""

    dt: float
    horizon: float
    max_substep_refinements: int = 20
    rng_seed: int = 0
    cusp_y_cap: float = 50.0

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon < 0.0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")
        if self.horizon and self.horizon < self.dt:
            raise ValueError("horizon must be at least one dt")
        if self.max_substep_refinements < 0:
            raise ValueError("refinement count must be nonnegative")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class TrajectorySummary:
    """One Brownian run: deck word (with crossing times), reduced endpoint,
    elapsed time and the sup over steps of hyperbolic displacement of the
    unreduced path from its start."""

    word: tuple[int, ...]
    word_times: tuple[float, ...]
    endpoint: HPoint
    elapsed: float
    sup_displacement: float
    discarded: bool = False


def step(p: HPoint, dt: float, noise: tuple[float, float]) -> HPoint:
    """One exact-in-y Euler step from p with standard normal draws noise."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    xi1, xi2 = noise
    y2 = p.y * math.exp(math.sqrt(dt) * xi2 - dt / 2.0)
    x2 = p.x + math.sqrt(p.y * y2) * math.sqrt(dt) * xi1
    return HPoint(x2, y2)


def _start_frame_inv(start: HPoint) -> tuple[float, float, float, float]:
    """Inverse of the SL(2,R) matrix sending i to start."""
    s = math.sqrt(start.y)
    return 1.0 / s, -start.x / s, 0.0, s


def deck_displacement(c1, c2, c3, c4, x, y):
    """d(start, M·(x, y)) where (c1..c4) = B⁻¹M, B the frame of start.

    Uses cosh d(i, g·i) = ‖g‖_F²/2 for unimodular g, which stays stable
    for deck matrices far too large for direct coordinate evaluation.
    """
    u = x * c1 + c2
    v = x * c3 + c4
    arg = 0.5 * (y * (c1 * c1 + c3 * c3) + (u * u + v * v) / y)
    return np.arccosh(np.maximum(arg, 1.0))


def _first_outside(table, x, y):
    """Index of the first side separating (x, y) from the basepoint, or -1."""
    for i, (is_circle, pos, rad2, sign, _, _) in enumerate(table):
        if is_circle:
            dx = x - pos
            v = dx * dx + y * y - rad2
        else:
            v = x - pos
        if v * sign < -BOUNDARY_TOL:
            return i
    return -1


def _handle_crossings(surface, x0, y0, x2, y2, xi1, xi2, dt, t_base, refinements, word, times):
    """Re-enter the domain after the proposed step left it.

    Bisects the interpolated step to localize the first crossing side,
    applies that side's pairing to the step endpoint, and repeats while
    the mapped endpoint is still outside (multi-crossing steps).
    """
    table = surface.side_table
    sq = math.sqrt
    ex = math.exp
    first = True
    for _ in range(32):
        exit_side = _first_outside(table, x2, y2)
        if exit_side < 0:
            return x2, y2
        if first:
            s_lo, s_hi = 0.0, 1.0
            for _ in range(refinements):
                mid = 0.5 * (s_lo + s_hi)
                ym = y0 * ex(sq(mid * dt) * xi2 - mid * dt / 2.0)
                xm = x0 + sq(y0 * ym) * sq(mid * dt) * xi1
                if _first_outside(table, xm, ym) < 0:
                    s_lo = mid
                else:
                    s_hi = mid
            yh = y0 * ex(sq(s_hi * dt) * xi2 - s_hi * dt / 2.0)
            xh = x0 + sq(y0 * yh) * sq(s_hi * dt) * xi1
            side_idx = _first_outside(table, xh, yh)
            if side_idx < 0:  # crossing vanished under refinement: treat as inside
                return x2, y2
            t_cross = t_base + s_hi * dt
            first = False
        else:
            side_idx = exit_side
            t_cross = t_base + dt
        _, _, _, _, (pa, pb, pc, pd), letter = table[side_idx]
        den_re = pc * x2 + pd
        den_im = pc * y2
        den2 = den_re * den_re + den_im * den_im
        num_re = pa * x2 + pb
        num_im = pa * y2
        x2 = (num_re * den_re + num_im * den_im) / den2
        y2 = (num_im * den_re - num_re * den_im) / den2
        word.append(letter)
        times.append(t_cross)
    raise CrossingError(
        f"step at t={t_base:.6f} on {surface.name} required >32 pairing applications"
    )


def sample_trajectory(
    surface: SurfaceModel, start: HPoint, cfg: PathConfig, rng: np.random.Generator
) -> TrajectorySummary:
    """Simulate one trajectory to the horizon, reducing on the fly.

    On cusped surfaces the step is halved recursively while y exceeds
    cfg.cusp_y_cap; if the local step drops below dt·2^-20 the trajectory
    is marked discarded (cusp trap) rather than silently truncated.
    """
    if locate(surface, start) is not None:
        raise ValueError("start point must be interior to the fundamental domain")
    n_steps = cfg.n_steps
    if n_steps == 0:
        return TrajectorySummary((), (), start, 0.0, 0.0)

    x, y = start.x, start.y
    # running B⁻¹·deck matrix; unreduced displacement reads off its Frobenius norm
    da, db, dc, dd = _start_frame_inv(start)
    word: list[int] = []
    times: list[float] = []
    supdisp = 0.0
    dt_floor = cfg.dt * 2.0**-20
    # above the cusp cap, halve dt until the euclidean step budget y·√dt
    # matches its value at the cap
    step_budget = cfg.cusp_y_cap * math.sqrt(cfg.dt)

    for k in range(n_steps):
        t_base = k * cfg.dt
        remaining = cfg.dt
        while remaining > 0.0:
            dt_loc = remaining
            if surface.cusped and y > cfg.cusp_y_cap:
                while y * math.sqrt(dt_loc) > step_budget and dt_loc > dt_floor:
                    dt_loc *= 0.5
                if y * math.sqrt(dt_loc) > step_budget:
                    return TrajectorySummary(
                        tuple(word), tuple(times), HPoint(x, y), t_base, supdisp, discarded=True
                    )
            xi1, xi2 = rng.standard_normal(2)
            y2 = y * math.exp(math.sqrt(dt_loc) * xi2 - dt_loc / 2.0)
            x2 = x + math.sqrt(y * y2) * math.sqrt(dt_loc) * xi1
            if surface.sides:
                n_before = len(word)
                try:
                    x2, y2 = _handle_crossings(
                        surface, x, y, x2, y2, xi1, xi2, dt_loc,
                        t_base + (cfg.dt - remaining), cfg.max_substep_refinements, word, times,
                    )
                except CrossingError:
                    if surface.cusped:  # winding in a cusp horn: flag, don't hide
                        return TrajectorySummary(
                            tuple(word), tuple(times), HPoint(x, y), t_base, supdisp, discarded=True
                        )
                    raise
                for letter in word[n_before:]:
                    g = surface.generator(letter)  # deck gains S_side^{-1} = generator(letter)
                    da, db, dc, dd = (
                        da * g.a + db * g.c,
                        da * g.b + db * g.d,
                        dc * g.a + dd * g.c,
                        dc * g.b + dd * g.d,
                    )
            x, y = x2, y2
            remaining -= dt_loc
        supdisp = max(supdisp, float(deck_displacement(da, db, dc, dd, x, y)))

    return TrajectorySummary(
        tuple(word), tuple(times), HPoint(x, y), n_steps * cfg.dt, supdisp
    )


def sample_trajectories(
    surface: SurfaceModel,
    cfg: PathConfig,
    n_paths: int,
    start: HPoint | None = None,
    starts: list[HPoint] | None = None,
    index_offset: int = 0,
    track_sup: bool = True,
) -> list[TrajectorySummary]:
    """Simulate n_paths trajectories with per-index streams.

    Compact and free surfaces run through a vectorized kernel; cusped
    surfaces fall back to the per-path sampler (adaptive dt).  Either
    way trajectory i consumes exactly the stream (cfg.rng_seed, i +
    index_offset), so replaying a single index reproduces it.  Passing
    track_sup=False skips the per-step displacement maximum (the words
    and endpoints are unchanged); estimators use that fast path.
    """
    if starts is None:
        starts = [start if start is not None else surface.basepoint] * n_paths
    if len(starts) != n_paths:
        raise ValueError("starts must have one entry per path")
    if surface.cusped:
        return [
            sample_trajectory(surface, starts[i], cfg, trajectory_stream(cfg.rng_seed, i + index_offset))
            for i in range(n_paths)
        ]
    return _sample_batch(surface, cfg, n_paths, starts, index_offset, track_sup)


def _sample_batch(surface, cfg, n_paths, starts, index_offset, track_sup) -> list[TrajectorySummary]:
    n_steps = cfg.n_steps
    for p in starts:
        if locate(surface, p) is not None:
            raise ValueError("start point must be interior to the fundamental domain")
    if n_steps == 0:
        return [TrajectorySummary((), (), p, 0.0, 0.0) for p in starts]

    x = np.array([p.x for p in starts], dtype=float)
    y = np.array([p.y for p in starts], dtype=float)
    frames = [_start_frame_inv(p) for p in starts]
    da = np.array([f[0] for f in frames])
    db = np.array([f[1] for f in frames])
    dc = np.array([f[2] for f in frames])
    dd = np.array([f[3] for f in frames])
    words: list[list[int]] = [[] for _ in range(n_paths)]
    times: list[list[float]] = [[] for _ in range(n_paths)]
    supdisp = np.zeros(n_paths)

    rngs = [trajectory_stream(cfg.rng_seed, i + index_offset) for i in range(n_paths)]
    sqdt = math.sqrt(cfg.dt)

    sides = surface.sides
    if sides:
        s_circ = np.array([s.is_circle for s in sides])[:, None]
        s_pos = np.array([s.position for s in sides])[:, None]
        s_rad2 = np.array([s.radius * s.radius for s in sides])[:, None]
        s_inside = np.array(surface.inside_signs)[:, None]
        pair_mats = [
            (sd.pairing.a, sd.pairing.b, sd.pairing.c, sd.pairing.d) for sd in sides
        ]
        letters = [-sd.letter for sd in sides]
        table = surface.side_table

    def first_outside_vec(xv, yv):
        # first separating side per path in list order, else -1
        dxv = xv[None, :] - s_pos
        sv = np.where(s_circ, dxv * dxv + yv[None, :] ** 2 - s_rad2, dxv)
        bad = sv * s_inside < -BOUNDARY_TOL
        return np.where(bad.any(axis=0), bad.argmax(axis=0), -1)

    done = 0
    while done < n_steps:
        m = min(_NOISE_BLOCK, n_steps - done)
        noise = np.empty((m, 2, n_paths))
        for i, g in enumerate(rngs):
            noise[:, :, i] = g.standard_normal((m, 2))
        for k in range(m):
            xi1 = noise[k, 0]
            xi2 = noise[k, 1]
            y2 = y * np.exp(sqdt * xi2 - cfg.dt / 2.0)
            x2 = x + np.sqrt(y * y2) * sqdt * xi1
            if sides:
                first = first_outside_vec(x2, y2)
                idx = np.flatnonzero(first >= 0)
                if idx.size:
                    # bisect all crossing paths at once to localize the
                    # first crossing time and side
                    x0s, y0s = x[idx], y[idx]
                    xi1s, xi2s = xi1[idx], xi2[idx]
                    s_lo = np.zeros(idx.size)
                    s_hi = np.ones(idx.size)
                    for _ in range(cfg.max_substep_refinements):
                        mid = 0.5 * (s_lo + s_hi)
                        ym = y0s * np.exp(np.sqrt(mid * cfg.dt) * xi2s - mid * cfg.dt / 2.0)
                        xm = x0s + np.sqrt(y0s * ym) * np.sqrt(mid * cfg.dt) * xi1s
                        inside = first_outside_vec(xm, ym) < 0
                        s_lo = np.where(inside, mid, s_lo)
                        s_hi = np.where(inside, s_hi, mid)
                    yh = y0s * np.exp(np.sqrt(s_hi * cfg.dt) * xi2s - s_hi * cfg.dt / 2.0)
                    xh = x0s + np.sqrt(y0s * yh) * np.sqrt(s_hi * cfg.dt) * xi1s
                    cross_side = first_outside_vec(xh, yh)
                    t_step = (done + k) * cfg.dt
                    for j, i in enumerate(idx):
                        side = int(cross_side[j])
                        if side < 0:  # crossing vanished under refinement
                            continue
                        t_cross = t_step + float(s_hi[j]) * cfg.dt
                        xe, ye = float(x2[i]), float(y2[i])
                        for _ in range(32):
                            pa, pb, pc, pd = pair_mats[side]
                            den_re = pc * xe + pd
                            den_im = pc * ye
                            den2 = den_re * den_re + den_im * den_im
                            num_re = pa * xe + pb
                            num_im = pa * ye
                            xe = (num_re * den_re + num_im * den_im) / den2
                            ye = (num_im * den_re - num_re * den_im) / den2
                            words[i].append(letters[side])
                            times[i].append(t_cross)
                            g = surface.generator(letters[side])
                            da[i], db[i], dc[i], dd[i] = (
                                da[i] * g.a + db[i] * g.c,
                                da[i] * g.b + db[i] * g.d,
                                dc[i] * g.a + dd[i] * g.c,
                                dc[i] * g.b + dd[i] * g.d,
                            )
                            side = _first_outside(table, xe, ye)
                            if side < 0:
                                break
                            t_cross = t_step + cfg.dt
                        else:
                            raise CrossingError(
                                f"step at t={t_step:.6f} on {surface.name} required "
                                ">32 pairing applications"
                            )
                        x2[i], y2[i] = xe, ye
            x, y = x2, y2
            if track_sup:
                np.maximum(supdisp, deck_displacement(da, db, dc, dd, x, y), out=supdisp)
        done += m

    elapsed = n_steps * cfg.dt
    return [
        TrajectorySummary(
            tuple(words[i]), tuple(times[i]), HPoint(x[i], y[i]), elapsed, float(supdisp[i])
        )
        for i in range(n_paths)
    ]


@lru_cache(maxsize=16)
def cached_trajectories(
    surface: SurfaceModel, cfg: PathConfig, n_paths: int
) -> tuple[TrajectorySummary, ...]:
    """Basepoint-started trajectories, memoized so estimators sharing a
    config reuse the same words (which also makes cross-checks sharp)."""
    return tuple(sample_trajectories(surface, cfg, n_paths, track_sup=False))


# ---------------------------------------------------------------------------
# validation statistics


def dynkin_residual(
    test_fn,
    laplacian,
    start: HPoint,
    t: float,
    n_paths: int,
    dt: float = 2e-3,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo residual of E[f(γ_t)] − f(x) − ½E[∫₀ᵗ Δf(γ_s) ds].

    Free motion on the half-plane; `test_fn` and `laplacian` are
    vectorized callables of (x, y), with Δf = y²(f_xx + f_yy) supplied by
    the caller.  Returns (residual, stderr) with stderr over paths.
    """
    if t > 5.0:
        raise ValueError("dynkin check is meant for short horizons t <= 5")
    if n_paths < 1000:
        raise ValueError("need at least 10^3 paths")
    n_steps = int(round(t / dt))
    rngs = [trajectory_stream(seed, i) for i in range(n_paths)]
    x = np.full(n_paths, start.x)
    y = np.full(n_paths, start.y)
    integral = np.zeros(n_paths)
    lap_prev = laplacian(x, y)
    sqdt = math.sqrt(dt)
    done = 0
    while done < n_steps:
        m = min(_NOISE_BLOCK, n_steps - done)
        noise = np.empty((m, 2, n_paths))
        for i, g in enumerate(rngs):
            noise[:, :, i] = g.standard_normal((m, 2))
        for k in range(m):
            y2 = y * np.exp(sqdt * noise[k, 1] - dt / 2.0)
            x = x + np.sqrt(y * y2) * sqdt * noise[k, 0]
            y = y2
            lap = laplacian(x, y)
            integral += 0.5 * (lap_prev + lap) * dt
            lap_prev = lap
        done += m
    per_path = test_fn(x, y) - test_fn(np.array([start.x]), np.array([start.y]))[0] - 0.5 * integral
    residual = float(per_path.mean())
    stderr = float(per_path.std(ddof=1) / math.sqrt(n_paths))
    return residual, stderr


def _free_displacements(cfg: PathConfig, n_paths: int, track_sup: bool) -> tuple[np.ndarray, np.ndarray]:
    """(final distance, sup distance) arrays for free motion from (0, 1)."""
    n_steps = cfg.n_steps
    rngs = [trajectory_stream(cfg.rng_seed, i) for i in range(n_paths)]
    x = np.zeros(n_paths)
    y = np.ones(n_paths)
    sup = np.zeros(n_paths)
    sqdt = math.sqrt(cfg.dt)
    done = 0
    while done < n_steps:
        m = min(_NOISE_BLOCK, n_steps - done)
        noise = np.empty((m, 2, n_paths))
        for i, g in enumerate(rngs):
            noise[:, :, i] = g.standard_normal((m, 2))
        for k in range(m):
            y2 = y * np.exp(sqdt * noise[k, 1] - cfg.dt / 2.0)
            x = x + np.sqrt(y * y2) * sqdt * noise[k, 0]
            y = y2
            if track_sup:
                arg = 1.0 + (x * x + (y - 1.0) ** 2) / (2.0 * y)
                np.maximum(sup, np.arccosh(np.maximum(arg, 1.0)), out=sup)
        done += m
    final = np.arccosh(np.maximum(1.0 + (x * x + (y - 1.0) ** 2) / (2.0 * y), 1.0))
    return final, sup


def escape_rate(cfg: PathConfig, n_paths: int, n_batches: int = 20) -> tuple[float, float]:
    """Mean of d(start, γ_T)/T over free paths with a batch-means 95% CI."""
    if cfg.horizon < 50.0:
        raise ValueError("escape rate needs horizon >= 50")
    final, _ = _free_displacements(cfg, n_paths, track_sup=False)
    rates = final / cfg.horizon
    return float(rates.mean()), batch_ci(rates, n_batches)


def sup_tail(
    cfg: PathConfig, r, t0: float, n_paths: int, envelope_c: float = 1.0
):
    """Empirical P(sup_{t<=t0} d(x, γ_t) >= r) next to the Gaussian-type
    reference envelope √2·exp(−r²/4t₀ + C(t₀)) at the configured C.

    `r` may be a scalar or a grid; returns (probability, envelope) with
    matching shape.
    """
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(rs < 0.0):
        raise ValueError("radius must be nonnegative")
    sub = PathConfig(
        dt=cfg.dt, horizon=t0, max_substep_refinements=cfg.max_substep_refinements,
        rng_seed=cfg.rng_seed, cusp_y_cap=cfg.cusp_y_cap,
    )
    _, sup = _free_displacements(sub, n_paths, track_sup=True)
    probs = np.array([(sup >= rv).mean() for rv in rs])
    env = math.sqrt(2.0) * np.exp(-rs * rs / (4.0 * t0) + envelope_c)
    if np.isscalar(r) or np.asarray(r).ndim == 0:
        return float(probs[0]), float(env[0])
    return probs, env


def log_tail_slope(rs: np.ndarray, probs: np.ndarray) -> float:
    """Least-squares slope of log tail probability against r²."""
    mask = probs > 0
    if mask.sum() < 3:
        raise ValueError("not enough populated tail points for a slope fit")
    z = np.log(probs[mask])
    r2 = rs[mask] ** 2
    a = np.vstack([r2, np.ones_like(r2)]).T
    slope, _ = np.linalg.lstsq(a, z, rcond=None)[0]
    return float(slope)


def batch_ci(values: np.ndarray, n_batches: int = 20) -> float:
    """95% half-width from batch means over a fixed-order split of paths."""
    from scipy import stats

    values = np.asarray(values, dtype=float)
    nb = min(n_batches, len(values))
    if nb < 2:
        return float("inf")
    batches = np.array([b.mean() for b in np.array_split(values, nb)])
    se = batches.std(ddof=1) / math.sqrt(nb)
    return float(stats.t.ppf(0.975, nb - 1) * se)
