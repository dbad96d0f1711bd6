"""Lyapunov spectrum estimation by QR deflation along Brownian deck words.

Per path, the deck word over the window [burn_in·T, T] is pushed through
an orthonormal frame with QR re-orthonormalization (positive diagonal)
every renorm_interval multiplications; the accumulated log diagonals
divided by the window length estimate the spectrum for that path.
Paths are i.i.d., so confidence intervals come from batch means over
paths with Student quantiles.

Everything is deterministic in (seed, n_paths, cfg): trajectory i always
uses stream (seed, i), and estimators sharing a config consume identical
words, which is what makes the exterior-power consistency checks sharp.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .brownian import PathConfig, TrajectorySummary, batch_ci, cached_trajectories
from .cocycle import Representation
from .geometry import SurfaceModel


class DeflationError(RuntimeError):
    """Frame rank collapse during QR propagation."""


class DiscardRateError(RuntimeError):
    """More than 10% of trajectories were discarded in cusp traps."""


@dataclass(frozen=True)
class TopEstimate:
    value: float
    ci_half_width: float
    discarded: int = 0
    per_path: tuple[float, ...] = ()


@dataclass(frozen=True)
class SpectrumEstimate:
    """Per-exponent estimates (unit Brownian time), non-increasing order."""

    lambdas: tuple[float, ...]
    ci_half_widths: tuple[float, ...]
    total_time: float
    n_batches: int
    discarded_trajectories: int
    discard_warning: bool = False
    per_path: np.ndarray | None = None

    def __post_init__(self) -> None:
        lam = self.lambdas
        if any(lam[i] < lam[i + 1] for i in range(len(lam) - 1)):
            raise ValueError("spectrum must be sorted non-increasing")


def window_letters(summary: TrajectorySummary, t0: float, t1: float) -> list[int]:
    """Deck letters whose crossing times fall in (t0, t1]."""
    return [l for l, t in zip(summary.word, summary.word_times) if t0 < t <= t1]


def _letter_ids(rep: Representation, word_lists: list[list[int]], reverse: bool):
    """(ids, stack): per-path letter index rows padded with the identity.

    stack holds [generators..., inverses..., identity]; ids[p, j] indexes
    it, with rows optionally reversed so left-multiplying in column order
    reproduces the left-to-right word product.
    """
    m = rep.n_generators
    n = rep.n
    stack = np.stack(list(rep.generators) + list(rep.inverses) + [np.eye(n, dtype=complex)])
    lmax = max((len(w) for w in word_lists), default=0)
    ids = np.full((len(word_lists), max(lmax, 1)), 2 * m, dtype=np.int32)
    for p, w in enumerate(word_lists):
        seq = list(reversed(w)) if reverse else list(w)
        for j, letter in enumerate(seq):
            ids[p, j] = letter - 1 if letter > 0 else m + (-letter - 1)
    return ids, stack


def _batched_top_logs(rep: Representation, word_lists: list[list[int]]) -> np.ndarray:
    """log operator norm of the word product, all paths at once."""
    n_paths = len(word_lists)
    ids, stack = _letter_ids(rep, word_lists, reverse=False)
    running = np.broadcast_to(np.eye(rep.n, dtype=complex), (n_paths, rep.n, rep.n)).copy()
    logs = np.zeros(n_paths)
    for pos in range(ids.shape[1]):
        running = running @ stack[ids[:, pos]]
        if (pos + 1) % 16 == 0:
            fro = np.linalg.norm(running, axis=(1, 2))
            if np.any(fro < 1e-280) or not np.all(np.isfinite(fro)):
                raise DeflationError("transport product under/overflowed")
            running /= fro[:, None, None]
            logs += np.log(fro)
    tops = np.linalg.svd(running, compute_uv=False)[:, 0]
    return logs + np.log(tops)


def _batched_qr_logs(
    rep: Representation, word_lists: list[list[int]], renorm_interval: int
) -> np.ndarray:
    """Accumulated log R-diagonals per path (QR deflation, batched)."""
    n_paths = len(word_lists)
    n = rep.n
    ids, stack = _letter_ids(rep, word_lists, reverse=True)
    frames = np.broadcast_to(np.eye(n, dtype=complex), (n_paths, n, n)).copy()
    logs = np.zeros((n_paths, n))
    diag_idx = np.arange(n)

    def renorm(frames, logs):
        q, r = np.linalg.qr(frames)
        diag = r[:, diag_idx, diag_idx]
        mags = np.abs(diag)
        if np.any(mags < 1e-280):
            raise DeflationError("frame rank collapse in batched QR")
        phases = diag / mags
        logs += np.log(mags)
        return q * phases[:, None, :], logs

    for pos in range(ids.shape[1]):
        frames = stack[ids[:, pos]] @ frames
        if (pos + 1) % renorm_interval == 0:
            frames, logs = renorm(frames, logs)
    frames, logs = renorm(frames, logs)
    return logs


def qr_positive(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QR with real positive diagonal of R."""
    q, r = np.linalg.qr(m)
    d = np.diag(r).copy()
    phases = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return q * phases, phases.conj()[:, None] * r


def spectrum_from_word(rep: Representation, letters, renorm_interval: int = 16) -> np.ndarray:
    """Accumulated log R-diagonals of the word product applied to the
    identity frame (word processed so the full product matches the
    left-to-right transport convention)."""
    n = rep.n
    frame = np.eye(n, dtype=complex)
    logs = np.zeros(n)
    count = 0
    for letter in reversed(list(letters)):
        frame = rep.generator(letter) @ frame
        count += 1
        if count % renorm_interval == 0:
            frame, r = qr_positive(frame)
            diag = np.abs(np.diag(r))
            if np.any(diag < 1e-280):
                raise DeflationError(f"frame rank collapse at letter {count}")
            logs += np.log(diag)
    frame, r = qr_positive(frame)
    diag = np.abs(np.diag(r))
    if np.any(diag < 1e-280):
        raise DeflationError("frame rank collapse at readout")
    logs += np.log(diag)
    return logs


def batched_transport_vectors(
    rep: Representation, word_lists: list[list[int]], v0: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """((N, n) unit vectors, (N,) log norms) of product(word)·v0 per path."""
    n_paths = len(word_lists)
    ids, stack = _letter_ids(rep, word_lists, reverse=True)
    vecs = np.broadcast_to(np.asarray(v0, dtype=complex), (n_paths, rep.n)).copy()
    vecs /= np.linalg.norm(vecs, axis=1)[:, None]
    logs = np.zeros(n_paths)
    for pos in range(ids.shape[1]):
        vecs = np.einsum("pij,pj->pi", stack[ids[:, pos]], vecs)
        if (pos + 1) % 16 == 0:
            nrm = np.linalg.norm(vecs, axis=1)
            if np.any(nrm < 1e-280) or not np.all(np.isfinite(nrm)):
                raise DeflationError("vector transport degenerated")
            vecs /= nrm[:, None]
            logs += np.log(nrm)
    nrm = np.linalg.norm(vecs, axis=1)
    if np.any(nrm < 1e-280) or not np.all(np.isfinite(nrm)):
        raise DeflationError("vector transport degenerated")
    return vecs / nrm[:, None], logs + np.log(nrm)


def _prepare(
    rep: Representation,
    surface: SurfaceModel,
    cfg: PathConfig,
    n_paths: int,
    burn_in_fraction: float,
    compact_min_horizon: float = 100.0,
):
    if rep.n_generators != surface.n_generators:
        raise ValueError("representation and surface must share generator count")
    if not surface.cusped and cfg.horizon < compact_min_horizon:
        raise ValueError(
            f"horizon {cfg.horizon} too short for Kingman averaging (need >= {compact_min_horizon})"
        )
    summaries = cached_trajectories(surface, cfg, n_paths)
    kept = [s for s in summaries if not s.discarded]
    discarded = n_paths - len(kept)
    if discarded > 0.10 * n_paths:
        raise DiscardRateError(f"{discarded}/{n_paths} trajectories lost to cusp traps")
    if discarded > 0.01 * n_paths:
        warnings.warn(f"{discarded}/{n_paths} trajectories discarded in cusp traps", stacklevel=3)
    t0 = burn_in_fraction * cfg.horizon
    window = cfg.horizon - t0
    return kept, discarded, t0, window


def estimate_top(
    rep: Representation,
    surface: SurfaceModel,
    cfg: PathConfig,
    n_paths: int,
    burn_in_fraction: float = 0.1,
    n_batches: int = 20,
) -> TopEstimate:
    """Top exponent: mean over paths of log‖transport(word)‖ / window."""
    kept, discarded, t0, window = _prepare(rep, surface, cfg, n_paths, burn_in_fraction)
    words = [window_letters(s, t0, cfg.horizon) for s in kept]
    vals = _batched_top_logs(rep, words) / window
    return TopEstimate(
        float(vals.mean()), batch_ci(vals, n_batches), discarded, tuple(float(v) for v in vals)
    )


def estimate_spectrum(
    rep: Representation,
    surface: SurfaceModel,
    cfg: PathConfig,
    n_paths: int,
    renorm_interval: int = 16,
    burn_in_fraction: float = 0.1,
    n_batches: int = 20,
) -> SpectrumEstimate:
    """Full spectrum by QR deflation, batch CIs per exponent."""
    kept, discarded, t0, window = _prepare(rep, surface, cfg, n_paths, burn_in_fraction)
    words = [window_letters(s, t0, cfg.horizon) for s in kept]
    logs = _batched_qr_logs(rep, words, renorm_interval)
    per_path = np.sort(logs, axis=1)[:, ::-1] / window
    lambdas = per_path.mean(axis=0)
    cis = np.array([batch_ci(per_path[:, j], n_batches) for j in range(rep.n)])
    order = np.argsort(-lambdas, kind="stable")
    return SpectrumEstimate(
        lambdas=tuple(float(v) for v in lambdas[order]),
        ci_half_widths=tuple(float(c) for c in cis[order]),
        total_time=window * len(kept),
        n_batches=n_batches,
        discarded_trajectories=discarded,
        discard_warning=discarded > 0.01 * n_paths,
        per_path=per_path[:, order],
    )


def spectrum_from_word_samples(
    rep: Representation,
    words: list[list[int]],
    time_per_word: float,
    renorm_interval: int = 16,
    n_batches: int = 20,
) -> SpectrumEstimate:
    """Spectrum of a synthetic word cocycle (one word = one path of the
    given duration); used for i.i.d. random-word checks."""
    per_path = np.empty((len(words), rep.n))
    for i, w in enumerate(words):
        per_path[i] = np.sort(spectrum_from_word(rep, w, renorm_interval))[::-1] / time_per_word
    lambdas = per_path.mean(axis=0)
    cis = np.array([batch_ci(per_path[:, j], n_batches) for j in range(rep.n)])
    order = np.argsort(-lambdas, kind="stable")
    return SpectrumEstimate(
        lambdas=tuple(float(v) for v in lambdas[order]),
        ci_half_widths=tuple(float(c) for c in cis[order]),
        total_time=time_per_word * len(words),
        n_batches=n_batches,
        discarded_trajectories=0,
        per_path=per_path[:, order],
    )


def symmetry_residual(est: SpectrumEstimate) -> tuple[float, bool]:
    """max_i |λ_i + λ_{n+1-i}| and whether every pair is within the
    combined CI of its two members (with a 1e-12 floor so degenerate
    spectra whose CIs collapse below float rounding still count)."""
    lam = est.lambdas
    ci = est.ci_half_widths
    n = len(lam)
    residual = 0.0
    ok = True
    for i in range(n):
        j = n - 1 - i
        r = abs(lam[i] + lam[j])
        residual = max(residual, r)
        if r > max(ci[i] + ci[j], 1e-12):
            ok = False
    return residual, ok


def exterior_consistency(
    rep: Representation,
    surface: SurfaceModel,
    cfg: PathConfig,
    k: int,
    n_paths: int,
    renorm_interval: int = 16,
    burn_in_fraction: float = 0.1,
    n_batches: int = 20,
    dim_cap: int = 4096,
) -> tuple[float, float]:
    """|λ(Λ^k rep) − Σ_{i<=k} λ_i(rep)| with both estimates on the same
    trajectories (shared seed); returns (discrepancy, joint CI)."""
    from .cocycle import exterior_power_rep

    if math.comb(rep.n, k) > dim_cap:
        raise ValueError(f"C({rep.n},{k}) exceeds dimension cap {dim_cap}")
    top = estimate_top(exterior_power_rep(rep, k), surface, cfg, n_paths, burn_in_fraction, n_batches)
    spec = estimate_spectrum(
        rep, surface, cfg, n_paths, renorm_interval, burn_in_fraction, n_batches
    )
    partial = sum(spec.lambdas[:k])
    joint = top.ci_half_width + sum(spec.ci_half_widths[:k])
    return abs(top.value - partial), joint
