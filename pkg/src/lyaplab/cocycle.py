"""Monodromy representations and overflow-safe parallel-transport products.

A flat bundle over the surface is one invertible matrix per surface
generator; parallel transport along a Brownian path is the left-to-right
product over the recorded deck word.  Products are kept as a unit-norm
matrix times exp(log_scale), rescaled whenever the running norm leaves
[1e-2, 1e2], so words of any length stay in range while the accumulated
logarithm keeps full precision.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import SurfaceModel, mobius_displacement
from .grassmann import StructureForm, compound_matrix
from .rng import derived_stream

RESCALE_LO = 1e-2
RESCALE_HI = 1e2


class TransportDegeneracyError(RuntimeError):
    """The running product collapsed below rescue (numerically singular)."""


@dataclass(frozen=True)
class Representation:
    """Monodromy data: one invertible complex matrix per surface generator.

    `form`, when present, is preserved by every generator: gᴴ J g = J for
    hermitian J, gᵗ J g = J for symplectic J.  The strongly-irreducible
    flag is user-asserted, never inferred.
    """

    generators: tuple[np.ndarray, ...]
    inverses: tuple[np.ndarray, ...] = field(default=(), repr=False)
    form: StructureForm | None = None
    unitary: bool = False
    strongly_irreducible: bool | None = None
    name: str = ""

    def __post_init__(self) -> None:
        gens = tuple(np.asarray(g, dtype=complex) for g in self.generators)
        n = gens[0].shape[0]
        for i, g in enumerate(gens):
            if g.shape != (n, n):
                raise ValueError(f"generator {i} has shape {g.shape}, expected ({n}, {n})")
        invs = tuple(np.linalg.inv(g) for g in gens) if not self.inverses else self.inverses
        for i, (g, gi) in enumerate(zip(gens, invs)):
            resid = np.max(np.abs(g @ gi - np.eye(n)))
            if resid > 1e-10:
                raise ValueError(f"generator {i} inverse residual {resid:.2e} > 1e-10")
        if self.form is not None:
            for i, g in enumerate(gens):
                resid = form_residual(g, self.form)
                if resid > 1e-8:
                    raise ValueError(
                        f"generator {i} violates the declared form: residual {resid:.2e}"
                    )
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "inverses", invs)

    @property
    def n(self) -> int:
        return self.generators[0].shape[0]

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    def generator(self, letter: int) -> np.ndarray:
        """Signed lookup: letter k > 0 is generators[k-1], -k its inverse."""
        if letter == 0 or abs(letter) > len(self.generators):
            raise ValueError(f"invalid generator letter {letter}")
        return self.generators[letter - 1] if letter > 0 else self.inverses[-letter - 1]


def form_residual(g: np.ndarray, form: StructureForm) -> float:
    j = form.matrix
    if form.kind == "hermitian":
        return float(np.max(np.abs(g.conj().T @ j @ g - j)))
    if form.kind == "symplectic":
        return float(np.max(np.abs(g.T @ j @ g - j)))
    raise ValueError(f"form residual undefined for kind {form.kind!r}")


@dataclass(frozen=True)
class CocycleProduct:
    """exp(log_scale) · unit, with unit of operator norm 1 at readout."""

    unit: np.ndarray
    log_scale: float


def operator_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def transport(rep: Representation, word) -> CocycleProduct:
    """Left-to-right product of rep generators over the deck word.

    Rescales by the operator norm whenever the running Frobenius norm
    leaves [1e-2, 1e2]; finishes with one exact normalization so the
    stored unit matrix has operator norm 1.
    """
    n = rep.n
    prod = np.eye(n, dtype=complex)
    log_scale = 0.0
    for letter in word:
        prod = prod @ rep.generator(letter)
        fro = float(np.linalg.norm(prod))
        if not (RESCALE_LO < fro < RESCALE_HI):
            if not math.isfinite(fro):
                raise TransportDegeneracyError("transport product overflowed")
            nrm = operator_norm(prod)
            if nrm < 1e-280:
                raise TransportDegeneracyError("transport product underflowed beyond rescue")
            prod = prod / nrm
            log_scale += math.log(nrm)
    nrm = operator_norm(prod)
    if nrm <= 0.0 or not math.isfinite(nrm):
        raise TransportDegeneracyError("transport product degenerated")
    return CocycleProduct(prod / nrm, log_scale + math.log(nrm))


def cocycle_norm_log(prod: CocycleProduct) -> float:
    """log of the operator norm of the true product."""
    return prod.log_scale + math.log(operator_norm(prod.unit))


def transport_vector(rep: Representation, word, v: np.ndarray) -> tuple[np.ndarray, float]:
    """(unit vector, log norm) of (product over word) · v for unit v.

    Cheaper than transport() when only one direction is needed; the word
    applies right-to-left to the vector so the matrix product is the
    same left-to-right convention as transport().
    """
    u = np.asarray(v, dtype=complex)
    log_norm = 0.0
    nrm0 = np.linalg.norm(u)
    if nrm0 <= 0:
        raise ValueError("need a nonzero vector")
    u = u / nrm0
    for letter in reversed(list(word)):
        u = rep.generator(letter) @ u
        nrm = float(np.linalg.norm(u))
        if nrm < 1e-280 or not math.isfinite(nrm):
            raise TransportDegeneracyError("vector transport degenerated")
        u = u / nrm
        log_norm += math.log(nrm)
    return u, log_norm


def exterior_power_rep(rep: Representation, k: int) -> Representation:
    """Generator-wise k-th compound matrices on dimension C(n, k).

    A hermitian form maps to its compound (still hermitian); a symplectic
    form maps to its compound for odd k and is dropped with a warning for
    even k (the compound is then symmetric, not antisymmetric).
    """
    if not 1 <= k <= rep.n:
        raise ValueError(f"need 1 <= k <= {rep.n}, got {k}")
    if k == 1:
        return rep
    gens = tuple(compound_matrix(g, k) for g in rep.generators)
    form = None
    if rep.form is not None:
        jk = compound_matrix(rep.form.matrix, k)
        if rep.form.kind == "hermitian":
            form = StructureForm("hermitian", 0.5 * (jk + jk.conj().T))
        elif rep.form.kind == "symplectic" and k % 2 == 1:
            form = StructureForm("symplectic", 0.5 * (jk - jk.T))
        else:
            warnings.warn(
                f"preserved {rep.form.kind} form has no {k}-th exterior analogue; dropped",
                stacklevel=2,
            )
    return Representation(
        generators=gens,
        form=form,
        unitary=rep.unitary,
        strongly_irreducible=None,
        name=f"{rep.name}^wedge{k}" if rep.name else f"wedge{k}",
    )


def distance_norm_bound_check(
    rep: Representation,
    surface: SurfaceModel,
    n_samples: int,
    word_length: int = 40,
    seed: int = 0,
) -> float:
    """Empirical Lipschitz constant max |log‖ρ(w)‖| / d(o, w·o) over
    random reduced words w of the given length (identity words skipped)."""
    if rep.n_generators != surface.n_generators:
        raise ValueError("representation and surface must share generator count")
    rng = derived_stream(seed, 7)
    m = surface.n_generators
    worst = 0.0
    for _ in range(n_samples):
        word: list[int] = []
        while len(word) < word_length:
            letter = int(rng.integers(1, m + 1)) * (1 if rng.random() < 0.5 else -1)
            if word and letter == -word[-1]:
                continue
            word.append(letter)
        dist = mobius_displacement(surface.word_mobius(word), surface.basepoint)
        if dist < 1e-9:
            continue
        ratio = abs(cocycle_norm_log(transport(rep, word))) / dist
        worst = max(worst, ratio)
    return worst
