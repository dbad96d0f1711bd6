"""Bundled experiment presets: surfaces, monodromies, divisors, degrees.

Monodromies over the genus-2 octagon must kill the polygon relator; all
presets use the assignment (rho_1..rho_4) = (A, B, B, A), under which the
octagon's vertex-cycle relator collapses for free.  Degrees are
topological rationals; the harness divides by the surface area to reach
the volume-normalized convention used in the reports.

The hypergeometric family ships as 14 named slots with no numbers: the
local-exponent parameters (and the thin/thick labels) live in external
literature and are config inputs, not constants of this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import geometry
from .cocycle import Representation
from .grassmann import DivisorForm, StructureForm, Subspace, Weight2Type1k1, fhat_form
from .rng import derived_stream


@dataclass(frozen=True)
class DivisorSpec:
    """Holomorphic-subbundle data at the base fiber: the subspace F (as
    column vectors), its codimension k, and its topological degree."""

    basis: np.ndarray
    degree: Fraction
    note: str = ""

    def form(self) -> DivisorForm:
        return fhat_form(Subspace.from_spanning(self.basis))

    @property
    def codim(self) -> int:
        b = np.atleast_2d(self.basis)
        return b.shape[0] - b.shape[1]


@dataclass(frozen=True)
class Preset:
    name: str
    surface: str
    description: str
    representation: Representation | None
    divisor: DivisorSpec | None = None
    structure: Weight2Type1k1 | None = None
    label: str | None = None  # e.g. thin/thick, when the user supplies it
    parameters_required: bool = False
    notes: str = ""


_CAYLEY = np.array([[1.0, -1j], [1.0, 1j]], dtype=complex) / math.sqrt(2.0)


def _octagon_matrices() -> list[np.ndarray]:
    return [g.matrix().astype(complex) for g in geometry.genus2_octagon().generators]


def _su11_matrices() -> list[np.ndarray]:
    """Octagon generators conjugated into SU(1,1) (preserving diag(1,-1))."""
    inv = np.linalg.inv(_CAYLEY)
    return [_CAYLEY @ g @ inv for g in _octagon_matrices()]


def _sym_square(m: np.ndarray) -> np.ndarray:
    """Matrix of Sym² on the basis (e1², √2 e1e2, e2²) (orthonormal for
    the induced metric)."""
    a, b = m[0, 0], m[0, 1]
    c, d = m[1, 0], m[1, 1]
    s = math.sqrt(2.0)
    return np.array(
        [
            [a * a, s * a * b, b * b],
            [s * a * c, a * d + b * c, s * b * d],
            [c * c, s * c * d, d * d],
        ],
        dtype=complex,
    )


def fuchsian_genus2() -> Preset:
    gens = tuple(_octagon_matrices())
    rep = Representation(generators=gens, strongly_irreducible=True, name="fuchsian_genus2")
    return Preset(
        name="fuchsian_genus2",
        surface="genus2_octagon",
        description="uniformizing rank-2 real representation; spectrum (1/4, -1/4)",
        representation=rep,
    )


def unitary_rank2() -> Preset:
    rng = derived_stream(2024, 1)
    def su2() -> np.ndarray:
        z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        q, r = np.linalg.qr(z)
        q = q * (np.diag(r) / np.abs(np.diag(r)))
        return q / np.sqrt(np.linalg.det(q))
    a, b = su2(), su2()
    rep = Representation(
        generators=(a, b, b, a),
        form=StructureForm("hermitian", np.eye(2, dtype=complex)),
        unitary=True,
        strongly_irreducible=True,
        name="unitary_rank2",
    )
    div = DivisorSpec(
        basis=np.array([[0.0], [1.0]], dtype=complex),
        degree=Fraction(0),
        note="test divisor; flat unitary bundles have degree-0 subsheaves at best",
    )
    return Preset(
        name="unitary_rank2",
        surface="genus2_octagon",
        description="fixed SU(2) pair (A,B,B,A); all exponents vanish",
        representation=rep,
        divisor=div,
    )


def rank1_unimodular() -> Preset:
    phases = (0.4, 1.3, 1.3, 0.4)
    gens = tuple(np.array([[np.exp(1j * t)]], dtype=complex) for t in phases)
    rep = Representation(
        generators=gens,
        unitary=True,
        strongly_irreducible=True,
        name="rank1_unimodular",
    )
    return Preset(
        name="rank1_unimodular",
        surface="genus2_octagon",
        description="unit-character line bundle; the exponent is exactly 0",
        representation=rep,
    )


def weight1_vhs() -> Preset:
    gens = tuple(_su11_matrices())
    rep = Representation(
        generators=gens,
        form=StructureForm("hermitian", np.diag([1.0, -1.0]).astype(complex)),
        strongly_irreducible=True,
        name="weight1_vhs",
    )
    div = DivisorSpec(
        basis=np.array([[0.0], [1.0]], dtype=complex),
        degree=Fraction(1),
        note="Hodge line E^1 of the uniformizing weight-1 family: deg = g-1 = 1",
    )
    return Preset(
        name="weight1_vhs",
        surface="genus2_octagon",
        description="signature-(1,1) uniformizing family; lambda_1 = pi*deg(E^1)/area = 1/4",
        representation=rep,
        divisor=div,
    )


def weight2_1k1() -> Preset:
    base = _su11_matrices()
    gens = tuple(_sym_square(m) for m in base)
    # invariant symmetric form of Sym² (signature (2,1)), solved from the data
    j = _invariant_hermitian(gens)
    rep = Representation(
        generators=gens,
        form=StructureForm("hermitian", j),
        strongly_irreducible=True,
        name="weight2_1k1",
    )
    div = DivisorSpec(
        basis=np.array([[0.0], [0.0], [1.0]], dtype=complex),
        degree=Fraction(2),
        note="E^2 = K of the symmetric-square family: deg = 2g-2 = 2",
    )
    return Preset(
        name="weight2_1k1",
        surface="genus2_octagon",
        description="rank-3 symmetric square, type (1,1,1); lambda_1 = pi*deg(E^2)/area = 1/2",
        representation=rep,
        divisor=div,
        structure=Weight2Type1k1(1),
    )


def _invariant_hermitian(gens: tuple[np.ndarray, ...]) -> np.ndarray:
    """Solve gᴴ J g = J for all generators; returns the (unique up to
    scale) hermitian solution, normalized and sign-fixed."""
    n = gens[0].shape[0]
    rows = []
    for g in gens:
        op = np.kron(g.conj().T, g.T) - np.eye(n * n)
        rows.append(op)
    stack = np.vstack(rows)
    _, s, vh = np.linalg.svd(stack)
    null = vh[-1].conj().reshape(n, n)
    j = 0.5 * (null + null.conj().T)
    if np.max(np.abs(j)) < 1e-8:
        j = 0.5 * ((1j * null) + (1j * null).conj().T)
    j = j / np.max(np.abs(j))
    ev = np.linalg.eigvalsh(j)
    if (ev > 0).sum() < (ev < 0).sum():
        j = -j
    return j


def schottky_rank2() -> Preset:
    data = schottky_data()
    a = data.generators[0]
    b = data.generators[1]
    rep = Representation(
        generators=(a, b, b, a),
        strongly_irreducible=True,
        name="schottky_rank2",
    )
    div = DivisorSpec(
        basis=np.array([[0.0], [1.0]], dtype=complex),
        degree=Fraction(1),
        note=(
            "section point z0 = 0 of the discontinuity set; degree g-1 = 1 is the "
            "developing-section value for authentic Schottky uniformizations, "
            "exploratory for this plain Schottky homomorphism"
        ),
    )
    return Preset(
        name="schottky_rank2",
        surface="genus2_octagon",
        description="Zariski-dense SL(2,C) Schottky monodromy (A,B,B,A); "
        "harmonic support over the limit set misses the section divisor",
        representation=rep,
        divisor=div,
    )


def schottky_data() -> geometry.SchottkyData:
    """Four disjoint unit circles at ±3, ±3i with pairing generators."""
    ca, cb = 3.0 + 0j, -3.0 + 0j
    cc, cd = 3.0j, -3.0j
    return geometry.SchottkyData(
        centers_a=(ca, cc),
        radii_a=(1.0, 1.0),
        centers_b=(cb, cd),
        radii_b=(1.0, 1.0),
        generators=(
            geometry.pair_generator(ca, 1.0, cb, 1.0),
            geometry.pair_generator(cc, 1.0, cd, 1.0),
        ),
    )


# --- hypergeometric Sp(4) slots -------------------------------------------

HYPERGEOMETRIC_SLOTS = tuple(f"hypergeometric_sp4_{i:02d}" for i in range(1, 15))


def companion_matrix(roots: np.ndarray) -> np.ndarray:
    """Companion matrix of the monic polynomial with the given roots."""
    coeffs = np.poly(np.asarray(roots, dtype=complex))  # leading 1 first
    n = len(roots)
    m = np.zeros((n, n), dtype=complex)
    m[1:, :-1] = np.eye(n - 1)
    m[:, -1] = -coeffs[1:][::-1]
    return m


def build_hypergeometric(a_params, b_params, name: str = "hypergeometric_sp4") -> Representation:
    """Companion-matrix pair for local exponents (a; b) on the cusped
    quadrilateral (two free generators).

    The generators are A = companion(e^{2πi a_j}) and B = companion of
    the b-exponents; an invariant symplectic form is attached when the
    pair preserves one (solved numerically), otherwise form is None.
    """
    a_params = np.asarray(a_params, dtype=float)
    b_params = np.asarray(b_params, dtype=float)
    if a_params.shape != b_params.shape or a_params.ndim != 1:
        raise ValueError("a and b parameter lists must be 1-d of equal length")
    A = companion_matrix(np.exp(2j * np.pi * a_params))
    B = companion_matrix(np.exp(2j * np.pi * b_params))
    form = None
    try:
        j = _invariant_antisymmetric((A, B))
        if j is not None:
            form = StructureForm("symplectic", j)
    except np.linalg.LinAlgError:
        form = None
    return Representation(generators=(A, B), form=form, name=name)


def _invariant_antisymmetric(gens) -> np.ndarray | None:
    n = gens[0].shape[0]
    rows = [np.kron(g.T, g.T) - np.eye(n * n) for g in gens]
    stack = np.vstack(rows)
    _, s, vh = np.linalg.svd(stack)
    if s[-1] > 1e-8 * s[0]:
        return None
    j = vh[-1].conj().reshape(n, n)
    j = 0.5 * (j - j.T)
    if np.max(np.abs(j)) < 1e-10:
        return None
    j = j / np.max(np.abs(j))
    if abs(np.linalg.det(j)) < 1e-10:
        return None
    return j


def _hypergeometric_slot(i: int) -> Preset:
    return Preset(
        name=f"hypergeometric_sp4_{i:02d}",
        surface="cusped_quadrilateral",
        description=(
            "Sp(4) hypergeometric slot; supply local exponents (a; b) and the "
            "thin/thick label from the cited literature to build it"
        ),
        representation=None,
        parameters_required=True,
        notes="parameters are config inputs; nothing is tabulated here",
    )


def catalog() -> tuple[Preset, ...]:
    """All bundled presets, runnable ones first."""
    return (
        fuchsian_genus2(),
        unitary_rank2(),
        rank1_unimodular(),
        weight1_vhs(),
        weight2_1k1(),
        schottky_rank2(),
    ) + tuple(_hypergeometric_slot(i) for i in range(1, 15))


def get_preset(name: str) -> Preset:
    for p in catalog():
        if p.name == name:
            return p
    raise KeyError(f"unknown preset {name!r}; available: {[p.name for p in catalog()]}")
