"""Exact-at-float Grassmannian linear algebra.

Plücker embedding, the wedge form cutting the divisor of k-planes that
meet a fixed codimension-k subspace, intersection and isotropy
predicates, compound (exterior-power) matrices, the corrected
exterior-norm identity, and the Lagrangian orbit-coverage diagnostic.

Index convention used everywhere: coordinates of Λ^k C^n are indexed by
sorted k-subsets of {0..n-1} in lexicographic order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .rng import derived_stream

INTERSECT_RTOL = 1e-8  # smallest/largest singular value ratio for "meets"


class DegeneracyError(ValueError):
    """Rank collapse where full rank was required."""


def subset_index(n: int, k: int) -> list[tuple[int, ...]]:
    """Sorted k-subsets of range(n) in lexicographic order."""
    return list(combinations(range(n), k))


def compound_matrix(m: np.ndarray, k: int) -> np.ndarray:
    """k-th compound: entry (I, J) is det of the submatrix m[I, J].

    Multiplicative (Λ^k(AB) = Λ^k A · Λ^k B) and sends conjugate
    transposes to conjugate transposes, so it is the matrix of the
    induced map on Λ^k with the induced inner product.
    """
    m = np.asarray(m)
    n = m.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got {k}")
    if k == 1:
        return m.copy()
    subs = subset_index(n, k)
    out = np.empty((len(subs), len(subs)), dtype=complex)
    for a, rows in enumerate(subs):
        mr = m[np.ix_(rows, range(n))]
        for b, cols in enumerate(subs):
            out[a, b] = np.linalg.det(mr[:, cols])
    return out


# ---------------------------------------------------------------------------
# subspaces and Plücker coordinates


@dataclass(frozen=True)
class Subspace:
    """m-dimensional subspace of C^n with an orthonormal basis matrix (n, m)."""

    basis: np.ndarray

    def __post_init__(self) -> None:
        b = np.asarray(self.basis, dtype=complex)
        if b.ndim != 2 or not 1 <= b.shape[1] <= b.shape[0]:
            raise ValueError(f"basis must be (n, m) with 1 <= m <= n, got {b.shape}")
        gram = b.conj().T @ b
        if np.max(np.abs(gram - np.eye(b.shape[1]))) > 1e-12:
            raise ValueError("basis columns are not orthonormal to 1e-12")
        object.__setattr__(self, "basis", b)

    @classmethod
    def from_spanning(cls, vectors: np.ndarray) -> "Subspace":
        """Orthonormalize the columns of `vectors` (must be full rank)."""
        v = np.atleast_2d(np.asarray(vectors, dtype=complex))
        q, r = np.linalg.qr(v)
        if np.min(np.abs(np.diag(r))) < 1e-12 * max(1.0, float(np.abs(r).max())):
            raise DegeneracyError("spanning vectors are numerically dependent")
        return cls(q)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class PluckerVector:
    """Unit vector of Λ^k C^n coordinates (lexicographic k-subsets)."""

    coords: np.ndarray
    k: int
    n: int

    def __post_init__(self) -> None:
        c = np.asarray(self.coords, dtype=complex)
        if c.shape != (math.comb(self.n, self.k),):
            raise ValueError("coordinate count must be C(n, k)")
        if abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise ValueError("Plücker vector must be unit norm")
        object.__setattr__(self, "coords", c)


@dataclass(frozen=True)
class DivisorForm:
    """Unit covector of Λ^k (C^n)* cutting the k-planes that meet F.

    Pairs to zero with the Plücker vector of G exactly when G intersects
    the defining codimension-k subspace F nontrivially.
    """

    coeffs: np.ndarray
    k: int
    n: int

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (math.comb(self.n, self.k),):
            raise ValueError("coefficient count must be C(n, k)")
        if abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise ValueError("divisor form must be unit norm")
        object.__setattr__(self, "coeffs", c)


def plucker_embed(g: Subspace) -> PluckerVector:
    """Wedge of the basis columns: all k x k minors, unit-normalized.

    Well-defined up to a global phase; orthonormal bases give norm-1
    minor vectors exactly, so only a defensive renormalization happens.
    """
    n, k = g.ambient_dim, g.dim
    subs = subset_index(n, k)
    coords = np.array([np.linalg.det(g.basis[list(rows), :]) for rows in subs])
    nrm = np.linalg.norm(coords)
    if nrm < 1e-12:
        raise DegeneracyError("degenerate basis in Plücker embedding")
    return PluckerVector(coords / nrm, k, n)


def annihilator(f: Subspace) -> Subspace:
    """Orthonormal basis of {φ in (C^n)* : φ(F) = 0}, as row-covectors
    stored column-wise via the conjugate pairing."""
    n, m = f.ambient_dim, f.dim
    # kernel of basisᴴ: covectors vanishing on F correspond to the
    # orthogonal complement under the Hermitian pairing
    u, s, vh = np.linalg.svd(f.basis.conj().T)
    null = vh[m:, :].conj().T  # (n, n-m), orthonormal
    if null.shape[1] != n - m:
        raise DegeneracyError("annihilator computation lost rank")
    return Subspace(null)


def fhat_form(f: Subspace, k: int | None = None) -> DivisorForm:
    """Wedge of an annihilator basis of F (codimension k), unit-normalized.

    The resulting covector pairs with plucker_embed(G) to det(φ_i(v_j)),
    so its zero set on the Grassmannian is exactly the k-planes meeting F.
    """
    n = f.ambient_dim
    codim = n - f.dim
    if k is not None and k != codim:
        raise ValueError(f"F has codimension {codim}, not {k}")
    ann = annihilator(f)
    subs = subset_index(n, codim)
    # φ_1 ∧ … ∧ φ_k evaluated on e_I is det of the I-rows of the
    # conjugated annihilator basis (covector coordinates)
    a = ann.basis.conj()
    coeffs = np.array([np.linalg.det(a[list(rows), :]) for rows in subs])
    nrm = np.linalg.norm(coeffs)
    if nrm < 1e-12:
        raise DegeneracyError("degenerate annihilator wedge")
    return DivisorForm(coeffs / nrm, codim, n)


def divisor_pairing(d: DivisorForm, p: PluckerVector) -> complex:
    if (d.n, d.k) != (p.n, p.k):
        raise ValueError("dimension mismatch between divisor form and Plücker vector")
    return complex(np.dot(d.coeffs, p.coords))


def divisor_distance(p: PluckerVector, d: DivisorForm) -> float:
    """|⟨d, p⟩| in [0, 1]; zero exactly when p lies on the divisor."""
    return abs(divisor_pairing(d, p))


def intersects_nontrivially(g: Subspace, f: Subspace) -> tuple[bool, float]:
    """Whether dim(G ∩ F) >= 1 for a k-plane G and codim-k subspace F.

    Decided by near-singularity of the k x k pairing matrix (φ_i(v_j))
    with φ an annihilator basis of F; returns (verdict, residual) where
    residual is the smallest/largest singular-value ratio, so callers
    can re-threshold.
    """
    n = g.ambient_dim
    if f.ambient_dim != n or g.dim != n - f.dim:
        raise ValueError("need dim G = codim F in the same ambient space")
    pairing = annihilator(f).basis.conj().T @ g.basis
    s = np.linalg.svd(pairing, compute_uv=False)
    residual = float(s[-1] / s[0]) if s[0] > 0 else 0.0
    return residual <= INTERSECT_RTOL, residual


# ---------------------------------------------------------------------------
# structure forms and isotropy


@dataclass(frozen=True)
class StructureForm:
    """Hermitian form, symplectic form, or real structure on C^n.

    kind "hermitian": matrix J with J = Jᴴ, pairing h(u, v) = vᴴ J u.
    kind "symplectic": antisymmetric nondegenerate J, pairing vᵗ J u.
    kind "real": antilinear involution v -> S·conj(v), S·conj(S) = I.
    """

    kind: str
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if self.kind == "hermitian":
            if np.max(np.abs(m - m.conj().T)) > 1e-10:
                raise ValueError("hermitian form matrix must equal its conjugate transpose")
        elif self.kind == "symplectic":
            if np.max(np.abs(m + m.T)) > 1e-10:
                raise ValueError("symplectic form matrix must be antisymmetric")
            if abs(np.linalg.det(m)) < 1e-12:
                raise ValueError("symplectic form must be nondegenerate")
        elif self.kind == "real":
            if np.max(np.abs(m @ m.conj() - np.eye(m.shape[0]))) > 1e-10:
                raise ValueError("real structure must square to the identity")
        else:
            raise ValueError(f"unknown structure kind {self.kind!r}")

    def signature(self) -> tuple[int, int]:
        if self.kind != "hermitian":
            raise ValueError("signature only defined for hermitian forms")
        ev = np.linalg.eigvalsh(self.matrix)
        return int((ev > 0).sum()), int((ev < 0).sum())


def isotropic(g: Subspace, s: StructureForm) -> tuple[bool, float]:
    """Whether the form vanishes identically on G; returns (verdict, residual)."""
    b = g.basis
    if s.kind == "hermitian":
        rest = b.conj().T @ s.matrix @ b
    elif s.kind == "symplectic":
        rest = b.T @ s.matrix @ b
    else:
        raise ValueError("isotropy is asked of hermitian or symplectic forms")
    residual = float(np.max(np.abs(rest)))
    return residual <= 1e-9, residual


def is_real_subspace(g: Subspace, s: StructureForm) -> tuple[bool, float]:
    """Whether G is fixed by the real structure (σ(G) = G)."""
    if s.kind != "real":
        raise ValueError("need a real structure")
    conj_basis = s.matrix @ g.basis.conj()
    proj = g.basis @ g.basis.conj().T
    residual = float(np.max(np.abs(conj_basis - proj @ conj_basis)))
    return residual <= 1e-9, residual


# ---------------------------------------------------------------------------
# (1, k, 1) weight-2 structure and the avoidance predicate


@dataclass(frozen=True)
class Weight2Type1k1:
    """Hodge-type (1, k, 1) linear data on C^(k+2).

    Basis order: e_0 spans the first line, e_1..e_k the middle block,
    e_{k+1} the last line.  The hermitian form is +1 on the outer lines
    and -1 on the middle block; the real structure swaps the outer lines
    and fixes the middle basis vectors.
    """

    k: int

    @property
    def n(self) -> int:
        return self.k + 2

    def hermitian(self) -> StructureForm:
        d = np.ones(self.n)
        d[1 : self.k + 1] = -1.0
        return StructureForm("hermitian", np.diag(d).astype(complex))

    def real_structure(self) -> StructureForm:
        s = np.eye(self.n, dtype=complex)
        s[0, 0] = s[-1, -1] = 0.0
        s[0, -1] = s[-1, 0] = 1.0
        return StructureForm("real", s)

    def middle_block(self) -> Subspace:
        b = np.zeros((self.n, self.k), dtype=complex)
        b[1 : self.k + 1, :] = np.eye(self.k)
        return Subspace(b)

    def last_line(self) -> Subspace:
        b = np.zeros((self.n, 1), dtype=complex)
        b[-1, 0] = 1.0
        return Subspace(b)


def weight2_divisor_avoidance(k: int, n_samples: int, seed: int = 0) -> bool:
    """Sampled check that no real isotropic line lies in the middle block
    and that the last line never lies in a plane whose h-orthogonal is a
    real isotropic line (the invariant family of (k+1)-planes).

    Real vectors have the shape (a, c, conj(a)) with c real, so isotropy
    forces |a| > 0; vectors with |h(v,v)| <= 1e-12 are rejected and
    resampled.  Returns True when no violation is found.
    """
    data = Weight2Type1k1(k)
    h = data.hermitian().matrix
    rng = derived_stream(seed, 21, k)
    found = 0
    attempts = 0
    while found < n_samples:
        attempts += 1
        if attempts > 50 * n_samples:
            raise RuntimeError("rejection sampling failed to find isotropic vectors")
        a = complex(rng.standard_normal() + 1j * rng.standard_normal())
        c = rng.standard_normal(k)
        norm_c = np.linalg.norm(c)
        if norm_c < 1e-12 or abs(a) < 1e-12:
            continue
        # impose isotropy 2|a|^2 = |c|^2 by rescaling the middle part
        c = c * (math.sqrt(2.0) * abs(a) / norm_c)
        v = np.concatenate([[a], c.astype(complex), [np.conjugate(a)]])
        if abs(v.conj() @ h @ v) > 1e-9 * float((v.conj() @ v).real):
            continue
        found += 1
        # middle-block membership would force a = 0
        if abs(v[0]) <= 1e-12 and abs(v[-1]) <= 1e-12:
            return False
        # the h-orthogonal (k+1)-plane of v must not contain e_{k+1}
        if abs(np.conjugate(v) @ h @ data.last_line().basis[:, 0]) <= 1e-12:
            return False
    # random real vectors in the middle block are h-negative
    for _ in range(n_samples):
        c = rng.standard_normal(k)
        if np.linalg.norm(c) < 1e-12:
            continue
        v = np.zeros(data.n, dtype=complex)
        v[1 : k + 1] = c
        if (v.conj() @ h @ v).real >= 0.0:
            return False
    return True


# ---------------------------------------------------------------------------
# corrected exterior norm identity


def _compound_norm(m: np.ndarray, r: int) -> float:
    """Operator norm of Λ^r m = product of the r largest singular values."""
    if r == 0:
        return 1.0
    s = np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)
    return float(np.prod(s[:r]))


def corrected_norm_identity_residual(m: np.ndarray, r: int) -> float:
    """|log(‖Λ^r M‖/‖Λ^{r-1} M‖) + log(‖Λ^{n-r+1} M⁻¹‖/‖Λ^{n-r} M⁻¹‖)|.

    Both ratios equal the r-th singular value (of M and of M⁻¹ reversed),
    so the residual vanishes for every invertible M; the uncorrected
    index (n-r in place of n-r+1) fails already on diag(2, 1, 1/2).
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if not 1 <= r <= n - 1:
        raise ValueError(f"need 1 <= r <= n-1, got r={r}")
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] < 1e-14 * s[0]:
        raise DegeneracyError("matrix is numerically singular")
    minv = np.linalg.inv(m)
    lhs = math.log(_compound_norm(m, r)) - math.log(_compound_norm(m, r - 1))
    rhs = math.log(_compound_norm(minv, n - r + 1)) - math.log(_compound_norm(minv, n - r))
    return abs(lhs + rhs)


# ---------------------------------------------------------------------------
# Lagrangian orbit coverage


_SP4_J = np.array(
    [[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]], dtype=np.int64
)


def is_symplectic_integer(m: np.ndarray) -> bool:
    m = np.asarray(m)
    if m.shape != (4, 4) or not np.issubdtype(m.dtype, np.integer):
        return False
    return bool(np.array_equal(m.T @ _SP4_J @ m, _SP4_J))


def sp4_standard_generators() -> tuple[np.ndarray, np.ndarray]:
    """The symplectic rotation J and a standard transvection."""
    t = np.eye(4, dtype=np.int64)
    t[0, 2] = 1
    return _SP4_J.copy(), t


def lagrangian_from_unitary(u: np.ndarray) -> np.ndarray:
    """Real Lagrangian 2-plane in R^4 as the column span of [Re U; Im U]."""
    return np.vstack([u.real, u.imag])


def _plane_projector(basis: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(basis.astype(float))
    return q @ q.T


def lagrangian_orbit_coverage(
    generators: list[np.ndarray],
    start: np.ndarray,
    depth: int,
    grid_eps: float,
    seed: int = 0,
    max_orbit: int = 200_000,
) -> float:
    """Fraction of ε-net cells of the Lagrangian Grassmannian containing
    an orbit point of `start` under words of length <= depth in the given
    Sp(4, Z) generators.

    The net is a fixed seeded sample of Lagrangian planes [Re U; Im U]
    for Haar-ish unitaries U, with cell count ~ grid_eps^-3; a cell
    "contains" an orbit plane when it is the plane's nearest net point
    (Voronoi partition in chordal projector distance), so depth 0 covers
    exactly one cell and coverage is monotone in depth.  Integer words
    are deduplicated exactly; entries beyond the 64-bit-safe range raise
    OverflowError.
    """
    if depth < 0 or depth > 12:
        raise ValueError("depth must be in 0..12")
    gens: list[np.ndarray] = []
    for g in generators:
        gi = np.asarray(g)
        if not is_symplectic_integer(gi.astype(np.int64)):
            raise ValueError("generators must be integer symplectic (Sp(4, Z))")
        gens.append(gi.astype(object))  # python ints: overflow-free products
    gens = gens + [np.asarray(np.linalg.inv(g.astype(float)).round().astype(np.int64), dtype=object) for g in gens]

    start = np.asarray(start, dtype=float)
    if start.shape != (4, 2):
        raise ValueError("start must be a 4x2 Lagrangian basis")
    if np.max(np.abs(start.T @ _SP4_J.astype(float) @ start)) > 1e-9:
        raise ValueError("start plane is not Lagrangian")

    limit = np.iinfo(np.int64).max // 16
    seen = set()
    frontier = [np.eye(4, dtype=object)]
    orbit_mats = [np.eye(4, dtype=object)]
    seen.add(tuple(np.eye(4, dtype=np.int64).ravel().tolist()))
    for _ in range(depth):
        nxt = []
        for m in frontier:
            for g in gens:
                prod = m @ g
                flat = tuple(int(v) for v in prod.ravel())
                if any(abs(v) > limit for v in flat):
                    raise OverflowError("Sp(4,Z) word left the 64-bit-safe range")
                if flat in seen:
                    continue
                seen.add(flat)
                nxt.append(prod)
                orbit_mats.append(prod)
                if len(orbit_mats) > max_orbit:
                    raise MemoryError(f"orbit exceeded cap {max_orbit}")
        frontier = nxt

    orbit_projs = np.array(
        [_plane_projector(m.astype(float) @ start) for m in orbit_mats]
    )

    n_net = max(32, int(round(6.0 / grid_eps**3)))
    if n_net > 100_000:
        raise MemoryError(f"grid_eps {grid_eps} needs {n_net} net cells > cap")
    rng = derived_stream(seed, 44)
    net = np.empty((n_net, 4, 4))
    for i in range(n_net):
        z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        u, _ = np.linalg.qr(z)
        net[i] = _plane_projector(lagrangian_from_unitary(u))

    covered: set[int] = set()
    flat_net = net.reshape(n_net, 16)
    for proj in orbit_projs:
        d2 = ((flat_net - proj.ravel()) ** 2).sum(axis=1)
        covered.add(int(d2.argmin()))
    return len(covered) / n_net
