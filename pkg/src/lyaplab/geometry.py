"""Hyperbolic plane, Möbius maps, fundamental polygons, Schottky limit sets.

The upper half-plane {(x, y) : y > 0} with metric (dx² + dy²)/y² is the
single canonical model.  Disk-model constructions (the regular octagon)
are converted through the Cayley transform at build time, so every
downstream consumer sees only half-plane data.

A fundamental polygon is a list of geodesic sides, each bounded by a
vertical line x = c or a semicircle centred on the real axis.  Side i
carries a pairing Möbius map S_i sending side i onto side partner(i),
with the convention that S_i maps the fundamental domain D onto the tile
adjacent to D across side partner(i).  Consequently a point that exits D
through side i re-enters by applying S_i, and the deck word picks up the
letter of S_i^{-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TOL = 1e-12  # within this of a side counts as Inside (tie-break)


class GeometryError(ValueError):
    """Numerical degeneracy in a hyperbolic-geometry operation."""


class NonTerminationError(RuntimeError):
    """Domain reduction exceeded its word-length cap."""


class ResourceError(RuntimeError):
    """A sampling request exceeds the configured memory cap."""


@dataclass(frozen=True)
class HPoint:
    """Point of the upper half-plane; y > 0 always."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite half-plane point ({self.x}, {self.y})")
        if self.y <= 0.0:
            raise GeometryError(f"half-plane ordinate must be positive, got {self.y}")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class Mobius:
    """Real 2x2 matrix of determinant one acting by z -> (az+b)/(cz+d).

    Determinant is renormalized to 1 after every composition; the check
    tolerance scales with the squared entry size because evaluating
    ad - bc of a large-entry matrix is itself that ill-conditioned.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        # evaluating ad - bc carries an intrinsic cancellation floor of
        # order eps·max|entry|²·(word length), so the unit-determinant
        # invariant is strict at construction scale, loose for long
        # products, and unverifiable beyond; the Möbius action itself
        # stays accurate at any scale.
        scale = max(1.0, self.a * self.a, self.b * self.b, self.c * self.c, self.d * self.d)
        if scale < 1e6:
            det = self.a * self.d - self.b * self.c
            tol = 1e-12 * scale if scale <= 1e3 else 1e-10 * scale
            if abs(det - 1.0) > tol:
                raise GeometryError(f"Mobius determinant {det} is not 1 within tolerance")

    @classmethod
    def from_matrix(cls, m) -> "Mobius":
        """Build from a positive-determinant real 2x2, renormalizing det to 1.

        Renormalization happens only while the entry scale stays small:
        evaluating ad - bc of a large-entry matrix carries absolute error
        ~1e-16·scale², so dividing by its square root past scale ~32 would
        inject more error than the raw product accumulates.  The Möbius
        action is scale-invariant, so nothing downstream notices, and the
        determinant check stays within its scale-aware tolerance.
        """
        a, b, c, d = float(m[0][0]), float(m[0][1]), float(m[1][0]), float(m[1][1])
        scale = max(abs(a), abs(b), abs(c), abs(d))
        if scale >= 32.0:
            return cls(a, b, c, d)
        det = a * d - b * c
        if det <= 0:
            raise GeometryError(f"matrix determinant {det} must be positive")
        s = math.sqrt(det)
        return cls(a / s, b / s, c / s, d / s)

    @classmethod
    def identity(cls) -> "Mobius":
        return cls(1.0, 0.0, 0.0, 1.0)

    def compose(self, other: "Mobius") -> "Mobius":
        """self ∘ other, renormalized to determinant 1."""
        return Mobius.from_matrix(
            (
                (self.a * other.a + self.b * other.c, self.a * other.b + self.b * other.d),
                (self.c * other.a + self.d * other.c, self.c * other.b + self.d * other.d),
            )
        )

    def inverse(self) -> "Mobius":
        return Mobius(self.d, -self.b, -self.c, self.a)

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    def __call__(self, p: HPoint) -> HPoint:
        return mobius_apply(self, p)


def mobius_apply(m: Mobius, p: HPoint) -> HPoint:
    """Fractional-linear image of p; raises GeometryError if rounding kills y."""
    den_re = m.c * p.x + m.d
    den_im = m.c * p.y
    den2 = den_re * den_re + den_im * den_im
    if den2 == 0.0:
        raise GeometryError("Mobius image at a pole")
    num_re = m.a * p.x + m.b
    num_im = m.a * p.y
    x = (num_re * den_re + num_im * den_im) / den2
    y = (num_im * den_re - num_re * den_im) / den2
    if y <= 0.0:
        raise GeometryError(f"Mobius image degenerated to y={y}")
    return HPoint(x, y)


def hyperbolic_distance(p: HPoint, q: HPoint) -> float:
    """d(p, q) with cosh d = 1 + ((Δx)² + (Δy)²)/(2 y_p y_q)."""
    dx = p.x - q.x
    dy = p.y - q.y
    arg = 1.0 + (dx * dx + dy * dy) / (2.0 * p.y * q.y)
    # guard against arg dipping below 1 by rounding
    return math.acosh(max(arg, 1.0))


def mobius_displacement(m: Mobius, origin: HPoint) -> float:
    """d(origin, m·origin) via cosh d(i, g·i) = ‖g‖_F²/2 for unimodular g.

    Stays accurate for deck elements whose image coordinates are beyond
    direct evaluation (the image ordinate is a difference of huge
    products, but the Frobenius norm accumulates positively).
    """
    s = math.sqrt(origin.y)
    b1, b2, b4 = 1.0 / s, -origin.x / s, s  # B⁻¹ rows (b3 = 0)
    c1 = b1 * m.a + b2 * m.c
    c2 = b1 * m.b + b2 * m.d
    c3 = b4 * m.c
    c4 = b4 * m.d
    a1 = c1 * s
    a2 = (c1 * origin.x + c2) / s
    a3 = c3 * s
    a4 = (c3 * origin.x + c4) / s
    arg = 0.5 * (a1 * a1 + a2 * a2 + a3 * a3 + a4 * a4)
    return math.acosh(max(arg, 1.0))


# ---------------------------------------------------------------------------
# fundamental polygons


@dataclass(frozen=True)
class Side:
    """One geodesic side of a fundamental polygon.

    is_circle False: the vertical line x = position.
    is_circle True : the semicircle |z - position| = radius on the real axis.
    `pairing` maps this side onto side `partner`; `letter` is the signed
    generator index with generator(letter) == pairing.
    """

    is_circle: bool
    position: float
    radius: float
    pairing: Mobius
    partner: int
    letter: int

    def sign_value(self, x: float, y: float) -> float:
        if self.is_circle:
            dx = x - self.position
            return dx * dx + y * y - self.radius * self.radius
        return x - self.position


@dataclass(frozen=True)
class SurfaceModel:
    """Fundamental polygon with side pairings for a hyperbolic surface.

    `area` is the hyperbolic area from Gauss-Bonnet; `cusp_vertices` flags
    ideal vertices (cusped models only).  An empty side list means free
    motion on the whole half-plane.
    """

    name: str
    sides: tuple[Side, ...]
    generators: tuple[Mobius, ...]
    basepoint: HPoint
    area: float
    cusped: bool = False
    cusp_vertices: tuple[complex, ...] = ()
    relation_word: tuple[int, ...] = ()  # vertex-cycle relator; empty for free groups
    vertices: tuple[complex, ...] = ()  # finite polygon vertices (compact models)
    inside_signs: tuple[float, ...] = field(default=(), compare=False)
    side_table: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        signs = []
        for s in self.sides:
            v = s.sign_value(self.basepoint.x, self.basepoint.y)
            if abs(v) <= BOUNDARY_TOL:
                raise GeometryError("basepoint lies on a side geodesic")
            signs.append(1.0 if v > 0 else -1.0)
        object.__setattr__(self, "inside_signs", tuple(signs))
        # flat per-side tables for the hot simulation loops
        object.__setattr__(
            self,
            "side_table",
            tuple(
                (
                    s.is_circle,
                    s.position,
                    s.radius * s.radius,
                    signs[i],
                    (s.pairing.a, s.pairing.b, s.pairing.c, s.pairing.d),
                    -s.letter,
                )
                for i, s in enumerate(self.sides)
            ),
        )

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    def generator(self, letter: int) -> Mobius:
        """Signed generator lookup: letter k>0 is generators[k-1], -k its inverse."""
        if letter == 0 or abs(letter) > len(self.generators):
            raise GeometryError(f"invalid generator letter {letter}")
        g = self.generators[abs(letter) - 1]
        return g if letter > 0 else g.inverse()

    def word_mobius(self, word) -> Mobius:
        """Left-to-right Möbius product of a deck word."""
        m = Mobius.identity()
        for letter in word:
            m = m.compose(self.generator(letter))
        return m


def locate(surface: SurfaceModel, p: HPoint) -> int | None:
    """None if p is interior (within 1e-12 of a side counts as inside);
    otherwise the first side index, in list order, whose geodesic
    separates p from the basepoint."""
    for i, s in enumerate(surface.sides):
        if s.sign_value(p.x, p.y) * surface.inside_signs[i] < -BOUNDARY_TOL:
            return i
    return None


def reduce_to_domain(
    surface: SurfaceModel, p: HPoint, cap: int = 10_000
) -> tuple[HPoint, list[int]]:
    """Return (q, word) with q interior and word_mobius(word)(q) == p.

    Each exit through side i applies S_i and appends the letter of
    S_i^{-1}; raises NonTerminationError past `cap` applications.
    """
    word: list[int] = []
    q = p
    for _ in range(cap):
        i = locate(surface, q)
        if i is None:
            return q, word
        side = surface.sides[i]
        q = mobius_apply(side.pairing, q)
        word.append(-side.letter)
    raise NonTerminationError(
        f"domain reduction on {surface.name} exceeded cap {cap} from ({p.x}, {p.y}); "
        "bad domain data or cusp excursion"
    )


# ---------------------------------------------------------------------------
# bundled models


def _cayley_to_halfplane(w: complex) -> complex:
    """Disk -> half-plane, i(1+w)/(1-w)."""
    return 1j * (1.0 + w) / (1.0 - w)


def _su11_to_sl2r(m: np.ndarray) -> Mobius:
    """Conjugate a disk-model isometry (SU(1,1)-type) into PSL(2,R)."""
    cay = np.array([[1.0, -1j], [1.0, 1j]], dtype=complex)  # z -> (z-i)/(z+i) up to scale
    h = np.linalg.solve(cay, m @ cay)
    h = h / np.sqrt(np.linalg.det(h))
    if np.max(np.abs(h.imag)) > 1e-9:
        h = h * np.exp(-1j * np.angle(h[0, 0]))
    if np.max(np.abs(h.imag)) > 1e-9:
        raise GeometryError("disk isometry did not conjugate to a real matrix")
    re = h.real
    if re[0, 0] * re[1, 1] - re[0, 1] * re[1, 0] < 0:
        re = -re
    return Mobius.from_matrix(re)


def _geodesic_through(z1: complex, z2: complex) -> tuple[bool, float, float]:
    """(is_circle, position, radius) of the half-plane geodesic through z1, z2."""
    if abs(z1.real - z2.real) < 1e-9 * max(1.0, abs(z1), abs(z2)):
        return False, 0.5 * (z1.real + z2.real), 0.0
    c = (abs(z1) ** 2 - abs(z2) ** 2) / (2.0 * (z1.real - z2.real))
    r = abs(z1 - c)
    return True, c, r


def genus2_octagon() -> SurfaceModel:
    """Regular hyperbolic octagon with opposite sides paired (genus 2).

    Built in the disk: vertices at angles (2j+1)π/8, interior angles π/4,
    distance from centre to a side midpoint d_s = arccosh(cot π/8).  Side j
    (midpoint direction jπ/4) is paired with side j+4 by the hyperbolic
    translation T_j of length 2 d_s along the diameter at angle jπ/4.
    All eight vertices form one cycle of total angle 2π, and the cycle
    relator in the generator letters (T_1..T_4 = T_0..T_3 here) is
    (-1, 2, -3, 4, 1, -2, 3, -4): the matrix product in that order is the
    identity.  Area 4π by Gauss-Bonnet.
    """
    ds = math.acosh(1.0 / math.tan(math.pi / 8.0))
    dv = math.acosh(1.0 / math.tan(math.pi / 8.0) ** 2)
    r_vert = math.tanh(dv / 2.0)  # euclidean vertex radius in the disk

    half = 2.0 * ds / 2.0
    trans = np.array([[math.cosh(half), math.sinh(half)], [math.sinh(half), math.cosh(half)]])

    gens: list[Mobius] = []
    for j in range(4):
        phi = j * math.pi / 4.0
        rot = np.array(
            [[np.exp(1j * phi / 2.0), 0.0], [0.0, np.exp(-1j * phi / 2.0)]], dtype=complex
        )
        gens.append(_su11_to_sl2r(rot @ trans.astype(complex) @ np.conj(rot.T)))

    verts = [
        _cayley_to_halfplane(r_vert * np.exp(1j * (2 * j + 1) * math.pi / 8.0)) for j in range(-1, 7)
    ]  # verts[j] is the vertex at angle (2j-1)π/8; side j runs verts[j] -> verts[j+1 mod 8]

    sides: list[Side] = []
    for j in range(8):
        is_circle, pos, rad = _geodesic_through(verts[j], verts[(j + 1) % 8])
        if j < 4:
            pairing, partner, letter = gens[j].inverse(), j + 4, -(j + 1)
        else:
            pairing, partner, letter = gens[j - 4], j - 4, j - 3
        sides.append(Side(is_circle, pos, rad, pairing, partner, letter))

    return SurfaceModel(
        name="genus2_octagon",
        sides=tuple(sides),
        generators=tuple(gens),
        basepoint=HPoint(0.0, 1.0),
        area=4.0 * math.pi,
        cusped=False,
        relation_word=(-1, 2, -3, 4, 1, -2, 3, -4),
        vertices=tuple(verts),
    )


def cusped_quadrilateral() -> SurfaceModel:
    """Ideal quadrilateral with vertices ∞, -1, 0, 1 (thrice-punctured sphere).

    Generators g1: z -> z+2 pairing x=-1 with x=+1, and g2: z -> z/(2z+1)
    pairing |z+1/2| = 1/2 with |z-1/2| = 1/2; free of rank 2, area 2π.
    """
    g1 = Mobius(1.0, 2.0, 0.0, 1.0)
    g2 = Mobius(1.0, 0.0, 2.0, 1.0)
    sides = (
        Side(False, -1.0, 0.0, g1, 1, 1),
        Side(False, 1.0, 0.0, g1.inverse(), 0, -1),
        Side(True, -0.5, 0.5, g2, 3, 2),
        Side(True, 0.5, 0.5, g2.inverse(), 2, -2),
    )
    return SurfaceModel(
        name="cusped_quadrilateral",
        sides=sides,
        generators=(g1, g2),
        basepoint=HPoint(0.0, 1.5),
        area=2.0 * math.pi,
        cusped=True,
        cusp_vertices=(complex("inf"), -1.0 + 0j, 0.0 + 0j, 1.0 + 0j),
    )


def free_plane() -> SurfaceModel:
    """No sides: free Brownian motion on the whole half-plane."""
    return SurfaceModel(
        name="free_plane",
        sides=(),
        generators=(),
        basepoint=HPoint(0.0, 1.0),
        area=math.inf,
        cusped=False,
    )


SURFACE_BUILDERS = {
    "genus2_octagon": genus2_octagon,
    "cusped_quadrilateral": cusped_quadrilateral,
    "free_plane": free_plane,
}


def build_surface(name: str) -> SurfaceModel:
    try:
        return SURFACE_BUILDERS[name]()
    except KeyError:
        raise GeometryError(
            f"unknown surface {name!r}; available: {sorted(SURFACE_BUILDERS)}"
        ) from None


def uniform_domain_sample(surface: SurfaceModel, n: int, seed: int = 0) -> list[HPoint]:
    """n points uniform for the hyperbolic area measure on a compact
    fundamental domain, by rejection in (x, 1/y) coordinates (where the
    area measure dx dy / y² is Lebesgue)."""
    if surface.cusped or not surface.sides or not surface.vertices:
        raise GeometryError("uniform sampling needs a compact polygon with stored vertices")
    from .rng import derived_stream

    vx = [v.real for v in surface.vertices]
    vy = [v.imag for v in surface.vertices]
    circles = [s for s in surface.sides if s.is_circle]
    x_lo = min(vx + [s.position - s.radius for s in circles])
    x_hi = max(vx + [s.position + s.radius for s in circles])
    y_lo = min(vy)
    y_hi = max(vy + [s.radius for s in circles])
    v_lo, v_hi = 1.0 / y_hi, 1.0 / y_lo
    rng = derived_stream(seed, 99)
    out: list[HPoint] = []
    while len(out) < n:
        xs = rng.uniform(x_lo, x_hi, size=4 * (n - len(out)))
        vs = rng.uniform(v_lo, v_hi, size=xs.size)
        for xv, vv in zip(xs, vs):
            p = HPoint(float(xv), 1.0 / float(vv))
            if locate(surface, p) is None:
                out.append(p)
                if len(out) == n:
                    break
    return out


# ---------------------------------------------------------------------------
# Schottky groups on the boundary sphere


@dataclass(frozen=True)
class SchottkyData:
    """Disjoint circle pairs with complex Möbius generators.

    generators[k] maps the exterior of circle (centers_a[k], radii_a[k])
    onto the interior of circle (centers_b[k], radii_b[k]).
    """

    centers_a: tuple[complex, ...]
    radii_a: tuple[float, ...]
    centers_b: tuple[complex, ...]
    radii_b: tuple[float, ...]
    generators: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        disks = list(zip(self.centers_a + self.centers_b, self.radii_a + self.radii_b))
        for i in range(len(disks)):
            for j in range(i + 1, len(disks)):
                if abs(disks[i][0] - disks[j][0]) <= disks[i][1] + disks[j][1]:
                    raise GeometryError("Schottky disks are not pairwise disjoint")
        for k, g in enumerate(self.generators):
            if abs(np.linalg.det(g) - 1.0) > 1e-9:
                raise GeometryError(f"Schottky generator {k} is not unimodular")
            for t in np.linspace(0.0, 2.0 * math.pi, 7)[:-1]:
                z = self.centers_a[k] + self.radii_a[k] * np.exp(1j * t)
                w = _mobius_c(g, z)
                if abs(abs(w - self.centers_b[k]) - self.radii_b[k]) > 1e-8:
                    raise GeometryError(f"generator {k} does not map circle A onto circle B")

    @property
    def rank(self) -> int:
        return len(self.generators)


def _mobius_c(m: np.ndarray, z: complex) -> complex:
    den = m[1, 0] * z + m[1, 1]
    if den == 0:
        return complex("inf")
    return (m[0, 0] * z + m[0, 1]) / den


def pair_generator(ca: complex, ra: float, cb: complex, rb: float) -> np.ndarray:
    """Unimodular Möbius sending the exterior of circle (ca, ra) onto the
    interior of circle (cb, rb): z -> cb + ra·rb/(z - ca)."""
    m = np.array([[cb, ra * rb - ca * cb], [1.0, -ca]], dtype=complex)
    return m / np.sqrt(np.linalg.det(m) + 0j)


def limit_set_sample(s: SchottkyData, depth: int, max_points: int = 2_000_000) -> np.ndarray:
    """Images of disk centres under all reduced words of length == depth.

    For m generator pairs the sample has exactly 2m·(2m-1)^(depth-1)
    points, all inside the union of the initial disks.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    m = s.rank
    count = 2 * m * (2 * m - 1) ** (depth - 1)
    if count > max_points:
        raise ResourceError(f"depth {depth} needs {count} points > cap {max_points}")

    letters = [k + 1 for k in range(m)] + [-(k + 1) for k in range(m)]
    mats = {k + 1: s.generators[k] for k in range(m)}
    mats.update({-(k + 1): np.linalg.inv(s.generators[k]) for k in range(m)})
    # letter +k contracts into circle B_k, letter -k into circle A_k
    target = {k + 1: s.centers_b[k] for k in range(m)}
    target.update({-(k + 1): s.centers_a[k] for k in range(m)})

    # frontier: (last letter, matrix of the word so far)
    frontier: list[tuple[int, np.ndarray]] = [(l, mats[l]) for l in letters]
    for _ in range(depth - 1):
        nxt = []
        for last, mat in frontier:
            for l in letters:
                if l == -last:  # not reduced
                    continue
                nxt.append((l, mat @ mats[l]))
        frontier = nxt
    return np.array([_mobius_c(mat, target[last]) for last, mat in frontier])
