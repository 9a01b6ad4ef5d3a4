"""Exact integer-lattice geometry of the Fermi ball.

Membership tests are exact: radii are carried as rationals, so two runs always
produce identical point sets regardless of float rounding.  Everything here is
immutable after construction and safe to evaluate concurrently.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Momentum",
    "FermiBall",
    "InteractionPotential",
    "EncodedSet",
    "build_fermi_ball",
    "dispersion",
    "shell_pairs",
    "shell_denominators",
    "kinetic_reciprocal_sum",
    "equator_reciprocal_sum",
    "count_slice",
    "annulus_count_vs_area",
    "hartree_fock_energy",
    "excitation_energy",
]

EQUATOR_DELTA_MAX = Fraction(77, 624)

#: ideal Fermi-radius constant: k_F = KAPPA_IDEAL * N^(1/3) as N grows
KAPPA_IDEAL = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)


class Momentum(NamedTuple):
    """Integer momentum vector on the Z^3 lattice."""

    px: int
    py: int
    pz: int

    def norm_sq(self) -> int:
        return self.px * self.px + self.py * self.py + self.pz * self.pz


def _as_momentum(p: Sequence[int]) -> Momentum:
    x, y, z = (int(c) for c in p)
    return Momentum(x, y, z)


def _as_ivec(p: Sequence[int]) -> np.ndarray:
    v = np.asarray(p, dtype=np.int64)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    return v


class EncodedSet:
    """Sorted-integer encoding of a finite set of lattice points.

    Points are packed into a single int64 per point so that membership queries
    reduce to searchsorted, and so that a query for ``p + k`` is a constant
    shift of the code of ``p``.
    """

    def __init__(self, points: np.ndarray, half_width: int):
        self.half = int(half_width)
        self.stride = 2 * self.half + 1
        if len(points):
            if np.abs(points).max() > self.half:
                raise ValueError("points exceed encoding half-width")
        self.codes = np.sort(self.encode(points))

    def encode(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
        h, s = self.half, self.stride
        return ((points[:, 0] + h) * s + (points[:, 1] + h)) * s + (points[:, 2] + h)

    def shift(self, k: Sequence[int]) -> int:
        kx, ky, kz = (int(c) for c in k)
        return (kx * self.stride + ky) * self.stride + kz

    def contains_codes(self, codes: np.ndarray) -> np.ndarray:
        if not len(self.codes):
            return np.zeros(len(codes), dtype=bool)
        idx = np.searchsorted(self.codes, codes)
        idx = np.minimum(idx, len(self.codes) - 1)
        return self.codes[idx] == codes

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
        ok = (np.abs(points) <= self.half).all(axis=1)
        out = np.zeros(len(points), dtype=bool)
        if ok.any():
            out[ok] = self.contains_codes(self.encode(points[ok]))
        return out


class FermiBall:
    """All integer momenta with |p|^2 <= k_F^2, plus the derived scaling data.

    The squared radius is stored as an exact rational; membership compares the
    integer |p|^2 against floor(k_F^2) (against k_F^2 itself when it is an
    integer, so boundary points are included exactly).
    """

    def __init__(self, k_fermi_sq: Fraction):
        if k_fermi_sq <= 0:
            raise ValueError("k_fermi_sq must be positive")
        self.k_fermi_sq: Fraction = k_fermi_sq
        self.k_fermi: float = math.sqrt(float(k_fermi_sq))
        # exact integer threshold: |p|^2 <= k_F^2  <=>  |p|^2 <= floor(k_F^2)
        self.norm_sq_max: int = math.floor(k_fermi_sq)
        self._points = _enumerate_ball(self.norm_sq_max)
        self.n_particles: int = len(self._points)
        self.hbar: float = self.n_particles ** (-1.0 / 3.0)
        self.kappa_eff: float = self.k_fermi * self.hbar
        self._encoded: EncodedSet | None = None
        self._norm_sq: np.ndarray | None = None

    @property
    def points(self) -> np.ndarray:
        """Members as an (N, 3) int64 array in lexicographic order."""
        return self._points

    @property
    def norms_sq(self) -> np.ndarray:
        if self._norm_sq is None:
            p = self._points
            self._norm_sq = (p * p).sum(axis=1)
        return self._norm_sq

    @property
    def encoded(self) -> EncodedSet:
        if self._encoded is None:
            half = int(math.isqrt(self.norm_sq_max)) if self.norm_sq_max else 0
            self._encoded = EncodedSet(self._points, half)
        return self._encoded

    def contains(self, p: Sequence[int]) -> bool:
        return _as_momentum(p).norm_sq() <= self.norm_sq_max

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
        return (points * points).sum(axis=1) <= self.norm_sq_max

    def __iter__(self) -> Iterator[Momentum]:
        for row in self._points:
            yield Momentum(int(row[0]), int(row[1]), int(row[2]))

    def __len__(self) -> int:
        return self.n_particles

    def __repr__(self) -> str:
        return f"FermiBall(k_fermi_sq={self.k_fermi_sq}, n={self.n_particles})"


def _enumerate_ball(norm_sq_max: int) -> np.ndarray:
    """Lattice points with |p|^2 <= norm_sq_max, lexicographically sorted."""
    r = math.isqrt(norm_sq_max) if norm_sq_max >= 0 else -1
    if r < 0:
        return np.zeros((0, 3), dtype=np.int64)
    ax = np.arange(-r, r + 1, dtype=np.int64)
    # scan per x-slab to keep peak memory at O(r^2)
    chunks = []
    for x in ax:
        rem = norm_sq_max - int(x) * int(x)
        ry = math.isqrt(rem)
        ay = np.arange(-ry, ry + 1, dtype=np.int64)
        rem_y = rem - ay * ay
        rz = np.floor(np.sqrt(rem_y.astype(np.float64))).astype(np.int64)
        # guard float sqrt at exact squares
        rz = np.where((rz + 1) ** 2 <= rem_y, rz + 1, rz)
        rz = np.where(rz**2 > rem_y, rz - 1, rz)
        counts = 2 * rz + 1
        total = int(counts.sum())
        pts = np.empty((total, 3), dtype=np.int64)
        pts[:, 0] = x
        pts[:, 1] = np.repeat(ay, counts)
        z = np.concatenate([np.arange(-n, n + 1, dtype=np.int64) for n in rz])
        pts[:, 2] = z
        chunks.append(pts)
    return np.concatenate(chunks, axis=0)


def build_fermi_ball(k_fermi: float | None = None, *, k_fermi_sq=None) -> FermiBall:
    """Construct the Fermi ball from a radius or an exact squared radius.

    Half-integer squared radii (e.g. ``k_fermi_sq=Fraction(801, 2)``) make
    every run tie-free; a float radius is squared exactly through its binary
    value.
    """
    if (k_fermi is None) == (k_fermi_sq is None):
        raise ValueError("pass exactly one of k_fermi, k_fermi_sq")
    if k_fermi_sq is not None:
        ksq = Fraction(k_fermi_sq)
    else:
        if k_fermi <= 0:
            raise ValueError("k_fermi must be positive")
        ksq = Fraction(k_fermi) ** 2
    return FermiBall(ksq)


def dispersion(ball: FermiBall, p: Sequence[int]) -> float:
    """Kinetic distance from the Fermi surface, |hbar^2 |p|^2 - kappa_eff^2|.

    Uses kappa_eff = k_F * hbar, so the value vanishes exactly for |p| = k_F.
    """
    gap = Fraction(_as_momentum(p).norm_sq()) - ball.k_fermi_sq
    return ball.hbar**2 * abs(float(gap))


def shell_pairs(ball: FermiBall, k: Sequence[int]) -> np.ndarray:
    """Particle momenta p outside the ball with hole p - k inside.

    Returns an (n, 3) int64 array in lexicographic order; empty for k = 0.
    """
    kv = _as_ivec(k)
    if not kv.any():
        return np.zeros((0, 3), dtype=np.int64)
    p = ball.points + kv
    outside = (p * p).sum(axis=1) > ball.norm_sq_max
    p = p[outside]
    order = np.lexsort((p[:, 2], p[:, 1], p[:, 0]))
    return p[order]


def shell_denominators(ball: FermiBall, k: Sequence[int]) -> np.ndarray:
    """Integer kinetic gaps |p|^2 - |p-k|^2 = 2 p.k - |k|^2 over shell_pairs."""
    kv = _as_ivec(k)
    p = shell_pairs(ball, kv)
    return 2 * (p @ kv) - int(kv @ kv)


def kinetic_reciprocal_sum(ball: FermiBall, k: Sequence[int]) -> float:
    """Sum of 1 / (|p|^2 - |p-k|^2) over all particle-hole pairs at momentum k."""
    kv = _as_ivec(k)
    if not kv.any():
        raise ValueError("k = 0 has no particle-hole pairs (empty domain)")
    den = shell_denominators(ball, kv)
    # every denominator is a positive integer, so fsum keeps this exact to ulp
    return math.fsum(1.0 / d for d in den.tolist())


def equator_reciprocal_sum(ball: FermiBall, k: Sequence[int], delta: float) -> float:
    """Reciprocal sum restricted to pairs with small total kinetic energy.

    Keeps pairs with e(p) + e(p-k) <= 4 N^(-1/3-delta), i.e. integer gaps up
    to 4 N^(1/3-delta).  Requires 0 < delta < 77/624.
    """
    if not (0.0 < delta < float(EQUATOR_DELTA_MAX)):
        raise ValueError(f"delta must lie in (0, 77/624), got {delta}")
    kv = _as_ivec(k)
    if not kv.any():
        raise ValueError("k = 0 has no particle-hole pairs (empty domain)")
    den = shell_denominators(ball, kv)
    cut = 4.0 * ball.n_particles ** (1.0 / 3.0 - delta)
    den = den[den <= cut]
    return math.fsum(1.0 / d for d in den.tolist())


def count_slice(ball: FermiBall, k: Sequence[int], s: int) -> int:
    """Number of shell pairs with p.k = s."""
    kv = _as_ivec(k)
    if not kv.any():
        raise ValueError("k = 0 has no particle-hole pairs (empty domain)")
    p = shell_pairs(ball, kv)
    return int(np.count_nonzero(p @ kv == int(s)))


def annulus_count_vs_area(
    radius_inner: float, radius_outer: float, axis_ratio: int = 1
) -> tuple[int, float]:
    """Integer points in the elliptic annulus r_in^2 < d0 x^2 + y^2 <= r_out^2.

    Returns (count, exact area pi d0^(-1/2) (r_out^2 - r_in^2)).  With
    radius_inner = 0 the full ellipse including the origin is counted.
    """
    d0 = int(axis_ratio)
    if d0 < 1:
        raise ValueError("axis_ratio must be a positive integer")
    if not (0 <= radius_inner < radius_outer):
        raise ValueError("need 0 <= radius_inner < radius_outer")
    lo, hi = radius_inner**2, radius_outer**2
    xmax = int(math.floor(radius_outer / math.sqrt(d0)))
    x = np.arange(-xmax, xmax + 1, dtype=np.int64)
    count = 0
    for xi in x.tolist():
        q0 = d0 * xi * xi
        rem = hi - q0
        if rem < 0:
            continue
        ymax = int(math.floor(math.sqrt(rem)))
        while (ymax + 1) ** 2 + q0 <= hi:
            ymax += 1
        while ymax >= 0 and ymax**2 + q0 > hi:
            ymax -= 1
        if ymax < 0:
            continue
        # inner exclusion: y^2 > lo - q0
        if q0 > lo:
            count += 2 * ymax + 1
        else:
            ymin = int(math.ceil(math.sqrt(lo - q0)))
            while ymin**2 + q0 <= lo:
                ymin += 1
            n_side = ymax - ymin + 1
            if n_side > 0:
                count += 2 * n_side
            if radius_inner == 0 and q0 == 0:
                count += 1  # origin belongs to the full ellipse
    area = math.pi * (hi - lo) / math.sqrt(d0)
    return count, area


class InteractionPotential:
    """Finitely supported, nonnegative, reflection-symmetric Fourier potential."""

    def __init__(self, values: Mapping[Sequence[int], float]):
        table: dict[Momentum, float] = {}
        for key, val in values.items():
            k = _as_momentum(key)
            v = float(val)
            if v < 0:
                raise ValueError(f"potential must be nonnegative, got {v} at {k}")
            table[k] = v
        for k, v in list(table.items()):
            mk = Momentum(-k.px, -k.py, -k.pz)
            if mk not in table:
                raise ValueError(f"potential not reflection symmetric: missing {mk}")
            if table[mk] != v:
                raise ValueError(f"potential not reflection symmetric at {k}")
        self._table = table

    @classmethod
    def from_pairs(cls, pairs) -> "InteractionPotential":
        """Build from (k, value) pairs, completing missing mirror entries.

        A mirror entry that is present with a conflicting value is an error.
        """
        table: dict[Momentum, float] = {}
        for key, val in pairs:
            k = _as_momentum(key)
            v = float(val)
            if k in table and table[k] != v:
                raise ValueError(f"conflicting values for {k}")
            table[k] = v
        for k, v in list(table.items()):
            mk = Momentum(-k.px, -k.py, -k.pz)
            if mk in table:
                if table[mk] != v:
                    raise ValueError(f"conflicting symmetric values at {k}/{mk}")
            else:
                table[mk] = v
        return cls(table)

    def __call__(self, k: Sequence[int]) -> float:
        return self._table.get(_as_momentum(k), 0.0)

    @property
    def support(self) -> list[Momentum]:
        """Momenta with nonzero coefficient, sorted."""
        return sorted(k for k, v in self._table.items() if v != 0.0)

    def items(self):
        return self._table.items()

    @property
    def radius(self) -> float:
        """Diameter of the support as a point set (0 for <= 1 support point)."""
        supp = self.support
        if len(supp) < 2:
            return 0.0
        arr = np.asarray(supp, dtype=np.float64)
        d2 = ((arr[:, None, :] - arr[None, :, :]) ** 2).sum(axis=-1)
        return float(np.sqrt(d2.max()))

    def ell1(self) -> float:
        return math.fsum(abs(v) for v in self._table.values())

    def ell_inf(self) -> float:
        return max((abs(v) for v in self._table.values()), default=0.0)

    def gamma_nor(self) -> list[Momentum]:
        """Normal half of the punctured support: the union with its negation
        covers the nonzero support, the intersection is empty."""
        out = []
        for k in self.support:
            if k.pz > 0 or (k.pz == 0 and k.py > 0) or (k.pz == 0 and k.py == 0 and k.px > 0):
                out.append(k)
        return out

    def scaled(self, factor: float) -> "InteractionPotential":
        return InteractionPotential({k: factor * v for k, v in self._table.items()})


def _exchange_overlap(ball: FermiBall, k: Momentum) -> int:
    """|B_F intersect (B_F + k)| via the encoded member set."""
    enc = ball.encoded
    shifted = ball.points + np.asarray(k, dtype=np.int64)
    return int(enc.contains_points(shifted).sum())


def hartree_fock_energy(ball: FermiBall, v: InteractionPotential) -> float:
    """Energy of the plane-wave Slater determinant filling the ball.

    kinetic + (lambda/2) [N(N-1) V(0) - sum_{p != q} V(p - q)], lambda = 1/N.
    The exchange double sum collapses to one overlap count per support vector.
    """
    n = ball.n_particles
    lam = 1.0 / n
    kinetic = ball.hbar**2 * float(ball.norms_sq.sum())
    direct = v((0, 0, 0)) * n * (n - 1)
    exchange = math.fsum(
        val * _exchange_overlap(ball, k)
        for k, val in v.items()
        if val != 0.0 and k != Momentum(0, 0, 0)
    )
    return kinetic + 0.5 * lam * (direct - exchange)


def _exchange_field(ball: FermiBall, v: InteractionPotential, q: Momentum) -> float:
    """sum_{a in B_F} V(q - a), evaluated over the finite support of V."""
    total = 0.0
    for k, val in v.items():
        if val == 0.0:
            continue
        a = (q.px - k.px, q.py - k.py, q.pz - k.pz)
        if ball.contains(a):
            total += val
    return total


def excitation_energy(
    ball: FermiBall, v: InteractionPotential, hole: Sequence[int], particle: Sequence[int]
) -> float:
    """Energy cost of moving one particle from `hole` to `particle`.

    Closed-form difference of the two determinant energies; O(|supp V|) work.
    """
    h = _as_momentum(hole)
    p = _as_momentum(particle)
    if not ball.contains(h):
        raise ValueError(f"hole {h} is not inside the Fermi ball")
    if ball.contains(p):
        raise ValueError(f"particle {p} is not outside the Fermi ball")
    lam = 1.0 / ball.n_particles
    kinetic = ball.hbar**2 * float(p.norm_sq() - h.norm_sq())
    g_p = _exchange_field(ball, v, p)
    g_h = _exchange_field(ball, v, h)
    rel = Momentum(p.px - h.px, p.py - h.py, p.pz - h.pz)
    return kinetic - lam * (g_p - g_h) + lam * (v(rel) - v((0, 0, 0)))
