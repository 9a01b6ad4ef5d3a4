"""Patch decomposition of the Fermi sphere.

A spherical cap is placed at the north pole, the rest of the northern
hemisphere is cut into collars of equal-area patches, corridors are carved
between neighbouring patches, and the southern hemisphere is the point
reflection of the north.  Extended patches are the radial thickening of the
angular patches intersected with the lattice.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import EncodedSet, FermiBall, Momentum, _as_ivec, _as_momentum

__all__ = [
    "PatchSpec",
    "PatchDecomposition",
    "ModeIndexSet",
    "ShellAssignment",
    "PatchConstructionError",
    "build_patches",
    "patch_of",
    "index_sets",
    "pair_count",
    "decomposition_to_json",
]

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class PatchConstructionError(ValueError):
    """Requested patch layout is infeasible for the given geometry."""


@dataclass(frozen=True)
class PatchSpec:
    """Angular footprint of one northern patch (half-open intervals)."""

    is_cap: bool
    theta_lo: float
    theta_hi: float
    phi_lo: float
    phi_hi: float
    omega: tuple[float, float, float]

    def angular_area(self) -> float:
        if self.is_cap:
            return TWO_PI * (1.0 - math.cos(self.theta_hi))
        band = math.cos(self.theta_lo) - math.cos(self.theta_hi)
        return (self.phi_hi - self.phi_lo) * band


@dataclass(frozen=True)
class ModeIndexSet:
    """Patches coupling to a momentum k, split by the sign of k . omega."""

    k: Momentum
    delta: float
    plus_side: tuple[int, ...]
    minus_side: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.plus_side) + len(self.minus_side)


@dataclass
class ShellAssignment:
    """Lattice points of the radial shell labelled by patch index (-1: corridor)."""

    points: np.ndarray
    labels: np.ndarray
    inside: np.ndarray
    out_codes: list[np.ndarray] = field(default_factory=list)
    in_sets: list[EncodedSet] = field(default_factory=list)
    encoder: EncodedSet | None = None


class PatchDecomposition:
    """M patches with corridors on the Fermi sphere of a given ball.

    Northern patches are stored explicitly; patch ``alpha + M/2`` is the
    antipodal image of patch ``alpha`` for ``alpha < M/2`` (0-based indices).
    """

    def __init__(
        self,
        m_requested: int,
        k_fermi: float,
        n_particles: int,
        r_corridor: float,
        shell_halfwidth: float,
        north: list[PatchSpec],
    ):
        self.m_requested = m_requested
        self.k_fermi = k_fermi
        self.n_particles = n_particles
        self.r_corridor = r_corridor
        self.shell_halfwidth = shell_halfwidth
        self.north = north
        self.m_patches = 2 * len(north)
        omegas = np.array([s.omega for s in north], dtype=np.float64)
        self.omegas = np.vstack([omegas, -omegas])
        self._assignments: dict[int, ShellAssignment] = {}

    @property
    def half(self) -> int:
        return self.m_patches // 2

    def angular_areas(self) -> np.ndarray:
        a = np.array([s.angular_area() for s in self.north])
        return np.concatenate([a, a])

    def assign_directions(self, points: np.ndarray) -> np.ndarray:
        """Patch index for each lattice point's direction, -1 for corridors.

        Radial shell membership is not checked here.
        """
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        r = np.linalg.norm(pts, axis=1)
        labels = np.full(len(pts), -1, dtype=np.int64)
        ok = r > 0
        if not ok.any():
            return labels
        theta = np.arccos(np.clip(pts[ok, 2] / r[ok], -1.0, 1.0))
        phi = np.mod(np.arctan2(pts[ok, 1], pts[ok, 0]), TWO_PI)
        sub = np.full(ok.sum(), -1, dtype=np.int64)
        # southern points map through the antipode: -omega(t, p) = omega(pi-t, p+pi)
        theta_s = math.pi - theta
        phi_s = np.mod(phi + math.pi, TWO_PI)
        for i, spec in enumerate(self.north):
            if spec.is_cap:
                hit_n = theta < spec.theta_hi
                hit_s = theta_s < spec.theta_hi
            else:
                hit_n = (
                    (theta >= spec.theta_lo)
                    & (theta < spec.theta_hi)
                    & (phi >= spec.phi_lo)
                    & (phi < spec.phi_hi)
                )
                hit_s = (
                    (theta_s >= spec.theta_lo)
                    & (theta_s < spec.theta_hi)
                    & (phi_s >= spec.phi_lo)
                    & (phi_s < spec.phi_hi)
                )
            sub[hit_n] = i
            sub[hit_s] = i + self.half
        labels[ok] = sub
        return labels

    def shell_assignment(self, ball: FermiBall) -> ShellAssignment:
        """Label every lattice point of the radial shell; cached per ball."""
        key = id(ball)
        if key in self._assignments:
            return self._assignments[key]
        kf, w = self.k_fermi, self.shell_halfwidth
        r_out = kf + w
        r_in = max(kf - w, 0.0)
        rmax = int(math.floor(r_out))
        ax = np.arange(-rmax, rmax + 1, dtype=np.int64)
        chunks = []
        lo, hi = r_in * r_in, r_out * r_out
        yy, zz = np.meshgrid(ax, ax, indexing="ij")
        for x in ax.tolist():
            q = x * x + yy * yy + zz * zz
            m = (q >= lo) & (q <= hi) & (q > 0)
            if m.any():
                pts = np.empty((int(m.sum()), 3), dtype=np.int64)
                pts[:, 0] = x
                pts[:, 1] = yy[m]
                pts[:, 2] = zz[m]
                chunks.append(pts)
        points = (
            np.concatenate(chunks, axis=0) if chunks else np.zeros((0, 3), dtype=np.int64)
        )
        labels = self.assign_directions(points)
        inside = ball.contains_points(points)
        enc = EncodedSet(np.zeros((0, 3), dtype=np.int64), rmax + 8)
        out_codes, in_sets = [], []
        for a in range(self.m_patches):
            sel = labels == a
            out_codes.append(np.sort(enc.encode(points[sel & ~inside])))
            in_set = EncodedSet(points[sel & inside], rmax + 8)
            in_sets.append(in_set)
        asg = ShellAssignment(points, labels, inside, out_codes, in_sets, enc)
        self._assignments[key] = asg
        return asg

    def __repr__(self) -> str:
        return (
            f"PatchDecomposition(M={self.m_patches} of {self.m_requested} requested, "
            f"k_fermi={self.k_fermi:.4f}, r_corridor={self.r_corridor})"
        )


def _collar_layout(m_patches: int) -> tuple[float, list[int]]:
    """Cap opening angle and per-collar patch counts for the requested M."""
    cap_cos = 1.0 - 2.0 / m_patches
    theta_cap = math.acos(cap_cos)
    if m_patches == 2:
        return theta_cap, []
    n_collars = max(1, round(math.sqrt(m_patches) / 2.0))
    edges = np.linspace(theta_cap, math.pi / 2.0, n_collars + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    counts = [max(1, round(math.sqrt(m_patches) * math.sin(t))) for t in centers]
    return theta_cap, counts


def build_patches(
    m_patches: int,
    ball: FermiBall,
    r_v: float,
    *,
    shell_halfwidth: float | None = None,
) -> PatchDecomposition:
    """Build the patch decomposition with corridors sized for half-width r_v.

    Corridors separate extended patches by strictly more than 2 r_v (one
    lattice spacing of margin); r_v = 0 keeps the full tiling, where pairwise
    disjointness alone already separates the lattice sets by >= 1.  The radial
    shell half-width defaults to max(r_v, 1) so unit-momentum pairs always fit.
    """
    if m_patches < 2 or m_patches % 2:
        raise PatchConstructionError(f"m_patches must be even and >= 2, got {m_patches}")
    if r_v < 0:
        raise ValueError("r_v must be nonnegative")
    kf = ball.k_fermi
    if 2.0 * r_v >= kf / math.sqrt(m_patches):
        raise PatchConstructionError(
            f"corridor width {2 * r_v} is not below the patch scale "
            f"{kf / math.sqrt(m_patches):.3f}; reduce m_patches or r_v"
        )
    if shell_halfwidth is None:
        shell_halfwidth = max(r_v, 1.0)
    if shell_halfwidth >= kf:
        raise PatchConstructionError("shell half-width must be below k_fermi")

    # corridor half-shrink per patch boundary: total angular gap 2*c gives a
    # chord of 2 r_v + 1 at the inner shell radius
    c = (2.0 * r_v + 1.0) / (2.0 * (kf - r_v)) if r_v > 0 else 0.0

    theta_cap0, counts = _collar_layout(m_patches)
    half = 1 + sum(counts)
    area = TWO_PI / half  # equal patch area 4 pi / M', northern share 2 pi

    # collar boundaries in cos(theta), each collar holding `counts[i]` patches
    cos_edges = [1.0 - area / TWO_PI]
    for m in counts:
        cos_edges.append(cos_edges[-1] - m * area / TWO_PI)
    cos_edges[-1] = max(cos_edges[-1], 0.0)

    north: list[PatchSpec] = []
    theta_cap = math.acos(cos_edges[0])
    if theta_cap - c <= 0:
        raise PatchConstructionError("corridor erases the polar cap; reduce r_v or m_patches")
    north.append(
        PatchSpec(True, 0.0, theta_cap - c, 0.0, TWO_PI, (0.0, 0.0, 1.0))
    )
    for i, m in enumerate(counts):
        t_lo = math.acos(cos_edges[i])
        t_hi = math.acos(cos_edges[i + 1])
        t_c = 0.5 * (t_lo + t_hi)
        sin_min = min(math.sin(t_lo), math.sin(t_hi))
        c_phi = c / sin_min if sin_min > 0 else 0.0
        width = TWO_PI / m
        if t_hi - t_lo <= 2 * c or width <= 2 * c_phi:
            raise PatchConstructionError(
                f"corridor erases collar {i} (m_patches={m_patches}, r_v={r_v})"
            )
        for j in range(m):
            p_c = (j + 0.5) * width
            omega = (
                math.sin(t_c) * math.cos(p_c),
                math.sin(t_c) * math.sin(p_c),
                math.cos(t_c),
            )
            north.append(
                PatchSpec(
                    False,
                    t_lo + c,
                    t_hi - c,
                    p_c - width / 2 + c_phi,
                    p_c + width / 2 - c_phi,
                    omega,
                )
            )
    decomp = PatchDecomposition(
        m_patches, kf, ball.n_particles, r_v, float(shell_halfwidth), north
    )
    if decomp.m_patches != m_patches:
        log.info(
            "patch rounding: requested M=%d, built M'=%d", m_patches, decomp.m_patches
        )
    return decomp


def patch_of(decomp: PatchDecomposition, p: Sequence[int]) -> int | None:
    """Patch index containing p, or None for corridor / out-of-shell points."""
    pv = _as_ivec(p)
    r = math.sqrt(float(pv @ pv))
    if not (decomp.k_fermi - decomp.shell_halfwidth <= r <= decomp.k_fermi + decomp.shell_halfwidth):
        return None
    label = int(decomp.assign_directions(pv[None, :])[0])
    return None if label < 0 else label


def index_sets(decomp: PatchDecomposition, k: Sequence[int], delta: float) -> ModeIndexSet:
    """Patches with |k . omega| above the equator cut N^(-delta), by side."""
    kv = _as_ivec(k)
    if not kv.any():
        raise ValueError("k = 0 admits no particle-hole modes")
    if not (0.0 < delta < 1.0 / 6.0):
        raise ValueError(f"delta must lie in (0, 1/6), got {delta}")
    threshold = decomp.n_particles ** (-delta)
    dots = decomp.omegas @ kv.astype(np.float64)
    plus = tuple(int(a) for a in np.nonzero(dots >= threshold)[0])
    minus = tuple(int(a) for a in np.nonzero(dots <= -threshold)[0])
    return ModeIndexSet(_as_momentum(k), float(delta), plus, minus)


def _mirror(decomp: PatchDecomposition, alpha: int) -> int:
    return alpha + decomp.half if alpha < decomp.half else alpha - decomp.half


def pair_count(
    decomp: PatchDecomposition,
    ball: FermiBall,
    k: Sequence[int],
    alpha: int,
    *,
    delta: float | None = None,
) -> int:
    """Number of particle-hole pairs with relative momentum k inside patch alpha.

    For k . omega_alpha > 0 the hole is p - k, for k . omega_alpha < 0 it is
    p + k; a patch orthogonal to k carries no modes and is rejected, as is any
    alpha below the equator cut when `delta` is given.
    """
    kv = _as_ivec(k)
    if not kv.any():
        raise ValueError("k = 0 admits no particle-hole pairs")
    if not (0 <= alpha < decomp.m_patches):
        raise IndexError(f"patch index {alpha} out of range")
    dot = float(decomp.omegas[alpha] @ kv)
    if dot == 0.0:
        raise ValueError(f"patch {alpha} is orthogonal to k={tuple(kv)}; no modes")
    if delta is not None:
        threshold = decomp.n_particles ** (-float(delta))
        if abs(dot) < threshold:
            raise ValueError(
                f"patch {alpha} lies below the equator cut for k={tuple(kv)}"
            )
    if np.abs(kv).max() > 8:
        # codes of p -/+ k must stay within the encoder's cube margin
        raise ValueError("momentum k exceeds the shell encoding margin")
    asg = decomp.shell_assignment(ball)
    enc = asg.encoder
    shift = enc.shift(kv if dot > 0 else -kv)
    target = asg.out_codes[alpha] - shift
    return int(asg.in_sets[alpha].contains_codes(target).sum())


def decomposition_to_json(decomp: PatchDecomposition, ball: FermiBall | None = None) -> str:
    """JSON document with patch bounds, direction vectors, and areas."""
    doc = {
        "m_requested": decomp.m_requested,
        "m_patches": decomp.m_patches,
        "k_fermi": decomp.k_fermi,
        "r_corridor": decomp.r_corridor,
        "shell_halfwidth": decomp.shell_halfwidth,
        "patches": [],
    }
    areas = decomp.angular_areas()
    for a in range(decomp.m_patches):
        spec = decomp.north[a % decomp.half]
        south = a >= decomp.half
        doc["patches"].append(
            {
                "index": a,
                "southern": south,
                "is_cap": spec.is_cap,
                "theta": [spec.theta_lo, spec.theta_hi],
                "phi": [spec.phi_lo, spec.phi_hi],
                "omega": list(decomp.omegas[a]),
                "angular_area": float(areas[a]),
            }
        )
    if ball is not None:
        asg = decomp.shell_assignment(ball)
        counts = [int((asg.labels == a).sum()) for a in range(decomp.m_patches)]
        doc["lattice_counts"] = counts
        doc["corridor_lattice_count"] = int((asg.labels < 0).sum())
    return json.dumps(doc, indent=2)
