"""Effective quadratic Hamiltonian per momentum mode and its diagonalization.

For each interaction momentum k the particle-hole modes on the patched Fermi
surface carry three real symmetric matrices: a diagonal kinetic part D, a
same-side rank-one coupling W, and a cross-side coupling W~.  The Bogoliubov
kernel K diagonalizes D + W + W~ against D + W - W~; the ground-state shift is
tr(E - D - W) / 2.  All matrix functions go through one dense symmetric
eigendecomposition; positive definiteness is a checked precondition, never
silently clamped.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import KAPPA_IDEAL, FermiBall, InteractionPotential, Momentum, _as_ivec
from .patches import PatchDecomposition, index_sets, pair_count

__all__ = [
    "ModeSystem",
    "BogoliubovSolution",
    "DiagonalizationError",
    "EmptyModeSystemError",
    "build_mode_system",
    "sample_mode_system",
    "diagonalize",
    "check_kernel_bound",
    "check_L_blocks",
    "check_frakK_vs_E",
    "check_frakK_minus_D_bound",
    "dump_solution_csv",
]

log = logging.getLogger(__name__)


class DiagonalizationError(ValueError):
    """A matrix that must be positive definite is not."""


class EmptyModeSystemError(ValueError):
    """No usable modes survive the equator cut and zero-count drops."""


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _eigh_pd(a: np.ndarray, name: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with a positive-definiteness guard."""
    w, q = np.linalg.eigh(_sym(a))
    tol = 1e-12 * max(abs(w[0]), abs(w[-1]), 1e-300)
    if w[0] <= tol:
        raise DiagonalizationError(
            f"{name} is not positive definite: smallest eigenvalue {w[0]:.3e}"
        )
    return w, q


def _apply(w: np.ndarray, q: np.ndarray, fn) -> np.ndarray:
    return _sym(q @ (fn(w)[:, None] * q.T))


def sym_sqrt(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    w, q = _eigh_pd(a, name)
    return _apply(w, q, np.sqrt)


def sym_inv_sqrt(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    w, q = _eigh_pd(a, name)
    return _apply(w, q, lambda x: 1.0 / np.sqrt(x))


def sym_log(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    w, q = _eigh_pd(a, name)
    return _apply(w, q, np.log)


@dataclass
class ModeSystem:
    """Mode data and coupling matrices for one interaction momentum.

    Modes are reflection paired: entries 0..I-1 are the plus side ordered by
    patch index, entry I+j is the antipodal partner of entry j, so that
    u[j] == u[I+j] and n_vals[j] == n_vals[I+j].
    """

    k: Momentum
    vhat_k: float
    m_patches: int
    n_particles: int
    hbar: float
    plus_modes: tuple[int, ...]
    minus_modes: tuple[int, ...]
    u_vals: np.ndarray
    n_vals: np.ndarray
    v_vals: np.ndarray
    g: float
    D: np.ndarray
    W: np.ndarray
    W_tilde: np.ndarray

    @property
    def side(self) -> int:
        return len(self.plus_modes)

    @property
    def size(self) -> int:
        return 2 * self.side


def _assemble(
    k: Momentum,
    vhat_k: float,
    m_patches: int,
    n_particles: int,
    hbar: float,
    plus_modes: Sequence[int],
    minus_modes: Sequence[int],
    u_side: np.ndarray,
    n_side: np.ndarray,
) -> ModeSystem:
    side = len(u_side)
    knorm = math.sqrt(float(Momentum(*k).norm_sq()))
    u = np.concatenate([u_side, u_side])
    n = np.concatenate([n_side, n_side])
    v = (hbar / (KAPPA_IDEAL * math.sqrt(knorm))) * n
    g = 0.5 * KAPPA_IDEAL * vhat_k
    D = np.diag(u * u)
    b = g * np.outer(v[:side], v[:side])
    W = np.zeros((2 * side, 2 * side))
    W[:side, :side] = b
    W[side:, side:] = b
    Wt = np.zeros_like(W)
    Wt[:side, side:] = b
    Wt[side:, :side] = b
    return ModeSystem(
        k=k,
        vhat_k=vhat_k,
        m_patches=m_patches,
        n_particles=n_particles,
        hbar=hbar,
        plus_modes=tuple(plus_modes),
        minus_modes=tuple(minus_modes),
        u_vals=u,
        n_vals=n,
        v_vals=v,
        g=g,
        D=D,
        W=W,
        W_tilde=Wt,
    )


def build_mode_system(
    decomp: PatchDecomposition,
    ball: FermiBall,
    v: InteractionPotential,
    k: Sequence[int],
    delta: float,
) -> ModeSystem:
    """Assemble D, W, W~ for momentum k from exact lattice pair counts.

    Patches whose pair count vanishes (a finite-size artifact near the cut)
    are dropped together with their antipodal partners.
    """
    kv = _as_ivec(k)
    km = Momentum(int(kv[0]), int(kv[1]), int(kv[2]))
    knorm = math.sqrt(km.norm_sq())
    idx = index_sets(decomp, kv, delta)
    half = decomp.half
    plus, minus, u_side, n_side = [], [], [], []
    dropped = []
    for a in idx.plus_side:
        b = a + half if a < half else a - half
        cnt = pair_count(decomp, ball, kv, a)
        if cnt <= 0:
            dropped.append(a)
            continue
        plus.append(a)
        minus.append(b)
        u_side.append(math.sqrt(abs(float(decomp.omegas[a] @ kv)) / knorm))
        n_side.append(math.sqrt(cnt))
    if dropped:
        log.warning(
            "dropping %d zero-count modes for k=%s (geometry too coarse): %s",
            len(dropped),
            tuple(km),
            dropped,
        )
    if not plus:
        raise EmptyModeSystemError(
            f"no modes survive for k={tuple(km)} at delta={delta}; "
            "k_fermi is too small for this patch count"
        )
    return _assemble(
        km,
        v(kv),
        decomp.m_patches,
        ball.n_particles,
        ball.hbar,
        plus,
        minus,
        np.asarray(u_side),
        np.asarray(n_side),
    )


def sample_mode_system(rng: np.random.Generator, max_side: int = 30) -> ModeSystem:
    """Random valid mode system for identity-check suites.

    Mode shapes mimic the lattice-built ones: u in (0, 1], pair counts near
    the surface-area heuristic, coupling below 1.
    """
    side = int(rng.integers(1, max_side + 1))
    m_patches = int(2 * side + 2 * rng.integers(0, side + 2))
    n_particles = int(rng.integers(10**3, 10**7))
    hbar = n_particles ** (-1.0 / 3.0)
    vhat_k = float(rng.uniform(0.01, 0.9))
    u = np.sqrt(rng.uniform(0.01, 1.0, size=side))
    kf = KAPPA_IDEAL * n_particles ** (1.0 / 3.0)
    base = 4.0 * math.pi * kf**2 / m_patches
    n_side = np.sqrt(base * u**2 * rng.uniform(0.6, 1.4, size=side))
    plus = tuple(range(side))
    minus = tuple(range(side, 2 * side))
    return _assemble(
        Momentum(0, 0, 1), vhat_k, m_patches, n_particles, hbar, plus, minus, u, n_side
    )


@dataclass
class BogoliubovSolution:
    """Diagonalization output for one mode system, with residual diagnostics."""

    E: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    O: np.ndarray
    K: np.ndarray
    coshK: np.ndarray
    sinhK: np.ndarray
    frakK: np.ndarray
    trace_correction: float
    residuals: dict[str, float] = field(default_factory=dict)


def diagonalize(ms: ModeSystem) -> BogoliubovSolution:
    """Solve the quadratic mode problem for one momentum.

    E = [(D+W-W~)^1/2 (D+W+W~) (D+W-W~)^1/2]^1/2, S1 = (D+W-W~)^1/2 E^-1/2,
    S2 = (S1^T)^-1, polar part O of S1^T, K = log|S1^T|, and the transformed
    matrix frakK, which is orthogonally equivalent to E.
    """
    D, W, Wt = ms.D, ms.W, ms.W_tilde
    a_minus = _sym(D + W - Wt)
    a_plus = _sym(D + W + Wt)
    w_m, q_m = _eigh_pd(a_minus, "D + W - W~")
    _eigh_pd(a_plus, "D + W + W~")
    rm = _apply(w_m, q_m, np.sqrt)
    rm_inv = _apply(w_m, q_m, lambda x: 1.0 / np.sqrt(x))
    e_sq = _sym(rm @ a_plus @ rm)
    w_e2, q_e2 = _eigh_pd(e_sq, "(D+W-W~)^1/2 (D+W+W~) (D+W-W~)^1/2")
    E = _apply(w_e2, q_e2, np.sqrt)
    e_inv_half = _apply(w_e2, q_e2, lambda x: x**-0.25)
    e_half = _apply(w_e2, q_e2, lambda x: x**0.25)
    S1 = rm @ e_inv_half
    S2 = rm_inv @ e_half  # equals (S1^T)^-1
    ss = _sym(S1 @ S1.T)
    w_s, q_s = _eigh_pd(ss, "S1 S1^T")
    K = _apply(w_s, q_s, lambda x: 0.5 * np.log(x))
    O = S1.T @ _apply(w_s, q_s, lambda x: 1.0 / np.sqrt(x))
    coshK = _sym(0.5 * (S1 + S2) @ O)
    sinhK = _sym(0.5 * (S1 - S2) @ O)
    dw = _sym(D + W)
    frakK = _sym(
        coshK @ dw @ coshK
        + sinhK @ dw @ sinhK
        + coshK @ Wt @ sinhK
        + sinhK @ Wt @ coshK
    )
    trace_correction = 0.5 * float(np.trace(E - D - W))

    off = (
        coshK @ dw @ sinhK
        + sinhK @ dw @ coshK
        + coshK @ Wt @ coshK
        + sinhK @ Wt @ sinhK
    )
    ident = np.eye(ms.size)
    norm_dw = np.linalg.norm(dw)
    residuals = {
        "offdiagonal_rel": float(np.linalg.norm(off) / norm_dw),
        "symplectic_plus": float(
            np.linalg.norm(S1.T @ a_plus @ S1 - E) / np.linalg.norm(E)
        ),
        "symplectic_minus": float(
            np.linalg.norm(S2.T @ a_minus @ S2 - E) / np.linalg.norm(E)
        ),
        "hyperbolic": float(np.linalg.norm(coshK @ coshK - sinhK @ sinhK - ident)),
        "orthogonality": float(np.linalg.norm(O.T @ O - ident)),
        "kernel_asymmetry": float(np.linalg.norm(K - K.T)),
        "frak_vs_E_max": float(np.abs(frakK - _sym(O.T @ E @ O)).max()),
        "det_O": float(np.linalg.det(O)),
        "min_eig_E": float(np.sqrt(w_e2[0])),
    }
    return BogoliubovSolution(
        E=E,
        S1=S1,
        S2=S2,
        O=O,
        K=K,
        coshK=coshK,
        sinhK=sinhK,
        frakK=frakK,
        trace_correction=trace_correction,
        residuals=residuals,
    )


def _ratio_matrix(n_vals: np.ndarray) -> np.ndarray:
    """min(n_a/n_b, n_b/n_a) entrywise."""
    return np.minimum.outer(n_vals, n_vals) / np.maximum.outer(n_vals, n_vals)


def check_kernel_bound(
    sol: BogoliubovSolution, ms: ModeSystem
) -> tuple[float, tuple[int, int]]:
    """Fitted constant of the entrywise kernel bound and its arg-max entry.

    C* = max over (a, b) of |K_ab| M / (V(k) min(n_a/n_b, n_b/n_a)).
    """
    if ms.vhat_k <= 0:
        return 0.0, (0, 0)
    scaled = np.abs(sol.K) * ms.m_patches / (ms.vhat_k * _ratio_matrix(ms.n_vals))
    flat = int(np.argmax(scaled))
    pair = np.unravel_index(flat, scaled.shape)
    return float(scaled[pair]), (int(pair[0]), int(pair[1]))


def check_sinh_bound(sol: BogoliubovSolution, ms: ModeSystem) -> float:
    """Fitted constant of the same entrywise bound applied to sinh(K)."""
    if ms.vhat_k <= 0:
        return 0.0
    scaled = np.abs(sol.sinhK) * ms.m_patches / (ms.vhat_k * _ratio_matrix(ms.n_vals))
    return float(scaled.max())


def check_L_blocks(ms: ModeSystem, sol: BogoliubovSolution | None = None) -> float:
    """Max deviation between the kernel and its block-reduction reconstruction.

    The half-size blocks L1 = d^1/2 [d^1/2 (d+2b) d^1/2]^-1/2 d^1/2 - I and
    L2 = (d+2b)^1/2 [(d+2b)^1/2 d (d+2b)^1/2]^-1/2 (d+2b)^1/2 - I rebuild the
    kernel through the plus/minus block rotation.
    """
    if sol is None:
        sol = diagonalize(ms)
    side = ms.side
    d = np.diag(ms.u_vals[:side] ** 2)
    b = ms.g * np.outer(ms.v_vals[:side], ms.v_vals[:side])
    d2b = _sym(d + 2.0 * b)
    d_h = sym_sqrt(d, "d")
    d2b_h = sym_sqrt(d2b, "d + 2b")
    m1 = sym_inv_sqrt(_sym(d_h @ d2b @ d_h), "d^1/2 (d+2b) d^1/2")
    m2 = sym_inv_sqrt(_sym(d2b_h @ d @ d2b_h), "(d+2b)^1/2 d (d+2b)^1/2")
    L1 = _sym(d_h @ m1 @ d_h) - np.eye(side)
    L2 = _sym(d2b_h @ m2 @ d2b_h) - np.eye(side)
    log1 = sym_log(np.eye(side) + L1, "I + L1")
    log2 = sym_log(np.eye(side) + L2, "I + L2")
    ident = np.eye(side)
    u_rot = np.block([[ident, ident], [ident, -ident]]) / math.sqrt(2.0)
    blocks = np.zeros((2 * side, 2 * side))
    blocks[:side, :side] = log1
    blocks[side:, side:] = log2
    k_rebuilt = 0.5 * u_rot.T @ blocks @ u_rot
    return float(np.abs(k_rebuilt - sol.K).max())


def check_frakK_vs_E(sol: BogoliubovSolution) -> float:
    """Max deviation between frakK and O^T E O (their spectra coincide)."""
    return float(np.abs(sol.frakK - _sym(sol.O.T @ sol.E @ sol.O)).max())


def check_frakK_minus_D_bound(sol: BogoliubovSolution, ms: ModeSystem) -> float:
    """Fitted constant of |(frakK - D)_ab| <= C V(k) u_a u_b / M."""
    if ms.vhat_k <= 0:
        return 0.0
    scale = ms.vhat_k * np.outer(ms.u_vals, ms.u_vals) / ms.m_patches
    return float((np.abs(sol.frakK - ms.D) / scale).max())


def dump_solution_csv(sol: BogoliubovSolution, ms: ModeSystem, path) -> None:
    """Row-major CSV dump of every solution matrix, one block per matrix."""
    matrices = {
        "E": sol.E,
        "S1": sol.S1,
        "S2": sol.S2,
        "O": sol.O,
        "K": sol.K,
        "coshK": sol.coshK,
        "sinhK": sol.sinhK,
        "frakK": sol.frakK,
    }
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "k",
                f"{ms.k.px} {ms.k.py} {ms.k.pz}",
                "M",
                ms.m_patches,
                "N",
                ms.n_particles,
                "size",
                ms.size,
            ]
        )
        for name, mat in matrices.items():
            for i, row in enumerate(mat):
                writer.writerow([name, i] + [repr(float(x)) for x in row])
