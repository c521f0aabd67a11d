"""Optimal-transport kernels: Gromov-Wasserstein coupling and sliced Wasserstein."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .features import pairwise_distances
from .graphs import SENPartition


class SinkhornError(RuntimeError):
    """Sinkhorn scaling underflowed; retry with larger regularization."""


@dataclass(frozen=True)
class GWConfig:
    """Entropic solver settings; defaults are stable for group sizes <= ~200."""

    reg_scale: float = 5e-3      # final regularization = reg_scale * scale(C)
    outer_iterations: int = 50
    sinkhorn_iterations: int = 100
    exact_threshold: int = 6     # enumerate all m! permutations up to this size
    anneal: tuple = (0.5, 0.1, 0.02)  # epsilon stages run before reg_scale
    restarts: int = 6            # solver initializations (1 = uniform only)


@dataclass
class Coupling:
    """Doubly stochastic m x m transport plan with uniform 1/m marginals."""

    matrix: np.ndarray

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


# Lighter schedule for the per-batch alignment hot path: enumeration covers
# one extra class size (vectorized, it is both exact and cheaper than the
# entropic solve there), and larger classes get a single shortened solve.
FAST_GW = GWConfig(exact_threshold=7, outer_iterations=20,
                   sinkhorn_iterations=30, anneal=(0.1,), restarts=1)


def _gw_objective(c1: np.ndarray, c2: np.ndarray, t: np.ndarray) -> float:
    # sum_{ijkl} (c1_ik - c2_jl)^2 t_ij t_kl, expanded to matrix products
    m1 = t.sum(axis=1)
    m2 = t.sum(axis=0)
    const = float((c1 * c1) @ m1 @ m1 + (c2 * c2) @ m2 @ m2)
    cross = float(np.sum((c1 @ t @ c2.T) * t))
    return const - 2.0 * cross


def _gw_cost_gradient(c1: np.ndarray, c2: np.ndarray, t: np.ndarray) -> np.ndarray:
    m1 = t.sum(axis=1)
    m2 = t.sum(axis=0)
    const = ((c1 * c1) @ m1)[:, None] + ((c2 * c2) @ m2)[None, :]
    return const - 2.0 * (c1 @ t @ c2.T)


def _sinkhorn_project(k: np.ndarray, iterations: int) -> np.ndarray:
    m = k.shape[0]
    r = np.full(m, 1.0 / m)
    u = np.ones(m)
    v = np.ones(m)
    for _ in range(iterations):
        with np.errstate(over="ignore", invalid="ignore"):
            ku = k.T @ u
            if not np.all(np.isfinite(ku)) or np.any(ku <= 0.0):
                raise SinkhornError("scaling underflow; increase the entropic regularization")
            v = r / ku
            kv = k @ v
            if not np.all(np.isfinite(kv)) or np.any(kv <= 0.0):
                raise SinkhornError("scaling underflow; increase the entropic regularization")
            u_new = r / kv
        if np.max(np.abs(u_new - u)) <= 1e-9 * max(np.max(np.abs(u_new)), 1.0):
            u = u_new
            break
        u = u_new
    return u[:, None] * k * v[None, :]


@lru_cache(maxsize=8)
def _all_permutations(m: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(m))), dtype=np.int64)


def gw_exact(c1: np.ndarray, c2: np.ndarray) -> tuple[float, np.ndarray]:
    """Exhaustive minimum of the coupling objective over all permutations.

    Returns (value, permutation) with value on the (1/m)-scaled permutation
    coupling. Only feasible for small m.
    """
    m = c1.shape[0]
    if m <= 8:
        perms = _all_permutations(m)
        diffs = c1[perms[:, :, None], perms[:, None, :]] - c2
        vals = np.einsum("pij,pij->p", diffs, diffs) / (m * m)
        best = int(np.argmin(vals))
        return float(vals[best]), perms[best].copy()
    best = None
    best_perm = None
    for perm in itertools.permutations(range(m)):
        p = np.array(perm)
        val = float(np.sum((c1[np.ix_(p, p)] - c2) ** 2)) / (m * m)
        if best is None or val < best:
            best = val
            best_perm = p
    return best, best_perm


def _perm_objective(c1: np.ndarray, c2: np.ndarray, perm: np.ndarray) -> float:
    m = len(perm)
    return float(np.sum((c1[np.ix_(perm, perm)] - c2) ** 2)) / (m * m)


def _polish_permutation(c1: np.ndarray, c2: np.ndarray,
                        perm: np.ndarray) -> tuple[np.ndarray, float]:
    """Local search over pairwise swaps (and 3-cycles for small m)."""
    m = len(perm)
    perm = perm.copy()
    best = _perm_objective(c1, c2, perm)
    improved = True
    while improved:
        improved = False
        if m <= 30:
            for i in range(m):
                for j in range(i + 1, m):
                    perm[i], perm[j] = perm[j], perm[i]
                    val = _perm_objective(c1, c2, perm)
                    if val < best - 1e-15:
                        best = val
                        improved = True
                    else:
                        perm[i], perm[j] = perm[j], perm[i]
        if m <= 10:
            for i, j, k in itertools.permutations(range(m), 3):
                cand = perm.copy()
                cand[i], cand[j], cand[k] = perm[j], perm[k], perm[i]
                val = _perm_objective(c1, c2, cand)
                if val < best - 1e-15:
                    perm, best = cand, val
                    improved = True
    return perm, best


def _perm_coupling(perm: np.ndarray) -> np.ndarray:
    m = len(perm)
    t = np.zeros((m, m))
    t[perm, np.arange(m)] = 1.0 / m
    return t


def _round_to_permutation(t: np.ndarray) -> np.ndarray:
    row, col = linear_sum_assignment(-t)
    perm = np.empty(t.shape[0], dtype=np.int64)
    perm[col] = row  # perm[j] = source index matched to target j
    return perm


def gw_distance(c1: np.ndarray, c2: np.ndarray, config: GWConfig = GWConfig()) -> tuple[float, Coupling]:
    """Gromov-Wasserstein distance between two metric spaces with L2 inner loss.

    Solved by entropic mirror descent with Sinkhorn projections. The epsilon
    schedule anneals from coarse to ``reg_scale``, the solve is restarted from
    ``restarts`` initializations, and every stage's coupling is rounded to a
    permutation (assignment solve) and polished by local swap search. The
    objective is reported on the best rounded coupling, removing the entropic
    blur; the value is clamped at zero against float cancellation.
    """
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    if c1.shape != c2.shape or c1.ndim != 2 or c1.shape[0] != c1.shape[1]:
        raise ValueError(f"cost matrices must be square and equal-shaped, got {c1.shape} vs {c2.shape}")
    m = c1.shape[0]
    if m == 1:
        return 0.0, Coupling(np.ones((1, 1)))
    # Canonical argument order keeps the value exactly symmetric; the coupling
    # is transposed back when the arguments were swapped.
    if c1.tobytes() > c2.tobytes():
        value, coupling = gw_distance(c2, c1, config)
        return value, Coupling(coupling.matrix.T.copy())

    scale = max((c1.mean() + c2.mean()) / 2.0, 1e-12) ** 2
    stages = [a * scale for a in config.anneal]
    stages.append(max(config.reg_scale * scale, 1e-300))
    rng = np.random.default_rng(0)
    inits = [np.full((m, m), 1.0 / (m * m))]
    for _ in range(max(config.restarts, 1) - 1):
        raw = rng.random((m, m)) + 0.1
        inits.append(_sinkhorn_project(raw / raw.sum(), 20))

    candidates = [np.arange(m, dtype=np.int64)]
    for t0 in inits:
        t = t0
        try:
            for si, eps in enumerate(stages):
                final = si == len(stages) - 1
                outer = config.outer_iterations if final else min(config.outer_iterations, 12)
                inner = config.sinkhorn_iterations if final else min(config.sinkhorn_iterations, 30)
                for _ in range(outer):
                    grad = _gw_cost_gradient(c1, c2, t)
                    logk = np.log(np.maximum(t, 1e-300)) - grad / eps
                    logk -= logk.max()
                    t_new = _sinkhorn_project(np.exp(logk), inner)
                    converged = np.max(np.abs(t_new - t)) < 1e-8 / (m * m)
                    t = t_new
                    if converged:
                        break
                candidates.append(_round_to_permutation(t))
        except SinkhornError:
            continue  # other restarts still produce candidates

    best_perm = None
    best_val = None
    for cand in candidates:
        perm, val = _polish_permutation(c1, c2, cand)
        if best_val is None or val < best_val:
            best_perm, best_val = perm, val
    rounded = _perm_coupling(best_perm)
    return max(best_val, 0.0), Coupling(rounded)


def coupling_to_permutation(t: Coupling) -> tuple[np.ndarray, float]:
    """Permutation maximizing the assigned coupling mass, plus that mass."""
    matrix = t.matrix
    row, col = linear_sum_assignment(-matrix)
    perm = np.empty(matrix.shape[0], dtype=np.int64)
    perm[row] = col
    mass = float(matrix[row, col].sum())
    return perm, mass


def unit_slices(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """count x dim matrix of directions uniform on the unit sphere."""
    v = rng.normal(size=(count, dim))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    # resample exact-zero draws is overkill at these counts; nudge instead
    norms = np.maximum(norms, 1e-300)
    return v / norms


def sliced_wasserstein(p: np.ndarray, q: np.ndarray, slices: int = 50, seed: int = 0) -> float:
    """Mean squared difference of per-slice sorted projections (squared cost)."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if p.shape != q.shape:
        raise ValueError(f"sample shapes differ: {p.shape} vs {q.shape}")
    theta = unit_slices(slices, p.shape[1], np.random.default_rng(seed))
    proj_p = np.sort(p @ theta.T, axis=0)
    proj_q = np.sort(q @ theta.T, axis=0)
    return float(np.mean((proj_p - proj_q) ** 2))


def sen_permutation(
    input_positions: np.ndarray,
    recon_positions: np.ndarray,
    part: SENPartition,
    config: GWConfig = GWConfig(),
) -> np.ndarray:
    """Permutation of the input rows aligning equivalence classes with the
    reconstruction.

    Identity on singleton classes; within each class of size >= 2 the
    permutation minimizes the within-group distance-matrix discrepancy
    (exact enumeration up to ``config.exact_threshold``, entropic solve above).
    Within-group distances alone cannot separate permutations that are exact
    symmetries of the group (every 2-class is one such case), so ties are
    broken by the distances from the group to the rest of the layout.
    Never worse than identity on any class. Returns ``perm`` with the
    convention ``aligned[i] = input[perm[i]]``.
    """
    n = input_positions.shape[0]
    if recon_positions.shape[0] != n or len(part.class_of) != n:
        raise ValueError("layouts and partition must cover the same node set")
    di = pairwise_distances(input_positions)
    dr = pairwise_distances(recon_positions)
    xi = di / di.mean() if di.mean() > 0.0 else di
    xr = dr / dr.mean() if dr.mean() > 0.0 else dr
    perm = np.arange(n, dtype=np.int64)
    for members in part.nontrivial_classes():
        idx = np.array(members)
        m = len(idx)
        ci = pairwise_distances(input_positions[idx])
        cr = pairwise_distances(recon_positions[idx])
        if np.max(ci) <= 0.0 or np.max(cr) <= 0.0:
            warnings.warn("degenerate within-group distances; keeping identity block")
            continue
        others = np.setdiff1d(np.arange(n), idx)

        def cross_term(group_perm):
            if len(others) == 0:
                return 0.0
            return float(np.abs(xi[np.ix_(idx[group_perm], others)]
                                - xr[np.ix_(idx, others)]).sum())

        if m <= config.exact_threshold:
            perms = _all_permutations(m)
            diffs = ci[perms[:, :, None], perms[:, None, :]] - cr
            vals = np.einsum("pij,pij->p", diffs, diffs) / (m * m)
            best = float(vals.min())
            tied = np.flatnonzero(vals <= best + 1e-9 * (1.0 + best))
            group_perm = perms[min(tied, key=lambda i: cross_term(perms[i]))]
        else:
            _, coupling = gw_distance(ci, cr, config)
            group_perm, _ = coupling_to_permutation(Coupling(coupling.matrix.T))
        ident = float(np.sum((ci - cr) ** 2)) / (m * m)
        chosen = float(np.sum((ci[np.ix_(group_perm, group_perm)] - cr) ** 2)) / (m * m)
        if chosen < ident - 1e-15 or (chosen <= ident + 1e-15
                                      and cross_term(group_perm) <= cross_term(np.arange(m))):
            perm[idx] = idx[group_perm]
    return perm


def permutation_matrix(perm: np.ndarray) -> np.ndarray:
    n = len(perm)
    t = np.zeros((n, n))
    t[np.arange(n), perm] = 1.0
    return t
