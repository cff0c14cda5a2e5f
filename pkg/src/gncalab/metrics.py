"""Complexity and behaviour measures for automaton trajectories.

Shannon/word entropies operate on discrete per-node state sequences; sample
entropy and correlation dimension operate on scalar time series (boid
coordinates); the attractor classifier operates on MSE-to-target curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graphs import Graph
from .rng import Stream
from .rules import StateMatrix, VoronoiRule, random_binary_state, voronoi_step


@dataclass
class EntropyReport:
    h_s: float
    h_w: float
    node_h_s: np.ndarray
    node_h_w: np.ndarray


@dataclass
class SeriesComplexity:
    sampen: float
    corr_dim: float
    m_sampen: int
    r_sampen: float
    m_embed: int


@dataclass
class AttractorVerdict:
    kind: str  # converge | periodic | neither
    period: Optional[int]
    min_error: float


def _as_node_series(traj) -> np.ndarray:
    """Normalise a trajectory to a (T, n) matrix of scalar node states."""
    if isinstance(traj, np.ndarray):
        mat = traj
    else:
        rows = []
        for s in traj:
            v = s.values if isinstance(s, StateMatrix) else np.asarray(s)
            rows.append(v.reshape(-1))
        mat = np.asarray(rows)
    if mat.ndim == 3 and mat.shape[2] == 1:
        mat = mat[:, :, 0]
    if mat.ndim != 2:
        raise ValueError("trajectory must reduce to a (T, n) matrix")
    if mat.shape[0] < 2:
        raise ValueError("trajectory must contain at least 2 steps")
    return np.asarray(mat, dtype=np.float64)


def shannon_entropy(traj) -> float:
    return entropy_report(traj).h_s


def word_entropy(traj) -> float:
    return entropy_report(traj).h_w


def _run_lengths(series: np.ndarray) -> np.ndarray:
    """Lengths of maximal constant runs in a 1-d sequence."""
    change = np.flatnonzero(series[1:] != series[:-1])
    edges = np.r_[-1, change, len(series) - 1]
    return np.diff(edges)


def _distribution_entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log2(p)))


def entropy_report(traj) -> EntropyReport:
    """Per-node state entropy (H_s) and constant-run-length entropy (H_w),
    both in bits, averaged over nodes."""
    mat = _as_node_series(traj)
    t_len, n = mat.shape

    states = np.unique(mat)
    node_h_s = np.zeros(n)
    for v in states:
        p = np.count_nonzero(mat == v, axis=0) / t_len
        nz = p > 0
        node_h_s[nz] -= p[nz] * np.log2(p[nz])

    node_h_w = np.zeros(n)
    for i in range(n):
        lengths = _run_lengths(mat[:, i])
        node_h_w[i] = _distribution_entropy(np.bincount(lengths)[1:])

    return EntropyReport(
        h_s=float(node_h_s.mean()),
        h_w=float(node_h_w.mean()),
        node_h_s=node_h_s,
        node_h_w=node_h_w,
    )


# ----------------------------------------------------------------------------
# sample entropy
# ----------------------------------------------------------------------------


def sampen_match_counts(series: np.ndarray, m: int, r: float) -> tuple[int, int]:
    """(B, A): template pairs within Chebyshev distance < r at lengths m and
    m+1. Templates are the first N-m windows so both lengths compare the same
    index set; self-matches excluded."""
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    windows = np.lib.stride_tricks.sliding_window_view(x, m)[: n - m]
    tail = x[m:]
    b_count = 0
    a_count = 0
    for i in range(len(windows) - 1):
        d_m = np.max(np.abs(windows[i + 1 :] - windows[i]), axis=1)
        d_m1 = np.maximum(d_m, np.abs(tail[i + 1 :] - tail[i]))
        b_count += int(np.count_nonzero(d_m < r))
        a_count += int(np.count_nonzero(d_m1 < r))
    return b_count, a_count


def sample_entropy(series, m: int = 2, r: float | None = None) -> float:
    """-ln(A/B) over template matches; constant series return 0."""
    x = np.asarray(series, dtype=np.float64).reshape(-1)
    if len(x) <= m + 1:
        raise ValueError("series too short for sample entropy")
    sd = float(np.std(x))
    if sd == 0.0:
        return 0.0
    if r is None:
        r = 0.2 * sd
    b_count, a_count = sampen_match_counts(x, m, r)
    if a_count == 0 or b_count == 0:
        return math.inf
    return float(-math.log(a_count / b_count))


# ----------------------------------------------------------------------------
# correlation dimension
# ----------------------------------------------------------------------------


def embedding_distances(series: np.ndarray, m: int) -> np.ndarray:
    """All pairwise Euclidean distances between delay-1 m-embeddings."""
    x = np.asarray(series, dtype=np.float64)
    emb = np.lib.stride_tricks.sliding_window_view(x, m)
    chunks = []
    for i in range(len(emb) - 1):
        diff = emb[i + 1 :] - emb[i]
        chunks.append(np.sqrt(np.sum(diff * diff, axis=1)))
    return np.concatenate(chunks) if chunks else np.zeros(0)


def correlation_sum(sorted_dists: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """C(r) = fraction of pairs with distance strictly below r."""
    counts = np.searchsorted(sorted_dists, radii, side="left")
    return counts / len(sorted_dists)


def correlation_dimension(series, m: int = 10, n_radii: int = 24) -> float:
    """Grassberger-Procaccia slope of log C(r) vs log r, fitted over the
    middle 60% of a log grid spanning the 5th..95th distance percentiles."""
    x = np.asarray(series, dtype=np.float64).reshape(-1)
    if len(x) < 10 * m:
        raise ValueError("series too short for the embedding")
    if float(np.std(x)) == 0.0:
        raise ValueError("degenerate series (zero variance)")
    dists = embedding_distances(x, m)
    dists = dists[dists > 0]
    if len(dists) < 100:
        raise ValueError("degenerate series (too few distinct embedded points)")
    dists.sort()
    r_lo = float(np.percentile(dists, 5.0))
    r_hi = float(np.percentile(dists, 95.0))
    if not 0 < r_lo < r_hi:
        raise ValueError("degenerate distance distribution")
    radii = np.exp(np.linspace(math.log(r_lo), math.log(r_hi), n_radii))
    lo = int(round(0.2 * n_radii))
    hi = int(round(0.8 * n_radii))
    radii = radii[lo:hi]
    c = correlation_sum(dists, radii)
    keep = c > 0
    slope = np.polyfit(np.log(radii[keep]), np.log(c[keep]), 1)[0]
    return float(slope)


def boids_series_complexity(
    traj, m_sampen: int = 2, m_embed: int = 10
) -> SeriesComplexity:
    """SampEn and correlation dimension of boid position series, computed
    per boid and coordinate channel, then averaged."""
    states = np.asarray([np.asarray(s) for s in traj])  # (T, n, 4)
    n = states.shape[1]
    sampens = []
    cds = []
    for b in range(n):
        for ch in range(2):
            series = states[:, b, ch]
            sampens.append(sample_entropy(series, m=m_sampen))
            cds.append(correlation_dimension(series, m=m_embed))
    return SeriesComplexity(
        sampen=float(np.mean(sampens)),
        corr_dim=float(np.mean(cds)),
        m_sampen=m_sampen,
        r_sampen=0.2,
        m_embed=m_embed,
    )


# ----------------------------------------------------------------------------
# attractor classification
# ----------------------------------------------------------------------------


def mse_curve(traj, target: np.ndarray) -> np.ndarray:
    """Mean squared error to a fixed target at every step of a trajectory."""
    target = np.asarray(target, dtype=np.float64)
    out = np.zeros(len(traj))
    for t, s in enumerate(traj):
        v = s.values if isinstance(s, StateMatrix) else np.asarray(s)
        out[t] = float(np.mean((v - target) ** 2))
    return out


def classify_attractor(error_series, tol: float | None = None) -> AttractorVerdict:
    """Converge when the final quarter stays within tol of its own minimum;
    periodic when the detrended tail autocorrelates >= 0.5 at some lag >= 2;
    otherwise neither."""
    err = np.asarray(error_series, dtype=np.float64).reshape(-1)
    if len(err) < 16:
        raise ValueError("error series too short to classify")
    tail = err[-(len(err) // 4) :]
    t_min = float(tail.min())
    t_max = float(tail.max())
    band = tol if tol is not None else 0.5 * t_min + 1e-9
    min_error = float(err.min())
    if t_max - t_min <= band:
        return AttractorVerdict(kind="converge", period=None, min_error=min_error)

    t = np.arange(len(tail), dtype=np.float64)
    trend = np.polyfit(t, tail, 1)
    resid = tail - np.polyval(trend, t)
    denom = float(np.sum(resid * resid))
    if denom > 0:
        max_lag = len(tail) // 2
        lags = np.arange(2, max_lag + 1)
        ac = np.array(
            [float(np.sum(resid[:-k] * resid[k:])) / denom for k in lags]
        )
        if len(ac) and float(ac.max()) >= 0.5:
            period = int(lags[int(np.argmax(ac))])
            return AttractorVerdict(kind="periodic", period=period, min_error=min_error)
    return AttractorVerdict(kind="neither", period=None, min_error=min_error)


# ----------------------------------------------------------------------------
# edge-of-chaos sweep
# ----------------------------------------------------------------------------


def edge_of_chaos_sweep(
    g: Graph, kappas, steps: int = 1000, seed: int = 0
) -> list[tuple[float, float, float]]:
    """Roll out the density rule from a fresh random state per kappa and
    report (kappa, H_s, H_w) rows."""
    rows = []
    base = Stream(seed)
    for idx, kappa in enumerate(kappas):
        rule = VoronoiRule(float(kappa))
        state = random_binary_state(g.n, base.derive(idx))
        traj = [state.values[:, 0].copy()]
        cur = state
        for _ in range(steps):
            cur = voronoi_step(rule, g, cur)
            traj.append(cur.values[:, 0].copy())
        report = entropy_report(np.asarray(traj))
        rows.append((float(kappa), report.h_s, report.h_w))
    return rows
