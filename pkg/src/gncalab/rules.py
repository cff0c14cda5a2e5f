"""Ground-truth transition rules: the Voronoi density rule and Reynolds
boids, plus synchronous rollout and trajectory serialization."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .graphs import Graph, _radius_pairs
from .rng import Stream


@dataclass
class StateMatrix:
    """Per-node state rows, binary (exact 0/1) or real."""

    values: np.ndarray
    kind: str = "real"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be an (n, d) matrix")
        if self.kind not in ("binary", "real"):
            raise ValueError(f"unknown state kind {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("state values must be finite")
        if self.kind == "binary" and not np.all((self.values == 0.0) | (self.values == 1.0)):
            raise ValueError("binary states must be exactly 0 or 1")

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass
class VoronoiRule:
    """Outer-totalistic density rule: flip when mean neighbour state > kappa."""

    kappa: float

    def __post_init__(self):
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")


def neighborhood_density(g: Graph, values: np.ndarray) -> np.ndarray:
    """Mean neighbour state per node; isolated nodes get density 0."""
    sums = np.zeros((g.n, values.shape[1]))
    if len(g.src):
        starts = np.flatnonzero(np.r_[True, g.dst[1:] != g.dst[:-1]])
        seg = np.add.reduceat(values[g.src], starts, axis=0)
        sums[g.dst[starts]] = seg
    deg = g.degree.astype(np.float64)[:, None]
    return np.divide(sums, deg, out=np.zeros_like(sums), where=deg > 0)


def voronoi_step(rule: VoronoiRule, g: Graph, s: StateMatrix) -> StateMatrix:
    """Synchronous application: s_i stays if density <= kappa, else flips."""
    if s.kind != "binary" or s.values.shape[1] != 1:
        raise ValueError("voronoi_step needs binary single-channel states")
    rho = neighborhood_density(g, s.values)
    flip = rho > rule.kappa
    return StateMatrix(np.where(flip, 1.0 - s.values, s.values), kind="binary")


def random_binary_state(n: int, seed_or_stream) -> StateMatrix:
    stream = seed_or_stream if isinstance(seed_or_stream, Stream) else Stream(seed_or_stream)
    return StateMatrix(stream.bits((n, 1)), kind="binary")


def rollout(step_fn, initial, steps: int) -> list:
    """[initial, step(initial), step(step(initial)), ...], steps+1 entries."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    traj = [initial]
    cur = initial
    for _ in range(steps):
        cur = step_fn(cur)
        traj.append(cur)
    return traj


# ----------------------------------------------------------------------------
# boids
# ----------------------------------------------------------------------------


@dataclass
class BoidsConfig:
    radius: float = 0.15
    boundary_margin: float = 0.2
    separation_dist: float = 0.015
    align_scale: float = 1.0 / 8.0
    cohesion_scale: float = 1.0 / 100.0
    speed_limit: float = 0.01
    max_turn_deg: float = 5.0
    box_half: float = 1.0
    boundary_push: float = 0.005  # half the speed limit; direction from the rule, magnitude ours

    def __post_init__(self):
        positive = (
            self.radius,
            self.boundary_margin,
            self.align_scale,
            self.cohesion_scale,
            self.speed_limit,
            self.max_turn_deg,
            self.box_half,
            self.boundary_push,
        )
        if any(v <= 0 for v in positive) or self.separation_dist < 0:
            raise ValueError("boids constants must be positive")
        if self.radius <= self.separation_dist:
            raise ValueError("radius must exceed separation_dist")


def boids_init(n: int, seed_or_stream, cfg: BoidsConfig | None = None) -> np.ndarray:
    """Rows [p_x, p_y, v_x, v_y], uniform in [-1, 1]^4, speed pre-clamped."""
    cfg = cfg or BoidsConfig()
    stream = seed_or_stream if isinstance(seed_or_stream, Stream) else Stream(seed_or_stream)
    s = stream.uniform((n, 4), -1.0, 1.0)
    s[:, 2:] = _clamp_speed(s[:, 2:], cfg.speed_limit)
    return s


def _clamp_speed(v: np.ndarray, limit: float) -> np.ndarray:
    speed = np.sqrt(np.sum(v * v, axis=1, keepdims=True))
    factor = np.where(speed > limit, limit / np.where(speed > 0, speed, 1.0), 1.0)
    return v * factor


def _clamp_turn(v_old: np.ndarray, v_new: np.ndarray, max_turn_deg: float) -> np.ndarray:
    """Limit heading change; keep the new speed. Stationary boids and zero
    new velocities pass through unchanged."""
    max_rad = math.radians(max_turn_deg)
    cross = v_old[:, 0] * v_new[:, 1] - v_old[:, 1] * v_new[:, 0]
    dot = v_old[:, 0] * v_new[:, 0] + v_old[:, 1] * v_new[:, 1]
    delta = np.arctan2(cross, dot)
    old_speed = np.sqrt(np.sum(v_old * v_old, axis=1))
    new_speed = np.sqrt(np.sum(v_new * v_new, axis=1))
    over = (np.abs(delta) > max_rad) & (old_speed > 0) & (new_speed > 0)
    if not np.any(over):
        return v_new
    out = v_new.copy()
    ang = np.arctan2(v_old[over, 1], v_old[over, 0]) + np.sign(delta[over]) * max_rad
    out[over, 0] = new_speed[over] * np.cos(ang)
    out[over, 1] = new_speed[over] * np.sin(ang)
    return out


def boids_step(cfg: BoidsConfig, s: np.ndarray) -> tuple[np.ndarray, Graph]:
    """One synchronous boids update; returns the neighbourhood graph used.

    Forces, in order: boundary steer, separation, alignment, cohesion; then
    the turn clamp, the speed clamp, and the position update.
    """
    s = np.asarray(s, dtype=np.float64)
    n = len(s)
    p = s[:, :2]
    v = s[:, 2:]
    g = Graph.from_pairs(n, _radius_pairs(p, cfg.radius), coords=p.copy())

    acc = np.zeros_like(v)

    # 1. boundary: steer toward the centre when close to any wall
    near = np.any(np.abs(p) > cfg.box_half - cfg.boundary_margin, axis=1)
    if np.any(near):
        to_center = -p[near]
        norm = np.sqrt(np.sum(to_center * to_center, axis=1, keepdims=True))
        acc[near] += cfg.boundary_push * to_center / np.where(norm > 0, norm, 1.0)

    if len(g.src):
        diff = p[g.dst] - p[g.src]  # receiver minus neighbour
        dist = np.sqrt(np.sum(diff * diff, axis=1))
        starts = np.flatnonzero(np.r_[True, g.dst[1:] != g.dst[:-1]])
        present = g.dst[starts]

        # 2. separation: push away from neighbours closer than the threshold
        too_close = dist < cfg.separation_dist
        if np.any(too_close):
            contrib = np.where(too_close[:, None], diff, 0.0)
            sep = np.add.reduceat(contrib, starts, axis=0)
            acc[present] += sep

        # 3. alignment toward mean neighbour velocity, 4. cohesion toward
        # mean neighbour position
        deg = g.degree.astype(np.float64)[present, None]
        mean_v = np.add.reduceat(v[g.src], starts, axis=0) / deg
        mean_p = np.add.reduceat(p[g.src], starts, axis=0) / deg
        acc[present] += (mean_v - v[present]) * cfg.align_scale
        acc[present] += (mean_p - p[present]) * cfg.cohesion_scale

    # 5.-6. integrate the forces, then clamp turn before speed
    v_new = _clamp_turn(v, v + acc, cfg.max_turn_deg)
    v_new = _clamp_speed(v_new, cfg.speed_limit)

    # 7. advance positions
    out = np.concatenate([p + v_new, v_new], axis=1)
    return out, g


def boids_rollout(cfg: BoidsConfig, s0: np.ndarray, steps: int) -> list[np.ndarray]:
    """Trajectory of states only (graphs recomputed on demand)."""
    traj = [np.asarray(s0, dtype=np.float64)]
    cur = traj[0]
    for _ in range(steps):
        cur, _ = boids_step(cfg, cur)
        traj.append(cur)
    return traj


def validate_boids_trajectory(cfg: BoidsConfig, traj) -> dict:
    """Check the hard limits over a trajectory; returns worst-case stats."""
    max_speed = 0.0
    max_turn = 0.0
    max_coord = 0.0
    prev_v = None
    for s in traj:
        v = s[:, 2:]
        max_speed = max(max_speed, float(np.max(np.sqrt(np.sum(v * v, axis=1)), initial=0.0)))
        max_coord = max(max_coord, float(np.max(np.abs(s[:, :2]), initial=0.0)))
        if prev_v is not None:
            cross = prev_v[:, 0] * v[:, 1] - prev_v[:, 1] * v[:, 0]
            dot = prev_v[:, 0] * v[:, 0] + prev_v[:, 1] * v[:, 1]
            moving = (np.sum(prev_v * prev_v, axis=1) > 0) & (np.sum(v * v, axis=1) > 0)
            if np.any(moving):
                turn = np.abs(np.degrees(np.arctan2(cross[moving], dot[moving])))
                max_turn = max(max_turn, float(np.max(turn)))
        prev_v = v
    return {
        "max_speed": max_speed,
        "max_turn_deg": max_turn,
        "max_abs_position": max_coord,
        "speed_ok": max_speed <= cfg.speed_limit + 1e-12,
        "turn_ok": max_turn <= cfg.max_turn_deg + 1e-9,
        "box_ok": max_coord <= 1.2,
    }


# ----------------------------------------------------------------------------
# trajectory files
# ----------------------------------------------------------------------------


def save_trajectory_jsonl(path, traj, binary: bool = False) -> None:
    """One record per step: {"t": int, "states": [[...], ...]}."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for t, s in enumerate(traj):
            values = s.values if isinstance(s, StateMatrix) else np.asarray(s)
            if binary:
                rows = [[int(v) for v in row] for row in values]
            else:
                rows = [[float(v) for v in row] for row in values]
            fh.write(json.dumps({"t": t, "states": rows}) + "\n")
    os.replace(tmp, path)


def load_trajectory_jsonl(path) -> list[np.ndarray]:
    traj = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                traj.append(np.asarray(rec["states"], dtype=np.float64))
    return traj
