"""Command-line entry point.

Every run resolves a config (defaults -> preset -> file -> flags), executes
one experiment command, and leaves a self-contained run directory under the
output root (env GNCALAB_RUNS, default ./runs): numeric artifacts first,
then the manifest, written atomically last so interrupted runs leave no
manifest. Numeric artifacts never contain timestamps, which keeps reruns
with the same seed byte-identical."""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys

import numpy as np

from . import __version__
from .config import Config, ConfigError, RunManifest, config_dict, config_hash, load_config
from .graphs import (
    Graph,
    delaunay,
    grid2d,
    load_geometric_graph,
    radius_graph,
    save_geometric_graph,
    swiss_roll,
    uniform_square,
)
from .metrics import (
    boids_series_complexity,
    classify_attractor,
    edge_of_chaos_sweep,
    mse_curve,
)
from .model import (
    MinimalVoronoiNet,
    build_minimal_voronoi_gnca,
    enumerate_rule_dataset,
    load_checkpoint,
    round_binary,
    save_checkpoint,
)
from .rng import Stream
from .rules import (
    BoidsConfig,
    boids_init,
    boids_rollout,
    save_trajectory_jsonl,
    validate_boids_trajectory,
)
from .training import (
    BoidsTrainConfig,
    FixedTargetTrainConfig,
    VoronoiTrainConfig,
    autonomous_eval,
    boids_model_rollout,
    normalized_initial_state,
    parse_t_mode,
    rescale_to_unit_box,
    train_boids,
    train_fixed_target,
    train_minimal_voronoi_mlp,
    train_voronoi,
    voronoi_autonomous_entropies,
)

# stream labels reserved for CLI-level randomness
_LBL_VORONOI_POINTS = 101
_LBL_SWISSROLL = 102
_LBL_BOIDS_EVAL = 500


def _runs_root() -> str:
    return os.environ.get("GNCALAB_RUNS", "runs")


def _make_run_dir(run_id: str, out: str | None) -> str:
    if out:
        os.makedirs(out, exist_ok=True)
        return out
    base = os.path.join(_runs_root(), run_id)
    path = base
    k = 2
    while os.path.exists(path):
        path = f"{base}-{k}"
        k += 1
    os.makedirs(path)
    return path


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_metrics_csv(run_dir: str, run_id: str, rows: list[tuple]) -> None:
    path = os.path.join(run_dir, "metrics.csv")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("run_id,metric,value,params\n")
        for metric, value, params in rows:
            fh.write(f"{run_id},{metric},{_fmt(value)},{params}\n")
    os.replace(tmp, path)


def _write_csv(run_dir: str, name: str, header: str, lines: list[str]) -> None:
    path = os.path.join(run_dir, name)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for line in lines:
            fh.write(line + "\n")
    os.replace(tmp, path)


def _finish_run(run_dir, run_id, cfg, command, started, metrics, conventions=None):
    manifest = RunManifest(
        run_id=run_id,
        seed=cfg.seed,
        command=command,
        config=config_dict(cfg),
        config_hash=config_hash(cfg),
        version=__version__,
        started_at=started,
        finished_at=_dt.datetime.now(_dt.timezone.utc).isoformat(),
        metrics=metrics,
        conventions=conventions or {},
    )
    manifest.save(os.path.join(run_dir, "manifest.json"))


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _resolve_graph(spec: str, cfg: Config) -> Graph:
    """grid2d:HxW | delaunay:N | swissroll:N | file:PATH (or a bare path)."""
    if spec.startswith("grid2d:"):
        h, w = spec.split(":", 1)[1].lower().split("x")
        return grid2d(int(h), int(w))
    if spec.startswith("delaunay:"):
        n = int(spec.split(":", 1)[1])
        return delaunay(uniform_square(n, Stream(cfg.seed).derive(_LBL_VORONOI_POINTS).key))
    if spec.startswith("swissroll:"):
        n = int(spec.split(":", 1)[1])
        cloud = swiss_roll(n, Stream(cfg.seed).derive(_LBL_SWISSROLL).key)
        return radius_graph(cloud, cfg.target_swissroll_radius)
    path = spec.split(":", 1)[1] if spec.startswith("file:") else spec
    if os.path.exists(path):
        return load_geometric_graph(path)
    raise ConfigError(f"cannot resolve graph spec {spec!r}")


def _boids_config(cfg: Config) -> BoidsConfig:
    return BoidsConfig(
        radius=cfg.boids_radius,
        boundary_margin=cfg.boids_boundary_margin,
        separation_dist=cfg.boids_separation,
        align_scale=cfg.boids_align_scale,
        cohesion_scale=cfg.boids_cohesion_scale,
        speed_limit=cfg.boids_speed_limit,
        max_turn_deg=cfg.boids_max_turn_deg,
        boundary_push=cfg.boids_boundary_push,
    )


# ----------------------------------------------------------------------------
# voronoi commands
# ----------------------------------------------------------------------------


def _cmd_voronoi_train(args, cfg: Config) -> int:
    started = _now()
    run_id = f"voronoi-train-s{cfg.seed}-{config_hash(cfg)[:8]}"
    run_dir = _make_run_dir(run_id, args.out)

    cloud = uniform_square(cfg.voronoi_n, Stream(cfg.seed).derive(_LBL_VORONOI_POINTS).key)
    g = delaunay(cloud)
    save_geometric_graph(g, os.path.join(run_dir, "graph.json"))

    tc = VoronoiTrainConfig(
        batches=cfg.voronoi_batches,
        batch_size=cfg.voronoi_batch_size,
        lr=cfg.voronoi_lr,
        d_hidden=cfg.d_hidden,
    )
    model, report = train_voronoi(g, cfg.voronoi_kappa, cfg.seed, tc)
    ckpt = os.path.join(run_dir, "checkpoint.json")
    save_checkpoint(ckpt, model)
    report.checkpoint_path = "checkpoint.json"
    report.save(os.path.join(run_dir, "report.json"))

    final_acc = report.val_accuracies[-1]
    rows = [
        ("final_val_accuracy", final_acc, f"kappa={cfg.voronoi_kappa}"),
        ("final_val_loss", report.val_losses[-1], f"kappa={cfg.voronoi_kappa}"),
        ("final_train_loss", report.train_losses[-1], f"kappa={cfg.voronoi_kappa}"),
    ]
    _write_metrics_csv(run_dir, run_id, rows)
    _finish_run(run_dir, run_id, cfg, "voronoi train", started, {"final_val_accuracy": final_acc})
    print(f"{run_dir}: final_val_accuracy={final_acc!r}")
    return 0


def _cmd_voronoi_eval(args, cfg: Config) -> int:
    started = _now()
    run_id = f"voronoi-eval-s{cfg.seed}-{config_hash(cfg)[:8]}"
    run_dir = _make_run_dir(run_id, args.out)
    rows: list[tuple] = []
    metrics: dict = {}

    if args.exact_weights:
        xs, ys = enumerate_rule_dataset(cfg.voronoi_kappa)
        net = MinimalVoronoiNet()
        pred = net.predict(xs)
        hits = int(np.sum(pred == ys))
        off_band = np.abs(xs[:, 1] - cfg.voronoi_kappa) > 0.01
        off_band_errors = int(np.sum((pred != ys)[off_band[:, None]]))
        rows += [
            ("minimal_accuracy_count", hits, f"of={len(xs)}"),
            ("minimal_accuracy_frac", hits / len(xs), f"kappa={cfg.voronoi_kappa}"),
            ("minimal_offband_errors", off_band_errors, "band=0.01"),
        ]
        metrics["minimal_accuracy_count"] = hits
        print(f"exact weights: {hits}/{len(xs)} (errors outside band: {off_band_errors})")

    if args.train_mlp:
        from .training import MinimalMlpTrainConfig

        mc = MinimalMlpTrainConfig(
            lr=cfg.mlp_lr,
            weight_decay=cfg.mlp_weight_decay,
            max_epochs=cfg.mlp_max_epochs,
            plateau_patience=cfg.mlp_plateau_patience,
            plateau_min_delta=cfg.mlp_plateau_min_delta,
            max_attempts=cfg.mlp_max_attempts,
        )
        net, mlp_report = train_minimal_voronoi_mlp(cfg.voronoi_kappa, cfg.seed, mc)
        xs, ys = enumerate_rule_dataset(cfg.voronoi_kappa)
        hits = int(np.sum(net.predict(xs) == ys))
        rows += [
            ("trained_mlp_accuracy_count", hits, f"of={len(xs)}"),
            ("trained_mlp_attempts", mlp_report.notes.get("attempts", 0), ""),
        ]
        metrics["trained_mlp_accuracy_count"] = hits
        print(f"trained mlp: {hits}/{len(xs)}")

    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
        graph_path = args.graph or os.path.join(os.path.dirname(args.checkpoint), "graph.json")
        g = (
            _resolve_graph(graph_path, cfg)
            if not os.path.exists(graph_path)
            else load_geometric_graph(graph_path)
        )
        ent = voronoi_autonomous_entropies(
            model, g, cfg.voronoi_kappa, args.steps or cfg.voronoi_eval_steps, cfg.seed
        )
        for key in ("h_s_truth", "h_s_model", "h_w_truth", "h_w_model", "h_s_gap", "h_w_gap"):
            rows.append((key, ent[key], f"steps={args.steps or cfg.voronoi_eval_steps}"))
        metrics.update(ent)
        print(
            f"entropy gaps: h_s={ent['h_s_gap']!r} h_w={ent['h_w_gap']!r} "
            f"(truth h_s={ent['h_s_truth']!r})"
        )

    if not rows:
        raise ConfigError("voronoi eval needs --exact-weights, --train-mlp or --checkpoint")
    _write_metrics_csv(run_dir, run_id, rows)
    _finish_run(run_dir, run_id, cfg, "voronoi eval", started, metrics)
    return 0


def _parse_kappas(spec: str) -> list[float]:
    """'0.05:0.95:0.05' inclusive grid, or comma-separated values."""
    if ":" in spec:
        lo, hi, step = (float(v) for v in spec.split(":"))
        count = int(round((hi - lo) / step)) + 1
        return [round(lo + i * step, 10) for i in range(count) if lo + i * step <= hi + 1e-9]
    return [float(v) for v in spec.split(",")]


def _cmd_voronoi_sweep(args, cfg: Config) -> int:
    started = _now()
    run_id = f"voronoi-sweep-s{cfg.seed}-{config_hash(cfg)[:8]}"
    run_dir = _make_run_dir(run_id, args.out)

    cloud = uniform_square(cfg.sweep_n, Stream(cfg.seed).derive(_LBL_VORONOI_POINTS).key)
    g = delaunay(cloud)
    kappas = _parse_kappas(cfg.sweep_kappas)
    table = edge_of_chaos_sweep(g, kappas, steps=cfg.sweep_steps, seed=cfg.seed)
    _write_csv(
        run_dir,
        "sweep.csv",
        "kappa,h_s,h_w",
        [f"{_fmt(k)},{_fmt(hs)},{_fmt(hw)}" for k, hs, hw in table],
    )

    hs = {k: v for k, v, _ in table}
    hw = {k: v for k, _, v in table}
    low = [v for k, v in hs.items() if k <= 0.35]
    high = [v for k, v in hs.items() if k >= 0.5]
    gap = float(np.mean(low) - np.mean(high)) if low and high else float("nan")
    argmax_hw = max(hw, key=hw.get)
    rows = [
        ("h_s_low_minus_high", gap, "low<=0.35,high>=0.5"),
        ("argmax_h_w_kappa", argmax_hw, ""),
        ("n_kappas", len(kappas), ""),
    ]
    _write_metrics_csv(run_dir, run_id, rows)
    _finish_run(
        run_dir, run_id, cfg, "voronoi sweep", started,
        {"h_s_low_minus_high": gap, "argmax_h_w_kappa": argmax_hw},
    )
    print(f"{run_dir}: h_s gap={gap!r}, argmax H_w at kappa={argmax_hw!r}")
    return 0


# ----------------------------------------------------------------------------
# boids commands
# ----------------------------------------------------------------------------


def _cmd_boids_sim(args, cfg: Config) -> int:
    started = _now()
    run_id = f"boids-sim-s{cfg.seed}-{config_hash(cfg)[:8]}"
    run_dir = _make_run_dir(run_id, args.out)
    sim = _boids_config(cfg)
    s0 = boids_init(cfg.boids_n, Stream(cfg.seed), sim)
    traj = boids_rollout(sim, s0, cfg.boids_steps)
    save_trajectory_jsonl(os.path.join(run_dir, "trajectory.jsonl"), traj)

    rows = [("steps", cfg.boids_steps, ""), ("boids", cfg.boids_n, "")]
    metrics: dict = {}
    if args.validate:
        v = validate_boids_trajectory(sim, traj)
        for key in ("max_speed", "max_turn_deg", "max_abs_position"):
            rows.append((key, v[key], ""))
        for key in ("speed_ok", "turn_ok", "box_ok"):
            rows.append((key, int(v[key]), ""))
        metrics.update(v)
        print(
            f"validate: speed_ok={v['speed_ok']} turn_ok={v['turn_ok']} box_ok={v['box_ok']}"
        )
    _write_metrics_csv(run_dir, run_id, rows)
    _finish_run(run_dir, run_id, cfg, "boids sim", started, metrics)
    print(f"{run_dir}: wrote {len(traj)} records")
    return 0


def _boids_train_config(cfg: Config) -> BoidsTrainConfig:
    return BoidsTrainConfig(
        n_boids=cfg.boids_n,
        steps=cfg.boids_steps,
        n_train=cfg.boids_train_traj,
        n_val=cfg.boids_val_traj,
        n_test=cfg.boids_test_traj,
        batch_size=cfg.boids_batch,
        lr=cfg.boids_lr,
        plateau_patience=cfg.boids_plateau_patience,
        stop_patience=cfg.boids_stop_patience,
        max_epochs=cfg.boids_max_epochs,
        d_hidden=cfg.d_hidden,
        edge_hidden=cfg.d_hidden,
        velocity_only_inputs=cfg.boids_velocity_only,
    )


def _cmd_boids_train(args, cfg: Config) -> int:
    started = _now()
    run_id = f"boids-train-s{cfg.seed}-{config_hash(cfg)[:8]}"
    run_dir = _make_run_dir(run_id, args.out)
    model, report, extras = train_boids(_boids_config(cfg), cfg.seed, _boids_train_config(cfg))
    ckpt = os.path.join(run_dir, "checkpoint.json")
    save_checkpoint(ckpt, model)
    report.checkpoint_path = "checkpoint.json"
    report.save(os.path.join(run_dir, "report.json"))
    rows = [
        ("test_mse", extras["test_mse"], "one_step=full_state"),
        ("best_val_mse", report.notes["best_val_mse"], ""),
        ("epochs_run", len(report.epochs), ""),
    ]
    _write_metrics_csv(run_dir, run_id, rows)
    _finish_run(run_dir, run_id, cfg, "boids train", started, {"test_mse": extras["test_mse"]})
    print(f"{run_dir}: test_mse={extras['test_mse']!r}")
    return 0


def _cmd_boids_eval(args, cfg: Config) -> int:
    started = _now()
    run_id = f"boids-eval-s{cfg.seed}-{config_hash(cfg)[:8]}"
    run_dir = _make_run_dir(run_id, args.out)
    if not args.checkpoint:
        raise ConfigError("boids eval needs --checkpoint")
    model = load_checkpoint(args.checkpoint)
    sim = _boids_config(cfg)
    steps = args.steps or cfg.boids_rollout_steps

    sampen_t, sampen_m, cd_t, cd_m = [], [], [], []
    for k in range(cfg.boids_eval_seeds):
        s0 = boids_init(cfg.boids_n, Stream(cfg.seed).derive(_LBL_BOIDS_EVAL + k), sim)
        truth = boids_rollout(sim, s0, steps)
        learned = boids_model_rollout(model, s0, steps)
        ct = boids_series_complexity(truth, m_sampen=cfg.sampen_m, m_embed=cfg.cd_m)
        cm = boids_series_complexity(learned, m_sampen=cfg.sampen_m, m_embed=cfg.cd_m)
        sampen_t.append(ct.sampen)
        sampen_m.append(cm.sampen)
        cd_t.append(ct.corr_dim)
        cd_m.append(cm.corr_dim)

    res = {
        "sampen_truth": float(np.mean(sampen_t)),
        "sampen_model": float(np.mean(sampen_m)),
        "cd_truth": float(np.mean(cd_t)),
        "cd_model": float(np.mean(cd_m)),
    }
    res["sampen_gap"] = abs(res["sampen_model"] - res["sampen_truth"])
    res["cd_gap"] = abs(res["cd_model"] - res["cd_truth"])
    params = f"steps={steps},seeds={cfg.boids_eval_seeds}"
    rows = [(k, v, params) for k, v in res.items()]
    _write_metrics_csv(run_dir, run_id, rows)
    _finish_run(run_dir, run_id, cfg, "boids eval", started, res)
    print(
        f"{run_dir}: sampen {res['sampen_truth']!r} vs {res['sampen_model']!r}; "
        f"cd {res['cd_truth']!r} vs {res['cd_model']!r}"
    )
    return 0


# ----------------------------------------------------------------------------
# fixed-target commands
# ----------------------------------------------------------------------------


def _target_train_config(cfg: Config) -> FixedTargetTrainConfig:
    return FixedTargetTrainConfig(
        batch_k=cfg.target_batch_k,
        lr=cfg.target_lr,
        cache_size=cfg.target_cache,
        batches_per_epoch=cfg.target_batches_per_epoch,
        plateau_patience=cfg.target_plateau_patience,
        stop_patience=cfg.target_stop_patience,
        max_epochs=cfg.target_max_epochs,
        clip_norm=cfg.target_clip_norm,
        d_hidden=cfg.d_hidden,
        min_epochs=cfg.target_min_epochs,
        stop_mse=cfg.target_stop_mse,
        rollout_steps=cfg.target_rollout_steps,
    )


def _cmd_target_train(args, cfg: Config) -> int:
    started = _now()
    run_id = f"target-train-s{cfg.seed}-{config_hash(cfg)[:8]}"
    run_dir = _make_run_dir(run_id, args.out)
    g = _resolve_graph(args.graph, cfg)
    save_geometric_graph(g, os.path.join(run_dir, "graph.json"))
    t_mode = args.t or cfg.target_t
    parse_t_mode(t_mode)

    model, report, extras = train_fixed_target(g, t_mode, cfg.seed, _target_train_config(cfg))
    ckpt = os.path.join(run_dir, "checkpoint.json")
    save_checkpoint(ckpt, model)
    report.checkpoint_path = "checkpoint.json"
    report.save(os.path.join(run_dir, "report.json"))
    rows = [
        ("best_val_mse", extras["best_val_mse"], f"t={t_mode}"),
        ("epochs_run", len(report.epochs), f"t={t_mode}"),
    ]
    _write_metrics_csv(run_dir, run_id, rows)
    _finish_run(
        run_dir, run_id, cfg, "target train", started,
        {"best_val_mse": extras["best_val_mse"]},
        conventions={"loss": "full mean over batch, nodes and dimensions"},
    )
    print(f"{run_dir}: best_val_mse={extras['best_val_mse']!r}")
    return 0


def _cmd_target_rollout(args, cfg: Config) -> int:
    started = _now()
    run_id = f"target-rollout-s{cfg.seed}-{config_hash(cfg)[:8]}"
    run_dir = _make_run_dir(run_id, args.out)
    if not args.checkpoint:
        raise ConfigError("target rollout needs --checkpoint")
    model = load_checkpoint(args.checkpoint)
    graph_src = args.graph or os.path.join(os.path.dirname(args.checkpoint), "graph.json")
    g = load_geometric_graph(graph_src) if os.path.exists(graph_src) else _resolve_graph(graph_src, cfg)

    target = rescale_to_unit_box(g.coords)
    s_bar = normalized_initial_state(target)
    steps = args.steps or cfg.target_rollout_steps
    traj = autonomous_eval(model, g, s_bar, steps, round_binary_states=False)
    save_trajectory_jsonl(os.path.join(run_dir, "trajectory.jsonl"), traj)
    curve = mse_curve(traj, target)
    _write_csv(
        run_dir,
        "mse_curve.csv",
        "step,mse",
        [f"{t},{_fmt(float(v))}" for t, v in enumerate(curve)],
    )
    t_mode = args.t or cfg.target_t
    graph_label = args.graph or "graph.json"
    if len(curve) >= 16:
        verdict = classify_attractor(curve)
        kind, period = verdict.kind, verdict.period
        min_error = verdict.min_error
    else:
        kind, period, min_error = "neither", None, float(np.min(curve))
    _write_csv(
        run_dir,
        "verdict.csv",
        "graph,t_mode,type,min_error",
        [f"{graph_label},{t_mode},{kind},{_fmt(min_error)}"],
    )
    rows = [
        ("min_error", min_error, f"steps={steps}"),
        ("verdict", kind, f"t={t_mode}"),
        ("period", period if period is not None else "", ""),
    ]
    _write_metrics_csv(run_dir, run_id, rows)
    _finish_run(
        run_dir, run_id, cfg, "target rollout", started,
        {"verdict": kind, "min_error": min_error},
    )
    print(f"{run_dir}: verdict={kind} min_error={min_error!r}")
    return 0


# ----------------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--preset", choices=["desk", "paper"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="explicit run directory (default: auto under runs root)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gncalab")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    voronoi = sub.add_parser("voronoi").add_subparsers(dest="subcommand", required=True)
    p = voronoi.add_parser("train")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--batches", type=int)
    p.add_argument("--lr", type=float)
    p.set_defaults(func=_cmd_voronoi_train, overrides=lambda a: {
        "voronoi_n": a.n, "voronoi_kappa": a.kappa, "voronoi_batches": a.batches,
        "voronoi_lr": a.lr,
    })
    p = voronoi.add_parser("eval")
    _add_common(p)
    p.add_argument("--exact-weights", action="store_true")
    p.add_argument("--train-mlp", action="store_true")
    p.add_argument("--checkpoint")
    p.add_argument("--graph")
    p.add_argument("--steps", type=int)
    p.add_argument("--kappa", type=float)
    p.set_defaults(func=_cmd_voronoi_eval, overrides=lambda a: {"voronoi_kappa": a.kappa})
    p = voronoi.add_parser("sweep")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--kappas")
    p.set_defaults(func=_cmd_voronoi_sweep, overrides=lambda a: {
        "sweep_n": a.n, "sweep_steps": a.steps, "sweep_kappas": a.kappas,
    })

    boids = sub.add_parser("boids").add_subparsers(dest="subcommand", required=True)
    p = boids.add_parser("sim")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--validate", action="store_true")
    p.set_defaults(func=_cmd_boids_sim, overrides=lambda a: {
        "boids_n": a.n, "boids_steps": a.steps,
    })
    p = boids.add_parser("train")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--steps", type=int)
    p.set_defaults(func=_cmd_boids_train, overrides=lambda a: {
        "boids_n": a.n, "boids_steps": a.steps,
    })
    p = boids.add_parser("eval")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--steps", type=int)
    p.add_argument("--seeds", type=int)
    p.set_defaults(func=_cmd_boids_eval, overrides=lambda a: {"boids_eval_seeds": a.seeds})

    target = sub.add_parser("target").add_subparsers(dest="subcommand", required=True)
    p = target.add_parser("train")
    _add_common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--t")
    p.set_defaults(func=_cmd_target_train, overrides=lambda a: {"target_t": a.t})
    p = target.add_parser("rollout")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--graph")
    p.add_argument("--t")
    p.add_argument("--steps", type=int)
    p.set_defaults(func=_cmd_target_rollout, overrides=lambda a: {"target_t": a.t})

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {k: v for k, v in args.overrides(args).items() if v is not None}
        if args.preset:
            overrides["preset"] = args.preset
        if args.seed is not None:
            overrides["seed"] = args.seed
        cfg = load_config(args.config, overrides)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure contract: exit 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
