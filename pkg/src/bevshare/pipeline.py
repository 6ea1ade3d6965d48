"""End-to-end experiment pipeline and sweep runner.

One run = encode observations, build per-sender confidence and prior
selections, trim to the byte budget, exchange wire frames, warp into
the ego frame, fuse, detect, score.  Everything is a pure function of
(config, seed, sigma, budget, strategy), so sweeps parallelize over
seeds without changing results.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .confidence import (
    ConfidenceMap,
    HeadParams,
    afm_fuse,
    generate_confidence,
    mask_features,
)
from .config import ExperimentConfig
from .eval import average_precision, decode_detections, nms
from .fusion import FusionMode, ReceivedFeatures, fuse_self_attention, stack_sources
from .grid import AabbBEV, FeatureMap, GridSpec, box7d_to_bev
from .protocol import (
    MessageKind,
    comm_volume_log2,
    decode_message,
    encode_message,
    sparsify,
    warp_to_ego,
)
from .scene import AgentObservation, Scene, encode_observation, generate_scene
from .selection import (
    PriorMap,
    SelectionMatrix,
    budget_select,
    build_prior_map,
    gtfs_features,
    topk_select,
)


@dataclass(frozen=True)
class ResultRow:
    strategy: str
    seed: int
    sigma_e: float
    budget_bytes: int | None
    total_bytes_sent: int
    comm_volume_log2: float
    ap50: float
    ap70: float
    fg_purity: float | None
    runtime_ms: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.ap50 <= 1.0 and 0.0 <= self.ap70 <= 1.0):
            raise ValueError("AP values must lie in [0, 1]")
        if self.total_bytes_sent < 0:
            raise ValueError("byte counts must be non-negative")


def bytes_per_cell(channels: int) -> int:
    """Wire cost of one entry: u16 row + u16 col + channels * f32."""
    return 4 + 4 * channels


@dataclass(frozen=True)
class _AgentPrep:
    obs: AgentObservation
    conf: ConfidenceMap
    prior: PriorMap
    prior_skipped: int
    envelopes: tuple[AabbBEV, ...]  # all objects, agent's true frame


@dataclass(frozen=True)
class _SeedPrep:
    seed: int
    scene: Scene  # sigma = 0
    agents: tuple[_AgentPrep, ...]
    gts: tuple[AabbBEV, ...]  # ego-frame GT envelopes inside grid
    head: HeadParams


def _overlaps_grid(env: AabbBEV, spec: GridSpec) -> bool:
    return (
        env.x1 < spec.x_max
        and env.x2 > spec.x_min
        and env.y1 < spec.y_max
        and env.y2 > spec.y_min
    )


def prepare_seed(config: ExperimentConfig, seed: int) -> _SeedPrep:
    """Scene, observations, and sigma-independent per-agent products.

    Observations and selections depend only on true poses and objects,
    so one prep serves every (sigma, budget, strategy) grid point of a
    seed.
    """
    scen = replace(config.scenario, sigma_e=0.0, seed=seed)
    scene = generate_scene(scen)
    head = HeadParams.evidence_head(scen.channels, config.head.scale, config.head.bias)

    agents: list[_AgentPrep] = []
    for i in range(scen.n_agents):
        obs = encode_observation(scene, i, scen)
        conf = generate_confidence(afm_fuse([obs.features], 0), head, config.threshold)
        to_local = scene.true_poses[i].inverse()
        visible_envs = [box7d_to_bev(b, to_local)[1] for b in obs.visible_boxes]
        prior, skipped = build_prior_map(visible_envs, scen.spec)
        envelopes = tuple(box7d_to_bev(b, to_local)[1] for b in scene.objects)
        agents.append(
            _AgentPrep(
                obs=obs,
                conf=conf,
                prior=prior,
                prior_skipped=skipped,
                envelopes=envelopes,
            )
        )

    gts = tuple(e for e in agents[0].envelopes if _overlaps_grid(e, scen.spec))
    return _SeedPrep(seed=seed, scene=scene, agents=tuple(agents), gts=gts, head=head)


def _count_foreground(
    rows: np.ndarray,
    cols: np.ndarray,
    spec: GridSpec,
    envelopes: tuple[AabbBEV, ...],
) -> int:
    if rows.size == 0 or not envelopes:
        return 0
    xs = spec.x_min + (rows + 0.5) * spec.cell_x
    ys = spec.y_min + (cols + 0.5) * spec.cell_y
    inside = np.zeros(rows.shape[0], dtype=bool)
    for e in envelopes:
        inside |= (xs >= e.x1) & (xs <= e.x2) & (ys >= e.y1) & (ys <= e.y2)
    return int(inside.sum())


def _sender_plan(
    strategy: str,
    agent: _AgentPrep,
    k: int,
) -> list[tuple[MessageKind, SelectionMatrix, FeatureMap]]:
    """Which (kind, selection, source map) frames this sender emits.

    The combined strategy splits its payload into disjoint frames: the
    confidence frame carries the cells the sender is confident about,
    the prior frame carries only the remaining box-interior cells the
    confidence map missed.  Each cell's features cross the wire once,
    mirroring a channel-concatenated payload rather than stacking
    duplicate tokens at fusion.
    """
    features = agent.obs.features
    if strategy == "topk":
        return [(MessageKind.CONFIDENCE, topk_select(agent.conf.scores, k), features)]
    if strategy == "gtfs":
        sel = SelectionMatrix.from_mask(agent.prior.binary, "gtfs")
        return [(MessageKind.PRIOR, sel, gtfs_features(agent.prior, features))]
    if strategy in ("fast2comm", "fast2comm_test"):
        m_sel = SelectionMatrix.from_mask(agent.conf.binary, "confidence")
        masked = mask_features(agent.conf, features)
        plan = []
        if strategy == "fast2comm":
            fringe = agent.prior.binary.astype(bool) & ~agent.conf.binary.astype(bool)
            g_sel = SelectionMatrix.from_mask(fringe.astype(np.uint8), "gtfs")
            plan.append(
                (MessageKind.PRIOR, g_sel, gtfs_features(agent.prior, features))
            )
        plan.append((MessageKind.CONFIDENCE, m_sel, masked))
        return plan
    raise ValueError("unknown strategy %r" % (strategy,))


def _trim_plan(
    plan: list[tuple[MessageKind, SelectionMatrix, FeatureMap]],
    scores: np.ndarray,
    budget: int,
    bpc: int,
) -> list[tuple[MessageKind, SelectionMatrix, FeatureMap]]:
    """Trim a sender's frames to the byte budget by global score rank.

    The budget covers the union of the sender's frames (their supports
    are disjoint), so ranking once across the union keeps the sender's
    best cells regardless of which frame carries them.
    """
    union = np.zeros(scores.shape, dtype=np.uint8)
    for _, sel, _ in plan:
        union |= sel.binary.astype(np.uint8)
    kept = budget_select(SelectionMatrix.from_mask(union, "confidence"), scores, budget, bpc)
    if kept.count == int(union.sum()):
        return plan
    trimmed = []
    for kind, sel, source in plan:
        mask = sel.binary.astype(bool) & kept.binary.astype(bool)
        if int(mask.sum()) == sel.count:
            trimmed.append((kind, sel, source))
        else:
            trimmed.append(
                (kind, SelectionMatrix.from_mask(mask.astype(np.uint8), "budget-trimmed"), source)
            )
    return trimmed


def _run_prepared(
    prep: _SeedPrep,
    config: ExperimentConfig,
    strategy: str,
    sigma_e: float,
    budget: int | None,
) -> ResultRow:
    t0 = time.perf_counter()
    scen = replace(config.scenario, sigma_e=sigma_e, seed=prep.seed)
    spec = scen.spec
    scene = generate_scene(scen)  # same placement stream; only poses re-noised
    ego_features = prep.agents[0].obs.features

    total_bytes = 0
    shared_cells = 0
    shared_fg = 0
    received: list[ReceivedFeatures] = []

    if strategy != "no_fusion":
        bpc = bytes_per_cell(scen.channels)
        ego_est = scene.estimated_poses[0]
        for j in range(1, scen.n_agents):
            agent = prep.agents[j]
            plan = _sender_plan(strategy, agent, config.k)
            if budget is not None:
                plan = _trim_plan(plan, agent.conf.scores, budget, bpc)
            for kind, sel, source in plan:
                msg = sparsify(
                    source,
                    sel,
                    sender=j,
                    round_k=0,
                    kind=kind,
                    pose=scene.estimated_poses[j],
                )
                frame = encode_message(msg)
                total_bytes += len(frame)
                shared_cells += msg.n_entries
                shared_fg += _count_foreground(
                    msg.rows, msg.cols, spec, agent.envelopes
                )
                decoded = decode_message(frame, spec)
                warped = warp_to_ego(decoded, ego_est, spec)
                received.append(
                    ReceivedFeatures(sender=j, kind=kind, entries=warped)
                )
        mode = (
            FusionMode.TRAIN_LIKE
            if strategy in ("fast2comm", "gtfs")
            else FusionMode.TEST_LIKE
        )
        fused = fuse_self_attention(stack_sources(ego_features, received, mode))
    else:
        fused = ego_features

    dets = nms(
        decode_detections(fused, prep.head, config.detector.score_thresh),
        config.detector.nms_iou,
    )
    ap50 = average_precision(dets, prep.gts, 0.5).ap
    ap70 = average_precision(dets, prep.gts, 0.7).ap
    purity = shared_fg / shared_cells if shared_cells > 0 else None
    runtime_ms = (time.perf_counter() - t0) * 1000.0
    return ResultRow(
        strategy=strategy,
        seed=prep.seed,
        sigma_e=sigma_e,
        budget_bytes=budget,
        total_bytes_sent=total_bytes,
        comm_volume_log2=comm_volume_log2(total_bytes),
        ap50=ap50,
        ap70=ap70,
        fg_purity=purity,
        runtime_ms=runtime_ms,
    )


def run_pipeline(
    config: ExperimentConfig,
    seed: int,
    sigma_e: float,
    budget: int | None,
    strategy: str | None = None,
) -> ResultRow:
    """Run one grid point end to end; defaults to the first configured
    strategy."""
    if strategy is None:
        strategy = config.strategies[0]
    prep = prepare_seed(config, seed)
    return _run_prepared(prep, config, strategy, sigma_e, budget)


def _seed_job(
    config: ExperimentConfig, seed: int
) -> dict[tuple[str, float, int | None], ResultRow]:
    prep = prepare_seed(config, seed)
    out = {}
    for strategy in config.strategies:
        for sigma in config.sigmas:
            for budget in config.budgets:
                out[(strategy, sigma, budget)] = _run_prepared(
                    prep, config, strategy, sigma, budget
                )
    return out


CSV_FIELDS = (
    "strategy",
    "seed",
    "sigma_e",
    "budget_bytes",
    "total_bytes_sent",
    "comm_volume_log2",
    "ap50",
    "ap70",
    "fg_purity",
    "runtime_ms",
)


def _row_record(row: ResultRow) -> dict:
    return {
        "strategy": row.strategy,
        "seed": row.seed,
        "sigma_e": row.sigma_e,
        "budget_bytes": row.budget_bytes,
        "total_bytes_sent": row.total_bytes_sent,
        "comm_volume_log2": row.comm_volume_log2,
        "ap50": row.ap50,
        "ap70": row.ap70,
        "fg_purity": row.fg_purity,
        "runtime_ms": row.runtime_ms,
    }


def _csv_cell(value) -> str:
    if value is None:
        return "inf"
    return str(value)


def write_results(rows: list[ResultRow], stem: Path) -> tuple[Path, Path]:
    """Write <stem>.csv and <stem>.json atomically (tmp + rename)."""
    stem = Path(stem)
    csv_path = stem.parent / (stem.name + ".csv")
    json_path = stem.parent / (stem.name + ".json")

    csv_tmp = csv_path.with_name(csv_path.name + ".tmp")
    with open(csv_tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for row in rows:
            rec = _row_record(row)
            writer.writerow(
                [
                    rec["strategy"],
                    rec["seed"],
                    rec["sigma_e"],
                    _csv_cell(rec["budget_bytes"]),
                    rec["total_bytes_sent"],
                    rec["comm_volume_log2"],
                    rec["ap50"],
                    rec["ap70"],
                    "" if rec["fg_purity"] is None else rec["fg_purity"],
                    rec["runtime_ms"],
                ]
            )
    csv_tmp.replace(csv_path)

    json_tmp = json_path.with_name(json_path.name + ".tmp")
    payload = {"schema_version": 1, "rows": [_row_record(r) for r in rows]}
    with open(json_tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    json_tmp.replace(json_path)
    return csv_path, json_path


def _probe_writable(stem: Path) -> None:
    stem.parent.mkdir(parents=True, exist_ok=True)
    probe = stem.parent / (stem.name + ".probe.tmp")
    try:
        with open(probe, "w", encoding="utf-8"):
            pass
    finally:
        if probe.exists():
            probe.unlink()


def sweep(
    config: ExperimentConfig,
    out: str | Path | None = None,
    threads: int = 1,
    seed_override: int | None = None,
) -> list[ResultRow]:
    """Full strategies x seeds x sigmas x budgets grid.

    Rows come out in that canonical nesting order regardless of thread
    count; result files are written atomically next to ``out`` (the
    config's output stem unless overridden).
    """
    stem = Path(out if out is not None else config.out)
    _probe_writable(stem)
    seeds = (seed_override,) if seed_override is not None else config.seeds

    by_seed: dict[int, dict[tuple[str, float, int | None], ResultRow]] = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {seed: pool.submit(_seed_job, config, seed) for seed in seeds}
            by_seed = {seed: fut.result() for seed, fut in futures.items()}
    else:
        by_seed = {seed: _seed_job(config, seed) for seed in seeds}

    rows: list[ResultRow] = []
    for strategy in config.strategies:
        for seed in seeds:
            for sigma in config.sigmas:
                for budget in config.budgets:
                    rows.append(by_seed[seed][(strategy, sigma, budget)])
    write_results(rows, stem)
    return rows
