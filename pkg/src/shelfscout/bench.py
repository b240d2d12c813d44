"""Experiment harness: pipeline runs, batch sweeps, reports, statistics.

A pipeline run alternates planning phases with pushes:

    bootstrap -> plan views until the episode terminates -> best push ->
    re-arm -> plan views ... until the last push bought less entropy than
    the cutoff, candidates run out, or the iteration cap is hit.

One "iteration" is one executed push (with its follow-up planning phase).
The run keeps the belief snapshot with the lowest entropy across phase
ends as its output map, so an unproductive final push can never make the
reported result worse than planning alone.

Reports carry two entropy-reduction columns because the two natural
baselines differ: reduction relative to the post-bootstrap map, and
reduction relative to the map after the first planning phase (what pushes
add on top of view planning).

The greedy and global planners are analogs of published sampling planners
adapted to this confined-shelf setup, not reimplementations; reports label
them as such.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, replace
from multiprocessing import Pool
from pathlib import Path

import numpy as np
from scipy.special import stdtr

from .episode import Episode, EpisodeTrace, RewardParams, TerminationCriteria
from .mapping import DEFAULT_MAP_PARAMS, MapParams, entropy
from .planning import PlannerKind, make_planner, plan_next_view  # noqa: F401  (re-export: planners are part of the bench surface)
from .push import (
    DEFAULT_SAMPLING,
    PushSamplingConfig,
    execute_push,
    sample_candidates,
    select_best_push,
)
from .scene import DEFAULT_SHELF, SceneState, ShelfSpec, displacement, sample_scene
from .sensor import DEFAULT_INTRINSICS, CameraIntrinsics, Workspace

PLANNER_NOTE = "greedy/global planners are sampling-planner analogs adapted to the shelf workspace, not reimplementations"


@dataclass(frozen=True)
class PipelineParams:
    planner: PlannerKind = PlannerKind.GREEDY
    n_candidates: int = 64
    push_selection: str = "scored"        # scored | random | none
    push_length: float = 0.05
    # Length used when scoring candidates; None scores at the executed
    # length.  A fixed value makes selection length-blind, mirroring a
    # predictor that ranks push maps without knowing the stroke length.
    score_length: float | None = None
    displacement_weight: float = 0.5
    drop_penalty: float = 1.0
    push_gain_cutoff: float = 0.01        # minimum entropy reduction a push must buy
    max_iterations: int = 8
    # Five views per planning phase mirrors the ~5 viewpoints a tuned agent
    # spends before its entropy window fires; None lets each phase run to
    # entropy-window termination instead.
    steps_budget: int | None = 5
    n_objects: tuple[int, int] = (8, 10)
    shelf: ShelfSpec = DEFAULT_SHELF
    intr: CameraIntrinsics = DEFAULT_INTRINSICS
    map_params: MapParams = DEFAULT_MAP_PARAMS
    reward: RewardParams = RewardParams()
    termination: TerminationCriteria = TerminationCriteria()
    sampling: PushSamplingConfig = DEFAULT_SAMPLING
    scene_file: str | None = None

    def __post_init__(self):
        if self.push_gain_cutoff <= 0:
            raise ValueError("push_gain_cutoff must be positive")
        if self.push_selection not in ("scored", "random", "none"):
            raise ValueError("push_selection must be scored, random or none")


@dataclass
class SceneRow:
    seed: int
    planner: str
    push_selection: str
    n_objects: int
    entropy_bootstrap: float
    entropy_after_planning: float
    entropy_final: float
    reduction_vs_bootstrap: float
    reduction_vs_planning: float
    mean_displacement_cm: float
    drops: int
    iterations: int
    steps: int
    plan_time_s: float
    error: str = ""


# Column order for CSV output; timing columns are excluded from the
# byte-determinism guarantee.
CSV_COLUMNS = [
    "seed",
    "planner",
    "push_selection",
    "n_objects",
    "entropy_bootstrap",
    "entropy_after_planning",
    "entropy_final",
    "reduction_vs_bootstrap",
    "reduction_vs_planning",
    "mean_displacement_cm",
    "drops",
    "iterations",
    "steps",
    "plan_time_s",
    "error",
]
TIMING_COLUMNS = ("plan_time_s",)


def _scene_for_seed(seed: int, params: PipelineParams) -> SceneState:
    if params.scene_file:
        return SceneState.load(params.scene_file)
    rng = np.random.default_rng(seed)
    lo, hi = params.n_objects
    n = int(rng.integers(lo, hi + 1))
    return sample_scene(seed, n, params.shelf)


def _planner_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 0xC0FFEE]))


@dataclass
class PipelineResult:
    row: SceneRow
    trace: EpisodeTrace | None = None
    final_map: object = None


def run_pipeline(seed: int, params: PipelineParams = PipelineParams()) -> PipelineResult:
    """Run one seeded scene through the full view-plus-push pipeline.

    With ``push_selection="none"`` this degrades to a single planning phase
    (planner-only baseline).  Deterministic for fixed (seed, params).
    """
    scene = _scene_for_seed(seed, params)
    initial_scene = scene
    shelf = scene.shelf  # replayed scenes may carry a nonstandard shelf
    ws = Workspace.for_shelf(shelf)
    episode = Episode(
        scene,
        ws=ws,
        intr=params.intr,
        map_params=params.map_params,
        reward=params.reward,
        termination=params.termination,
        enforce_termination=params.steps_budget is None,
    )
    rng = _planner_rng(seed)
    episode.reset()
    plan_times: list[float] = []
    steps_total = 0

    def planning_phase() -> None:
        nonlocal steps_total
        budget = params.steps_budget if params.steps_budget is not None else episode.max_steps
        planner = None
        if params.planner is not PlannerKind.FIXED3P:
            planner = make_planner(params.planner, ws, shelf, params.intr, rng, params.n_candidates)
            planner.reset(episode.map, episode.last_pose)
        for _ in range(budget):
            if params.planner is PlannerKind.FIXED3P:
                break
            t0 = time.perf_counter()
            pose = planner.plan(episode.map, episode.last_pose)
            plan_times.append(time.perf_counter() - t0)
            _, _, done = episode.step(pose)
            steps_total += 1
            if done:
                break

    planning_phase()
    h_bootstrap = episode.bootstrap_entropy
    h_planning = entropy(episode.map)

    best_entropy = h_planning
    best_map = episode.map.copy()
    iterations = 0
    drops_total = 0
    h_prev_phase = h_planning

    if params.push_selection != "none":
        push_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB00557]))
        while iterations < params.max_iterations:
            candidates = sample_candidates(
                episode.map, episode.scene.shelf, params.sampling, params.push_length
            )
            if not candidates:
                break
            if params.push_selection == "scored":
                scoring = candidates
                if params.score_length is not None and params.score_length != params.push_length:
                    scoring = [replace(c, length=params.score_length) for c in candidates]
                chosen = select_best_push(
                    episode.scene,
                    episode.map,
                    scoring,
                    params.displacement_weight,
                    params.drop_penalty,
                    intr=params.intr,
                )
                cand = candidates[scoring.index(chosen)]
            else:
                cand = candidates[int(push_rng.integers(len(candidates)))]
            outcome = execute_push(episode.scene, cand)
            episode.trace.add(
                {
                    "kind": "push",
                    "start": list(cand.start),
                    "direction_index": cand.direction_index,
                    "length": cand.length,
                    "contacted_id": outcome.contacted_id,
                    "displacements": {str(k): v for k, v in outcome.displacements.items()},
                    "drops": list(outcome.drops),
                    "wall_contact": outcome.wall_contact,
                }
            )
            episode.apply_push_result(outcome.scene_after, bool(outcome.drops))
            drops_total += len(outcome.drops)
            iterations += 1
            episode.resume_after_push()
            planning_phase()
            h_now = entropy(episode.map)
            if h_now < best_entropy:
                best_entropy = h_now
                best_map = episode.map.copy()
            if h_prev_phase - h_now <= params.push_gain_cutoff:
                break
            h_prev_phase = h_now

    disp = displacement(initial_scene, episode.scene)
    row = SceneRow(
        seed=seed,
        planner=params.planner.value,
        push_selection=params.push_selection,
        n_objects=len(initial_scene.objects),
        entropy_bootstrap=h_bootstrap,
        entropy_after_planning=h_planning,
        entropy_final=best_entropy,
        reduction_vs_bootstrap=_relative_reduction(h_bootstrap, best_entropy),
        reduction_vs_planning=_relative_reduction(h_planning, best_entropy),
        mean_displacement_cm=disp.mean * 100.0,
        drops=drops_total,
        iterations=iterations,
        steps=steps_total,
        plan_time_s=float(np.mean(plan_times)) if plan_times else 0.0,
    )
    return PipelineResult(row=row, trace=episode.trace, final_map=best_map)


def _relative_reduction(before: float, after: float) -> float:
    if before <= 0.0:
        return 0.0
    return (before - after) / before


def _run_one(args) -> SceneRow:
    seed, params = args
    try:
        return run_pipeline(seed, params).row
    except Exception as exc:  # recorded per scene, never aborts the batch
        return SceneRow(
            seed=seed,
            planner=params.planner.value,
            push_selection=params.push_selection,
            n_objects=0,
            entropy_bootstrap=math.nan,
            entropy_after_planning=math.nan,
            entropy_final=math.nan,
            reduction_vs_bootstrap=math.nan,
            reduction_vs_planning=math.nan,
            mean_displacement_cm=math.nan,
            drops=0,
            iterations=0,
            steps=0,
            plan_time_s=0.0,
            error=f"{type(exc).__name__}: {exc}",
        )


@dataclass
class BenchReport:
    rows: list[SceneRow]
    params: PipelineParams
    note: str = PLANNER_NOTE

    def ok_rows(self) -> list[SceneRow]:
        return [r for r in self.rows if not r.error]

    def metric(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.ok_rows()])

    def aggregate(self) -> dict:
        out: dict = {"scenes": len(self.rows), "errors": sum(1 for r in self.rows if r.error)}
        for name in (
            "entropy_bootstrap",
            "entropy_after_planning",
            "entropy_final",
            "reduction_vs_bootstrap",
            "reduction_vs_planning",
            "mean_displacement_cm",
            "drops",
            "iterations",
            "steps",
            "plan_time_s",
        ):
            vals = self.metric(name)
            if vals.size:
                out[name] = {"mean": float(vals.mean()), "stderr": _stderr(vals)}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow([_csv_value(getattr(row, col)) for col in CSV_COLUMNS])
        return buf.getvalue()

    def save_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def to_json(self) -> str:
        return json.dumps(
            {
                "note": self.note,
                "planner": self.params.planner.value,
                "push_selection": self.params.push_selection,
                "push_length": self.params.push_length,
                "aggregate": self.aggregate(),
                "rows": [{col: getattr(r, col) for col in CSV_COLUMNS} for r in self.rows],
            },
            indent=2,
            allow_nan=True,
        )

    def save_json(self, path) -> None:
        Path(path).write_text(self.to_json())


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _stderr(vals: np.ndarray) -> float:
    if vals.size < 2:
        return 0.0
    return float(vals.std(ddof=1) / math.sqrt(vals.size))


def sweep(
    seeds,
    params: PipelineParams = PipelineParams(),
    workers: int = 1,
) -> BenchReport:
    """Run a batch of seeded scenes; results are ordered by the seed list.

    Per-scene work is independent, so the report is identical at any
    parallelism degree.
    """
    jobs = [(int(s), params) for s in seeds]
    if workers > 1:
        with Pool(processes=workers) as pool:
            rows = pool.map(_run_one, jobs)
    else:
        rows = [_run_one(j) for j in jobs]
    return BenchReport(rows=rows, params=params)


def compare_reports(
    a: BenchReport,
    b: BenchReport,
    metrics=("reduction_vs_bootstrap", "reduction_vs_planning", "mean_displacement_cm"),
) -> dict:
    """Paired t-test p-values between two method runs over the same seeds."""
    rows_a = {r.seed: r for r in a.ok_rows()}
    rows_b = {r.seed: r for r in b.ok_rows()}
    common = sorted(set(rows_a) & set(rows_b))
    if len(common) < 2:
        raise ValueError("need at least two seeds present in both reports")
    out = {}
    for metric in metrics:
        va = np.array([getattr(rows_a[s], metric) for s in common])
        vb = np.array([getattr(rows_b[s], metric) for s in common])
        res = paired_t_test(va, vb)
        out[metric] = {
            "p_value": res.p_value,
            "t_statistic": res.t_statistic,
            "degenerate": res.degenerate,
            "mean_a": float(va.mean()),
            "mean_b": float(vb.mean()),
            "n": len(common),
        }
    return out


@dataclass(frozen=True)
class TTestResult:
    p_value: float
    t_statistic: float
    degenerate: bool


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test on matched per-scene values.

    Degenerate inputs are flagged: all-zero differences report p = 1, and a
    constant nonzero difference (zero variance) reports p = 0 as exact
    separation.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two equal-length 1D samples with n >= 2")
    diff = a - b
    mean = diff.mean()
    sd = diff.std(ddof=1)
    n = diff.size
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(p_value=1.0, t_statistic=0.0, degenerate=True)
        return TTestResult(p_value=0.0, t_statistic=math.inf if mean > 0 else -math.inf, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(stdtr(n - 1, -abs(t)))
    return TTestResult(p_value=p, t_statistic=float(t), degenerate=False)
