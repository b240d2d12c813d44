"""Viewpoint-planning episode loop.

An episode owns one scene and one belief map.  ``reset`` runs the three
fixed survey views to seed the map, then ``step`` executes one camera pose
at a time: render, integrate, score.  The observation vector (43 values),
the reward decomposition and the entropy-window termination rule are all
exposed so that an external learner or the built-in scripted planners can
drive the loop interchangeably.

Reward: r = r_sparse + r_cont, with r_cont = -cost_weight * motion_cost +
gain_weight * information_gain and r_sparse the collision/drop penalty.
An out-of-workspace pose counts as a collision event: it is not executed,
receives the sparse penalty and ends the episode.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mapping import (
    DEFAULT_MAP_PARAMS,
    HeightMap,
    MapParams,
    entropy,
    information_gain,
    integrate,
    largest_unknown_center,
    motion_cost,
    pooled_features,
)
from .scene import SceneState
from .sensor import (
    DEFAULT_INTRINSICS,
    CameraIntrinsics,
    CameraPose,
    Workspace,
    depth_to_pointcloud,
    pose_valid,
    render_depth,
    survey_poses,
)

OBSERVATION_SIZE = 43


class EpisodeFinished(RuntimeError):
    """step() was called after the episode terminated."""


@dataclass(frozen=True)
class RewardParams:
    cost_weight: float = 1.0
    gain_weight: float = 10.0
    collision_penalty: float = -25.0

    def __post_init__(self):
        if self.cost_weight < 0 or self.gain_weight < 0:
            raise ValueError("reward weights must be >= 0")


@dataclass(frozen=True)
class TerminationCriteria:
    """Stop once the last ``window`` entropy changes are all small.

    Requires every per-step |change| below ``single_change_max`` and their
    sum below ``total_change_max``.
    """

    single_change_max: float = 0.01
    total_change_max: float = 0.05
    window: int = 3

    def __post_init__(self):
        if self.single_change_max > self.total_change_max:
            raise ValueError("single_change_max must not exceed total_change_max")

    def met(self, recent_changes) -> bool:
        changes = list(recent_changes)[-self.window :]
        if len(changes) < self.window:
            return False
        return all(c < self.single_change_max for c in changes) and sum(changes) < self.total_change_max


@dataclass(frozen=True)
class Observation:
    """Planner observation; ``vector()`` concatenates in the fixed layout.

    indices  0..31  pooled map features
            32..36  last action (x, y, z, pitch, yaw)
            37      information gain of the step
            38      motion cost of the step
            39      collision / drop flag
            40..42  center of the largest unknown region
    """

    features: np.ndarray
    last_action: np.ndarray
    info_gain: float
    cost: float
    event_flag: int
    unknown_center: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.features,
                self.last_action,
                [self.info_gain, self.cost, float(self.event_flag)],
                self.unknown_center,
            ]
        )


def build_observation(
    hmap: HeightMap,
    last_pose: CameraPose,
    info_gain_value: float,
    cost: float,
    event_flag: int,
) -> Observation:
    center, _ = largest_unknown_center(hmap)
    return Observation(
        features=pooled_features(hmap),
        last_action=last_pose.as_array(),
        info_gain=info_gain_value,
        cost=cost,
        event_flag=int(bool(event_flag)),
        unknown_center=center,
    )


@dataclass
class EpisodeTrace:
    """Ordered per-step record of an episode, serializable as JSON lines.

    Record kinds: "bootstrap" (the three survey views), "view" (planner
    steps) and "push" (appended by the pipeline harness).  Field names are
    stable; see the README for the schema.
    """

    seed: int
    records: list[dict] = field(default_factory=list)

    def add(self, record: dict) -> None:
        record["index"] = len(self.records)
        self.records.append(record)

    def view_records(self) -> list[dict]:
        return [r for r in self.records if r["kind"] == "view"]

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r) for r in self.records) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @staticmethod
    def from_jsonl(text: str) -> "EpisodeTrace":
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        trace = EpisodeTrace(seed=-1, records=records)
        return trace


def bootstrap(
    scene: SceneState,
    hmap: HeightMap,
    ws: Workspace | None = None,
    intr: CameraIntrinsics = DEFAULT_INTRINSICS,
    params: MapParams | None = None,
) -> tuple[HeightMap, list[CameraPose]]:
    """Render and integrate the three fixed survey views into a fresh map."""
    ws = ws or Workspace.for_shelf(scene.shelf)
    poses = survey_poses(scene.shelf, ws)
    for pose in poses:
        img = render_depth(scene, pose, intr, ws)
        integrate(hmap, depth_to_pointcloud(img, pose), pose, intr, params)
    return hmap, poses


class Episode:
    """One mapping episode over a fixed scene.

    The episode owns its scene and map exclusively.  The pipeline harness
    may swap in a post-push scene via ``apply_push_result`` and re-arm a
    terminated episode with ``resume_after_push``.
    """

    def __init__(
        self,
        scene: SceneState,
        ws: Workspace | None = None,
        intr: CameraIntrinsics = DEFAULT_INTRINSICS,
        map_params: MapParams = DEFAULT_MAP_PARAMS,
        reward: RewardParams = RewardParams(),
        termination: TerminationCriteria = TerminationCriteria(),
        max_steps: int = 50,
        enforce_termination: bool = True,
    ):
        self.scene = scene
        self.ws = ws or Workspace.for_shelf(scene.shelf)
        self.intr = intr
        self.map_params = map_params
        self.reward = reward
        self.termination = termination
        self.max_steps = max_steps
        self.enforce_termination = enforce_termination
        self.map: HeightMap | None = None
        self.trace: EpisodeTrace | None = None
        self._done = False
        self._last_pose: CameraPose | None = None
        self._window: deque[float] = deque(maxlen=termination.window)
        self._steps = 0
        self._pending_event = False
        self._bootstrap_entropy = None

    @property
    def done(self) -> bool:
        return self._done

    @property
    def last_pose(self) -> CameraPose:
        return self._last_pose

    @property
    def bootstrap_entropy(self) -> float:
        return self._bootstrap_entropy

    def reset(self) -> Observation:
        self.map = HeightMap.for_shelf(self.scene.shelf, self.map_params)
        self.trace = EpisodeTrace(seed=self.scene.seed)
        self._done = False
        self._steps = 0
        self._pending_event = False
        self._window.clear()

        poses = survey_poses(self.scene.shelf, self.ws)
        gains, costs = [], []
        prev_unknown = self.map.unknown_count()
        prev_pose = poses[0]
        for pose in poses:
            img = render_depth(self.scene, pose, self.intr, self.ws)
            integrate(self.map, depth_to_pointcloud(img, pose), pose, self.intr)
            now_unknown = self.map.unknown_count()
            gains.append(information_gain(prev_unknown, now_unknown))
            costs.append(motion_cost(prev_pose, pose))
            self.trace.add(
                {
                    "kind": "bootstrap",
                    "pose": list(pose.as_array()),
                    "entropy_after": now_unknown / self.map.n_cells,
                }
            )
            prev_unknown, prev_pose = now_unknown, pose
        self._last_pose = poses[-1]
        self._bootstrap_entropy = entropy(self.map)
        return build_observation(self.map, self._last_pose, gains[-1], costs[-1], 0)

    def step(self, pose: CameraPose) -> tuple[Observation, float, bool]:
        if self._done:
            raise EpisodeFinished("episode already terminated")
        cost = motion_cost(self._last_pose, pose)
        h_before = entropy(self.map)

        if not pose_valid(pose, self.ws):
            gain = 0.0
            reward = self.reward.collision_penalty + (-self.reward.cost_weight * cost + self.reward.gain_weight * gain)
            self._done = True
            obs = build_observation(self.map, pose, gain, cost, 1)
            self._record_view(pose, h_before, h_before, gain, cost, reward, 1)
            return obs, reward, True

        unknown_before = self.map.unknown_count()
        img = render_depth(self.scene, pose, self.intr, self.ws)
        integrate(self.map, depth_to_pointcloud(img, pose), pose, self.intr)
        unknown_after = self.map.unknown_count()
        gain = information_gain(unknown_before, unknown_after)
        h_after = entropy(self.map)

        event = 1 if self._pending_event else 0
        self._pending_event = False
        reward = -self.reward.cost_weight * cost + self.reward.gain_weight * gain

        self._steps += 1
        self._last_pose = pose
        self._window.append(abs(h_before - h_after))
        if self.enforce_termination and self.termination.met(self._window):
            self._done = True
        if self._steps >= self.max_steps:
            self._done = True

        obs = build_observation(self.map, pose, gain, cost, event)
        self._record_view(pose, h_before, h_after, gain, cost, reward, event)
        return obs, reward, self._done

    def _record_view(self, pose, h_before, h_after, gain, cost, reward, event) -> None:
        self.trace.add(
            {
                "kind": "view",
                "pose": list(pose.as_array()),
                "entropy_before": h_before,
                "entropy_after": h_after,
                "info_gain": gain,
                "motion_cost": cost,
                "reward": reward,
                "event": event,
                "done": self._done,
            }
        )

    def apply_push_result(self, scene_after: SceneState, drops: bool) -> None:
        """Install the post-push ground truth; the belief map stays as is."""
        self.scene = scene_after
        if drops:
            self._pending_event = True

    def resume_after_push(self) -> None:
        """Re-arm a tau-terminated episode for the next planning phase."""
        self._done = False
        self._window.clear()
        self._steps = 0
