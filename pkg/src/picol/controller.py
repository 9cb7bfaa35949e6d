"""Exponential-weights camera controllers.

Three variants share one update rule:

* centralized EW keeps one distribution over all joint actions;
* CEW keeps one distribution per camera and scores each candidate tilt by the
  loss of the joint action obtained by swapping it in for the camera's
  realized tilt while the other cameras keep theirs;
* PiCOL is CEW evaluated on the fusion state, mixed with uniform exploration.

Updates run in log space with max-subtraction so long runs of large losses
never overflow or underflow the whole vector.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import CameraActionSet, FusionState, fuse, join, observe
from .objectives import Task, loss_network


@dataclass
class CameraPolicy:
    camera: int
    probs: np.ndarray
    step: int = 0

    @classmethod
    def uniform(cls, camera: int, n: int) -> "CameraPolicy":
        return cls(camera, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class ControllerConfig:
    gamma: float | Callable[[int], float] = 1.0
    epsilon: float = 0.0
    mode: str = "picol"  # "ew", "cew" or "picol"

    def __post_init__(self):
        if self.mode not in ("ew", "cew", "picol"):
            raise ValueError(f"unknown controller mode {self.mode!r}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if not callable(self.gamma) and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def gamma_at(self, t: int) -> float:
        g = self.gamma(t) if callable(self.gamma) else self.gamma
        if not g >= 0:
            raise ValueError(f"gamma schedule returned {g} at t={t}")
        return float(g)


def ew_update(probs: np.ndarray, losses: np.ndarray, gamma: float,
              epsilon: float = 0.0) -> np.ndarray:
    """``p'(a) ∝ p(a) exp(-gamma L(a))``, then mixed with ``epsilon`` uniform."""
    probs = np.asarray(probs, dtype=float)
    losses = np.asarray(losses, dtype=float)
    with np.errstate(divide="ignore"):
        logits = np.log(probs) - gamma * (losses - losses.min())
    logits -= logits.max()
    w = np.exp(logits)
    q = w / w.sum()
    if epsilon:
        n = q.shape[0]
        q = (1.0 - epsilon) * q + epsilon / n
    return q


def ew_update_centralized(pi: np.ndarray, joint_masks: np.ndarray, state: np.ndarray,
                          gamma: float, loss: Callable = loss_network) -> np.ndarray:
    """Full-information EW step over an explicit list of joint actions."""
    return ew_update(pi, loss(joint_masks, state), gamma)


def joint_action_space(sets: Sequence[CameraActionSet]):
    """All joint actions as (index tuples, masks) in lexicographic order."""
    combos = list(itertools.product(*[range(len(s)) for s in sets]))
    masks = np.zeros((len(combos), sets[0].actions.shape[1]), dtype=bool)
    for r, combo in enumerate(combos):
        for s, k in zip(sets, combo):
            masks[r] |= s.actions[k]
    return combos, masks


def counterfactual_masks(sets: Sequence[CameraActionSet], realized: Sequence[int]):
    """Per camera, the joint masks obtained by swapping in each of its actions."""
    chosen = np.array([s.actions[k] for s, k in zip(sets, realized)], dtype=np.int16)
    count = chosen.sum(axis=0)
    out = []
    for i, s in enumerate(sets):
        others = (count - chosen[i]) > 0
        out.append(others[None, :] | s.actions)
    return out


def cew_update(policies: Sequence[CameraPolicy], sets: Sequence[CameraActionSet],
               realized: Sequence[int], state: np.ndarray, gamma: float,
               epsilon: float = 0.0, loss: Callable = loss_network) -> list[CameraPolicy]:
    """One correlated-EW step for every camera.

    Cameras read the same snapshot ``(realized, state)`` so the result does not
    depend on the order in which they are processed.
    """
    masks = counterfactual_masks(sets, realized)
    sizes = [m.shape[0] for m in masks]
    losses = np.split(np.asarray(loss(np.vstack(masks), state), dtype=float),
                      np.cumsum(sizes)[:-1])
    return [CameraPolicy(p.camera, ew_update(p.probs, l, gamma, epsilon), p.step + 1)
            for p, l in zip(policies, losses)]


def _draw(probs: np.ndarray, rng: np.random.Generator) -> int:
    c = np.cumsum(probs)
    k = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    return min(k, probs.shape[0] - 1)


def sample_joint(policies: Sequence[CameraPolicy], sets: Sequence[CameraActionSet],
                 rngs: Sequence[np.random.Generator]):
    """Independent per-camera draws, each from its own stream."""
    idx = [_draw(p.probs, r) for p, r in zip(policies, rngs)]
    mask = join([s.actions[k] for s, k in zip(sets, idx)])
    return idx, mask


def camera_streams(seed, n: int) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(c) for c in ss.spawn(n)]


@dataclass
class PicolController:
    """Per-camera policies plus their sampling streams."""

    sets: list[CameraActionSet]
    config: ControllerConfig = field(default_factory=ControllerConfig)
    seed: int | np.random.SeedSequence = 0
    policies: list[CameraPolicy] = field(init=False)
    t: int = field(init=False, default=0)

    def __post_init__(self):
        self.policies = [CameraPolicy.uniform(s.camera, len(s)) for s in self.sets]
        self._uniform = list(self.policies)
        # last stream drives the centralized draw in "ew" mode
        streams = camera_streams(self.seed, len(self.sets) + 1)
        self.rngs, self._joint_rng = streams[:-1], streams[-1]
        self._joint = None
        if self.config.mode == "ew":
            combos, masks = joint_action_space(self.sets)
            self._joint = (combos, masks, np.full(len(combos), 1.0 / len(combos)))

    @property
    def cameras(self) -> list[int]:
        return [s.camera for s in self.sets]

    def sample(self, uniform: bool = False):
        if self._joint is not None and not uniform:
            combos, masks, pi = self._joint
            r = _draw(pi, self._joint_rng)
            return list(combos[r]), masks[r].copy()
        if uniform:
            return sample_joint(self._uniform, self.sets, self.rngs)
        return sample_joint(self.policies, self.sets, self.rngs)

    def update(self, realized: Sequence[int], state: np.ndarray, loss: Callable) -> None:
        gamma = self.config.gamma_at(self.t)
        if self._joint is not None:
            combos, masks, pi = self._joint
            self._joint = (combos, masks, ew_update(pi, loss(masks, state), gamma,
                                                    self.config.epsilon))
        else:
            self.policies = cew_update(self.policies, self.sets, realized, state, gamma,
                                       self.config.epsilon, loss)
        self.t += 1

    def joint_probs(self) -> np.ndarray | None:
        return None if self._joint is None else self._joint[2].copy()

    def dump(self) -> dict:
        return {str(p.camera): dict(zip(s.labels(), map(float, p.probs)))
                for p, s in zip(self.policies, self.sets)}


@dataclass(frozen=True, eq=False)
class StepResult:
    actions: list[int]
    mask: np.ndarray
    observation: np.ndarray
    fusion: FusionState


def picol_step(controller: PicolController, truth: np.ndarray, prediction: np.ndarray,
               task: Task, prev_state: np.ndarray | None = None,
               window: list | None = None) -> StepResult:
    """Sample, observe, fuse with the prediction in effect, and update.

    The loss is evaluated on the fusion state (``picol``/``ew`` modes) or on the
    true state (``cew`` mode, the full-information reference). ``prev_state`` is
    the previous step's state on the same basis, needed by losses built on
    consecutive states. ``window``, if given, receives the fusion vector.
    """
    actions, mask = controller.sample()
    obs = observe(truth, mask)
    fusion = fuse(obs, prediction, mask)
    basis = truth if controller.config.mode == "cew" else fusion.values
    prev = basis if prev_state is None else prev_state
    controller.update(actions, task.loss_state(prev, basis), task.loss)
    if window is not None:
        window.append(fusion.values)
    return StepResult(actions, mask, obs, fusion)


def dump_policies(checkpoints: dict[int, dict], path: str | Path) -> None:
    """Write ``{step: {camera: {neighbor: prob}}}`` as JSON."""
    Path(path).write_text(json.dumps({str(k): v for k, v in checkpoints.items()}, indent=1))
