"""Outer training loop: per-image prompt cycles, one optimizer step per image."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from ..autodiff import Optimizer, OptimizerConfig
from ..data import Scene
from ..model import PointPromptedDetector
from .cycles import run_cycle


class TrainingAborted(RuntimeError):
    def __init__(self, message, last_checkpoint=None, scene_id=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
        self.scene_id = scene_id


@dataclass
class TrainConfig:
    epochs: int = 3                   # the "1x" schedule
    cycles: int = 1                   # outer cycles T per image per epoch
    inner_steps: int = 2              # K prompt-growth steps per cycle
    lr: float = 1e-3
    grad_clip: float = 0.0           # global-norm clip, 0 = off
    seed: int = 0
    policy: str = "safe"              # worst-selection policy
    checkpoint_every: int = 1         # epochs between checkpoints
    out_dir: str = "runs/train"

    def validate(self):
        if self.cycles < 1 or self.inner_steps < 0 or self.epochs < 1:
            raise ValueError("epochs and cycles must be >= 1, inner_steps >= 0")
        return self


@dataclass
class TrainResult:
    final_checkpoint: Path
    log_path: Path
    checkpoints: List[Path] = field(default_factory=list)
    epoch_losses: List[float] = field(default_factory=list)
    steps: int = 0


def _cycle_seed(base: int, epoch: int, scene_index: int, tag: int) -> int:
    return int(np.random.SeedSequence((base, epoch, scene_index, tag)).generate_state(1)[0])


def train(model: PointPromptedDetector, scenes: Sequence[Scene], config: TrainConfig,
          log_every: int = 0) -> TrainResult:
    """Train on a scene list; deterministic given (model seed, config seed).

    Per image and outer cycle: one intra-class cycle per present category,
    then one inter-class cycle. All step losses are averaged into a single
    backward/optimizer step per image. Aborts on non-finite loss, keeping
    the last good checkpoint.
    """
    if not scenes:
        raise ValueError("training needs a non-empty dataset")
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"
    opt = Optimizer(model.parameters(),
                    OptimizerConfig(lr=config.lr, grad_clip=config.grad_clip))
    result = TrainResult(final_checkpoint=out_dir / "final.ckpt", log_path=log_path)
    last_ckpt: Optional[Path] = None
    global_step = 0

    with log_path.open("w") as log:
        for epoch in range(config.epochs):
            order_rng = np.random.default_rng(
                np.random.SeedSequence((config.seed, epoch, 0xE9)).generate_state(1)[0])
            order = order_rng.permutation(len(scenes))
            epoch_total = 0.0
            for rank, scene_idx in enumerate(order):
                scene = scenes[int(scene_idx)]
                if not scene.annotations:
                    continue
                features = model.forward_features(scene.image)
                step_losses = []
                for t in range(config.cycles):
                    for ci, cat in enumerate(scene.categories_present()):
                        st = run_cycle(model, scene, "intra", config.inner_steps,
                                       seed=_cycle_seed(config.seed, epoch, int(scene_idx), 3 * t + ci),
                                       policy=config.policy, category=cat, features=features)
                        step_losses.extend(st.loss_tensors)
                        _log_steps(log, global_step, epoch, scene.id, st)
                    st = run_cycle(model, scene, "inter", config.inner_steps,
                                   seed=_cycle_seed(config.seed, epoch, int(scene_idx), 1000 + t),
                                   policy=config.policy, features=features)
                    step_losses.extend(st.loss_tensors)
                    _log_steps(log, global_step, epoch, scene.id, st)

                image_loss = step_losses[0]
                for sl in step_losses[1:]:
                    image_loss = image_loss + sl
                image_loss = image_loss * (1.0 / len(step_losses))
                value = image_loss.item()
                if not math.isfinite(value):
                    log.write(json.dumps({"event": "abort", "scene": scene.id,
                                          "loss": value}) + "\n")
                    raise TrainingAborted(
                        f"non-finite loss on scene {scene.id}",
                        last_checkpoint=last_ckpt, scene_id=scene.id)
                opt.zero_grad()
                image_loss.backward()
                opt.step()
                epoch_total += value
                global_step += 1
                if log_every and global_step % log_every == 0:
                    print(f"epoch {epoch} step {global_step}: loss {value:.4f}", flush=True)
            result.epoch_losses.append(epoch_total / max(len(order), 1))

            if (epoch + 1) % config.checkpoint_every == 0:
                ckpt = out_dir / f"ckpt_epoch_{epoch + 1:03d}.ckpt"
                model.save(ckpt)
                result.checkpoints.append(ckpt)
                last_ckpt = ckpt

    model.save(result.final_checkpoint)
    result.steps = global_step
    return result


def _log_steps(log, global_step, epoch, scene_id, state):
    for step in state.steps:
        rec = {"step": global_step, "epoch": epoch, "scene": scene_id,
               "cycle": state.kind, "k": step.k, "n_prompts": step.n_prompts}
        rec.update(step.components)
        log.write(json.dumps(rec) + "\n")
