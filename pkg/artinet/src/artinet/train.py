"""Training loop: Adam, two learning-rate groups, class-balanced minibatches."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import ArtinetConfig
from .data import IGNORE, load_examples
from .model import ArtiNet


class EmptyClass(ValueError):
    pass


@dataclass
class TrainResult:
    model: ArtiNet
    losses: list = field(default_factory=list)


def balanced_batch_indices(rng, artifact_idx, clean_idx, batch):
    """Random instances of both classes: at least floor(batch/2) of each."""
    half = batch // 2
    take_art = batch - half
    art = rng.choice(artifact_idx, size=take_art, replace=len(artifact_idx) < take_art)
    cln = rng.choice(clean_idx, size=half, replace=len(clean_idx) < half)
    merged = np.concatenate([art, cln])
    rng.shuffle(merged)
    return merged


def row_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Cross-entropy summed over non-ignored grid rows of the batch."""
    flat_logits = logits.reshape(-1, 2)
    flat_labels = labels.reshape(-1)
    valid = flat_labels != IGNORE
    if not bool(valid.any()):
        raise ValueError("no labeled rows in batch")
    return torch.nn.functional.cross_entropy(
        flat_logits[valid], flat_labels[valid], reduction="sum"
    )


def train(examples: list, cfg: ArtinetConfig) -> TrainResult:
    artifact_idx = np.array([i for i, ex in enumerate(examples) if ex.has_artifact])
    clean_idx = np.array([i for i, ex in enumerate(examples) if not ex.has_artifact])
    if artifact_idx.size == 0 or clean_idx.size == 0:
        raise EmptyClass("corpus must contain both artifact and clean images")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    model = ArtiNet(cfg)
    optimizer = torch.optim.Adam(model.parameter_groups())

    tensors = torch.stack([ex.tensor for ex in examples])
    labels = torch.from_numpy(np.stack([ex.row_labels for ex in examples]))

    model.train()
    losses = []
    for _ in range(cfg.steps):
        batch = balanced_batch_indices(rng, artifact_idx, clean_idx, cfg.batch)
        idx = torch.from_numpy(batch)
        optimizer.zero_grad()
        loss = row_loss(model(tensors[idx]), labels[idx])
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))
    return TrainResult(model=model, losses=losses)


def train_corpus(manifest_path, cfg: ArtinetConfig) -> tuple:
    examples = load_examples(manifest_path, cfg)
    return train(examples, cfg), examples


def save_checkpoint(path, model: ArtiNet) -> None:
    torch.save({"config": model.cfg.as_dict(), "state": model.state_dict()}, path)


def load_checkpoint(path) -> ArtiNet:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    model = ArtiNet(ArtinetConfig(**payload["config"]))
    model.load_state_dict(payload["state"])
    model.eval()
    return model


def save_training_log(path, cfg: ArtinetConfig, losses) -> None:
    Path(path).write_text(json.dumps(
        {"config": cfg.as_dict(), "losses": losses}, sort_keys=True, indent=2) + "\n")
