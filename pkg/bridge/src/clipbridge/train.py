"""Backbone training on rendered view datasets.

Recipe: ResNet-18 from scratch, SGD momentum 0.9, cosine-decayed learning
rate reaching 0 on the last epoch, weight decay 1e-4, gradient-norm clipping
at 10, random horizontal flips and random padded crops at training time.
Determinism is best-effort: seeds are fixed and loading is single-process by
default, but exact bitwise reproducibility is not guaranteed by the backend.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torchvision
from torch.utils.data import DataLoader, Dataset

from .data import class_ids, load_image, select_training


class DivergedTraining(RuntimeError):
    """Training loss became non-finite."""


@dataclass(frozen=True)
class TrainHyper:
    epochs: int = 300
    batch_size: int = 128
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    grad_clip: float = 10.0     # 0 disables clipping
    seed: int = 0
    flip: bool = True
    crop_padding: int = 8       # random crop after reflect-padding; 0 disables
    workers: int = 0            # parallel loading allowed, off by default

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.crop_padding < 0 or self.workers < 0:
            raise ValueError("crop_padding and workers must be >= 0")


def cosine_lr(base: float, epoch: int, epochs: int) -> float:
    """Base at epoch 0, exactly 0 at the final epoch."""
    if epochs == 1:
        return base
    return 0.5 * base * (1.0 + math.cos(math.pi * epoch / (epochs - 1)))


class ViewDataset(Dataset):
    """Training views as float tensors in [0, 1] with label indices."""

    def __init__(self, manifest: dict, records, label_of: dict,
                 flip: bool = False, crop_padding: int = 0,
                 generator: torch.Generator | None = None):
        self.images = [torch.from_numpy(
            load_image(manifest, r).transpose(2, 0, 1).copy()).float() / 255.0
            for r in records]
        self.labels = [label_of[int(r["class_id"])] for r in records]
        self.flip = flip
        self.crop_padding = crop_padding
        self.generator = generator

    def __len__(self):
        return len(self.images)

    def __getitem__(self, idx):
        x = self.images[idx]
        if self.flip and torch.rand((), generator=self.generator) < 0.5:
            x = torch.flip(x, dims=(2,))
        if self.crop_padding:
            p = self.crop_padding
            h, w = x.shape[1:]
            padded = torch.nn.functional.pad(x, (p, p, p, p), mode="reflect")
            dy = int(torch.randint(0, 2 * p + 1, (), generator=self.generator))
            dx = int(torch.randint(0, 2 * p + 1, (), generator=self.generator))
            x = padded[:, dy:dy + h, dx:dx + w]
        return x, self.labels[idx]


def build_model(num_classes: int) -> torch.nn.Module:
    return torchvision.models.resnet18(weights=None, num_classes=num_classes)


def train_backbone(manifest: dict, view_spec: str | None = None,
                   hyper: TrainHyper | None = None) -> dict:
    """Train a backbone on the manifest's training views; returns a checkpoint
    dict with the model weights, the class-id order, and the training log."""
    hyper = hyper or TrainHyper()
    torch.manual_seed(hyper.seed)
    ids = class_ids(manifest)
    label_of = {cid: i for i, cid in enumerate(ids)}
    records = select_training(manifest, view_spec)
    gen = torch.Generator().manual_seed(hyper.seed)
    ds = ViewDataset(manifest, records, label_of,
                     flip=hyper.flip, crop_padding=hyper.crop_padding,
                     generator=gen)
    loader = DataLoader(ds, batch_size=hyper.batch_size, shuffle=True,
                        num_workers=hyper.workers, generator=gen)
    model = build_model(len(ids))
    opt = torch.optim.SGD(model.parameters(), lr=hyper.lr,
                          momentum=hyper.momentum,
                          weight_decay=hyper.weight_decay)
    criterion = torch.nn.CrossEntropyLoss()
    log = {"loss": [], "accuracy": [], "lr": []}
    model.train()
    for epoch in range(hyper.epochs):
        lr = cosine_lr(hyper.lr, epoch, hyper.epochs)
        for group in opt.param_groups:
            group["lr"] = lr
        total, hits, n = 0.0, 0, 0
        for x, y in loader:
            opt.zero_grad()
            logits = model(x)
            loss = criterion(logits, y)
            if not torch.isfinite(loss):
                raise DivergedTraining(
                    f"non-finite loss at epoch {epoch}: {loss.item()}")
            loss.backward()
            if hyper.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(),
                                               hyper.grad_clip)
            opt.step()
            total += float(loss.detach()) * len(y)
            hits += int((logits.argmax(dim=1) == y).sum())
            n += len(y)
        log["loss"].append(total / n)
        log["accuracy"].append(hits / n)
        log["lr"].append(lr)
    sample = ds.images[0]
    return {"state_dict": model.state_dict(), "classes": ids,
            "image_size": int(sample.shape[-1]), "hyper": asdict(hyper),
            "log": log, "train_records": len(records)}


def save_checkpoint(checkpoint: dict, path: str):
    torch.save(checkpoint, path)


def load_checkpoint(path: str) -> dict:
    ckpt = torch.load(path, map_location="cpu", weights_only=False)
    for field in ("state_dict", "classes"):
        if field not in ckpt:
            raise ValueError(f"checkpoint missing field {field!r}")
    return ckpt


def training_accuracy(checkpoint: dict) -> float:
    return float(checkpoint["log"]["accuracy"][-1])
