from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Union

VARIANTS = ("hrbm", "rbm", "mnl", "corrmnl", "cascade-hard", "cascade-soft", "hhrbm")
HIERARCHICAL = ("hrbm", "corrmnl", "cascade-hard", "cascade-soft", "hhrbm")
PENALTY_MODES = ("abs", "raw", "squared")


@dataclass
class TrainConfig:
    variant: str = "hrbm"
    hidden: Union[int, tuple[int, ...]] = 100
    lr: float = 0.1
    C: float = 0.1
    epochs: int = 100
    batch_size: int = 100
    seed: int = 1
    penalty: str = "abs"
    paper_partial_grad: bool = False
    data: Optional[str] = None
    labels: Optional[str] = None
    test_data: Optional[str] = None
    test_labels: Optional[str] = None
    format: Optional[str] = None
    tree: Optional[str] = None
    model_out: Optional[str] = None
    metrics_out: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.hidden, list):
            self.hidden = tuple(self.hidden)
        self.validate()

    def validate(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        widths = self.hidden if isinstance(self.hidden, tuple) else (self.hidden,)
        if not widths or any(int(w) < 1 for w in widths):
            raise ValueError("hidden width must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if not self.C >= 0:
            raise ValueError("C must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.penalty not in PENALTY_MODES:
            raise ValueError(f"unknown penalty mode {self.penalty!r}")

    @property
    def n_hidden(self) -> int:
        """Width of a single-RBM model (first entry of a per-level list)."""
        return int(self.hidden[0]) if isinstance(self.hidden, tuple) else int(self.hidden)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        if isinstance(self.hidden, tuple):
            out["hidden"] = list(self.hidden)
        return out


@dataclass
class EpochRecord:
    epoch: int
    recon_error: Optional[float]
    penalty: float
    train_error: float


@dataclass
class RunMetrics:
    config: dict = field(default_factory=dict)
    epochs: list[EpochRecord] = field(default_factory=list)
    test_error: Optional[float] = None
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "epochs": [dataclasses.asdict(r) for r in self.epochs],
            "test_error": self.test_error,
            "seconds": self.seconds,
        }
