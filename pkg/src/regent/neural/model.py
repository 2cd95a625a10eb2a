"""A cell, its parameters and initial state, persisted as plain JSON."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cells import CellSpec, check_params, logits

FORMAT = "regent-model v1"


@dataclass
class Model:
    spec: CellSpec
    params: dict[str, np.ndarray]
    h0: np.ndarray | None = None
    alphabet: tuple[str, ...] | None = None
    lineage: dict = field(default_factory=dict)

    def __post_init__(self):
        check_params(self.spec, self.params)

    def logits(self, seqs: Sequence[Sequence[int]], batch: int = 512) -> np.ndarray:
        out = [logits(self.spec, self.params, seqs[i:i + batch], self.h0) for i in range(0, len(seqs), batch)]
        return np.concatenate(out) if out else np.zeros(0)

    def predict(self, seqs: Sequence[Sequence[int]], batch: int = 512) -> np.ndarray:
        return self.logits(seqs, batch) > 0

    def copy(self) -> "Model":
        return Model(self.spec, {k: v.copy() for k, v in self.params.items()},
                     None if self.h0 is None else self.h0.copy(), self.alphabet, dict(self.lineage))

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "spec": self.spec.to_dict(),
            "alphabet": list(self.alphabet) if self.alphabet is not None else None,
            "params": {k: v.tolist() for k, v in self.params.items()},
            "h0": None if self.h0 is None else self.h0.tolist(),
            "lineage": self.lineage,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        if d.get("format") != FORMAT:
            raise ValueError(f"not a {FORMAT!r} checkpoint")
        spec = CellSpec.from_dict(d["spec"])
        params = {k: np.asarray(v, dtype=float) for k, v in d["params"].items()}
        h0 = None if d.get("h0") is None else np.asarray(d["h0"], dtype=float)
        alphabet = tuple(d["alphabet"]) if d.get("alphabet") is not None else None
        return cls(spec, params, h0, alphabet, d.get("lineage") or {})


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> Model:
    return Model.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
