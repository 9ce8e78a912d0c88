"""Run configuration: JSON in, validated objects out.

A config file declares the restored-field input, the velocity models
(inline Gaussian mixtures or dataset directories of field binaries), the
inversion scales, the scorer list, the selection mode, and the guidance
hyperparameters.  Relative paths resolve against the config file's
directory; the output root can be overridden with ``TTPO_RUN_ROOT``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .errors import InvalidConfigError
from .fieldio import read_field_binary
from .fields import Field
from .guidance import GuidanceConfig
from .velocity import EmpiricalDatasetField, GaussianMixtureField

RUN_ROOT_ENV = "TTPO_RUN_ROOT"


@dataclass
class ModelDecl:
    id: str
    type: str  # "gmm" | "dataset"
    components: list | None = None  # gmm: [{weight, mean, sigma}]
    atoms_dir: str | None = None  # dataset


@dataclass
class RunConfig:
    input: str
    models: list[ModelDecl]
    scales: list[float]
    steps: int
    scorers: list[str]
    selection_mode: str
    seed: int
    output_dir: str
    guidance: GuidanceConfig
    optimizer_model: str
    base_dir: Path

    raw: dict = dc_field(default_factory=dict, repr=False)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir) -> "RunConfig":
        base_dir = Path(base_dir)
        try:
            models = [ModelDecl(**m) for m in raw["models"]]
            cfg = cls(
                input=raw["input"],
                models=models,
                scales=[float(s) for s in raw["scales"]],
                steps=int(raw.get("steps", 50)),
                scorers=list(raw.get("scorers", [])),
                selection_mode=raw.get("selection_mode", "metric"),
                seed=int(raw.get("seed", 666666)),
                output_dir=raw.get("output_dir", "run"),
                guidance=GuidanceConfig.from_json(raw.get("guidance", {})),
                optimizer_model=raw.get("optimizer_model", models[0].id if models else ""),
                base_dir=base_dir,
                raw=raw,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfigError(f"malformed config: {exc}") from exc
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.selection_mode not in ("metric", "human"):
            raise InvalidConfigError(
                f"selection_mode must be metric or human, got {self.selection_mode!r}"
            )
        if not self.models:
            raise InvalidConfigError("config declares no velocity models")
        ids = [m.id for m in self.models]
        if len(set(ids)) != len(ids):
            raise InvalidConfigError("model ids must be unique")
        if self.optimizer_model not in ids:
            raise InvalidConfigError(f"optimizer_model {self.optimizer_model!r} not declared")
        if not self.scales:
            raise InvalidConfigError("config declares no noise scales")
        for s in self.scales:
            if not 0.1 <= s <= 0.3:
                raise InvalidConfigError(f"scale {s} outside [0.1, 0.3]")
        if self.steps < 1:
            raise InvalidConfigError(f"steps must be >= 1, got {self.steps}")
        if not self._resolve(self.input).exists():
            raise InvalidConfigError(f"input field {self.input!r} not found")
        for m in self.models:
            if m.type == "gmm":
                if not m.components:
                    raise InvalidConfigError(f"model {m.id}: gmm needs components")
                for c in m.components:
                    mean = c.get("mean")
                    if isinstance(mean, str) and not self._resolve(mean).exists():
                        raise InvalidConfigError(f"model {m.id}: mean field {mean!r} not found")
            elif m.type == "dataset":
                if not m.atoms_dir or not self._resolve(m.atoms_dir).is_dir():
                    raise InvalidConfigError(f"model {m.id}: atoms_dir missing or not a directory")
            else:
                raise InvalidConfigError(f"model {m.id}: unknown type {m.type!r}")

    def _resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def run_dir(self) -> Path:
        out = Path(self.output_dir)
        if out.is_absolute():
            return out
        root = os.environ.get(RUN_ROOT_ENV)
        return (Path(root) if root else self.base_dir) / out

    def load_input(self) -> Field:
        return read_field_binary(self._resolve(self.input))

    def build_model(self, decl: ModelDecl):
        if decl.type == "gmm":
            comps = []
            for c in decl.components:
                mean = c["mean"]
                if isinstance(mean, str):
                    mu = read_field_binary(self._resolve(mean))
                elif isinstance(mean, dict) and "constant" in mean:
                    shape = self.load_input().shape
                    mu = Field.constant(*shape, mean["constant"])
                else:
                    raise InvalidConfigError(f"model {decl.id}: bad mean {mean!r}")
                comps.append((float(c["weight"]), mu, float(c["sigma"])))
            return GaussianMixtureField(comps, descriptor=decl.id)
        atoms_dir = self._resolve(decl.atoms_dir)
        paths = sorted(atoms_dir.glob("*.bin"))
        if not paths:
            raise InvalidConfigError(f"model {decl.id}: no *.bin atoms under {atoms_dir}")
        return EmpiricalDatasetField([read_field_binary(p) for p in paths], descriptor=decl.id)

    def build_models(self) -> list:
        return [self.build_model(m) for m in self.models]

    def optimizer(self):
        decl = next(m for m in self.models if m.id == self.optimizer_model)
        return self.build_model(decl)
