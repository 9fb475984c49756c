"""Flat ``key = value`` experiment configuration files."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .basis import PolySpace
from .forms import PenaltyConfig
from .mesh import SubdomainSpec, build_hierarchy

EXPERIMENTS = ("cond", "model", "hjb")
COLUMNS = ("overlap2", "overlap4", "overlap8", "nonoverlap2", "nonoverlap4", "nonoverlap8")


@dataclass
class ExperimentConfig:
    """All knobs of the three experiment drivers.

    For ``cond`` the degrees ``p`` and ``q`` are the largest fine and coarse
    degrees of the sweep; for ``model`` and ``hjb`` they are the degrees used.
    """

    experiment: str = "cond"
    fine_n: int = 4
    coarse_n: int = 2
    p: int = 12
    q: int = 6
    p_min: int = 2
    q_min: int = 2
    degree_kind: str = "total"
    partition: str = "nonoverlapping"
    delta: float = 0.0
    overlap: str = "width"
    c_mu: float = 10.0
    c_eta: float = 10.0
    penalty_mode: str = "degree-scaled"
    h_measure: str = "diameter"
    eig_method: str = "dense"
    pcg_reduction: float = 1e-6
    gmres_reduction: float = 1e-6
    newton_tol: float = 1e-6
    newton_max_steps: int = 50
    n_theta: int = 17
    n_phi: int = 16
    kappa: float = 1.0
    min_refinement: int = 2
    max_refinement: int = 7
    columns: tuple[str, ...] = COLUMNS
    output: str = "results"

    @classmethod
    def defaults(cls, experiment: str) -> "ExperimentConfig":
        if experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
        if experiment == "cond":
            return cls(experiment="cond")
        return cls(experiment=experiment, p=2, q=2, degree_kind="partial",
                   penalty_mode="constant-degree", h_measure="side",
                   max_refinement=7 if experiment == "model" else 6)

    @property
    def penalty(self) -> PenaltyConfig:
        return PenaltyConfig(self.c_mu, self.c_eta, self.penalty_mode, self.h_measure)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        PolySpace(self.p, self.degree_kind)
        PolySpace(self.q, self.degree_kind)
        self.penalty
        if self.experiment == "cond":
            if self.p_min > self.p or self.q_min > self.q:
                raise ValueError("degree ranges are empty")
            spec = SubdomainSpec(self.partition, self.delta, overlap=self.overlap)
            build_hierarchy(self.fine_n, self.coarse_n, spec)
        for c in self.columns:
            if c not in COLUMNS:
                raise ValueError(f"unknown table column {c!r}; expected a subset of {COLUMNS}")
        if not 0 < self.pcg_reduction < 1 or not 0 < self.gmres_reduction < 1:
            raise ValueError("solver reductions must lie in (0, 1)")
        if self.min_refinement < 1 or self.max_refinement < self.min_refinement:
            raise ValueError("invalid refinement range")
        if self.n_theta < 1 or self.n_phi < 1:
            raise ValueError("control grid sizes must be positive")


def _convert(f: dataclasses.Field, raw: str):
    typ = f.type if isinstance(f.type, str) else f.type.__name__
    if typ.startswith("tuple"):
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if typ == "int":
        return int(raw)
    if typ == "float":
        return float(raw)
    return raw


def parse_config(text: str, experiment: str | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys are rejected."""
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    exp = experiment or pairs.get("experiment", "cond")
    if experiment and pairs.get("experiment", experiment) != experiment:
        raise ValueError(f"config is for experiment {pairs['experiment']!r}, not {experiment!r}")
    cfg = ExperimentConfig.defaults(exp)
    fields = {f.name: f for f in dataclasses.fields(cfg)}
    for key, value in pairs.items():
        if key not in fields:
            raise ValueError(f"unknown configuration key {key!r}")
        try:
            setattr(cfg, key, _convert(fields[key], value))
        except ValueError as exc:
            raise ValueError(f"bad value for {key!r}: {value!r}") from exc
    cfg.validate()
    return cfg


def load_config(path: str | Path, experiment: str | None = None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), experiment)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {','.join(v) if isinstance(v, tuple) else v}")
    return "\n".join(lines) + "\n"
