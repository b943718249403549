"""Run configuration: one YAML file, validated into :class:`RunConfig`.

Schema (all keys optional)::

    method: potts            # gmm | potts | corrs
    seed: 1
    iterations: 15000
    burnin: 5000
    thin: 10
    chains: 4
    fdr: 0.1
    structure: auto          # auto | graph-file | matrix-file
    graph: edges.txt         # for structure: graph-file
    corr_matrix: corr.csv    # for structure: matrix-file
    graph_method: two-cluster
    out: results
    sampler: {sw_every: 10, dmh_inner_sweeps: 1, center: true, standardize: false}
    hyperparameters: {df: 4, h1: 2, ...}
    design: {name: one_block, n: 100, p: 200, ...}   # simulate
    replicate: 0                                     # simulate
    designs: [{preset: one_block}, {preset: two_blocks, replicates: 5}]   # grid
    methods: [gmm, potts, corrs]                     # grid
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import yaml

from .fitting import METHODS
from .model import Hyperparameters, SamplerConfig
from .sim import SimDesign, preset
from .structure import GRAPH_METHODS

STRUCTURES = ("auto", "graph-file", "matrix-file")


@dataclass
class RunConfig:
    method: str = "potts"
    seed: int = 1
    iterations: int = 15000
    burnin: int = 5000
    thin: int = 10
    chains: int = 4
    fdr: float = 0.1
    structure: str = "auto"
    graph: str | None = None
    corr_matrix: str | None = None
    graph_method: str = "two-cluster"
    out: str = "results"
    sampler: dict = field(default_factory=dict)
    hyperparameters: dict = field(default_factory=dict)
    design: dict = field(default_factory=dict)
    replicate: int = 0
    designs: list = field(default_factory=list)
    methods: list = field(default_factory=lambda: list(METHODS))

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method: must be one of {METHODS}, got {self.method!r}")
        for name in ("iterations", "burnin", "thin", "chains", "seed", "replicate"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError(f"{name}: must be an integer")
        if self.thin < 1:
            raise ValueError("thin: must be >= 1")
        if self.chains < 1:
            raise ValueError("chains: must be >= 1")
        if not 0 <= self.burnin < self.iterations:
            raise ValueError("burnin: must be in [0, iterations)")
        if not 0 < self.fdr < 1:
            raise ValueError("fdr: must be in (0, 1)")
        if self.structure not in STRUCTURES:
            raise ValueError(f"structure: must be one of {STRUCTURES}")
        if self.structure == "graph-file" and not self.graph:
            raise ValueError("graph: required when structure is graph-file")
        if self.structure == "matrix-file" and not self.corr_matrix:
            raise ValueError("corr_matrix: required when structure is matrix-file")
        if self.graph_method not in GRAPH_METHODS:
            raise ValueError(f"graph_method: must be one of {GRAPH_METHODS}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"methods: unknown method(s) {bad}")
        self.sampler_config()
        self.hyper()

    def sampler_config(self):
        try:
            return SamplerConfig(iterations=self.iterations, burnin=self.burnin, thin=self.thin, **self.sampler)
        except TypeError as exc:
            raise ValueError(f"sampler: {exc}") from None

    def hyper(self):
        try:
            return Hyperparameters.from_dict(self.hyperparameters)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"hyperparameters: {exc}") from None

    def sim_design(self):
        return design_from_dict(self.design or {"preset": "one_block"})

    def grid_designs(self):
        return [design_from_dict(d) for d in (self.designs or [{"preset": "one_block"}])]

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)


def design_from_dict(d):
    d = dict(d)
    name = d.pop("preset", None)
    if "replicates" in d and (not isinstance(d["replicates"], int) or d["replicates"] < 1):
        raise ValueError("design.replicates: must be a positive integer")
    try:
        return preset(name, **d) if name else SimDesign.from_dict(d)
    except TypeError as exc:
        raise ValueError(f"design: {exc}") from None


def load_config(path=None, overrides=None):
    d = {}
    if path:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        d.update(loaded)
    for k, v in (overrides or {}).items():
        if v is not None:
            d[k] = v
    return RunConfig.from_dict(d)
