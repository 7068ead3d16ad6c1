"""Run configuration: JSON file -> validated RunConfig."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import sets2d
from .core import CoreParams
from .dims import DEFAULT_DELTA_WINDOW
from .errors import PreconditionError
from .hartogs import DEFAULT_H, DEFAULT_SHARPNESS, HartogsDomain, ball_domain

BUILTINS = ("ball",)


def _pow2(x: float) -> bool:
    if x <= 0:
        return False
    m, _ = math.frexp(x)
    return m == 0.5


@dataclass
class DomainSpec:
    kind: str = "hartogs"
    K: dict | None = None
    name: str | None = None
    h: float = DEFAULT_H
    sharpness: float = DEFAULT_SHARPNESS

    def build(self) -> HartogsDomain:
        if self.kind == "builtin":
            if self.name == "ball":
                return ball_domain()
            raise PreconditionError(f"unknown builtin domain {self.name!r}; known: {BUILTINS}")
        return HartogsDomain.from_set(sets2d.from_dict(self.K), self.h, self.sharpness, name=self.name or "hartogs")

    def K_set(self):
        return None if self.K is None else sets2d.from_dict(self.K)


@dataclass
class RunConfig:
    domain: DomainSpec
    n_z: int = 256
    n_theta: int = 4
    k_samples: int = 0
    eps_rel: float = 1e-6
    intersect_tol: float = 1e-8
    tau: float = 0.2
    scale_window: tuple = (2, 7)
    max_iter: int = 8
    seed: int = 0
    output_dir: str = "levicore_out"
    delta_window: tuple = DEFAULT_DELTA_WINDOW
    witness: dict = field(default_factory=dict)
    source: str | None = None

    def core_params(self) -> CoreParams:
        return CoreParams(self.n_z, self.n_theta, self.k_samples, self.seed, self.eps_rel, self.intersect_tol,
                          self.tau, tuple(self.scale_window), self.max_iter)

    def validate(self):
        for name in ("eps_rel", "intersect_tol", "tau"):
            if not getattr(self, name) > 0:
                raise PreconditionError(f"tolerance {name} must be positive")
        for name in ("n_z", "n_theta"):
            if not _pow2(getattr(self, name)):
                raise PreconditionError(f"{name} = {getattr(self, name)} is not a power of two")
        if self.domain.kind == "hartogs":
            if self.domain.K is None:
                raise PreconditionError("hartogs domain needs a K description")
            if not _pow2(self.domain.h):
                raise PreconditionError(f"h = {self.domain.h} is not a power of two")
        elif self.domain.kind != "builtin":
            raise PreconditionError(f"domain kind must be 'hartogs' or 'builtin', got {self.domain.kind!r}")
        lo, hi = self.scale_window
        if not 0 <= lo < hi:
            raise PreconditionError("scale_window must be (lo, hi) with 0 <= lo < hi")
        if self.max_iter < 1:
            raise PreconditionError("max_iter must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise PreconditionError("seed must be an unsigned 64-bit integer")
        return self

    def to_dict(self) -> dict:
        """Nested layout accepted by :func:`from_dict`."""
        dom = {k: v for k, v in asdict(self.domain).items() if v is not None}
        return {
            "domain": dom,
            "sampling": {"n_z": self.n_z, "n_theta": self.n_theta, "k_samples": self.k_samples},
            "tolerances": {"eps_rel": self.eps_rel, "intersect_tol": self.intersect_tol, "tau": self.tau,
                           "scale_window": list(self.scale_window)},
            "delta_window": list(self.delta_window),
            "max_iter": self.max_iter,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "witness": dict(self.witness),
        }


def from_dict(d: dict) -> RunConfig:
    d = dict(d)
    dom = d.pop("domain", None)
    if not isinstance(dom, dict):
        raise PreconditionError("config needs a 'domain' object")
    known = {"kind", "K", "name", "h", "sharpness"}
    if set(dom) - known:
        raise PreconditionError(f"unknown domain keys {sorted(set(dom) - known)}")
    spec = DomainSpec(**dom)
    samp = d.pop("sampling", {}) or {}
    tol = d.pop("tolerances", {}) or {}
    kw = {}
    for k in ("n_z", "n_theta", "k_samples"):
        if k in samp:
            kw[k] = int(samp[k])
    for k in ("eps_rel", "intersect_tol", "tau"):
        if k in tol:
            kw[k] = float(tol[k])
    if "scale_window" in tol:
        kw["scale_window"] = tuple(int(v) for v in tol["scale_window"])
    if "delta_window" in d:
        kw["delta_window"] = tuple(int(v) for v in d.pop("delta_window"))
    for k in ("max_iter", "seed"):
        if k in d:
            kw[k] = int(d.pop(k))
    if "output_dir" in d:
        kw["output_dir"] = str(d.pop("output_dir"))
    if "witness" in d:
        kw["witness"] = dict(d.pop("witness"))
    if d:
        raise PreconditionError(f"unknown config keys {sorted(d)}")
    return RunConfig(spec, **kw).validate()


def load(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise PreconditionError(f"cannot read config {path}: {exc}") from exc
    cfg = from_dict(raw)
    cfg.source = str(path)
    return cfg
