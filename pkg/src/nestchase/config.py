"""Episode configuration: JSON schema, validation and stream construction.

A config is a JSON object::

    {
      "dim": 2,
      "norm": 2,                     # p >= 1, or "inf"
      "chaser": {"kind": "steiner", "params": {"n_dirs": 20000}},
      "adversary": {"kind": "random_nested", "params": {"T": 50, "cut_fraction": 0.2}},
      "x0": "steiner-of-first",      # or "origin", or a list of dim floats
      "seeds": {"chaser": 1, "adversary": 2},
      "diagnostics": {"n_dirs": 4000, "hausdorff_dirs": 2000},
      "tolerances": {"feasibility": 1e-6, "ratio": 1e-6},
      "output": {"dir": "out"}
    }

``product_slab`` takes ``{"eps": 0.01, "base": {"kind": ..., "params": ...}}``
and lives one dimension above its base.  ``replay`` takes ``{"path": ...}``.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .adversary import (
    CapCutting,
    Hadamard,
    HypercubeFaces,
    ProductSlab,
    RandomNested,
    ReplayStream,
    ShrinkingBalls,
)
from .chaser import CHASER_KINDS
from .geom import NormSpec

ADVERSARY_KINDS = ("hypercube_faces", "hadamard", "cap_cutting", "product_slab",
                   "random_nested", "shrinking_balls", "replay")

_ADV_PARAMS = {
    "hypercube_faces": set(),
    "hadamard": {"tol"},
    "cap_cutting": {"spacing", "T", "level"},
    "product_slab": {"eps", "base"},
    "random_nested": {"T", "cut_fraction", "cloud_size", "min_width"},
    "shrinking_balls": {"T", "ratio"},
    "replay": {"path"},
}

_CHASER_PARAMS = {
    "steiner": {"n_dirs", "tol"},
    "lazy_steiner": {"n_dirs", "tol", "member_tol"},
    "toward_steiner": {"n_dirs", "tol", "member_tol"},
    "greedy_projection": {"tol"},
    "normed_space": {"alpha", "r", "sampler", "sub_n_dirs", "max_cuts_per_request", "tol",
                     "tightening", "trigger_dirs"},
}

DEFAULT_DIAGNOSTICS = {"n_dirs": 4000, "hausdorff_dirs": 2000, "budget_dirs": 4000}
DEFAULT_TOLERANCES = {"feasibility": 1e-6, "ratio": 1e-6, "sigma": 3.0}


class ConfigError(ValueError):
    """Malformed configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class EpisodeConfig:
    dim: int
    norm: NormSpec
    chaser: dict
    adversary: dict
    seeds: tuple
    x0: object = "steiner-of-first"
    diagnostics: dict = field(default_factory=lambda: dict(DEFAULT_DIAGNOSTICS))
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output: dict = field(default_factory=dict)

    @property
    def chaser_seed(self):
        return self.seeds[0]

    @property
    def adversary_seed(self):
        return self.seeds[1]

    def key(self):
        """Sort key used to order sweep results."""
        return (self.adversary["kind"], self.dim, str(self.norm.to_json()),
                self.chaser["kind"], self.seeds)

    def to_dict(self):
        x0 = self.x0 if isinstance(self.x0, str) else [float(v) for v in self.x0]
        return {
            "dim": self.dim,
            "norm": self.norm.to_json(),
            "chaser": copy.deepcopy(self.chaser),
            "adversary": copy.deepcopy(self.adversary),
            "x0": x0,
            "seeds": {"chaser": self.seeds[0], "adversary": self.seeds[1]},
            "diagnostics": dict(self.diagnostics),
            "tolerances": dict(self.tolerances),
            "output": dict(self.output),
        }

    @classmethod
    def from_dict(cls, data):
        return parse_config(data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError([f"invalid JSON: {exc}"]) from None
        return parse_config(data)


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def _check_adversary(spec, dim, errors, where="adversary"):
    if not isinstance(spec, dict) or "kind" not in spec:
        errors.append(f"{where}: expected an object with a 'kind' field")
        return
    kind = spec["kind"]
    if kind not in ADVERSARY_KINDS:
        errors.append(f"{where}.kind: unknown adversary {kind!r}; expected one of {ADVERSARY_KINDS}")
        return
    params = spec.get("params", {})
    if not isinstance(params, dict):
        errors.append(f"{where}.params: expected an object")
        return
    extra = set(params) - _ADV_PARAMS[kind]
    if extra:
        errors.append(f"{where}.params: unknown keys {sorted(extra)} for {kind}")
    if kind == "hadamard" and _is_int(dim) and (dim < 1 or dim & (dim - 1)):
        errors.append(f"{where}: hadamard needs dim a power of two, got {dim}")
    if kind == "cap_cutting":
        sp = params.get("spacing", 0.05)
        if not _is_num(sp) or not 0 < sp < 1:
            errors.append(f"{where}.params.spacing: must lie in (0, 1)")
    if kind == "product_slab":
        eps = params.get("eps")
        if not _is_num(eps) or not 0 < eps < 0.5:
            errors.append(f"{where}.params.eps: must lie in (0, 1/2)")
        if "base" not in params:
            errors.append(f"{where}.params.base: required")
        else:
            _check_adversary(params["base"], dim - 1 if _is_int(dim) else dim, errors,
                             where + ".params.base")
    if kind == "random_nested":
        f = params.get("cut_fraction", 0.2)
        if not _is_num(f) or not 0 < f < 1:
            errors.append(f"{where}.params.cut_fraction: must lie in (0, 1)")
    if kind == "shrinking_balls":
        ratio = params.get("ratio", 0.5)
        if not _is_num(ratio) or not 0 < ratio < 1:
            errors.append(f"{where}.params.ratio: must lie in (0, 1)")
    for name in ("T", "cloud_size"):
        if name in params and (not _is_int(params[name]) or params[name] < 1):
            errors.append(f"{where}.params.{name}: must be a positive integer")
    if kind == "replay" and not isinstance(params.get("path"), str):
        errors.append(f"{where}.params.path: required string")


def parse_config(data):
    """Validate a config mapping; raises :class:`ConfigError` listing all problems."""
    errors = []
    if not isinstance(data, dict):
        raise ConfigError(["config must be a JSON object"])
    known = {"dim", "norm", "chaser", "adversary", "x0", "seeds", "diagnostics",
             "tolerances", "output", "sweep"}
    extra = set(data) - known
    if extra:
        errors.append(f"unknown top-level keys {sorted(extra)}")
    dim = data.get("dim")
    if not _is_int(dim) or dim < 1:
        errors.append("dim: required positive integer")
    norm = None
    try:
        norm = NormSpec(data.get("norm", 2))
    except (ValueError, TypeError) as exc:
        errors.append(f"norm: {exc}")
    chaser = data.get("chaser")
    if not isinstance(chaser, dict) or chaser.get("kind") not in CHASER_KINDS:
        errors.append(f"chaser.kind: required, one of {CHASER_KINDS}")
    else:
        params = chaser.get("params", {})
        if not isinstance(params, dict):
            errors.append("chaser.params: expected an object")
        else:
            bad = set(params) - _CHASER_PARAMS[chaser["kind"]]
            if bad:
                errors.append(f"chaser.params: unknown keys {sorted(bad)} for {chaser['kind']}")
    adversary = data.get("adversary")
    _check_adversary(adversary, dim, errors)
    seeds = data.get("seeds")
    if isinstance(seeds, dict):
        seeds = (seeds.get("chaser"), seeds.get("adversary"))
    elif isinstance(seeds, (list, tuple)) and len(seeds) == 2:
        seeds = tuple(seeds)
    else:
        seeds = None
    if seeds is None or not all(_is_int(s) and s >= 0 for s in seeds):
        errors.append("seeds: required {'chaser': int, 'adversary': int} with nonnegative values")
        seeds = None
    x0 = data.get("x0", "steiner-of-first")
    if isinstance(x0, str):
        if x0 not in ("steiner-of-first", "origin"):
            errors.append("x0: expected 'steiner-of-first', 'origin' or a vector")
    elif isinstance(x0, (list, tuple)):
        if not all(_is_num(v) for v in x0):
            errors.append("x0: vector entries must be numbers")
        elif _is_int(dim) and len(x0) != dim:
            errors.append(f"x0: length {len(x0)} does not match dim {dim}")
        x0 = [float(v) for v in x0] if all(_is_num(v) for v in x0) else x0
    else:
        errors.append("x0: expected 'steiner-of-first', 'origin' or a vector")
    diagnostics = dict(DEFAULT_DIAGNOSTICS)
    diagnostics.update(data.get("diagnostics", {}) or {})
    for k, v in diagnostics.items():
        if k not in DEFAULT_DIAGNOSTICS:
            errors.append(f"diagnostics: unknown key {k!r}")
        elif not _is_int(v) or v < 2:
            errors.append(f"diagnostics.{k}: must be an integer >= 2")
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(data.get("tolerances", {}) or {})
    for k, v in tolerances.items():
        if k not in DEFAULT_TOLERANCES:
            errors.append(f"tolerances: unknown key {k!r}")
        elif not _is_num(v) or v < 0:
            errors.append(f"tolerances.{k}: must be a nonnegative number")
    output = data.get("output", {}) or {}
    if not isinstance(output, dict):
        errors.append("output: expected an object")
        output = {}
    if errors:
        raise ConfigError(errors)
    return EpisodeConfig(int(dim), norm, copy.deepcopy(chaser), copy.deepcopy(adversary),
                         (int(seeds[0]), int(seeds[1])), x0, diagnostics,
                         {k: float(v) for k, v in tolerances.items()}, dict(output))


def build_stream(spec, dim, rng):
    """Instantiate a request stream from an adversary spec."""
    kind = spec["kind"]
    p = spec.get("params", {})
    if kind == "hypercube_faces":
        return HypercubeFaces(dim)
    if kind == "hadamard":
        return Hadamard(dim, p.get("tol", 1e-6))
    if kind == "cap_cutting":
        return CapCutting(dim, p.get("spacing", 0.05), p.get("T"), rng, p.get("level", 0.9))
    if kind == "product_slab":
        return ProductSlab(build_stream(p["base"], dim - 1, rng), p["eps"])
    if kind == "random_nested":
        return RandomNested(dim, p.get("T", 50), p.get("cut_fraction", 0.2), rng,
                            p.get("cloud_size", 256), p.get("min_width", 1e-6))
    if kind == "shrinking_balls":
        return ShrinkingBalls(dim, p.get("T", 10), p.get("ratio", 0.5))
    if kind == "replay":
        stream = ReplayStream.load(p["path"])
        if stream.dim != dim:
            raise ConfigError([f"replay: file has dim {stream.dim}, config says {dim}"])
        return stream
    raise ConfigError([f"unknown adversary {kind!r}"])
