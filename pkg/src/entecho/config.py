"""Experiment configuration: TOML schema, validation and protocol construction.

Unknown keys anywhere are errors. A mass block (``[pre]`` / ``[post]``) takes
exactly one of

* ``mass = 1.5`` (uniform),
* ``profile = [...]`` (one value per site),
* ``segments = [{length = 50, mass = 1.5}, ...]`` (consecutive blocks),
* ``random = {low = 1.2, high = 1.8}`` (i.i.d. uniform per site).

Random profiles draw from numpy's PCG64 bit generator seeded with
``run.seed`` (or ``--seed``); value ``i`` is ``low + (high - low) * u_i`` with
``u_i = (next_uint64() >> 11) * 2**-53``. The ``[pre]`` block draws first, then
``[post]``, from one stream.
"""
import sys
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .correlation import QuenchProtocol
from .exceptions import ConfigInvalid
from .models import ModelSpec
from .transitions import DetectorSettings

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["Config", "load_config", "parse_config", "random_profile"]

U64_MAX = 2**64 - 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Segment(_Strict):
    length: int = Field(ge=1)
    mass: float


class RandomRange(_Strict):
    low: float
    high: float

    @model_validator(mode="after")
    def _ordered(self):
        if not self.low <= self.high:
            raise ValueError("low must not exceed high")
        return self


class MassBlock(_Strict):
    mass: Optional[float] = None
    profile: Optional[List[float]] = None
    segments: Optional[List[Segment]] = None
    random: Optional[RandomRange] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        given = [k for k in ("mass", "profile", "segments", "random") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"give exactly one of mass, profile, segments, random (got {given or 'none'})")
        return self

    @property
    def uniform(self):
        return self.mass is not None

    def masses(self, L, rng):
        if self.profile is not None:
            out = list(self.profile)
        elif self.segments is not None:
            out = [s.mass for s in self.segments for _ in range(s.length)]
        else:
            out = random_profile(rng, L, self.random.low, self.random.high).tolist()
        if len(out) != L:
            raise ConfigInvalid({"profile": f"profile has {len(out)} sites, model.L = {L}"})
        return out


class ModelSection(_Strict):
    kind: Literal["chain1d", "chern2d"]
    L: int = Field(ge=2)
    Ly: Optional[int] = Field(default=None, ge=2)


class Subsystem(_Strict):
    start: int = Field(default=0, ge=0)
    length: int = Field(ge=1)
    label: str = ""


class TimeSection(_Strict):
    max: float = Field(default=30.0, gt=0)
    steps: int = Field(default=600, ge=3)


class PhysicsSection(_Strict):
    temperature: float = Field(default=0.0, ge=0)
    gauge: Literal["auto", "A", "B"] = "auto"
    pathway: Literal["auto", "ti", "partial-pre", "partial-post", "general"] = "auto"
    loschmidt: bool = True


class DetectorSection(_Strict):
    enabled: bool = True
    delta_jump: float = Field(default=0.01, gt=0)
    delta_slope: float = Field(default=0.5, gt=0)
    time_tol: float = Field(default=1e-4, gt=0)
    depth: int = Field(default=12, ge=1)
    xi_tol: float = Field(default=1e-3, gt=0)
    eps_deg: float = Field(default=1e-9, gt=0)

    def settings(self):
        return DetectorSettings(**self.model_dump(exclude={"enabled"}))


class OutputSection(_Strict):
    dir: str = "out"
    spectrum: bool = True


class RunSection(_Strict):
    threads: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0, le=U64_MAX)


class OracleSection(_Strict):
    times: int = Field(default=50, ge=1)
    t_max: float = Field(default=8.0, gt=0)
    tolerance: float = Field(default=1e-6, gt=0)


class Config(_Strict):
    model: ModelSection
    pre: MassBlock
    post: MassBlock
    subsystem: Union[Subsystem, List[Subsystem]]
    time: TimeSection = TimeSection()
    physics: PhysicsSection = PhysicsSection()
    detector: DetectorSection = DetectorSection()
    output: OutputSection = OutputSection()
    run: RunSection = RunSection()
    oracle: OracleSection = OracleSection()

    @model_validator(mode="after")
    def _consistent(self):
        if self.model.kind == "chern2d":
            if not (self.pre.uniform and self.post.uniform):
                raise ValueError("chern2d models take a uniform mass only")
            if self.physics.pathway != "auto":
                raise ValueError("chern2d always uses the momentum-resolved route; leave pathway = auto")
        elif self.model.Ly is not None:
            raise ValueError("Ly is only valid for chern2d")
        for sub in self.subsystems:
            if sub.length >= self.model.L or sub.start >= self.model.L:
                raise ValueError(f"subsystem {sub.label or ''}[{sub.start}, +{sub.length}) does not fit L = {self.model.L}")
        return self

    @property
    def subsystems(self):
        subs = self.subsystem if isinstance(self.subsystem, list) else [self.subsystem]
        return [s if s.label else s.model_copy(update={"label": f"S{i}"}) for i, s in enumerate(subs)] if len(subs) > 1 else subs

    def times(self):
        return np.linspace(0.0, self.time.max, self.time.steps + 1)

    def model_specs(self, seed=None):
        """Pre- and post-quench :class:`ModelSpec` (random profiles drawn here)."""
        rng = np.random.Generator(np.random.PCG64(self.run.seed if seed is None else seed))
        L = self.model.L
        specs = []
        for block in (self.pre, self.post):
            if self.model.kind == "chern2d":
                specs.append(ModelSpec.chern(block.mass, L, self.model.Ly))
            elif block.uniform:
                specs.append(ModelSpec.chain(block.mass, L))
            else:
                specs.append(ModelSpec.profile(block.masses(L, rng)))
        return tuple(specs)

    def protocols(self, seed=None):
        """``[(label, QuenchProtocol)]`` for every configured subsystem."""
        pre, post = self.model_specs(seed)
        gauge = None if self.physics.gauge == "auto" else self.physics.gauge
        return [
            (s.label, QuenchProtocol(pre, post, self.physics.temperature, (s.start, s.length), gauge))
            for s in self.subsystems
        ]


def random_profile(rng, L, low, high):
    """``L`` i.i.d. uniform masses in ``[low, high)`` from ``rng``."""
    return low + (high - low) * rng.random(L)


def _errors(exc):
    out = {}
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "config"
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = "unknown key"
        out[loc] = msg
    return out


def parse_config(data):
    """Validate a mapping (e.g. parsed TOML); raises ``ConfigInvalid``."""
    try:
        return Config.model_validate(data)
    except ValidationError as exc:
        raise ConfigInvalid(_errors(exc)) from None


def load_config(path):
    """Read and validate a TOML experiment file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigInvalid({"config": f"cannot read {path}: {exc.strerror}"}) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid({"config": f"TOML syntax: {exc}"}) from None
    return parse_config(data)
