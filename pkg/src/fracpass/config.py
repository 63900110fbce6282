"""Run configuration: nested dataclasses parsed strictly from JSON.

Unknown keys are rejected and every error names the offending field path,
e.g. ``params.q: must lie in (0, 1), got 1.5``.
"""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .grid import GridSpec
from .nonlocal_ops import check_order


@dataclass(frozen=True)
class GridConfig:
    dim: int = 1
    half_width: float = 8.0
    points: int = 512

    def __post_init__(self):
        GridSpec(self.dim, self.half_width, self.points)

    def spec(self) -> GridSpec:
        return GridSpec(self.dim, float(self.half_width), self.points)


@dataclass(frozen=True)
class ParamsConfig:
    s: float = 0.25
    q: float = 0.5
    eps: float = 0.01

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ConfigurationError(f"s: must lie in (0, 1), got {self.s}")
        if not 0 < self.q < 1:
            raise ConfigurationError(f"q: must lie in (0, 1), got {self.q}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps: must be positive, got {self.eps}")


@dataclass(frozen=True)
class HConfig:
    family: str = "gaussian_bump"
    amplitude: float = 1.0
    center: list | None = None
    width: float = 1.0
    neg_ratio: float = 0.5
    offset: float = 3.0

    def __post_init__(self):
        if self.family not in ("gaussian_bump", "compact_bump", "signed_pair"):
            raise ConfigurationError(f"family: unknown h family {self.family!r}")
        if not self.width > 0 or not self.amplitude > 0:
            raise ConfigurationError("width: width and amplitude must be positive")
        if self.family == "signed_pair" and not 0 <= self.neg_ratio < 1:
            raise ConfigurationError("neg_ratio: must lie in [0, 1)")


@dataclass(frozen=True)
class BubbleConfig:
    mu: float = 0.05
    xi: list | None = None
    c_ns: float | None = None
    expansion_mus: list = field(default_factory=lambda: [0.125, 0.25, 0.5])
    expansion_cutoff: float | None = None
    extrapolate: bool = True

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigurationError(f"mu: must be positive, got {self.mu}")
        if self.c_ns is not None and not self.c_ns > 0:
            raise ConfigurationError("c_ns: must be positive")
        if len(self.expansion_mus) < 2 or min(self.expansion_mus) <= 0:
            raise ConfigurationError("expansion_mus: needs at least two positive values")


@dataclass(frozen=True)
class CutoffConfig:
    r: float | None = None
    x0: list | None = None

    def __post_init__(self):
        if self.r is not None and not self.r > 0:
            raise ConfigurationError(f"r: cutoff radius must be positive, got {self.r}")


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 2000
    grad_tol: float = 1e-5
    rel_tol: float = 1e-6
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    seed: int = 0
    path_nodes: int = 64
    nonneg_slack: float = 1e-8
    S_hat: float | None = None

    def __post_init__(self):
        self.options()

    def options(self):
        from .solvers import SolveOptions

        kw = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "S_hat"}
        return SolveOptions(**kw)


@dataclass(frozen=True)
class VerifyConfig:
    ab_samples: int = 100_000
    p_samples: list = field(default_factory=lambda: [1.5, 2.0, 3.0, 4.0, 8.0])
    k_samples: list = field(default_factory=lambda: [0.5, 1.0, 4.0])
    q_samples: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    cutoff_radii: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    seed: int = 0

    def __post_init__(self):
        if self.ab_samples < 1:
            raise ConfigurationError("ab_samples: must be positive")
        if not self.p_samples or min(self.p_samples) <= 1:
            raise ConfigurationError("p_samples: values must be > 1")


@dataclass(frozen=True)
class AppendixConfig:
    R_list: list = field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0])
    cases: list = field(default_factory=lambda: [[2, 0.75], [2, 0.6], [1, 0.25]])
    resolution: int = 64
    tolerance: float = 0.02

    def __post_init__(self):
        if len(self.R_list) < 3:
            raise ConfigurationError(f"R_list: needs at least three values, got {len(self.R_list)}")
        if not 8 <= self.resolution <= 64:
            raise ConfigurationError("resolution: must lie in [8, 64]")
        for case in self.cases:
            if len(case) != 2:
                raise ConfigurationError(f"cases: each case must be [N, s], got {case}")


@dataclass(frozen=True)
class ConcentrationConfig:
    n_max: int = 4
    delta: float = 0.1
    ball_radius: float = 0.5

    def __post_init__(self):
        if self.n_max < 1 or not self.delta > 0 or not self.ball_radius > 0:
            raise ConfigurationError("n_max: n_max >= 1, delta > 0 and ball_radius > 0 required")


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig
    params: ParamsConfig
    h: HConfig = field(default_factory=HConfig)
    bubble: BubbleConfig = field(default_factory=BubbleConfig)
    cutoff: CutoffConfig = field(default_factory=CutoffConfig)
    solve: SolveConfig = field(default_factory=SolveConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    appendix: AppendixConfig = field(default_factory=AppendixConfig)
    concentration: ConcentrationConfig = field(default_factory=ConcentrationConfig)

    def __post_init__(self):
        try:
            check_order(self.grid.dim, self.params.s)
        except ValueError as exc:
            raise ConfigurationError(f"params.s: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


_REQUIRED = ("grid", "params")


def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if origin is typing.Union or (origin is not None and type(None) in args):
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{path}: expected a boolean")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{path}: expected a string")
        return value
    if tp is list or origin is list:
        if not isinstance(value, list):
            raise ConfigurationError(f"{path}: expected a list")
        return value
    return value


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path or 'config'}: expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigurationError(f"{path or 'config'}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name in names & set(data):
        kwargs[name] = _coerce(data[name], hints[name], f"{path}.{name}" if path else name)
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        msg = str(exc)
        head = msg.split(":", 1)[0]
        if path and head in names:
            msg = f"{path}.{msg}"
        elif path and not msg.startswith(path):
            msg = f"{path}: {msg}"
        raise ConfigurationError(msg) from None
    except TypeError as exc:
        raise ConfigurationError(f"{path or 'config'}: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config: expected a JSON object")
    for key in _REQUIRED:
        if key not in data:
            raise ConfigurationError(f"{key}: required block missing")
    return _build(RunConfig, data, "")


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
