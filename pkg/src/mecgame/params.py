"""System parameters and the flat ``key = value`` config format."""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .stats import DelayParams

SCORING_MODES = ("literal", "virtual")


class ConfigError(ValueError):
    """Raised for unreadable, incomplete or invalid configuration."""


@dataclass(frozen=True)
class SystemParams:
    """Every scalar of the model plus the game hyper-parameters.

    Time quantities (``mu``, ``sigma``, ``t_upper``, ``deadline``, ``a``,
    ``b``) must share one unit.  ``t_upper`` defaults to ``deadline``.
    ``e_p`` is the per-job price; when unset the planner's derived price is
    used.  ``c_th_override`` pins the game cut-off instead of deriving it.
    """

    M: int
    K_T: float
    R_th: float
    e_f: float
    e_j: float
    mu: float
    sigma: float
    nu: float
    a: float
    b: float
    beta: float
    deadline: float
    t_upper: float | None = None
    e_p: float | None = None
    S: int = 2
    memory: int = 5
    rounds: int = 10000
    runs: int = 32
    seed: int = 0
    scoring_mode: str = "virtual"
    clamp_t0_nonneg: bool = False
    c_th_override: int | None = None
    tail_fraction: float = 0.5
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        problems = []
        if self.M < 2:
            problems.append(f"M must be >= 2, got {self.M}")
        if not self.K_T >= 1:
            problems.append(f"K_T must be >= 1, got {self.K_T}")
        if self.rounds < 1:
            problems.append(f"rounds must be >= 1, got {self.rounds}")
        if self.runs < 1:
            problems.append(f"runs must be >= 1, got {self.runs}")
        if not 0.0 < self.beta < 0.5:
            problems.append(f"beta must lie in (0, 0.5), got {self.beta}")
        if not self.sigma > 0:
            problems.append(f"sigma must be > 0, got {self.sigma}")
        if not self.nu > 0:
            problems.append(f"nu must be > 0, got {self.nu}")
        if not self.deadline > 0:
            problems.append(f"deadline must be > 0, got {self.deadline}")
        if self.S < 1:
            problems.append(f"S must be >= 1, got {self.S}")
        if not 1 <= self.memory <= 16:
            problems.append(f"memory must lie in [1, 16], got {self.memory}")
        if self.scoring_mode not in SCORING_MODES:
            problems.append(f"scoring_mode must be one of {SCORING_MODES}")
        if not 0.0 < self.tail_fraction <= 1.0:
            problems.append(f"tail_fraction must lie in (0, 1], got {self.tail_fraction}")
        if self.c_th_override is not None and not 0 <= self.c_th_override <= self.M:
            problems.append(f"c_th_override must lie in [0, M], got {self.c_th_override}")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def truncation_upper(self) -> float:
        return self.deadline if self.t_upper is None else self.t_upper

    @property
    def delay(self) -> DelayParams:
        return DelayParams(
            mu=self.mu,
            sigma=self.sigma,
            t_upper=self.truncation_upper,
            nu=self.nu,
            a=self.a,
            b=self.b,
        )

    def replace(self, **changes: Any) -> SystemParams:
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(SystemParams) if f.name != "name"}
REQUIRED_FIELDS = tuple(
    name
    for name, f in _FIELDS.items()
    if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
)
_OPTIONAL_NUMERIC = {"t_upper": float, "e_p": float, "c_th_override": int}
_TYPES = {
    "M": int, "S": int, "memory": int, "rounds": int, "runs": int, "seed": int,
    "scoring_mode": str, "clamp_t0_nonneg": bool,
}


def _coerce(key: str, raw: Any) -> Any:
    if key in _OPTIONAL_NUMERIC:
        if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")):
            return None
        kind = _OPTIONAL_NUMERIC[key]
    else:
        kind = _TYPES.get(key, float)
    try:
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        if kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {key!r}: {raw!r}") from None


def parse_config_text(text: str, name: str = "") -> dict[str, Any]:
    """Parse ``key = value`` lines (``#`` comments) into a raw field dict."""
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None, delimiters=("=",)
    )
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string("[params]\n" + text, source=name or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {name or ''}: {exc}") from None
    raw = dict(parser["params"])
    unknown = sorted(set(raw) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
    return raw


def build_params(raw: dict[str, Any], name: str = "") -> SystemParams:
    """Build validated params; names every missing required field."""
    values = {k: v for k, v in raw.items() if v is not None or k in _OPTIONAL_NUMERIC}
    missing = [k for k in REQUIRED_FIELDS if k not in values]
    if missing:
        raise ConfigError(f"missing required config field(s): {', '.join(missing)}")
    kwargs = {k: _coerce(k, v) for k, v in values.items()}
    return SystemParams(name=name, **kwargs)


def bundled_config_path(name: str) -> Path:
    return Path(str(resources.files("mecgame") / "configs" / f"{name}.cfg"))


def resolve_config_path(spec: str | Path) -> Path:
    """Accept a file path or the stem of a bundled config (e.g. ``paper_sec4``)."""
    path = Path(spec)
    if path.is_file():
        return path
    bundled = bundled_config_path(str(spec))
    if bundled.is_file():
        return bundled
    raise ConfigError(f"config not found: {spec}")


def load_config(spec: str | Path, overrides: dict[str, Any] | None = None) -> SystemParams:
    path = resolve_config_path(spec)
    raw = parse_config_text(path.read_text(encoding="utf-8"), name=str(path))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_params(raw, name=path.stem)
