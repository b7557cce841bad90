"""Run configuration: flat ``key = value`` files plus command-line overrides.

Recognized keys are the :class:`RunConfig` fields (``plots`` is accepted for
``emit_plots``) and per-model hyperparameters written ``<model>.<param>``,
for example ``rfr.n_trees = 100``. Values are parsed as JSON when possible
(numbers, true/false, null, lists) and kept as text otherwise; ``models``
and ``exclude`` take comma-separated model keys. Unknown keys are errors.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path

from .errors import ConfigError
from .multivariate import DEFAULTS as MV_DEFAULTS
from .univariate import PARAM_KEYS as UNI_KEYS

_ALIASES = {"plots": "emit_plots"}


def bundled_snapshot() -> Path:
    return Path(str(files("emforecast") / "data" / "snapshot.csv"))


@dataclass
class RunConfig:
    data: str = ""
    seed: int = 42
    test_len: int = 10
    lags: int = 3
    horizon: int = 10
    max_diff_order: int = 2
    models: tuple[str, ...] = ()
    exclude: tuple[str, ...] = ()
    overrides: dict = field(default_factory=dict)
    out: str = "out"
    emit_plots: bool = False
    replications: int = 100_000

    def __post_init__(self):
        if not self.data:
            self.data = str(bundled_snapshot())
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for name in ("test_len", "lags", "horizon", "replications"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_diff_order not in (0, 1, 2):
            raise ConfigError("max_diff_order must be 0, 1 or 2")
        for model, params in self.overrides.items():
            _check_override(model, params)

    def with_updates(self, **updates) -> "RunConfig":
        updates = {k: v for k, v in updates.items() if v is not None}
        return dataclasses.replace(self, **updates)


def _check_override(model: str, params: dict) -> None:
    if model in MV_DEFAULTS:
        allowed = MV_DEFAULTS[model]
    elif model in UNI_KEYS:
        allowed = UNI_KEYS[model]
    else:
        raise ConfigError(f"hyperparameters given for unknown model {model!r}")
    bad = sorted(set(params) - set(allowed))
    if bad:
        raise ConfigError(f"unknown hyperparameter(s) for {model}: {', '.join(bad)}")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _as_list(value) -> tuple[str, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(str(v).strip() for v in value if str(v).strip())
    return tuple(p.strip() for p in str(value).split(",") if p.strip())


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse config text into RunConfig keyword arguments."""
    names = {f.name for f in dataclasses.fields(RunConfig)} - {"overrides"}
    kwargs: dict = {}
    overrides: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if "." in key:
            model, param = key.split(".", 1)
            overrides.setdefault(model, {})[param] = _parse_value(value)
            try:
                _check_override(model, {param: None})
            except ConfigError as exc:
                raise ConfigError(f"{source}:{lineno}: {exc}") from None
        elif key in names:
            kwargs[key] = _as_list(value) if key in ("models", "exclude") else _parse_value(value)
        else:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
    if overrides:
        kwargs["overrides"] = overrides
    if "emit_plots" in kwargs and not isinstance(kwargs["emit_plots"], bool):
        raise ConfigError(f"{source}: plots must be true or false")
    return kwargs


def load_config(path: str | Path | None = None, **cli) -> RunConfig:
    """File values first, then any non-None command-line values on top."""
    kwargs = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        kwargs = parse_config(text, str(p))
    for k, v in cli.items():
        if v is not None:
            kwargs[k] = v
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
