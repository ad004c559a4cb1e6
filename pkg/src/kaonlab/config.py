"""Physics constants from a ``key=value`` file, overridable by flags.

Lookup order for the file: an explicit path, then the ``KAONLAB_CONFIG``
environment variable, then ``kaonlab.conf`` in the working directory.
A missing default file is not an error.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigError
from .meson import (
    DEFAULT_DELTA_M_TAU_S,
    DEFAULT_EPS_ABS,
    DEFAULT_EPS_PHASE_DEG,
    DEFAULT_TAU_RATIO,
    MesonParams,
    epsilon_from_polar,
    make_params,
)

__all__ = ["ENV_VAR", "DEFAULT_FILENAME", "PhysicsConfig", "load_config", "parse_config_text"]

ENV_VAR = "KAONLAB_CONFIG"
DEFAULT_FILENAME = "kaonlab.conf"

_FLOAT_KEYS = ("delta_m_tau_s", "tau_l_over_tau_s", "eps_abs", "eps_phase_deg")
_KEYS = _FLOAT_KEYS + ("system_label",)


@dataclass(frozen=True)
class PhysicsConfig:
    """Resolved physics constants and which of them were set explicitly."""

    delta_m_tau_s: float = DEFAULT_DELTA_M_TAU_S
    tau_l_over_tau_s: float = DEFAULT_TAU_RATIO
    eps_abs: float = DEFAULT_EPS_ABS
    eps_phase_deg: float = DEFAULT_EPS_PHASE_DEG
    system_label: str = "kaon"
    explicit: frozenset = frozenset()
    source: str | None = None

    def with_overrides(self, **values) -> PhysicsConfig:
        """Apply non-``None`` overrides and mark them explicit."""
        given = {k: v for k, v in values.items() if v is not None}
        unknown = set(given) - set(_KEYS)
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")
        return replace(self, **given, explicit=self.explicit | frozenset(given))

    def params(self, cp_invariant: bool = False) -> MesonParams:
        """Meson parameters; ``cp_invariant`` forces ``epsilon = 0``."""
        eps = 0.0 if cp_invariant else epsilon_from_polar(self.eps_abs, self.eps_phase_deg)
        return make_params(self.delta_m_tau_s, self.tau_l_over_tau_s, eps, self.system_label)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in _KEYS}


def parse_config_text(text: str, source: str = "<string>") -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if key in _FLOAT_KEYS:
            try:
                number = float(value)
            except ValueError:
                raise ConfigError(f"{source}:{lineno}: {key} is not a number: {value!r}") from None
            if not math.isfinite(number):
                raise ConfigError(f"{source}:{lineno}: {key} must be finite")
            out[key] = number
        else:
            out[key] = value
    return out


def load_config(path: str | os.PathLike | None = None, environ: dict | None = None) -> PhysicsConfig:
    """Read the configuration file, if any, on top of the defaults."""
    environ = os.environ if environ is None else environ
    if path is None and environ.get(ENV_VAR):
        path = environ[ENV_VAR]
    if path is None:
        candidate = Path(DEFAULT_FILENAME)
        if not candidate.is_file():
            return PhysicsConfig()
        path = candidate
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {str(p)!r}: {exc.strerror}") from None
    values = parse_config_text(text, str(p))
    return replace(PhysicsConfig(), **values, explicit=frozenset(values), source=str(p))
