"""Run configuration: a sectioned key-value file plus command-line overrides.

Example file::

    [measure]
    kind = segment
    d = 2
    n = 65536
    param.length = 1.0

    [mollifier]
    family = space-compact-bump
    radius = 1.0

    [ladder]
    scales = 16, 32, 64, 128

    [run]
    p = 4
    epsilon = 0.05
    eps_tail = 0.05

Keys of the form ``param.<name>`` are passed to the measure generator.
Every run writes the resolved configuration back in the same format, so a
run can be repeated from its output directory alone.  The output directory
itself is left out, which keeps the record identical across locations.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import asdict, dataclass, field, fields

from .mollifier import BAND_LIMITED, FAMILIES, SPACE_COMPACT
from .ratio import DEFAULT_LOWER_SLACK, DEFAULT_UPPER_SLACK
from .spectrum import DEFAULT_EPS_TAIL
from .thresholds import DEFAULT_EPSILON
from .torus import DEFAULT_LEAK_TOLERANCE


class ConfigError(ValueError):
    """A configuration field failed validation; ``field`` names it."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _parse_scalar(text: str):
    """int, float, bool or string, in that order of preference."""
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    if "," in t:
        return [_parse_scalar(x) for x in t.split(",") if x.strip()]
    return t


def parse_ladder(text) -> list[float] | None:
    """``"16, 32, 64"`` or the exponent range ``"2^4..2^9"`` (also ``"4:9"``); empty means default."""
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    t = str(text).strip()
    if not t or t.lower() == "default":
        return None
    for sep in ("..", ":"):
        if sep in t:
            a, b = t.split(sep)
            base = 2.0
            lo = a.strip()
            hi = b.strip()
            if "^" in lo:
                base_text, lo = lo.split("^")
                base = float(base_text)
                hi = hi.split("^")[-1]
            return [base ** j for j in range(int(lo), int(hi) + 1)]
    return [float(x) for x in t.split(",") if x.strip()]


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(v) for v in value)
    return str(value)


@dataclass
class RunConfig:
    """Everything a run depends on.  Field names map onto file sections as noted."""

    # [measure]
    kind: str = "segment"
    d: int | None = None
    n: int | None = None
    params: dict = field(default_factory=dict)
    # [mollifier]
    family: str | None = None  # resolved per subcommand: bump in R^d, band-limited on the torus
    radius: float = 1.0
    # [ladder]
    scales: list | None = None
    # [run]
    p: float = 4.0
    epsilon: float = DEFAULT_EPSILON
    eps_tail: float = DEFAULT_EPS_TAIL
    spacing: float | None = None
    lower_slack: float = DEFAULT_LOWER_SLACK
    upper_slack: float = DEFAULT_UPPER_SLACK
    seed: int = 0
    output: str = "out"
    # [torus]
    block: int | None = None
    grid: int | None = None
    leak_tol: float = DEFAULT_LEAK_TOLERANCE
    # [threshold]
    alpha: str | None = None
    kappa: str | None = None
    p_target: str | None = None
    points: int = 41
    # [verify]
    corpus: list | None = None

    _SECTIONS = {
        "measure": ("kind", "d", "n"),
        "mollifier": ("family", "radius"),
        "ladder": ("scales",),
        "run": ("p", "epsilon", "eps_tail", "spacing", "lower_slack", "upper_slack", "seed", "output"),
        "torus": ("block", "grid", "leak_tol"),
        "threshold": ("alpha", "kappa", "p_target", "points"),
        "verify": ("corpus",),
    }

    def validate(self) -> "RunConfig":
        if self.family is not None and self.family not in FAMILIES:
            raise ConfigError("mollifier.family", f"expected one of {FAMILIES}, got {self.family!r}")
        if not self.radius > 0:
            raise ConfigError("mollifier.radius", "must be positive")
        if self.d is not None and self.d not in (1, 2, 3):
            raise ConfigError("measure.d", "must be 1, 2 or 3")
        if self.n is not None and self.n < 1:
            raise ConfigError("measure.n", "must be a positive integer")
        if not (self.p >= 2 and math.isfinite(self.p)):
            raise ConfigError("run.p", "must be finite and >= 2")
        if not self.epsilon > 0:
            raise ConfigError("run.epsilon", "must be positive")
        if not 0 < self.eps_tail < 1:
            raise ConfigError("run.eps_tail", "must lie in (0, 1)")
        if self.spacing is not None and not self.spacing > 0:
            raise ConfigError("run.spacing", "must be positive")
        if not 0 < self.lower_slack <= 1:
            raise ConfigError("run.lower_slack", "must lie in (0, 1]")
        if not self.upper_slack >= 1:
            raise ConfigError("run.upper_slack", "must be >= 1")
        if self.scales is not None:
            if any(not s > 0 for s in self.scales):
                raise ConfigError("ladder.scales", "scales must be positive")
            if any(b < 2 * a * (1 - 1e-12) for a, b in zip(self.scales, self.scales[1:])):
                raise ConfigError("ladder.scales", "scales must increase by a factor of at least 2")
        if self.block is not None and self.block < 8:
            raise ConfigError("torus.block", "must be >= 8")
        if not self.leak_tol > 0:
            raise ConfigError("torus.leak_tol", "must be positive")
        if self.points < 2:
            raise ConfigError("threshold.points", "must be >= 2")
        return self

    # serialisation ------------------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for section, keys in self._SECTIONS.items():
            cp.add_section(section)
            for k in keys:
                v = getattr(self, k)
                # the output directory is where a run writes, not what it computes
                if v is not None and k != "output":
                    cp.set(section, k, _format(v))
        for k in sorted(self.params):
            cp.set("measure", f"param.{k}", _format(self.params[k]))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def as_dict(self) -> dict:
        out = asdict(self)
        out["params"] = dict(sorted(self.params.items()))
        return out

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_string(text)
        cfg = cls()
        known = {f.name for f in fields(cls)}
        for section in cp.sections():
            allowed = cls._SECTIONS.get(section)
            if allowed is None:
                raise ConfigError(section, "unknown section")
            for key, raw in cp.items(section):
                if section == "measure" and key.startswith("param."):
                    cfg.params[key[len("param."):]] = _parse_scalar(raw)
                    continue
                if key not in allowed or key not in known:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                cfg.set(key, raw, where=f"{section}.{key}")
        return cfg

    def set(self, key: str, raw, where: str | None = None) -> None:
        """Assign a field from text (or an already typed value), with field-level errors."""
        where = where or key
        if raw is None:
            return
        try:
            if key == "scales":
                value = parse_ladder(raw)
            elif key == "corpus":
                value = [x.strip() for x in str(raw).split(",") if x.strip()] if isinstance(raw, str) else list(raw)
            elif key in ("d", "n", "seed", "block", "grid", "points"):
                value = int(raw)
            elif key in ("radius", "p", "epsilon", "eps_tail", "spacing", "lower_slack", "upper_slack", "leak_tol"):
                value = float(raw)
            elif key == "family":
                value = family_alias(str(raw).strip())
            else:
                value = str(raw).strip()
        except (TypeError, ValueError) as exc:
            raise ConfigError(where, f"cannot parse {raw!r}: {exc}") from None
        setattr(self, key, value)


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_ini(fh.read())


def family_alias(name: str) -> str:
    """Short names ``bump`` / ``band`` for the two mollifier families."""
    aliases = {"bump": SPACE_COMPACT, "space-compact": SPACE_COMPACT, "band": BAND_LIMITED}
    return aliases.get(name, name)
