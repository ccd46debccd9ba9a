"""INI-style run configuration.

Example::

    [model]
    alpha = 1.0
    U0 = 2.0

    [time]
    tau = 0.005
    T = 0.05

    [output]
    out_dir = run1

``tau`` and ``T`` are required; every other key falls back to the default
of :class:`~activedoi.params.Params` or of :class:`OutputSettings`.
"""

from __future__ import annotations

import configparser
import re
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .params import Params

SECTIONS = {
    "model": ("Re", "De", "gamma", "alpha", "eps", "U0", "L"),
    "time": ("tau", "T"),
    "grid": ("nx", "ny", "M", "Lx", "Ly", "bc_mode"),
    "solver": ("tol_fp", "tol_linear", "tol_div", "max_picard", "damping"),
    "initial": ("init_psi", "init_axis", "init_sharpness", "init_perturbation",
                "init_velocity", "init_velocity_amplitude", "seed"),
    "output": ("out_dir", "snapshot_every", "store_full_psi"),
}
REQUIRED = ("tau", "T")


@dataclass(frozen=True)
class OutputSettings:
    out_dir: str = "out"
    snapshot_every: int = 0
    store_full_psi: bool = False


@dataclass(frozen=True)
class RunConfig:
    params: Params
    output: OutputSettings = field(default_factory=OutputSettings)


_TYPES = {f.name: f.type for f in fields(Params)}
_TYPES.update({f.name: f.type for f in fields(OutputSettings)})


def _convert(key, raw, line):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {kind}", key=key, line=line) from None


def _line_index(text):
    """Map ``(section, key) -> line number`` from the raw file."""
    where = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), no)
            continue
        if not s or s[0] in "#;":
            continue
        key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
        where.setdefault((section, key), no)
    return where


def parse_config_text(text, source="<config>"):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (Re, De, U0, L, M, T)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: malformed config: {exc}", line=getattr(exc, "lineno", None)) from None
    lines = _line_index(text)
    values = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", key=section, line=lines.get((section, None)))
        for key, raw in cp.items(section):
            line = lines.get((section, key))
            if key not in SECTIONS[section]:
                hint = [s for s, keys in SECTIONS.items() if key in keys]
                msg = f"unknown key in [{section}]"
                if hint:
                    msg += f" (it belongs in [{hint[0]}])"
                raise ConfigError(msg, key=key, line=line)
            values[key] = (_convert(key, raw, line), line)
    for key in REQUIRED:
        if key not in values:
            raise ConfigError("required key is missing", key=key)

    pvals = {k: v for k, (v, _) in values.items() if k in _PARAM_KEYS}
    ovals = {k: v for k, (v, _) in values.items() if k not in _PARAM_KEYS}
    try:
        params = Params(**pvals)
    except ConfigError as exc:
        line = values.get(exc.key, (None, None))[1] if exc.key else None
        raise ConfigError(exc.detail, key=exc.key, line=line) from None
    output = OutputSettings(**ovals)
    if output.snapshot_every < 0:
        raise ConfigError("snapshot_every must be >= 0", key="snapshot_every",
                          line=values.get("snapshot_every", (None, None))[1])
    return RunConfig(params, output)


_PARAM_KEYS = set(k for s in ("model", "time", "grid", "solver", "initial") for k in SECTIONS[s])


def parse_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, source=str(path))


def serialize_config(cfg: RunConfig) -> str:
    pd = cfg.params.as_dict()
    od = {f.name: getattr(cfg.output, f.name) for f in fields(OutputSettings)}
    out = []
    for section, keys in SECTIONS.items():
        out.append(f"[{section}]")
        for k in keys:
            v = pd[k] if k in pd else od[k]
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{k} = {v}")
        out.append("")
    return "\n".join(out)


def load_params_quiet(text):
    """Parse without re-emitting soft warnings (used by round-trip checks)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return parse_config_text(text)
