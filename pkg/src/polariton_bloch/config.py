"""Scenario configuration: INI text with five fixed sections.

Grammar (``configparser`` syntax, ``#`` or ``;`` comments, ``key = value``)::

    [atom]        mu_1, mu_2, mu_s                  J/T
    [fields]      wavelength                        length
                  B1                                T/m
                  m_eff                             s/m^2  (or gsqrtN + Omega in rad/s)
    [lattice]     d                                 length
                  barrier_fraction                  a/d in (0, 1)
                  V0, Delta, E_gap                  kHz (reading set by frequency_convention)
                  delta_source                      published | kronig-penney
                  frequency_convention              ordinary | angular
    [simulation]  scenario, sigma, center, n_sites, dt, samples_per_period,
                  periods, free_time, free_samples, points_per_cell, continuum,
                  wannier_m_min, wannier_m_max, kappa_samples, n_bands,
                  dispersion_samples, band_scan, validity_threshold
    [output]      format (csv | json | both), directory

Lengths take an optional unit suffix (m, mm, um, nm); kHz keys accept an
optional ``kHz`` suffix. Every key is optional and defaults to the Rb-87
parameter set. Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .band_structure import KronigPenneySpec
from .eit_params import RB87, CONVENTIONS, MICROGAUSS_PER_MM, AtomicLevels, FieldParams, khz_to_internal
from .errors import ConfigError, DomainError

SCENARIOS = ("band-structure", "bloch-oscillation", "free-component", "wannier-stark", "figure3", "validity-check")
FORMATS = ("csv", "json", "both")
DELTA_SOURCES = ("published", "kronig-penney")

_LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9}
_NUMBER_UNIT = re.compile(r"^\s*([-+0-9.eE]+(?:[eE][-+]?\d+)?)\s*([^\s\d.].*?)?\s*$")


@dataclass(frozen=True)
class Key:
    kind: str  # float | length | khz | int | bool | choice | text
    default: Any
    check: Optional[Callable[[Any], bool]] = None
    rule: str = ""
    choices: tuple = ()


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


SCHEMA: dict[str, dict[str, Key]] = {
    "atom": {
        "mu_1": Key("float", RB87.mu_s),
        "mu_2": Key("float", RB87.mu_2),
        "mu_s": Key("float", RB87.mu_s),
    },
    "fields": {
        "wavelength": Key("length", RB87.lambda_nm * 1e-9, _pos, "> 0"),
        "B1": Key("float", RB87.B1_microgauss_per_mm * MICROGAUSS_PER_MM),
        "m_eff": Key("float", RB87.m_eff, _pos, "> 0"),
        "gsqrtN": Key("float", None, _nonneg, ">= 0"),
        "Omega": Key("float", None, _pos, "> 0"),
    },
    "lattice": {
        "d": Key("length", RB87.d_um * 1e-6, _pos, "> 0"),
        "barrier_fraction": Key("float", 0.5, lambda v: 0 < v < 1, "in (0, 1)"),
        "V0": Key("khz", RB87.V0_khz, _pos, "> 0"),
        "Delta": Key("khz", RB87.Delta_khz, _pos, "> 0"),
        "E_gap": Key("khz", RB87.E_gap_khz, _pos, "> 0"),
        "delta_source": Key("choice", "published", choices=DELTA_SOURCES),
        "frequency_convention": Key("choice", "ordinary", choices=CONVENTIONS),
    },
    "simulation": {
        "scenario": Key("choice", None, choices=SCENARIOS),
        "sigma": Key("length", RB87.sigma_mm * 1e-3, _pos, "> 0"),
        "center": Key("length", 0.0),
        "n_sites": Key("int", 0, lambda v: v == 0 or (v >= 3 and v % 2 == 1), "0 (auto) or odd >= 3"),
        "dt": Key("float", 0.0, _nonneg, ">= 0 (0 = auto)"),
        "samples_per_period": Key("int", 256, lambda v: v >= 8, ">= 8"),
        "periods": Key("float", 2.0, _pos, "> 0"),
        "free_time": Key("float", 5e-3, _pos, "> 0"),
        "free_samples": Key("int", 101, lambda v: v >= 2, ">= 2"),
        "points_per_cell": Key("int", 16, lambda v: v >= 2, ">= 2"),
        "continuum": Key("bool", True),
        "wannier_m_min": Key("int", -3),
        "wannier_m_max": Key("int", 3),
        "kappa_samples": Key("int", 65, lambda v: v >= 2, ">= 2"),
        "n_bands": Key("int", 3, lambda v: v >= 2, ">= 2"),
        "dispersion_samples": Key("int", 2001, lambda v: v >= 2, ">= 2"),
        "band_scan": Key("bool", True),
        "validity_threshold": Key("float", 0.05, _pos, "> 0"),
    },
    "output": {
        "format": Key("choice", "csv", choices=FORMATS),
        "directory": Key("text", None),
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated configuration; ``values`` maps ``section.key`` to typed values."""

    values: dict
    explicit: frozenset = field(default=frozenset(), compare=False)

    def __getitem__(self, dotted: str):
        return self.values[dotted]

    @property
    def scenario(self) -> str:
        return self.values["simulation.scenario"]

    @property
    def convention(self) -> str:
        return self.values["lattice.frequency_convention"]

    def khz(self, dotted: str) -> float:
        """A kHz-valued key converted to rad/s under the configured reading."""
        return khz_to_internal(self.values[dotted], self.convention)

    def atom(self) -> AtomicLevels:
        v = self.values
        return AtomicLevels(v["atom.mu_1"], v["atom.mu_2"], v["atom.mu_s"])

    def fields(self) -> FieldParams:
        v = self.values
        return FieldParams(
            lambda_probe=v["fields.wavelength"],
            B1=v["fields.B1"],
            d=v["lattice.d"],
            m_eff=v["fields.m_eff"],
            gsqrtN=v["fields.gsqrtN"],
            Omega=v["fields.Omega"],
        )

    def lattice(self, m_eff: float) -> KronigPenneySpec:
        v = self.values
        return KronigPenneySpec.from_fraction(v["lattice.d"], v["lattice.barrier_fraction"], self.khz("lattice.V0"), m_eff)

    def with_values(self, overrides: dict) -> "ScenarioConfig":
        """Re-validated copy with ``section.key`` overrides applied."""
        for k in overrides:
            _lookup(k)
        values = dict(self.values, **overrides)
        explicit = self.explicit | frozenset(overrides)
        return parse_config(format_config(ScenarioConfig(values, explicit)))


def _lookup(dotted: str) -> Key:
    section, _, name = dotted.partition(".")
    try:
        return SCHEMA[section][name]
    except KeyError:
        raise ConfigError("unknown configuration key", key=dotted) from None


def _key_lines(text: str) -> dict:
    lines = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault(section, i)
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            lines.setdefault(f"{section}.{m.group(1).strip()}", i)
    return lines


def _split_unit(raw: str):
    m = _NUMBER_UNIT.match(raw)
    if not m:
        raise ValueError(f"expected a number, got {raw!r}")
    return float(m.group(1)), (m.group(2) or "").strip()


def _convert(spec: Key, raw: str):
    raw = raw.strip()
    if spec.kind == "text":
        return raw
    if spec.kind == "choice":
        if raw not in spec.choices:
            raise ValueError(f"must be one of {', '.join(spec.choices)}; got {raw!r}")
        return raw
    if spec.kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected true/false, got {raw!r}")
    if spec.kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"expected an integer, got {raw!r}") from None
    number, unit = _split_unit(raw)
    if spec.kind == "length":
        if unit and unit not in _LENGTH_UNITS:
            raise ValueError(f"unknown length unit {unit!r}; use one of {', '.join(_LENGTH_UNITS)}")
        number *= _LENGTH_UNITS.get(unit, 1.0)
    elif spec.kind == "khz":
        if unit and unit.lower() != "khz":
            raise ValueError(f"expected a kHz value, got unit {unit!r}")
    elif unit:
        raise ValueError(f"unexpected unit {unit!r}; give the value in SI units")
    if not math.isfinite(number):
        raise ValueError("must be finite")
    return number


def parse_config(text: str, scenario: Optional[str] = None) -> ScenarioConfig:
    """Validate configuration text and fill defaults.

    ``scenario`` (the command-line choice) overrides ``simulation.scenario``.
    Raises :class:`ConfigError` naming the offending key and line.
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", line=exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", line=exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", key=f"{exc.section}.{exc.option}", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse {line.strip()!r}", line=lineno) from None
    lines = _key_lines(text)
    if parser.defaults():
        raise ConfigError("a [DEFAULT] section is not supported", line=lines.get("DEFAULT"))

    values = {f"{s}.{k}": spec.default for s, keys in SCHEMA.items() for k, spec in keys.items()}
    explicit = set()
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]; expected one of {', '.join(SCHEMA)}",
                              line=lines.get(section))
        for name, raw in parser.items(section):
            dotted = f"{section}.{name}"
            line = lines.get(dotted)
            if name not in SCHEMA[section]:
                raise ConfigError(f"unknown key; expected one of {', '.join(SCHEMA[section])}", key=dotted, line=line)
            spec = SCHEMA[section][name]
            try:
                value = _convert(spec, raw)
            except ValueError as exc:
                raise ConfigError(str(exc), key=dotted, line=line) from None
            if spec.check is not None and not spec.check(value):
                raise ConfigError(f"must be {spec.rule}, got {raw.strip()!r}", key=dotted, line=line)
            values[dotted] = value
            explicit.add(dotted)
    if scenario is not None:
        if scenario not in SCENARIOS:
            raise ConfigError(f"must be one of {', '.join(SCENARIOS)}; got {scenario!r}", key="simulation.scenario")
        values["simulation.scenario"] = scenario
    _cross_validate(values, explicit, lines)
    return ScenarioConfig(values, frozenset(explicit))


def _cross_validate(values: dict, explicit: set, lines: dict) -> None:
    if values["simulation.scenario"] is None:
        raise ConfigError("no scenario given (set [simulation] scenario or pass --scenario)", key="simulation.scenario")
    coupling = [k for k in ("fields.gsqrtN", "fields.Omega") if k in explicit]
    if coupling:
        if "fields.m_eff" in explicit:
            raise ConfigError("give either m_eff or gsqrtN + Omega, not both", key="fields.m_eff",
                              line=lines.get("fields.m_eff"))
        if len(coupling) == 1:
            missing = ({"fields.gsqrtN", "fields.Omega"} - set(coupling)).pop()
            raise ConfigError(f"{missing} must be given as well", key=coupling[0], line=lines.get(coupling[0]))
        values["fields.m_eff"] = None
    if values["simulation.wannier_m_min"] > values["simulation.wannier_m_max"]:
        k = "simulation.wannier_m_min"
        raise ConfigError("wannier_m_min must not exceed wannier_m_max", key=k, line=lines.get(k))
    cfg = ScenarioConfig(values)
    for keys, build in (
        (("atom.mu_1", "atom.mu_2", "atom.mu_s"), cfg.atom),
        (("fields.wavelength", "fields.m_eff", "fields.Omega"), cfg.fields),
    ):
        try:
            build()
        except DomainError as exc:
            k = next((k for k in keys if k in explicit), keys[0])
            raise ConfigError(str(exc), key=k, line=lines.get(k)) from None


def _format_value(spec: Key, value) -> str:
    if spec.kind == "bool":
        return "true" if value else "false"
    if spec.kind in ("float", "length", "khz"):
        return repr(float(value))
    return str(value)


def format_config(cfg: ScenarioConfig) -> str:
    """Canonical text for ``cfg``: every non-empty key, SI lengths, repr floats."""
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for name, spec in keys.items():
            value = cfg.values[f"{section}.{name}"]
            if value is None:
                continue
            if section == "fields" and name == "m_eff" and cfg.values["fields.gsqrtN"] is not None:
                continue
            out.append(f"{name} = {_format_value(spec, value)}")
        out.append("")
    return "\n".join(out)


def parse_assignment(text: str):
    """``section.key=value`` from the command line, converted and range-checked."""
    dotted, sep, raw = text.partition("=")
    if not sep:
        raise ConfigError(f"expected section.key=value, got {text!r}")
    dotted = dotted.strip()
    spec = _lookup(dotted)
    try:
        value = _convert(spec, raw)
    except ValueError as exc:
        raise ConfigError(str(exc), key=dotted) from None
    return dotted, value
