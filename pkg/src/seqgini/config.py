"""Run configuration: defaults, INI files and command-line overrides.

Config file layout (every key optional)::

    [run]
    procedure = sequential      ; sequential | two-stage | fixed-n
    alpha = 0.05
    omega = 0.015
    delta = 2
    m_prime = 1
    reps = 500
    seed = 0
    workers = 1

    [population]
    dist = gamma:2.649,0.84
    strata = 750,750
    households = 50,150        ; per sub-stratum range
    q_aff = 0.55
    k = 2
    dispersion = 0.1

    [survey]
    frame = data/frame.csv
    households = data/households.csv

    [output]
    out = results/run
    format = table             ; table | delimited

Command-line flags override file values, which override the defaults.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields, replace
from typing import Optional

from .design import IncomeLaw, PopulationSpec
from .errors import ParameterError

PROCEDURES = ("sequential", "two-stage", "fixed-n")
FORMATS = ("table", "delimited")
WORKERS_ENV = "SEQGINI_WORKERS"

_SECTIONS = {
    "run": ("procedure", "alpha", "omega", "delta", "m_prime", "reps", "seed", "workers"),
    "population": ("dist", "strata", "households", "q_aff", "k", "dispersion"),
    "survey": ("frame", "households_file"),
    "output": ("out", "format"),
}


@dataclass(frozen=True)
class RunConfig:
    procedure: str = "sequential"
    alpha: float = 0.05
    omega: float = 0.015
    delta: float = 2.0
    m_prime: int = 1
    k: int = 2
    reps: int = 500
    seed: int = 0
    workers: int = 1
    dist: str = "gamma:2.649,0.84"
    strata: str = "750,750"
    households: str = "50,150"
    q_aff: float = 0.55
    dispersion: float = 0.1
    frame: Optional[str] = None
    households_file: Optional[str] = None
    out: Optional[str] = None
    format: str = "table"

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise ParameterError(f"procedure must be one of {PROCEDURES}, got {self.procedure!r}")
        if self.format not in FORMATS:
            raise ParameterError(f"format must be one of {FORMATS}, got {self.format!r}")
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if not self.omega > 0 or not self.delta > 0:
            raise ParameterError("omega and delta must be positive")
        if self.m_prime < 1 or self.k < 1 or self.reps < 1 or self.workers < 1:
            raise ParameterError("m_prime, k, reps and workers must be at least 1")
        if (self.frame is None) != (self.households_file is None):
            raise ParameterError("survey input needs both a frame file and a households file")

    @property
    def uses_survey(self) -> bool:
        return self.frame is not None

    def population_spec(self) -> PopulationSpec:
        if self.uses_survey:
            raise ParameterError("population settings and survey files are mutually exclusive")
        return PopulationSpec(
            law=IncomeLaw.parse(self.dist),
            strata_sizes=parse_counts(self.strata, "strata"),
            household_range=parse_counts(self.households, "households"),
            q_aff=self.q_aff, k=self.k, dispersion=self.dispersion,
        )


def parse_floats(text: str, name: str) -> tuple:
    try:
        vals = tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise ParameterError(f"{name} must be a comma-separated list of numbers, got {text!r}")
    return vals


def parse_counts(text: str, name: str) -> tuple:
    vals = parse_floats(text, name)
    if any(v != int(v) for v in vals):
        raise ParameterError(f"{name} must hold integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _coerce(name, text):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if kind in ("float",):
            return float(text)
        if kind in ("int",):
            return int(text)
    except ValueError:
        raise ParameterError(f"config key {name} = {text!r} is not a {kind}")
    return text


def read_config_file(path) -> dict:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc.strerror}")
    except configparser.Error as exc:
        raise ParameterError(f"config {path}: {exc}")
    out = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ParameterError(f"config {path}: unknown section [{section}]")
        for key, val in cp.items(section):
            name = "households_file" if (section, key) == ("survey", "households") else key
            if name not in _SECTIONS[section]:
                raise ParameterError(f"config {path}: unknown key {key!r} in [{section}]")
            out[name] = _coerce(name, val)
    return out


def build_config(file_values: dict = None, overrides: dict = None, environ=None) -> RunConfig:
    """Defaults, then file values, then non-None overrides; the worker
    environment variable beats both file and default but not an explicit flag."""
    environ = os.environ if environ is None else environ
    values = dict(file_values or {})
    env = environ.get(WORKERS_ENV)
    if env:
        try:
            values["workers"] = int(env)
        except ValueError:
            raise ParameterError(f"{WORKERS_ENV} must be an integer, got {env!r}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return replace(RunConfig(), **values)
