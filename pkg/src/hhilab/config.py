"""Scenario configuration files.

Grammar: a TOML document with up to five tables. Every key is optional and
falls back to the default shown.

    [model]
    kappa = 1.0               # surface gravity, > 0
    L = 10.0                  # truncation length, > 0
    N = 400                   # interior nodes, integer >= 8
    mass = 1.0                # mass floor, > 0
    mass_profile = "constant" # or "bump"
    mass_bump_amplitude = 0.5
    mass_bump_center = 5.0
    mass_bump_width = 1.0
    lapse = "rindler"         # or "sin", "tanh"
    kappa_tolerance = 1.0

    [run]
    beta = "hawking"          # or a positive number
    state_betas = [0.5, 1.0, "hawking", 10.0]
    N_tau = 256               # even, >= 8
    K_max = 512
    green_route = "analytic"  # or "fourier", "fd"
    probe_margins = [0.3, 0.7]
    seed = 0
    probe_pairs = 64
    rp_fields = 1000
    green_fields = 20
    jump_solutions = 20
    refine_levels = 3
    fd_cap = 200000

    [checks]
    list = ["state_conditions", ...]   # default: every check

    [tolerances]
    prop62_green = 1e-6       # any key of DEFAULT_TOLERANCES

    [output]
    dir = "hhilab-out"
    format = "jsonl"          # or "human", "both"
    dump_blocks = false
    dump_kernel = false
    dump_eigenvalues = false
"""
from __future__ import annotations

import dataclasses
import difflib
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .geometry import LAPSE_PROFILES, MASS_PROFILES, ModelParams

CHECK_NAMES = (
    "state_conditions",
    "scalar_fixture",
    "prop62",
    "green_oracles",
    "reflection_positivity",
    "jump_identity",
    "hawking_gate",
    "hhi_restriction",
    "hhi_purity_positivity",
    "symbol_proxy",
)

DEFAULT_TOLERANCES = {
    "state_positivity": 1e-8,
    "state_purity": 1e-9,
    "scalar_fixture": 1e-12,
    "prop62_closed": 1e-12,
    "prop62_green": 1e-6,
    "min_order": 1.8,
    "green_fourier": 1e-6,
    "rp_positivity": 1e-10,
    "rp_routes": 1e-8,
    "jump": 1e-6,
    "hawking_atol": 1e-12,
    "hhi_restriction": 5e-3,
    "hhi_purity": 1e-9,
    "hhi_positivity": 1e-8,
    "hhi_rp": 1e-8,
    "symbol_ratio": 0.05,
    "beta_limit_constant": 2.0,
}

GREEN_ROUTES = ("analytic", "fourier", "fd")
FORMATS = ("jsonl", "human", "both")


@dataclass(frozen=True)
class RunParams:
    beta: float | str = "hawking"
    state_betas: tuple = (0.5, 1.0, "hawking", 10.0)
    N_tau: int = 256
    K_max: int = 512
    green_route: str = "analytic"
    probe_margins: tuple = (0.3, 0.7)
    seed: int = 0
    probe_pairs: int = 64
    rp_fields: int = 1000
    green_fields: int = 20
    jump_solutions: int = 20
    refine_levels: int = 3
    fd_cap: int = 200_000


@dataclass(frozen=True)
class OutputParams:
    dir: str = "hhilab-out"
    format: str = "jsonl"
    dump_blocks: bool = False
    dump_kernel: bool = False
    dump_eigenvalues: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    model: ModelParams = field(default_factory=ModelParams)
    run: RunParams = field(default_factory=RunParams)
    checks: tuple = CHECK_NAMES
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output: OutputParams = field(default_factory=OutputParams)

    def resolve_beta(self, value=None) -> float:
        """Numeric beta; ``"hawking"`` maps to ``2 pi / kappa``."""
        b = self.run.beta if value is None else value
        return 2.0 * math.pi / self.model.kappa if b == "hawking" else float(b)

    def to_dict(self) -> dict:
        return {
            "model": dataclasses.asdict(self.model),
            "run": {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self.run).items()},
            "checks": list(self.checks),
            "tolerances": dict(sorted(self.tolerances.items())),
            "output": dataclasses.asdict(self.output),
        }

    def replace(self, **sections) -> "ScenarioConfig":
        return dataclasses.replace(self, **sections)


def _fields(cls):
    return {f.name: f for f in dataclasses.fields(cls)}


def _suggest(key, options):
    close = difflib.get_close_matches(key, list(options), n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _positive(x):
    return _is_number(x) and math.isfinite(x) and x > 0


def _positive_int(x):
    return isinstance(x, int) and not isinstance(x, bool) and x > 0


def _beta_ok(x):
    return x == "hawking" or _positive(x)


def _validate_model(section, bad):
    out = {}
    for k, v in section.items():
        path = f"model.{k}"
        if k in ("kappa", "L", "mass", "mass_bump_width", "kappa_tolerance"):
            if not _positive(v):
                bad.append((path, "must be a positive number"))
                continue
        elif k in ("mass_bump_amplitude", "mass_bump_center"):
            if not _is_number(v) or v < 0:
                bad.append((path, "must be a non-negative number"))
                continue
        elif k == "N":
            if not _positive_int(v) or v < 8:
                bad.append((path, "must be an integer >= 8"))
                continue
        elif k == "mass_profile":
            if v not in MASS_PROFILES:
                bad.append((path, f"must be one of {list(MASS_PROFILES)}"))
                continue
        elif k == "lapse":
            if v not in LAPSE_PROFILES:
                bad.append((path, f"must be one of {sorted(LAPSE_PROFILES)}"))
                continue
        out[k] = float(v) if _is_number(v) and k != "N" else v
    return out


def _validate_run(section, bad):
    out = {}
    for k, v in section.items():
        path = f"run.{k}"
        if k == "beta":
            if not _beta_ok(v):
                bad.append((path, 'must be a positive number or "hawking"'))
                continue
        elif k == "state_betas":
            if not isinstance(v, list) or not v or not all(_beta_ok(b) for b in v):
                bad.append((path, 'must be a non-empty list of positive numbers or "hawking"'))
                continue
            v = tuple(v)
        elif k == "N_tau":
            if not _positive_int(v) or v % 2 or v < 8:
                bad.append((path, "must be an even integer >= 8"))
                continue
        elif k in ("K_max", "probe_pairs", "rp_fields", "green_fields", "jump_solutions", "fd_cap"):
            if not _positive_int(v):
                bad.append((path, "must be a positive integer"))
                continue
        elif k in ("seed", "refine_levels"):
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                bad.append((path, "must be a non-negative integer"))
                continue
        elif k == "green_route":
            if v not in GREEN_ROUTES:
                bad.append((path, f"must be one of {list(GREEN_ROUTES)}"))
                continue
        elif k == "probe_margins":
            if (not isinstance(v, list) or len(v) != 2 or not all(_is_number(x) for x in v)
                    or not 0 < v[0] < v[1] < 1):
                bad.append((path, "must be [lo, hi] with 0 < lo < hi < 1"))
                continue
            v = (float(v[0]), float(v[1]))
        if _is_number(v) and not isinstance(v, int):
            v = float(v)
        out[k] = v
    return out


def _validate_checks(section, bad):
    names = section.get("list")
    if names is None:
        return {}
    if not isinstance(names, list) or not names:
        bad.append(("checks.list", "must be a non-empty list"))
        return {}
    ok = True
    for name in names:
        if name not in CHECK_NAMES:
            bad.append(("checks.list", f"unknown check {name!r}{_suggest(str(name), CHECK_NAMES)}"))
            ok = False
    if len(set(names)) != len(names):
        bad.append(("checks.list", "checks must not repeat"))
        ok = False
    return {"checks": tuple(names)} if ok else {}


def _validate_tolerances(section, bad):
    out = dict(DEFAULT_TOLERANCES)
    for k, v in section.items():
        if k not in DEFAULT_TOLERANCES:
            bad.append((f"tolerances.{k}", f"unknown key{_suggest(k, DEFAULT_TOLERANCES)}"))
        elif not _is_number(v) or v < 0 or not math.isfinite(v):
            bad.append((f"tolerances.{k}", "must be a non-negative number"))
        else:
            out[k] = float(v)
    return out


def _validate_output(section, bad):
    out = {}
    for k, v in section.items():
        path = f"output.{k}"
        if k == "dir":
            if not isinstance(v, str) or not v:
                bad.append((path, "must be a non-empty string"))
                continue
        elif k == "format":
            if v not in FORMATS:
                bad.append((path, f"must be one of {list(FORMATS)}"))
                continue
        elif not isinstance(v, bool):
            bad.append((path, "must be true or false"))
            continue
        out[k] = v
    return out


SECTIONS = {
    "model": _fields(ModelParams),
    "run": _fields(RunParams),
    "checks": {"list": None},
    "tolerances": DEFAULT_TOLERANCES,
    "output": _fields(OutputParams),
}


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Validate a parsed document; all violations are reported together."""
    bad = []
    every = [f"{s}.{x}" for s, keys in SECTIONS.items() for x in keys]
    for top, value in doc.items():
        if top not in SECTIONS:
            if isinstance(value, dict) and value:
                # e.g. "modle.kappa = 1" parses as a table named "modle"
                for k in value:
                    full = f"{top}.{k}"
                    bad.append((full, f"unknown key{_suggest(full, every)}"))
            else:
                bad.append((top, f"unknown section{_suggest(top, SECTIONS)}"))
        elif not isinstance(value, dict):
            bad.append((top, "must be a table"))
    sections = {k: v for k, v in doc.items() if k in SECTIONS and isinstance(v, dict)}
    for top, value in sections.items():
        if top == "tolerances":
            continue
        for k in value:
            if k not in SECTIONS[top]:
                full = f"{top}.{k}"
                bad.append((full, f"unknown key{_suggest(full, every)}"))
    known = lambda top: {k: v for k, v in sections.get(top, {}).items() if k in SECTIONS[top]}  # noqa: E731
    model = _validate_model(known("model"), bad)
    run = _validate_run(known("run"), bad)
    checks = _validate_checks(sections.get("checks", {}), bad)
    tol = _validate_tolerances(sections.get("tolerances", {}), bad)
    output = _validate_output(known("output"), bad)
    if bad:
        raise ConfigError(bad)
    return ScenarioConfig(
        model=ModelParams(**model),
        run=RunParams(**run),
        checks=checks.get("checks", CHECK_NAMES),
        tolerances=tol,
        output=OutputParams(**output),
    )


_LINE = re.compile(r"line (\d+)")


def parse_config_text(text: str) -> ScenarioConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LINE.search(str(exc))
        raise ConfigError([("<document>", str(exc))], line=int(m.group(1)) if m else None) from exc
    return config_from_dict(doc)


def parse_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([(str(p), f"cannot read config: {exc.strerror or exc}")]) from exc
    return parse_config_text(text)
