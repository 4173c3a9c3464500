"""Experiment configuration: one INI file, nesting by sections.

Example::

    [data]
    # either a table path, or synthetic_n / synthetic_seed / synthetic_noise_sd
    path = warfarin.csv

    # optional column-name overrides; enzyme_inducers is "|"-separated
    [schema]
    dose = Therapeutic Dose of Warfarin

    # optional block order, must total 26 columns
    [encoding]
    blocks = age_decades, height_cm, weight_kg, race, amiodarone, gender, ...

    # structure: standard (correct/incorrect), reshaped (R, near_miss = half|square),
    # or custom (nine cells low_low ... high_high)
    [reward]
    structure = reshaped
    R = 1.5

    [experiment]
    n_runs = 20
    seed = 0
    output_dir = out
    stride = 1
    episode_csv = false
    n_jobs = 1
    level = 0.95

    # one section per policy, run in file order
    [policy:linucb]
    kind = linucb
    alpha = 1.0

Comments go on their own lines (column names may contain ";").
Relative paths resolve against the config file's directory. Any key can be
overridden as ``section.key=value``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .dataset import DEFAULT_MANIFEST, EncodingManifest, resolve_schema
from .errors import ConfigurationError, DomainError
from .policies import PolicySpec
from .reward import RewardTable, reshaped_table, standard_table, table_from_cells

_SECTIONS = ("data", "schema", "encoding", "reward", "experiment")
_REWARD_CELLS = [f"{t}_{c}" for t in ("low", "medium", "high") for c in ("low", "medium", "high")]


@dataclass
class SyntheticSpec:
    n: int
    seed: int
    noise_sd: float = 0.0


@dataclass
class ExperimentConfig:
    data_path: Path | None
    synthetic: SyntheticSpec | None
    policies: list[PolicySpec]
    reward: RewardTable = field(default_factory=standard_table)
    schema: dict = field(default_factory=resolve_schema)
    manifest: EncodingManifest = DEFAULT_MANIFEST
    n_runs: int = 20
    seed: int = 0
    output_dir: Path = Path("out")
    stride: int = 1
    episode_csv: bool = False
    n_jobs: int = 1
    level: float = 0.95


def apply_overrides(parser: configparser.ConfigParser, overrides: Iterable[str]) -> None:
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().rpartition(".")
        if not sep or not dot or not section or not option:
            raise ConfigurationError(f"override must look like section.key=value, got {item!r}")
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][option] = value.strip()


def read_parser(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
        except configparser.Error as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
    return parser


def _get(section, key, conv, default):
    if section is None or key not in section:
        return default
    raw = section[key]
    try:
        if conv is bool:
            return section.getboolean(key)
        return conv(raw)
    except ValueError:
        raise ConfigurationError(f"[{section.name}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def parse_reward(section) -> RewardTable:
    structure = _get(section, "structure", str, "standard").strip().lower()
    if structure == "standard":
        return standard_table(_get(section, "correct", float, 0.0), _get(section, "incorrect", float, -1.0))
    if structure == "reshaped":
        R = _get(section, "r", float, 1.5)
        try:
            return reshaped_table(R, _get(section, "near_miss", str, "half").strip().lower())
        except DomainError as exc:
            raise ConfigurationError(str(exc)) from None
    if structure == "custom":
        return table_from_cells({k: section[k] for k in _REWARD_CELLS if k in section})
    raise ConfigurationError(f"unknown reward structure {structure!r}")


def parse_policy(name: str, section, base: Path) -> PolicySpec:
    kind = _get(section, "kind", str, name).strip().lower()
    coeffs = _get(section, "coefficients", str, None)
    if coeffs is not None:
        coeffs = _resolve(base, coeffs)
        if not coeffs.is_file():
            raise ConfigurationError(f"[{section.name}] coefficients file not found: {coeffs}")
        coeffs = str(coeffs)
    return PolicySpec(
        kind=kind,
        name=name,
        alpha=_get(section, "alpha", float, 1.0),
        incremental=_get(section, "incremental", bool, True),
        ridge=_get(section, "ridge", float, 1.0),
        warmup=_get(section, "warmup", int, 1),
        target=_get(section, "target", str, "dose").strip().lower(),
        coefficients=coeffs,
    )


def load_config(path, overrides: Iterable[str] = ()) -> ExperimentConfig:
    parser = read_parser(path)
    apply_overrides(parser, overrides)
    base = Path(path).resolve().parent if path is not None else Path.cwd()
    sec = {name: parser[name] if parser.has_section(name) else None for name in _SECTIONS}

    data = sec["data"]
    data_path = _get(data, "path", str, None)
    synthetic = None
    if data_path is not None:
        data_path = _resolve(base, data_path)
        if not data_path.is_file():
            raise ConfigurationError(f"dataset not found: {data_path}")
    elif data is not None and "synthetic_n" in data:
        synthetic = SyntheticSpec(
            n=_get(data, "synthetic_n", int, 0),
            seed=_get(data, "synthetic_seed", int, 0),
            noise_sd=_get(data, "synthetic_noise_sd", float, 0.0),
        )
        if synthetic.n <= 0 or synthetic.noise_sd < 0:
            raise ConfigurationError("synthetic_n must be positive and synthetic_noise_sd non-negative")
    else:
        raise ConfigurationError("[data] needs either path or synthetic_n")

    schema = resolve_schema(dict(sec["schema"]) if sec["schema"] is not None else None)

    manifest = DEFAULT_MANIFEST
    blocks = _get(sec["encoding"], "blocks", str, None)
    if blocks is not None:
        manifest = EncodingManifest.from_names(b.strip() for b in blocks.split(",") if b.strip())
        manifest.validate()

    policies = [
        parse_policy(s.split(":", 1)[1].strip(), parser[s], base)
        for s in parser.sections()
        if s.startswith("policy:")
    ]
    if not policies:
        raise ConfigurationError("config defines no [policy:NAME] sections")
    if len({p.name for p in policies}) != len(policies):
        raise ConfigurationError("policy names must be unique")

    exp = sec["experiment"]
    cfg = ExperimentConfig(
        data_path=data_path,
        synthetic=synthetic,
        policies=policies,
        reward=parse_reward(sec["reward"]),
        schema=schema,
        manifest=manifest,
        n_runs=_get(exp, "n_runs", int, 20),
        seed=_get(exp, "seed", int, 0),
        output_dir=_resolve(base, _get(exp, "output_dir", str, "out")),
        stride=_get(exp, "stride", int, 1),
        episode_csv=_get(exp, "episode_csv", bool, False),
        n_jobs=_get(exp, "n_jobs", int, 1),
        level=_get(exp, "level", float, 0.95),
    )
    if cfg.n_runs < 2:
        raise ConfigurationError("n_runs must be at least 2")
    if cfg.stride < 1 or cfg.n_jobs < 1:
        raise ConfigurationError("stride and n_jobs must be positive")
    if not 0 < cfg.level < 1:
        raise ConfigurationError("level must lie in (0, 1)")
    return cfg
