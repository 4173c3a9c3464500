"""Dosing policies: fixed, clinical linear, LinUCB and online supervised regression.

Every policy exposes ``select(x) -> DoseBucket`` and
``update(x, chosen, reward, true_dose=None)``. Instances are single-threaded.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .dataset import (
    DEFAULT_MANIFEST,
    MIN_POSITIVE_DOSE,
    N_FEATURES,
    Amiodarone,
    DoseBucket,
    EncodingManifest,
    PatientRecord,
    Race,
    bucket_dose,
)
from .errors import ConfigurationError, DataError, DomainError, NumericError, PolicyError
from .linalg import RESYMMETRIZE_EVERY, solve_spd, symmetrize

N_ARMS = len(DoseBucket)


def _context(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def _dose_to_bucket(dose: float) -> DoseBucket:
    if not math.isfinite(dose):
        raise NumericError(f"predicted dose is not finite: {dose}")
    return bucket_dose(max(dose, MIN_POSITIVE_DOSE))


# -- fixed dose --------------------------------------------------------------

FIXED_DOSE_MG_PER_WEEK = 35.0


def fixed_select() -> DoseBucket:
    return bucket_dose(FIXED_DOSE_MG_PER_WEEK)


class FixedPolicy:
    kind = "fixed"

    def select(self, x=None) -> DoseBucket:
        return fixed_select()

    def update(self, x, chosen, reward, true_dose=None) -> None:
        pass


# -- clinical linear baseline ------------------------------------------------------

@dataclass(frozen=True)
class ClinicalCoefficients:
    intercept: float
    age_decades: float
    height_cm: float
    weight_kg: float
    asian: float
    black: float
    mixed_or_missing_race: float
    enzyme_inducer: float
    amiodarone: float

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ConfigurationError(f"clinical coefficient {f.name} is not finite")

    @classmethod
    def from_mapping(cls, values) -> "ClinicalCoefficients":
        names = [f.name for f in fields(cls)]
        missing = [n for n in names if n not in values]
        if missing:
            raise ConfigurationError(f"clinical coefficients missing {missing}")
        try:
            return cls(**{n: float(values[n]) for n in names})
        except ValueError as exc:
            raise ConfigurationError(f"clinical coefficients: {exc}") from None


def load_clinical_coefficients(path=None) -> ClinicalCoefficients:
    """Read the ``[clinical]`` section of an INI file; the bundled IWPC values by default."""
    parser = configparser.ConfigParser()
    if path is None:
        parser.read_string(resources.files(__package__).joinpath("data/iwpc_clinical.ini").read_text())
    else:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"clinical coefficients file not found: {path}")
        parser.read(path)
    if not parser.has_section("clinical"):
        raise ConfigurationError("clinical coefficients file has no [clinical] section")
    return ClinicalCoefficients.from_mapping(dict(parser["clinical"]))


def clinical_sqrt_dose(record: PatientRecord, coeffs: ClinicalCoefficients) -> float:
    if not record.is_imputed:
        raise DataError("clinical dosing needs an imputed record")
    return (
        coeffs.intercept
        + coeffs.age_decades * record.age_decades
        + coeffs.height_cm * record.height_cm
        + coeffs.weight_kg * record.weight_kg
        + coeffs.asian * (record.race is Race.ASIAN)
        + coeffs.black * (record.race is Race.BLACK)
        + coeffs.mixed_or_missing_race * (record.race is Race.MIXED_OR_MISSING)
        + coeffs.enzyme_inducer * record.enzyme_inducer
        + coeffs.amiodarone * (record.amiodarone is Amiodarone.YES)
    )


def _sqrt_to_bucket(s: float) -> DoseBucket:
    if not math.isfinite(s):
        raise NumericError(f"predicted sqrt dose is not finite: {s}")
    return _dose_to_bucket(s * s if s > 0 else MIN_POSITIVE_DOSE)


def clinical_select(record: PatientRecord, coeffs: ClinicalCoefficients) -> DoseBucket:
    return _sqrt_to_bucket(clinical_sqrt_dose(record, coeffs))


_CLINICAL_COLUMNS = {
    "age_decades": "age_decades",
    "height_cm": "height_cm",
    "weight_kg": "weight_kg",
    "asian": "race=Asian",
    "black": "race=BlackOrAfricanAmerican",
    "mixed_or_missing_race": "race=MixedOrMissing",
    "enzyme_inducer": "enzyme_inducer",
    "amiodarone": "amiodarone=Yes",
}


class ClinicalPolicy:
    """The clinical formula applied to an encoded context.

    The manifest must carry every column the formula reads.
    """

    kind = "clinical"

    def __init__(self, coeffs: ClinicalCoefficients | None = None, manifest: EncodingManifest = DEFAULT_MANIFEST):
        self.coeffs = coeffs or load_clinical_coefficients()
        self.weights = np.zeros(manifest.width)
        for attr, column in _CLINICAL_COLUMNS.items():
            self.weights[manifest.column_index(column)] = getattr(self.coeffs, attr)

    def select(self, x) -> DoseBucket:
        return _sqrt_to_bucket(self.coeffs.intercept + float(self.weights @ x))

    def update(self, x, chosen, reward, true_dose=None) -> None:
        pass


# -- LinUCB ----------------------------------------------------------------------

class LinUCBPolicy:
    """Disjoint LinUCB: one ridge model of reward per arm plus an optimism bonus.

    ``incremental=True`` keeps each arm's inverse design matrix current with
    Sherman-Morrison updates; ``False`` refactorizes ``A_a`` at every select.
    """

    kind = "linucb"

    def __init__(self, d: int = N_FEATURES, alpha: float = 1.0, n_arms: int = N_ARMS, incremental: bool = True):
        if not alpha >= 0 or not math.isfinite(alpha):
            raise ConfigurationError(f"alpha must be a finite non-negative number, got {alpha}")
        self.d = d
        self.alpha = float(alpha)
        self.n_arms = n_arms
        self.incremental = incremental
        self.A = np.tile(np.eye(d), (n_arms, 1, 1))
        self.A_inv = np.tile(np.eye(d), (n_arms, 1, 1))
        self.b = np.zeros((n_arms, d))
        self.counts = np.zeros(n_arms, dtype=np.int64)

    def scores(self, x) -> np.ndarray:
        x = _context(x)
        if self.incremental:
            return kernels.ucb_scores(self.A_inv, self.b, x, self.alpha)
        p = np.empty(self.n_arms)
        for a in range(self.n_arms):
            theta = solve_spd(self.A[a], self.b[a])
            p[a] = x @ theta + self.alpha * math.sqrt(max(float(x @ solve_spd(self.A[a], x)), 0.0))
        return p

    def select(self, x) -> DoseBucket:
        p = self.scores(x)
        if not np.all(np.isfinite(p)):
            raise PolicyError(f"non-finite UCB scores {p}", policy=self.kind)
        return DoseBucket(int(np.argmax(p)))

    def update(self, x, chosen, reward, true_dose=None) -> None:
        x = _context(x)
        a = int(chosen)
        kernels.accumulate(self.A[a], self.b[a], x, float(reward))
        denom = kernels.sherman_morrison(self.A_inv[a], x)
        if not denom > 0.0:
            raise NumericError(f"arm {a}: Sherman-Morrison denominator {denom} is not positive")
        self.counts[a] += 1
        if self.counts[a] % RESYMMETRIZE_EVERY == 0:
            symmetrize(self.A_inv[a])


# -- online supervised regression ---------------------------------------------------------

class RegressionPolicy:
    """Ridge regression of the true weekly dose on all contexts seen so far.

    ``target="sqrt"`` regresses the square root of the dose instead. Before
    ``warmup`` observations the policy plays ``warmup_default``.
    """

    kind = "regression"

    def __init__(
        self,
        d: int = N_FEATURES,
        ridge: float = 1.0,
        warmup: int = 1,
        target: str = "dose",
        warmup_default: DoseBucket = DoseBucket.MEDIUM,
    ):
        if not ridge >= 0:
            raise ConfigurationError(f"ridge must be non-negative, got {ridge}")
        if target not in ("dose", "sqrt"):
            raise ConfigurationError(f"target must be 'dose' or 'sqrt', got {target!r}")
        self.d = d
        self.ridge = float(ridge)
        self.warmup = int(warmup)
        self.target = target
        self.warmup_default = DoseBucket(warmup_default)
        self.xtx = np.zeros((d, d))
        self.xty = np.zeros(d)
        self.count = 0

    def coefficients(self) -> np.ndarray:
        gram = self.xtx.copy()
        gram[np.diag_indices_from(gram)] += self.ridge
        L, status = kernels.cholesky(gram)
        if status >= 0:
            raise PolicyError("singular normal equations; use a positive ridge", policy=self.kind)
        return kernels.cholesky_solve(L, self.xty)

    def predict_dose(self, x) -> float:
        pred = float(_context(x) @ self.coefficients())
        if self.target == "sqrt":
            return pred * pred if pred > 0 else MIN_POSITIVE_DOSE
        return pred

    def select(self, x) -> DoseBucket:
        if self.count < self.warmup:
            return self.warmup_default
        return _dose_to_bucket(self.predict_dose(x))

    def update(self, x, chosen=None, reward=None, true_dose=None) -> None:
        if true_dose is None or not true_dose > 0 or not math.isfinite(true_dose):
            raise DomainError(f"true dose must be positive, got {true_dose!r}")
        y = math.sqrt(true_dose) if self.target == "sqrt" else float(true_dose)
        kernels.accumulate(self.xtx, self.xty, _context(x), y)
        self.count += 1


# -- construction from config ---------------------------------------------------------

POLICY_KINDS = ("fixed", "clinical", "linucb", "regression")


@dataclass(frozen=True)
class PolicySpec:
    """A named, buildable policy configuration."""

    kind: str
    name: str = ""
    alpha: float = 1.0
    incremental: bool = True
    ridge: float = 1.0
    warmup: int = 1
    target: str = "dose"
    coefficients: str | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigurationError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_KINDS}")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    def build(self, manifest: EncodingManifest = DEFAULT_MANIFEST):
        d = manifest.width
        if self.kind == "fixed":
            return FixedPolicy()
        if self.kind == "clinical":
            return ClinicalPolicy(load_clinical_coefficients(self.coefficients), manifest)
        if self.kind == "linucb":
            return LinUCBPolicy(d, alpha=self.alpha, incremental=self.incremental)
        return RegressionPolicy(d, ridge=self.ridge, warmup=self.warmup, target=self.target)

    def as_dict(self) -> dict:
        return asdict(self)
