"""Patient-table ingestion, imputation, feature encoding and dose bucketing."""
from __future__ import annotations

import csv
import enum
import io
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, DomainError, ImputationError, SchemaError

N_FEATURES = 26

LOW_THRESHOLD = 21.0
HIGH_THRESHOLD = 49.0

# Positive stand-in for predicted doses that come out non-positive.
MIN_POSITIVE_DOSE = float(np.finfo(np.float64).tiny)

MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "none", "unknown"})


class DoseBucket(enum.IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2


class Race(enum.Enum):
    ASIAN = "Asian"
    BLACK = "BlackOrAfricanAmerican"
    WHITE = "White"
    MIXED_OR_MISSING = "MixedOrMissing"


class Gender(enum.Enum):
    MALE = "Male"
    FEMALE = "Female"
    MISSING = "Missing"


class Amiodarone(enum.Enum):
    YES = "Yes"
    NO = "No"
    MISSING = "Missing"


class Genotype(enum.Enum):
    AA = "AA"
    AG = "AG"
    GG = "GG"
    MISSING = "Missing"


@dataclass(frozen=True)
class PatientRecord:
    age_decades: int | None
    height_cm: float | None
    weight_kg: float | None
    race: Race = Race.MIXED_OR_MISSING
    gender: Gender = Gender.MISSING
    amiodarone: Amiodarone = Amiodarone.MISSING
    enzyme_inducer: bool = False
    vkorc1_genotype: Genotype = Genotype.MISSING
    vkorc1_qc_genotype: Genotype = Genotype.MISSING
    therapeutic_dose_mg_per_week: float | None = None

    @property
    def is_imputed(self) -> bool:
        return None not in (self.age_decades, self.height_cm, self.weight_kg)


def bucket_dose(dose: float) -> DoseBucket:
    """Map a weekly dose in mg to its bucket: <21 low, 21..49 medium, >49 high."""
    dose = float(dose)
    if not math.isfinite(dose) or dose <= 0.0:
        raise DomainError(f"dose must be positive and finite, got {dose!r}")
    if dose < LOW_THRESHOLD:
        return DoseBucket.LOW
    if dose <= HIGH_THRESHOLD:
        return DoseBucket.MEDIUM
    return DoseBucket.HIGH


def bucket_doses(doses) -> np.ndarray:
    doses = np.asarray(doses, dtype=np.float64)
    if doses.size and not (np.all(np.isfinite(doses)) and np.all(doses > 0)):
        raise DomainError("doses must be positive and finite")
    out = np.full(doses.shape, int(DoseBucket.MEDIUM), dtype=np.int64)
    out[doses < LOW_THRESHOLD] = DoseBucket.LOW
    out[doses > HIGH_THRESHOLD] = DoseBucket.HIGH
    return out


# -- parsing -----------------------------------------------------------------

VKORC1_COLUMN = "VKORC1 genotype: -1639 G>A (3673); chr16:31015190; rs9923231; C/T"
VKORC1_QC_COLUMN = "VKORC1 QC genotype: -1639 G>A (3673); chr16:31015190; rs9923231; C/T"

# Logical field -> column header in a PharmGKB/IWPC export.
DEFAULT_SCHEMA: dict[str, str | tuple[str, ...]] = {
    "dose": "Therapeutic Dose of Warfarin",
    "age": "Age",
    "height": "Height (cm)",
    "weight": "Weight (kg)",
    "race": "Race",
    "gender": "Gender",
    "amiodarone": "Amiodarone (Cordarone)",
    "enzyme_inducers": (
        "Carbamazepine (Tegretol)",
        "Phenytoin (Dilantin)",
        "Rifampin or Rifampicin",
    ),
    "vkorc1": VKORC1_COLUMN,
    "vkorc1_qc": VKORC1_QC_COLUMN,
}

HEIGHT_RANGE = (50.0, 300.0)
WEIGHT_RANGE = (20.0, 400.0)


@dataclass
class IngestReport:
    rows_read: int = 0
    retained: int = 0
    dropped_missing_dose: int = 0
    dropped_invalid_dose: int = 0
    missing: dict[str, int] = field(default_factory=dict)
    out_of_range: dict[str, int] = field(default_factory=dict)

    @property
    def dropped(self) -> int:
        return self.dropped_missing_dose + self.dropped_invalid_dose

    def to_text(self) -> str:
        lines = [
            f"rows_read={self.rows_read}",
            f"retained={self.retained}",
            f"dropped={self.dropped}",
            f"dropped_missing_dose={self.dropped_missing_dose}",
            f"dropped_invalid_dose={self.dropped_invalid_dose}",
        ]
        lines += [f"missing.{k}={v}" for k, v in self.missing.items()]
        lines += [f"out_of_range.{k}={v}" for k, v in self.out_of_range.items()]
        return "\n".join(lines) + "\n"


def resolve_schema(overrides: Mapping[str, object] | None = None) -> dict[str, str | tuple[str, ...]]:
    schema = dict(DEFAULT_SCHEMA)
    for key, value in (overrides or {}).items():
        if key not in DEFAULT_SCHEMA:
            raise ConfigurationError(f"unknown schema field {key!r}")
        if key == "enzyme_inducers":
            if isinstance(value, str):
                value = tuple(v.strip() for v in value.split("|") if v.strip())
            schema[key] = tuple(value)
        else:
            schema[key] = str(value)
    return schema


def _is_missing(cell: str | None) -> bool:
    return cell is None or cell.strip().lower() in MISSING_TOKENS


def parse_age(cell: str | None) -> int | None:
    """Decade index from "50 - 59", "90+" or a plain age in years."""
    if _is_missing(cell):
        return None
    text = cell.strip()
    m = re.match(r"^(\d+)\s*(?:-\s*\d+|\+)$", text)
    if m:
        return int(m.group(1)) // 10
    try:
        years = float(text)
    except ValueError:
        return None
    if not math.isfinite(years) or years < 0:
        return None
    return int(years // 10)


def _parse_float(cell: str | None) -> float | None:
    if _is_missing(cell):
        return None
    try:
        value = float(cell.strip())
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def parse_race(cell: str | None) -> Race:
    if _is_missing(cell):
        return Race.MIXED_OR_MISSING
    text = cell.strip().lower()
    if text == "asian":
        return Race.ASIAN
    if text.startswith("black"):
        return Race.BLACK
    if text == "white":
        return Race.WHITE
    return Race.MIXED_OR_MISSING


def parse_gender(cell: str | None) -> Gender:
    text = "" if cell is None else cell.strip().lower()
    if text in ("male", "m"):
        return Gender.MALE
    if text in ("female", "f"):
        return Gender.FEMALE
    return Gender.MISSING


def _parse_flag(cell: str | None) -> bool | None:
    if _is_missing(cell):
        return None
    text = cell.strip().lower()
    if text in ("1", "1.0", "yes", "y", "true"):
        return True
    if text in ("0", "0.0", "no", "n", "false"):
        return False
    return None


def parse_amiodarone(cell: str | None) -> Amiodarone:
    flag = _parse_flag(cell)
    if flag is None:
        return Amiodarone.MISSING
    return Amiodarone.YES if flag else Amiodarone.NO


def parse_genotype(cell: str | None) -> Genotype:
    if _is_missing(cell):
        return Genotype.MISSING
    alleles = "".join(sorted(ch for ch in cell.upper() if ch in "AG"))
    if len(alleles) != 2:
        return Genotype.MISSING
    return Genotype(alleles)


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def parse_patient_table(
    text: str, schema: Mapping[str, object] | None = None
) -> tuple[list[PatientRecord], IngestReport]:
    """Parse a delimited patient table into records.

    Rows without a usable therapeutic dose are dropped and counted; every
    other covariate may be missing and is kept as ``None`` or a Missing level.
    """
    schema = resolve_schema(schema)
    first_line = text.split("\n", 1)[0]
    reader = csv.reader(io.StringIO(text), delimiter=_sniff_delimiter(first_line))
    report = IngestReport()
    try:
        header = [h.strip().lstrip("﻿") for h in next(reader)]
    except StopIteration:
        raise SchemaError("table is empty: no header row") from None
    index = {name: i for i, name in enumerate(header)}

    def col(name: str) -> int:
        if name not in index:
            raise SchemaError(f"missing required column {name!r}")
        return index[name]

    scalar_fields = ("dose", "age", "height", "weight", "race", "gender",
                     "amiodarone", "vkorc1", "vkorc1_qc")
    cols = {key: col(schema[key]) for key in scalar_fields}
    inducer_cols = [col(name) for name in schema["enzyme_inducers"]]
    report.missing = {key: 0 for key in scalar_fields if key != "dose"}
    report.out_of_range = {"height": 0, "weight": 0}

    records: list[PatientRecord] = []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        report.rows_read += 1

        def cell(key_or_idx):
            i = cols[key_or_idx] if isinstance(key_or_idx, str) else key_or_idx
            return row[i] if i < len(row) else None

        dose_cell = cell("dose")
        if _is_missing(dose_cell):
            report.dropped_missing_dose += 1
            continue
        dose = _parse_float(dose_cell)
        if dose is None or dose <= 0.0:
            report.dropped_invalid_dose += 1
            continue

        age = parse_age(cell("age"))
        height = _parse_float(cell("height"))
        weight = _parse_float(cell("weight"))
        if height is not None and not HEIGHT_RANGE[0] < height < HEIGHT_RANGE[1]:
            report.out_of_range["height"] += 1
            height = None
        if weight is not None and not WEIGHT_RANGE[0] < weight < WEIGHT_RANGE[1]:
            report.out_of_range["weight"] += 1
            weight = None

        rec = PatientRecord(
            age_decades=age,
            height_cm=height,
            weight_kg=weight,
            race=parse_race(cell("race")),
            gender=parse_gender(cell("gender")),
            amiodarone=parse_amiodarone(cell("amiodarone")),
            enzyme_inducer=any(_parse_flag(cell(i)) for i in inducer_cols),
            vkorc1_genotype=parse_genotype(cell("vkorc1")),
            vkorc1_qc_genotype=parse_genotype(cell("vkorc1_qc")),
            therapeutic_dose_mg_per_week=dose,
        )
        for key, missing in (
            ("age", rec.age_decades is None),
            ("height", rec.height_cm is None),
            ("weight", rec.weight_kg is None),
            ("race", rec.race is Race.MIXED_OR_MISSING),
            ("gender", rec.gender is Gender.MISSING),
            ("amiodarone", rec.amiodarone is Amiodarone.MISSING),
            ("vkorc1", rec.vkorc1_genotype is Genotype.MISSING),
            ("vkorc1_qc", rec.vkorc1_qc_genotype is Genotype.MISSING),
        ):
            report.missing[key] += missing
        records.append(rec)

    report.retained = len(records)
    return records, report


def read_patient_table(path, schema=None):
    """Read a patient table from disk (UTF-8)."""
    text = Path(path).read_text(encoding="utf-8-sig")
    return parse_patient_table(text, schema)


def _format_age(decade: int | None) -> str:
    if decade is None:
        return ""
    if decade >= 9:
        return "90+"
    return f"{decade * 10} - {decade * 10 + 9}"


_RACE_TEXT = {
    Race.ASIAN: "Asian",
    Race.BLACK: "Black or African American",
    Race.WHITE: "White",
    Race.MIXED_OR_MISSING: "Unknown",
}
_GENDER_TEXT = {Gender.MALE: "male", Gender.FEMALE: "female", Gender.MISSING: ""}
_AMIODARONE_TEXT = {Amiodarone.YES: "1", Amiodarone.NO: "0", Amiodarone.MISSING: ""}
_GENOTYPE_TEXT = {Genotype.AA: "A/A", Genotype.AG: "A/G", Genotype.GG: "G/G", Genotype.MISSING: ""}


def _format_float(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_patient_table(records: Iterable[PatientRecord], stream, schema=None, delimiter=",") -> None:
    """Write records in the dialect ``parse_patient_table`` reads back losslessly."""
    schema = resolve_schema(schema)
    inducers = list(schema["enzyme_inducers"])
    header = [schema[k] for k in ("age", "gender", "race", "height", "weight", "amiodarone")]
    header += inducers + [schema["vkorc1"], schema["vkorc1_qc"], schema["dose"]]
    writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    for r in records:
        flags = ["1" if r.enzyme_inducer and i == 0 else "0" for i in range(len(inducers))]
        writer.writerow(
            [
                _format_age(r.age_decades),
                _GENDER_TEXT[r.gender],
                _RACE_TEXT[r.race],
                _format_float(r.height_cm),
                _format_float(r.weight_kg),
                _AMIODARONE_TEXT[r.amiodarone],
                *flags,
                _GENOTYPE_TEXT[r.vkorc1_genotype],
                _GENOTYPE_TEXT[r.vkorc1_qc_genotype],
                _format_float(r.therapeutic_dose_mg_per_week),
            ]
        )


# -- imputation ----------------------------------------------------------------

def impute(records: Sequence[PatientRecord]) -> list[PatientRecord]:
    """Fill missing age with the modal decade and height/weight with their means.

    Statistics come from the whole list. Categorical Missing levels are kept
    as categories of their own.
    """
    records = list(records)
    if not records:
        return []
    ages = [r.age_decades for r in records if r.age_decades is not None]
    heights = [r.height_cm for r in records if r.height_cm is not None]
    weights = [r.weight_kg for r in records if r.weight_kg is not None]
    for name, present in (("age", ages), ("height", heights), ("weight", weights)):
        if not present:
            raise ImputationError(f"column {name!r} is missing for every record")

    counts = Counter(ages)
    top = max(counts.values())
    mode_age = min(a for a, c in counts.items() if c == top)
    mean_height = math.fsum(heights) / len(heights)
    mean_weight = math.fsum(weights) / len(weights)

    out = []
    for r in records:
        if r.is_imputed:
            out.append(r)
            continue
        out.append(
            replace(
                r,
                age_decades=mode_age if r.age_decades is None else r.age_decades,
                height_cm=mean_height if r.height_cm is None else r.height_cm,
                weight_kg=mean_weight if r.weight_kg is None else r.weight_kg,
            )
        )
    return out


# -- encoding ------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    name: str
    kind: str  # "numeric" or "one-hot"
    levels: tuple[str, ...] = ()

    @property
    def width(self) -> int:
        return len(self.levels) if self.kind == "one-hot" else 1

    def column_names(self) -> list[str]:
        if self.kind == "one-hot":
            return [f"{self.name}={lvl}" for lvl in self.levels]
        return [self.name]


_NUMERIC = ("age_decades", "height_cm", "weight_kg", "enzyme_inducer", "bias")
_ONE_HOT = {
    "race": tuple(r.value for r in (Race.ASIAN, Race.BLACK, Race.MIXED_OR_MISSING, Race.WHITE)),
    "amiodarone": tuple(a.value for a in Amiodarone),
    "gender": tuple(g.value for g in Gender),
    "vkorc1": tuple(g.value for g in Genotype),
    "vkorc1_qc": tuple(g.value for g in Genotype),
}


def make_block(name: str) -> Block:
    if name in _ONE_HOT:
        return Block(name, "one-hot", _ONE_HOT[name])
    if name in _NUMERIC or name.startswith("reserved"):
        return Block(name, "numeric")
    raise ConfigurationError(f"unknown feature block {name!r}")


@dataclass(frozen=True)
class EncodingManifest:
    blocks: tuple[Block, ...]

    def __post_init__(self):
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate block names in manifest: {names}")

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "EncodingManifest":
        return cls(tuple(make_block(n) for n in names))

    @property
    def width(self) -> int:
        return sum(b.width for b in self.blocks)

    @property
    def names(self) -> list[str]:
        return [b.name for b in self.blocks]

    def column_names(self) -> list[str]:
        return [c for b in self.blocks for c in b.column_names()]

    def column_index(self, column: str) -> int:
        try:
            return self.column_names().index(column)
        except ValueError:
            raise ConfigurationError(f"manifest has no column {column!r}") from None

    def slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for b in self.blocks:
            out[b.name] = slice(start, start + b.width)
            start += b.width
        return out

    def validate(self) -> None:
        if self.width != N_FEATURES:
            raise ConfigurationError(
                f"manifest width is {self.width}, expected {N_FEATURES}"
            )


DEFAULT_BLOCK_NAMES = (
    "age_decades", "height_cm", "weight_kg", "race", "amiodarone", "gender",
    "vkorc1", "vkorc1_qc", "enzyme_inducer", "bias",
    "reserved_1", "reserved_2", "reserved_3",
)
DEFAULT_MANIFEST = EncodingManifest.from_names(DEFAULT_BLOCK_NAMES)


def _categorical_value(record: PatientRecord, name: str) -> str:
    return {
        "race": record.race,
        "amiodarone": record.amiodarone,
        "gender": record.gender,
        "vkorc1": record.vkorc1_genotype,
        "vkorc1_qc": record.vkorc1_qc_genotype,
    }[name].value


def _numeric_value(record: PatientRecord, name: str) -> float:
    if name == "bias":
        return 1.0
    if name.startswith("reserved"):
        return 0.0
    if name == "enzyme_inducer":
        return 1.0 if record.enzyme_inducer else 0.0
    value = getattr(record, name)
    if value is None:
        raise DataError(f"record has no {name}; impute before encoding")
    return float(value)


def encode_features(record: PatientRecord, manifest: EncodingManifest = DEFAULT_MANIFEST) -> np.ndarray:
    manifest.validate()
    out = np.zeros(N_FEATURES)
    pos = 0
    for block in manifest.blocks:
        if block.kind == "one-hot":
            out[pos + block.levels.index(_categorical_value(record, block.name))] = 1.0
        else:
            out[pos] = _numeric_value(record, block.name)
        pos += block.width
    return out


def encode_all(records: Sequence[PatientRecord], manifest: EncodingManifest = DEFAULT_MANIFEST) -> np.ndarray:
    manifest.validate()
    X = np.zeros((len(records), N_FEATURES))
    for i, r in enumerate(records):
        X[i] = encode_features(r, manifest)
    return X


@dataclass
class WarfarinDataset:
    """Encoded replay data: contexts, true buckets and true weekly doses."""

    X: np.ndarray
    buckets: np.ndarray
    doses: np.ndarray
    manifest: EncodingManifest = DEFAULT_MANIFEST
    records: list[PatientRecord] | None = None

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.buckets = np.asarray(self.buckets, dtype=np.int64)
        self.doses = np.asarray(self.doses, dtype=np.float64)
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.buckets.shape != (n,) or self.doses.shape != (n,):
            raise DataError("dataset arrays are not aligned")

    def __len__(self) -> int:
        return self.X.shape[0]

    @classmethod
    def from_records(cls, records, manifest: EncodingManifest = DEFAULT_MANIFEST) -> "WarfarinDataset":
        records = impute(records)
        doses = np.array([r.therapeutic_dose_mg_per_week for r in records], dtype=np.float64)
        return cls(encode_all(records, manifest), bucket_doses(doses), doses, manifest, records)


def load_dataset(path, schema=None, manifest: EncodingManifest = DEFAULT_MANIFEST):
    records, report = read_patient_table(path, schema)
    if not records:
        raise DataError(f"{path}: no patients with a therapeutic dose")
    return WarfarinDataset.from_records(records, manifest), report


# -- synthetic data --------------------------------------------------------------

# Weekly-dose model for synthetic patients, by manifest column.
DEFAULT_DOSE_WEIGHTS = {
    "bias": 20.0,
    "age_decades": -3.0,
    "height_cm": 0.1,
    "weight_kg": 0.2,
    "race=Asian": -8.0,
    "race=BlackOrAfricanAmerican": 5.0,
    "vkorc1=AA": -10.0,
    "vkorc1=AG": -4.0,
    "vkorc1=GG": 6.0,
    "amiodarone=Yes": -8.0,
    "enzyme_inducer": 12.0,
}


def default_dose_theta(manifest: EncodingManifest = DEFAULT_MANIFEST) -> np.ndarray:
    theta = np.zeros(N_FEATURES)
    for column, w in DEFAULT_DOSE_WEIGHTS.items():
        theta[manifest.column_index(column)] = w
    return theta


def generate_synthetic_records(
    n: int,
    seed: int,
    dose_theta=None,
    noise_sd: float = 0.0,
    manifest: EncodingManifest = DEFAULT_MANIFEST,
) -> list[PatientRecord]:
    """Draw ``n`` complete synthetic patients whose dose is linear in their encoding."""
    if n < 0:
        raise DomainError("n must be non-negative")
    if noise_sd < 0:
        raise DomainError("noise_sd must be non-negative")
    theta = default_dose_theta(manifest) if dose_theta is None else np.asarray(dose_theta, dtype=np.float64)
    if theta.shape != (N_FEATURES,):
        raise DomainError(f"dose_theta must have length {N_FEATURES}")
    rng = np.random.default_rng(seed)
    ages = rng.choice(np.arange(2, 10), size=n, p=[0.03, 0.06, 0.12, 0.2, 0.25, 0.2, 0.1, 0.04])
    heights = np.round(np.clip(rng.normal(168.0, 10.0, n), 140.0, 200.0), 2)
    weights = np.round(np.clip(rng.normal(78.0, 18.0, n), 40.0, 160.0), 2)
    races = rng.choice(list(Race), size=n, p=[0.3, 0.1, 0.5, 0.1])
    genders = rng.choice(list(Gender), size=n, p=[0.55, 0.43, 0.02])
    amio = rng.choice(list(Amiodarone), size=n, p=[0.07, 0.8, 0.13])
    inducer = rng.random(n) < 0.03
    geno = rng.choice([Genotype.AA, Genotype.AG, Genotype.GG, Genotype.MISSING], size=n, p=[0.3, 0.3, 0.25, 0.15])
    qc_present = rng.random(n) < 0.3
    noise = rng.standard_normal(n) * noise_sd

    records = []
    for i in range(n):
        rec = PatientRecord(
            age_decades=int(ages[i]),
            height_cm=float(heights[i]),
            weight_kg=float(weights[i]),
            race=races[i],
            gender=genders[i],
            amiodarone=amio[i],
            enzyme_inducer=bool(inducer[i]),
            vkorc1_genotype=geno[i],
            vkorc1_qc_genotype=geno[i] if qc_present[i] else Genotype.MISSING,
        )
        dose = float(encode_features(rec, manifest) @ theta + noise[i])
        records.append(replace(rec, therapeutic_dose_mg_per_week=max(dose, MIN_POSITIVE_DOSE)))
    return records


def generate_synthetic(
    n: int,
    seed: int,
    dose_theta=None,
    noise_sd: float = 0.0,
    manifest: EncodingManifest = DEFAULT_MANIFEST,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Contexts, buckets and doses for ``n`` synthetic patients; pure in its arguments."""
    records = generate_synthetic_records(n, seed, dose_theta, noise_sd, manifest)
    doses = np.array([r.therapeutic_dose_mg_per_week for r in records], dtype=np.float64)
    return encode_all(records, manifest), bucket_doses(doses), doses
