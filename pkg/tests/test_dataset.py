import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warfarin_bandits.dataset import (
    DEFAULT_MANIFEST,
    DEFAULT_SCHEMA,
    N_FEATURES,
    Amiodarone,
    DoseBucket,
    EncodingManifest,
    Gender,
    Genotype,
    PatientRecord,
    Race,
    bucket_dose,
    bucket_doses,
    encode_features,
    generate_synthetic,
    generate_synthetic_records,
    impute,
    parse_age,
    parse_patient_table,
    write_patient_table,
)
from warfarin_bandits.errors import ConfigurationError, DomainError, ImputationError, SchemaError
from oracles import bucket_by_thresholds

HEADER = ",".join(
    [DEFAULT_SCHEMA["age"], DEFAULT_SCHEMA["height"], DEFAULT_SCHEMA["weight"], DEFAULT_SCHEMA["race"],
     DEFAULT_SCHEMA["gender"], DEFAULT_SCHEMA["amiodarone"], *DEFAULT_SCHEMA["enzyme_inducers"],
     f'"{DEFAULT_SCHEMA["vkorc1"]}"', f'"{DEFAULT_SCHEMA["vkorc1_qc"]}"', DEFAULT_SCHEMA["dose"]]
)


def make_record(**kw):
    base = dict(age_decades=5, height_cm=170.0, weight_kg=80.0, race=Race.WHITE, gender=Gender.MALE,
                amiodarone=Amiodarone.NO, enzyme_inducer=False, vkorc1_genotype=Genotype.AG,
                vkorc1_qc_genotype=Genotype.MISSING, therapeutic_dose_mg_per_week=35.0)
    base.update(kw)
    return PatientRecord(**base)


record_strategy = st.builds(
    PatientRecord,
    age_decades=st.one_of(st.none(), st.integers(0, 9)),
    height_cm=st.one_of(st.none(), st.floats(120, 210)),
    weight_kg=st.one_of(st.none(), st.floats(30, 200)),
    race=st.sampled_from(Race),
    gender=st.sampled_from(Gender),
    amiodarone=st.sampled_from(Amiodarone),
    enzyme_inducer=st.booleans(),
    vkorc1_genotype=st.sampled_from(Genotype),
    vkorc1_qc_genotype=st.sampled_from(Genotype),
    therapeutic_dose_mg_per_week=st.floats(1, 150),
)


# -- bucketing ----------------------------------------------------------------

@pytest.mark.parametrize(
    "dose, bucket",
    [(35, DoseBucket.MEDIUM), (21, DoseBucket.MEDIUM), (20.999, DoseBucket.LOW),
     (49, DoseBucket.MEDIUM), (49.001, DoseBucket.HIGH), (1e-300, DoseBucket.LOW)],
)
def test_bucket_dose_boundaries(dose, bucket):
    assert bucket_dose(dose) is bucket


@pytest.mark.parametrize("dose", [0.0, -1.0, math.inf, math.nan])
def test_bucket_dose_rejects_bad_dose(dose):
    with pytest.raises(DomainError):
        bucket_dose(dose)


@given(st.floats(min_value=1e-6, max_value=1e4), st.floats(min_value=0, max_value=100))
def test_bucketing_is_a_monotone_partition(dose, delta):
    assert bucket_dose(dose) == bucket_by_thresholds(dose)
    assert bucket_dose(dose + delta) >= bucket_dose(dose)


def test_bucket_doses_vectorized_agrees():
    doses = np.linspace(0.5, 120, 997)
    assert list(bucket_doses(doses)) == [bucket_dose(d) for d in doses]


# -- parsing -------------------------------------------------------------------

def test_three_row_fixture(fixtures_dir):
    text = (fixtures_dir / "three_rows.csv").read_text()
    records, report = parse_patient_table(text)
    assert len(records) == 2
    assert report.dropped == 1 and report.dropped_missing_dose == 1
    assert report.rows_read == 3
    first, second = records
    assert first.age_decades == 5 and first.race is Race.WHITE and first.gender is Gender.MALE
    assert first.vkorc1_genotype is Genotype.AG and first.vkorc1_qc_genotype is Genotype.MISSING
    assert first.amiodarone is Amiodarone.NO and not first.enzyme_inducer
    assert second.race is Race.BLACK and second.weight_kg is None and second.height_cm == 160.0
    assert second.amiodarone is Amiodarone.MISSING
    assert second.therapeutic_dose_mg_per_week == 52.5
    assert report.missing["weight"] == 1 and report.missing["height"] == 0


def test_header_only_table():
    records, report = parse_patient_table(HEADER + "\n")
    assert records == [] and report.retained == 0 and report.dropped == 0 and report.rows_read == 0


def test_missing_column_is_named():
    with pytest.raises(SchemaError, match="Height"):
        parse_patient_table(HEADER.replace("Height (cm)", "Stature") + "\n")


def test_unparseable_dose_is_counted_not_fatal():
    rows = [HEADER, "50 - 59,170,80,White,male,0,0,0,0,A/G,,abc",
            "50 - 59,170,80,White,male,0,0,0,0,A/G,,-3", "50 - 59,170,80,White,male,0,0,0,0,A/G,,30"]
    records, report = parse_patient_table("\n".join(rows) + "\n")
    assert len(records) == 1
    assert report.dropped_invalid_dose == 2 and report.dropped == 2


def test_tab_delimiter_detected():
    text = HEADER.replace(",", "\t").replace('"', "") + "\n" + "\t".join(
        ["90+", "150", "60", "Asian", "female", "1", "0", "0", "1", "A/A", "G/G", "14"]) + "\n"
    (rec,), _ = parse_patient_table(text)
    assert rec.age_decades == 9 and rec.enzyme_inducer and rec.amiodarone is Amiodarone.YES
    assert rec.vkorc1_qc_genotype is Genotype.GG


def test_out_of_range_height_becomes_missing():
    text = HEADER + "\n" + "50 - 59,500,80,White,male,0,0,0,0,A/G,,30\n"
    (rec,), report = parse_patient_table(text)
    assert rec.height_cm is None and report.out_of_range["height"] == 1


@pytest.mark.parametrize("cell, decade", [("50 - 59", 5), ("10 - 19", 1), ("90+", 9), ("57", 5), ("", None), ("NA", None)])
def test_parse_age(cell, decade):
    assert parse_age(cell) == decade


def test_schema_override():
    text = HEADER.replace("Therapeutic Dose of Warfarin", "dose_mg_wk") + "\n50 - 59,170,80,White,male,0,0,0,0,A/G,,30\n"
    records, _ = parse_patient_table(text, {"dose": "dose_mg_wk"})
    assert records[0].therapeutic_dose_mg_per_week == 30.0


@settings(max_examples=50, deadline=None)
@given(st.lists(record_strategy, max_size=20), st.lists(st.booleans(), max_size=20))
def test_retained_plus_dropped_equals_rows_read(records, blank_dose):
    records = [
        r if i >= len(blank_dose) or not blank_dose[i] else make_record(therapeutic_dose_mg_per_week=None)
        for i, r in enumerate(records)
    ]
    buf = io.StringIO()
    write_patient_table(records, buf)
    parsed, report = parse_patient_table(buf.getvalue())
    assert report.retained + report.dropped == report.rows_read == len(records)
    assert parsed == [r for r in records if r.therapeutic_dose_mg_per_week is not None]


# -- imputation -------------------------------------------------------------------

def test_impute_age_mode():
    recs = [make_record(age_decades=5), make_record(age_decades=5),
            make_record(age_decades=6), make_record(age_decades=None)]
    assert impute(recs)[3].age_decades == 5


def test_impute_mean_of_two_heights():
    recs = [make_record(height_cm=160.0), make_record(height_cm=170.0), make_record(height_cm=None)]
    assert impute(recs)[2].height_cm == 165.0


def test_mode_tie_goes_to_smaller_decade():
    recs = [make_record(age_decades=7), make_record(age_decades=4), make_record(age_decades=None)]
    assert impute(recs)[2].age_decades == 4


def test_complete_record_unchanged():
    r = make_record()
    assert impute([r]) == [r]


def test_all_missing_column_raises():
    with pytest.raises(ImputationError, match="weight"):
        impute([make_record(weight_kg=None), make_record(weight_kg=None)])


def test_impute_keeps_categorical_missing():
    r = make_record(gender=Gender.MISSING, weight_kg=None)
    out = impute([r, make_record()])
    assert out[0].gender is Gender.MISSING and out[0].weight_kg == 80.0


@settings(max_examples=60, deadline=None)
@given(st.lists(record_strategy, min_size=1, max_size=15))
def test_impute_idempotent(records):
    records = records + [make_record()]
    once = impute(records)
    assert impute(once) == once
    assert all(r.is_imputed for r in once)


# -- encoding ----------------------------------------------------------------------

def test_default_manifest_layout():
    assert DEFAULT_MANIFEST.width == N_FEATURES
    assert len(set(DEFAULT_MANIFEST.names)) == len(DEFAULT_MANIFEST.names)
    assert DEFAULT_MANIFEST.column_names()[:7] == [
        "age_decades", "height_cm", "weight_kg", "race=Asian", "race=BlackOrAfricanAmerican",
        "race=MixedOrMissing", "race=White"]


def test_golden_vector(fixtures_dir):
    golden = json.loads((fixtures_dir / "golden_vector.json").read_text())
    spec = golden["record"]
    rec = PatientRecord(
        age_decades=spec["age_decades"], height_cm=spec["height_cm"], weight_kg=spec["weight_kg"],
        race=Race(spec["race"]), gender=Gender(spec["gender"]), amiodarone=Amiodarone(spec["amiodarone"]),
        enzyme_inducer=spec["enzyme_inducer"], vkorc1_genotype=Genotype(spec["vkorc1_genotype"]),
        vkorc1_qc_genotype=Genotype(spec["vkorc1_qc_genotype"]))
    np.testing.assert_array_equal(encode_features(rec), np.array(golden["vector"], dtype=float))


@settings(max_examples=100, deadline=None)
@given(record_strategy)
def test_encoding_shape_and_one_hot_sums(record):
    (record,) = impute([record, make_record()])[:1]
    x = encode_features(record)
    assert x.shape == (N_FEATURES,) and np.all(np.isfinite(x))
    for block, sl in zip(DEFAULT_MANIFEST.blocks, DEFAULT_MANIFEST.slices().values()):
        if block.kind == "one-hot":
            assert x[sl].sum() == 1.0


def test_race_change_is_local():
    a = encode_features(make_record(race=Race.WHITE))
    b = encode_features(make_record(race=Race.ASIAN))
    race = DEFAULT_MANIFEST.slices()["race"]
    diff = np.flatnonzero(a != b)
    assert diff.size == 2 and all(race.start <= i < race.stop for i in diff)


def test_wrong_width_manifest_rejected():
    short = EncodingManifest.from_names(["age_decades", "race", "bias"])
    with pytest.raises(ConfigurationError):
        encode_features(make_record(), short)
    with pytest.raises(ConfigurationError):
        EncodingManifest.from_names(["age_decades", "age_decades"])
    with pytest.raises(ConfigurationError):
        EncodingManifest.from_names(["shoe_size"])


# -- synthetic ----------------------------------------------------------------------

def test_synthetic_empty():
    X, buckets, doses = generate_synthetic(0, seed=3)
    assert len(X) == len(buckets) == len(doses) == 0


def test_synthetic_deterministic():
    a = generate_synthetic(200, seed=5, noise_sd=2.0)
    b = generate_synthetic(200, seed=5, noise_sd=2.0)
    for u, v in zip(a, b):
        assert u.tobytes() == v.tobytes()
    c = generate_synthetic(200, seed=6, noise_sd=2.0)
    assert a[2].tobytes() != c[2].tobytes()


def test_synthetic_noiseless_doses_rebucket():
    X, buckets, doses = generate_synthetic(2000, seed=9, noise_sd=0.0)
    assert np.all(doses > 0)
    assert [bucket_by_thresholds(d) for d in doses] == list(buckets)
    # noiseless: doses are exactly linear in the contexts
    from warfarin_bandits.dataset import default_dose_theta
    np.testing.assert_allclose(np.maximum(X @ default_dose_theta(), doses.min()), doses, rtol=1e-12)
    assert set(np.unique(buckets)) == {0, 1, 2}


def test_synthetic_records_round_trip_through_file():
    records = generate_synthetic_records(100, seed=7, noise_sd=3.0)
    buf = io.StringIO()
    write_patient_table(records, buf)
    parsed, report = parse_patient_table(buf.getvalue())
    assert parsed == records and report.dropped == 0
