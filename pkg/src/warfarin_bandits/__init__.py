"""Contextual bandits for Warfarin dose-bucket prediction."""
__version__ = "0.1.0"

from ._backend import BACKEND
from .dataset import (
    DEFAULT_MANIFEST,
    N_FEATURES,
    DoseBucket,
    EncodingManifest,
    IngestReport,
    PatientRecord,
    WarfarinDataset,
    bucket_dose,
    encode_features,
    generate_synthetic,
    impute,
    load_dataset,
    parse_patient_table,
)
from .evaluation import (
    RegretOracle,
    expected_regret,
    fit_oracle,
    run_episode,
    run_experiment,
    t_critical,
)
from .linalg import least_squares, rank_one_inverse_update, solve_spd
from .policies import ClinicalPolicy, FixedPolicy, LinUCBPolicy, PolicySpec, RegressionPolicy
from .reward import RewardTable, reshaped_table, reward, standard_table
