import os


class Config:
    # Miscoverage
    ALPHA = 0.1

    # Numerical floors
    SIDE_FLOOR = 1e-12
    GAMMA_SHAPE_FLOOR = 1e-6

    # Fitters
    LSTSQ_RANK_TOL = 1e-10
    PINBALL_TOL = 1e-9
    PINBALL_MAX_ITER = 100_000

    # Splits (train, cal1, cal2)
    SPLIT_FRACTIONS_TWO_STAGE = (0.5, 0.25, 0.25)
    SPLIT_FRACTIONS_ONE_STAGE = (0.5, 0.5, 0.0)
    SPLIT_FRACTIONS_NAIVE = (1.0, 0.0, 0.0)

    # Monte-Carlo desk scale
    DESK_REPLICATES = 200
    DESK_N_TEST = 500

    # Files
    DEFAULT_OUT_DIR = "data/runs"
    REPLICATES_CSV = "replicates.csv"
    AGGREGATE_JSON = "aggregate.json"
    MODEL_SCHEMA_VERSION = 1
    EXPERIMENT_SCHEMA_VERSION = 1

    @classmethod
    def ensure_dirs(cls, out_dir: str = None) -> str:
        out_dir = out_dir or cls.DEFAULT_OUT_DIR
        os.makedirs(out_dir, exist_ok=True)
        return out_dir
