"""Run outputs: the per-replicate CSV and the aggregate JSON."""
import json
import logging
import os
from typing import Any, Dict, Tuple

import pandas as pd

from ..config import Config
from .schemas import EvaluationReport

logger = logging.getLogger(__name__)


def aggregate_document(report: EvaluationReport, meta: Dict[str, Any]) -> Dict[str, Any]:
    doc = report.to_dict()
    # meta carries the per-replicate n_test
    doc['total_test_points'] = doc.pop('n_test')
    doc.update(meta)
    return doc


def write_run(out_dir: str, report: EvaluationReport, table: pd.DataFrame,
              meta: Dict[str, Any]) -> Tuple[str, str]:
    """
    Write ``replicates.csv`` (one row per replicate, in replicate order) and
    ``aggregate.json`` (report fields plus ``meta``, keys sorted). Output is
    byte-identical for identical inputs.
    """
    out_dir = Config.ensure_dirs(out_dir)
    csv_path = os.path.join(out_dir, Config.REPLICATES_CSV)
    json_path = os.path.join(out_dir, Config.AGGREGATE_JSON)
    table.sort_values('replicate').to_csv(csv_path, index=False, float_format="%.17g")
    with open(json_path, 'w', encoding='utf-8') as f:
        json.dump(aggregate_document(report, meta), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("wrote %s and %s", csv_path, json_path)
    return csv_path, json_path


def read_aggregate(path: str) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)
