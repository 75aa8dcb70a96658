import csv
import json
import logging
from pathlib import Path
from typing import List, TextIO, Union

from pydantic import ValidationError

from errors import ConfigError
from models import Report, ScenarioConfig

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["check", "status", "defect", "value", "tolerance", "passed", "argmax"]


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read and validate a scenario JSON file; every failure becomes a ConfigError"""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"Scenario file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Scenario file {path} is not valid JSON: {e}")
    try:
        config = ScenarioConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid scenario {path}: {e}")
    logger.info(f"[CONFIG] loaded scenario {path}")
    return config


def report_json(report: Report) -> str:
    return json.dumps(report.model_dump(mode="json", by_alias=True), indent=2, sort_keys=False)


def write_report(report: Report, stream: TextIO) -> None:
    stream.write(report_json(report))
    stream.write("\n")


def defect_rows(report: Report) -> List[dict]:
    rows = []
    for check in report.checks:
        if not check.defects:
            rows.append({"check": check.name, "status": check.status, "defect": "", "value": "",
                         "tolerance": "", "passed": "", "argmax": check.error or ""})
        for defect in check.defects:
            rows.append({
                "check": check.name,
                "status": check.status,
                "defect": defect.name,
                "value": repr(defect.value),
                "tolerance": repr(defect.tolerance),
                "passed": defect.passed,
                "argmax": "" if defect.argmax is None else json.dumps(defect.argmax),
            })
    return rows


def write_csv(report: Report, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(defect_rows(report))
    logger.info(f"[CONFIG] wrote defect table {path}")
    return path
