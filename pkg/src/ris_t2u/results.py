"""Result records and their CSV / JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

# sweep coordinates, in column order; a record leaves inapplicable ones empty
SWEEP_KEYS = ("clutter_density_per_m2", "beta_c_db", "clutter_reflectivity_dbm2", "bs_elements",
              "ris_elements", "p_fa", "p_cd_target", "sigma_gps_m", "method", "vue")
COLUMNS = ("experiment",) + SWEEP_KEYS + ("metric", "value", "ci_half_width", "trials", "seed", "config_hash")
METRICS = ("pcd", "pfa", "pca", "snr_db", "L_ris")

_INT_KEYS = ("bs_elements", "ris_elements", "vue")
_STR_KEYS = ("method",)


class ResultsIOError(OSError):
    category = "io"


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    metric: str
    value: float
    ci_half_width: float | None
    trials: int
    seed: int
    config_hash: str
    coords: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        bad = set(self.coords) - set(SWEEP_KEYS)
        if bad:
            raise ValueError(f"unknown sweep keys {sorted(bad)}")

    def row(self) -> dict:
        out = {"experiment": self.experiment}
        for k in SWEEP_KEYS:
            out[k] = self.coords.get(k)
        out.update(metric=self.metric, value=self.value, ci_half_width=self.ci_half_width,
                   trials=self.trials, seed=self.seed, config_hash=self.config_hash)
        return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)  # shortest round-trip representation, '.' decimal separator
    return str(v)


def _parse_value(key: str, text: str):
    if text == "":
        return None
    if key in _STR_KEYS or key in ("experiment", "metric", "config_hash"):
        return text
    if key in _INT_KEYS or key in ("trials", "seed"):
        return int(text)
    return float(text)


def _json_value(v):
    # JSON has no inf/nan; write them as strings so files stay standard JSON
    if isinstance(v, float) and not math.isfinite(v):
        return _fmt(v)
    return v


def render(records, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            row = r.row()
            w.writerow([_fmt(row[c]) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        rows = [{k: _json_value(v) for k, v in r.row().items()} for r in records]
        return json.dumps(rows, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def write_results(records, path, fmt: str = "csv", config=None) -> None:
    """Write records to ``path``; with ``config`` also a ``<path>.meta.json`` sidecar."""
    text = render(records, fmt)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8", newline="")
        if config is not None:
            # the output location is not part of the producing configuration
            resolved = {k: v for k, v in config.to_dict().items() if k != "output"}
            meta = {"tool": "ris-t2u", "version": __version__, "config_hash": config.config_hash(),
                    "config": resolved}
            meta_path = path.with_name(path.name + ".meta.json")
            meta_path.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise ResultsIOError(f"cannot write results to {path}: {e.strerror or e}") from e


def _record_from_row(row: dict) -> ResultRecord:
    parsed = {k: _parse_value(k, row[k] if row[k] is not None else "") for k in COLUMNS}
    coords = {k: parsed[k] for k in SWEEP_KEYS if parsed[k] is not None}
    return ResultRecord(parsed["experiment"], parsed["metric"], parsed["value"], parsed["ci_half_width"],
                        parsed["trials"], parsed["seed"], parsed["config_hash"], coords)


def read_results(path, fmt: str | None = None) -> list[ResultRecord]:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ResultsIOError(f"cannot read results from {path}: {e.strerror or e}") from e
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected CSV header")
        return [_record_from_row(r) for r in reader]
    rows = json.loads(text)
    return [_record_from_row({k: _fmt(r.get(k)) for k in COLUMNS}) for r in rows]
