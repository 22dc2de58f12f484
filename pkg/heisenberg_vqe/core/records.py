"""
Persistence of experiment results.

Records are JSON lines: one header line describing the experiment, then one
line per local minimum. Floats are written with ``repr`` precision so that
reading a file back reproduces every number exactly. Summaries are CSV.
"""
import csv
import json
import os
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from .errors import RecordError
from .lattice import SpinGraph
from .optimizer import RunRecord
from .spectra import SpectrumResult
from ..logging.handlers import get_module_logger

logger = get_module_logger(__name__)

FORMAT_VERSION = 1


class RecordWriter:
    """Single writer of one JSON-lines records file.

    Usage::

        with RecordWriter(path, header) as writer:
            writer.write(record, e0=..., e1=...)
    """

    def __init__(self, path: str, header: Dict[str, Any]) -> None:
        self.path = path
        self.header = header
        self._file = None
        self.count = 0

    def __enter__(self) -> "RecordWriter":
        directory = os.path.dirname(os.path.abspath(self.path))
        os.makedirs(directory, exist_ok=True)
        self._file = open(self.path, "w", encoding="utf-8")
        self._write_line({"type": "header", "format_version": FORMAT_VERSION, **self.header})
        return self

    def __exit__(self, *exc_info) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None

    def _write_line(self, data: Dict[str, Any]) -> None:
        self._file.write(json.dumps(data) + "\n")
        self._file.flush()

    def write(self, record: RunRecord, **extra: Any) -> None:
        if self._file is None:
            raise RecordError("record writer is not open")
        self._write_line({"type": "minimum", "format_version": FORMAT_VERSION,
                          **record.to_dict(), **extra})
        self.count += 1


@dataclass
class RecordFile:
    header: Dict[str, Any]
    records: List[RunRecord]
    extras: List[Dict[str, Any]]
    failures: List[str]


def read_records(path: str) -> RecordFile:
    """Parse a records file; unreadable lines are listed in ``failures``.

    Raises:
        RecordError: The file cannot be opened or has no header
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise RecordError(f"cannot read records {path}: {e}") from e

    header: Optional[Dict[str, Any]] = None
    records: List[RunRecord] = []
    extras: List[Dict[str, Any]] = []
    failures: List[str] = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            if data.get("format_version") != FORMAT_VERSION:
                raise ValueError(f"unsupported format_version {data.get('format_version')}")
            if data.get("type") == "header":
                header = data
                continue
            record = RunRecord.from_dict(data)
            known = set(RunRecord.__dataclass_fields__) | {"type", "format_version"}
            extras.append({k: v for k, v in data.items() if k not in known})
            records.append(record)
        except (ValueError, KeyError, TypeError, AttributeError) as e:
            failures.append(f"line {number}: {e}")
    if header is None:
        raise RecordError(f"records {path} have no header line", failures=failures)
    if failures:
        logger.warning(f"{len(failures)} unreadable lines in {path}")
    return RecordFile(header=header, records=records, extras=extras, failures=failures)


@dataclass
class SummaryRow:
    """Best minimum of one cycle count.

    relative_energy_error is |(E - E0) / E0|; below_first_excited tells
    whether the best energy lies under the first excited level.
    """
    p: int
    best_energy: float
    relative_energy_error: Optional[float]
    best_infidelity: Optional[float]
    e0: Optional[float]
    e1: Optional[float]
    total_function_calls: int
    below_first_excited: Optional[bool]
    rounds_ok: int
    rounds: int

    def to_dict(self) -> Dict[str, Any]:
        return {"format_version": FORMAT_VERSION, **asdict(self)}


SUMMARY_FIELDS = ["format_version"] + list(SummaryRow.__dataclass_fields__)
SCATTER_FIELDS = ["format_version", "p", "round", "energy", "relative_energy_error",
                  "infidelity", "n_function_calls", "converged"]


def _csv_value(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path: str, fields: List[str], rows: Iterable[Dict[str, Any]]) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_value(row.get(k)) for k in fields})
    return path


def read_csv(path: str) -> List[Dict[str, str]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f))
    except OSError as e:
        raise RecordError(f"cannot read {path}: {e}") from e


class SpectrumCache:
    """Exact-diagonalization results on disk, keyed by graph hash and k.

    Each entry is a JSON file with the eigenvalues and an ``.npy`` file with
    the ground vectors.
    """

    def __init__(self, cache_dir: str) -> None:
        self.cache_dir = os.path.expanduser(cache_dir)

    def _paths(self, graph: SpinGraph, k: int, magnetization: Optional[float]) -> Tuple[str, str]:
        sector = "all" if magnetization is None else f"sz{magnetization:g}"
        stem = os.path.join(self.cache_dir, f"{graph.graph_hash()}_k{k}_{sector}")
        return stem + ".json", stem + ".npy"

    def load(self, graph: SpinGraph, k: int, tol: float,
             magnetization: Optional[float] = None) -> Optional[SpectrumResult]:
        meta_path, vec_path = self._paths(graph, k, magnetization)
        if not (os.path.exists(meta_path) and os.path.exists(vec_path)):
            return None
        try:
            with open(meta_path, "r", encoding="utf-8") as f:
                meta = json.load(f)
            if meta.get("format_version") != FORMAT_VERSION or meta.get("tol", 1.0) > tol:
                return None
            vectors = np.load(vec_path)
        except (OSError, ValueError, json.JSONDecodeError) as e:
            logger.warning(f"ignoring unreadable spectrum cache entry {meta_path}: {e}")
            return None
        logger.debug(f"spectrum cache hit for graph {meta['graph_hash']}")
        return SpectrumResult(eigenvalues=np.array(meta["eigenvalues"]), ground_vectors=vectors,
                              gap_01=float(meta["gap_01"]), residuals=np.array(meta["residuals"]),
                              magnetization=meta.get("magnetization"))

    def store(self, graph: SpinGraph, k: int, tol: float, result: SpectrumResult) -> bool:
        meta_path, vec_path = self._paths(graph, k, result.magnetization)
        try:
            os.makedirs(self.cache_dir, exist_ok=True)
            np.save(vec_path, result.ground_vectors)
            with open(meta_path, "w", encoding="utf-8") as f:
                json.dump({"format_version": FORMAT_VERSION, "graph_hash": graph.graph_hash(),
                           "n_sites": graph.n_sites, "k": k, "tol": tol,
                           "eigenvalues": result.eigenvalues.tolist(), "gap_01": result.gap_01,
                           "residuals": result.residuals.tolist(),
                           "magnetization": result.magnetization}, f, indent=2)
            return True
        except OSError as e:
            logger.warning(f"could not write spectrum cache {meta_path}: {e}")
            return False
