"""
File-based storage for experiment results, fit artifacts, index sets and
sample sets.
"""
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from app.core.config import settings
from app.core.errors import ConfigError, ParameterError
from app.core.indexsets import MultiIndexSet, from_rows, multi_index
from app.core.schemas import DomainKind, DomainSpec, IndexSetKind, Measure
from app.core.domains import SampleSet
from app.core.utils import config_hash, logger

FLOAT_FORMAT = "%.12e"

PathLike = Union[str, Path]


def _metadata_lines(config: Dict[str, Any]) -> List[str]:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return [f"# config={canonical}", f"# config_hash={config_hash(config)}"]


def _parse_metadata(lines: Iterable[str]) -> Dict[str, str]:
    metadata = {}
    for line in lines:
        if not line.startswith("#"):
            break
        key, _, value = line[1:].strip().partition("=")
        metadata[key] = value
    return metadata


class ResultStore:
    """Writes CSV tables and JSON artifacts under one output directory."""

    def __init__(self, out_dir: Optional[PathLike] = None):
        self.out_dir = Path(out_dir) if out_dir is not None else settings.get_results_dir()
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, name: str) -> Path:
        return self.out_dir / name

    def write_table(self, name: str, rows: List[Union[BaseModel, Dict[str, Any]]],
                    config: Dict[str, Any], columns: Optional[List[str]] = None) -> Path:
        """CSV with `#` metadata lines (config echo and hash) and a fixed float format."""
        records = [row.model_dump() if isinstance(row, BaseModel) else dict(row) for row in rows]
        frame = pd.DataFrame.from_records(records, columns=columns)
        path = self.path_for(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            for line in _metadata_lines(config):
                f.write(line + "\n")
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
        logger.info(f"Wrote {len(records)} rows to {path}")
        return path

    def write_json(self, name: str, payload: Union[BaseModel, Dict[str, Any]]) -> Path:
        """Per-fit artifacts (solutions, condition reports)."""
        data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
        path = self.path_for(name)
        path.write_text(json.dumps(data, sort_keys=True, indent=2, default=_json_default) + "\n",
                        encoding="utf-8")
        logger.debug(f"Wrote artifact {path}")
        return path


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


def read_table(path: PathLike) -> Tuple[Dict[str, Any], pd.DataFrame]:
    """Inverse of `ResultStore.write_table`: (config, rows)."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        metadata = _parse_metadata(f)
    if "config" not in metadata:
        raise ConfigError(f"{path} has no config metadata line")
    frame = pd.read_csv(path, comment="#")
    return json.loads(metadata["config"]), frame


def read_json(path: PathLike) -> Dict[str, Any]:
    """Inverse of `ResultStore.write_json`."""
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_index_set(index_set: MultiIndexSet, path: PathLike) -> Path:
    """Plain-text format: header line, then one space-separated index per line."""
    path = Path(path)
    lines = [index_set.descriptor() if index_set.degree is not None
             else f"dim={index_set.dimension} kind={index_set.kind.value} n="]
    lines.extend(" ".join(str(int(e)) for e in row) for row in index_set.indices)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_index_set(path: PathLike) -> MultiIndexSet:
    """Parse the plain-text format written by `write_index_set`."""
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not text:
        raise ParameterError(f"index file {path} is empty")
    header = dict(token.split("=", 1) for token in text[0].split())
    d = int(header["dim"])
    kind = IndexSetKind(header["kind"])
    degree = int(header["n"]) if header.get("n") else None
    rows = [multi_index(line.split()) for line in text[1:] if line.strip()]
    if any(len(row) != d for row in rows):
        raise ParameterError(f"index file {path} has rows that do not match dim={d}")
    return from_rows(rows, d, kind, degree)


def write_samples(samples: SampleSet, path: PathLike) -> Path:
    """CSV of points with a `# domain=.. d=.. measure=.. seed=.. M=..` header."""
    path = Path(path)
    header = (f"# domain={samples.domain.kind.value} d={samples.dimension} "
              f"measure={samples.measure.value} seed={samples.seed} M={samples.size}")
    frame = pd.DataFrame(samples.points, columns=[f"y{k + 1}" for k in range(samples.dimension)])
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(header + "\n")
        frame.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_samples(path: PathLike, domain: Optional[DomainSpec] = None) -> SampleSet:
    """Load a sample CSV; domain parameters beyond kind and d come from `domain`."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        first = f.readline()
    if not first.startswith("#"):
        raise ParameterError(f"{path} lacks the sample-set header")
    header = dict(token.split("=", 1) for token in first[1:].split())
    d = int(header["d"])
    kind = DomainKind(header["domain"])
    if domain is None:
        domain = DomainSpec(kind=kind, dimension=d)
    elif domain.kind != kind or domain.dimension != d:
        raise ParameterError(f"{path} holds {kind.value} d={d} samples, not {domain.descriptor()}")
    points = pd.read_csv(path, comment="#").to_numpy(dtype=float)
    if points.shape != (int(header["M"]), d):
        raise ParameterError(f"{path} has {points.shape[0]} rows, header says M={header['M']}")
    return SampleSet(points=np.ascontiguousarray(points), measure=Measure(header["measure"]),
                     seed=int(header["seed"]), domain=domain, proposals=points.shape[0])
