"""
Dataset ingestion and export.

A manifest (JSON) points at one main CSV (id column, timestamp column, real
feature columns) and one CSV per auxiliary source (id column + one value
column). Auxiliary rows are joined on exact sample id; empty cells and the
literal "NA" mark missing entries, which are flagged and never imputed.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import Field, ValidationError

from apps.cli.schemas_base import StrictModel
from libs.analytics.sources import AuxColumn, MultiSourceDataset, SourceDescriptor, SourceKind
from libs.errors import DuplicateIdError, MalformedCsvError, ManifestError

logger = logging.getLogger(__name__)

MISSING_MARKERS = ("", "NA")


class SourceSpec(StrictModel):
    name: str = Field(min_length=1)
    kind: SourceKind
    csv: str
    vocabulary: Optional[List[str]] = None
    weight_hint: Optional[float] = Field(default=None, ge=0.0)


class DatasetManifest(StrictModel):
    main_csv: str
    time_column: str = "t"
    id_column: str = "sample_id"
    sources: List[SourceSpec] = Field(default_factory=list)
    feature_groups: Optional[Dict[str, List[str]]] = None  # named feature subsets for correlation reports


def read_manifest(manifest_path) -> Tuple[DatasetManifest, Path]:
    path = Path(manifest_path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ManifestError(f"Manifest not found: {path}", path=str(path)) from e
    except json.JSONDecodeError as e:
        raise ManifestError(f"Manifest is not valid JSON: {e}", path=str(path)) from e
    try:
        return DatasetManifest.model_validate(raw), path.parent
    except ValidationError as e:
        raise ManifestError(f"Invalid manifest {path}: {e.errors()[0]['msg']}", path=str(path)) from e


def _read_csv(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as e:
        raise MalformedCsvError(f"CSV not found: {path}", path=str(path)) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise MalformedCsvError(f"Cannot parse CSV {path}: {e}", path=str(path)) from e


def _to_float(frame: pd.DataFrame, columns: List[str], path: Path) -> np.ndarray:
    try:
        return frame[columns].to_numpy(dtype=str).astype(np.float64)
    except ValueError as e:
        raise MalformedCsvError(f"Non-numeric value in {path}: {e}", path=str(path)) from e


def _check_unique(ids: pd.Series, path: Path):
    dup = ids[ids.duplicated()]
    if not dup.empty:
        raise DuplicateIdError(f"duplicate sample id '{dup.iloc[0]}' in {path}", sample_id=dup.iloc[0], path=str(path))


def _load_source(spec: SourceSpec, base: Path, id_column: str, ids: List[str]) -> AuxColumn:
    path = base / spec.csv
    frame = _read_csv(path)
    if id_column not in frame.columns or len(frame.columns) != 2:
        raise MalformedCsvError(
            f"Source CSV {path} must have exactly two columns: '{id_column}' and one value column", path=str(path)
        )
    _check_unique(frame[id_column], path)
    value_column = next(c for c in frame.columns if c != id_column)

    lookup = dict(zip(frame[id_column], frame[value_column]))
    unmatched = len(set(lookup) - set(ids))
    if unmatched:
        logger.warning(f"Source '{spec.name}': dropped {unmatched} rows with no matching sample id")

    raw = [lookup.get(sid, "") for sid in ids]
    labels = [None if v.strip() in MISSING_MARKERS else v.strip() for v in raw]
    n_missing = sum(v is None for v in labels)
    if n_missing:
        logger.info(f"Source '{spec.name}': {n_missing}/{len(ids)} entries missing")

    descriptor = SourceDescriptor(
        name=spec.name,
        kind=spec.kind,
        vocabulary=tuple(spec.vocabulary) if spec.vocabulary is not None else None,
        weight_hint=spec.weight_hint,
    )
    if spec.kind == SourceKind.CATEGORICAL:
        return AuxColumn.categorical(descriptor, labels)
    try:
        values = np.array([np.nan if v is None else float(v) for v in labels], dtype=np.float64)
    except ValueError as e:
        raise MalformedCsvError(f"Non-numeric value in continuous source '{spec.name}': {e}", path=str(path)) from e
    if np.any(np.isinf(values)):
        raise MalformedCsvError(f"Infinite value in continuous source '{spec.name}'", path=str(path))
    return AuxColumn(descriptor, values)


def load_dataset(manifest_path) -> MultiSourceDataset:
    """Read and validate the dataset described by a manifest; rows are stably sorted by time."""
    manifest, base = read_manifest(manifest_path)
    main_path = base / manifest.main_csv
    frame = _read_csv(main_path)
    for column in (manifest.id_column, manifest.time_column):
        if column not in frame.columns:
            raise MalformedCsvError(f"Main CSV {main_path} lacks column '{column}'", path=str(main_path))
    _check_unique(frame[manifest.id_column], main_path)

    feature_columns = [c for c in frame.columns if c not in (manifest.id_column, manifest.time_column)]
    time = _to_float(frame, [manifest.time_column], main_path)[:, 0]
    main = _to_float(frame, feature_columns, main_path) if feature_columns else np.zeros((len(frame), 0))

    order = np.argsort(time, kind="stable")
    if np.any(order != np.arange(order.size)):
        logger.warning(f"Main CSV {main_path} is not in time order; rows re-sorted by '{manifest.time_column}'")
    ids = [frame[manifest.id_column].iloc[i] for i in order]

    aux = tuple(_load_source(spec, base, manifest.id_column, ids) for spec in manifest.sources)
    dataset = MultiSourceDataset(
        main=main[order],
        aux=aux,
        time=time[order],
        sample_ids=tuple(ids),
        feature_names=tuple(feature_columns),
    )
    logger.info(
        f"Loaded {manifest_path}: N={dataset.n_samples}, d={dataset.n_features}, m={dataset.n_sources}"
    )
    return dataset


def feature_groups(manifest_path) -> Optional[Dict[str, List[str]]]:
    manifest, _ = read_manifest(manifest_path)
    return manifest.feature_groups


def _fmt(value: float) -> str:
    return repr(float(value))


def save_dataset(
    dataset: MultiSourceDataset,
    directory,
    name: str = "dataset",
    groups: Optional[Dict[str, List[str]]] = None,
) -> Path:
    """
    Write main/auxiliary CSVs and a manifest under `directory`; floats use the
    shortest repr that round-trips exactly. Returns the manifest path.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)

    main = pd.DataFrame({"sample_id": list(dataset.sample_ids), "t": [_fmt(v) for v in dataset.time]})
    for j, feature in enumerate(dataset.feature_names):
        main[feature] = [_fmt(v) for v in dataset.main[:, j]]
    main_csv = f"{name}_main.csv"
    main.to_csv(out / main_csv, index=False)

    sources = []
    for col in dataset.aux:
        csv_name = f"{name}_{col.name}.csv"
        values = ["" if v is None else (v if isinstance(v, str) else _fmt(v)) for v in col.decoded()]
        pd.DataFrame({"sample_id": list(dataset.sample_ids), col.name: values}).to_csv(out / csv_name, index=False)
        spec = {"name": col.name, "kind": col.descriptor.kind.value, "csv": csv_name}
        if col.descriptor.vocabulary is not None:
            spec["vocabulary"] = list(col.descriptor.vocabulary)
        if col.descriptor.weight_hint is not None:
            spec["weight_hint"] = col.descriptor.weight_hint
        sources.append(spec)

    manifest = DatasetManifest.model_validate({
        "main_csv": main_csv,
        "time_column": "t",
        "id_column": "sample_id",
        "sources": sources,
        "feature_groups": groups,
    })
    path = out / f"{name}_manifest.json"
    path.write_text(json.dumps(manifest.model_dump(mode="json", exclude_none=True), indent=2, sort_keys=True))
    logger.info(f"Saved dataset ({dataset.n_samples} samples) to {path}")
    return path
