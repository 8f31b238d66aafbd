"""
Result files. Every file carries the SHA-256 of the run manifest: CSVs as a leading comment line, JSON as a
`manifest_sha256` key. Floats go through repr so a replay writes identical bytes.
"""
import csv
import json
import hashlib
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence  # noqa
from dataclasses import dataclass, field

import yaml
import numpy as np

from fqess import logger

MANIFEST_FILE = 'manifest.yaml'


def plain(value: Any) -> Any:
    """
    Convert numpy scalars and arrays, tuples and Paths into JSON/YAML-safe builtins.
    """
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return value.as_posix()
    return value


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    inputs: List[str]
    config: Dict[str, Any]
    seed: int
    out: str
    labels: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return plain({
            'subcommand': self.subcommand,
            'inputs': self.inputs,
            'labels': self.labels,
            'config': self.config,
            'seed': self.seed,
            'out': self.out,
        })

    @property
    def sha256(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    path = Path(out_dir) / MANIFEST_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path.as_posix(), 'w', encoding='utf-8') as f:
        yaml.safe_dump(manifest.to_dict(), f, default_flow_style=False, sort_keys=True)

    logger.info('Wrote %s (sha256 %s)', path, manifest.sha256)
    return path


def read_manifest(path: Path) -> dict:
    with open(Path(path).as_posix(), encoding='utf-8') as f:
        return yaml.safe_load(f.read())


def _cell(value: Any) -> Any:
    value = plain(value)
    return repr(value) if isinstance(value, float) else value


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], manifest_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path.as_posix(), 'w', encoding='utf-8', newline='') as f:
        f.write('# manifest-sha256: %s\n' % manifest_hash)
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
            count += 1

    logger.info('Wrote %s rows to %s', count, path)
    return path


def write_json(path: Path, payload: Dict[str, Any], manifest_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = dict(plain(payload))
    document['manifest_sha256'] = manifest_hash
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + '\n', encoding='utf-8')

    logger.info('Wrote %s', path)
    return path


def read_csv(path: Path) -> List[Dict[str, str]]:
    """
    Rows of a file written by write_csv, keyed by header; the manifest line is skipped.
    """
    with open(Path(path).as_posix(), encoding='utf-8', newline='') as f:
        lines = [line for line in f if not line.startswith('#')]
    return list(csv.DictReader(lines))
