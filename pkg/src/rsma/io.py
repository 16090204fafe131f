"""Result persistence: CSV tables, JSON manifests, gnuplot data and plot specs.

Every file carries ``format_version``. CSV files start with a
``# format_version: N`` comment line; floats are written with ``repr`` so a
reload gives bit-identical values.
"""
from __future__ import annotations

import csv
import json
import math
import platform
import re
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .model import ScenarioConfig

FORMAT_VERSION = 1

_INT_COLUMNS = {"iterations", "realization", "realizations", "feasible"}
_STR_COLUMNS = {"strategy", "order", "status"}


class FormatError(ValueError):
    pass


def slug(text: str) -> str:
    s = re.sub(r"[^A-Za-z0-9.=_-]+", "_", text).strip("_")
    return s or "run"


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, rows: Sequence[Mapping], columns: Sequence[str] | None = None) -> Path:
    path = Path(path)
    columns = list(columns if columns is not None else (rows[0].keys() if rows else []))
    with path.open("w", newline="") as f:
        f.write(f"# format_version: {FORMAT_VERSION}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])
    return path


def _parse(col: str, text: str):
    if col in _STR_COLUMNS:
        return text
    if col in _INT_COLUMNS:
        return int(text)
    return float(text)


def read_csv(path) -> tuple[int, list[dict]]:
    """Return ``(format_version, rows)``."""
    with Path(path).open(newline="") as f:
        first = f.readline()
        m = re.match(r"#\s*format_version:\s*(\d+)", first)
        if not m:
            raise FormatError(f"{path}: missing format_version header")
        version = int(m.group(1))
        if version > FORMAT_VERSION:
            raise FormatError(f"{path}: format_version {version} is newer than supported {FORMAT_VERSION}")
        reader = csv.reader(f)
        header = next(reader)
        rows = [{c: _parse(c, v) for c, v in zip(header, line)} for line in reader]
    return version, rows


def versions() -> dict:
    import cvxopt
    import scipy
    return {"rsma": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "cvxopt": cvxopt.__version__}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_manifest(path, config: ScenarioConfig, kind: str, strategies: Sequence[str], files: Mapping,
                   extra: Mapping | None = None) -> Path:
    """JSON manifest; its ``config`` block is a valid ``--config`` input."""
    data = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config.to_dict(),
        "strategies": list(strategies),
        "seeds": {"seed": config.seed, "channel": dict(config.channel).get("seed"),
                  "csit": dict(config.csit).get("seed") if config.csit else None},
        "versions": versions(),
        "files": dict(files),
        "results": extra or {},
    }
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    data = json.loads(Path(path).read_text())
    if int(data.get("format_version", 0)) > FORMAT_VERSION or "config" not in data:
        raise FormatError(f"{path}: not a supported manifest")
    return data


def load_config(path) -> ScenarioConfig:
    """Scenario from a manifest file (or a bare config dictionary)."""
    data = json.loads(Path(path).read_text())
    cfg = data.get("config", data)
    return ScenarioConfig.from_dict(cfg)


def write_dat(path, blocks: Iterable[tuple[str, Sequence[str], np.ndarray]]) -> Path:
    """gnuplot data file; each block is one ``index`` separated by two blank lines."""
    path = Path(path)
    parts = []
    for name, cols, arr in blocks:
        arr = np.atleast_2d(np.asarray(arr, float))
        lines = [f"# {name}", "# " + " ".join(cols)]
        lines += [" ".join(repr(float(v)) for v in row) for row in arr if row.size]
        parts.append("\n".join(lines))
    path.write_text(f"# format_version: {FORMAT_VERSION}\n" + "\n\n\n".join(parts) + "\n")
    return path


def read_dat(path) -> list[tuple[str, list[str], np.ndarray]]:
    text = Path(path).read_text()
    lines = text.split("\n")
    if not lines[0].startswith("# format_version"):
        raise FormatError(f"{path}: missing format_version header")
    out = []
    for chunk in "\n".join(lines[1:]).split("\n\n\n"):
        rows = [l for l in chunk.split("\n") if l.strip()]
        if not rows:
            continue
        name = rows[0][2:]
        cols = rows[1][2:].split()
        data = [[float(v) for v in l.split()] for l in rows[2:]]
        out.append((name, cols, np.array(data, float).reshape(-1, len(cols))))
    return out


def write_plot_spec(path, spec: Mapping) -> Path:
    data = dict(spec)
    data["format_version"] = FORMAT_VERSION
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2) + "\n")
    return path


def read_plot_spec(path) -> dict:
    data = json.loads(Path(path).read_text())
    if int(data.get("format_version", 0)) > FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported plot spec")
    return data


# -- experiment bundles --------------------------------------------------------------

REGION_COLUMNS = ["u2", "R1", "R2", "wsr", "strategy", "order", "iterations", "status", "realizations", "feasible"]


def curve_columns(K: int) -> list[str]:
    return (["snr_db", "realization", "threshold"] + [f"R{k}" for k in range(1, K + 1)]
            + [f"C{k}" for k in range(1, K + 1)]
            + ["wsr", "strategy", "order", "iterations", "status", "realizations", "feasible"])


def write_region_bundle(out_dir, name: str, cfg: ScenarioConfig, results: Mapping, figures: bool = True) -> dict:
    """Write CSVs, manifest, .dat, plot spec (and PNG) for region results by strategy."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, blocks, series, summary = {}, [], [], {}
    for i, (tag, res) in enumerate(results.items()):
        p = write_csv(out / f"{name}_{tag}.csv", res.rows, REGION_COLUMNS)
        files[tag] = p.name
        blocks.append((f"{tag} hull", ["R1", "R2"], np.vstack([res.hull, res.hull[:1]])))
        series.append({"label": tag, "index": i, "x": 1, "y": 2, "style": "lines"})
        summary[tag] = {"area": res.area, "hull": res.hull, "realizations": res.realizations}
    dat = write_dat(out / f"{name}.dat", blocks)
    spec = {"type": "region", "title": name, "data": dat.name, "xlabel": "R1 [bit/s/Hz]",
            "ylabel": "R2 [bit/s/Hz]", "series": series}
    files["dat"] = dat.name
    files["plot_spec"] = write_plot_spec(out / f"{name}.plot.json", spec).name
    if figures:
        from .plotting import render
        files["figure"] = render(out / files["plot_spec"]).name
    files["manifest"] = f"{name}.manifest.json"
    write_manifest(out / files["manifest"], cfg, "region", list(results), files, summary)
    return files


def write_curve_bundle(out_dir, name: str, cfg: ScenarioConfig, results: Mapping, figures: bool = True) -> dict:
    """Write CSVs, manifest, .dat, plot spec (and PNG) for WSR curves by strategy."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, blocks, series, summary = {}, [], [], {}
    for i, (tag, res) in enumerate(results.items()):
        p = write_csv(out / f"{name}_{tag}.csv", res.rows, curve_columns(res.K))
        files[tag] = p.name
        blocks.append((tag, ["snr_db", "wsr"], np.column_stack([res.snrs(), res.wsr()])))
        series.append({"label": tag, "index": i, "x": 1, "y": 2, "style": "linespoints"})
        summary[tag] = {"snr_db": res.snrs(), "wsr": res.wsr()}
    dat = write_dat(out / f"{name}.dat", blocks)
    spec = {"type": "curve", "title": name, "data": dat.name, "xlabel": "SNR [dB]",
            "ylabel": "WSR [bit/s/Hz]", "series": series}
    files["dat"] = dat.name
    files["plot_spec"] = write_plot_spec(out / f"{name}.plot.json", spec).name
    if figures:
        from .plotting import render
        files["figure"] = render(out / files["plot_spec"]).name
    files["manifest"] = f"{name}.manifest.json"
    write_manifest(out / files["manifest"], cfg, "curve", list(results), files, summary)
    return files
