"""Dataset CSVs, JSON checkpoints/results, config files and SVG heat maps."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from .baseline import BaselineConfig, LinearVarModel
from .datagen import TimeSeriesData
from .model import DecoderNet, EncoderNet, LagStack, NkdcdModel
from .optim import TrainConfig, TrainReport

CHECKPOINT_VERSION = 1
PathLike = Union[str, Path]


class FormatError(ValueError):
    """A file does not follow the expected layout."""


# ---------------------------------------------------------------------------
# CSV


def _fmt(v: float) -> str:
    return repr(float(v))


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_matrix_csv(path: PathLike, allow_header: bool = True):
    """Return ``(matrix, header)``; ``header`` is None when the first row is numeric."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(f"{path}: file is empty")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        if not allow_header:
            raise FormatError(f"{path}: unexpected non-numeric first row")
        header, rows = [c.strip() for c in rows[0]], rows[1:]
        if not rows:
            raise FormatError(f"{path}: header row but no data")
    width = len(rows[0])
    for k, r in enumerate(rows):
        if len(r) != width:
            raise FormatError(f"{path}: row {k + 1} has {len(r)} columns, expected {width}")
    try:
        m = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not np.all(np.isfinite(m)):
        raise FormatError(f"{path}: contains non-finite values")
    if header is not None and len(header) != width:
        raise FormatError(f"{path}: header has {len(header)} names for {width} columns")
    return m, header


def read_dataset(path: PathLike, truth_path: Optional[PathLike] = None) -> TimeSeriesData:
    values, header = read_matrix_csv(path)
    truth = read_truth(truth_path) if truth_path else None
    meta = {"source": str(path)}
    if header:
        meta["columns"] = header
    try:
        return TimeSeriesData(values, truth, meta)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_dataset(path: PathLike, data: TimeSeriesData, header: bool = True):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(data.metadata.get("columns") or [f"x{i + 1}" for i in range(data.n)])
        for row in data.values:
            w.writerow([_fmt(v) for v in row])


def read_truth(path: PathLike) -> np.ndarray:
    m, _ = read_matrix_csv(path, allow_header=False)
    if m.shape[0] != m.shape[1]:
        raise FormatError(f"{path}: truth must be square, got {m.shape}")
    if not np.all((m == 0) | (m == 1)):
        raise FormatError(f"{path}: truth entries must be 0 or 1")
    return m.astype(np.int64)


def write_int_matrix(path: PathLike, m: np.ndarray):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(m, dtype=np.int64):
            w.writerow([str(int(v)) for v in row])


def write_float_matrix(path: PathLike, m: np.ndarray):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(m, dtype=np.float64):
            w.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# config files


def read_config_file(path: PathLike) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        d = yaml.safe_load(text)
    else:
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise FormatError(f"{path}: config must be a mapping")
    return d


# ---------------------------------------------------------------------------
# checkpoints


def _net_to_json(net) -> dict:
    return {
        "activation": net.activation,
        "layers": [{"shape": list(w.shape), "weights": w.ravel().tolist(),
                    "bias": b.ravel().tolist()} for w, b in zip(net.weights, net.biases)],
    }


def _net_from_json(d: dict, cls):
    ws, bs = [], []
    for layer in d["layers"]:
        r, c = layer["shape"]
        ws.append(np.array(layer["weights"], dtype=np.float64).reshape(r, c))
        bs.append(np.array(layer["bias"], dtype=np.float64).reshape(1, c))
    return cls(ws, bs, d["activation"])


def _lags_to_json(lags: LagStack) -> list:
    return [[[lags.block(l, i, j).ravel().tolist() for j in range(lags.n)]
             for i in range(lags.n)] for l in range(lags.L)]


def _lags_from_json(blocks: list, n: int, N: int) -> LagStack:
    arr = np.array(blocks, dtype=np.float64)
    L = arr.shape[0]
    if arr.shape != (L, n, n, N * N):
        raise FormatError(f"lag blocks have shape {arr.shape}, expected ({L}, {n}, {n}, {N * N})")
    w = arr.reshape(L, n, n, N, N).transpose(0, 1, 3, 2, 4).reshape(L, n * N, n * N)
    return LagStack(w, n, N)


def _stats_json(mean, scale):
    if mean is None:
        return None
    return {"mean": np.asarray(mean).tolist(), "scale": np.asarray(scale).tolist()}


def checkpoint_dict(model: NkdcdModel, cfg: TrainConfig, report: Optional[TrainReport] = None,
                    standardization=None, dataset: Optional[dict] = None) -> dict:
    return {
        "format": "nkdcd-checkpoint",
        "version": CHECKPOINT_VERSION,
        "kind": "nkdcd",
        "config": cfg.to_dict(),
        "dims": {"n": model.n, "N": model.N, "L": model.L},
        "encoder": _net_to_json(model.encoder),
        "decoder": _net_to_json(model.decoder),
        "lags": _lags_to_json(model.lags),
        "report": report.summary() if report is not None else None,
        "standardization": _stats_json(*(standardization or (None, None))),
        "dataset": dataset or {},
    }


def baseline_checkpoint_dict(model: LinearVarModel, dataset: Optional[dict] = None) -> dict:
    return {
        "format": "nkdcd-checkpoint",
        "version": CHECKPOINT_VERSION,
        "kind": "linear_var",
        "config": model.config.to_dict(),
        "dims": {"n": model.n, "N": 1, "L": model.lags.L},
        "lags": _lags_to_json(model.lags),
        "report": {"iterations": model.iterations, "objective": model.objective},
        "standardization": _stats_json(model.mean, model.scale),
        "dataset": dataset or {},
    }


def _finite(obj):
    # JSON has no inf/nan literals; store them as strings
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def dumps(d: dict) -> str:
    return json.dumps(_finite(d), indent=1, allow_nan=False) + "\n"


def write_json(path: PathLike, d: dict):
    Path(path).write_text(dumps(d))


def read_json(path: PathLike) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def load_checkpoint(path_or_dict):
    """Return ``(kind, model, config, raw_dict)``.

    ``model`` is an ``NkdcdModel`` for ``kind == "nkdcd"`` and a
    ``LinearVarModel`` for ``kind == "linear_var"``.
    """
    d = path_or_dict if isinstance(path_or_dict, dict) else read_json(path_or_dict)
    if d.get("format") != "nkdcd-checkpoint":
        raise FormatError("not an nkdcd checkpoint")
    if d.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {d.get('version')}")
    dims = d["dims"]
    lags = _lags_from_json(d["lags"], dims["n"], dims["N"])
    if d["kind"] == "nkdcd":
        cfg = TrainConfig.from_dict(d["config"])
        model = NkdcdModel(_net_from_json(d["encoder"], EncoderNet),
                           _net_from_json(d["decoder"], DecoderNet), lags)
        return "nkdcd", model, cfg, d
    if d["kind"] == "linear_var":
        cfg = BaselineConfig.from_dict(d["config"])
        st = d.get("standardization") or {}
        n = dims["n"]
        model = LinearVarModel(lags, cfg, np.array(st.get("mean", [0.0] * n)),
                               np.array(st.get("scale", [1.0] * n)),
                               d["report"].get("iterations", 0),
                               d["report"].get("objective", float("nan")))
        return "linear_var", model, cfg, d
    raise FormatError(f"unknown checkpoint kind {d.get('kind')!r}")


# ---------------------------------------------------------------------------
# results


def results_dict(metrics, config: Optional[dict] = None, dataset: Optional[dict] = None,
                 wall_clock: Optional[float] = None, extra: Optional[dict] = None) -> dict:
    d = metrics.to_dict()
    d["config"] = config or {}
    d["dataset"] = {k: v for k, v in (dataset or {}).items() if _jsonable(v)}
    d["wall_clock_seconds"] = wall_clock
    if extra:
        d.update(extra)
    return d


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
    except (TypeError, ValueError):
        return False
    return True


# ---------------------------------------------------------------------------
# heat maps


def heatmap_svg(values: np.ndarray, vmax: float, title: str = "", cell: int = 20) -> str:
    """Square matrix as an SVG grid; 0 maps to white, ``vmax`` to black."""
    n = values.shape[0]
    margin = 30
    size = margin + n * cell + 10
    out: List[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 20}" '
        f'viewBox="0 0 {size} {size + 20}">',
        f'<rect width="{size}" height="{size + 20}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{margin}" y="14" font-size="12" font-family="sans-serif">{title}</text>')
    top = margin + 10
    for k in range(n):
        out.append(f'<text x="{margin + k * cell + cell // 2}" y="{top - 4}" font-size="9" '
                   f'text-anchor="middle" font-family="sans-serif">{k + 1}</text>')
        out.append(f'<text x="{margin - 4}" y="{top + k * cell + cell // 2 + 3}" font-size="9" '
                   f'text-anchor="end" font-family="sans-serif">{k + 1}</text>')
    for i in range(n):
        for j in range(n):
            frac = 0.0 if vmax <= 0 else min(1.0, float(values[i, j]) / vmax)
            g = int(round(255 * (1.0 - frac)))
            out.append(f'<rect class="cell" x="{margin + j * cell}" y="{top + i * cell}" '
                       f'width="{cell}" height="{cell}" fill="rgb({g},{g},{g})"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_heatmaps(per_lag: np.ndarray, out_dir: PathLike, prefix: str = "lag") -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vmax = float(per_lag.max()) if per_lag.size else 0.0
    paths = []
    for l in range(per_lag.shape[0]):
        p = out_dir / f"{prefix}{l + 1}.svg"
        p.write_text(heatmap_svg(per_lag[l], vmax, title=f"lag {l + 1} block norms"))
        paths.append(p)
    return paths
