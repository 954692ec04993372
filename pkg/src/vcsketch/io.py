"""CSV ingestion and emission, draw files and run manifests.

Data files have a header row with location columns ``u1..ud``, an optional
response column ``y`` and any number of predictor columns. Floats are
written with ``repr`` so every file round-trips exactly.
"""

import csv
import hashlib
import json
import re
from pathlib import Path

import numpy as np

from .errors import DomainError, IngestionError
from .model import Dataset
from .sampler import PosteriorDraws

LOCATION_COLUMN = re.compile(r"^u([1-9][0-9]*)$")

DRAW_BLOCKS = ("beta", "gamma", "sigma2", "tau2")


def fmt(value):
    return repr(float(value))


def read_table(path):
    """Read a numeric CSV. Returns ``(header, array)``.

    Row numbers in errors count data rows from 1 (the header is row 0).
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: empty file", row=0) from None
        if len(set(header)) != len(header):
            raise IngestionError(f"{path}: duplicate column names in header", row=0)
        rows = []
        for i, rec in enumerate(reader, start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise IngestionError(
                    f"{path}: row {i} has {len(rec)} fields, expected {len(header)}", row=i
                )
            vals = []
            for col, cell in zip(header, rec):
                try:
                    v = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"{path}: row {i}, column {col!r}: cannot parse {cell!r} as a number",
                        row=i, column=col,
                    ) from None
                if not np.isfinite(v):
                    raise IngestionError(
                        f"{path}: row {i}, column {col!r}: non-finite value {cell!r}",
                        row=i, column=col,
                    )
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise IngestionError(f"{path}: no data rows", row=1)
    return header, np.array(rows, dtype=float)


def location_columns(header, path="<data>"):
    idx = {}
    for k, name in enumerate(header):
        m = LOCATION_COLUMN.match(name)
        if m:
            idx[int(m.group(1))] = k
    if not idx:
        raise IngestionError(f"{path}: no location columns u1..ud in header", row=0)
    d = max(idx)
    missing = [f"u{a}" for a in range(1, d + 1) if a not in idx]
    if missing:
        raise IngestionError(f"{path}: missing location columns {missing}", row=0)
    return [idx[a] for a in range(1, d + 1)]


def predictor_names(header):
    return [h for h in header if h != "y" and not LOCATION_COLUMN.match(h)]


def select_columns(header, table, names, path="<data>"):
    cols = []
    for name in names:
        if name not in header:
            raise IngestionError(f"{path}: missing column {name!r}", row=0, column=name)
        cols.append(header.index(name))
    return table[:, cols] if cols else np.zeros((table.shape[0], 0))


def check_domain(locs, path="<data>"):
    bad = np.flatnonzero(~np.all((locs >= 0.0) & (locs <= 1.0), axis=1))
    if bad.size:
        i = int(bad[0]) + 1
        raise DomainError(f"{path}: row {i}: location outside [0, 1]^d", row=i)


def load_dataset(path, varying, static=(), intercept=True, require_y=True):
    """Read a data file into a :class:`Dataset`.

    ``varying`` and ``static`` list predictor column names; with
    ``intercept`` a column of ones is prepended to the varying predictors.
    """
    header, table = read_table(path)
    loc_idx = location_columns(header, path)
    locs = table[:, loc_idx]
    check_domain(locs, path)
    if "y" in header:
        y = table[:, header.index("y")]
    elif require_y:
        raise IngestionError(f"{path}: missing response column 'y'", row=0, column="y")
    else:
        y = np.zeros(table.shape[0])
    xt = select_columns(header, table, varying, path)
    if intercept:
        xt = np.column_stack([np.ones(table.shape[0]), xt])
    X = select_columns(header, table, static, path)
    if xt.shape[1] == 0:
        raise IngestionError(f"{path}: no varying-coefficient predictors selected", row=0)
    return Dataset(locs, y, X, xt)


def write_dataset(path, data, names=None, skip_intercept=True):
    """Write ``u1..ud, y, x1..`` columns; a leading all-ones varying column is dropped."""
    xt = data.xtilde
    if skip_intercept and xt.shape[1] and np.all(xt[:, 0] == 1.0):
        xt = xt[:, 1:]
    preds = np.column_stack([xt, data.X]) if data.p else xt
    if names is None:
        names = [f"x{i + 1}" for i in range(preds.shape[1])]
    header = [f"u{i + 1}" for i in range(data.d)] + ["y"] + list(names)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(data.n):
            w.writerow([fmt(v) for v in data.locations[i]] + [fmt(data.y[i])]
                       + [fmt(v) for v in preds[i]])


def write_truth(path, sets):
    """Long-format truth file: ``set,row,u1..ud,j,w`` (``j`` counts from 1)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header_written = False
        for label, locs, surfaces in sets:
            if not header_written:
                w.writerow(["set", "row"] + [f"u{i + 1}" for i in range(locs.shape[1])] + ["j", "w"])
                header_written = True
            for n in range(locs.shape[0]):
                for j in range(surfaces.shape[1]):
                    w.writerow([label, n + 1] + [fmt(v) for v in locs[n]] + [j + 1, fmt(surfaces[n, j])])


def read_truth(path):
    """Return ``(locations, w)`` from a truth file.

    Records are grouped into locations by ``(set, row)`` when a ``row``
    column exists, otherwise by their coordinates.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        loc_idx = location_columns(fields, path)
        loc_names = [fields[k] for k in loc_idx]
        for col in ("j", "w"):
            if col not in fields:
                raise IngestionError(f"{path}: missing column {col!r}", row=0, column=col)
        keys, locs, entries = {}, [], []
        for i, rec in enumerate(reader, start=1):
            try:
                j = int(rec["j"]) - 1
                val = float(rec["w"])
                u = [float(rec[c]) for c in loc_names]
                key = (rec.get("set", ""), rec["row"]) if "row" in fields else tuple(u)
            except (TypeError, ValueError):
                raise IngestionError(f"{path}: row {i}: malformed truth record", row=i) from None
            if key not in keys:
                keys[key] = len(locs)
                locs.append(u)
            entries.append((keys[key], j, val))
    if not entries:
        raise IngestionError(f"{path}: no data rows", row=1)
    ptilde = max(e[1] for e in entries) + 1
    w = np.full((len(locs), ptilde), np.nan)
    for n, j, val in entries:
        w[n, j] = val
    if np.isnan(w).any():
        raise IngestionError(f"{path}: incomplete truth (missing coefficients for some locations)")
    return np.array(locs), w


def _write_block(path, iterations, arr, names):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration"] + names)
        for it, row in zip(iterations, arr):
            w.writerow([int(it)] + [fmt(v) for v in row])


def write_draws(out_dir, draws):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pt, h = draws.ptilde, draws.h
    blocks = {
        "beta": (draws.beta, [f"beta_{i + 1}" for i in range(draws.beta.shape[1])]),
        "gamma": (draws.gamma, [f"gamma_{j + 1}_{k + 1}" for j in range(pt) for k in range(h)]),
        "sigma2": (draws.sigma2[:, None], ["sigma2"]),
        "tau2": (draws.tau2, [f"tau2_{j + 1}" for j in range(pt)]),
    }
    paths = []
    for name in DRAW_BLOCKS:
        arr, cols = blocks[name]
        p = out_dir / f"draws_{name}.csv"
        _write_block(p, draws.iterations, arr, cols)
        paths.append(p)
    return paths


def read_draws(draw_dir, seconds=0.0, seed=0, chain=0, config=None):
    draw_dir = Path(draw_dir)
    arrays = {}
    iterations = None
    for name in DRAW_BLOCKS:
        p = draw_dir / f"draws_{name}.csv"
        if not p.exists():
            raise IngestionError(f"missing draws file {p}")
        header, table = read_table(p) if p.stat().st_size else ([], None)
        if table is None or header[0] != "iteration":
            raise IngestionError(f"{p}: malformed draws file")
        arrays[name] = table[:, 1:]
        iterations = table[:, 0].astype(np.int64)
    return PosteriorDraws(
        beta=arrays["beta"], gamma=arrays["gamma"], sigma2=arrays["sigma2"][:, 0],
        tau2=arrays["tau2"], iterations=iterations, seconds=seconds, seed=seed,
        chain=chain, config=config or {},
    )


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def digests(paths, root=None):
    out = {}
    for p in paths:
        p = Path(p)
        key = str(p.relative_to(root)) if root is not None and p.is_relative_to(root) else str(p)
        out[key] = sha256(p)
    return dict(sorted(out.items()))


def write_manifest(path, manifest):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def read_manifest(path):
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"missing manifest {path}")
    with open(path) as fh:
        return json.load(fh)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (np.ndarray, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
