"""Readers and writers for spectra, timetags, histograms, manifests, configs and reports.

Text formats are tab separated with '#' header lines; the binary timetag
format is little-endian with fixed-width fields.
"""

import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .analysis import PolarizationSeries
from .data import DataSeries, Spectrum
from .errors import ConfigError, FormatError
from .photon_mc import ClickStream, CorrelationHistogram

# ---------------------------------------------------------------- helpers


def _fmt(value):
    """Integers stay integers; everything else is the shortest exact repr."""
    value = float(value)
    if value.is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


def _parse_float(text, path, line):
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f"not a number: {text!r}", line=line, path=path) from None
    if "," in text or not math.isfinite(value):
        raise FormatError(f"not a finite number: {text!r}", line=line, path=path)
    return value


def _lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except UnicodeDecodeError:
        raise FormatError("file is not UTF-8 text", path=str(path)) from None


def _header(text):
    body = text[1:].strip()
    if "=" not in body:
        return None
    key, value = body.split("=", 1)
    return key.strip(), value.strip()


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------- spectra


def write_spectrum(spectrum, path):
    out = [f"# axis_unit={spectrum.axis_unit}"]
    out += [f"# {k}={v}" for k, v in spectrum.metadata.items() if k != "axis_unit"]
    for i in range(len(spectrum)):
        row = [f"{spectrum.axis[i]:.6f}", _fmt(spectrum.counts[i])]
        if spectrum.sigma is not None:
            row.append(_fmt(spectrum.sigma[i]))
        out.append("\t".join(row))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def read_spectrum(path):
    path = str(path)
    meta, axis, counts, sigma = {}, [], [], []
    unit = "nm"
    for number, text in enumerate(_lines(path), start=1):
        if not text.strip():
            continue
        if text.startswith("#"):
            item = _header(text)
            if item:
                if item[0] == "axis_unit":
                    unit = item[1]
                else:
                    meta[item[0]] = item[1]
            continue
        parts = text.split("\t")
        if len(parts) not in (2, 3):
            raise FormatError(f"expected 2 or 3 tab-separated columns, got {len(parts)}",
                              line=number, path=path)
        x = _parse_float(parts[0], path, number)
        y = _parse_float(parts[1], path, number)
        if y < 0:
            raise FormatError("negative counts", line=number, path=path)
        if axis and not x > axis[-1]:
            raise FormatError("axis is not strictly increasing", line=number, path=path)
        if (sigma and len(parts) != 3) or (len(parts) == 3 and len(sigma) != len(axis)):
            raise FormatError("sigma column present on some lines only", line=number,
                              path=path)
        axis.append(x)
        counts.append(y)
        if len(parts) == 3:
            sigma.append(_parse_float(parts[2], path, number))
    if not axis:
        raise FormatError("no data lines", path=path)
    return Spectrum(axis, counts, sigma or None, unit, meta)


# ---------------------------------------------------------------- timetags

MAGIC = b"EMLTTAG1"
VERSION = 1
HEADER = struct.Struct("<8sII")
COUNT = struct.Struct("<Q")
RECORD = np.dtype([("channel", "<u2"), ("pad", "V6"), ("timestamp", "<u8")])


def _merged(stream):
    chans = [np.full(len(c), i, dtype=np.uint16) for i, c in enumerate(stream.channels)]
    times = np.concatenate([c.astype(np.uint64) for c in stream.channels] or
                           [np.zeros(0, np.uint64)])
    chans = np.concatenate(chans or [np.zeros(0, np.uint16)])
    order = np.lexsort((chans, times))
    return chans[order], times[order]


def write_timetags(stream, path, format="binary"):
    chans, times = _merged(stream)
    if format == "binary":
        records = np.zeros(len(times), dtype=RECORD)
        records["channel"] = chans
        records["timestamp"] = times
        with open(path, "wb") as fh:
            fh.write(HEADER.pack(MAGIC, VERSION, 0))
            fh.write(COUNT.pack(len(times)))
            fh.write(records.tobytes())
    elif format == "text":
        body = "".join(f"{c}\t{t}\n" for c, t in zip(chans.tolist(), times.tolist()))
        Path(path).write_text("# channel\ttimestamp_ps\n" + body, encoding="utf-8")
    else:
        raise FormatError(f"unknown timetag format {format!r}", path=str(path))


def _split_channels(chans, times, path):
    n = int(chans.max()) + 1 if chans.size else 0
    channels = []
    for ch in range(n):
        t = times[chans == ch].astype(np.int64)
        if t.size > 1 and np.any(np.diff(t) < 0):
            raise FormatError(f"timestamps of channel {ch} are not nondecreasing",
                              path=path)
        channels.append(t)
    duration = int(times.max()) if times.size else 0
    return ClickStream(channels, duration, {})


def read_timetags(path):
    """Binary or text timetag file (detected from the magic bytes)."""
    path = str(path)
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if head[:8] != MAGIC:
            if head[:1] in (b"#",) or head[:1].isdigit() or not head:
                return _read_timetags_text(path)
            raise FormatError("bad magic: not a timetag file", path=path)
        if len(head) < HEADER.size:
            raise FormatError("truncated header", path=path)
        _, version, _ = HEADER.unpack(head)
        if version != VERSION:
            raise FormatError(f"unsupported timetag version {version}", path=path)
        raw = fh.read(COUNT.size)
        if len(raw) < COUNT.size:
            raise FormatError("truncated header", path=path)
        (count,) = COUNT.unpack(raw)
        payload = fh.read()
    if len(payload) != count * RECORD.itemsize:
        raise FormatError(f"truncated record: header declares {count} records, "
                          f"payload holds {len(payload) / RECORD.itemsize:g}", path=path)
    records = np.frombuffer(payload, dtype=RECORD)
    return _split_channels(records["channel"], records["timestamp"], path)


def _read_timetags_text(path):
    chans, times = [], []
    for number, text in enumerate(_lines(path), start=1):
        if not text.strip() or text.startswith("#"):
            continue
        parts = text.split("\t")
        if len(parts) != 2 or not (parts[0].isdigit() and parts[1].isdigit()):
            raise FormatError("expected 'channel<TAB>timestamp_ps' integers",
                              line=number, path=path)
        chans.append(int(parts[0]))
        times.append(int(parts[1]))
    return _split_channels(np.asarray(chans, dtype=np.int64),
                           np.asarray(times, dtype=np.uint64), path)


# ---------------------------------------------------------------- histograms and series


def write_histogram(hist, path):
    lines = [f"# bin_width_ps={hist.bin_width}", f"# range_ps={hist.range}",
             f"# total_starts={hist.total_starts}", f"# total_stops={hist.total_stops}",
             "# delay_ps\tcounts"]
    lo = -hist.range + hist.bin_width * np.arange(len(hist.counts))
    lines += [f"{int(a)}\t{_fmt(c)}" for a, c in zip(lo, hist.counts)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_histogram(path):
    path = str(path)
    meta, edges, counts = {}, [], []
    for number, text in enumerate(_lines(path), start=1):
        if not text.strip():
            continue
        if text.startswith("#"):
            item = _header(text)
            if item:
                meta[item[0]] = item[1]
            continue
        parts = text.split("\t")
        if len(parts) != 2:
            raise FormatError("expected 'delay_ps<TAB>counts'", line=number, path=path)
        edges.append(_parse_float(parts[0], path, number))
        counts.append(_parse_float(parts[1], path, number))
    if not edges:
        raise FormatError("no histogram bins", path=path)
    edges = np.asarray(edges)
    try:
        width = int(meta["bin_width_ps"])
        span = int(meta["range_ps"])
    except (KeyError, ValueError):
        width = int(round(edges[1] - edges[0])) if len(edges) > 1 else 1
        span = int(round(-edges[0]))
    expected = -span + width * np.arange(len(edges))
    if not np.array_equal(edges, expected) or len(edges) * width != 2 * span:
        raise FormatError("bins are not uniform and symmetric about zero delay", path=path)
    counts = np.asarray(counts)
    if np.all(counts == np.round(counts)):
        counts = counts.astype(np.int64)
    return CorrelationHistogram(width, span, counts, int(meta.get("total_starts", 0)),
                                int(meta.get("total_stops", 0)))


def write_series(series, path, header=None):
    lines = [f"# {k}={v}" for k, v in (header or {}).items()]
    for i in range(len(series)):
        row = [_fmt(series.x[i]), _fmt(series.y[i])]
        if series.sigma is not None:
            row.append(_fmt(series.sigma[i]))
        lines.append("\t".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table(path):
    """Numeric tab-separated columns plus the '#' key=value header."""
    path = str(path)
    meta, rows, width = {}, [], None
    for number, text in enumerate(_lines(path), start=1):
        if not text.strip():
            continue
        if text.startswith("#"):
            item = _header(text)
            if item:
                meta[item[0]] = item[1]
            continue
        parts = text.split("\t")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise FormatError(f"expected {width} columns, got {len(parts)}", line=number,
                              path=path)
        rows.append([_parse_float(p, path, number) for p in parts])
    if not rows:
        raise FormatError("no data lines", path=path)
    return np.asarray(rows), meta


def read_series(path):
    table, _ = read_table(path)
    if table.shape[1] not in (2, 3):
        raise FormatError("series files hold x, y and optional sigma", path=str(path))
    sigma = table[:, 2] if table.shape[1] == 3 else None
    try:
        return DataSeries(table[:, 0], table[:, 1], sigma)
    except Exception as exc:
        raise FormatError(str(exc), path=str(path)) from None


def read_values(path):
    """Single-column file of values (the first column if there are more)."""
    table, _ = read_table(path)
    return table[:, 0]


# ---------------------------------------------------------------- manifests


def read_manifest(path):
    """Polarization manifest: ``angle_convention=...`` plus ``<angle>=<spectrum path>``."""
    path = Path(path)
    convention = "analyzer"
    entries = {}
    for number, text in enumerate(_lines(path), start=1):
        text = text.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise FormatError("expected key=value", line=number, path=str(path))
        key, value = (part.strip() for part in text.split("=", 1))
        if key == "angle_convention":
            convention = value
            continue
        angle = _parse_float(key, str(path), number)
        if angle in entries:
            raise FormatError(f"duplicate angle {key}", line=number, path=str(path))
        target = (path.parent / value).resolve()
        if not target.is_file():
            raise FormatError(f"spectrum file not found: {value}", line=number,
                              path=str(path))
        entries[angle] = target
    if not entries:
        raise FormatError("manifest lists no spectra", path=str(path))
    angles = sorted(entries)
    spectra = [read_spectrum(entries[a]) for a in angles]
    try:
        return PolarizationSeries(angles, spectra, convention)
    except Exception as exc:
        raise FormatError(str(exc), path=str(path)) from None


def write_manifest(series, path, prefix="angle"):
    """Write one spectrum file per angle next to the manifest."""
    path = Path(path)
    lines = [f"angle_convention={series.angle_convention}"]
    for angle, spectrum in zip(series.angles, series.spectra):
        name = f"{prefix}_{angle:07.3f}.txt"
        write_spectrum(spectrum, path.parent / name)
        lines.append(f"{_fmt(angle)}={name}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- config


@dataclass
class Config:
    seed: int | None = None
    irf_fwhm_mhz: float | None = None
    irf_sigma_mhz: float | None = None
    coefficient: int | None = None
    n_draws: int | None = None
    resolution_nm: float | None = None
    window_lo_nm: float | None = None
    window_hi_nm: float | None = None
    angle_convention: str | None = None
    bin_width_ps: int | None = None
    range_ps: int | None = None
    rep_period_ps: int | None = None
    n_pulses: int | None = None
    p_emit: float | None = None
    p_double: float | None = None
    t1_ns: float | None = None
    t1_sigma_ns: float | None = None
    background_mode: bool | None = None
    gamma_tl_mhz: float | None = None

    def set(self):
        return {f.name: getattr(self, f.name) for f in fields(self)
                if getattr(self, f.name) is not None}


_CONFIG_TYPES = {"seed": int, "coefficient": int, "n_draws": int, "bin_width_ps": int,
                 "range_ps": int, "rep_period_ps": int, "n_pulses": int,
                 "angle_convention": str, "background_mode": bool}


def _convert(key, text, path, line):
    kind = _CONFIG_TYPES.get(key, float)
    try:
        if kind is bool:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"type mismatch for {key!r}: expected {kind.__name__}, "
                          f"got {text!r}", line=line, path=path) from None


def read_config(path):
    path = str(path)
    known = {f.name for f in fields(Config)}
    values = {}
    for number, text in enumerate(_lines(path), start=1):
        text = text.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError("expected key = value", line=number, path=path)
        key, value = (part.strip() for part in text.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", line=number, path=path)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", line=number, path=path)
        values[key] = _convert(key, value, path, number)
    return Config(**values)


# ---------------------------------------------------------------- reports

_NUM = {"type": ["number", "null"]}
REPORT_SCHEMA = {
    "type": "object",
    "required": ["tool", "version", "command", "invocation", "seed", "timestamp",
                 "inputs", "parameters", "converged"],
    "properties": {
        "tool": {"const": "emitterlab"},
        "version": {"type": "string"},
        "command": {"type": "string"},
        "invocation": {"type": "array", "items": {"type": "string"}},
        "seed": {"type": ["integer", "null"]},
        "timestamp": {"type": "string"},
        "inputs": {"type": "array", "items": {
            "type": "object", "required": ["path", "sha256"],
            "properties": {"path": {"type": "string"},
                           "sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"}}}},
        "parameters": {"type": "object", "additionalProperties": {
            "type": "object", "required": ["value", "sigma", "unit"],
            "properties": {"value": _NUM, "sigma": _NUM, "unit": {"type": "string"}},
            "additionalProperties": False}},
        "converged": {"type": "boolean"},
        "diagnostics": {"type": "object"},
        "notes": {"type": "array", "items": {"type": "string"}},
    },
    "additionalProperties": False,
}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def make_report(command, invocation, seed, inputs=(), parameters=None, converged=True,
                diagnostics=None, notes=None, timestamp=""):
    """Assemble a report; ``parameters`` maps name -> (value, sigma, unit)."""
    params = {}
    for name, (value, sigma, unit) in (parameters or {}).items():
        params[name] = {"value": value, "sigma": sigma, "unit": unit}
    doc = {
        "tool": "emitterlab",
        "version": __version__,
        "command": command,
        "invocation": [str(a) for a in invocation],
        "seed": seed,
        "timestamp": timestamp,
        "inputs": [{"path": str(p), "sha256": file_digest(p)} for p in inputs],
        "parameters": params,
        "converged": bool(converged),
        "diagnostics": diagnostics or {},
        "notes": list(notes or []),
    }
    return _clean(doc)


def validate_report(doc):
    try:
        jsonschema.validate(doc, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise FormatError(f"report does not match the schema: {exc.message}") from None


def dump_report(doc):
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(doc, path):
    doc = _clean(doc)
    validate_report(doc)
    tmp = f"{path}.tmp{os.getpid()}"
    Path(tmp).write_text(dump_report(doc), encoding="utf-8")
    os.replace(tmp, path)


def read_report(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", line=exc.lineno, path=str(path)) from None
    validate_report(doc)
    return doc
