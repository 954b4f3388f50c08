"""Voltage record serialization.

Binary layout (all integers little-endian)::

    offset  size  field
    0       8     magic b"DCEVREC\\x00"
    8       2     format version (uint16, currently 1)
    10      2     channel count (uint16, always 4)
    12      8     samples per channel (uint64)
    20      4     metadata length L in bytes (uint32)
    24      L     UTF-8 JSON provenance (seed, center_freq, source_id, taps, config)
    24+L    ...   float64 little-endian samples, channel-major (I+, Q+, I-, Q-)

The CSV fallback writes one ``# {json}`` provenance line, a header row of
channel names, then one row per sample with 17 significant digits so values
round-trip exactly.
"""

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .errors import RecordFormatError, VersionError
from .gaussian import CHANNELS
from .measurement import DigitizerConfig, VoltageRecord

MAGIC = b"DCEVREC\x00"
VERSION = 1
_HEADER = struct.Struct("<8sHHQI")


def _meta_to_kwargs(meta):
    cfg = meta.get("config")
    return {
        "taps": np.asarray(meta.get("taps", [1.0]), dtype=float),
        "center_freq": meta.get("center_freq"),
        "seed": meta.get("seed"),
        "config": None if cfg is None else DigitizerConfig(**cfg),
        "source_id": meta.get("source_id"),
    }


def record_to_bytes(rec: VoltageRecord) -> bytes:
    meta = json.dumps(rec.provenance(), sort_keys=True).encode("utf-8")
    head = _HEADER.pack(MAGIC, VERSION, 4, len(rec), len(meta))
    return head + meta + rec.channels.astype("<f8").tobytes()


def record_from_bytes(data: bytes) -> VoltageRecord:
    if len(data) < _HEADER.size:
        raise RecordFormatError("truncated header")
    magic, version, n_ch, n, meta_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise RecordFormatError("not a voltage record (bad magic bytes)")
    if version != VERSION:
        raise VersionError(f"unsupported record format version {version}")
    if n_ch != 4:
        raise RecordFormatError(f"expected 4 channels, found {n_ch}")
    start = _HEADER.size + meta_len
    if len(data) != start + 8 * n_ch * n:
        raise RecordFormatError("payload length does not match header")
    meta = json.loads(data[_HEADER.size:start].decode("utf-8"))
    samples = np.frombuffer(data, dtype="<f8", offset=start).reshape(n_ch, n)
    return VoltageRecord(samples.astype(float), **_meta_to_kwargs(meta))


def write_record(rec: VoltageRecord, path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        path.write_text(record_to_csv(rec), encoding="utf-8")
    else:
        path.write_bytes(record_to_bytes(rec))


def read_record(path) -> VoltageRecord:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return record_from_csv(path.read_text(encoding="utf-8"))
    return record_from_bytes(path.read_bytes())


def record_to_csv(rec: VoltageRecord) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(rec.provenance(), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CHANNELS)
    for row in rec.as_samples():
        writer.writerow([format(v, ".17g") for v in row])
    return buf.getvalue()


def record_from_csv(text: str) -> VoltageRecord:
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        meta = json.loads(lines[0][1:])
        lines = lines[1:]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or tuple(header) != CHANNELS:
        raise RecordFormatError(f"CSV header must be {','.join(CHANNELS)}")
    rows = [[float(v) for v in row] for row in reader if row]
    if any(len(r) != 4 for r in rows):
        raise RecordFormatError("every CSV row needs four values")
    return VoltageRecord.from_samples(np.array(rows).reshape(-1, 4), **_meta_to_kwargs(meta))
