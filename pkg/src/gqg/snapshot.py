"""Snapshot persistence: one JSON header line plus raw little-endian arrays.

The header is self-describing (schema version, grid, time, eps, field names
with offsets into the payload) and carries a CRC32 of the payload, so
truncation and corruption are detected on read.  Arrays are stored row-major
as float64; complex envelopes are split into _re/_im pairs.  Writing the same
state twice produces identical bytes.
"""

from __future__ import annotations

import json
import zlib

import numpy as np

from .grid import ChannelGrid
from .states import GPVState, LimitState, PrimitiveState

__all__ = ["SnapshotError", "write_snapshot", "read_snapshot", "inspect_snapshot"]

FORMAT_TAG = "gqg-snapshot"
SCHEMA_VERSION = 1


class SnapshotError(RuntimeError):
    pass


def _fields_of(state):
    if isinstance(state, PrimitiveState):
        return "primitive", {
            "v1": state.v[0],
            "v2": state.v[1],
            "w": state.w,
            "theta": state.theta,
        }
    if isinstance(state, GPVState):
        return "gpv", {
            "pv": state.pv,
            "imbalance1": state.imbalance[0],
            "imbalance2": state.imbalance[1],
            "theta_bot": state.theta_bot,
            "theta_top": state.theta_top,
            "vmean": state.vmean,
        }
    if isinstance(state, LimitState):
        return "limit", {
            "pv": state.pv,
            "theta_bot": state.theta_bot,
            "theta_top": state.theta_top,
            "imbalance_env_re": state.imbalance_env.real,
            "imbalance_env_im": state.imbalance_env.imag,
            "vmean_env_re": state.vmean_env.real,
            "vmean_env_im": state.vmean_env.imag,
        }
    raise SnapshotError(f"cannot snapshot object of type {type(state)!r}")


def write_snapshot(state, path) -> None:
    """Serialize a state; byte-exact round trip with read_snapshot."""
    kind, fields = _fields_of(state)
    payload = bytearray()
    entries = []
    for name, arr in fields.items():
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(np.shape(arr)),
                "offset": len(payload),
                "dtype": "<f8",
            }
        )
        payload.extend(raw)
    header = {
        "format": FORMAT_TAG,
        "version": SCHEMA_VERSION,
        "kind": kind,
        "grid": state.grid.descriptor(),
        "time": float(state.t),
        "eps": float(state.eps) if hasattr(state, "eps") else None,
        "fields": entries,
        "payload_bytes": len(payload),
        "crc32": zlib.crc32(bytes(payload)) & 0xFFFFFFFF,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    with open(path, "wb") as fh:
        fh.write(blob)
        fh.write(bytes(payload))


def _read_header(fh):
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise SnapshotError("truncated header")
    try:
        header = json.loads(line.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"unreadable header: {exc}") from exc
    if header.get("format") != FORMAT_TAG:
        raise SnapshotError(f"not a {FORMAT_TAG} file")
    if header.get("version") != SCHEMA_VERSION:
        raise SnapshotError(f"unsupported schema version {header.get('version')}")
    return header


def inspect_snapshot(path) -> dict:
    """Read and return the header without loading any arrays."""
    with open(path, "rb") as fh:
        return _read_header(fh)


def read_snapshot(path):
    """Load a snapshot back into its state object, verifying the checksum."""
    with open(path, "rb") as fh:
        header = _read_header(fh)
        payload = fh.read()
    if len(payload) != header["payload_bytes"]:
        raise SnapshotError(
            f"payload truncated: expected {header['payload_bytes']} bytes, "
            f"got {len(payload)}"
        )
    if (zlib.crc32(payload) & 0xFFFFFFFF) != header["crc32"]:
        raise SnapshotError("payload checksum mismatch")
    grid = ChannelGrid.from_descriptor(header["grid"])
    arrays = {}
    for entry in header["fields"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arrays[entry["name"]] = np.frombuffer(
            payload, dtype="<f8", count=count, offset=start
        ).reshape(shape).copy()
    t = header["time"]
    eps = header["eps"] if header["eps"] is not None else 1.0
    kind = header["kind"]
    if kind == "primitive":
        return PrimitiveState(
            grid,
            np.stack([arrays["v1"], arrays["v2"]]),
            arrays["w"],
            arrays["theta"],
            t=t,
            eps=eps,
        )
    if kind == "gpv":
        return GPVState(
            grid,
            arrays["pv"],
            np.stack([arrays["imbalance1"], arrays["imbalance2"]]),
            arrays["theta_bot"],
            arrays["theta_top"],
            arrays["vmean"],
            t=t,
            eps=eps,
        )
    if kind == "limit":
        return LimitState(
            grid,
            arrays["pv"],
            arrays["theta_bot"],
            arrays["theta_top"],
            arrays["imbalance_env_re"] + 1j * arrays["imbalance_env_im"],
            arrays["vmean_env_re"] + 1j * arrays["vmean_env_im"],
            t=t,
        )
    raise SnapshotError(f"unknown snapshot kind {kind!r}")
