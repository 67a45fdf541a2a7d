"""File formats: results ledgers, trajectory exports, measure CSV.

All numeric text is written with repr-faithful precision (%.17g) so that a
fixed seed reproduces every artifact byte for byte.  Wall-clock timings go
only to the JSONL records and the manifest, never to the CSV ledgers, which
are the files compared in reproducibility checks.

Trajectory binary layout (little endian):
    magic   4 bytes  b"SBTJ"
    version u32      1
    m       u32      modes per state
    count   u64      number of rows
    body    count * (1 + m) float64: t followed by c_1..c_m, row major
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .measures import ParticleMeasure
from .solver import Trajectory
from .spectral import SpectralField

_MAGIC = b"SBTJ"
_VERSION = 1

RESULTS_HEADER = "op,t,h_spec,x_spec,mean_re,mean_im,stderr,n"
RESIDUALS_HEADER = "t,res_re,res_im,mc_err,quad_err"


def fmt(value: float) -> str:
    return format(float(value), ".17g")


# ---------------------------------------------------------------------------
# results ledger

class ResultsLedger:
    """Collects estimate records; flushed as CSV rows plus JSONL lines."""

    def __init__(self, seed: int):
        self.seed = seed
        self.rows = []
        self.records = []

    def add(self, op: str, t: float, h_spec: str, x_spec: str, mean: complex,
            stderr: float, n: int, params: dict | None = None,
            wall_time_s: float = 0.0) -> None:
        self.rows.append(",".join([
            op, fmt(t), h_spec or "0", x_spec or "0",
            fmt(mean.real), fmt(mean.imag), fmt(stderr), str(n),
        ]))
        self.records.append({
            "op": op,
            "params": {"t": t, "h": h_spec or "0", "x": x_spec or "0",
                       **(params or {})},
            "mean_re": mean.real,
            "mean_im": mean.imag,
            "stderr": stderr,
            "n": n,
            "seed": self.seed,
            "wall_time_s": wall_time_s,
        })

    def write(self, out_dir: Path) -> list[Path]:
        csv_path = out_dir / "results.csv"
        jsonl_path = out_dir / "results.jsonl"
        csv_path.write_text("\n".join([RESULTS_HEADER, *self.rows]) + "\n")
        with jsonl_path.open("w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        return [csv_path, jsonl_path]


def write_residuals(path: Path, rows) -> None:
    """rows: iterables of (t, res complex, mc_err, quad_err)."""
    lines = [RESIDUALS_HEADER]
    for t, res, mc_err, quad_err in rows:
        lines.append(",".join([fmt(t), fmt(res.real), fmt(res.imag),
                               fmt(mc_err), fmt(quad_err)]))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# trajectories

def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    m = traj.states[0].m
    header = "t," + ",".join(f"c_{k}" for k in range(1, m + 1))
    lines = [header]
    for t, state in zip(traj.times, traj.states):
        lines.append(",".join([fmt(t), *(fmt(c) for c in state.coeffs)]))
    path.write_text("\n".join(lines) + "\n")


def write_trajectory_bin(path: Path, traj: Trajectory) -> None:
    m = traj.states[0].m
    count = len(traj.states)
    body = np.empty((count, 1 + m))
    body[:, 0] = traj.times
    body[:, 1:] = traj.coeff_matrix()
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIQ", _VERSION, m, count))
        fh.write(body.astype("<f8").tobytes())


def read_trajectory_bin(path: Path) -> Trajectory:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ConfigError(f"{path}: not a trajectory file")
    version, m, count = struct.unpack("<IIQ", raw[4:20])
    if version != _VERSION:
        raise ConfigError(f"{path}: unsupported version {version}")
    body = np.frombuffer(raw[20:], dtype="<f8").reshape(count, 1 + m)
    states = tuple(SpectralField(row) for row in body[:, 1:])
    return Trajectory(body[:, 0].copy(), states)


# ---------------------------------------------------------------------------
# measures

def write_measure_csv(path: Path, mu: ParticleMeasure) -> None:
    header = "w," + ",".join(f"c_{k}" for k in range(1, mu.m + 1))
    lines = [header]
    for w, row in zip(mu.weights, mu.particles):
        lines.append(",".join([fmt(w), *(fmt(c) for c in row)]))
    path.write_text("\n".join(lines) + "\n")


def read_measure_csv(path: Path) -> ParticleMeasure:
    lines = Path(path).read_text().strip().splitlines()
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return ParticleMeasure(data[:, 1:], data[:, 0])
