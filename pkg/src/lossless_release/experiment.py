"""Variance of lossless versus independent gradual release over a budget grid."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .ledger import ledger_init

MODES = ("independent", "lossless")
BLOCK = 100_000


@dataclass
class ExperimentConfig:
    rho_grid: list
    repetitions: int = 1_000_000
    seed: int = 0
    modes: tuple = MODES
    sensitivity: float = 1.0

    def __post_init__(self):
        self.rho_grid = [float(r) for r in self.rho_grid]
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.rho_grid or any(r <= 0 for r in self.rho_grid):
            raise ValueError("grid must be non-empty and positive")
        if any(b <= a for a, b in zip(self.rho_grid, self.rho_grid[1:])):
            raise ValueError("grid must be strictly increasing")
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r}")


def log_grid(lo: float, hi: float, n: int) -> list:
    if n == 1:
        return [float(hi)]
    return np.geomspace(lo, hi, n).tolist()


def parse_grid_spec(spec: str) -> list:
    """``"lo:hi:n"`` -> n log-spaced budgets from lo to hi."""
    try:
        lo, hi, n = spec.split(":")
        return log_grid(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise ValueError(f"grid spec must look like lo:hi:n, got {spec!r}") from exc


def block_generators(seed: int, n_blocks: int):
    """Independent counter-based streams, one per block of repetitions."""
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    return [np.random.Generator(np.random.Philox(s)) for s in children]


def theoretical_variance(mode, grid, j, sensitivity=1.0):
    rho = grid[j]
    if mode == "lossless":
        return sensitivity**2 / (2 * rho)
    spent = grid[j] - (grid[j - 1] if j else 0.0)
    return sensitivity**2 / (2 * spent)


def _block_moments(mode, grid, n, sensitivity, rng):
    """Per-grid-point sum and sum of squares of the noise for one block."""
    sums = np.zeros(len(grid))
    sq = np.zeros(len(grid))
    if mode == "lossless":
        ledger = ledger_init(np.zeros(n), sensitivity, "gaussian")
        for j, rho in enumerate(grid):
            y = ledger.release(rho, rng)
            sums[j], sq[j] = y.sum(), y @ y
            if j:
                # only the latest release is ever a neighbor in gradual order
                ledger.entries.pop(grid[j - 1])
    else:
        for j in range(len(grid)):
            y = rng.normal(0.0, math.sqrt(theoretical_variance(mode, grid, j, sensitivity)), n)
            sums[j], sq[j] = y.sum(), y @ y
    return sums, sq


def simulate(config: ExperimentConfig) -> list[dict]:
    grid = config.rho_grid
    n_blocks = -(-config.repetitions // BLOCK)
    rows = []
    for m_idx, mode in enumerate(config.modes):
        gens = block_generators(config.seed + 1_000_003 * m_idx, n_blocks)
        tot = np.zeros(len(grid))
        tot_sq = np.zeros(len(grid))
        left = config.repetitions
        for rng in gens:
            n = min(BLOCK, left)
            s, q = _block_moments(mode, grid, n, config.sensitivity, rng)
            tot += s
            tot_sq += q
            left -= n
        N = config.repetitions
        mean = tot / N
        var = (tot_sq - N * mean**2) / max(N - 1, 1)
        for j, rho in enumerate(grid):
            rows.append(
                {
                    "rho": rho,
                    "mode": mode,
                    "n_releases": j + 1,
                    "empirical_variance": float(var[j]),
                    "theoretical_variance": theoretical_variance(mode, grid, j, config.sensitivity),
                }
            )
    return rows


FIELDS = ["rho", "mode", "n_releases", "empirical_variance", "theoretical_variance"]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def run_fig2(config: ExperimentConfig) -> str:
    """Simulate both modes and return the CSV document."""
    return rows_to_csv(simulate(config))
