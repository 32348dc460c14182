"""Shared test utilities."""

import numpy as np

from sqdistill.tomography import WignerGrid

# Pass/fail lines collected by report(); conftest prints them in the
# terminal summary so they survive pytest's output capture.
REPORT_LINES: list[str] = []


def find_peaks(grid: WignerGrid, floor_fraction: float = 0.25,
               min_separation: float = 0.0):
    """Strict local maxima above floor_fraction of the global maximum.

    Maxima closer than ``min_separation`` are merged (strongest wins); noisy
    reconstructions can split one physical peak across neighboring cells.
    """
    v = grid.values
    peak = v.max()
    candidates = []
    for i in range(1, v.shape[0] - 1):
        for j in range(1, v.shape[1] - 1):
            window = v[i - 1:i + 2, j - 1:j + 2]
            if v[i, j] == window.max() and v[i, j] > floor_fraction * peak \
                    and np.count_nonzero(window == v[i, j]) == 1:
                candidates.append((v[i, j], grid.x_axis[i], grid.p_axis[j]))
    candidates.sort(reverse=True)
    out = []
    for _, x, p in candidates:
        if all((x - ox) ** 2 + (p - op) ** 2 >= min_separation**2 for ox, op in out):
            out.append((x, p))
    return out


def report(line: str) -> None:
    """Record an acceptance pass/fail line for the terminal summary."""
    REPORT_LINES.append(line)
    print(line)
