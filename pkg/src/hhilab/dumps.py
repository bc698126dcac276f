"""Plot-ready CSV dumps of projector blocks, kernels and eigenvalues."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .calderon import CalderonProjector
from .green import kernel_F
from .operators import SpectralData


def _writer(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = path.open("w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def _fmt(x) -> str:
    return format(float(x), ".17g")


def dump_blocks(D: CalderonProjector, path, *, stride: int = 1) -> Path:
    """Rows ``(component_i, component_j, k, l, row, col, value)``; components are ``0`` and ``beta/2``."""
    names = ("0", "beta/2")
    fh, w = _writer(path)
    with fh:
        w.writerow(["component_i", "component_j", "k", "l", "row", "col", "value"])
        idx = np.arange(0, D.grid.n, stride)
        for i in (0, 1):
            for j in (0, 1):
                for k in (0, 1):
                    for l in (0, 1):
                        b = D.block(i, j, k, l)
                        for r in idx:
                            for c in idx:
                                w.writerow([names[i], names[j], k, l, int(r), int(c), _fmt(b[r, c])])
    return Path(path)


def dump_kernel(spec: SpectralData, beta: float, taus, path, *, stride: int = 1) -> Path:
    """Rows ``(tau, i, j, F_ij)`` for each requested ``tau``."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["tau", "i", "j", "F_ij"])
        idx = np.arange(0, spec.n, stride)
        for tau in taus:
            f = kernel_F(spec, beta, tau).matrix
            for r in idx:
                for c in idx:
                    w.writerow([_fmt(tau), int(r), int(c), _fmt(f[r, c])])
    return Path(path)


def dump_eigenvalues(spec: SpectralData, path) -> Path:
    """Rows ``(index, value)`` with the eigenvalues of ``eps^2``."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["index", "value"])
        for k, v in enumerate(spec.eigenvalues):
            w.writerow([k, _fmt(v)])
    return Path(path)
