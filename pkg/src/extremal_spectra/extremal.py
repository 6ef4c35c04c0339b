"""Extremal eigenvalues over disjoint unions of scaled generator copies.

A volume-1 union whose k-th eigenvalue is extremal splits into components
realising lower-rank extrema, and in the power variable ``lambda^(d/2)`` the
pieces add up.  That turns the search into a one-dimensional dynamic
programme over split points::

    P[k] = min(generator power at rank k, min_{1 <= j <= k/2} P[j] + P[k-j])

(max for Neumann).  The generator keeps ties, and among equal splits the
smallest ``j`` wins.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .spectra import DIRICHLET, NEUMANN, GeneratorSpec, Spectrum

EXACT = "exact"
FLOAT = "float"
TIE_TOL = 1e-12

TABLE_HEADER = ["k", "power", "split", "generator"]

Progress = Callable[[int, int], None]


class TableFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ExtremalTable:
    """Extremal powers for ranks ``1..k_max``; index 0 of every array is padding.

    ``splits[k] == 0`` marks a rank realised by a whole generator
    (``generator[k]`` says which); otherwise the optimum is the union of the
    optima at ranks ``splits[k]`` and ``k - splits[k]``.
    """

    bc: str
    dimension: int
    generators: tuple[GeneratorSpec, ...]
    powers: np.ndarray
    splits: np.ndarray
    generator: np.ndarray
    mode: str = FLOAT
    tie_tol: float = TIE_TOL
    exact_powers: np.ndarray | None = None
    power_scale: float | None = None

    @property
    def k_max(self) -> int:
        return int(self.powers.size - 1)

    @property
    def is_exact(self) -> bool:
        return self.exact_powers is not None

    def keys(self) -> np.ndarray:
        """Exact integer powers if present, else the float powers."""
        return self.exact_powers if self.exact_powers is not None else self.powers

    def ratio(self) -> np.ndarray:
        """``powers[k] / k`` for k = 1..k_max (index 0 is NaN)."""
        out = np.full(self.powers.size, np.nan)
        out[1:] = self.powers[1:] / np.arange(1, self.powers.size)
        return out


@dataclass(frozen=True)
class Partition:
    rank: int
    parts: tuple[tuple[int, int], ...]  # (generator index, rank j_q)
    scales: tuple[float, ...]

    @property
    def components(self) -> int:
        return len(self.parts)


def _check_spectra(spectra: Sequence[Spectrum], bc: str, k_max: int) -> None:
    if not spectra:
        raise ValueError("at least one generator spectrum is required")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    dims = {s.dimension for s in spectra}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch among generators: {sorted(dims)}")
    bcs = {s.bc for s in spectra}
    if bcs != {bc}:
        raise ValueError(f"mixed or wrong boundary conditions: {sorted(bcs)} (need {bc})")
    for s in spectra:
        if bc == NEUMANN and s.values[0] != 0:
            raise ValueError(f"neumann spectrum {s.generator.label} does not start at 0")
        if s.ranks_available() < k_max:
            need = k_max if bc == DIRICHLET else k_max + 1
            raise ValueError(
                f"spectrum {s.generator.label} has {s.count} values; {need} are required for k_max={k_max}"
            )


def _rank_slice(s: Spectrum, k_max: int) -> slice:
    return slice(0, k_max) if s.bc == DIRICHLET else slice(1, k_max + 1)


def exact_power_keys(spectra: Sequence[Spectrum], k_max: int) -> tuple[list[np.ndarray], float]:
    """Integer generator powers on a common scale: ``power = key * scale``.

    Needs box spectra in even dimension, where ``lambda^(d/2)`` is a rational
    multiple of ``pi^d`` times an integer.
    """
    d = spectra[0].dimension
    if d % 2 or any(s.exact_keys is None or s.power_coeff is None for s in spectra):
        raise ValueError("exact mode needs box generators in even dimension")
    coeffs = [s.power_coeff for s in spectra]
    denom = reduce(lambda a, b: a * b // math.gcd(a, b), (c.denominator for c in coeffs), 1)
    ints = [int(c * denom) for c in coeffs]
    g = reduce(math.gcd, ints)
    mult = [x // g for x in ints]
    out = []
    half = d // 2
    for s, m in zip(spectra, mult):
        keys = s.exact_keys[_rank_slice(s, k_max)]
        top = int(keys[-1]) ** half * m if keys.size else 0
        if 2 * top >= 2**62:
            raise OverflowError("exact power keys overflow 64-bit integers; use float mode")
        out.append(keys.astype(np.int64) ** half * m)
    return out, math.pi**d * g / denom


def _base_values(spectra, k_max, mode):
    """Per-rank generator candidates, stacked: shape (n_generators, k_max + 1)."""
    d = spectra[0].dimension
    if mode == EXACT:
        keys, scale = exact_power_keys(spectra, k_max)
        base = np.zeros((len(spectra), k_max + 1), dtype=np.int64)
        for i, kv in enumerate(keys):
            base[i, 1:] = kv
        return base, scale
    base = np.zeros((len(spectra), k_max + 1))
    for i, s in enumerate(spectra):
        base[i, 1:] = s.values[_rank_slice(s, k_max)] ** (d / 2)
    return base, None


def _run_dp(base: np.ndarray, exact: bool, tol: float, progress: Progress | None):
    """Minimising DP on ``base``; returns (powers, splits, generator)."""
    n_gen, size = base.shape
    k_max = size - 1
    if exact:
        gen_idx = np.argmin(base, axis=0)
    else:
        best = base.min(axis=0)
        gen_idx = np.argmax(base <= best + tol * np.abs(best), axis=0)
    gen_val = base[gen_idx, np.arange(size)]
    p = np.zeros(size, dtype=base.dtype)
    splits = np.zeros(size, dtype=np.int64)
    generator = np.full(size, -1, dtype=np.int64)
    p[1] = gen_val[1]
    generator[1] = gen_idx[1]
    step = max(1, k_max // 100)
    for k in range(2, size):
        h = k // 2
        s = p[1 : h + 1] + p[k - 1 : k - h - 1 : -1]
        if exact:
            j = int(np.argmin(s))
            take = s[j] < gen_val[k]
        else:
            smin = s.min()
            j = int(np.argmax(s <= smin + tol * abs(smin)))
            take = smin < gen_val[k] - tol * abs(gen_val[k])
        if take:
            p[k] = s[j]
            splits[k] = j + 1
        else:
            p[k] = gen_val[k]
            generator[k] = gen_idx[k]
        if progress is not None and (k % step == 0 or k == k_max):
            progress(k, k_max)
    return p, splits, generator


def _default_mode(spectra) -> str:
    ok = spectra[0].dimension % 2 == 0 and all(
        s.exact_keys is not None and s.power_coeff is not None for s in spectra
    )
    return EXACT if ok else FLOAT


def _optimize(spectra, k_max, bc, mode, tol, progress) -> ExtremalTable:
    spectra = list(spectra)
    _check_spectra(spectra, bc, k_max)
    mode = mode or _default_mode(spectra)
    if mode not in (EXACT, FLOAT):
        raise ValueError(f"mode must be {EXACT!r} or {FLOAT!r}")
    base, scale = _base_values(spectra, k_max, mode)
    sign = 1 if bc == DIRICHLET else -1
    p, splits, generator = _run_dp(sign * base, mode == EXACT, tol, progress)
    p = sign * p
    if mode == EXACT:
        exact, powers = p, p.astype(float) * scale
    else:
        exact, powers = None, p.astype(float)
    powers[0] = 0.0
    return ExtremalTable(
        bc=bc,
        dimension=spectra[0].dimension,
        generators=tuple(s.generator for s in spectra),
        powers=powers,
        splits=splits,
        generator=generator,
        mode=mode,
        tie_tol=0.0 if mode == EXACT else tol,
        exact_powers=exact,
        power_scale=scale,
    )


def minimize_dirichlet(spectra: Sequence[Spectrum], k_max: int, mode: str | None = None,
                       tol: float = TIE_TOL, progress: Progress | None = None) -> ExtremalTable:
    """Table of ``lambda_k*^(d/2)`` for k = 1..k_max over the family generated by ``spectra``.

    ``mode`` defaults to exact integer arithmetic when every generator is a
    box in even dimension, float with relative tie tolerance ``tol``
    otherwise.
    """
    return _optimize(spectra, k_max, DIRICHLET, mode, tol, progress)


def maximize_neumann(spectra: Sequence[Spectrum], k_max: int, mode: str | None = None,
                     tol: float = TIE_TOL, progress: Progress | None = None) -> ExtremalTable:
    """Table of ``mu_k*^(d/2)`` for k = 1..k_max; mirror image of :func:`minimize_dirichlet`."""
    return _optimize(spectra, k_max, NEUMANN, mode, tol, progress)


def optimize(spectra: Sequence[Spectrum], k_max: int, **kwargs) -> ExtremalTable:
    bc = spectra[0].bc if spectra else DIRICHLET
    fn = minimize_dirichlet if bc == DIRICHLET else maximize_neumann
    return fn(spectra, k_max, **kwargs)


def _check_rank(table: ExtremalTable, k: int) -> None:
    if not 1 <= k <= table.k_max:
        raise IndexError(f"rank {k} outside 1..{table.k_max}")


def leaves(table: ExtremalTable, k: int) -> list[int]:
    """Ranks of the whole-generator pieces making up the optimum at rank k."""
    _check_rank(table, k)
    out, stack = [], [k]
    while stack:
        r = stack.pop()
        j = int(table.splits[r])
        if j == 0:
            out.append(r)
        else:
            stack.extend((r - j, j))
    return out


def reconstruct(table: ExtremalTable, k: int) -> Partition:
    """Components of the optimum at rank k, largest scale first."""
    keys = table.keys()
    total = keys[k]
    ranks = leaves(table, k)
    d = table.dimension
    parts = []
    for r in ranks:
        frac = int(keys[r]) / int(total) if table.is_exact else float(keys[r]) / float(total)
        parts.append((frac ** (1.0 / d), int(table.generator[r]), r))
    parts.sort(key=lambda t: (-t[0], -t[2], t[1]))
    return Partition(
        rank=k,
        parts=tuple((g, r) for _, g, r in parts),
        scales=tuple(s for s, _, _ in parts),
    )


def component_summary(table: ExtremalTable) -> tuple[np.ndarray, np.ndarray]:
    """Per rank: number of components and the rank of the largest component.

    Computed bottom-up through the split records in O(k_max).
    """
    size = table.k_max + 1
    keys = table.keys()
    nu = np.zeros(size, dtype=np.int64)
    top = np.zeros(size, dtype=np.int64)
    for k in range(1, size):
        j = int(table.splits[k])
        if j == 0:
            nu[k] = 1
            top[k] = k
            continue
        a, b = top[j], top[k - j]
        nu[k] = nu[j] + nu[k - j]
        # larger power means larger scale; equal powers keep the larger rank
        top[k] = a if (keys[a], a) >= (keys[b], b) else b
    return nu, top


def write_table(table: ExtremalTable, csv_path, json_path=None) -> None:
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for k in range(1, table.k_max + 1):
            w.writerow([k, repr(float(table.powers[k])), int(table.splits[k]), int(table.generator[k])])
    meta = {
        "bc": table.bc,
        "dimension": table.dimension,
        "generators": [g.to_dict() for g in table.generators],
        "labels": [g.label for g in table.generators],
        "mode": table.mode,
        "tie_tolerance": table.tie_tol,
        "power_scale": table.power_scale,
        "k_max": table.k_max,
        "version": __version__,
    }
    json_path.write_text(json.dumps(meta, indent=2) + "\n")


def read_table(csv_path, json_path=None) -> ExtremalTable:
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    try:
        meta = json.loads(json_path.read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise TableFormatError(f"{json_path}: invalid JSON sidecar ({exc})") from None
    for key in ("bc", "dimension", "generators", "mode"):
        if key not in meta:
            raise TableFormatError(f"{json_path}: missing field {key!r}")
    generators = tuple(GeneratorSpec.from_dict(g) for g in meta["generators"])
    rows = []
    with csv_path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TABLE_HEADER:
            raise TableFormatError(f"{csv_path}: header must be {','.join(TABLE_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise TableFormatError(f"{csv_path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                k, power, split, gen = int(row[0]), float(row[1]), int(row[2]), int(row[3])
            except ValueError:
                raise TableFormatError(f"{csv_path}:{lineno}: unparsable row {row}") from None
            if k != len(rows) + 1:
                raise TableFormatError(f"{csv_path}:{lineno}: column k must count up from 1, got {k}")
            if not (0 <= split <= k // 2):
                raise TableFormatError(f"{csv_path}:{lineno}: split {split} outside 0..{k // 2}")
            if (split == 0) != (gen >= 0) or gen >= len(generators):
                raise TableFormatError(f"{csv_path}:{lineno}: generator {gen} inconsistent with split {split}")
            if not power > 0:
                raise TableFormatError(f"{csv_path}:{lineno}: power must be positive")
            rows.append((power, split, gen))
    if not rows:
        raise TableFormatError(f"{csv_path}: no rows")
    n = len(rows) + 1
    powers = np.zeros(n)
    splits = np.zeros(n, dtype=np.int64)
    generator = np.full(n, -1, dtype=np.int64)
    for k, (pw, sp, g) in enumerate(rows, start=1):
        powers[k], splits[k], generator[k] = pw, sp, g
    exact = None
    scale = meta.get("power_scale")
    if meta["mode"] == EXACT:
        if not scale:
            raise TableFormatError(f"{json_path}: exact mode needs power_scale")
        exact = np.rint(powers / scale).astype(np.int64)
        exact[0] = 0
        bad = np.flatnonzero(exact.astype(float) * scale != powers)
        if bad.size:
            raise TableFormatError(f"{csv_path}: power at k={int(bad[0])} is not an exact multiple of power_scale")
    return ExtremalTable(
        bc=meta["bc"],
        dimension=int(meta["dimension"]),
        generators=generators,
        powers=powers,
        splits=splits,
        generator=generator,
        mode=meta["mode"],
        tie_tol=float(meta.get("tie_tolerance", TIE_TOL)),
        exact_powers=exact,
        power_scale=scale,
    )
