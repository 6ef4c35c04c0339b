"""Indicators computed from an extremal table.

Everything here reads an immutable :class:`ExtremalTable`; nothing mutates
it.  In exact mode comparisons run on the integer power keys, in float mode
on doubles with the table's tie tolerance (or the additivity tolerance for
the additivity audit).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .extremal import ExtremalTable, component_summary, reconstruct
from .spectra import DIRICHLET, Spectrum, unit_ball_volume

ADDITIVITY_RTOL = 1e-9
EXHAUSTIVE_LIMIT = 2000
SAMPLED_PAIRS = 10**6
MAX_LISTED = 100


@dataclass(frozen=True)
class Constants:
    dimension: int
    omega_d: float
    polya_power: float
    bly_power: float
    kroger_power: float

    @classmethod
    def for_dimension(cls, d: int) -> "Constants":
        omega = unit_ball_volume(d)
        polya = (2 * math.pi) ** d / omega
        return cls(
            dimension=d,
            omega_d=omega,
            polya_power=polya,
            bly_power=(d / (d + 2)) ** (d / 2) * polya,
            kroger_power=(d + 2) / 2 * polya,
        )


@dataclass(frozen=True)
class DiagnosticsRow:
    k: int
    power_ratio: float
    is_generator: bool
    nu: int
    r_max: float
    largest_part_rank: int


def generator_ranks(table: ExtremalTable) -> np.ndarray:
    """The ranks at which a whole generator is extremal (the set J), ascending."""
    return np.flatnonzero(table.splits[1:] == 0) + 1


def log_density(J: Iterable[int], x: float) -> float:
    """``log N_J(x) / log x``; 0 when no element of J is <= x."""
    if not x > 1:
        raise ValueError("log-density needs x > 1")
    J = np.asarray(list(J) if not isinstance(J, np.ndarray) else J)
    n = int(np.count_nonzero(J <= x)) if J.size else 0
    return 0.0 if n == 0 else math.log(n) / math.log(x)


def density_curve(J: np.ndarray, xs: Sequence[float]) -> np.ndarray:
    J = np.sort(np.asarray(J))
    counts = np.searchsorted(J, xs, side="right")
    with np.errstate(divide="ignore"):
        out = np.where(counts > 0, np.log(np.maximum(counts, 1)) / np.log(xs), 0.0)
    return out


def largest_scale(table: ExtremalTable, k: int) -> tuple[float, int]:
    """Largest scale factor in the optimum at rank k and the rank of that component."""
    part = reconstruct(table, k)
    return part.scales[0], part.parts[0][1]


def _scale_of(table: ExtremalTable, part_rank: np.ndarray, k: np.ndarray) -> np.ndarray:
    keys = table.keys()
    if table.is_exact:
        frac = np.array([int(keys[a]) / int(keys[b]) for a, b in zip(part_rank, k)])
    else:
        frac = keys[part_rank] / keys[k]
    return frac ** (1.0 / table.dimension)


def component_counts(table: ExtremalTable) -> tuple[np.ndarray, dict[int, int]]:
    """Components per rank (index 0 unused) and the histogram over ranks 1..k_max."""
    nu, _ = component_summary(table)
    values, counts = np.unique(nu[1:], return_counts=True)
    return nu, {int(v): int(c) for v, c in zip(values, counts)}


def rows(table: ExtremalTable) -> list[DiagnosticsRow]:
    cols = per_k_columns(table)
    return [
        DiagnosticsRow(int(k), float(r), bool(g), int(n), float(m), int(lr))
        for k, r, g, n, m, lr in zip(
            cols["k"], cols["ratio"], cols["is_generator"], cols["nu"], cols["r_max"], cols["largest_part_rank"]
        )
    ]


def per_k_columns(table: ExtremalTable) -> dict[str, np.ndarray]:
    nu, top = component_summary(table)
    k = np.arange(1, table.k_max + 1)
    r_max = _scale_of(table, top[1:], k)
    r_max[nu[1:] == 1] = 1.0
    return {
        "k": k,
        "ratio": table.ratio()[1:],
        "is_generator": table.splits[1:] == 0,
        "nu": nu[1:],
        "r_max": r_max,
        "largest_part_rank": top[1:],
    }


@dataclass
class BoundsAudit:
    bound: str
    constant: float
    worst_slack: float
    worst_rank: int
    violations: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_bounds(table: ExtremalTable) -> BoundsAudit:
    """Berezin-Li-Yau lower bound (Dirichlet) or Kroger upper bound (Neumann) on ``powers[k]/k``."""
    c = Constants.for_dimension(table.dimension)
    ratio = table.ratio()[1:]
    if table.bc == DIRICHLET:
        name, const, slack = "berezin-li-yau", c.bly_power, ratio - c.bly_power
    else:
        name, const, slack = "kroger", c.kroger_power, c.kroger_power - ratio
    worst = int(np.argmin(slack))
    bad = (np.flatnonzero(slack < 0) + 1).tolist()
    return BoundsAudit(name, const, float(slack[worst]), worst + 1, bad)


@dataclass
class AdditivityAudit:
    relation: str
    exhaustive: bool
    pairs_checked: int
    violation_count: int = 0
    violations: list[tuple[int, int]] = field(default_factory=list)
    worst_excess: float = 0.0

    @property
    def ok(self) -> bool:
        return self.violation_count == 0


def _pair_excess(table: ExtremalTable, a: np.ndarray, b: np.ndarray, rtol: float):
    """Boolean violation mask and relative excess for pairs (a, b)."""
    sub = table.bc == DIRICHLET
    if table.is_exact:
        p = table.exact_powers
        lhs, rhs = p[a] + p[b], p[a + b]
        bad = lhs < rhs if sub else lhs > rhs
        excess = (rhs - lhs).astype(float) / rhs.astype(float)
    else:
        p = table.powers
        lhs, rhs = p[a] + p[b], p[a + b]
        excess = (rhs - lhs) / rhs
        bad = excess > rtol if sub else -excess > rtol
    return bad, (excess if sub else -excess)


def check_additivity(table: ExtremalTable, sample_pairs=None, *, seed: int = 0,
                     exhaustive_limit: int = EXHAUSTIVE_LIMIT, n_samples: int = SAMPLED_PAIRS,
                     rtol: float = ADDITIVITY_RTOL) -> AdditivityAudit:
    """Check ``P[j] + P[i] >= P[j+i]`` (Dirichlet) or ``<=`` (Neumann) on many pairs.

    Explicit ``sample_pairs`` are checked as given.  Otherwise every pair is
    checked when ``k_max <= exhaustive_limit`` and ``n_samples`` random pairs
    (drawn from ``seed``) are checked beyond that.
    """
    relation = "subadditive" if table.bc == DIRICHLET else "superadditive"
    k_max = table.k_max
    chunks = []
    if sample_pairs is not None:
        pairs = np.asarray(list(sample_pairs), dtype=np.int64).reshape(-1, 2)
        if np.any(pairs < 1) or np.any(pairs.sum(axis=1) > k_max):
            raise ValueError("pairs must be positive with sum at most k_max")
        chunks.append((pairs[:, 0], pairs[:, 1]))
        exhaustive = False
    elif k_max <= exhaustive_limit:
        for k in range(2, k_max + 1):
            j = np.arange(1, k // 2 + 1)
            chunks.append((j, k - j))
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        total = rng.integers(2, k_max + 1, size=n_samples)
        j = 1 + (rng.random(n_samples) * (total // 2)).astype(np.int64)
        chunks.append((j, total - j))
        exhaustive = False
    audit = AdditivityAudit(relation, exhaustive, 0)
    worst = -math.inf
    for a, b in chunks:
        bad, excess = _pair_excess(table, a, b, rtol)
        audit.pairs_checked += int(a.size)
        if excess.size:
            worst = max(worst, float(excess.max()))
        n_bad = int(bad.sum())
        if n_bad:
            audit.violation_count += n_bad
            room = MAX_LISTED - len(audit.violations)
            if room > 0:
                idx = np.flatnonzero(bad)[:room]
                audit.violations.extend((int(a[i]), int(b[i])) for i in idx)
    audit.worst_excess = worst if math.isfinite(worst) else 0.0
    return audit


def split_consistency(table: ExtremalTable) -> list[int]:
    """Ranks whose stored power differs from the sum its split record claims."""
    k = np.flatnonzero(table.splits > 0)
    if k.size == 0:
        return []
    j = table.splits[k]
    if table.is_exact:
        p = table.exact_powers
        bad = p[j] + p[k - j] != p[k]
    else:
        p = table.powers
        bad = np.abs(p[j] + p[k - j] - p[k]) > 1e-12 * p[k]
    return k[bad].tolist()


@dataclass
class WeylFit:
    c1: float
    c2: float
    residual: float
    relative_residual: float
    k_range: tuple[int, int]
    expected_c1: float
    non_weyl: bool


def weyl_fit(spectrum: Spectrum, k_range: tuple[int, int]) -> WeylFit:
    """Least squares for ``lambda_k^(d/2) ~ c1 k + c2 k^((d-1)/d)`` over ranks in ``k_range``.

    ``residual`` is the RMS misfit.  The input is flagged as non-Weyl when the
    relative misfit exceeds 1% or ``c1`` sits more than 25% away from
    ``(2 pi)^d / omega_d``.
    """
    lo, hi = int(k_range[0]), int(k_range[1])
    first = 1 if spectrum.bc == DIRICHLET else 0
    if lo < max(first, 1) or hi > spectrum.ranks_available() or hi < lo:
        raise ValueError(f"k_range {k_range} outside the available ranks")
    if hi - lo + 1 < 100:
        raise ValueError("k_range must cover at least 100 ranks")
    d = spectrum.dimension
    k = np.arange(lo, hi + 1, dtype=float)
    y = spectrum.values[np.arange(lo, hi + 1) - first] ** (d / 2)
    design = np.column_stack([k, k ** ((d - 1) / d)])
    if np.linalg.matrix_rank(design) < 2:
        raise ValueError("degenerate design matrix for the Weyl fit")
    (c1, c2), *_ = np.linalg.lstsq(design, y, rcond=None)
    misfit = y - design @ np.array([c1, c2])
    rms = float(np.sqrt(np.mean(misfit**2)))
    rel = rms / float(np.sqrt(np.mean(y**2)))
    expected = Constants.for_dimension(d).polya_power
    flagged = rel > 1e-2 or abs(c1 / expected - 1) > 0.25
    return WeylFit(float(c1), float(c2), rms, rel, (lo, hi), expected, bool(flagged))


def propagation_check(table: ExtremalTable, k: int, n: int) -> bool:
    """Whether ``powers[n k] == n powers[k]``: n equal copies of the rank-k optimum stay optimal."""
    if k < 1 or n < 1 or n * k > table.k_max:
        raise IndexError(f"need 1 <= k, 1 <= n and n*k <= {table.k_max}")
    if table.is_exact:
        return int(table.exact_powers[n * k]) == n * int(table.exact_powers[k])
    p = table.powers
    return bool(abs(p[n * k] - n * p[k]) <= 1e-12 * p[n * k])


def extremal_ratio_ranks(table: ExtremalTable) -> tuple[float, list[int]]:
    """Global min (Dirichlet) or max (Neumann) of ``powers[k]/k`` and every rank attaining it."""
    ks = range(1, table.k_max + 1)
    if table.is_exact:
        p = [int(v) for v in table.exact_powers]
        best = 1
        for k in ks:
            better = p[k] * best < p[best] * k if table.bc == DIRICHLET else p[k] * best > p[best] * k
            if better:
                best = k
        ranks = [k for k in ks if p[k] * best == p[best] * k]
    else:
        r = table.ratio()[1:]
        best = int(np.argmin(r) if table.bc == DIRICHLET else np.argmax(r)) + 1
        target = r[best - 1]
        ranks = (np.flatnonzero(np.abs(r - target) <= table.tie_tol * target) + 1).tolist()
        best = ranks[0]
    return float(table.ratio()[best]), ranks


def trichotomy_report(table: ExtremalTable) -> dict:
    """Finite-range evidence bearing on the three cases; never a classification."""
    c = Constants.for_dimension(table.dimension)
    k_max = table.k_max
    J = generator_ranks(table)
    tail_start = k_max // 2
    tail = J[J > tail_start]
    ratio, attaining = extremal_ratio_ranks(table)
    dirichlet = table.bc == DIRICHLET
    xs = _geometric_grid(k_max)
    curve = density_curve(J, xs) if xs.size else np.zeros(0)
    cols = per_k_columns(table)
    # r_max just after each generator rank
    after = J[J < k_max] + 1
    r_after = cols["r_max"][after - 1] if after.size else np.zeros(0)
    half = r_after.size // 2
    polya_gap = ratio - c.polya_power if dirichlet else c.polya_power - ratio
    return {
        "note": "finite-range evidence only; it does not decide which case holds",
        "k_max": k_max,
        "J_size": int(J.size),
        "J_max": int(J[-1]) if J.size else None,
        "J_in_upper_half": int(tail.size),
        "log_density": {
            "x": xs.tolist(),
            "F_J": curve.tolist(),
            "final": float(curve[-1]) if curve.size else None,
            "trend_last_decade": _trend(xs, curve),
        },
        "extremal_ratio": ratio,
        "extremal_ratio_kind": "min" if dirichlet else "max",
        "extremal_ratio_ranks": attaining[:MAX_LISTED],
        "extremal_ratio_rank_count": len(attaining),
        "polya_power": c.polya_power,
        "gap_to_polya": polya_gap,
        "r_max_after_J": {
            "first_half_mean": float(r_after[:half].mean()) if half else None,
            "second_half_mean": float(r_after[half:].mean()) if r_after.size - half else None,
        },
        "signatures": {
            "J_keeps_growing": bool(tail.size > 0),
            "finite_J": bool(tail.size == 0),
            "extremal_ratio_attained_repeatedly": len(attaining) > 1,
            "polya_bound_crossed_in_range": bool(polya_gap < 0),
        },
    }


def _geometric_grid(k_max: int, per_decade: int = 20) -> np.ndarray:
    if k_max < 2:
        return np.zeros(0)
    n = max(2, int(math.ceil(per_decade * math.log10(k_max))) + 1)
    xs = np.unique(np.round(np.geomspace(2, k_max, n)).astype(np.int64))
    return xs.astype(float)


def _trend(xs: np.ndarray, curve: np.ndarray):
    if xs.size < 2:
        return None
    sel = xs >= xs[-1] / 10
    if sel.sum() < 2:
        return None
    slope = np.polyfit(np.log10(xs[sel]), curve[sel], 1)[0]
    return float(slope)


def diagnose(table: ExtremalTable, spectrum: Spectrum | None = None, *, seed: int = 0,
             propagation_n: int = 10) -> dict:
    """Every indicator in one JSON-ready dictionary."""
    c = Constants.for_dimension(table.dimension)
    J = generator_ranks(table)
    cols = per_k_columns(table)
    _, hist = component_counts(table)
    bounds = check_bounds(table)
    additivity = check_additivity(table, seed=seed)
    fit = None
    if spectrum is not None:
        hi = min(table.k_max, spectrum.ranks_available())
        lo = max(1, hi // 10)
        if hi - lo + 1 >= 100:
            fit = asdict(weyl_fit(spectrum, (lo, hi)))
    ratio, attaining = extremal_ratio_ranks(table)
    samples = []
    for k in sorted({1, *attaining[:3]}):
        for n in range(2, min(propagation_n, table.k_max // k) + 1):
            samples.append({"k": k, "n": n, "holds": propagation_check(table, k, n)})
    return {
        "metadata": {
            "bc": table.bc,
            "dimension": table.dimension,
            "generators": [g.label for g in table.generators],
            "mode": table.mode,
            "tie_tolerance": table.tie_tol,
            "additivity_tolerance": 0.0 if table.is_exact else ADDITIVITY_RTOL,
            "k_max": table.k_max,
            "seed": seed,
        },
        "constants": asdict(c),
        "J": J.tolist(),
        "per_k": {
            "k": cols["k"].tolist(),
            "ratio": cols["ratio"].tolist(),
            "is_generator": cols["is_generator"].tolist(),
            "nu": cols["nu"].tolist(),
            "r_max": cols["r_max"].tolist(),
            "largest_part_rank": cols["largest_part_rank"].tolist(),
        },
        "histogram": {str(k): v for k, v in sorted(hist.items())},
        "bounds_audit": asdict(bounds),
        "additivity_audit": asdict(additivity),
        "split_consistency_violations": split_consistency(table)[:MAX_LISTED],
        "weyl_fit": fit,
        "propagation_samples": samples,
        "trichotomy_evidence": trichotomy_report(table),
    }


def audit_failures(diag: dict) -> list[str]:
    """Human-readable list of invariant violations in a :func:`diagnose` result."""
    out = []
    b = diag["bounds_audit"]
    if b["violations"]:
        out.append(f"{b['bound']} bound violated at ranks {b['violations'][:10]}")
    a = diag["additivity_audit"]
    if a["violation_count"]:
        out.append(f"{a['relation']} violated on {a['violation_count']} pairs, e.g. {a['violations'][:10]}")
    if diag["split_consistency_violations"]:
        out.append(f"split records inconsistent at ranks {diag['split_consistency_violations'][:10]}")
    return out


def write_diagnostics(diag: dict, out_dir) -> dict[str, Path]:
    """Write the JSON bundle plus plotting CSVs; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "diagnostics.json",
        "per_k": out / "per_k.csv",
        "log_density": out / "log_density.csv",
        "histogram": out / "histogram.csv",
    }
    paths["json"].write_text(json.dumps(diag, indent=1) + "\n")
    pk = diag["per_k"]
    with paths["per_k"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "ratio", "is_generator", "nu", "r_max", "largest_part_rank"])
        for row in zip(pk["k"], pk["ratio"], pk["is_generator"], pk["nu"], pk["r_max"], pk["largest_part_rank"]):
            k, r, g, n, m, lr = row
            w.writerow([k, repr(r), int(g), n, repr(m), lr])
    ld = diag["trichotomy_evidence"]["log_density"]
    with paths["log_density"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "F_J"])
        for x, f in zip(ld["x"], ld["F_J"]):
            w.writerow([int(x), repr(f)])
    with paths["histogram"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["components", "ranks"])
        for k, v in diag["histogram"].items():
            w.writerow([k, v])
    return paths
