"""Unit-volume eigenvalue sequences for generator domains.

Built-in generators are d-dimensional boxes with rational side ratios and the
planar disk.  Anything else can be supplied as a plain text file.  Every
spectrum carries ``complete_below``: all eigenvalues up to that value are
present, with multiplicity, and nothing above it is.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from pathlib import Path
from typing import Sequence

import numpy as np

from .special import zeros_for_orders

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
BOUNDARY_CONDITIONS = (DIRICHLET, NEUMANN)

WEYL_MARGIN = 1.3
# exact keys must survive the round trip through a double
MAX_EXACT_KEY = 2**53


class SpectrumFormatError(ValueError):
    pass


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _check_bc(bc: str) -> str:
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"boundary condition must be one of {BOUNDARY_CONDITIONS}, got {bc!r}")
    return bc


@dataclass(frozen=True)
class GeneratorSpec:
    """Description of one generator domain, always normalised to volume 1.

    For boxes ``side_ratios`` are the side lengths up to a common factor,
    so ``(1, 5)`` is the 1:5 rectangle.
    """

    kind: str
    bc: str
    dimension: int = 2
    side_ratios: tuple[Fraction, ...] | None = None
    path: str | None = None
    label: str = ""

    def __post_init__(self):
        _check_bc(self.bc)
        if self.dimension < 2:
            raise ValueError("dimension must be at least 2")
        if self.kind == "box":
            if self.side_ratios is None or len(self.side_ratios) != self.dimension:
                raise ValueError("box needs exactly one side ratio per dimension")
            ratios = tuple(_as_fraction(r) for r in self.side_ratios)
            if any(r <= 0 for r in ratios):
                raise ValueError("side ratios must be positive")
            object.__setattr__(self, "side_ratios", ratios)
        elif self.kind == "disk":
            if self.dimension != 2:
                raise ValueError("the disk generator requires dimension 2")
        elif self.kind == "explicit":
            if not self.path:
                raise ValueError("explicit generator needs a path")
        else:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        if self.kind == "box":
            r = self.side_ratios
            if self.dimension == 2 and r[0] == r[1]:
                return "square"
            body = "-".join(str(x).replace("/", "_") for x in r)
            return f"rect-{body}" if self.dimension == 2 else f"box-{body}"
        if self.kind == "disk":
            return "disk"
        return Path(self.path).stem

    @classmethod
    def from_token(cls, token: str, bc: str, dimension: int = 2) -> "GeneratorSpec":
        """Parse ``square``, ``rect:p:q``, ``box:r1:...:rd``, ``disk`` or ``file:path``."""
        if token == "square":
            return cls("box", bc, 2, (Fraction(1), Fraction(1)))
        if token == "disk":
            return cls("disk", bc, 2)
        head, _, rest = token.partition(":")
        if head == "file" and rest:
            return cls("explicit", bc, dimension, path=rest)
        if head in ("rect", "box") and rest:
            ratios = tuple(_as_fraction(p) for p in rest.split(":"))
            if head == "rect" and len(ratios) != 2:
                raise ValueError(f"rect needs two ratios: {token!r}")
            return cls("box", bc, len(ratios), ratios)
        raise ValueError(f"cannot parse generator {token!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "bc": self.bc, "dimension": self.dimension, "label": self.label}
        if self.side_ratios is not None:
            out["side_ratios"] = [str(r) for r in self.side_ratios]
        if self.path is not None:
            out["path"] = self.path
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        ratios = data.get("side_ratios")
        return cls(
            data["kind"],
            data["bc"],
            int(data["dimension"]),
            tuple(Fraction(r) for r in ratios) if ratios is not None else None,
            data.get("path"),
            data.get("label", ""),
        )


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise ValueError("side ratios must be rational; pass an int, Fraction or 'p/q' string")
    text = str(value).strip()
    if not re.fullmatch(r"\d+(/\d+)?", text):
        raise ValueError(f"side ratio {value!r} is not a positive rational p/q")
    return Fraction(text)


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalues of the volume-1 generator, multiplicities expanded.

    Dirichlet values are indexed from rank 1 (``values[0] = lambda_1``);
    Neumann values from rank 0 (``values[0] = mu_0 = 0``).  For boxes,
    ``values[i] == key_scale * exact_keys[i]`` and ``power_coeff`` is the
    rational ``c`` with ``lambda ** (d/2) == pi**d * c * key ** (d/2)``
    (even ``d`` only).
    """

    generator: GeneratorSpec
    values: np.ndarray
    complete_below: float
    exact_keys: np.ndarray | None = None
    key_scale: float | None = None
    power_coeff: Fraction | None = field(default=None)

    @property
    def count(self) -> int:
        return int(self.values.size)

    @property
    def bc(self) -> str:
        return self.generator.bc

    @property
    def dimension(self) -> int:
        return self.generator.dimension

    def eigenvalue(self, k: int) -> float:
        """The rank-k eigenvalue (Dirichlet ranks start at 1, Neumann at 0)."""
        return float(self.values[k - 1 if self.bc == DIRICHLET else k])

    def ranks_available(self) -> int:
        """Largest rank k whose eigenvalue is present."""
        return self.count if self.bc == DIRICHLET else self.count - 1


def weyl_cutoff(min_count: int, d: int) -> float:
    """One-term Weyl estimate for the volume-1 eigenvalue of rank ``min_count``, padded."""
    return (2 * math.pi) ** 2 * (min_count / unit_ball_volume(d)) ** (2 / d) * WEYL_MARGIN


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def box_key_weights(ratios: Sequence[Fraction]) -> tuple[list[int], Fraction]:
    """Integer weights ``W_i`` and rational ``g`` with ``sum m_i^2 / r_i^2 = g * sum W_i m_i^2``."""
    w = [1 / (r * r) for r in ratios]
    denom = reduce(_lcm, (x.denominator for x in w), 1)
    ints = [int(x * denom) for x in w]
    g = reduce(math.gcd, ints)
    return [x // g for x in ints], Fraction(g, denom)


def _lattice_keys(weights: Sequence[int], kmax: int, lowest: int) -> np.ndarray:
    partial = np.zeros(1, dtype=np.int64)
    for w in weights:
        top = math.isqrt(kmax // w)
        m = np.arange(lowest, top + 1, dtype=np.int64)
        sums = (partial[:, None] + w * m[None, :] ** 2).ravel()
        partial = sums[sums <= kmax]
    return np.sort(partial, kind="stable")


def box_spectrum(spec: GeneratorSpec, min_count: int) -> Spectrum:
    if spec.kind != "box":
        raise ValueError("box_spectrum needs a box generator")
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    d = spec.dimension
    ratios = spec.side_ratios
    weights, g = box_key_weights(ratios)
    volume = reduce(lambda a, b: a * b, ratios, Fraction(1))
    # lambda = pi^2 * volume^(2/d) * g * key
    key_scale = math.pi**2 * float(volume) ** (2 / d) * float(g)
    power_coeff = volume * g ** (d // 2) if d % 2 == 0 else None
    lowest = 1 if spec.bc == DIRICHLET else 0
    cutoff = weyl_cutoff(min_count, d)
    while True:
        kmax = int(cutoff / key_scale)
        if kmax > MAX_EXACT_KEY:
            raise ValueError(f"min_count={min_count} overflows the exact key range")
        keys = _lattice_keys(weights, kmax, lowest)
        if keys.size >= min_count:
            break
        cutoff *= 2
    return Spectrum(
        spec,
        keys.astype(float) * key_scale,
        complete_below=float(kmax) * key_scale,
        exact_keys=keys,
        key_scale=key_scale,
        power_coeff=power_coeff,
    )


def disk_spectrum(bc: str, min_count: int, label: str = "disk") -> Spectrum:
    """Eigenvalues of the unit-area disk: ``pi * j^2`` over Bessel (derivative) zeros."""
    _check_bc(bc)
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    spec = GeneratorSpec("disk", bc, 2, label=label)
    kind = "function" if bc == DIRICHLET else "derivative"
    cutoff = weyl_cutoff(min_count, 2)
    while True:
        x_max = math.sqrt(cutoff / math.pi)
        # orders at or above x_max have no zeros below it
        orders = np.arange(int(math.ceil(x_max)))
        lists = zeros_for_orders(orders, x_max, kind)
        chunks = [np.zeros(1)] if bc == NEUMANN else []
        for zl in lists:
            if len(zl) == 0:
                continue
            vals = math.pi * zl.as_array() ** 2
            chunks.append(vals if zl.order == 0 else np.repeat(vals, 2))
        values = np.sort(np.concatenate(chunks)) if chunks else np.zeros(0)
        if values.size >= min_count:
            return Spectrum(spec, values, complete_below=math.pi * x_max**2)
        cutoff *= 2


def build_spectrum(spec: GeneratorSpec, min_count: int) -> Spectrum:
    """Spectrum for any generator kind with at least ``min_count`` values."""
    if spec.kind == "box":
        return box_spectrum(spec, min_count)
    if spec.kind == "disk":
        return disk_spectrum(spec.bc, min_count, spec.label)
    spectrum = load_spectrum(spec.path, spec.bc, spec.dimension, spec.label)
    if spectrum.count < min_count:
        raise ValueError(
            f"spectrum file {spec.path} has {spectrum.count} values, {min_count} required"
        )
    return spectrum


def counting(spectrum: Spectrum, lam: float) -> int:
    """Number of eigenvalues not exceeding ``lam`` (Neumann counts include mu_0)."""
    if lam > spectrum.complete_below:
        raise ValueError(f"lambda={lam} exceeds the completeness bound {spectrum.complete_below}")
    return int(np.searchsorted(spectrum.values, lam, side="right"))


_HEADER_RE = re.compile(r"(\w+)=(\S+)")


def load_spectrum(path, bc: str | None = None, d: int | None = None, label: str | None = None) -> Spectrum:
    """Read the one-value-per-line spectrum format.

    The optional ``# bc=... d=... label=... complete_below=...`` header line
    takes precedence over missing arguments; contradicting arguments fail.
    """
    path = Path(path)
    header: dict[str, str] = {}
    values: list[float] = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if not values and not header:
                    header = dict(_HEADER_RE.findall(line))
                continue
            try:
                v = float(line)
            except ValueError:
                raise SpectrumFormatError(f"malformed value at line {lineno}: {line!r}") from None
            if not math.isfinite(v):
                raise SpectrumFormatError(f"malformed value at line {lineno}: {line!r}")
            if v < 0:
                raise SpectrumFormatError(f"negative eigenvalue at line {lineno}")
            if values and v < values[-1]:
                raise SpectrumFormatError(f"nonmonotone at line {lineno}")
            values.append(v)
    if not values:
        raise SpectrumFormatError("empty spectrum")

    def pick(name, given, cast):
        if name in header:
            found = cast(header[name])
            if given is not None and given != found:
                raise SpectrumFormatError(f"{path}: header {name}={found} contradicts requested {given}")
            return found
        return given

    bc = pick("bc", bc, str)
    d = pick("d", d, int)
    if bc is None:
        raise SpectrumFormatError(f"{path}: boundary condition unknown (no header, none given)")
    d = 2 if d is None else d
    label = header.get("label", label) or path.stem
    arr = np.asarray(values, dtype=float)
    if bc == DIRICHLET and arr[0] == 0:
        raise SpectrumFormatError("dirichlet spectrum contains 0")
    if bc == NEUMANN and arr[0] != 0:
        raise SpectrumFormatError("neumann spectrum must start with 0")
    complete = float(header["complete_below"]) if "complete_below" in header else float(arr[-1])
    if complete < arr[-1]:
        raise SpectrumFormatError(f"{path}: complete_below is below the largest value")
    spec = GeneratorSpec("explicit", bc, d, path=str(path), label=label)
    return Spectrum(spec, arr, complete_below=complete)


def write_spectrum(spectrum: Spectrum, path) -> None:
    g = spectrum.generator
    lines = [f"# bc={g.bc} d={g.dimension} label={g.label} complete_below={spectrum.complete_below!r}"]
    lines.extend(f"{v:.17g}" for v in spectrum.values)
    Path(path).write_text("\n".join(lines) + "\n")


def write_spectrum_csv(spectrum: Spectrum, path, count: int | None = None) -> None:
    """CSV ``k,eigenvalue`` with ranks from 1 (Dirichlet) or 0 (Neumann)."""
    vals = spectrum.values if count is None else spectrum.values[:count]
    first = 1 if spectrum.bc == DIRICHLET else 0
    lines = ["k,eigenvalue"]
    lines.extend(f"{first + i},{v:.17g}" for i, v in enumerate(vals))
    Path(path).write_text("\n".join(lines) + "\n")
