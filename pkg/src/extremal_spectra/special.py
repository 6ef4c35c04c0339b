"""Bessel functions of the first kind and enumeration of their real zeros.

Values come from Miller's backward recurrence normalised by the Neumann
series ``1 = J_0 + 2 (J_2 + J_4 + ...)``.  A single downward sweep yields
every order at once, which is what the disk spectrum needs, and the scheme
keeps an absolute accuracy of a few ulps over the whole ``(nu, x)`` range we
use (orders up to ~10^3, arguments up to ~10^5).

Zeros are located by a sign-change scan that starts at ``x = nu`` (there are
no zeros of ``J_nu`` or ``J'_nu`` below ``nu``), refined by a bracketed
Newton iteration seeded with McMahon's expansion, and certified by a second
scan on a staggered grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BesselZeroError",
    "BesselZeroList",
    "bessel_j",
    "bessel_j_prime",
    "bessel_j_orders",
    "bessel_zeros",
    "bessel_prime_zeros",
    "zeros_for_orders",
    "mcmahon_guess",
]

ROOT_TOL = 1e-12

# Rescaling by an exact power of two keeps the recurrence free of rounding
# from the rescale itself.
_BIG = 2.0**600
_SHRINK_EXP = -600

# Grid step for the sign-change scan.  Consecutive zeros of J_nu and J'_nu
# are more than 1.8 apart for every integer order, so a cell never holds two.
_SCAN_STEP = 0.25
_SMALL_X = 1e-3


class BesselZeroError(RuntimeError):
    """Raised when zero enumeration cannot certify completeness."""


@dataclass(frozen=True)
class BesselZeroList:
    order: int
    kind: str  # "function" or "derivative"
    cutoff: float
    zeros: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.zeros)

    def __getitem__(self, i):
        return self.zeros[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.zeros, dtype=float)


def _start_order(m: float) -> int:
    n = int(math.ceil(m + 40.0 + 10.0 * m ** (1.0 / 3.0)))
    return n + (n % 2)


def _check_x(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("Bessel argument is NaN")
    if np.any(x < 0):
        raise ValueError("Bessel argument must be nonnegative")
    return x


def _small_series(nu: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Ascending series for ``0 < x < _SMALL_X``; six terms reach double precision."""
    nu = np.asarray(nu, dtype=float)
    q = -0.25 * x * x
    lead = np.exp(nu * (np.log(x) - math.log(2.0)) - np.array([math.lgamma(v + 1.0) for v in np.ravel(nu)]).reshape(nu.shape))
    term = np.ones(np.broadcast(nu, x).shape)
    total = term.copy()
    for m in range(1, 7):
        term = term * q / (m * (m + nu))
        total += term
    return lead * total


def bessel_j_orders(nmax: int, x) -> np.ndarray:
    """Return ``J_n(x)`` for ``n = 0..nmax``; shape ``(nmax + 1,) + x.shape``."""
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    x = _check_x(x)
    shape = x.shape
    xs = np.atleast_1d(x).ravel()
    out = np.zeros((nmax + 1, xs.size))
    zero = xs == 0.0
    xw = np.where(xs < _SMALL_X, 1.0, xs)
    start = _start_order(max(float(nmax) + 1.0, float(xw.max(initial=0.0))))

    shift = np.zeros(xs.size, dtype=np.int64)      # rescales applied so far
    stamp = np.zeros((nmax + 1, xs.size), dtype=np.int64)
    j_next = np.zeros(xs.size)
    j_cur = np.full(xs.size, 2.0**-600)
    norm = np.zeros(xs.size)
    if start <= nmax:
        out[start] = j_cur
    for n in range(start, 0, -1):
        j_prev = (2.0 * n / xw) * j_cur - j_next
        m = n - 1
        if m % 2 == 0:
            norm += j_prev if m == 0 else 2.0 * j_prev
        if m <= nmax:
            out[m] = j_prev
            stamp[m] = shift
        j_next, j_cur = j_cur, j_prev
        big = np.abs(j_cur) > _BIG
        if big.any():
            j_cur = np.where(big, np.ldexp(j_cur, _SHRINK_EXP), j_cur)
            j_next = np.where(big, np.ldexp(j_next, _SHRINK_EXP), j_next)
            norm = np.where(big, np.ldexp(norm, _SHRINK_EXP), norm)
            shift += big
    # bring every stored row to the final scale, then normalise
    lag = (shift[None, :] - stamp) * _SHRINK_EXP
    out = np.ldexp(out, lag.astype(np.int32)) / norm[None, :]
    out[:, zero] = 0.0
    out[0, zero] = 1.0
    tiny = ~zero & (xs < _SMALL_X)
    if tiny.any():
        out[:, tiny] = _small_series(np.arange(nmax + 1)[:, None], xs[tiny][None, :])
    return out.reshape((nmax + 1,) + shape)


def _bessel_pick(nu: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-element ``(J_{nu-1}, J_nu, J_{nu+1})`` for paired arrays ``nu``, ``x`` (x >= 0).

    ``J_{-1}`` is returned as ``-J_1``.
    """
    nu = np.asarray(nu, dtype=np.int64)
    x = np.asarray(x, dtype=float)
    small = x < _SMALL_X
    if small.any():
        jm, j0, jp = _bessel_pick(nu, np.where(small, 1.0, x))
        xs = np.where(small & (x > 0), x, 1.0)
        sm = np.where(nu == 0, -_small_series(1, xs), _small_series(np.abs(nu - 1), xs))
        s0, sp = _small_series(nu, xs), _small_series(nu + 1, xs)
        # at the origin only J_0 (and J_{nu-1} for nu = 1) is nonzero
        sm = np.where(x == 0, (nu == 1).astype(float), sm)
        s0 = np.where(x == 0, (nu == 0).astype(float), s0)
        sp = np.where(x == 0, 0.0, sp)
        return np.where(small, sm, jm), np.where(small, s0, j0), np.where(small, sp, jp)
    order = np.argsort(nu, kind="stable")
    nu_s = nu[order]
    x_s = x[order]
    start = _start_order(max(float(nu_s[-1]) + 2.0, float(x_s.max())))
    size = x.size
    picked = np.zeros((3, size))
    stamp = np.zeros((3, size), dtype=np.int64)
    shift = np.zeros(size, dtype=np.int64)
    j_next = np.zeros(size)
    j_cur = np.full(size, 2.0**-600)
    norm = np.zeros(size)
    two_over_x = 2.0 / x_s
    # slice [lo[m], hi[m]) of sorted elements whose order equals m
    lo = np.searchsorted(nu_s, np.arange(start + 2), side="left")
    hi = np.searchsorted(nu_s, np.arange(start + 2), side="right")
    for n in range(start, 0, -1):
        j_prev = (n * two_over_x) * j_cur - j_next
        m = n - 1
        if m % 2 == 0:
            norm += j_prev if m == 0 else 2.0 * j_prev
        for slot, target in enumerate((m + 1, m, m - 1)):
            # slot 0 wants J_{nu-1}: elements with nu = m + 1, and so on
            if 0 <= target < start + 2 and hi[target] > lo[target]:
                sl = slice(lo[target], hi[target])
                picked[slot, sl] = j_prev[sl]
                stamp[slot, sl] = shift[sl]
        j_next, j_cur = j_cur, j_prev
        big = np.abs(j_cur) > _BIG
        if big.any():
            j_cur = np.where(big, np.ldexp(j_cur, _SHRINK_EXP), j_cur)
            j_next = np.where(big, np.ldexp(j_next, _SHRINK_EXP), j_next)
            norm = np.where(big, np.ldexp(norm, _SHRINK_EXP), norm)
            shift += big
    lag = ((shift[None, :] - stamp) * _SHRINK_EXP).astype(np.int32)
    picked = np.ldexp(picked, lag) / norm[None, :]
    out = np.empty_like(picked)
    out[:, order] = picked
    jm, j0, jp = out
    # order 0 asks for J_{-1} = -J_1
    jm = np.where(nu == 0, -jp, jm)
    return jm, j0, jp


def bessel_j(nu: int, x):
    """Bessel function of the first kind ``J_nu(x)`` for integer ``nu >= 0``.

    Accepts a scalar or an array for ``x``; negative arguments are rejected.
    """
    nu = int(nu)
    if nu < 0:
        raise ValueError("order must be a nonnegative integer")
    x = _check_x(x)
    vals = bessel_j_orders(nu, x)[nu]
    return float(vals) if vals.ndim == 0 else vals


def bessel_j_prime(nu: int, x):
    """Derivative ``J'_nu(x) = (J_{nu-1}(x) - J_{nu+1}(x)) / 2``."""
    nu = int(nu)
    if nu < 0:
        raise ValueError("order must be a nonnegative integer")
    x = _check_x(x)
    rows = bessel_j_orders(nu + 1, x)
    below = -rows[1] if nu == 0 else rows[nu - 1]
    vals = 0.5 * (below - rows[nu + 1])
    return float(vals) if vals.ndim == 0 else vals


def mcmahon_guess(nu, k, kind: str = "function"):
    """McMahon's large-zero expansion for the k-th zero of ``J_nu`` or ``J'_nu``.

    For the derivative the count excludes the zero at the origin, so for
    ``nu = 0`` the k-th derivative zero is the k-th zero of ``J_1``.
    """
    nu = np.asarray(nu, dtype=float)
    k = np.asarray(k, dtype=float)
    mu = 4.0 * nu * nu
    if kind == "function":
        b = (k + 0.5 * nu - 0.25) * np.pi
        return b - (mu - 1) / (8 * b) - 4 * (mu - 1) * (7 * mu - 31) / (3 * (8 * b) ** 3)
    if kind == "derivative":
        k = np.where(nu == 0, k + 1, k)
        b = (k + 0.5 * nu - 0.75) * np.pi
        return b - (mu + 3) / (8 * b) - 4 * (7 * mu * mu + 82 * mu - 9) / (3 * (8 * b) ** 3)
    raise ValueError(f"unknown kind {kind!r}")


def _values_on_rows(rows: np.ndarray, orders: np.ndarray, kind: str) -> np.ndarray:
    if kind == "function":
        return rows[orders]
    below = np.where((orders == 0)[:, None], -rows[1], rows[np.maximum(orders - 1, 0)])
    return 0.5 * (below - rows[orders + 1])


def _scan(orders: np.ndarray, grid: np.ndarray, kind: str):
    """Sign changes of every requested order on a common grid.

    Returns (order_index, left, right) arrays of brackets, plus exact hits.
    """
    rows = bessel_j_orders(int(orders.max()) + 1, grid)
    vals = _values_on_rows(rows, orders, kind)
    # ignore grid points where no zero can live: x < nu (and x = 0 for J'_0)
    lower = orders.astype(float)[:, None]
    if kind == "derivative":
        lower = np.where(lower == 0, 0.5, lower)
    valid = grid[None, :] >= lower
    s = np.sign(vals)
    s[~valid] = 0
    left_ok = valid[:, :-1] & valid[:, 1:]
    change = left_ok & (s[:, :-1] * s[:, 1:] < 0)
    exact = valid & (vals == 0.0)
    oi, ci = np.nonzero(change)
    ei, eg = np.nonzero(exact)
    return oi, grid[ci], grid[ci + 1], ei, grid[eg]


def _count_changes(orders: np.ndarray, grid: np.ndarray, kind: str) -> np.ndarray:
    oi, _, _, ei, _ = _scan(orders, grid, kind)
    return np.bincount(oi, minlength=orders.size) + np.bincount(ei, minlength=orders.size)


def _refine(nu: np.ndarray, a: np.ndarray, b: np.ndarray, guess: np.ndarray, kind: str) -> np.ndarray:
    """Bracketed Newton iteration on all brackets at once.

    Elements leave the active set once a Newton step falls below a tenth of
    the root tolerance; a step outside the current bracket is replaced by
    bisection.
    """
    x = np.where((guess > a) & (guess < b), guess, 0.5 * (a + b))
    if nu.size == 0:
        return x

    def f_df(nu, x):
        jm, j0, jp = _bessel_pick(nu, x)
        d1 = 0.5 * (jm - jp)
        if kind == "function":
            return j0, d1
        return d1, -d1 / x - (1.0 - (nu / x) ** 2) * j0

    fa, _ = f_df(nu, a)
    sa = np.sign(fa)
    active = np.arange(nu.size)
    for _ in range(100):
        xa, aa, ba, na = x[active], a[active], b[active], nu[active]
        f, df = f_df(na, xa)
        same = np.sign(f) == sa[active]
        aa = np.where(same, xa, aa)
        ba = np.where(same, ba, xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - f / df
        bad = ~np.isfinite(xn) | (xn <= aa) | (xn >= ba)
        xn = np.where(bad, 0.5 * (aa + ba), xn)
        xn = np.where(f == 0.0, xa, xn)
        done = (np.abs(xn - xa) < 0.1 * ROOT_TOL) | (ba - aa < 0.1 * ROOT_TOL)
        x[active], a[active], b[active] = xn, aa, ba
        active = active[~done]
        if active.size == 0:
            return x
    raise BesselZeroError("Newton refinement did not converge")


def zeros_for_orders(orders, x_max: float, kind: str = "function") -> list[BesselZeroList]:
    """All zeros in ``(0, x_max]`` of ``J_nu`` (or ``J'_nu``) for each order.

    The zero of ``J'_nu`` at the origin is never reported.
    """
    if kind not in ("function", "derivative"):
        raise ValueError(f"unknown kind {kind!r}")
    x_max = float(x_max)
    if not x_max > 0:
        raise ValueError("x_max must be positive")
    orders = np.asarray(orders, dtype=np.int64).ravel()
    if orders.size == 0:
        return []
    if np.any(orders < 0):
        raise ValueError("orders must be nonnegative")
    active = orders < x_max
    result: dict[int, np.ndarray] = {int(o): np.zeros(0) for o in orders}
    todo = np.unique(orders[active])
    if todo.size:
        n_cells = max(2, int(math.ceil(x_max / _SCAN_STEP)))
        grid = np.linspace(0.0, x_max, n_cells + 1)
        oi, a, b, ei, hits = _scan(todo, grid, kind)
        nu = todo[oi]
        counts = np.bincount(oi, minlength=todo.size)
        rank = np.arange(oi.size) - np.repeat(np.cumsum(counts) - counts, counts)
        guess = mcmahon_guess(nu, rank + 1, kind)
        roots = _refine(nu, a, b, guess, kind)
        roots = np.concatenate([roots, hits])
        owner = np.concatenate([oi, ei])
        # certificate: a staggered grid must see the same number of zeros
        mid = 0.5 * (grid[:-1] + grid[1:])
        stagger = np.concatenate([[0.0], mid, [x_max]])
        check = _count_changes(todo, stagger, kind)
        found = np.bincount(owner, minlength=todo.size)
        if np.any(check != found):
            bad = todo[check != found]
            raise BesselZeroError(f"unexpected extra sign change for orders {bad.tolist()}")
        for i, o in enumerate(todo):
            z = np.sort(roots[owner == i])
            if z.size and np.any(np.diff(z) <= 0):
                raise BesselZeroError(f"duplicate zero for order {int(o)}")
            result[int(o)] = z
    return [BesselZeroList(int(o), kind, x_max, tuple(float(v) for v in result[int(o)])) for o in orders]


def bessel_zeros(nu: int, x_max: float) -> BesselZeroList:
    """All zeros of ``J_nu`` in ``(0, x_max]``, increasing."""
    return zeros_for_orders([nu], x_max, "function")[0]


def bessel_prime_zeros(nu: int, x_max: float) -> BesselZeroList:
    """All zeros of ``J'_nu`` in ``(0, x_max]`` (the origin excluded), increasing."""
    return zeros_for_orders([nu], x_max, "derivative")[0]
