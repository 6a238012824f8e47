"""Shared numerics and reproducibility helpers."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
U = TypeVar("U")


def derived_rng(master_seed: int, *indices: int) -> np.random.Generator:
    """Generator for substream (master_seed, i0, i1, ...).

    Substreams are derived from the index tuple, not from draw order, so
    results do not depend on scheduling or worker count.
    """
    return np.random.default_rng(np.random.SeedSequence((master_seed, *indices)))


def fsum(terms: Iterable[float]) -> float:
    """Compensated (exactly rounded) sum."""
    return math.fsum(terms)


def format_sig(x: float, digits: int = 17) -> str:
    """Format a number with a fixed count of significant digits.

    Used for all CSV output so reruns are byte-comparable.
    """
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.{digits}g}"


def round_sig(x: float, digits: int) -> float:
    """Round to ``digits`` significant figures (half away from zero)."""
    if x == 0 or not math.isfinite(x):
        return x
    exponent = math.floor(math.log10(abs(x)))
    scale = 10.0 ** (exponent - digits + 1)
    return math.copysign(math.floor(abs(x) / scale + 0.5) * scale, x)


def sig_figure_ulp(x: float, digits: int) -> float:
    """One unit in the last of ``digits`` significant figures of ``x``."""
    if x == 0:
        return 10.0 ** (1 - digits)
    return 10.0 ** (math.floor(math.log10(abs(x))) - digits + 1)


def ordered_map(
    fn: Callable[[T], U], items: Sequence[T], threads: int = 1
) -> list[U]:
    """Map ``fn`` over ``items`` preserving order.

    With ``threads > 1`` items run on a thread pool; results are collected
    in input order, so output is identical to the serial run as long as
    ``fn`` draws randomness only from per-item derived streams.
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
