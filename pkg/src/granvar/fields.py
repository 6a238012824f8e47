"""Synthetic 2-D particle fields with controllable spatial dependence.

Three generators cover the qualitative regimes that drive dependent pair
selection: complete spatial randomness (independent selection), parent/
offspring clustering (co-occurring pairs, negative dependence values) and
hard-core repulsion (mutually exclusive pairs, positive dependence
values).  A vertically graded variant approximates density-driven
segregation through class-dependent intensity tilts; its quantitative
mapping to a dependence value is deliberately left uncalibrated.

Offspring falling outside the domain are wrapped toroidally so the
intensity stays uniform; transect and window statistics rely on this
stationarity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SaturationError
from .model import ClassTable
from .util import derived_rng

VARIANTS = ("poisson", "matern_cluster", "hardcore", "graded")

#: Dart-throwing budget per requested particle before giving up.
HARDCORE_ATTEMPT_FACTOR = 100


@dataclass(frozen=True)
class ProcessParams:
    """Parameters of a field generator.

    ``mixing`` gives the per-class proportions.  ``intensity`` is the
    expected particle count per unit area for the poisson, hardcore and
    graded variants; the cluster variant derives its intensity as
    parent_intensity * offspring_mean.  ``class_correlation`` (cluster
    variant) is the probability that an offspring inherits its cluster's
    class instead of drawing independently: 0 gives independent labels,
    1 gives single-class clusters.  ``gradient`` (graded variant) tilts
    each class's vertical density linearly, entries in [-1, 1].
    """

    variant: str
    width: float
    height: float
    mixing: tuple[float, ...]
    intensity: float | None = None
    parent_intensity: float | None = None
    offspring_mean: float | None = None
    cluster_radius: float | None = None
    class_correlation: float = 0.0
    min_gap: float = 0.0
    gradient: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("domain dimensions must be > 0")
        mixing = np.asarray(self.mixing, dtype=float)
        if np.any(mixing < 0) or abs(mixing.sum() - 1.0) > 1e-9:
            raise ValueError(f"mixing proportions must be >= 0 and sum to 1, got {self.mixing}")
        if self.variant in ("poisson", "hardcore", "graded"):
            if self.intensity is None or not self.intensity > 0:
                raise ValueError(f"{self.variant} variant needs intensity > 0")
        if self.variant == "matern_cluster":
            for name in ("parent_intensity", "offspring_mean", "cluster_radius"):
                val = getattr(self, name)
                if val is None or not val > 0:
                    raise ValueError(f"matern_cluster variant needs {name} > 0")
            if not (0.0 <= self.class_correlation <= 1.0):
                raise ValueError("class_correlation must be in [0, 1]")
        if self.variant == "hardcore" and self.min_gap < 0:
            raise ValueError("min_gap must be >= 0")
        if self.variant == "graded":
            if self.gradient is None or len(self.gradient) != len(self.mixing):
                raise ValueError("graded variant needs one gradient per class")
            if any(abs(g) > 1.0 for g in self.gradient):
                raise ValueError("gradients must lie in [-1, 1]")

    @property
    def area(self) -> float:
        return self.width * self.height

    def expected_count(self) -> float:
        if self.variant == "matern_cluster":
            return self.parent_intensity * self.offspring_mean * self.area
        return self.intensity * self.area


@dataclass(frozen=True)
class SpatialField:
    """Disk-shaped particles in a rectangular domain."""

    width: float
    height: float
    x: np.ndarray
    y: np.ndarray
    radius: np.ndarray
    class_id: np.ndarray
    process_tag: str = ""

    def __post_init__(self):
        n = len(self.x)
        for name in ("y", "radius", "class_id"):
            if len(getattr(self, name)) != n:
                raise ValueError("particle arrays must have equal length")
        if n and (
            np.any(self.x < 0) or np.any(self.x > self.width)
            or np.any(self.y < 0) or np.any(self.y > self.height)
        ):
            raise ValueError("all particle centers must lie inside the domain")

    @property
    def n(self) -> int:
        return len(self.x)

    def class_counts(self, k: int) -> np.ndarray:
        return np.bincount(self.class_id, minlength=k)

    def min_pair_clearance(self) -> float:
        """Minimum over pairs of (center distance - r_i - r_j); O(n^2)."""
        if self.n < 2:
            return np.inf
        dx = self.x[:, None] - self.x[None, :]
        dy = self.y[:, None] - self.y[None, :]
        dist = np.hypot(dx, dy)
        clearance = dist - self.radius[:, None] - self.radius[None, :]
        iu = np.triu_indices(self.n, k=1)
        return float(clearance[iu].min())


def assign_classes(
    n: int,
    mixing: np.ndarray,
    rng: np.random.Generator,
    parent_of: np.ndarray | None = None,
    correlation: float = 0.0,
) -> np.ndarray:
    """Draw class labels for n particles.

    Independent mode (parent_of None or correlation 0): i.i.d. categorical
    draws from ``mixing``.  Cluster-correlated mode: each cluster draws a
    class from ``mixing`` and each member copies it with probability
    ``correlation``, otherwise draws independently; the marginal class
    distribution stays equal to ``mixing`` for every correlation level.
    """
    mixing = np.asarray(mixing, dtype=float)
    k = len(mixing)
    if k == 1:
        return np.zeros(n, dtype=int)
    own = rng.choice(k, size=n, p=mixing)
    if parent_of is None or correlation == 0.0 or n == 0:
        return own
    n_parents = int(parent_of.max()) + 1 if len(parent_of) else 0
    cluster_class = rng.choice(k, size=n_parents, p=mixing)
    inherit = rng.random(n) < correlation
    return np.where(inherit, cluster_class[parent_of], own)


def _wrap(values: np.ndarray, period: float) -> np.ndarray:
    return np.mod(values, period)


def _radii_for(classes: np.ndarray, table: ClassTable) -> np.ndarray:
    return table.radii[classes] if len(classes) else np.empty(0)


def _generate_poisson(p: ProcessParams, table: ClassTable, rng) -> SpatialField:
    n = rng.poisson(p.expected_count())
    x = rng.uniform(0.0, p.width, size=n)
    y = rng.uniform(0.0, p.height, size=n)
    classes = assign_classes(n, np.asarray(p.mixing), rng)
    return SpatialField(p.width, p.height, x, y, _radii_for(classes, table),
                        classes, process_tag="poisson")


def _generate_matern(p: ProcessParams, table: ClassTable, rng) -> SpatialField:
    n_parents = rng.poisson(p.parent_intensity * p.area)
    px = rng.uniform(0.0, p.width, size=n_parents)
    py = rng.uniform(0.0, p.height, size=n_parents)
    counts = rng.poisson(p.offspring_mean, size=n_parents)
    parent_of = np.repeat(np.arange(n_parents), counts)
    n = int(counts.sum())
    # uniform draw in the cluster disk
    rad = p.cluster_radius * np.sqrt(rng.random(n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    x = _wrap(px[parent_of] + rad * np.cos(theta), p.width)
    y = _wrap(py[parent_of] + rad * np.sin(theta), p.height)
    classes = assign_classes(n, np.asarray(p.mixing), rng, parent_of, p.class_correlation)
    return SpatialField(p.width, p.height, x, y, _radii_for(classes, table),
                        classes, process_tag="matern_cluster")


def _generate_hardcore(p: ProcessParams, table: ClassTable, rng) -> SpatialField:
    target = int(rng.poisson(p.expected_count()))
    max_attempts = HARDCORE_ATTEMPT_FACTOR * max(target, 1)
    xs = np.empty(target)
    ys = np.empty(target)
    cls = np.empty(target, dtype=int)
    radii = np.empty(target)
    mixing = np.asarray(p.mixing)
    placed = 0
    attempts = 0
    while placed < target:
        if attempts >= max_attempts:
            raise SaturationError(placed, target, attempts)
        attempts += 1
        cx = rng.uniform(0.0, p.width)
        cy = rng.uniform(0.0, p.height)
        c = int(rng.choice(len(mixing), p=mixing)) if len(mixing) > 1 else 0
        r = table.radii[c]
        if placed:
            limit = radii[:placed] + r + p.min_gap
            d = np.hypot(xs[:placed] - cx, ys[:placed] - cy)
            if np.any(d < limit):
                continue
        xs[placed] = cx
        ys[placed] = cy
        cls[placed] = c
        radii[placed] = r
        placed += 1
    return SpatialField(p.width, p.height, xs, ys, radii, cls, process_tag="hardcore")


def _generate_graded(p: ProcessParams, table: ClassTable, rng) -> SpatialField:
    n = rng.poisson(p.expected_count())
    classes = assign_classes(n, np.asarray(p.mixing), rng)
    x = rng.uniform(0.0, p.width, size=n)
    g = np.asarray(p.gradient)[classes] if n else np.empty(0)
    u = rng.random(n)
    # inverse CDF of f(t) = 1 + g (2t - 1) on [0, 1]
    flat = np.abs(g) < 1e-12
    safe_g = np.where(flat, 1.0, g)
    tilted = (-(1.0 - safe_g) + np.sqrt((1.0 - safe_g) ** 2 + 4.0 * safe_g * u)) / (2.0 * safe_g)
    t = np.where(flat, u, tilted)
    y = np.clip(t, 0.0, 1.0) * p.height
    return SpatialField(p.width, p.height, x, y, _radii_for(classes, table),
                        classes, process_tag="graded")


def generate_field(
    p: ProcessParams, table: ClassTable, seed: int | np.random.SeedSequence
) -> SpatialField:
    """Generate a field; deterministic for a given (params, seed).

    Multiple fields should derive their seeds from a master seed and a
    field index (see util.derived_rng) so concurrent generation is
    schedule-independent.
    """
    if len(p.mixing) != table.k:
        raise ValueError(f"mixing has {len(p.mixing)} entries for {table.k} classes")
    if isinstance(seed, np.random.SeedSequence):
        rng = np.random.default_rng(seed)
    else:
        rng = derived_rng(int(seed))
    if p.variant == "poisson":
        return _generate_poisson(p, table, rng)
    if p.variant == "matern_cluster":
        return _generate_matern(p, table, rng)
    if p.variant == "hardcore":
        return _generate_hardcore(p, table, rng)
    return _generate_graded(p, table, rng)


def save_field_csv(field_: SpatialField, path: str | Path, comment: str | None = None) -> None:
    """Write particles as CSV (x,y,radius,class_id) plus a JSON sidecar
    holding the domain; the sidecar shares the CSV path with a .json suffix."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write("x,y,radius,class_id\n")
        for i in range(field_.n):
            f.write(
                f"{field_.x[i]:.17g},{field_.y[i]:.17g},"
                f"{field_.radius[i]:.17g},{int(field_.class_id[i])}\n"
            )
    sidecar = {
        "width": field_.width,
        "height": field_.height,
        "process_tag": field_.process_tag,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_field_csv(path: str | Path) -> SpatialField:
    """Read a field written by save_field_csv (or produced externally,
    e.g. from segmented images) together with its domain sidecar."""
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    xs, ys, radii, classes = [], [], [], []
    with path.open("r", encoding="utf-8") as f:
        header = f.readline().strip()
        while header.startswith("#"):
            header = f.readline().strip()
        if header != "x,y,radius,class_id":
            raise ValueError(f"unexpected field CSV header: {header!r}")
        for line in f:
            line = line.strip()
            if not line:
                continue
            sx, sy, sr, sc = line.split(",")
            xs.append(float(sx))
            ys.append(float(sy))
            radii.append(float(sr))
            classes.append(int(sc))
    return SpatialField(
        float(sidecar["width"]),
        float(sidecar["height"]),
        np.array(xs),
        np.array(ys),
        np.array(radii),
        np.array(classes, dtype=int),
        process_tag=str(sidecar.get("process_tag", "")),
    )
