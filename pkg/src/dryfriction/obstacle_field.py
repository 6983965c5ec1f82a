"""Random obstacle fields on the unit torus times a finite vertical slab.

Obstacle centers are a Poisson point process in ``[0,1)^n x [-Y, Y]``. The
strength at a point is a smooth radial ramp of the distance ``d`` to the
nearest center,

    phi = S((rho + delta - d) / (2 delta)),   S(t) = 3t^2 - 2t^3 on [0, 1],

so ``phi == 1`` inside ``d <= rho - delta``, ``phi == 0`` outside
``d >= rho + delta`` and ``|grad phi| <= 3 / (4 delta)``.
"""
from dataclasses import dataclass, replace
import math

import numpy as np

from . import kernels, rng as _rng, serialize
from .errors import ConfigurationError, ContractError


@dataclass(frozen=True)
class ObstacleSpec:
    """Parameters of the obstacle process.

    Parameters
    ----------
    intensity : float
        Expected number of centers per unit (n+1)-volume.
    radius : float
        Obstacle radius ``rho``.
    mollification_width : float
        Half-width ``delta`` of the smoothing ramp; must be below ``radius``.
    slab_half_height : float
        Centers are sampled with heights in ``[-Y, Y]``.
    dimension : int
        Number of lateral dimensions, 1 or 2.
    seed : int
        64-bit seed of the field stream.
    """

    intensity: float
    radius: float
    mollification_width: float
    slab_half_height: float
    dimension: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.intensity > 0:
            raise ConfigurationError("intensity must be positive")
        if not self.mollification_width > 0:
            raise ConfigurationError("mollification_width must be positive")
        if not self.radius > self.mollification_width:
            raise ConfigurationError("radius must exceed mollification_width")
        if not self.slab_half_height > self.radius + self.mollification_width:
            raise ConfigurationError("slab_half_height must exceed radius + mollification_width")
        if self.dimension not in (1, 2):
            raise ConfigurationError("dimension must be 1 or 2")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    @property
    def reach(self):
        """Support radius ``rho + delta`` of a single obstacle."""
        return self.radius + self.mollification_width

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def to_dict(self):
        return {
            "lambda": float(self.intensity),
            "rho": float(self.radius),
            "delta": float(self.mollification_width),
            "Y": float(self.slab_half_height),
            "n": int(self.dimension),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            intensity=float(d["lambda"]),
            radius=float(d["rho"]),
            mollification_width=float(d["delta"]),
            slab_half_height=float(d["Y"]),
            dimension=int(d["n"]),
            seed=int(d["seed"]),
        )


class ObstacleField:
    """Sampled obstacle centers plus a periodic cell index.

    Immutable after construction; all queries are pure reads.
    """

    def __init__(self, spec, centers):
        n = spec.dimension
        centers = np.array(centers, dtype=float).reshape(-1, n + 1)
        Y = spec.slab_half_height
        if centers.size:
            if np.any(np.abs(centers[:, n]) > Y):
                raise ContractError("obstacle centers must lie in the slab |h| <= Y")
            centers[:, :n] -= np.floor(centers[:, :n])
            # x - floor(x) can round up to exactly 1.0 for tiny negative x
            centers[:, :n][centers[:, :n] >= 1.0] = 0.0
        centers.setflags(write=False)
        self.spec = spec
        self.centers = centers

        reach = spec.reach
        self.n_lat = max(1, int(math.floor(1.0 / reach)))
        self.n_v = max(1, int(math.floor(2.0 * Y / reach)))
        self.edge_lat = 1.0 / self.n_lat
        self.edge_v = 2.0 * Y / self.n_v
        self._gi = np.array([n, self.n_lat, self.n_v], dtype=np.int64)
        self._gf = np.array([spec.radius, spec.mollification_width, Y, self.edge_lat, self.edge_v])

        cells = self._cell_ids(centers)
        order = np.argsort(cells, kind="stable")
        self._order = order
        ncell = self.n_lat**n * self.n_v
        counts = np.bincount(cells, minlength=ncell) if cells.size else np.zeros(ncell, dtype=np.int64)
        self._sorted = np.ascontiguousarray(centers[order])
        self._cell_start = np.zeros(ncell + 1, dtype=np.int64)
        np.cumsum(counts, out=self._cell_start[1:])
        self._tables = {}

    def _cell_ids(self, pts):
        n = self.spec.dimension
        if pts.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        ix = np.minimum((pts[:, :n] / self.edge_lat).astype(np.int64), self.n_lat - 1)
        iy = np.clip(np.floor((pts[:, n] + self.spec.slab_half_height) / self.edge_v).astype(np.int64), 0, self.n_v - 1)
        lat = ix[:, 0] if n == 1 else ix[:, 0] * self.n_lat + ix[:, 1]
        return lat * self.n_v + iy

    @property
    def kernel_args(self):
        """``(centers, cell_start, gi, gf)`` in the layout the kernels expect."""
        return self._sorted, self._cell_start, self._gi, self._gf

    def node_table(self, xs):
        """Per-node lookup tables for the time loop at lateral positions ``xs``.

        For node ``i`` the *column* lists every center whose lateral periodic
        gap is within ``rho + delta``, sorted by height, with the squared gap.
        The height axis of the node is then cut into segments where the
        strength is certified 0 (outside every support, widened by
        ``SEG_MARGIN * (rho + delta)``), certified 1 (inside some core, shrunk
        by the same margin) or must be evaluated; evaluated segments carry the
        centers whose widened support overlaps them.

        Returns the 9-tuple ``(col_start, col_h, col_l2, seg_start,
        seg_bounds, seg_kind, cand_start, cand_h, cand_l2)``; cached per
        ``xs``.
        """
        key = (xs.shape[0], hash(xs.tobytes()))
        cached = self._tables.get(key)
        if cached is None:
            cached = self._build_table(xs)
            self._tables[key] = cached
        return cached

    def _build_table(self, xs):
        n = self.spec.dimension
        rho, delta = self.spec.radius, self.spec.mollification_width
        reach = rho + delta
        core = rho - delta
        w = kernels.SEG_MARGIN * reach
        M = xs.shape[0]
        c = self.centers
        col_start = np.zeros(M + 1, dtype=np.int64)
        seg_start = np.zeros(M + 1, dtype=np.int64)
        col_h, col_l2, bounds, kinds, cand_h, cand_l2 = [], [], [], [], [], []
        cand_start = [0]
        for i in range(M):
            d0 = np.abs(xs[i, 0] - c[:, 0])
            d0 = np.minimum(d0, 1.0 - d0)
            if n == 2:
                d1 = np.abs(xs[i, 1] - c[:, 1])
                d1 = np.minimum(d1, 1.0 - d1)
                l2 = d0 * d0 + d1 * d1
            else:
                l2 = d0 * d0
            sel = np.nonzero(l2 <= reach * reach * (1.0 + 1e-9))[0]
            sel = sel[np.argsort(c[sel, n], kind="stable")]
            h, l2 = c[sel, n], l2[sel]
            col_h.append(h)
            col_l2.append(l2)
            col_start[i + 1] = col_start[i] + sel.size

            r = np.sqrt(np.maximum(reach * reach - l2, 0.0)) + w
            cr = np.sqrt(np.maximum(core * core - l2, 0.0)) - w
            has_core = cr > w
            pts = np.unique(np.concatenate([h - r, h + r, (h - cr)[has_core], (h + cr)[has_core]]))
            b = np.concatenate([[-np.inf], pts, [np.inf]])
            # classify each elementary open segment by an interior probe
            probe = np.empty(b.size - 1)
            if pts.size:
                probe[1:-1] = 0.5 * (b[1:-2] + b[2:-1])
                probe[0] = pts[0] - 1.0
                probe[-1] = pts[-1] + 1.0
            else:
                probe[0] = 0.0
            dh = np.abs(probe[:, None] - h[None, :])
            in_core = np.any((dh < cr[None, :]) & has_core[None, :], axis=1)
            in_supp = np.any(dh < r[None, :], axis=1)
            kind = np.where(in_core, kernels.SEG_CORE, np.where(in_supp, kernels.SEG_RAMP, kernels.SEG_GAP))
            keep = np.concatenate([[True], kind[1:] != kind[:-1]])
            lo = b[:-1][keep]
            kind = kind[keep]
            hi = np.concatenate([lo[1:], [np.inf]])
            bounds.append(np.concatenate([lo, [np.inf]]))
            kinds.append(kind)
            seg_start[i + 1] = seg_start[i] + kind.size
            for s_lo, s_hi, s_kind in zip(lo, hi, kind):
                if s_kind == kernels.SEG_RAMP:
                    q = np.nonzero((h + r >= s_lo) & (h - r <= s_hi))[0]
                    cand_h.append(h[q])
                    cand_l2.append(l2[q])
                    cand_start.append(cand_start[-1] + q.size)
                else:
                    cand_start.append(cand_start[-1])

        def cat(parts, dtype=float):
            return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

        return (
            col_start, cat(col_h), cat(col_l2),
            seg_start, cat(bounds), cat(kinds, np.int8),
            np.array(cand_start, dtype=np.int64), cat(cand_h), cat(cand_l2),
        )

    def __len__(self):
        return self.centers.shape[0]

    def __repr__(self):
        return f"ObstacleField(n={self.spec.dimension}, centers={len(self)}, seed={self.spec.seed})"

    # queries -----------------------------------------------------------

    def phi(self, points):
        """Obstacle strength at each row ``(x..., h)`` of ``points``."""
        n = self.spec.dimension
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        xs = np.zeros((pts.shape[0], 2))
        xs[:, :n] = pts[:, :n]
        out = np.empty(pts.shape[0])
        kernels.active.phi_nodes(np.ascontiguousarray(pts[:, n]), xs, *self.kernel_args, out)
        return out

    def query_radius(self, point, radius):
        """Indices into :attr:`centers` order of all centers within ``radius``
        of ``point`` (periodic in the lateral coordinates)."""
        n = self.spec.dimension
        p = np.asarray(point, dtype=float)
        x = p[:n] - np.floor(p[:n])
        h = p[n]
        k_lat = int(math.ceil(radius / self.edge_lat))
        k_v = int(math.ceil(radius / self.edge_v))
        ix = np.minimum((x / self.edge_lat).astype(np.int64), self.n_lat - 1)
        iy = int(math.floor((h + self.spec.slab_half_height) / self.edge_v))
        if 2 * k_lat + 1 >= self.n_lat:
            lat_ranges = [range(self.n_lat)] * n
        else:
            lat_ranges = [[(c + o) % self.n_lat for o in range(-k_lat, k_lat + 1)] for c in ix]
        ys = range(max(iy - k_v, 0), min(iy + k_v, self.n_v - 1) + 1)
        lat_cells = [j for j in lat_ranges[0]] if n == 1 else [a * self.n_lat + b for a in lat_ranges[0] for b in lat_ranges[1]]
        hits = []
        for lc in lat_cells:
            for jy in ys:
                c = lc * self.n_v + jy
                for q in range(self._cell_start[c], self._cell_start[c + 1]):
                    if _periodic_distance(p, self._sorted[q], n) <= radius:
                        hits.append(q)
        if not hits:
            return np.zeros(0, dtype=np.int64)
        return np.sort(self._order[np.array(hits)])

    # serialization -----------------------------------------------------

    def to_dict(self):
        return {"spec": self.spec.to_dict(), "centers": self.centers.tolist()}

    def to_json(self):
        return serialize.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        spec = ObstacleSpec.from_dict(d["spec"])
        return cls(spec, np.array(d["centers"], dtype=float).reshape(-1, spec.dimension + 1))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(serialize.loads(text))


def _periodic_distance(p, c, n):
    x = p[:n] - np.floor(p[:n])
    acc = 0.0
    for j in range(n):
        d = abs(x[j] - c[j])
        d = min(d, 1.0 - d)
        acc += d * d
    dh = p[n] - c[n]
    return math.sqrt(acc + dh * dh)


def sample_field(spec):
    """Draw a field realization from the field stream of ``spec.seed``."""
    g = _rng.stream(spec.seed, _rng.FIELD_STREAM)
    Y = spec.slab_half_height
    count = int(g.poisson(spec.intensity * 2.0 * Y))
    lateral = g.random((count, spec.dimension))
    heights = g.uniform(-Y, Y, size=count)
    return ObstacleField(spec, np.column_stack([lateral, heights]))


def empty_field(spec):
    return ObstacleField(spec, np.zeros((0, spec.dimension + 1)))


def eval_phi(field, x, h):
    """Obstacle strength at lateral position ``x`` and height ``h``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(field.phi(np.append(x, h)[None, :])[0])


def nearest_center_distance(field, point):
    """Periodic distance to the nearest center, or ``inf`` when no center is
    within ``rho + delta``."""
    return float(kernels.active.nearest_distance(np.asarray(point, dtype=float), *field.kernel_args))


def field_stats(field, resolution):
    """Supremum and mean of ``phi`` over a regular lattice of the slab.

    The lattice has ``resolution`` points per unit length on each axis. The
    supremum additionally includes the centers themselves, where ``phi`` peaks.
    """
    if resolution < 8:
        raise ContractError("resolution must be at least 8 samples per unit length")
    n = field.spec.dimension
    Y = field.spec.slab_half_height
    xs = np.arange(resolution) / resolution
    hs = np.linspace(-Y, Y, int(round(2 * Y * resolution)) + 1)
    axes = [xs] * n + [hs]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n + 1)
    vals = field.phi(grid)
    sup = float(vals.max())
    if len(field):
        sup = max(sup, float(field.phi(field.centers).max()))
    return {"sup_phi": sup, "mean_phi": float(vals.mean())}
