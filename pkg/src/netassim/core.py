"""Shared domain types, deterministic RNG streams, random graphs, samplers.

Everything downstream (the SIS and LIF simulators, the ensemble filter, the
experiment harness) builds on the pieces here.  Randomness is organized as
counter-based streams: a stream is a pure function of a 64-bit base seed and
an ordered tuple of integer tags, so any unit of work (a replication, an
ensemble member, a grid point) can derive its own statistically independent
substream and reproduce it exactly regardless of scheduling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1

EDGE_PLAIN = 0
EDGE_EXCITATORY = 1
EDGE_INHIBITORY = 2

NODE_PLAIN = 0
NODE_EXCITATORY = 1
NODE_INHIBITORY = 2


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: a strong invertible 64-bit mix."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by (base_seed, stream_id).

    The stream id is an order-sensitive 64-bit hash of the derivation tags,
    and the underlying generator is counter-based (Philox), so streams with
    distinct ids are statistically independent and a stream's output never
    depends on when or where it is consumed.
    """

    base_seed: int
    stream_id: int
    tags: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = (_mix64(self.base_seed & _MASK64) << 64) | self.stream_id
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *tags: int) -> "RngStream":
        """Derive a substream; same mixing discipline as `derive_stream`."""
        return derive_stream(self.base_seed, list(self.tags) + list(tags))


def derive_stream(base_seed: int, tags: list[int] | tuple[int, ...]) -> RngStream:
    """Derive the stream for (base_seed, tags).

    The fold is order-sensitive: permuting the tags, flipping any tag bit, or
    changing the seed all yield a different stream id (up to 64-bit hash
    collisions).
    """
    h = _mix64(base_seed & _MASK64)
    for tag in tags:
        h = _mix64(h ^ _mix64(int(tag) & _MASK64))
    return RngStream(base_seed=int(base_seed), stream_id=h, tags=tuple(int(t) for t in tags))


class HyperBox:
    """Axis-aligned box of admissible hyperparameter values, one interval
    per label.  Compactness requires lower < upper on every axis."""

    def __init__(self, bounds: dict[str, tuple[float, float]]):
        for label, (lo, hi) in bounds.items():
            if not lo < hi:
                raise ValueError(f"HyperBox[{label!r}]: lower {lo} must be < upper {hi}")
        self._bounds = {k: (float(lo), float(hi)) for k, (lo, hi) in bounds.items()}

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._bounds)

    def bounds(self, label: str) -> tuple[float, float]:
        return self._bounds[label]

    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self._bounds.values()])

    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self._bounds.values()])

    def contains(self, h: "HyperParams") -> bool:
        if h.labels != self.labels:
            raise ValueError(f"label mismatch: {h.labels} vs {self.labels}")
        return bool(np.all(h.values >= self.lower()) and np.all(h.values <= self.upper()))

    def clip(self, values: np.ndarray) -> np.ndarray:
        return np.clip(values, self.lower(), self.upper())

    def grid(self, resolution: int) -> list["HyperParams"]:
        """All grid points with `resolution` points per axis, in
        lexicographic order of their value tuples (first label varies
        slowest)."""
        if resolution < 2:
            raise ValueError("grid resolution must be >= 2")
        axes = [np.linspace(lo, hi, resolution) for lo, hi in self._bounds.values()]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=-1)
        return [HyperParams(self.labels, row) for row in points]

    def __repr__(self) -> str:
        return f"HyperBox({self._bounds})"

    def __eq__(self, other) -> bool:
        return isinstance(other, HyperBox) and self._bounds == other._bounds


class HyperParams:
    """Named, ordered hyperparameter vector (the estimation target).

    Labels are unique and their order is stable across serialization, so a
    vector round-trips bit-exactly through JSON.
    """

    __slots__ = ("_labels", "_values")

    def __init__(self, labels, values):
        labels = tuple(labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate hyperparameter labels: {labels}")
        values = np.array(values, dtype=float)  # copy: the vector is frozen below
        if values.shape != (len(labels),):
            raise ValueError(f"expected {len(labels)} values, got shape {values.shape}")
        self._labels = labels
        self._values = values
        self._values.flags.writeable = False

    @classmethod
    def single(cls, label: str, value: float) -> "HyperParams":
        return cls((label,), np.array([value]))

    @classmethod
    def from_dict(cls, d: dict[str, float]) -> "HyperParams":
        return cls(tuple(d), np.array(list(d.values()), dtype=float))

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __getitem__(self, label: str) -> float:
        return float(self._values[self._labels.index(label)])

    def __len__(self) -> int:
        return len(self._labels)

    def replace(self, **updates: float) -> "HyperParams":
        vals = self._values.copy()
        for label, v in updates.items():
            vals[self._labels.index(label)] = v
        return HyperParams(self._labels, vals)

    def with_values(self, values: np.ndarray) -> "HyperParams":
        return HyperParams(self._labels, values)

    def to_json(self) -> str:
        return json.dumps([[k, v] for k, v in zip(self._labels, self._values)])

    @classmethod
    def from_json(cls, s: str) -> "HyperParams":
        pairs = json.loads(s)
        return cls(tuple(k for k, _ in pairs), np.array([v for _, v in pairs]))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, HyperParams)
            and self._labels == other._labels
            and np.array_equal(self._values, other._values)
        )

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v:g}" for k, v in zip(self._labels, self._values))
        return f"HyperParams({inner})"


@dataclass
class NetworkTopology:
    """Directed graph in compressed in-neighbor form.

    ``in_indptr``/``in_indices`` are CSR arrays over destination nodes:
    the in-neighbors of node i are ``in_indices[in_indptr[i]:in_indptr[i+1]]``
    with matching ``in_weights`` and ``edge_types``.  No self-loops, and each
    in-neighbor list is duplicate-free.
    """

    n: int
    in_indptr: np.ndarray  # int64, shape (n+1,)
    in_indices: np.ndarray  # int32, shape (E,)
    in_weights: np.ndarray  # float64, shape (E,)
    edge_types: np.ndarray  # uint8, shape (E,)
    node_types: np.ndarray  # uint8, shape (n,)
    _out_cache: tuple | None = field(default=None, repr=False, compare=False)

    def in_neighbors(self, i: int) -> list[tuple[int, float, int]]:
        lo, hi = self.in_indptr[i], self.in_indptr[i + 1]
        return [
            (int(self.in_indices[k]), float(self.in_weights[k]), int(self.edge_types[k]))
            for k in range(lo, hi)
        ]

    def in_degree(self, i: int) -> int:
        return int(self.in_indptr[i + 1] - self.in_indptr[i])

    @property
    def n_edges(self) -> int:
        return int(self.in_indices.shape[0])

    def out_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Out-edge view (indptr, target indices, weights), built lazily.

        Needed by the spiking simulator, which walks the out-edges of the
        neurons that just fired.  Targets of each source are listed in
        ascending order, deterministically.
        """
        if self._out_cache is None:
            sources = self.in_indices.astype(np.int64)
            targets = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.in_indptr))
            order = np.lexsort((targets, sources))
            out_indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.add.at(out_indptr, sources + 1, 1)
            np.cumsum(out_indptr, out=out_indptr)
            self._out_cache = (
                out_indptr,
                targets[order].astype(np.int32),
                self.in_weights[order].copy(),
            )
        return self._out_cache

    def validate(self) -> None:
        """Check the structural invariants; raises ValueError on violation."""
        if self.in_indptr.shape != (self.n + 1,) or self.in_indptr[0] != 0:
            raise ValueError("malformed indptr")
        if np.any(np.diff(self.in_indptr) < 0):
            raise ValueError("indptr must be nondecreasing")
        if self.in_indices.size and (self.in_indices.min() < 0 or self.in_indices.max() >= self.n):
            raise ValueError("in-neighbor index out of range")
        for i in range(self.n):
            nbrs = self.in_indices[self.in_indptr[i] : self.in_indptr[i + 1]]
            if np.any(nbrs == i):
                raise ValueError(f"self-loop at node {i}")
            if len(np.unique(nbrs)) != len(nbrs):
                raise ValueError(f"duplicate in-neighbor at node {i}")


@dataclass
class ObservationSeries:
    """Time-indexed observations: strictly increasing integer step indices
    and one r-dimensional value row per step."""

    times: np.ndarray  # int64, shape (T,)
    values: np.ndarray  # float64, shape (T, r)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] != self.times.shape[0]:
            if self.values.shape == (1, self.times.shape[0]):
                self.values = self.values.T
            else:
                raise ValueError("times and values lengths differ")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @classmethod
    def from_scalars(cls, values, start: int = 1) -> "ObservationSeries":
        values = np.asarray(values, dtype=float)
        times = np.arange(start, start + values.shape[0], dtype=np.int64)
        return cls(times, values.reshape(-1, 1))


# ---------------------------------------------------------------------------
# Random graph generation
# ---------------------------------------------------------------------------


def _sample_rows_without_replacement(
    rng: np.random.Generator, n_rows: int, pool: int, k: int, forbid: np.ndarray | None
) -> np.ndarray:
    """For each row draw k distinct values from range(pool), optionally
    excluding one forbidden value per row.  Vectorized rejection when k is
    small relative to the pool; per-row exact sampling otherwise."""
    if forbid is not None:
        # Shift trick: draw from pool-1 and skip the forbidden value.
        eff_pool = pool - 1
    else:
        eff_pool = pool
    if k > eff_pool:
        raise ValueError(f"cannot draw {k} distinct values from a pool of {eff_pool}")

    if eff_pool <= 64 or 4 * k >= eff_pool:
        out = np.empty((n_rows, k), dtype=np.int64)
        for r in range(n_rows):
            draw = rng.choice(eff_pool, size=k, replace=False)
            out[r] = draw
    else:
        out = rng.integers(0, eff_pool, size=(n_rows, k))
        while True:
            srt = np.sort(out, axis=1)
            bad = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
            if not bad.any():
                break
            out[bad] = rng.integers(0, eff_pool, size=(int(bad.sum()), k))
    if forbid is not None:
        out = out + (out >= forbid[:, None])
    return out


def gen_topology_fixed_indegree(n: int, d: int, rng: RngStream) -> NetworkTopology:
    """Directed graph where every node has exactly `d` in-neighbors drawn
    uniformly without replacement from the other n-1 nodes.  All edges are
    plain with weight 1."""
    if not 0 < d < n:
        raise ValueError(f"in-degree d={d} must satisfy 0 < d < n={n}")
    gen = rng.generator()
    nbrs = _sample_rows_without_replacement(gen, n, n, d, forbid=np.arange(n))
    nbrs = np.sort(nbrs, axis=1)
    indptr = np.arange(0, n * d + 1, d, dtype=np.int64)
    return NetworkTopology(
        n=n,
        in_indptr=indptr,
        in_indices=nbrs.ravel().astype(np.int32),
        in_weights=np.ones(n * d),
        edge_types=np.full(n * d, EDGE_PLAIN, dtype=np.uint8),
        node_types=np.full(n, NODE_PLAIN, dtype=np.uint8),
    )


def _split_in_degree(d: int, d_exc_target: int, avail_exc: int, avail_inh: int) -> tuple[int, int]:
    """Clamp the target excitatory/inhibitory split to what the pools allow
    (a node cannot cite itself, so its own pool is one smaller)."""
    de = min(d_exc_target, avail_exc)
    di = d - de
    if di > avail_inh:
        di = avail_inh
        de = d - di
    if de > avail_exc or de < 0 or di < 0:
        raise ValueError(f"cannot place {d} in-edges with pools E={avail_exc}, I={avail_inh}")
    return de, di


def gen_topology_ei(n: int, d: int, e_fraction: float, rng: RngStream) -> NetworkTopology:
    """Excitatory/inhibitory directed graph.

    The first floor(e_fraction*n) nodes are excitatory, the rest inhibitory.
    Every node receives exactly d in-edges split round(d*e_fraction)
    excitatory : rest inhibitory, as close to that as the pool sizes allow
    (self excluded), with sources drawn uniformly without replacement within
    each population.  Edge weights are i.i.d. Uniform(0,1).
    """
    if not 0 < d < n:
        raise ValueError(f"in-degree d={d} must satisfy 0 < d < n={n}")
    if not 0 < e_fraction < 1:
        raise ValueError(f"e_fraction={e_fraction} must lie strictly inside (0,1)")
    n_exc = int(np.floor(e_fraction * n))
    n_inh = n - n_exc
    d_exc_target = int(round(d * e_fraction))
    d_inh_target = d - d_exc_target
    if d_exc_target > 0 and n_exc == 0:
        raise ValueError("excitatory in-edges requested but the graph has no excitatory nodes")
    if d_inh_target > 0 and n_inh == 0:
        raise ValueError("inhibitory in-edges requested but the graph has no inhibitory nodes")

    gen = rng.generator()
    node_types = np.full(n, NODE_INHIBITORY, dtype=np.uint8)
    node_types[:n_exc] = NODE_EXCITATORY

    # Within a node type the available pools are identical, so the split is
    # computed once per type.
    de_E, di_E = _split_in_degree(d, d_exc_target, n_exc - 1, n_inh) if n_exc else (0, 0)
    de_I, di_I = _split_in_degree(d, d_exc_target, n_exc, n_inh - 1) if n_inh else (0, 0)

    nbrs = np.empty((n, d), dtype=np.int64)
    etypes = np.empty((n, d), dtype=np.uint8)
    exc_rows = np.arange(n_exc)
    inh_rows = np.arange(n_exc, n)
    if n_exc:
        if de_E:
            nbrs[:n_exc, :de_E] = np.sort(
                _sample_rows_without_replacement(gen, n_exc, n_exc, de_E, forbid=exc_rows), axis=1
            )
        if di_E:
            nbrs[:n_exc, de_E:] = n_exc + np.sort(
                _sample_rows_without_replacement(gen, n_exc, n_inh, di_E, forbid=None), axis=1
            )
        etypes[:n_exc, :de_E] = EDGE_EXCITATORY
        etypes[:n_exc, de_E:] = EDGE_INHIBITORY
    if n_inh:
        if de_I:
            nbrs[n_exc:, :de_I] = np.sort(
                _sample_rows_without_replacement(gen, n_inh, n_exc, de_I, forbid=None), axis=1
            )
        if di_I:
            nbrs[n_exc:, de_I:] = n_exc + np.sort(
                _sample_rows_without_replacement(gen, n_inh, n_inh, di_I, forbid=inh_rows - n_exc),
                axis=1,
            )
        etypes[n_exc:, :de_I] = EDGE_EXCITATORY
        etypes[n_exc:, de_I:] = EDGE_INHIBITORY

    weights = gen.random(size=n * d)
    indptr = np.arange(0, n * d + 1, d, dtype=np.int64)
    return NetworkTopology(
        n=n,
        in_indptr=indptr,
        in_indices=nbrs.ravel().astype(np.int32),
        in_weights=weights,
        edge_types=etypes.ravel(),
        node_types=node_types,
    )


def gen_topology_bernoulli(n: int, d_mean: float, rng: RngStream) -> NetworkTopology:
    """Erdos-Renyi-style directed graph: every possible edge j -> i (j != i)
    is present independently with probability d_mean/(n-1), so in-degrees
    are Binomial with mean d_mean.  The alternative to the exact-in-degree
    model, selected by the harness `graph_model` flag."""
    if not 0 < d_mean < n:
        raise ValueError(f"mean in-degree {d_mean} must satisfy 0 < d_mean < n={n}")
    gen = rng.generator()
    p = d_mean / (n - 1)
    degrees = gen.binomial(n - 1, p, size=n)
    rows = []
    for i in range(n):
        k = int(degrees[i])
        if k == 0:
            rows.append(np.empty(0, dtype=np.int64))
            continue
        draw = gen.choice(n - 1, size=k, replace=False)
        draw = draw + (draw >= i)
        rows.append(np.sort(draw))
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(degrees)
    indices = np.concatenate(rows) if n else np.empty(0, dtype=np.int64)
    return NetworkTopology(
        n=n,
        in_indptr=indptr,
        in_indices=indices.astype(np.int32),
        in_weights=np.ones(indices.shape[0]),
        edge_types=np.full(indices.shape[0], EDGE_PLAIN, dtype=np.uint8),
        node_types=np.full(n, NODE_PLAIN, dtype=np.uint8),
    )


def load_edge_list(path, n: int) -> NetworkTopology:
    """Plain text import for tests: one `src dst [weight]` triple per line."""
    edges = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            src, dst = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) > 2 else 1.0
            edges.append((dst, src, w))
    edges.sort()
    indptr = np.zeros(n + 1, dtype=np.int64)
    for dst, _, _ in edges:
        indptr[dst + 1] += 1
    np.cumsum(indptr, out=indptr)
    topo = NetworkTopology(
        n=n,
        in_indptr=indptr,
        in_indices=np.array([s for _, s, _ in edges], dtype=np.int32),
        in_weights=np.array([w for _, _, w in edges]),
        edge_types=np.full(len(edges), EDGE_PLAIN, dtype=np.uint8),
        node_types=np.full(n, NODE_PLAIN, dtype=np.uint8),
    )
    topo.validate()
    return topo


def topology_from_lists(n: int, in_lists: list[list[int]]) -> NetworkTopology:
    """Build a plain topology from explicit in-neighbor lists (test helper)."""
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i, lst in enumerate(in_lists):
        indptr[i + 1] = indptr[i] + len(lst)
    indices = np.concatenate([np.asarray(l, dtype=np.int32) for l in in_lists]) if any(
        len(l) for l in in_lists
    ) else np.empty(0, dtype=np.int32)
    topo = NetworkTopology(
        n=n,
        in_indptr=indptr,
        in_indices=indices,
        in_weights=np.ones(indices.shape[0]),
        edge_types=np.full(indices.shape[0], EDGE_PLAIN, dtype=np.uint8),
        node_types=np.full(n, NODE_PLAIN, dtype=np.uint8),
    )
    topo.validate()
    return topo


# ---------------------------------------------------------------------------
# Distribution samplers (mean parameterization throughout)
# ---------------------------------------------------------------------------


def sample_exponential_mean(mean: float, count: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """`count` i.i.d. exponential draws with E[x] = mean.

    Implemented as mean * standard_exponential so that the draw under a
    different mean with the same stream is an exact multiplicative
    pushforward, which is the pairing the filter's rescaling step relies on.
    """
    if mean <= 0:
        raise ValueError(f"exponential mean must be positive, got {mean}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return mean * gen.standard_exponential(size=count)


def sample_gamma(alpha: float, mean: float, count: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """`count` i.i.d. Gamma(alpha, rate=alpha/mean) draws: population mean
    `mean`, population variance mean**2 / alpha."""
    if alpha <= 0:
        raise ValueError(f"gamma shape must be positive, got {alpha}")
    if mean <= 0:
        raise ValueError(f"gamma mean must be positive, got {mean}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return (mean / alpha) * gen.standard_gamma(alpha, size=count)
