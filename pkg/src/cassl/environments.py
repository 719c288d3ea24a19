"""
Black-box environments.

Deterministic analytic benchmarks (Ishigami, Sobol g-function) return a real
output; the synthetic grasp environment returns a Bernoulli success whose
probability is available through :meth:`SyntheticGrasp.probability`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from . import kernels
from .space import ControlDim, ControlSpace, grasping_preset


@dataclass(frozen=True)
class Context:
    id: str
    features: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"id": self.id, "features": list(self.features)}


class Environment:
    space: ControlSpace
    seen: tuple[Context, ...]
    novel: tuple[Context, ...]
    deterministic: bool = False

    @property
    def n_features(self) -> int:
        return len(self.seen[0].features)

    def pool(self, name: str) -> tuple[Context, ...]:
        if name == "seen":
            return self.seen
        if name == "novel":
            return self.novel
        raise ValueError(f"unknown context pool {name!r}")

    def draw_context(self, rng, pool: str = "seen") -> Context:
        ctxs = self.pool(pool)
        return ctxs[int(rng.integers(len(ctxs)))]

    def evaluate(self, context: Context, action, rng) -> float:
        raise NotImplementedError

    def _check_pools(self):
        ids_seen = {c.id for c in self.seen}
        ids_novel = {c.id for c in self.novel}
        if ids_seen & ids_novel:
            raise ValueError("seen and novel context pools must be disjoint")


class AnalyticEnvironment(Environment):
    """Deterministic benchmark; ``rng`` is accepted and ignored."""

    deterministic = True

    def __init__(self, name: str, space: ControlSpace, fn):
        self.name = name
        self.space = space
        self.fn = fn
        self.seen = (Context("bench-seen"),)
        self.novel = (Context("bench-novel"),)

    def evaluate(self, context, action, rng=None) -> float:
        x = self.space._check_values(action)
        return float(self.fn(x[None, :])[0])

    def evaluate_batch(self, points) -> np.ndarray:
        return self.fn(np.atleast_2d(np.asarray(points, dtype=float)))


def ishigami_fn(x, a=7.0, b=0.1):
    x = np.atleast_2d(x)
    return np.sin(x[:, 0]) + a * np.sin(x[:, 1]) ** 2 + b * x[:, 2] ** 4 * np.sin(x[:, 0])


def ishigami_indices(a=7.0, b=0.1) -> dict:
    """Closed-form first-, total- and second-order indices."""
    pi = math.pi
    v = a ** 2 / 8 + b * pi ** 4 / 5 + b ** 2 * pi ** 8 / 18 + 0.5
    v1 = 0.5 * (1 + b * pi ** 4 / 5) ** 2
    v2 = a ** 2 / 8
    v13 = b ** 2 * pi ** 8 * (1 / 18 - 1 / 50)
    return {
        "s1": np.array([v1 / v, v2 / v, 0.0]),
        "st": np.array([(v1 + v13) / v, v2 / v, v13 / v]),
        "s2_13": v13 / v,
        "var": v,
    }


def ishigami(a: float = 7.0, b: float = 0.1, bins: int = 10) -> AnalyticEnvironment:
    space = ControlSpace(ControlDim(f"x{i + 1}", -math.pi, math.pi, bins) for i in range(3))
    return AnalyticEnvironment("ishigami", space, lambda x: ishigami_fn(x, a, b))


def g_fn(x, a):
    x = np.atleast_2d(x)
    a = np.asarray(a, dtype=float)
    return np.prod((np.abs(4 * x - 2) + a) / (1 + a), axis=1)


def g_function_indices(a) -> dict:
    a = np.asarray(a, dtype=float)
    vi = (1.0 / 3.0) / (1 + a) ** 2
    v = float(np.prod(1 + vi) - 1)
    return {"s1": vi / v, "var": v}


def g_function(a: Sequence[float], bins: int = 10) -> AnalyticEnvironment:
    a = np.asarray(a, dtype=float)
    space = ControlSpace(ControlDim(f"x{i + 1}", 0.0, 1.0, bins) for i in range(len(a)))
    return AnalyticEnvironment("gfunction", space, lambda x: g_fn(x, a))


# ---------------------------------------------------------------------------
# synthetic grasping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticGraspSpec:
    """Bin-level logit model of grasp success.

    ``main[i][b]`` is the logit contribution of bin ``b`` of dimension ``i``;
    every ``(i, j, table)`` in ``pairs`` adds ``table[b_i, b_j]``.
    """

    main: tuple[np.ndarray, ...]
    pairs: tuple[tuple[int, int, np.ndarray], ...] = ()
    context_weights: tuple[float, ...] = ()
    context_scale: float = 0.0
    base: float = 0.0
    seed: int = 0
    n_seen: int = 10
    n_novel: int = 10
    n_classes: int = 2
    names: tuple[str, ...] = field(default=())

    def validate(self, space: ControlSpace) -> None:
        if len(self.main) != space.k:
            raise ValueError("need one main-effect table per dimension")
        for tab, d in zip(self.main, space.dims):
            if np.asarray(tab).shape != (d.bins,) or not np.all(np.isfinite(tab)):
                raise ValueError(f"{d.name}: main-effect table must be finite with {d.bins} entries")
        for i, j, tab in self.pairs:
            if not (0 <= i < space.k and 0 <= j < space.k and i != j):
                raise ValueError(f"bad interaction pair ({i}, {j})")
            shape = (space.dims[i].bins, space.dims[j].bins)
            if np.asarray(tab).shape != shape or not np.all(np.isfinite(tab)):
                raise ValueError(f"interaction ({i}, {j}) must be a finite {shape} table")
        if len(self.context_weights) != self.n_classes + 2:
            raise ValueError("context_weights needs n_classes + 2 entries")
        if not math.isfinite(self.base) or not math.isfinite(self.context_scale):
            raise ValueError("base and context_scale must be finite")


class SyntheticGrasp(Environment):
    def __init__(self, spec: SyntheticGraspSpec, space: ControlSpace | None = None):
        self.space = space or grasping_preset()
        spec.validate(self.space)
        self.spec = spec
        k, bmax = self.space.k, int(self.space.bin_counts.max())
        self._main = np.zeros((k, bmax))
        for i, tab in enumerate(spec.main):
            self._main[i, :len(tab)] = tab
        n_pairs = len(spec.pairs)
        self._pair_i = np.array([p[0] for p in spec.pairs], dtype=np.int64)
        self._pair_j = np.array([p[1] for p in spec.pairs], dtype=np.int64)
        self._pair_tab = np.zeros((n_pairs, bmax, bmax))
        for n, (_, _, tab) in enumerate(spec.pairs):
            tab = np.asarray(tab, dtype=float)
            self._pair_tab[n, :tab.shape[0], :tab.shape[1]] = tab
        self.seen, self.novel = self._make_contexts()
        self._check_pools()

    def _make_contexts(self):
        rng = np.random.default_rng(self.spec.seed)
        pools = []
        for prefix, n in (("seen", self.spec.n_seen), ("novel", self.spec.n_novel)):
            ctxs = []
            for m in range(n):
                cls = m % self.spec.n_classes
                onehot = [1.0 if c == cls else 0.0 for c in range(self.spec.n_classes)]
                size, aspect = rng.uniform(0.05, 0.95, size=2)
                ctxs.append(Context(f"{prefix}-{m:02d}", tuple(onehot) + (round(float(size), 6),
                                                                           round(float(aspect), 6))))
            pools.append(tuple(ctxs))
        return pools[0], pools[1]

    def context_logit(self, context: Context) -> float:
        w = np.asarray(self.spec.context_weights, dtype=float)
        return self.spec.context_scale * float(np.dot(w, context.features))

    def action_logits(self, bins) -> np.ndarray:
        bins = np.ascontiguousarray(np.atleast_2d(bins), dtype=np.int64)
        return self.spec.base + kernels.grasp_logits(bins, self._main, self._pair_i, self._pair_j, self._pair_tab)

    def probability(self, context: Context, action) -> float:
        """Ground-truth success probability of ``action`` in ``context``."""
        z = self.action_logits(self.space.bin_of(action)[None, :])[0] + self.context_logit(context)
        return float(1.0 / (1.0 + math.exp(-z)))

    def probability_bins(self, context: Context, bins) -> np.ndarray:
        z = self.action_logits(bins) + self.context_logit(context)
        return 1.0 / (1.0 + np.exp(-z))

    def evaluate(self, context: Context, action, rng) -> float:
        return 1.0 if rng.random() < self.probability(context, action) else 0.0

    @cached_property
    def _grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Every bin combination with its action logit (context term excluded)."""
        grid = np.stack(np.meshgrid(*[np.arange(b) for b in self.space.bin_counts], indexing="ij"), -1)
        grid = np.ascontiguousarray(grid.reshape(-1, self.space.k))
        return grid, self.action_logits(grid)

    @property
    def best_bins(self) -> np.ndarray:
        """Exhaustive argmax over every bin combination (the context term is additive)."""
        grid, z = self._grid
        return grid[int(np.argmax(z))]

    def ceiling(self, pool: str = "novel") -> float:
        """Mean success probability of the best action over a context pool."""
        return float(np.mean([self.probability_bins(c, self.best_bins[None, :])[0] for c in self.pool(pool)]))

    def random_rate(self, pool: str = "seen") -> float:
        """Expected success of uniform-random bins averaged over a context pool."""
        _, z = self._grid
        return _mean_success(z, [self.context_logit(c) for c in self.pool(pool)])


def _mean_success(z, offsets) -> float:
    return float(np.mean([np.mean(1.0 / (1.0 + np.exp(-(z + o)))) for o in offsets]))


def _gate(u, mu, width):
    """0 at ``mu`` falling towards -1 away from it."""
    return np.exp(-0.5 * ((u - mu) / width) ** 2) - 1.0


def _centered(x):
    x = np.asarray(x, dtype=float)
    return x - x.mean()


def _logit(p):
    return math.log(p / (1.0 - p))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _solve_scale(z, base, offsets, target, tol=1e-13):
    """Scale ``s`` with mean success of ``s*z + base`` equal to ``target`` (bracketed Newton)."""
    lo, hi, s = 0.0, 64.0, 1.0
    for _ in range(100):
        p = np.stack([_sigmoid(s * z + base + o) for o in offsets])
        f = float(p.mean()) - target
        if abs(f) < tol:
            break
        # mean success falls as the (non-positive) logits are stretched
        if f > 0:
            lo = s
        else:
            hi = s
        slope = float(np.mean(p * (1.0 - p) * z))
        step = s - f / slope if slope < 0 else 0.5 * (lo + hi)
        s = step if lo < step < hi else 0.5 * (lo + hi)
    return round(s, 12)


@lru_cache(maxsize=8)
def tabletop_6d(seed: int = 0, target_random_rate: float = 0.21, target_ceiling: float = 0.85) -> SyntheticGrasp:
    """Grasping stand-in over the six-dimensional gripper space.

    Main-effect ranges are ordered h_G > theta > f_G > M_G > alpha > beta.
    Four zero-mean pairwise terms (beta-theta, alpha-h_G, f_G-M_G,
    theta-h_G) move the conditional optimum of one dimension with the value
    of the other while leaving its uniform marginal untouched.

    Two numbers are pinned on the seen pool: the best action succeeds at
    ``target_ceiling`` and uniform-random actions at ``target_random_rate``.
    The base log-odds fixes the first; a common scale on every effect fixes
    the second.
    """
    if not 0.0 < target_random_rate < target_ceiling < 1.0:
        raise ValueError("need 0 < target_random_rate < target_ceiling < 1")
    space = grasping_preset()
    u = [(np.arange(d.bins) + 0.5) / d.bins for d in space.dims]
    theta_deg = np.array([space.dims[0].center(j) for j in range(space.dims[0].bins)])
    theta_shape = np.cos(np.deg2rad(2.0 * (theta_deg - 30.0)))

    i_th, i_al, i_be, i_h, i_m, i_f = range(6)
    main = [None] * 6
    main[i_h] = 20.0 * _gate(u[i_h], 0.36, 0.12)
    main[i_th] = 2.2 * (theta_shape - 1.0) / 2.0
    main[i_f] = 1.6 * _gate(u[i_f], 0.55, 0.2)
    main[i_m] = 1.2 * np.array([-1.0, 0.0, -0.5])
    main[i_al] = 0.8 * _gate(u[i_al], 0.4, 0.3)
    main[i_be] = 0.6 * _gate(u[i_be], 0.6, 0.3)

    h_shape = _centered(main[i_h]) / np.abs(_centered(main[i_h])).max()
    pairs = (
        (i_be, i_th, 2.0 * np.outer(-(2 * u[i_be] - 1), theta_shape)),
        (i_al, i_h, 1.2 * np.outer(2 * u[i_al] - 1, h_shape)),
        (i_f, i_m, 1.0 * np.outer(-(2 * u[i_f] - 1), _centered([1.0, -0.5, -0.5]))),
        (i_th, i_h, 0.8 * np.outer(theta_shape, h_shape)),
    )
    spec = SyntheticGraspSpec(
        main=tuple(np.asarray(m, dtype=float) for m in main),
        pairs=tuple((i, j, np.asarray(t, dtype=float)) for i, j, t in pairs),
        context_weights=(0.3, -0.3, 0.6, -0.4),
        context_scale=1.0,
        base=0.0,
        seed=seed,
        names=tuple(space.names),
    )
    env = SyntheticGrasp(spec, space)
    _, z = env._grid
    z = z - z.max()
    offsets = np.array([env.context_logit(c) for c in env.seen])

    lo, hi = -20.0, 20.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.mean(_sigmoid(mid + offsets)) < target_ceiling:
            lo = mid
        else:
            hi = mid
    base = 0.5 * (lo + hi)
    scale = _solve_scale(z, base, offsets, target_random_rate)
    # action logits are linear in the tables, so the best action stays at z = 0 after scaling
    shift = round(base - scale * float(env._grid[1].max()), 12)
    return SyntheticGrasp(replace(
        spec,
        main=tuple(scale * m for m in spec.main),
        pairs=tuple((i, j, scale * t) for i, j, t in spec.pairs),
        base=shift,
    ), space)


ENV_PRESETS = {
    "ishigami": lambda **kw: ishigami(**kw),
    "gfunction": lambda **kw: g_function(kw.pop("a", (0, 1, 4.5, 9, 99, 99)), **kw),
    "tabletop-6d": lambda **kw: tabletop_6d(**kw),
}


def env_preset(name: str, **overrides) -> Environment:
    try:
        factory = ENV_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown environment preset {name!r}; known: {sorted(ENV_PRESETS)}") from None
    return factory(**overrides)
