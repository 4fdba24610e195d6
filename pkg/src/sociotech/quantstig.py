"""Quantitative stigmergy on a :class:`~sociotech.medium.Medium`.

Ant foraging (pheromone-biased walks plus evaporation), Hebbian link
reinforcement with path shortcutting, spreading activation, and
weight-proportional link ranking.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import DeadEnd, NoConvergence, Unreachable
from .medium import Medium, NodeId


@dataclass(frozen=True)
class AntConfig:
    nest: NodeId
    food: NodeId
    n_ants: int = 20
    alpha: float = 1.0
    beta: float = 2.0
    rho: float = 0.1
    Q: float = 1.0
    n_iterations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.nest == self.food:
            raise ValueError("nest and food must differ")
        if self.n_ants < 1 or self.n_iterations < 1:
            raise ValueError("n_ants and n_iterations must be >= 1")
        if self.alpha < 0 or self.beta < 0 or self.Q <= 0:
            raise ValueError("need alpha, beta >= 0 and Q > 0")


@dataclass(frozen=True)
class HebbianConfig:
    lam: float = 0.1
    mu: float = 0.1
    shortcut_threshold: int = 5
    shortcut_factor: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not 0 < self.mu < 1:
            raise ValueError("mu must be in (0, 1)")
        if not 0 < self.shortcut_factor <= 1:
            raise ValueError("shortcut_factor must be in (0, 1]")


@dataclass
class ActivationState:
    values: dict[NodeId, float]
    decay: float = 0.5
    threshold: float = 0.0

    def __post_init__(self):
        if not 0 < self.decay <= 1:
            raise ValueError("decay must be in (0, 1]")
        for node, v in self.values.items():
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"activation of {node!r} must be finite and >= 0")

    def total(self) -> float:
        return math.fsum(self.values.values())


@dataclass
class ForagingReport:
    per_iteration: list[dict] = field(default_factory=list)
    final_medium: Optional[Medium] = None
    seed: int = 0
    config: Optional[AntConfig] = None

    def to_json(self) -> dict:
        return {
            "per_iteration": self.per_iteration,
            "final_medium_snapshot": self.final_medium.to_dict(),
            "seed": self.seed,
            "config": asdict(self.config),
        }


# ---------------------------------------------------------------- ants


def choose_next(current: NodeId, medium: Medium, alpha: float, beta: float, rng) -> NodeId:
    """Sample a successor with probability proportional to tau**alpha * eta**beta.

    Consumes exactly one uniform draw from ``rng``. Falls back to a uniform
    choice when every score is zero.
    """
    out = medium.out_links(current)
    if not out:
        raise DeadEnd(f"{current!r} has no outgoing links")
    scores = [st.pheromone**alpha * st.heuristic**beta for _, st in out]
    total = math.fsum(scores)
    u = rng.random()
    if not total > 0:
        return out[min(int(u * len(out)), len(out) - 1)][0]
    acc = 0.0
    target = u * total
    for (dst, _), s in zip(out, scores):
        acc += s
        if target < acc:
            return dst
    # rounding left target at the very top
    return next(dst for (dst, _), s in zip(reversed(out), reversed(scores)) if s > 0)


def _reachable(medium: Medium, src: NodeId, dst: NodeId) -> bool:
    seen, stack = {src}, [src]
    while stack:
        node = stack.pop()
        if node == dst:
            return True
        for nxt, _ in medium.out_links(node):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def ant_walk(medium: Medium, cfg: AntConfig, rng) -> Optional[list[NodeId]]:
    """One loop-erased nest-to-food walk; ``None`` if it dead-ends or runs out of steps."""
    path = [cfg.nest]
    where = {cfg.nest: 0}
    for _ in range(10 * len(medium.nodes)):
        try:
            nxt = choose_next(path[-1], medium, cfg.alpha, cfg.beta, rng)
        except DeadEnd:
            return None
        if nxt in where:
            # erase the loop just closed
            cut = where[nxt] + 1
            for node in path[cut:]:
                del where[node]
            del path[cut:]
        else:
            where[nxt] = len(path)
            path.append(nxt)
        if nxt == cfg.food:
            return path
    return None


def run_foraging(medium: Medium, cfg: AntConfig) -> ForagingReport:
    """Colony foraging for ``cfg.n_iterations`` rounds, mutating ``medium``.

    Each round all ants walk against the pheromone left by previous rounds,
    then every completed walk deposits ``Q / cost`` on its links, then the
    whole medium evaporates by ``rho``.
    """
    if cfg.nest not in medium.nodes or cfg.food not in medium.nodes:
        raise Unreachable("nest or food is not a node of the medium")
    if not _reachable(medium, cfg.nest, cfg.food):
        raise Unreachable(f"no path from {cfg.nest!r} to {cfg.food!r}")

    rng = np.random.default_rng(cfg.seed)
    report = ForagingReport(seed=cfg.seed, config=cfg)
    for it in range(cfg.n_iterations):
        walks = [ant_walk(medium, cfg, rng) for _ in range(cfg.n_ants)]
        best = None
        for path in walks:
            if path is None:
                continue
            cost = medium.path_cost(path)
            if not math.isfinite(cost) or cost <= 0:
                continue
            medium.deposit(path, 1.0 / cost, cfg.Q)
            best = cost if best is None else min(best, cost)
        medium.evaporate(cfg.rho)
        report.per_iteration.append({"iter": it, "best_cost": best})
    report.final_medium = medium
    return report


def double_bridge(short: float = 1.0, long: float = 2.0, pheromone: float = 1.0) -> Medium:
    """Two disjoint nest-food routes, via ``s`` (length ``short``) and ``l``.

    Links are undirected (both directions) and each route is split into two
    equal halves.
    """
    m = Medium(["nest", "s", "l", "food"])
    for mid, length in (("s", short), ("l", long)):
        m.add_edge("nest", mid, length=length / 2, pheromone=pheromone)
        m.add_edge(mid, "food", length=length / 2, pheromone=pheromone)
    return m


def branch_share(medium: Medium, branch_node: NodeId) -> float:
    """Fraction of all pheromone lying on links touching ``branch_node``."""
    total = medium.total_pheromone()
    on = math.fsum(st.pheromone for (a, b), st in medium.links.items() if branch_node in (a, b))
    return on / total if total > 0 else 0.0


# ---------------------------------------------------------------- Hebbian


def hebbian_update(medium: Medium, cfg: HebbianConfig) -> list[tuple[NodeId, NodeId]]:
    """Reinforce used links, decay unused ones, shortcut busy two-hop paths.

    Shortcut weights use the weights from before this scan. When several
    intermediates qualify for the same pair the strongest one wins.
    Returns the shortcuts created, in sorted order. Traversal counters are
    reset afterwards.
    """
    before = {k: (st.weight, st.heuristic, st.traversals) for k, st in medium.links.items()}

    candidates: dict[tuple[NodeId, NodeId], tuple[float, float]] = {}
    for (a, b), (w_ab, h_ab, n_ab) in sorted(before.items()):
        if n_ab < cfg.shortcut_threshold:
            continue
        for c, st in medium.out_links(b):
            if c == a or (a, c) in before:
                continue
            w_bc, h_bc, n_bc = before[(b, c)]
            if min(n_ab, n_bc) < cfg.shortcut_threshold:
                continue
            w = cfg.shortcut_factor * min(w_ab, w_bc)
            h = min(h_ab, h_bc)
            if (a, c) not in candidates or w > candidates[(a, c)][0]:
                candidates[(a, c)] = (w, h)

    for st in medium.links.values():
        if st.traversals > 0:
            st.weight = medium._clamp(st.weight + cfg.lam * st.traversals)
        else:
            st.weight = medium._clamp(st.weight * (1.0 - cfg.mu))

    created = sorted(candidates)
    for a, c in created:
        w, h = candidates[(a, c)]
        medium.add_link(a, c, weight=w, heuristic=h)

    for st in medium.links.values():
        st.traversals = 0
    return created


# ---------------------------------------------------------------- activation / ranking


def transition_matrix(medium: Medium) -> tuple[list[NodeId], np.ndarray, np.ndarray]:
    """Row-normalized weight matrix over sorted nodes and a dangling-row mask."""
    nodes = medium.sorted_nodes()
    index = {n: i for i, n in enumerate(nodes)}
    W = np.zeros((len(nodes), len(nodes)))
    for (a, b), st in medium.links.items():
        W[index[a], index[b]] += st.weight
    rows = W.sum(axis=1)
    dangling = rows <= 0
    W[~dangling] /= rows[~dangling, None]
    return nodes, W, dangling


def spread_activation(medium: Medium, init: ActivationState, steps: int) -> ActivationState:
    """Propagate activation ``steps`` times along row-normalized link weights.

    Each step multiplies by ``decay``; nodes without outgoing weight keep
    their own (decayed) activation instead of losing it. Values under
    ``threshold`` are zeroed after every step.
    """
    nodes, W, dangling = transition_matrix(medium)
    unknown = set(init.values) - set(nodes)
    if unknown:
        raise KeyError(f"activation on unknown nodes {sorted(unknown)!r}")
    v = np.array([init.values.get(n, 0.0) for n in nodes], dtype=float)
    for _ in range(steps):
        nxt = W.T @ v
        nxt[dangling] += v[dangling]
        v = init.decay * nxt
        v[v < init.threshold] = 0.0
    return ActivationState(dict(zip(nodes, v.tolist())), init.decay, init.threshold)


def rank_nodes(medium: Medium, damping: float = 0.85, tol: float = 1e-12) -> dict[NodeId, float]:
    """Damped power iteration over weight-proportional transitions.

    Dangling nodes spread their mass uniformly; teleport is uniform. Stops
    when the L1 change drops below ``tol``.
    """
    if not medium.nodes:
        raise ValueError("cannot rank an empty medium")
    if not 0 < damping < 1:
        raise ValueError("damping must be in (0, 1)")
    nodes, W, dangling = transition_matrix(medium)
    n = len(nodes)
    p = np.full(n, 1.0 / n)
    cap = 10 * n + 1000
    for _ in range(cap):
        nxt = damping * (W.T @ p + p[dangling].sum() / n) + (1.0 - damping) / n
        nxt /= nxt.sum()
        delta = np.abs(nxt - p).sum()
        p = nxt
        if delta < tol:
            return dict(zip(nodes, p.tolist()))
    raise NoConvergence(f"rank did not converge in {cap} iterations")


def ranking_csv(scores: dict[NodeId, float]) -> str:
    rows = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return "node,score\n" + "".join(f"{n},{s!r}\n" for n, s in rows)
