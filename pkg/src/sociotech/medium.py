"""The shared environment all stigmergy simulations act on.

A :class:`Medium` is a directed graph whose links carry a durable weight, a
volatile pheromone level, a fixed heuristic desirability and a traversal
counter. Each mutating method either completes or leaves the medium
untouched.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import BrokenPath, InvalidRate

NodeId = str


@dataclass
class LinkState:
    weight: float = 0.5
    pheromone: float = 0.0
    heuristic: float = 1.0
    traversals: int = 0

    @property
    def cost(self) -> float:
        """Traversal cost: the inverse of the heuristic (1 on abstract graphs)."""
        return 1.0 / self.heuristic if self.heuristic > 0 else math.inf


class Medium:
    def __init__(self, nodes: Iterable[NodeId] = (), w_min: float = 0.0, w_max: float = 1.0):
        if not (w_min >= 0 and w_max > w_min):
            raise ValueError(f"need 0 <= w_min < w_max, got {w_min}, {w_max}")
        self.w_min = w_min
        self.w_max = w_max
        self.nodes: set[NodeId] = set(nodes)
        self.links: dict[tuple[NodeId, NodeId], LinkState] = {}
        self._out: dict[NodeId, dict[NodeId, LinkState]] = {}
        self.clamp_events = 0

    # -- construction ----------------------------------------------------

    def add_node(self, node: NodeId) -> None:
        self.nodes.add(node)

    def add_link(
        self,
        src: NodeId,
        dst: NodeId,
        weight: float = 0.5,
        pheromone: float = 0.0,
        heuristic: Optional[float] = None,
        length: Optional[float] = None,
    ) -> LinkState:
        """Add ``src -> dst``. ``length`` sets the heuristic to ``1/length``."""
        if src == dst:
            raise ValueError(f"self-loop on {src!r}")
        if src not in self.nodes or dst not in self.nodes:
            raise KeyError(f"link {src!r}->{dst!r} has an unknown endpoint")
        if heuristic is None:
            heuristic = 1.0 / length if length is not None else 1.0
        if not (heuristic >= 0 and math.isfinite(heuristic)):
            raise ValueError(f"heuristic must be finite and >= 0, got {heuristic}")
        if not (pheromone >= 0 and math.isfinite(pheromone)):
            raise ValueError(f"pheromone must be finite and >= 0, got {pheromone}")
        link = LinkState(self._clamp(float(weight)), float(pheromone), float(heuristic))
        self.links[(src, dst)] = link
        self._out.setdefault(src, {})[dst] = link
        return link

    def add_edge(self, u: NodeId, v: NodeId, **kw) -> None:
        """Undirected convenience: both directions with the same state."""
        self.add_link(u, v, **kw)
        self.add_link(v, u, **kw)

    def copy(self) -> "Medium":
        return copy.deepcopy(self)

    # -- queries ---------------------------------------------------------

    def out_links(self, node: NodeId) -> list[tuple[NodeId, LinkState]]:
        """Outgoing links of ``node`` in sorted target order."""
        return sorted(self._out.get(node, {}).items())

    def sorted_nodes(self) -> list[NodeId]:
        return sorted(self.nodes)

    def total_pheromone(self) -> float:
        return math.fsum(st.pheromone for st in self.links.values())

    def path_cost(self, path: Sequence[NodeId]) -> float:
        self._check_path(path)
        return math.fsum(self.links[(a, b)].cost for a, b in zip(path, path[1:]))

    def __eq__(self, other):
        if not isinstance(other, Medium):
            return NotImplemented
        return self.nodes == other.nodes and {
            k: (v.weight, v.pheromone, v.heuristic) for k, v in self.links.items()
        } == {k: (v.weight, v.pheromone, v.heuristic) for k, v in other.links.items()}

    # -- mutations -------------------------------------------------------

    def _clamp(self, w: float) -> float:
        if w < self.w_min or w > self.w_max:
            self.clamp_events += 1
            return min(max(w, self.w_min), self.w_max)
        return w

    def set_weight(self, src: NodeId, dst: NodeId, w: float) -> None:
        self.links[(src, dst)].weight = self._clamp(w)

    def _check_path(self, path: Sequence[NodeId]) -> None:
        if len(path) < 2:
            raise BrokenPath(f"path {list(path)!r} has no links")
        for a, b in zip(path, path[1:]):
            if (a, b) not in self.links:
                raise BrokenPath(f"no link {a!r}->{b!r}")

    def evaporate(self, rho: float) -> None:
        """Scale every pheromone level by ``1 - rho``."""
        if not (0.0 <= rho < 1.0):
            raise InvalidRate(f"evaporation rate must be in [0, 1), got {rho}")
        keep = 1.0 - rho
        for st in self.links.values():
            st.pheromone *= keep

    def deposit(self, path: Sequence[NodeId], quality: float, Q: float = 1.0) -> None:
        """Add ``Q * quality`` pheromone per traversal of each link on ``path``."""
        if not (quality > 0 and Q > 0):
            raise ValueError(f"quality and Q must be positive, got {quality}, {Q}")
        self._check_path(path)
        amount = Q * quality
        for a, b in zip(path, path[1:]):
            st = self.links[(a, b)]
            st.pheromone += amount
            st.traversals += 1

    def traverse(self, path: Sequence[NodeId]) -> None:
        """Count a walk along ``path`` without leaving pheromone."""
        self._check_path(path)
        for a, b in zip(path, path[1:]):
            self.links[(a, b)].traversals += 1

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": self.sorted_nodes(),
            "links": [
                {
                    "from": a,
                    "to": b,
                    "weight": st.weight,
                    "pheromone": st.pheromone,
                    "heuristic": st.heuristic,
                }
                for (a, b), st in sorted(self.links.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict, w_min: float = 0.0, w_max: float = 1.0) -> "Medium":
        m = cls(doc.get("nodes", ()), w_min=w_min, w_max=w_max)
        for rec in doc.get("links", ()):
            m.add_link(
                rec["from"],
                rec["to"],
                weight=rec.get("weight", 0.5),
                pheromone=rec.get("pheromone", 0.0),
                heuristic=rec.get("heuristic"),
                length=rec.get("length"),
            )
        return m


def snapshot(medium: Medium) -> str:
    """Canonical JSON: sorted keys, nodes sorted, links sorted by (from, to)."""
    return json.dumps(medium.to_dict(), sort_keys=True, indent=2) + "\n"


def load(text: str, w_min: float = 0.0, w_max: float = 1.0) -> Medium:
    return Medium.from_dict(json.loads(text), w_min=w_min, w_max=w_max)
