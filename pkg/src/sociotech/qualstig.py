"""Qualitative stigmergy: collaborative editing of a versioned article.

Statements are opaque quality scores in [0, 1]. Editors see those scores
through Gaussian perception noise, draft replacements from a Beta
distribution centred on their skill, and commit a replacement only when
they perceive it as better than what it replaces. Every commit appends a
revision; nothing is ever removed from history.

Random-number consumption per edit, in order: agent pick (one integer),
target choice for ``RandomReplace`` (one integer), perception of the
article (one normal per statement), draft quality (one Beta), perception
of the draft (one normal).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import BadIndex, EmptyArticle

AgentId = str
ActionKind = Literal["init", "add", "replace", "delete", "revert"]
DRAFT_CONCENTRATION = 10.0


@dataclass(frozen=True)
class Statement:
    quality: float
    author: AgentId

    def __post_init__(self):
        if not 0.0 <= self.quality <= 1.0:
            raise ValueError(f"quality {self.quality} outside [0, 1]")


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    index: Optional[int] = None  # position for replace/delete, target for revert


@dataclass(frozen=True)
class Revision:
    statements: tuple[Statement, ...]
    author: AgentId
    parent: int
    action: Action

    def mean_quality(self) -> float:
        if not self.statements:
            return 0.0
        return math.fsum(s.quality for s in self.statements) / len(self.statements)

    def min_quality(self) -> float:
        return min((s.quality for s in self.statements), default=0.0)


class Article:
    """Append-only revision history; ``head`` is always the newest revision."""

    def __init__(self, statements: Sequence[Statement] = (), author: AgentId = "init"):
        self._history: list[Revision] = [
            Revision(tuple(statements), author, -1, Action("init"))
        ]

    @property
    def history(self) -> tuple[Revision, ...]:
        return tuple(self._history)

    @property
    def head(self) -> Revision:
        return self._history[-1]

    @property
    def head_index(self) -> int:
        return len(self._history) - 1

    def __len__(self):
        return len(self._history)

    def revision(self, index: int) -> Revision:
        if not 0 <= index < len(self._history):
            raise BadIndex(f"revision {index} not in [0, {len(self._history)})")
        return self._history[index]

    def _commit(self, statements, author, action) -> Revision:
        rev = Revision(tuple(statements), author, self.head_index, action)
        self._history.append(rev)
        return rev

    def add(self, statement: Statement, author: AgentId) -> Revision:
        return self._commit(self.head.statements + (statement,), author, Action("add"))

    def replace(self, position: int, statement: Statement, author: AgentId) -> Revision:
        stmts = list(self.head.statements)
        if not 0 <= position < len(stmts):
            raise BadIndex(f"no statement at position {position}")
        stmts[position] = statement
        return self._commit(stmts, author, Action("replace", position))

    def delete(self, position: int, author: AgentId) -> Revision:
        stmts = list(self.head.statements)
        if not 0 <= position < len(stmts):
            raise BadIndex(f"no statement at position {position}")
        del stmts[position]
        return self._commit(stmts, author, Action("delete", position))

    def revert(self, target: int, author: AgentId) -> Revision:
        """Append a copy of revision ``target``'s statements as the new head."""
        old = self.revision(target)
        return self._commit(old.statements, author, Action("revert", target))

    def all_statements(self) -> list[Statement]:
        """Every statement ever committed, in commit order, without duplicates."""
        seen, out = set(), []
        for rev in self._history:
            for s in rev.statements:
                if id(s) not in seen:
                    seen.add(id(s))
                    out.append(s)
        return out

    def to_json(self) -> list[dict]:
        return [
            {
                "index": i,
                "parent": rev.parent,
                "author": rev.author,
                "action": asdict(rev.action),
                "statements": [asdict(s) for s in rev.statements],
            }
            for i, rev in enumerate(self._history)
        ]


def revert(article: Article, target: int, author: AgentId) -> Article:
    article.revert(target, author)
    return article


@dataclass(frozen=True)
class EditorAgent:
    id: AgentId
    skill: float
    noise: float = 0.1
    edit_policy: Literal["ImproveWorst", "RandomReplace"] = "ImproveWorst"

    def __post_init__(self):
        if not 0.0 < self.skill <= 1.0:
            raise ValueError(f"skill {self.skill} outside (0, 1]")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")


def perceive(agent: EditorAgent, article: Article, rng) -> np.ndarray:
    stmts = article.head.statements
    if not stmts:
        raise EmptyArticle("nothing to perceive")
    true_q = np.array([s.quality for s in stmts])
    return np.clip(true_q + agent.noise * rng.standard_normal(len(stmts)), 0.0, 1.0)


def draft_quality(agent: EditorAgent, rng) -> float:
    """Beta draw with mean ``skill`` and concentration 10."""
    a = agent.skill * DRAFT_CONCENTRATION
    b = (1.0 - agent.skill) * DRAFT_CONCENTRATION
    x = rng.beta(a, max(b, 1e-12))
    return 1.0 if agent.skill == 1.0 else float(x)


def edit_step(agent: EditorAgent, article: Article, rng, draft: Optional[float] = None) -> Article:
    """One editing attempt; appends at most one revision.

    ``draft`` overrides the sampled draft quality (the Beta draw is still
    consumed so the random stream stays aligned).
    """
    stmts = article.head.statements
    if not stmts:
        raise EmptyArticle("cannot edit an empty article")
    if agent.edit_policy == "RandomReplace":
        pos = int(rng.integers(len(stmts)))
        seen = perceive(agent, article, rng)
    else:
        seen = perceive(agent, article, rng)
        pos = int(np.argmin(seen))
    q = draft_quality(agent, rng)
    if draft is not None:
        q = draft
    seen_draft = min(max(q + agent.noise * rng.standard_normal(), 0.0), 1.0)
    if seen_draft > seen[pos]:
        article.replace(pos, Statement(q, agent.id), agent.id)
    return article


@dataclass(frozen=True)
class WikiConfig:
    n_agents: int = 10
    n_edits: int = 500
    init_statements: int = 20
    init_quality: float = 0.5
    skill_range: tuple[float, float] = (0.3, 0.9)
    noise_range: tuple[float, float] = (0.1, 0.1)
    edit_policy: Literal["ImproveWorst", "RandomReplace"] = "ImproveWorst"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "skill_range", tuple(self.skill_range))
        object.__setattr__(self, "noise_range", tuple(self.noise_range))
        if self.n_agents < 1 or self.init_statements < 1 or self.n_edits < 0:
            raise ValueError("n_agents and init_statements must be >= 1, n_edits >= 0")
        lo, hi = self.skill_range
        if not 0 < lo <= hi <= 1:
            raise ValueError(f"bad skill_range {self.skill_range}")
        lo, hi = self.noise_range
        if not 0 <= lo <= hi:
            raise ValueError(f"bad noise_range {self.noise_range}")
        if not 0 <= self.init_quality <= 1:
            raise ValueError("init_quality outside [0, 1]")


@dataclass
class QualityReport:
    trajectory: list[dict]
    final: dict
    seed: int
    config: WikiConfig
    article: Article = field(repr=False)

    def to_json(self) -> dict:
        return {
            "trajectory": self.trajectory,
            "final": self.final,
            "seed": self.seed,
            "config": asdict(self.config),
        }


def make_agents(cfg: WikiConfig, rng) -> list[EditorAgent]:
    skills = rng.uniform(*cfg.skill_range, size=cfg.n_agents)
    noises = rng.uniform(*cfg.noise_range, size=cfg.n_agents)
    return [
        EditorAgent(f"agent{i}", float(s), float(n), cfg.edit_policy)
        for i, (s, n) in enumerate(zip(skills, noises))
    ]


def run_wiki_sim(cfg: WikiConfig) -> QualityReport:
    """Seeded editing run; the trajectory has one entry per edit plus the start."""
    rng = np.random.default_rng(cfg.seed)
    agents = make_agents(cfg, rng)
    article = Article([Statement(cfg.init_quality, "init") for _ in range(cfg.init_statements)])

    def point(i):
        head = article.head
        return {"edit": i, "mean_quality": head.mean_quality(), "min_quality": head.min_quality()}

    trajectory = [point(0)]
    for i in range(1, cfg.n_edits + 1):
        agent = agents[int(rng.integers(cfg.n_agents))]
        edit_step(agent, article, rng)
        trajectory.append(point(i))

    final = {"n_statements": len(article.head.statements), "mean_quality": article.head.mean_quality()}
    return QualityReport(trajectory, final, cfg.seed, cfg, article)


def history_json(article: Article) -> str:
    return json.dumps(article.to_json(), sort_keys=True, indent=2) + "\n"
