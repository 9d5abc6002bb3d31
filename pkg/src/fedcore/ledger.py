"""Append-only record of the plaintext facts each vertex learns, plus privacy checks."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Tuple

from .graph import Graph


class Kind(str, Enum):
    NEIGHBOR_ID = "neighbor-id"
    COMPARISON_BOOL = "comparison-bool"
    DECRYPTED_VALUE = "decrypted-value"
    TREE_RELATION = "tree-relation"
    TIMING = "timing"
    COUNT_RESULT = "count-result"
    # an exact neighbour value that follows from a comparison outcome
    INFERRED_VALUE = "inferred-value"
    VIOLATION = "violation"


@dataclass(frozen=True, slots=True)
class Observation:
    observer: int
    kind: Kind
    subject: Optional[int] = None
    value: Any = None
    time: float = 0.0
    epoch: Optional[Tuple[int, ...]] = None
    key_owner: Optional[int] = None

    def to_json(self) -> Dict[str, Any]:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["epoch"] = list(self.epoch) if self.epoch is not None else None
        return d


class PrivacyViolation(AssertionError):
    def __init__(self, check: str, obs: Observation, detail: str = ""):
        super().__init__(f"{check} violated by {obs}{': ' + detail if detail else ''}")
        self.check = check
        self.observation = obs


@dataclass(frozen=True)
class Policy:
    compare_budget: int = 1
    query_roots: frozenset = frozenset()
    # Whether P5's whitelisted inference is acceptable at all.
    allow_documented_inference: bool = True


@dataclass
class PrivacyReport:
    passed: Dict[str, bool]
    failures: List[PrivacyViolation] = field(default_factory=list)
    whitelisted: List[Observation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def first_failure(self, check: str) -> Optional[PrivacyViolation]:
        return next((f for f in self.failures if f.check == check), None)


class Ledger:
    """Serialized append sink; iteration order is event order."""

    def __init__(self):
        self._obs: List[Observation] = []

    def record(self, obs: Observation) -> None:
        self._obs.append(obs)

    def __iter__(self):
        return iter(self._obs)

    def __len__(self) -> int:
        return len(self._obs)

    def by_observer(self, u: int) -> List[Observation]:
        return [o for o in self._obs if o.observer == u]

    def of_kind(self, kind: Kind) -> List[Observation]:
        return [o for o in self._obs if o.kind == kind]

    def dump_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for o in self._obs:
                fh.write(json.dumps(o.to_json(), sort_keys=True) + "\n")

    def assert_privacy(self, graph: Graph, policy: Policy = Policy(), strict: bool = False) -> PrivacyReport:
        """Run checks P1..P5 over the recorded observations.

        With ``strict`` the first failure is raised instead of reported.
        """
        failures: List[PrivacyViolation] = []
        whitelisted: List[Observation] = []
        bools: Counter = Counter()

        def fail(check, obs, detail=""):
            failures.append(PrivacyViolation(check, obs, detail))

        for o in self._obs:
            if o.kind == Kind.VIOLATION:
                fail("P2", o, str(o.value))
                continue
            if o.subject is not None and o.subject != o.observer and o.subject not in graph.adj(o.observer):
                fail("P1", o, "subject is not a neighbour")
            if o.key_owner is not None and o.key_owner != o.observer:
                fail("P2", o, "decrypted under a key it does not own")
            if o.kind == Kind.COMPARISON_BOOL:
                slot = (o.observer, o.subject, o.epoch)
                bools[slot] += 1
                if bools[slot] > policy.compare_budget:
                    fail("P3", o, f"more than {policy.compare_budget} comparison(s) in one epoch")
            if o.kind == Kind.COUNT_RESULT and o.observer not in policy.query_roots:
                fail("P4", o, "count result outside the query root")
            if o.kind == Kind.INFERRED_VALUE:
                if policy.allow_documented_inference and _is_documented_inference(o):
                    whitelisted.append(o)
                else:
                    fail("P5", o, "exact neighbour value outside the whitelisted inference")

        passed = {p: not any(f.check == p for f in failures) for p in ("P1", "P2", "P3", "P4", "P5")}
        if strict and failures:
            raise failures[0]
        return PrivacyReport(passed, failures, whitelisted)


def _is_documented_inference(o: Observation) -> bool:
    # own estimate 2 and "2 > v" pins v at 1
    return isinstance(o.value, dict) and o.value.get("probe") == 2 and o.value.get("gt") is True and o.value.get("inferred") == 1


def load_jsonl(path: str) -> List[Dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
