"""Self-contained CNF solver with the encodings the synthesis passes need.

The solver is a deterministic conflict-driven clause-learning search with
two watched literals per clause, activity-ordered decisions and Luby
restarts. Every satisfying assignment is re-checked by an independent
clause evaluator before being returned. Instances can be exported to
DIMACS and re-imported, which is how unsatisfiability witnesses are stored
alongside synthesized protocols and re-verified later.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

SAT = "sat"
UNSAT = "unsat"
TIMEOUT = "timeout"


class CnfInstance:
    def __init__(self):
        self.nvars = 0
        self.clauses = []
        self.tags = {}
        self.has_empty_clause = False

    def new_var(self, tag: Optional[str] = None) -> int:
        self.nvars += 1
        if tag is not None:
            self.tags[self.nvars] = tag
        return self.nvars

    def new_vars(self, count: int, tag: Optional[str] = None) -> list:
        return [self.new_var(tag) for _ in range(count)]

    def add_clause(self, lits: Iterable[int]):
        lits = list(lits)
        if not lits:
            raise ValueError("empty clause must be added via add_empty_clause")
        seen = set()
        out = []
        for l in lits:
            if l == 0 or abs(l) > self.nvars:
                raise ValueError(f"literal {l} outside variable range")
            if -l in seen:
                return  # tautology
            if l not in seen:
                seen.add(l)
                out.append(l)
        self.clauses.append(out)

    def add_empty_clause(self, reason: str = ""):
        """Record outright unsatisfiability; never produced implicitly."""
        self.has_empty_clause = True
        self.clauses.append([])

    def add_xor(self, lits: Iterable[int], constant: int = 0):
        """XOR of the literals equals `constant`, via a Tseitin chain."""
        lits = list(lits)
        if not lits:
            if constant:
                self.add_empty_clause("xor of nothing cannot be odd")
            return
        acc = lits[0]
        for l in lits[1:]:
            t = self.new_var("xor")
            a, b = acc, l
            self.add_clause([-a, -b, -t])
            self.add_clause([a, b, -t])
            self.add_clause([a, -b, t])
            self.add_clause([-a, b, t])
            acc = t
        self.add_clause([acc] if constant else [-acc])

    def add_at_most(self, lits: Iterable[int], k: int):
        """Sequential-counter cardinality constraint: at most k literals true."""
        lits = list(lits)
        n = len(lits)
        if k < 0:
            raise ValueError("negative bound")
        if k >= n:
            return
        if k == 0:
            for l in lits:
                self.add_clause([-l])
            return
        # s[i][j]: among the first i+1 literals at least j+1 are true
        prev = [self.new_var("card") for _ in range(k)]
        self.add_clause([-lits[0], prev[0]])
        for j in range(1, k):
            self.add_clause([-prev[j]])
        for i in range(1, n):
            cur = [self.new_var("card") for _ in range(k)] if i < n - 1 else None
            if cur is not None:
                self.add_clause([-lits[i], cur[0]])
                self.add_clause([-prev[0], cur[0]])
                for j in range(1, k):
                    self.add_clause([-lits[i], -prev[j - 1], cur[j]])
                    self.add_clause([-prev[j], cur[j]])
            self.add_clause([-lits[i], -prev[k - 1]])
            if cur is not None:
                prev = cur

    def add_at_least(self, lits: Iterable[int], k: int):
        lits = list(lits)
        if k <= 0:
            return
        if k > len(lits):
            self.add_empty_clause("bound exceeds literal count")
            return
        self.add_at_most([-l for l in lits], len(lits) - k)

    def clone(self) -> "CnfInstance":
        other = CnfInstance()
        other.nvars = self.nvars
        other.clauses = [list(c) for c in self.clauses]
        other.tags = dict(self.tags)
        other.has_empty_clause = self.has_empty_clause
        return other

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.nvars} {len(self.clauses)}"]
        for c in self.clauses:
            lines.append(" ".join(str(l) for l in c) + (" 0" if c else "0"))
        return "\n".join(lines) + "\n"

    def check_model(self, assignment: dict) -> bool:
        """Independent evaluator: every clause has a true literal."""
        if self.has_empty_clause:
            return False
        for c in self.clauses:
            for l in c:
                val = assignment.get(abs(l))
                if val is None:
                    continue
                if val == (l > 0):
                    break
            else:
                return False
        return True


def parse_dimacs(text: str) -> CnfInstance:
    inst = CnfInstance()
    declared = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad problem line {line!r}")
            declared = int(parts[2])
            inst.new_vars(declared)
            continue
        if declared is None:
            raise ValueError("clause before problem line")
        lits = [int(t) for t in line.split()]
        if lits[-1] != 0:
            raise ValueError(f"clause line not 0-terminated: {line!r}")
        lits = lits[:-1]
        if lits:
            inst.add_clause(lits)
        else:
            inst.add_empty_clause()
    return inst


@dataclass
class SolveOutcome:
    status: str
    assignment: Optional[dict] = None
    conflicts: int = 0
    decisions: int = 0

    @property
    def is_sat(self):
        return self.status == SAT


def _luby(i: int) -> int:
    k = 1
    while (1 << (k + 1)) - 1 <= i:
        k += 1
    while i > (1 << k) - 1:
        i -= (1 << k) - 1
        k -= 1
        while (1 << (k + 1)) - 1 <= i:
            k += 1
    return 1 << k


class _Cdcl:
    def __init__(self, nvars, clauses):
        self.nvars = nvars
        self.clauses = []
        self.watches = {}
        self.assign = [None] * (nvars + 1)
        self.level = [0] * (nvars + 1)
        self.reason = [None] * (nvars + 1)
        self.trail = []
        self.trail_lim = []
        self.qhead = 0
        self.activity = [0.0] * (nvars + 1)
        self.var_inc = 1.0
        self.conflicts = 0
        self.decisions = 0
        self.ok = True
        units = []
        for c in clauses:
            c = list(c)
            if not c:
                self.ok = False
                return
            if len(c) == 1:
                units.append(c[0])
            else:
                self._attach(c)
        for u in units:
            if not self._enqueue(u, None):
                self.ok = False
                return

    def _attach(self, c):
        ci = len(self.clauses)
        self.clauses.append(c)
        self.watches.setdefault(c[0], []).append(ci)
        self.watches.setdefault(c[1], []).append(ci)

    def _value(self, lit):
        v = self.assign[abs(lit)]
        if v is None:
            return None
        return v == (lit > 0)

    def _enqueue(self, lit, reason_ci):
        val = self._value(lit)
        if val is not None:
            return val
        v = abs(lit)
        self.assign[v] = lit > 0
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason_ci
        self.trail.append(lit)
        return True

    def _propagate(self):
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            falsified = -lit
            watchlist = self.watches.get(falsified, [])
            i = 0
            while i < len(watchlist):
                ci = watchlist[i]
                c = self.clauses[ci]
                if c[0] == falsified:
                    c[0], c[1] = c[1], c[0]
                if self._value(c[0]) is True:
                    i += 1
                    continue
                moved = False
                for j in range(2, len(c)):
                    if self._value(c[j]) is not False:
                        c[1], c[j] = c[j], c[1]
                        self.watches.setdefault(c[1], []).append(ci)
                        watchlist[i] = watchlist[-1]
                        watchlist.pop()
                        moved = True
                        break
                if moved:
                    continue
                if self._value(c[0]) is False:
                    return ci
                self._enqueue(c[0], ci)
                i += 1
        return None

    def _bump(self, v):
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            for i in range(1, self.nvars + 1):
                self.activity[i] *= 1e-100
            self.var_inc *= 1e-100

    def _analyze(self, confl_ci):
        learnt = []
        seen = [False] * (self.nvars + 1)
        counter = 0
        lit = None
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        ci = confl_ci
        while True:
            for q in self.clauses[ci]:
                if q == lit:
                    continue
                v = abs(q)
                if not seen[v] and self.level[v] > 0:
                    seen[v] = True
                    self._bump(v)
                    if self.level[v] == cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            lit = self.trail[idx]
            v = abs(lit)
            seen[v] = False
            counter -= 1
            idx -= 1
            if counter == 0:
                break
            ci = self.reason[v]
        learnt.insert(0, -lit)
        if len(learnt) == 1:
            bt = 0
        else:
            # second-highest level among learnt literals
            bt = max(self.level[abs(q)] for q in learnt[1:])
            k = max(range(1, len(learnt)), key=lambda i: self.level[abs(learnt[i])])
            learnt[1], learnt[k] = learnt[k], learnt[1]
        return learnt, bt

    def _backtrack(self, lvl):
        while len(self.trail_lim) > lvl:
            bound = self.trail_lim.pop()
            while len(self.trail) > bound:
                lit = self.trail.pop()
                self.assign[abs(lit)] = None
                self.reason[abs(lit)] = None
        self.qhead = len(self.trail)

    def _decide(self):
        best = 0
        best_act = -1.0
        for v in range(1, self.nvars + 1):
            if self.assign[v] is None and self.activity[v] > best_act:
                best = v
                best_act = self.activity[v]
        if best == 0:
            return False
        self.decisions += 1
        self.trail_lim.append(len(self.trail))
        self._enqueue(-best, None)  # negative phase first, deterministic
        return True

    def solve(self, budget: Optional[float] = None) -> SolveOutcome:
        if not self.ok:
            return SolveOutcome(UNSAT, conflicts=self.conflicts)
        deadline = None if budget is None else time.monotonic() + budget
        restart_idx = 1
        limit = 64 * _luby(restart_idx)
        since_restart = 0
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                since_restart += 1
                if not self.trail_lim:
                    return SolveOutcome(UNSAT, conflicts=self.conflicts,
                                        decisions=self.decisions)
                learnt, bt = self._analyze(confl)
                self._backtrack(bt)
                if len(learnt) == 1:
                    if not self._enqueue(learnt[0], None):
                        return SolveOutcome(UNSAT, conflicts=self.conflicts,
                                            decisions=self.decisions)
                else:
                    self._attach(learnt)
                    self._enqueue(learnt[0], len(self.clauses) - 1)
                self.var_inc /= 0.95
                if self.conflicts % 256 == 0 and deadline is not None \
                        and time.monotonic() > deadline:
                    return SolveOutcome(TIMEOUT, conflicts=self.conflicts,
                                        decisions=self.decisions)
                if since_restart >= limit:
                    since_restart = 0
                    restart_idx += 1
                    limit = 64 * _luby(restart_idx)
                    self._backtrack(0)
                continue
            if not self._decide():
                model = {v: bool(self.assign[v]) for v in range(1, self.nvars + 1)}
                return SolveOutcome(SAT, model, self.conflicts, self.decisions)


def solve(instance: CnfInstance, assumptions: Iterable[int] = (),
          budget: Optional[float] = None) -> SolveOutcome:
    """Decide an instance; assumptions are extra unit constraints.

    Guarantees: 'sat' outcomes carry an assignment that passes the
    independent clause evaluator; 'unsat' is complete (only returned after
    an exhausted search, never on budget expiry).
    """
    work = instance.clone()
    for a in assumptions:
        work.add_clause([a])
    if work.has_empty_clause:
        return SolveOutcome(UNSAT)
    solver = _Cdcl(work.nvars, work.clauses)
    out = solver.solve(budget)
    if out.is_sat:
        if not work.check_model(out.assignment):
            raise AssertionError("solver returned a model the evaluator rejects")
    return out


def enumerate_models(instance: CnfInstance, projection: Iterable[int],
                     limit: int = 1 << 20,
                     budget: Optional[float] = None) -> tuple:
    """All satisfying assignments projected onto the given variables.

    Returns (models, truncated): each model is a dict over the projection
    variables; `truncated` reports whether the limit cut the enumeration
    short. Duplicate projections are excluded via blocking clauses.
    """
    projection = list(projection)
    work = instance.clone()
    models = []
    truncated = False
    deadline = None if budget is None else time.monotonic() + budget
    while True:
        remaining = None if deadline is None else max(deadline - time.monotonic(), 0.01)
        out = solve(work, budget=remaining)
        if out.status == TIMEOUT:
            truncated = True
            break
        if out.status == UNSAT:
            break
        proj = {v: out.assignment[v] for v in projection}
        if len(models) >= limit:
            truncated = True
            break
        models.append(proj)
        blocking = [-v if proj[v] else v for v in projection]
        if not blocking:
            break
        work.add_clause(blocking)
    return models, truncated


@dataclass(frozen=True)
class UnsatWitness:
    """A stored instance whose unsatisfiability certifies an optimum."""

    label: str
    dimacs: str
    conflicts: int = 0

    def reverify(self, budget: Optional[float] = None) -> bool:
        inst = parse_dimacs(self.dimacs)
        return solve(inst, budget=budget).status == UNSAT

    def to_json(self) -> dict:
        return {"label": self.label, "dimacs": self.dimacs, "conflicts": self.conflicts}

    @classmethod
    def from_json(cls, d: dict) -> "UnsatWitness":
        return cls(d["label"], d["dimacs"], int(d.get("conflicts", 0)))


def make_unsat_witness(label: str, instance: CnfInstance,
                       outcome: SolveOutcome) -> UnsatWitness:
    if outcome.status != UNSAT:
        raise ValueError("witness requires an unsat outcome")
    return UnsatWitness(label, instance.to_dimacs(), outcome.conflicts)
