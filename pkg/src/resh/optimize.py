"""Assignment optimizer: which eligible start groups launch now, on which robots.

The temporal engine hands over an OptimizationProblem per epoch: the start
groups that may begin, the robot pool snapshot, and current variable
bindings. Two solvers share one objective:

  maximize  W * (groups launched) - travel seconds - low-battery penalty

with W large enough (1e6) that launching eligible work always dominates
geometry. ``solve`` is exact: branch and bound over the binary assignment
model, bounded by an LP relaxation. ``greedy_solve`` is the fallback:
groups in submission order, each action to its nearest feasible idle robot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .errors import NoPath, SolverTimeout
from .syntax.ast import ParamType, PropSpec

GROUP_REWARD = 1.0e6          # W: launching eligible work dominates geometry
TRAVEL_WEIGHT = 1.0           # lambda, per estimated second of travel
BATTERY_WEIGHT = 100.0        # mu multiplier on the low-battery shortfall
BATTERY_FLOOR = 0.2           # below this fraction a robot is penalized


def battery_penalty(battery: float) -> float:
    return BATTERY_WEIGHT * max(0.0, BATTERY_FLOOR - battery)


@dataclass(frozen=True)
class RobotDescriptor:
    """Snapshot of one pool member at problem-formulation time."""

    name: str
    capabilities: FrozenSet[Tuple[str, Tuple[ParamType, ...]]]
    properties: Tuple[Tuple[str, object], ...] = ()
    pose: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    battery: float = 1.0
    busy: Optional[str] = None           # actionInstanceId currently running
    reserved: Optional[str] = None       # owner key of an exclusive scope
    goal: Optional[Tuple[float, float]] = None   # commanded goal if moving

    def prop(self, name: str):
        for k, v in self.properties:
            if k == name:
                return v
        return None

    def advertises(self, action: str, signature: Tuple[ParamType, ...]) -> bool:
        return (action, signature) in self.capabilities

    def travel_origin(self) -> Tuple[float, float]:
        """Where travel is estimated from: the commanded goal if moving."""
        if self.goal is not None:
            return self.goal
        return (self.pose[0], self.pose[1])


@dataclass(frozen=True)
class ActionRequest:
    """One schedulable action occurrence inside a start group."""

    instance_id: str
    action: str
    signature: Tuple[ParamType, ...] = ()
    owner: str = "var:_"                 # "var:NAME" or "robot:NAME"
    target: Optional[Tuple[float, float]] = None   # located actions only
    exclusive: bool = False
    with_spec: Tuple[PropSpec, ...] = ()

    @property
    def needs_goto(self) -> bool:
        return self.target is not None


@dataclass(frozen=True)
class StartGroup:
    """Actions whose initiations must share one letter."""

    gid: str
    actions: Tuple[ActionRequest, ...]
    task: str = "main"

    def __post_init__(self):
        if not self.actions:
            raise ValueError("empty start group")


@dataclass(frozen=True)
class OptimizationProblem:
    epoch: int
    groups: Tuple[StartGroup, ...]                  # in task-submission order
    pool: Tuple[RobotDescriptor, ...]
    bindings: Tuple[Tuple[str, str], ...] = ()      # owner key -> robot name
    conflicts: FrozenSet[FrozenSet[str]] = frozenset()   # mutually exclusive gids

    def binding_of(self, owner: str) -> Optional[str]:
        for k, v in self.bindings:
            if k == owner:
                return v
        return None


@dataclass(frozen=True)
class Solution:
    epoch: int
    assignments: Tuple[Tuple[str, str], ...] = ()   # instance id -> robot name
    new_bindings: Tuple[Tuple[str, str], ...] = ()  # owner key -> robot name
    selected: Tuple[str, ...] = ()                  # gids launched now
    objective: float = 0.0

    def robot_for(self, instance_id: str) -> Optional[str]:
        for a, r in self.assignments:
            if a == instance_id:
                return r
        return None


# A travel estimator maps (robot, target) to seconds; raising NoPath marks
# the pairing infeasible.
TravelEstimator = Callable[[RobotDescriptor, Tuple[float, float]], float]


def euclidean_estimator(speed: float = 1.0) -> TravelEstimator:
    """Straight-line travel time; fine for tests and open maps."""

    def est(robot: RobotDescriptor, target: Tuple[float, float]) -> float:
        ox, oy = robot.travel_origin()
        return math.hypot(target[0] - ox, target[1] - oy) / speed

    return est


def _with_spec_ok(spec: Sequence[PropSpec], robot: RobotDescriptor) -> bool:
    for ps in spec:
        val = bool(robot.prop(ps.prop))
        if val == ps.negated:
            return False
    return True


def feasible_pairs(o: OptimizationProblem) -> Dict[str, Set[str]]:
    """Per action instance, the robots allowed to execute it.

    A with-clause restricts only an unbound variable; once a binding
    exists the binding alone decides (checked at binding time only).
    """
    out: Dict[str, Set[str]] = {}
    for g in o.groups:
        for a in g.actions:
            allowed: Set[str] = set()
            bound = o.binding_of(a.owner)
            for r in o.pool:
                if r.busy is not None:
                    continue
                if not r.advertises(a.action, a.signature):
                    continue
                if a.needs_goto and not any(c[0] == "goto" for c in r.capabilities):
                    continue
                if r.reserved is not None and r.reserved != a.owner:
                    continue
                if a.owner.startswith("robot:"):
                    if r.name != a.owner[len("robot:"):]:
                        continue
                elif bound is not None:
                    if r.name != bound:
                        continue
                elif not _with_spec_ok(a.with_spec, r):
                    continue
                allowed.add(r.name)
            out[a.instance_id] = allowed
    return out


def _pair_costs(o: OptimizationProblem, geo: TravelEstimator,
                pairs: Dict[str, Set[str]]) -> Dict[Tuple[str, str], float]:
    """Cost of each feasible (action, robot) pair; NoPath drops the pair."""
    robots = {r.name: r for r in o.pool}
    costs: Dict[Tuple[str, str], float] = {}
    for g in o.groups:
        for a in g.actions:
            for rn in sorted(pairs.get(a.instance_id, ())):
                r = robots[rn]
                travel = 0.0
                if a.target is not None:
                    try:
                        travel = geo(r, a.target)
                    except NoPath:
                        continue
                costs[(a.instance_id, rn)] = (
                    TRAVEL_WEIGHT * travel + battery_penalty(r.battery))
    return costs


def objective_of(o: OptimizationProblem, selected: Sequence[str],
                 assignments: Dict[str, str],
                 costs: Dict[Tuple[str, str], float]) -> float:
    # fsum keeps the value independent of assignment iteration order
    return GROUP_REWARD * len(selected) - math.fsum(
        costs[(aid, rn)] for aid, rn in assignments.items())


# ---------------------------------------------------------------------------
# exact solver: branch and bound with LP relaxation bounding

class _Model:
    """Binary assignment model over feasible pairs.

    Variables, in a fixed order for determinism:
      x[a,r]  pair chosen           (sorted by (robot, action id))
      y[g]    group launched        (submission order)
    Variable bindings are implied: all actions of one unbound variable
    must take the same robot, enforced combinatorially during search.
    """

    def __init__(self, o: OptimizationProblem, costs: Dict[Tuple[str, str], float]):
        self.o = o
        self.costs = costs
        self.group_of: Dict[str, StartGroup] = {}
        for g in o.groups:
            for a in g.actions:
                self.group_of[a.instance_id] = g
        self.actions: Dict[str, ActionRequest] = {
            a.instance_id: a for g in o.groups for a in g.actions}
        # candidate robots per action, tie-break order
        self.cands: Dict[str, List[str]] = {}
        for g in o.groups:
            for a in g.actions:
                self.cands[a.instance_id] = sorted(
                    rn for (aid, rn) in costs if aid == a.instance_id)
        self.conflicts = o.conflicts

    def launchable(self, g: StartGroup) -> bool:
        return all(self.cands[a.instance_id] for a in g.actions)

    def dump(self) -> str:
        """One constraint per line, for offline inspection."""
        lines = [f"epoch {self.o.epoch}"]
        for g in self.o.groups:
            for a in g.actions:
                terms = " + ".join(f"x[{a.instance_id},{r}]"
                                   for r in self.cands[a.instance_id]) or "0"
                lines.append(f"{terms} = y[{g.gid}]")
        for r in sorted({rn for (_, rn) in self.costs}):
            terms = " + ".join(f"x[{aid},{rn}]" for (aid, rn) in sorted(self.costs)
                               if rn == r)
            lines.append(f"{terms} <= 1")
        for pair in sorted(tuple(sorted(c)) for c in self.conflicts):
            lines.append(f"y[{pair[0]}] + y[{pair[1]}] <= 1")
        obj = [f"{GROUP_REWARD:g} y[{g.gid}]" for g in self.o.groups]
        obj += [f"-{c:g} x[{aid},{rn}]" for (aid, rn), c in sorted(self.costs.items())]
        lines.append("max " + " + ".join(obj))
        return "\n".join(lines) + "\n"


class _LP:
    """Linear relaxation of the binary model, matrices built once.

    Variables, fixed order: x[a,r] (sorted by pair), y[g] (submission
    order), then binding indicators b[v,r] for unbound variables. The
    relaxation links x and b with x[a,r] <= b[v,r] and sum_r b[v,r] <= 1,
    so two actions of one variable cannot ride different robots.
    """

    def __init__(self, model: _Model):
        self.model = model
        o = model.o
        self.pair_ix = {p: i for i, p in enumerate(sorted(model.costs))}
        n = len(self.pair_ix)
        self.grp_ix = {g.gid: n + i for i, g in enumerate(o.groups)}
        n += len(self.grp_ix)
        self.bind_ix: Dict[Tuple[str, str], int] = {}
        for g in o.groups:
            for a in g.actions:
                if a.owner.startswith("var:") and o.binding_of(a.owner) is None:
                    for rn in model.cands[a.instance_id]:
                        if (a.owner, rn) not in self.bind_ix:
                            self.bind_ix[(a.owner, rn)] = n
                            n += 1
        self.n = n
        self.c = [0.0] * n
        for p, i in self.pair_ix.items():
            self.c[i] = model.costs[p]                 # minimize cost
        for g in o.groups:
            self.c[self.grp_ix[g.gid]] = -GROUP_REWARD
        a_eq, b_eq, a_ub, b_ub = [], [], [], []
        for g in o.groups:
            for a in g.actions:
                row = [0.0] * n
                for rn in model.cands[a.instance_id]:
                    row[self.pair_ix[(a.instance_id, rn)]] = 1.0
                row[self.grp_ix[g.gid]] = -1.0
                a_eq.append(row)
                b_eq.append(0.0)
        for rn in sorted({r for (_, r) in model.costs}):
            row = [0.0] * n
            for (aid, r), i in self.pair_ix.items():
                if r == rn:
                    row[i] = 1.0
            a_ub.append(row)
            b_ub.append(1.0)
        for conf in sorted(tuple(sorted(c)) for c in model.conflicts):
            row = [0.0] * n
            for gid in conf:
                row[self.grp_ix[gid]] = 1.0
            a_ub.append(row)
            b_ub.append(1.0)
        for g in o.groups:
            for a in g.actions:
                for rn in model.cands[a.instance_id]:
                    key = (a.owner, rn)
                    if key in self.bind_ix:
                        row = [0.0] * n
                        row[self.pair_ix[(a.instance_id, rn)]] = 1.0
                        row[self.bind_ix[key]] = -1.0
                        a_ub.append(row)
                        b_ub.append(0.0)
        for owner in sorted({v for (v, _) in self.bind_ix}):
            row = [0.0] * n
            for (v, rn), i in self.bind_ix.items():
                if v == owner:
                    row[i] = 1.0
            a_ub.append(row)
            b_ub.append(1.0)
        self.a_eq, self.b_eq = a_eq, b_eq
        self.a_ub, self.b_ub = a_ub, b_ub

    def relax(self, fixes: Dict[int, float]):
        """Solve the relaxation with some variables pinned; returns
        (upper bound on objective, variable values) or (-inf, None)."""
        from scipy.optimize import linprog
        bounds = [(0.0, 1.0)] * self.n
        for i, v in fixes.items():
            bounds[i] = (v, v)
        r = linprog(self.c, A_ub=self.a_ub or None, b_ub=self.b_ub or None,
                    A_eq=self.a_eq or None, b_eq=self.b_eq or None,
                    bounds=bounds, method="highs")
        if not r.success:
            return -math.inf, None
        return -r.fun, r.x


def _solve_lp_bnb(o: OptimizationProblem, model: _Model,
                  costs: Dict[Tuple[str, str], float],
                  node_budget: int) -> Solution:
    """Branch and bound with LP-relaxation bounding, for larger instances.

    The incumbent is seeded with the greedy solution, so the dominance
    property (exact >= greedy) holds even when pruning tolerances bite.
    Branches on the first fractional variable, 1-branch first.
    """
    lp = _LP(model)
    seed = _greedy_from_costs(o, model, costs)
    best_obj = seed.objective if (seed.selected or seed.assignments) else 0.0
    best = (list(seed.selected), dict(seed.assignments))
    nodes = 0
    stack: List[Dict[int, float]] = [{}]
    while stack:
        fixes = stack.pop()
        nodes += 1
        if nodes > node_budget:
            raise SolverTimeout(f"node budget {node_budget} exceeded")
        bound, x = lp.relax(fixes)
        if x is None or bound <= best_obj + 1e-7:
            continue
        frac = next((i for i in range(lp.n) if 1e-6 < x[i] < 1 - 1e-6), None)
        if frac is None:
            sel = [g.gid for g in o.groups if x[lp.grp_ix[g.gid]] > 0.5]
            assigns = {aid: rn for (aid, rn), i in lp.pair_ix.items()
                       if x[i] > 0.5}
            obj = objective_of(o, sel, assigns, costs)
            if obj > best_obj + 1e-12:
                best_obj = obj
                best = (sel, assigns)
            continue
        stack.append({**fixes, frac: 0.0})
        stack.append({**fixes, frac: 1.0})      # popped first
    sel, assigns = best
    binds = {}
    acts = {a.instance_id: a for g in o.groups for a in g.actions}
    for aid, rn in assigns.items():
        owner = acts[aid].owner
        if owner.startswith("var:") and o.binding_of(owner) is None:
            binds[owner] = rn
    return Solution(
        epoch=o.epoch,
        assignments=tuple(sorted(assigns.items())),
        new_bindings=tuple(sorted(binds.items())),
        selected=tuple(sel),
        objective=objective_of(o, sel, assigns, costs) if assigns or sel else 0.0,
    )


def solve(o: OptimizationProblem, geo: TravelEstimator,
          node_budget: int = 200_000) -> Solution:
    """Exact solution by depth-first branch and bound over the groups.

    Deterministic: groups are decided in submission order, robots tried in
    name order, so among equal-objective optima the lexicographically
    smallest assignment by (robotName, actionInstanceId) wins.
    """
    pairs = feasible_pairs(o)
    costs = _pair_costs(o, geo, pairs)
    model = _Model(o, costs)
    groups = list(o.groups)
    best = {"obj": -math.inf, "sol": None, "nodes": 0}

    # admissible bound on what groups i.. can still contribute, given the
    # robots the partial assignment has already consumed (distinctness is
    # otherwise relaxed, so this never underestimates)
    def rest_bound(i: int, used: Dict[str, str]) -> float:
        total = 0.0
        for g in groups[i:]:
            if not model.launchable(g):
                continue
            cost = 0.0
            for a in g.actions:
                cands = [costs[(a.instance_id, rn)]
                         for rn in model.cands[a.instance_id] if rn not in used]
                if not cands:
                    cost = math.inf
                    break
                cost += min(cands)
            total += max(GROUP_REWARD - cost, 0.0)
        return total

    def conflict_blocked(gid: str, chosen: Set[str]) -> bool:
        return any(frozenset((gid, c)) in model.conflicts for c in chosen)

    def walk(i: int, chosen: List[str], used: Dict[str, str],
             binds: Dict[str, str], assigns: Dict[str, str], cost_so_far: float):
        best["nodes"] += 1
        if best["nodes"] > node_budget:
            raise SolverTimeout(f"node budget {node_budget} exceeded")
        if i == len(groups):
            obj = GROUP_REWARD * len(chosen) - cost_so_far
            if obj > best["obj"] + 1e-12:
                best["obj"] = obj
                best["sol"] = (list(chosen), dict(assigns), dict(binds))
            return
        optimistic = GROUP_REWARD * len(chosen) - cost_so_far + rest_bound(i, used)
        if optimistic <= best["obj"] + 1e-12:
            return
        g = groups[i]
        # try launching g first: W dominates, so this order reaches good
        # incumbents early and prunes hard
        if model.launchable(g) and not conflict_blocked(g.gid, set(chosen)):
            for assigns2, used2, binds2, cost2 in _assignments_of(
                    model, o, g, used, binds):
                walk(i + 1, chosen + [g.gid], used2, binds2,
                     {**assigns, **assigns2}, cost_so_far + cost2)
        walk(i + 1, chosen, used, binds, assigns, cost_so_far)

    if len(groups) > 6 or len(costs) > 40:
        return _solve_lp_bnb(o, model, costs, node_budget)
    walk(0, [], {}, {}, {}, 0.0)
    sel, assigns, binds = best["sol"] if best["sol"] else ([], {}, {})
    new_binds = {k: v for k, v in binds.items() if o.binding_of(k) is None}
    return Solution(
        epoch=o.epoch,
        assignments=tuple(sorted(assigns.items())),
        new_bindings=tuple(sorted(new_binds.items())),
        selected=tuple(sel),
        objective=objective_of(o, sel, assigns, costs) if assigns or sel else 0.0,
    )


def _assignments_of(model: _Model, o: OptimizationProblem, g: StartGroup,
                    used: Dict[str, str], binds: Dict[str, str]):
    """All complete assignments for one group, cheapest-robot order first."""
    acts = sorted(g.actions, key=lambda a: a.instance_id)

    def rec(idx: int, u: Dict[str, str], b: Dict[str, str],
            acc: Dict[str, str], cost: float):
        if idx == len(acts):
            yield dict(acc), dict(u), dict(b), cost
            return
        a = acts[idx]
        bound = o.binding_of(a.owner) or b.get(a.owner)
        for rn in model.cands[a.instance_id]:
            if rn in u:
                continue
            if bound is not None and rn != bound:
                continue
            u[rn] = a.instance_id
            acc[a.instance_id] = rn
            newly = a.owner.startswith("var:") and bound is None
            if newly:
                b[a.owner] = rn
            yield from rec(idx + 1, u, b, acc,
                           cost + model.costs[(a.instance_id, rn)])
            if newly:
                del b[a.owner]
            del u[rn]
            del acc[a.instance_id]

    yield from rec(0, dict(used), dict(binds), {}, 0.0)


def greedy_solve(o: OptimizationProblem, geo: TravelEstimator) -> Solution:
    """Fallback: groups in submission order, nearest feasible idle robot."""
    pairs = feasible_pairs(o)
    costs = _pair_costs(o, geo, pairs)
    return _greedy_from_costs(o, _Model(o, costs), costs)


def _greedy_from_costs(o: OptimizationProblem, model: _Model,
                       costs: Dict[Tuple[str, str], float]) -> Solution:
    used: Dict[str, str] = {}
    binds: Dict[str, str] = {}
    assigns: Dict[str, str] = {}
    chosen: List[str] = []
    for g in o.groups:
        if any(frozenset((g.gid, c)) in o.conflicts for c in chosen):
            continue
        trial_used = dict(used)
        trial_binds = dict(binds)
        trial: Dict[str, str] = {}
        ok = True
        for a in sorted(g.actions, key=lambda a: a.instance_id):
            bound = o.binding_of(a.owner) or trial_binds.get(a.owner)
            cands = [rn for rn in model.cands[a.instance_id]
                     if rn not in trial_used and (bound is None or rn == bound)]
            if not cands:
                ok = False
                break
            # nearest first; robot name breaks ties
            rn = min(cands, key=lambda rn: (costs[(a.instance_id, rn)], rn))
            trial_used[rn] = a.instance_id
            trial[a.instance_id] = rn
            if a.owner.startswith("var:") and bound is None:
                trial_binds[a.owner] = rn
        if ok:
            used, binds, chosen = trial_used, trial_binds, chosen + [g.gid]
            assigns.update(trial)
    new_binds = {k: v for k, v in binds.items() if o.binding_of(k) is None}
    return Solution(
        epoch=o.epoch,
        assignments=tuple(sorted(assigns.items())),
        new_bindings=tuple(sorted(new_binds.items())),
        selected=tuple(chosen),
        objective=objective_of(o, chosen, assigns, costs) if assigns or chosen else 0.0,
    )


def solve_or_fallback(o: OptimizationProblem, geo: TravelEstimator,
                      node_budget: int = 200_000) -> Solution:
    try:
        return solve(o, geo, node_budget)
    except SolverTimeout:
        return greedy_solve(o, geo)


def dump_model(o: OptimizationProblem, geo: TravelEstimator) -> str:
    """Text rendering of the model, one constraint per line."""
    return _Model(o, _pair_costs(o, geo, feasible_pairs(o))).dump()
