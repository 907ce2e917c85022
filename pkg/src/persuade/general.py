"""Grid-relaxation solver for any finite action set and receiver model.

Without structure on the receiver there is no finite exact vertex set, so
the per-action belief regions are approximated by the rational grid
{x / k : x nonnegative integers summing to k}.  The sender's problem over
those candidate posteriors is an LP; refining k tightens the answer from
below.  Callers holding exact boundary points (blend vertices, polytope
corners) can union them in to recover exact optima on a coarse grid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .geometry import (
    HULL_TOLERANCE,
    InfeasibleProgramError,
    LinearProgram,
    hull_membership,
    solve_lp,
)
from .model import (
    TIE_TOLERANCE,
    OptimalPlan,
    PersuasionInstance,
    PlanAtom,
    receiver_best_response,
)

# Hard cap on grid size; beyond this the enumeration is refused.
CANDIDATE_CAP = 2_000_000
# Strict-benefit verdicts require at least this much value over no info.
BENEFIT_MARGIN = 1e-7

__all__ = [
    "CANDIDATE_CAP",
    "BENEFIT_MARGIN",
    "GridSpec",
    "BaselineValues",
    "BenefitReport",
    "default_grid_k",
    "grid_vertices",
    "solve_general",
    "baseline_values",
    "benefit_check",
    "full_persuasion_general",
    "concavify_oracle",
    "expected_region_vertices",
]


def default_grid_k(n_states: int) -> int:
    """Grid denominator giving a workable candidate count per state count."""
    if n_states <= 4:
        return 24
    if n_states <= 6:
        return 8
    return 4


@dataclass(frozen=True)
class GridSpec:
    """Rational belief grid with denominator k over dim states."""

    k: int
    dim: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("grid denominator must be at least 1")
        if self.dim < 1:
            raise ValueError("grid dimension must be at least 1")
        if self.n_points > CANDIDATE_CAP:
            raise ValueError(
                f"grid would hold {self.n_points} candidates, "
                f"over the cap of {CANDIDATE_CAP}"
            )

    @property
    def n_points(self) -> int:
        return comb(self.k + self.dim - 1, self.dim - 1)

    def points(self) -> np.ndarray:
        """All grid beliefs, one per row, in lexicographic order."""
        k, d = self.k, self.dim
        if d == 1:
            return np.ones((1, 1))
        bars = np.array(
            list(itertools.combinations(range(k + d - 1), d - 1)), dtype=np.int64
        )
        ext = np.hstack(
            [
                np.full((bars.shape[0], 1), -1, dtype=np.int64),
                bars,
                np.full((bars.shape[0], 1), k + d - 1, dtype=np.int64),
            ]
        )
        counts = np.diff(ext, axis=1) - 1
        return counts.astype(float) / float(k)


def grid_vertices(
    instance: PersuasionInstance,
    action: int,
    grid: GridSpec,
    extra: np.ndarray | None = None,
) -> np.ndarray:
    """Grid beliefs at which the action is a (possibly tied) best response.

    ``extra`` rows are appended untested; they are for exact boundary
    points the caller already certified.
    """
    if action < 0 or action >= instance.n_actions:
        raise ValueError(f"action index {action} out of range")
    if grid.dim != instance.n_states:
        raise ValueError("grid dimension does not match the instance")
    pts = grid.points()
    scores = instance.receiver.score_all(pts)
    mask = scores[:, action] >= scores.max(axis=1) - TIE_TOLERANCE
    chosen = pts[mask]
    if extra is not None and len(extra):
        extra = np.atleast_2d(np.asarray(extra, dtype=float))
        if extra.shape[1] != instance.n_states:
            raise ValueError("extra points have the wrong dimension")
        chosen = np.vstack([chosen, extra]) if chosen.size else extra
    return chosen


def solve_general(
    instance: PersuasionInstance, point_sets: list[np.ndarray]
) -> OptimalPlan:
    """Optimal plan when each action's posteriors come from a fixed set.

    ``point_sets[a]`` holds the candidate posteriors (rows) on which the
    receiver takes action a.  The LP chooses nonnegative masses on those
    rows so that the total mass reproduces the prior and the sender value
    is maximal; a basic solution keeps the atom count at or below the
    state count.
    """
    if len(point_sets) != instance.n_actions:
        raise ValueError("need one point set per action")
    d = instance.n_states
    v = instance.sender.table
    cols = []
    gains = []
    owners = []
    for a, pts in enumerate(point_sets):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.size == 0:
            continue
        if pts.shape[1] != d:
            raise ValueError(f"point set for action {a} has the wrong dimension")
        cols.append(pts)
        gains.append(pts @ v[:, a])
        owners.extend((a, i) for i in range(pts.shape[0]))
    if not cols:
        raise InfeasibleProgramError("all point sets are empty")
    stacked = np.vstack(cols)
    lp = LinearProgram(
        c=np.concatenate(gains), a_eq=stacked.T, b_eq=instance.prior.weights
    )
    res = solve_lp(lp)
    if res.status != "optimal":
        raise InfeasibleProgramError(
            "prior cannot be split across the provided point sets"
        )
    t = np.zeros((instance.n_actions, d))
    atoms = []
    for idx in np.nonzero(res.x > 1e-12)[0]:
        action, _ = owners[idx]
        weight = float(res.x[idx])
        t[action] += weight * stacked[idx]
        atoms.append(
            PlanAtom(action=action, posterior=stacked[idx].copy(), weight=weight)
        )
    plan = OptimalPlan(
        t=t,
        prior=np.asarray(instance.prior.weights, dtype=float),
        value=float(res.value),
        atoms=tuple(atoms),
    )
    plan.check()
    return plan


@dataclass(frozen=True)
class BaselineValues:
    """Sender value with no disclosure and with full disclosure."""

    no_info: float
    full_info: float
    no_info_action: int


def baseline_values(instance: PersuasionInstance) -> BaselineValues:
    """Sender payoffs of the two trivial schemes, ties sender-preferred."""
    prior = instance.prior
    br = receiver_best_response(instance.receiver, prior, instance.sender)
    no_info = instance.sender.value(prior.weights, br.action)
    d = instance.n_states
    scores = instance.receiver.score_all(np.eye(d))
    best = scores.max(axis=1)
    full_info = 0.0
    for w in range(d):
        ties = np.nonzero(scores[w] >= best[w] - TIE_TOLERANCE)[0]
        full_info += prior.weights[w] * max(
            instance.sender.table[w, a] for a in ties
        )
    return BaselineValues(
        no_info=float(no_info), full_info=float(full_info), no_info_action=br.action
    )


@dataclass(frozen=True, eq=False)
class BenefitReport:
    """Does optimal disclosure strictly beat saying nothing?

    The certificate is the belief (from the candidate sets) and action
    with the largest sender gain over the no-information action; its sign
    certifies the verdict independently of the solved value.
    """

    strictly_beneficial: bool
    value: float
    no_info: float
    margin: float
    certificate_action: int
    certificate_point: np.ndarray
    certificate_gain: float


def benefit_check(
    instance: PersuasionInstance,
    plan: OptimalPlan,
    point_sets: list[np.ndarray] | None = None,
) -> BenefitReport:
    """Compare a solved plan against no disclosure.

    Falls back to the plan's own atoms as the candidate certificate
    points when no point sets are supplied.
    """
    base = baseline_values(instance)
    margin = plan.value - base.no_info
    v = instance.sender.table
    a_star = base.no_info_action
    best_gain = -np.inf
    best_action = a_star
    best_point = np.asarray(instance.prior.weights, dtype=float)
    if point_sets is None:
        collected: dict[int, list[np.ndarray]] = {}
        for atom in plan.atoms:
            collected.setdefault(atom.action, []).append(atom.posterior)
        point_sets = [
            np.array(collected[a]) if a in collected else np.zeros((0, instance.n_states))
            for a in range(instance.n_actions)
        ]
    for a, pts in enumerate(point_sets):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.size == 0:
            continue
        gains = pts @ (v[:, a] - v[:, a_star])
        i = int(np.argmax(gains))
        if gains[i] > best_gain:
            best_gain = float(gains[i])
            best_action = a
            best_point = pts[i]
    return BenefitReport(
        strictly_beneficial=bool(margin > BENEFIT_MARGIN),
        value=float(plan.value),
        no_info=base.no_info,
        margin=float(margin),
        certificate_action=best_action,
        certificate_point=best_point,
        certificate_gain=best_gain,
    )


def full_persuasion_general(
    instance: PersuasionInstance, point_sets: list[np.ndarray]
) -> bool:
    """Whether the sender can hit its pointwise-best action everywhere.

    Partitions states by the sender's uniquely preferred action (a tie
    makes the question ill-posed and raises), scales the prior restricted
    to each cell into a mean posterior, and asks hull membership against
    that action's point set.
    """
    if len(point_sets) != instance.n_actions:
        raise ValueError("need one point set per action")
    v = instance.sender.table
    d = instance.n_states
    ideal = np.argmax(v, axis=1)
    if instance.n_actions > 1:
        sorted_v = np.sort(v, axis=1)
        if np.any(sorted_v[:, -1] - sorted_v[:, -2] <= 0.0):
            raise ValueError(
                "sender-preferred action is not unique in some state"
            )
    prior = instance.prior.weights
    for a in range(instance.n_actions):
        cell = prior * (ideal == a)
        mass = cell.sum()
        if mass <= 0.0:
            continue
        pts = np.atleast_2d(np.asarray(point_sets[a], dtype=float))
        if pts.size == 0:
            return False
        if hull_membership(cell / mass, pts) is None:
            return False
    return True


def concavify_oracle(
    instance: PersuasionInstance, grid: GridSpec | np.ndarray
) -> float:
    """Best sender value from splitting the prior across grid posteriors.

    Each candidate belief is scored by the sender payoff of the
    receiver's (sender-preferred) best response there; the LP then finds
    the best mixture of candidates averaging back to the prior.  This is
    a second, structurally different route to the solver's optimum and is
    kept for cross-checking, not speed.
    """
    pts = grid.points() if isinstance(grid, GridSpec) else np.atleast_2d(
        np.asarray(grid, dtype=float)
    )
    if pts.shape[1] != instance.n_states:
        raise ValueError("grid dimension does not match the instance")
    scores = instance.receiver.score_all(pts)
    best = scores.max(axis=1, keepdims=True)
    ties = scores >= best - TIE_TOLERANCE
    sender_vals = pts @ instance.sender.table
    hat = np.where(ties, sender_vals, -np.inf).max(axis=1)
    d = instance.n_states
    a_eq = np.vstack([pts.T, np.ones(pts.shape[0])])
    b_eq = np.concatenate([instance.prior.weights, [1.0]])
    res = solve_lp(LinearProgram(c=hat, a_eq=a_eq, b_eq=b_eq))
    if res.status != "optimal":
        raise InfeasibleProgramError("prior is outside the grid's hull")
    return float(res.value)


def expected_region_vertices(
    instance: PersuasionInstance, action: int
) -> np.ndarray:
    """Exact corners of an expected-utility receiver's best-response region.

    The region {mu : action weakly best} is a polytope cut out of the
    simplex by pairwise comparison hyperplanes; with a handful of states
    its vertices fall out of brute-force active-set enumeration.  Only
    defined for the ``expected`` kind.
    """
    model = instance.receiver
    if model.kind != "expected":
        raise ValueError("exact region vertices need an expected-utility receiver")
    u = np.asarray(model.params["u"], dtype=float)
    d, n_actions = u.shape
    if action < 0 or action >= n_actions:
        raise ValueError(f"action index {action} out of range")
    normals = [np.eye(d)[i] for i in range(d)]
    normals += [u[:, action] - u[:, b] for b in range(n_actions) if b != action]
    normals = np.array(normals)
    verts: list[np.ndarray] = []
    for combo in itertools.combinations(range(normals.shape[0]), d - 1):
        m = np.vstack([normals[list(combo)], np.ones(d)])
        rhs = np.zeros(d)
        rhs[-1] = 1.0
        try:
            sol = np.linalg.solve(m, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.any(sol < -1e-9) or np.any(normals @ sol < -1e-9):
            continue
        sol = np.clip(sol, 0.0, None)
        sol = sol / sol.sum()
        if not any(np.max(np.abs(sol - w)) < 1e-9 for w in verts):
            verts.append(sol)
    if not verts:
        return np.zeros((0, d))
    return np.array(verts)
