"""Exact solver for binary-action disclosure with a convex rejection region.

When the receiver picks between a fallback (action 0) and the action the
sender wants (action 1), and the set of beliefs strictly preferring the
fallback is convex, the acceptance region's hull is spanned by finitely
many vertices: the pure states where acceptance is weakly optimal, plus
one boundary blend per (strict-reject state, accept state) pair.  The
sender's problem then collapses to a small LP over those vertices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    BISECTION_TOLERANCE,
    InfeasibleProgramError,
    LinearProgram,
    hull_membership,
    segment_bisection,
    solve_lp,
)
from .model import OptimalPlan, PersuasionInstance, PlanAtom

# States classify as accept/reject when the pure-state differential clears
# zero by at least minus this.
CLASSIFY_TOLERANCE = 1e-9
# Boundary blends must sit on the indifference surface this tightly.
BOUNDARY_TOLERANCE = 1e-7
# Joint-mass threshold below which verify_threshold treats entries as zero.
THRESHOLD_TOLERANCE = 1e-8
# Random midpoint pairs drawn when spot-checking a convexity declaration.
SPOT_CHECK_PAIRS = 64

__all__ = [
    "CLASSIFY_TOLERANCE",
    "BOUNDARY_TOLERANCE",
    "THRESHOLD_TOLERANCE",
    "StateClassification",
    "K01Vertex",
    "ThresholdReport",
    "classify_states",
    "compute_k01",
    "accept_vertices",
    "solve_binary",
    "full_persuasion_binary",
    "verify_threshold",
]


@dataclass(frozen=True, eq=False)
class StateClassification:
    """Pure states sorted by the sign of their accept-reject differential.

    ``accept`` holds states where accepting is weakly optimal (diff >=
    -CLASSIFY_TOLERANCE), ``reject`` where rejecting is, and
    ``strict_reject`` the reject states that are not also accept states.
    Boundary states with a vanishing differential belong to both accept
    and reject.
    """

    accept: tuple[int, ...]
    reject: tuple[int, ...]
    strict_reject: tuple[int, ...]
    differentials: np.ndarray


@dataclass(frozen=True, eq=False)
class K01Vertex:
    """Hull vertex blending a strict-reject state into an accept state.

    ``posterior = gamma * e_reject + (1 - gamma) * e_accept`` with gamma
    the largest blend weight keeping acceptance weakly optimal.  gamma = 0
    marks the degenerate case where the accept state itself already sits
    on the indifference boundary.
    """

    reject_state: int
    accept_state: int
    gamma: float
    posterior: np.ndarray

    @property
    def degenerate(self) -> bool:
        return self.gamma == 0.0


def _require_binary(instance: PersuasionInstance) -> None:
    if instance.n_actions != 2:
        raise ValueError("this solver handles exactly two actions")


def classify_states(instance: PersuasionInstance) -> StateClassification:
    """Split pure states by whether the receiver accepts, rejects, or both."""
    _require_binary(instance)
    diffs = np.asarray(
        instance.receiver.differential(np.eye(instance.n_states)), dtype=float
    )
    accept = tuple(int(w) for w in np.nonzero(diffs >= -CLASSIFY_TOLERANCE)[0])
    reject = tuple(int(w) for w in np.nonzero(diffs <= CLASSIFY_TOLERANCE)[0])
    strict = tuple(int(w) for w in np.nonzero(diffs < -CLASSIFY_TOLERANCE)[0])
    return StateClassification(
        accept=accept, reject=reject, strict_reject=strict, differentials=diffs
    )


def compute_k01(
    instance: PersuasionInstance,
    classification: StateClassification | None = None,
    gamma_fn=None,
    tol: float = BISECTION_TOLERANCE,
) -> tuple[K01Vertex, ...]:
    """Boundary blend vertices for every (strict-reject, accept) state pair.

    Blends come from bisection along the edge between the two pure states,
    unless ``gamma_fn(reject_state, accept_state)`` supplies the weight in
    closed form.  Every returned vertex is checked to lie on the
    indifference surface within BOUNDARY_TOLERANCE.
    """
    _require_binary(instance)
    if classification is None:
        classification = classify_states(instance)
    d = instance.n_states
    diff = instance.receiver.differential
    out = []
    for w0 in classification.strict_reject:
        for w1 in classification.accept:
            if gamma_fn is not None:
                gamma = float(gamma_fn(w0, w1))
            else:
                e0 = np.eye(d)[w0]
                e1 = np.eye(d)[w1]
                if float(diff(e1)) < 0.0:
                    # Tolerance-only accept states sit a hair under zero;
                    # their blends collapse onto the accept vertex.
                    gamma = 0.0
                else:
                    gamma = segment_bisection(diff, e0, e1, tol=tol)
            gamma = min(max(gamma, 0.0), 1.0)
            posterior = np.zeros(d)
            posterior[w0] += gamma
            posterior[w1] += 1.0 - gamma
            boundary = float(diff(posterior))
            if abs(boundary) > BOUNDARY_TOLERANCE:
                raise ValueError(
                    f"blend of states {w0},{w1} misses the boundary: "
                    f"differential {boundary:.3e}"
                )
            out.append(
                K01Vertex(
                    reject_state=w0,
                    accept_state=w1,
                    gamma=gamma,
                    posterior=posterior,
                )
            )
    return tuple(out)


def accept_vertices(
    classification: StateClassification,
    k01: tuple[K01Vertex, ...],
    dim: int,
) -> tuple[np.ndarray, list[str | None]]:
    """Stack the acceptance hull's vertex rows: pure accepts, then blends."""
    rows = []
    tags: list[str | None] = []
    eye = np.eye(dim)
    for w in classification.accept:
        rows.append(eye[w])
        tags.append(None)
    for vert in k01:
        rows.append(vert.posterior)
        tags.append(f"{vert.reject_state},{vert.accept_state},{vert.gamma:.6g}")
    if not rows:
        return np.zeros((0, dim)), []
    return np.array(rows), tags


def _spot_check_convexity(instance: PersuasionInstance) -> None:
    # The caller declared the strict-reject belief region convex; probe
    # random midpoints of rejecting pairs before leaning on the claim.
    rng = np.random.default_rng(0)
    d = instance.n_states
    samples = rng.dirichlet(np.ones(d), size=4 * SPOT_CHECK_PAIRS)
    diffs = np.asarray(instance.receiver.differential(samples), dtype=float)
    negative = samples[diffs < 0.0]
    if negative.shape[0] < 2:
        return
    left = negative[rng.integers(0, negative.shape[0], size=SPOT_CHECK_PAIRS)]
    right = negative[rng.integers(0, negative.shape[0], size=SPOT_CHECK_PAIRS)]
    mids = 0.5 * (left + right)
    mid_diffs = np.asarray(instance.receiver.differential(mids), dtype=float)
    worst = float(mid_diffs.max())
    if worst > BOUNDARY_TOLERANCE:
        raise ValueError(
            "receiver declares a convex rejection region, but a midpoint of "
            f"two rejecting beliefs accepts (differential {worst:.3e})"
        )


def solve_binary(
    instance: PersuasionInstance,
    k01: tuple[K01Vertex, ...] | None = None,
) -> OptimalPlan:
    """Optimal disclosure plan via the acceptance-hull LP.

    Requires the receiver to declare ``convex_reject_region`` (the claim
    is spot-checked on random midpoints) and the sender to weakly prefer
    action 1 in every state.  The LP splits the prior into per-action
    joint mass, with the accept mass constrained to the hull spanned by
    pure accept states and boundary blends, and the reject mass to the
    strict-reject face.
    """
    _require_binary(instance)
    if not instance.receiver.convex_reject_region:
        raise ValueError(
            "solve_binary needs a receiver declaring convex_reject_region"
        )
    v = instance.sender.table
    if np.any(v[:, 1] < v[:, 0] - 1e-12):
        raise ValueError("sender must weakly prefer action 1 in every state")
    _spot_check_convexity(instance)

    classification = classify_states(instance)
    if k01 is None:
        k01 = compute_k01(instance, classification)
    d = instance.n_states
    v1, _ = accept_vertices(classification, k01, d)
    labels = instance.states.labels
    atom_labels = [labels[w] for w in classification.accept] + [
        f"mix({labels[vert.reject_state]},{labels[vert.accept_state]},{vert.gamma:.6g})"
        for vert in k01
    ]
    eye = np.eye(d)
    v0 = (
        np.array([eye[w] for w in classification.strict_reject])
        if classification.strict_reject
        else np.zeros((0, d))
    )

    n1, n0 = v1.shape[0], v0.shape[0]
    if n1 + n0 == 0:
        raise InfeasibleProgramError("no hull vertices available for either action")
    a_eq = np.vstack([v1, v0]).T
    c = np.concatenate([v1 @ v[:, 1], v0 @ v[:, 0]]) if n0 else v1 @ v[:, 1]
    lp = LinearProgram(c=c, a_eq=a_eq, b_eq=instance.prior.weights)
    res = solve_lp(lp)
    if res.status != "optimal":
        raise InfeasibleProgramError(f"acceptance-hull LP is {res.status}")

    weights = res.x
    t = np.zeros((2, d))
    atoms = []
    for i in range(n1):
        if weights[i] <= 1e-12:
            continue
        t[1] += weights[i] * v1[i]
        atoms.append(
            PlanAtom(
                action=1, posterior=v1[i], weight=float(weights[i]), label=atom_labels[i]
            )
        )
    for j in range(n0):
        if weights[n1 + j] <= 1e-12:
            continue
        t[0] += weights[n1 + j] * v0[j]
        atoms.append(
            PlanAtom(
                action=0,
                posterior=v0[j],
                weight=float(weights[n1 + j]),
                label=labels[classification.strict_reject[j]],
            )
        )
    plan = OptimalPlan(
        t=t,
        prior=np.asarray(instance.prior.weights, dtype=float),
        value=float(res.value),
        atoms=tuple(atoms),
    )
    plan.check()
    return plan


def full_persuasion_binary(
    instance: PersuasionInstance,
    k01: tuple[K01Vertex, ...] | None = None,
) -> bool:
    """Whether the sender can get acceptance with probability one.

    Meaningful when the sender strictly prefers acceptance in every state
    (enforced); the answer is exactly whether the prior lies in the
    acceptance hull.
    """
    _require_binary(instance)
    v = instance.sender.table
    if not np.all(v[:, 1] > v[:, 0]):
        raise ValueError("full persuasion asks for strict sender preference")
    classification = classify_states(instance)
    if k01 is None:
        k01 = compute_k01(instance, classification)
    v1, _ = accept_vertices(classification, k01, instance.n_states)
    if v1.shape[0] == 0:
        return False
    return hull_membership(instance.prior.weights, v1) is not None


@dataclass(frozen=True)
class ThresholdReport:
    """Outcome of verify_threshold.

    ``holds`` says the accept mass uses an order-respecting cutoff:
    every state before the threshold is fully accepted, every one after
    contributes nothing.  ``threshold_state`` is the first state not
    fully accepted (None when all are).  ``witness`` is an offending
    (earlier-not-full, later-still-positive) pair when the check fails.
    ``monotone_ok`` reports the blend-weight monotonicity audit of the
    supplied order (None when no instance was given to audit against).
    """

    holds: bool
    threshold_state: int | None
    witness: tuple[int, int] | None
    monotone_ok: bool | None
    violations: tuple[str, ...] = ()


def verify_threshold(
    plan: OptimalPlan,
    order: list[int],
    instance: PersuasionInstance | None = None,
    k01: tuple[K01Vertex, ...] | None = None,
    tol: float = THRESHOLD_TOLERANCE,
) -> ThresholdReport:
    """Check that a plan's accept mass is a cutoff in the given state order.

    ``order`` lists all states from most to least acceptable.  When an
    instance is supplied, the order itself is audited: a state may only
    precede another if it is an accept state, or both are strict-reject
    states and every accept state blends with the earlier one at a
    strictly larger weight than with the later one.
    """
    d = plan.t.shape[1]
    if sorted(order) != list(range(d)):
        raise ValueError("order must be a permutation of the state indices")
    t1 = plan.t[1]
    prior = plan.prior
    nonzero = [p for p, w in enumerate(order) if t1[w] > tol]
    nonfull = [p for p, w in enumerate(order) if t1[w] < prior[w] - tol]
    holds = (not nonzero) or (not nonfull) or max(nonzero) <= min(nonfull)
    threshold_state = order[min(nonfull)] if nonfull else None
    witness = None
    if not holds:
        witness = (order[min(nonfull)], order[max(nonzero)])

    monotone_ok: bool | None = None
    violations: list[str] = []
    if instance is not None:
        classification = classify_states(instance)
        if k01 is None:
            k01 = compute_k01(instance, classification)
        gammas = {
            (vert.reject_state, vert.accept_state): vert.gamma for vert in k01
        }
        accept = set(classification.accept)
        strict = set(classification.strict_reject)
        for i in range(len(order)):
            if order[i] in accept:
                continue
            for j in range(i + 1, len(order)):
                wi, wj = order[i], order[j]
                if wj not in strict:
                    violations.append(
                        f"state {wj} follows strict-reject state {wi} "
                        "but is not strict-reject"
                    )
                    continue
                for wa in classification.accept:
                    gi, gj = gammas[(wi, wa)], gammas[(wj, wa)]
                    if not gi > gj - 1e-12:
                        violations.append(
                            f"blend weight with accept state {wa} fails to "
                            f"drop from state {wi} ({gi:.6g}) to {wj} ({gj:.6g})"
                        )
        monotone_ok = not violations
    return ThresholdReport(
        holds=bool(holds),
        threshold_state=threshold_state,
        witness=witness,
        monotone_ok=monotone_ok,
        violations=tuple(violations),
    )
