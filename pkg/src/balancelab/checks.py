"""Numeric verification of what joint balancing does to a distribution.

Everything here works on exact tables, so each claim is checked by direct
enumeration rather than simulation: sufficient conditions for balanced
training to yield an invariant model, risk invariance of predictors across a
correlation-shift family, the closed form for entangled channels, fairness
implications of balancing, and seeded searches for balanced distributions
that violate the independencies of an edge-dropped graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from .balancing import BalanceSpec, JointTarget, balance_exact
from .bayesnet import (
    Cbn,
    Dag,
    FactorizationReport,
    Violation,
    broadcast_axes,
    factorizes_according_to,
    joint,
)
from .errors import (
    ArgumentError,
    CounterexampleNotFound,
    CoverageError,
    LabelError,
)
from .rng import spawn
from .tables import JointTable, Variable, is_independent, marginalize
from .templates import GraphTemplate, random_instance

GENERIC_GAP = 1e-6  # separates structural violations from float noise


class Role(str, Enum):
    """What a covariate is causally tied to."""

    CORE = "core"                  # the label only
    SPURIOUS = "spurious"          # the group factor only
    ENTANGLED = "entangled"        # both label and group factor
    OTHER_FACTOR = "other_factor"  # a second auxiliary factor


@dataclass(frozen=True)
class DecompositionLabel:
    """Role assignment for every covariate in a table."""

    assignment: Mapping[str, Role]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "assignment", {k: Role(v) for k, v in dict(self.assignment).items()}
        )

    def vars_with(self, *roles: Role) -> tuple[str, ...]:
        return tuple(n for n, r in self.assignment.items() if r in roles)

    @property
    def core(self) -> tuple[str, ...]:
        return self.vars_with(Role.CORE)

    @property
    def rest(self) -> tuple[str, ...]:
        """Everything that is not core: the set the sufficiency condition quantifies over."""
        return self.vars_with(Role.SPURIOUS, Role.ENTANGLED, Role.OTHER_FACTOR)


def labels_for(template: GraphTemplate) -> DecompositionLabel:
    assignment: dict[str, Role] = {}
    for name in template.core:
        assignment[name] = Role.CORE
    for name in template.spurious:
        assignment[name] = Role.SPURIOUS
    for name in template.entangled:
        assignment[name] = Role.ENTANGLED
    for name in template.other_factor:
        assignment[name] = Role.OTHER_FACTOR
    return DecompositionLabel(assignment)


def _check_coverage(table: JointTable, labels: DecompositionLabel, y: str, z: str) -> None:
    covariates = set(table.names) - {y, z}
    labelled = set(labels.assignment)
    if labelled != covariates:
        missing = sorted(covariates - labelled)
        extra = sorted(labelled - covariates)
        raise LabelError(
            f"labels must cover the covariates exactly; missing {missing}, extra {extra} "
            "(marginalize latents out first)"
        )
    if not labels.core:
        raise LabelError("at least one covariate must carry the core role")


@dataclass(frozen=True)
class ConditionReport:
    """The two sufficiency conditions for balanced training to be invariant.

    cond1: non-core covariates ⊥ {label, core} | group factor.
    cond2: core ⊥ group factor | label.
    """

    holds: bool
    cond1_gap: float
    cond2_gap: float
    tol: float

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "cond1_gap": self.cond1_gap,
            "cond2_gap": self.cond2_gap,
            "tol": self.tol,
        }


def check_invariance_conditions(
    table: JointTable,
    labels: DecompositionLabel,
    y: str = "Y",
    z: str = "Z",
    tol: float = 1e-9,
) -> ConditionReport:
    """Check the training-distribution conditions under which balancing
    provably yields a risk-invariant, optimal predictor."""
    _check_coverage(table, labels, y, z)
    rest = labels.rest
    if rest:
        cond1 = is_independent(table, rest, (y, *labels.core), (z,), tol)
        cond1_gap = cond1.max_gap
    else:
        cond1_gap = 0.0
    cond2 = is_independent(table, labels.core, (z,), (y,), tol)
    return ConditionReport(
        holds=cond1_gap <= tol and cond2.max_gap <= tol,
        cond1_gap=cond1_gap,
        cond2_gap=cond2.max_gap,
        tol=tol,
    )


@dataclass(frozen=True)
class TablePredictor:
    """A score function on discrete covariate states.

    ``posterior`` maps each input state tuple to the distribution of the
    label; ``score`` is its positive-class mass.  States that carry zero
    probability in the source table are listed in ``unreachable``.
    """

    inputs: tuple[str, ...]
    posterior: Mapping[tuple[int, ...], tuple[float, ...]]
    unreachable: frozenset[tuple[int, ...]] = frozenset()

    def covers(self, state: tuple[int, ...]) -> bool:
        return state in self.posterior

    def score(self, state: tuple[int, ...]) -> float:
        return self.posterior[state][1]

    @classmethod
    def from_scores(cls, inputs: Sequence[str], scores: Mapping[tuple[int, ...], float]) -> "TablePredictor":
        posterior = {s: (1.0 - v, float(v)) for s, v in scores.items()}
        return cls(tuple(inputs), posterior)

    def perturbed(self, delta: Mapping[tuple[int, ...], float]) -> "TablePredictor":
        scores = {
            s: float(np.clip(p[1] + delta.get(s, 0.0), 0.0, 1.0))
            for s, p in self.posterior.items()
        }
        return TablePredictor.from_scores(self.inputs, scores)


def bayes_predictor(table: JointTable, inputs: Iterable[str], y: str = "Y") -> TablePredictor:
    """Exact conditional distribution of the label given the input state."""
    inputs = tuple(inputs)
    if not inputs:
        raise ArgumentError("inputs must be non-empty")
    if y in inputs:
        raise ArgumentError(f"label {y!r} cannot be one of the inputs")
    sub = marginalize(table, set(inputs) | {y})
    arr = np.transpose(sub.probs, sub.axes(inputs) + (sub.axis(y),))
    y_card = arr.shape[-1]
    flat = arr.reshape(-1, y_card)
    cards = arr.shape[:-1]
    posterior: dict[tuple[int, ...], tuple[float, ...]] = {}
    unreachable: set[tuple[int, ...]] = set()
    for idx, row in enumerate(flat):
        state = tuple(int(s) for s in np.unravel_index(idx, cards))
        mass = row.sum()
        if mass == 0.0:
            unreachable.add(state)
        else:
            posterior[state] = tuple(float(v) for v in row / mass)
    return TablePredictor(inputs, posterior, frozenset(unreachable))


def entangled_joint(p: float, q: float) -> JointTable:
    """Three-variable table with uniform independent (Y, Z) and a single
    channel X with P(X=1 | y, z) = p when y or z, else q."""
    for name, v in (("p", p), ("q", q)):
        if not 0.0 <= v <= 1.0:
            raise ArgumentError(f"{name} must lie in [0, 1], got {v}")
    probs = np.zeros((2, 2, 2))  # (x, y, z)
    for y_state in range(2):
        for z_state in range(2):
            px1 = p if (y_state or z_state) else q
            probs[1, y_state, z_state] = 0.25 * px1
            probs[0, y_state, z_state] = 0.25 * (1.0 - px1)
    return JointTable((Variable("X", 2), Variable("Y", 2), Variable("Z", 2)), probs)


def entangled_gap(p: float, q: float) -> tuple[float, float]:
    """Closed-form conditional means of the optimal score given the group factor.

    Returns (E[f(X) | Z=1], E[f(X) | Z=0]) where f is the exact posterior of
    the label from the single entangled channel.  Terms whose channel state
    has zero probability under the relevant conditional drop out.
    """
    for name, v in (("p", p), ("q", q)):
        if not 0.0 <= v <= 1.0:
            raise ArgumentError(f"{name} must lie in [0, 1], got {v}")
    px1 = 0.75 * p + 0.25 * q
    f1 = 0.5 * p / px1 if px1 > 0 else 0.0
    f0 = 0.5 * (1.0 - p) / (1.0 - px1) if px1 < 1 else 0.0
    e_given_z1 = p * f1 + (1.0 - p) * f0
    px1_z0 = 0.5 * (p + q)
    e_given_z0 = px1_z0 * f1 + (1.0 - px1_z0) * f0
    return float(e_given_z1), float(e_given_z0)


@dataclass(frozen=True)
class ShiftFamily:
    """Correlation-shift family: the group-given-label conditional varies
    over ``grid`` while the label marginal and all covariate mechanisms given
    (label, group) stay pinned to ``base``."""

    base: JointTable
    grid: tuple[np.ndarray, ...]
    y: str = "Y"
    z: str = "Z"

    def __post_init__(self) -> None:
        y_card = self.base.variable(self.y).cardinality
        z_card = self.base.variable(self.z).cardinality
        grid = tuple(np.asarray(g, dtype=float) for g in self.grid)
        if not grid:
            raise ArgumentError("grid must be non-empty")
        for g in grid:
            if g.shape != (y_card, z_card):
                raise ArgumentError(f"grid entries must be ({y_card}, {z_card}), got {g.shape}")
            if np.any(g < 0) or np.any(np.abs(g.sum(axis=1) - 1.0) > 1e-12):
                raise ArgumentError("each grid entry must have rows that sum to 1")
        object.__setattr__(self, "grid", grid)

    def __len__(self) -> int:
        return len(self.grid)

    def member(self, i: int) -> JointTable:
        base = self.base
        ay, az = base.axis(self.y), base.axis(self.z)
        other = tuple(k for k in range(len(base.variables)) if k not in (ay, az))
        pyz = base.probs.sum(axis=other, keepdims=True) if other else base.probs
        cond = np.divide(base.probs, pyz, out=np.zeros_like(base.probs), where=pyz > 0)
        py = pyz.sum(axis=az, keepdims=True)
        shift = broadcast_axes(self.grid[i], (ay, az), len(base.variables))
        lost = (pyz == 0) & (py * shift > 0)
        if np.any(lost):
            raise ArgumentError(
                "the shifted conditional puts mass on a (label, group) cell the base "
                "distribution cannot condition on"
            )
        return JointTable(base.variables, cond * py * shift)

    def members(self) -> Iterable[JointTable]:
        return (self.member(i) for i in range(len(self.grid)))


def correlation_grid(n_points: int = 7, lo: float = 0.05, hi: float = 0.95) -> tuple[np.ndarray, ...]:
    """Binary-group confounder-strength sweep.

    Point r sets P'(Z=0|Y=0) = r and P'(Z=0|Y=1) = 1 - r, so the sweep runs
    from a strong coupling one way (r near 0), through independence at 1/2,
    to a strong coupling the other way (r near 1).
    """
    out = []
    for r in np.linspace(lo, hi, n_points):
        out.append(np.array([[r, 1.0 - r], [1.0 - r, r]]))
    return tuple(out)


LOSSES = ("squared", "zero_one", "logloss")


def _loss_value(score: float, y_value: int, loss: str) -> float:
    if loss == "squared":
        return (score - y_value) ** 2
    if loss == "zero_one":
        return float((score >= 0.5) != bool(y_value))
    if loss == "logloss":
        s = min(max(score, 1e-12), 1.0 - 1e-12)
        return -(y_value * np.log(s) + (1 - y_value) * np.log(1.0 - s))
    raise ArgumentError(f"unknown loss {loss!r}; expected one of {LOSSES}")


def _covariate_layout(table: JointTable, y: str, z: str, predictor: TablePredictor):
    cov_names = tuple(n for n in table.names if n not in (y, z))
    for name in predictor.inputs:
        if name not in cov_names:
            raise ArgumentError(f"predictor input {name!r} is not a covariate of the table")
    input_pos = tuple(cov_names.index(n) for n in predictor.inputs)
    return cov_names, input_pos


def _xy_array(
    table: JointTable, cov_names: tuple[str, ...], y: str
) -> tuple[np.ndarray, tuple[int, ...]]:
    """P(covariates..., y) flattened to (n_cov_states, y_card), plus the
    covariate state shape."""
    sub = marginalize(table, set(cov_names) | {y})
    arr = np.transpose(sub.probs, sub.axes(cov_names) + (sub.axis(y),))
    return arr.reshape(-1, arr.shape[-1]), arr.shape[:-1]


@dataclass(frozen=True)
class RiskInvarianceResult:
    risks: tuple[float, ...]
    sup_gap: float
    argmax_pair: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "risks": list(self.risks),
            "sup_gap": self.sup_gap,
            "argmax_pair": list(self.argmax_pair),
        }


def risk_invariance_gap(
    predictor: TablePredictor, family: ShiftFamily, loss: str = "squared"
) -> RiskInvarianceResult:
    """Exact risk of the predictor on every family member and the largest
    pairwise risk difference."""
    if loss not in LOSSES:
        raise ArgumentError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    if family.base.variable(family.y).cardinality != 2:
        raise ArgumentError("risk computations assume a binary label")
    cov_names, input_pos = _covariate_layout(family.base, family.y, family.z, predictor)
    risks = []
    for member in family.members():
        flat, cards = _xy_array(member, cov_names, family.y)
        risk = 0.0
        for idx, row in enumerate(flat):
            mass = row.sum()
            if mass == 0.0:
                continue
            state = tuple(int(s) for s in np.unravel_index(idx, cards))
            key = tuple(state[p] for p in input_pos)
            if not predictor.covers(key):
                raise CoverageError(
                    f"predictor undefined on reachable state {dict(zip(predictor.inputs, key))}"
                )
            s = predictor.score(key)
            risk += sum(row[yv] * _loss_value(s, yv, loss) for yv in range(len(row)))
        risks.append(float(risk))
    sup_gap, argmax = 0.0, (0, 0)
    for i in range(len(risks)):
        for j in range(i + 1, len(risks)):
            d = abs(risks[i] - risks[j])
            if d > sup_gap:
                sup_gap, argmax = d, (i, j)
    return RiskInvarianceResult(tuple(risks), sup_gap, argmax)


@dataclass(frozen=True)
class EpsilonBoundReport:
    epsilon: float
    gap: float
    bound_holds: bool
    loss: str

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "gap": self.gap,
            "bound_holds": self.bound_holds,
            "loss": self.loss,
        }


def check_epsilon_risk_bound(
    fitted: TablePredictor,
    family: ShiftFamily,
    core: Sequence[str],
    loss: str = "squared",
    slack: float = 1e-9,
) -> EpsilonBoundReport:
    """Bound the risk-invariance gap by twice the largest deviation between
    the fitted score and the label mean given the core covariates, over
    family members and reachable states.

    Valid for losses whose risk is characterized by conditional means and is
    score-Lipschitz (squared, logloss).  Zero-one loss jumps at the decision
    threshold, so no score-deviation bound can control it.
    """
    core = tuple(core)
    if loss == "zero_one":
        raise ArgumentError("the risk bound does not apply to the zero_one loss")
    cov_names, input_pos = _covariate_layout(family.base, family.y, family.z, fitted)
    core_pos = tuple(cov_names.index(n) for n in core)
    half_eps = 0.0
    for member in family.members():
        flat, cards = _xy_array(member, cov_names, family.y)
        masses = flat.sum(axis=1)
        reachable = np.flatnonzero(masses > 0)
        core_mass: dict[tuple[int, ...], float] = {}
        core_ymass: dict[tuple[int, ...], float] = {}
        scores: dict[int, float] = {}
        core_keys: dict[int, tuple[int, ...]] = {}
        for idx in reachable:
            state = tuple(int(s) for s in np.unravel_index(idx, cards))
            key = tuple(state[p] for p in input_pos)
            if not fitted.covers(key):
                raise CoverageError(
                    f"predictor undefined on reachable state {dict(zip(fitted.inputs, key))}"
                )
            scores[idx] = fitted.score(key)
            ck = tuple(state[p] for p in core_pos)
            core_keys[idx] = ck
            core_mass[ck] = core_mass.get(ck, 0.0) + masses[idx]
            core_ymass[ck] = core_ymass.get(ck, 0.0) + flat[idx, 1]
        for idx in reachable:
            e_core = core_ymass[core_keys[idx]] / core_mass[core_keys[idx]]
            half_eps = max(half_eps, abs(scores[idx] - e_core))
    epsilon = 2.0 * half_eps
    gap = risk_invariance_gap(fitted, family, loss).sup_gap
    return EpsilonBoundReport(epsilon, gap, gap <= epsilon + slack, loss)


# -- Balanced distributions versus edge-dropped graphs -----------------------

_COUNTEREXAMPLE_IDS = ("C1", "C2", "C3", "C4")


def _random_rows(gen: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    rows = gen.uniform(0.1, 0.9, size=shape)
    return rows / rows.sum(axis=-1, keepdims=True)


def _counterexample_net(example_id: str, gen: np.random.Generator) -> tuple[Cbn, tuple[str, ...], Dag]:
    """Random positive network plus the skeleton left after dropping the
    confounder path, over the observed nodes."""
    b = lambda name: Variable(name, 2)  # noqa: E731
    if example_id == "C1":
        # Z -> X -> Y with a hidden common cause of (Y, Z)
        net = Cbn(
            (b("U"), b("Z"), b("X"), b("Y")),
            {"Z": ("U",), "X": ("Z",), "Y": ("X", "U")},
            {
                "U": _random_rows(gen, (2,)),
                "Z": _random_rows(gen, (2, 2)),
                "X": _random_rows(gen, (2, 2)),
                "Y": _random_rows(gen, (2, 2, 2)),
            },
        )
        skeleton = Dag(("Z", "X", "Y"), {"X": ("Z",), "Y": ("X",)})
        return net, ("U",), skeleton
    if example_id == "C2":
        # X -> Y with a hidden common cause of (Y, Z); Z ends up isolated
        net = Cbn(
            (b("U"), b("X"), b("Y"), b("Z")),
            {"Y": ("X", "U"), "Z": ("U",)},
            {
                "U": _random_rows(gen, (2,)),
                "X": _random_rows(gen, (2,)),
                "Y": _random_rows(gen, (2, 2, 2)),
                "Z": _random_rows(gen, (2, 2)),
            },
        )
        skeleton = Dag(("X", "Y", "Z"), {"Y": ("X",)})
        return net, ("U",), skeleton
    if example_id == "C3":
        # pure causal chain Z -> X -> Y; dropping Z -> X isolates Z
        net = Cbn(
            (b("Z"), b("X"), b("Y")),
            {"X": ("Z",), "Y": ("X",)},
            {
                "Z": _random_rows(gen, (2,)),
                "X": _random_rows(gen, (2, 2)),
                "Y": _random_rows(gen, (2, 2)),
            },
        )
        skeleton = Dag(("Z", "X", "Y"), {"Y": ("X",)})
        return net, (), skeleton
    if example_id == "C4":
        # anti-causal with an observed mediator W between Z and X
        net = Cbn(
            (b("U"), b("Y"), b("Z"), b("W"), b("X")),
            {"Y": ("U",), "Z": ("U",), "W": ("Z",), "X": ("Y", "W")},
            {
                "U": _random_rows(gen, (2,)),
                "Y": _random_rows(gen, (2, 2)),
                "Z": _random_rows(gen, (2, 2)),
                "W": _random_rows(gen, (2, 2)),
                "X": _random_rows(gen, (2, 2, 2)),
            },
        )
        skeleton = Dag(("Y", "Z", "W", "X"), {"W": ("Z",), "X": ("Y", "W")})
        return net, ("U",), skeleton
    raise ArgumentError(f"unknown example id {example_id!r}; expected one of {_COUNTEREXAMPLE_IDS}")


@dataclass(frozen=True)
class NonfactorizationResult:
    example_id: str
    balanced: JointTable
    skeleton: Dag
    violations: tuple[Violation, ...]
    seed_used: int

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "seed_used": self.seed_used,
            "violations": [
                {"a": list(v.a), "b": list(v.b), "given": list(v.given), "gap": v.gap}
                for v in self.violations
            ],
        }


def find_nonfactorizing_balance(
    example_id: str, seed: int, retries: int = 16, min_gap: float = GENERIC_GAP
) -> NonfactorizationResult:
    """Search seeded random instances of the named construction for a
    balanced distribution that violates its edge-dropped skeleton.

    Violations are generic for the constructions that have them, so failing
    all ``retries`` draws raises CounterexampleNotFound.
    """
    if example_id not in _COUNTEREXAMPLE_IDS:
        raise ArgumentError(f"unknown example id {example_id!r}; expected one of {_COUNTEREXAMPLE_IDS}")
    for attempt in range(retries):
        gen = spawn(seed, 61, attempt)
        net, latents, skeleton = _counterexample_net(example_id, gen)
        observed = marginalize(joint(net), set(net.names) - set(latents)) if latents else joint(net)
        balanced = balance_exact(observed, BalanceSpec(JointTarget("Y", "Z")))
        report = factorizes_according_to(balanced, skeleton, tol=1e-9)
        strong = tuple(v for v in report.violations if v.gap > min_gap)
        if strong:
            return NonfactorizationResult(example_id, balanced, skeleton, strong, attempt)
    raise CounterexampleNotFound(
        f"no violation above {min_gap} found for {example_id} in {retries} seeded draws"
    )


@dataclass(frozen=True)
class ControlResult:
    factorizes: bool
    max_gap: float
    report: FactorizationReport = field(repr=False)

    def to_dict(self) -> dict:
        return {"factorizes": self.factorizes, "max_gap": self.max_gap}


def anticausal_control(seed: int, tol: float = 1e-9) -> ControlResult:
    """Balance a random purely spurious anti-causal instance and confirm the
    result still factorizes according to the edge-dropped skeleton."""
    tpl = random_instance("A", seed)
    balanced = balance_exact(tpl.observed(), BalanceSpec(JointTarget(tpl.y, tpl.z)))
    report = factorizes_according_to(balanced, tpl.mutilated_skeleton(), tol=tol)
    return ControlResult(report.factorizes, report.max_gap(), report)


# -- Fairness implications of balancing ---------------------------------------

class FairnessCriterion(str, Enum):
    DEMOGRAPHIC_PARITY = "demographic_parity"
    PREDICTIVE_PARITY = "predictive_parity"
    EQUALIZED_ODDS = "equalized_odds"


@dataclass(frozen=True)
class FairnessReport:
    criterion: FairnessCriterion
    premise_gap: float
    premise_holds: bool
    conclusion_gap: float
    conclusion_holds: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "premise_gap": self.premise_gap,
            "premise_holds": self.premise_holds,
            "conclusion_gap": self.conclusion_gap,
            "conclusion_holds": self.conclusion_holds,
            "tol": self.tol,
        }


def _criterion_gap(
    table: JointTable, criterion: FairnessCriterion, w: Sequence[str], y: str, z: str
) -> float:
    if criterion is FairnessCriterion.DEMOGRAPHIC_PARITY:
        return is_independent(table, tuple(w), (z,), (), tol=1.0).max_gap
    if criterion is FairnessCriterion.PREDICTIVE_PARITY:
        return is_independent(table, (y,), (z,), tuple(w), tol=1.0).max_gap
    return is_independent(table, tuple(w), (z,), (y,), tol=1.0).max_gap


def check_fairness_implication(
    table: JointTable,
    labels: DecompositionLabel,
    criterion: FairnessCriterion,
    y: str = "Y",
    z: str = "Z",
    tol: float = 1e-9,
) -> FairnessReport:
    """If the core covariates are independent of the group factor given the
    label, balancing makes the named fairness criterion hold for any score
    computed from the core covariates.  Reports the premise gap in the input
    distribution and the conclusion gap in its balanced version."""
    _check_coverage(table, labels, y, z)
    criterion = FairnessCriterion(criterion)
    premise = is_independent(table, labels.core, (z,), (y,), tol)
    balanced = balance_exact(table, BalanceSpec(JointTarget(y, z)))
    conclusion_gap = _criterion_gap(balanced, criterion, labels.core, y, z)
    return FairnessReport(
        criterion=criterion,
        premise_gap=premise.max_gap,
        premise_holds=premise.independent,
        conclusion_gap=conclusion_gap,
        conclusion_holds=conclusion_gap <= tol,
        tol=tol,
    )


@dataclass(frozen=True)
class RegularizerSurrogate:
    """A representation variable assumed regularized toward independence of
    the group factor, either marginally or conditionally on the label."""

    w: str
    mode: str  # "marginal" or "conditional"

    def __post_init__(self) -> None:
        if self.mode not in ("marginal", "conditional"):
            raise ArgumentError(f"mode must be 'marginal' or 'conditional', got {self.mode!r}")


@dataclass(frozen=True)
class RegularizedFairnessReport:
    criterion: FairnessCriterion
    mode: str
    balanced_gap: float
    regularizer_gap: float
    premise_holds: bool
    conclusion_gap: float
    conclusion_holds: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "mode": self.mode,
            "balanced_gap": self.balanced_gap,
            "regularizer_gap": self.regularizer_gap,
            "premise_holds": self.premise_holds,
            "conclusion_gap": self.conclusion_gap,
            "conclusion_holds": self.conclusion_holds,
            "tol": self.tol,
        }


def check_fairness_with_regularizer(
    balanced_table: JointTable,
    surrogate: RegularizerSurrogate,
    criterion: FairnessCriterion,
    y: str = "Y",
    z: str = "Z",
    tol: float = 1e-9,
) -> RegularizedFairnessReport:
    """Fairness of a regularized representation in an already-balanced table.

    Premise: the table is balanced (label ⊥ group) and the representation
    satisfies its regularization target.  The conditional mode is sufficient
    for all three criteria; the marginal mode is not (predictive parity and
    equalized odds can fail; see the parity-of-three construction)."""
    criterion = FairnessCriterion(criterion)
    balanced_gap = is_independent(balanced_table, (y,), (z,), (), tol=1.0).max_gap
    if surrogate.mode == "conditional":
        reg_gap = is_independent(balanced_table, (surrogate.w,), (z,), (y,), tol=1.0).max_gap
    else:
        reg_gap = is_independent(balanced_table, (surrogate.w,), (z,), (), tol=1.0).max_gap
    conclusion_gap = _criterion_gap(balanced_table, criterion, (surrogate.w,), y, z)
    return RegularizedFairnessReport(
        criterion=criterion,
        mode=surrogate.mode,
        balanced_gap=balanced_gap,
        regularizer_gap=reg_gap,
        premise_holds=balanced_gap <= tol and reg_gap <= tol,
        conclusion_gap=conclusion_gap,
        conclusion_holds=conclusion_gap <= tol,
        tol=tol,
    )


def xor_representation_table() -> JointTable:
    """Three pairwise-independent bits whose parity is even: W, Y, Z.

    W ⊥ Z and Y ⊥ Z hold exactly, yet given W the other two determine each
    other, so label-given-representation independence of the group fails.
    """
    probs = np.zeros((2, 2, 2))  # (w, y, z)
    for a, b_, c in product(range(2), repeat=3):
        w, y, z = int(a == b_), int(a == c), int(b_ == c)
        probs[w, y, z] += 1.0 / 8.0
    return JointTable((Variable("W", 2), Variable("Y", 2), Variable("Z", 2)), probs)


@dataclass(frozen=True)
class DependenceShift:
    """Dependence gap between the core covariates and the group factor,
    before and after balancing."""

    gap_before: float
    gap_after: float

    def to_dict(self) -> dict:
        return {"gap_before": self.gap_before, "gap_after": self.gap_after}


def causal_task_dependence(
    table: JointTable, labels: DecompositionLabel, y: str = "Y", z: str = "Z"
) -> DependenceShift:
    """Measure how balancing changes the marginal dependence between the core
    covariates and the group factor.  For causal tasks with a purely spurious
    label-group dependence the gap is zero before balancing and generically
    positive after."""
    _check_coverage(table, labels, y, z)
    before = is_independent(table, labels.core, (z,), (), tol=1.0).max_gap
    balanced = balance_exact(table, BalanceSpec(JointTarget(y, z)))
    after = is_independent(balanced, labels.core, (z,), (), tol=1.0).max_gap
    return DependenceShift(before, after)
