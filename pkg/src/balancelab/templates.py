"""Built-in network templates for the four benchmark data-generating graphs.

Each template couples a label Y and a group factor Z through a latent
confounder and hangs observable feature channels off the latents:

  A  anti-causal, purely spurious:   Y -> X_core,  Z -> X_aux
  B  causal, purely spurious:        X_core -> Y,  Z -> X_aux
  C  anti-causal plus a second
     factor V:                       Y -> X_core,  Z -> X_aux,  V -> X_v
  D  anti-causal, entangled:         Y -> X_core,  (Y, Z) -> X_ent

Confounding strength is parameterized by the conditional pair
(P(Y=0|Z=0), P(Y=0|Z=1)); the latent pair driver U realizes exactly that
joint over (Y, Z).  Template C merges the paper-style web of confounders
into a single latent driver for V: the observable joint is the same and no
spurious independence is introduced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .bayesnet import Cbn, Dag, joint
from .errors import ArgumentError
from .rng import spawn
from .tables import JointTable, Variable, marginalize

GRAPH_IDS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class GraphTemplate:
    """A network plus the bookkeeping the checkers and generators need."""

    graph_id: str
    net: Cbn
    latents: tuple[str, ...]
    y: str
    z: str
    core: tuple[str, ...]
    spurious: tuple[str, ...]
    entangled: tuple[str, ...]
    other_factor: tuple[str, ...]

    @property
    def observed_names(self) -> tuple[str, ...]:
        return tuple(n for n in self.net.names if n not in self.latents)

    def observed(self) -> JointTable:
        """Exact joint over the observed variables (latents summed out)."""
        return marginalize(joint(self.net), self.observed_names)

    def mutilated_skeleton(self) -> Dag:
        """The observed skeleton with the undesired Y–Z coupling removed.

        For these templates every undesired path runs through a latent
        confounder, so the observed skeleton simply keeps the channel edges.
        """
        parents: dict[str, tuple[str, ...]] = {n: () for n in self.observed_names}
        for child in self.observed_names:
            kept = tuple(
                p for p in self.net.parents[child] if p in self.observed_names
            )
            parents[child] = kept
        return Dag(self.observed_names, parents)


def _pair_joint(confounding: tuple[float, float], z_marginal: float) -> np.ndarray:
    """Joint P(Y=y, Z=z) implied by P(Y=0|Z=z) and P(Z=0)."""
    c0, c1 = confounding
    for p in (c0, c1, z_marginal):
        if not 0.0 < p < 1.0:
            raise ArgumentError(f"confounding/marginal parameters must lie in (0,1), got {p}")
    t = np.array(
        [
            [z_marginal * c0, (1 - z_marginal) * c1],
            [z_marginal * (1 - c0), (1 - z_marginal) * (1 - c1)],
        ]
    )
    return t  # t[y, z]


def _flip_cpt(flip: float, card: int = 2) -> np.ndarray:
    """Binary-input channel CPT: copy the parent state, flip with prob ``flip``."""
    if card == 2:
        return np.array([[1 - flip, flip], [flip, 1 - flip]])
    # wider channels put 1-flip on the matched state, spread the rest evenly
    cpt = np.full((2, card), flip / (card - 1))
    cpt[0, 0] = 1 - flip
    cpt[1, 1] = 1 - flip
    return cpt


def _pair_driver_cpts(t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CPTs for a 4-state latent U with P(U=2y+z)=t[y,z] and deterministic bits."""
    pu = t.reshape(-1)
    y_rows = np.zeros((4, 2))
    z_rows = np.zeros((4, 2))
    for u in range(4):
        y_rows[u, u >> 1] = 1.0
        z_rows[u, u & 1] = 1.0
    return pu, y_rows, z_rows


def template_a(
    confounding: tuple[float, float] = (0.95, 0.10),
    z_marginal: float = 0.5,
    core_flip: float = 0.1,
    aux_flip: float = 0.1,
) -> GraphTemplate:
    t = _pair_joint(confounding, z_marginal)
    pu, y_rows, z_rows = _pair_driver_cpts(t)
    net = Cbn(
        (Variable("U", 4), Variable("Y", 2), Variable("Z", 2), Variable("X_core", 2), Variable("X_aux", 2)),
        {"Y": ("U",), "Z": ("U",), "X_core": ("Y",), "X_aux": ("Z",)},
        {"U": pu, "Y": y_rows, "Z": z_rows, "X_core": _flip_cpt(core_flip), "X_aux": _flip_cpt(aux_flip)},
    )
    return GraphTemplate("A", net, ("U",), "Y", "Z", ("X_core",), ("X_aux",), (), ())


def template_b(
    x_effect: float = 0.6,
    confounder_effect: float = 0.3,
    z_flip: float = 0.1,
    aux_flip: float = 0.1,
) -> GraphTemplate:
    if not 0 < x_effect + confounder_effect < 1:
        raise ArgumentError("x_effect + confounder_effect must lie in (0,1)")
    y_rows = np.zeros((2, 2, 2))  # (x_core, u, y)
    for x in range(2):
        for u in range(2):
            p1 = 0.5 + x_effect * (x - 0.5) + confounder_effect * (u - 0.5)
            y_rows[x, u] = (1 - p1, p1)
    net = Cbn(
        (Variable("X_core", 2), Variable("U", 2), Variable("Y", 2), Variable("Z", 2), Variable("X_aux", 2)),
        {"Y": ("X_core", "U"), "Z": ("U",), "X_aux": ("Z",)},
        {
            "X_core": np.array([0.5, 0.5]),
            "U": np.array([0.5, 0.5]),
            "Y": y_rows,
            "Z": _flip_cpt(z_flip),
            "X_aux": _flip_cpt(aux_flip),
        },
    )
    return GraphTemplate("B", net, ("U",), "Y", "Z", ("X_core",), ("X_aux",), (), ())


def template_c(
    confounding: tuple[float, float] = (0.95, 0.10),
    z_marginal: float = 0.5,
    v_flip: tuple[float, float] = (0.2, 0.9),
    v_z_pull: float = 0.35,
    core_flip: float = 0.1,
    aux_flip: float = 0.1,
    v_channel_flip: float = 0.1,
) -> GraphTemplate:
    t = _pair_joint(confounding, z_marginal)
    pu, y_rows, z_rows = _pair_driver_cpts(t)
    pz0_given_y = t[:, 0] / t.sum(axis=1)
    v_rows = np.zeros((4, 2))
    for u in range(4):
        y, z = u >> 1, u & 1
        # mean of P(V=0 | Y=y, Z=·) under P(Z|Y=y) stays exactly v_flip[y]
        p_v0 = v_flip[y] + v_z_pull * ((1 if z == 0 else 0) - pz0_given_y[y])
        p_v0 = min(max(p_v0, 0.01), 0.99)
        v_rows[u] = (p_v0, 1 - p_v0)
    net = Cbn(
        (
            Variable("U", 4),
            Variable("Y", 2),
            Variable("Z", 2),
            Variable("V", 2),
            Variable("X_core", 2),
            Variable("X_aux", 2),
            Variable("X_v", 2),
        ),
        {"Y": ("U",), "Z": ("U",), "V": ("U",), "X_core": ("Y",), "X_aux": ("Z",), "X_v": ("V",)},
        {
            "U": pu,
            "Y": y_rows,
            "Z": z_rows,
            "V": v_rows,
            "X_core": _flip_cpt(core_flip),
            "X_aux": _flip_cpt(aux_flip),
            "X_v": _flip_cpt(v_channel_flip),
        },
    )
    return GraphTemplate(
        "C", net, ("U", "V"), "Y", "Z", ("X_core",), ("X_aux",), (), ("X_v",)
    )


def template_d(
    confounding: tuple[float, float] = (0.95, 0.10),
    z_marginal: float = 0.5,
    core_flip: float = 0.1,
    ent_p: float = 0.9,
    ent_q: float = 0.1,
) -> GraphTemplate:
    t = _pair_joint(confounding, z_marginal)
    pu, y_rows, z_rows = _pair_driver_cpts(t)
    ent_rows = np.zeros((2, 2, 2))  # (y, z, x_ent); channel keyed to OR(y, z)
    for y in range(2):
        for z in range(2):
            p1 = ent_p if (y or z) else ent_q
            ent_rows[y, z] = (1 - p1, p1)
    net = Cbn(
        (Variable("U", 4), Variable("Y", 2), Variable("Z", 2), Variable("X_core", 2), Variable("X_ent", 2)),
        {"Y": ("U",), "Z": ("U",), "X_core": ("Y",), "X_ent": ("Y", "Z")},
        {"U": pu, "Y": y_rows, "Z": z_rows, "X_core": _flip_cpt(core_flip), "X_ent": ent_rows},
    )
    return GraphTemplate("D", net, ("U",), "Y", "Z", ("X_core",), (), ("X_ent",), ())


def graph_template(graph_id: str, **params) -> GraphTemplate:
    builders = {"A": template_a, "B": template_b, "C": template_c, "D": template_d}
    if graph_id not in builders:
        raise ArgumentError(f"unknown graph id {graph_id!r}; expected one of {GRAPH_IDS}")
    return builders[graph_id](**params)


def _random_rows(gen: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    rows = gen.uniform(0.1, 0.9, size=shape)
    return rows / rows.sum(axis=-1, keepdims=True)


def random_instance(graph_id: str, seed: int) -> GraphTemplate:
    """A template-shaped network with random strictly positive parameters."""
    gen = spawn(seed, 41)
    if graph_id == "A":
        t = _random_rows(gen, (4,)).reshape(2, 2)
        tpl = template_a()
        cpts = dict(tpl.net.cpts)
        cpts["U"] = t.reshape(-1)
        cpts["X_core"] = _random_rows(gen, (2, 2))
        cpts["X_aux"] = _random_rows(gen, (2, 2))
        return GraphTemplate("A", Cbn(tpl.net.nodes, tpl.net.parents, cpts), ("U",), "Y", "Z", ("X_core",), ("X_aux",), (), ())
    if graph_id == "B":
        tpl = template_b()
        cpts = {
            "X_core": _random_rows(gen, (2,)),
            "U": _random_rows(gen, (2,)),
            "Y": _random_rows(gen, (2, 2, 2)),
            "Z": _random_rows(gen, (2, 2)),
            "X_aux": _random_rows(gen, (2, 2)),
        }
        return GraphTemplate("B", Cbn(tpl.net.nodes, tpl.net.parents, cpts), ("U",), "Y", "Z", ("X_core",), ("X_aux",), (), ())
    if graph_id == "C":
        tpl = template_c()
        cpts = dict(tpl.net.cpts)
        cpts["U"] = _random_rows(gen, (4,))
        cpts["V"] = _random_rows(gen, (4, 2))
        cpts["X_core"] = _random_rows(gen, (2, 2))
        cpts["X_aux"] = _random_rows(gen, (2, 2))
        cpts["X_v"] = _random_rows(gen, (2, 2))
        return GraphTemplate("C", Cbn(tpl.net.nodes, tpl.net.parents, cpts), ("U", "V"), "Y", "Z", ("X_core",), ("X_aux",), (), ("X_v",))
    if graph_id == "D":
        tpl = template_d()
        cpts = dict(tpl.net.cpts)
        cpts["U"] = _random_rows(gen, (4,))
        cpts["X_core"] = _random_rows(gen, (2, 2))
        cpts["X_ent"] = _random_rows(gen, (2, 2, 2))
        return GraphTemplate("D", Cbn(tpl.net.nodes, tpl.net.parents, cpts), ("U",), "Y", "Z", ("X_core",), (), ("X_ent",), ())
    raise ArgumentError(f"unknown graph id {graph_id!r}; expected one of {GRAPH_IDS}")


def causal_collider_net() -> Cbn:
    """Binary surrogate of the thresholded-Gaussian model X -> Y <- U -> Z.

    CPT entries discretize the continuous mechanisms
    X = 1{g > 0},  U = 1{g > 0.3},  Y = 1{X - U + 0.5 g > 0.5},
    Z = 1{U - 0.5 g > 0.1} with independent standard normal g's.
    """
    p_u1 = float(norm.sf(0.3))
    y_rows = np.zeros((2, 2, 2))  # (x, u, y)
    for x in range(2):
        for u in range(2):
            p1 = float(norm.sf(2.0 * (0.5 - x + u)))
            y_rows[x, u] = (1 - p1, p1)
    z_rows = np.zeros((2, 2))
    for u in range(2):
        p1 = float(norm.cdf(2.0 * (u - 0.1)))
        z_rows[u] = (1 - p1, p1)
    return Cbn(
        (Variable("X", 2), Variable("U", 2), Variable("Y", 2), Variable("Z", 2)),
        {"Y": ("X", "U"), "Z": ("U",)},
        {
            "X": np.array([0.5, 0.5]),
            "U": np.array([1 - p_u1, p_u1]),
            "Y": y_rows,
            "Z": z_rows,
        },
    )
