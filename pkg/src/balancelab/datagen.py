"""Tabular surrogate datasets for the four benchmark graphs.

Feature channels are Gaussian bumps keyed to discrete latents: a core channel
carries the label signal, an auxiliary channel carries the group factor
(or, for the entangled graph, the OR of label and group), and graph C adds a
channel for a second factor V.  Channel means are orthogonal one-hot blocks,
so the causal structure of the benchmark graphs is preserved while everything
stays learnable by a small linear or one-hidden-layer model.

Latent mechanisms per graph:

  A  (y, z) drawn from the confounded pair table; a truth bit t = y plus
     label noise keys the core channel; the aux channel is keyed to z.
  B  the core channel causes the label through a logistic link, with a
     hidden confounder feeding both the label and z.
  C  truth t and a hidden confounder u compete for the label (u wins a
     disagreement with probability ``confounder_strength``), z is a noisy
     copy of u, and V tracks the label with an extra pull toward z.  The
     collider at the label couples the core channel to z given the label,
     which is what makes regularizer interactions visible downstream.
  D  like A, but the aux channel is keyed to OR(y, z).

All generation is deterministic given the spec seed; test-set draws derive
independent sub-streams.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .bayesnet import Cbn, joint
from .errors import ArgumentError, SpecError
from .rng import spawn
from .tables import JointTable, Variable, condition, marginalize
from .templates import GRAPH_IDS

_STREAM_SOURCE = 0
_STREAM_IDEAL = 1
_STREAM_SHIFT = 2
_STREAM_POOL = 3


@dataclass(frozen=True)
class GenSpec:
    """Parameters of one synthetic data-generating process.

    ``confounding`` is (P(Y=0|Z=0), P(Y=0|Z=1)) and applies to graphs A and
    D; graph C derives its label-group coupling from ``confounder_strength``
    and ``z_flip``; graph B from ``core_gain``/``conf_gain``/``conf_mix``.
    Fields that only apply to one graph default to None and are filled with
    per-graph defaults by ``resolved()``.
    """

    graph: str
    n: int
    seed: int = 0
    confounding: tuple[float, float] = (0.95, 0.10)
    z_marginal: float = 0.5
    dim_core: int = 6
    dim_aux: int = 6
    sep_core: float = 2.0
    sep_aux: float = 2.0
    noise_core: float = 1.0
    noise_aux: float = 1.0
    label_noise: float = 0.02
    # graph C
    dim_v: int | None = None
    sep_v: float | None = None
    noise_v: float | None = None
    v_flip: tuple[float, float] | None = None
    v_z_pull: float | None = None
    confounder_strength: float | None = None
    z_flip: float | None = None
    # graph B
    core_gain: float | None = None
    conf_gain: float | None = None
    conf_mix: float | None = None

    _C_DEFAULTS = {
        "dim_v": 4,
        "sep_v": 2.0,
        "noise_v": 1.0,
        "v_flip": (0.2, 0.9),
        "v_z_pull": 0.3,
        "confounder_strength": 0.45,
        "z_flip": 0.1,
    }
    _B_DEFAULTS = {"core_gain": 2.0, "conf_gain": 1.2, "conf_mix": 0.8}

    def __post_init__(self) -> None:
        if self.graph not in GRAPH_IDS:
            raise SpecError(f"unknown graph {self.graph!r}; expected one of {GRAPH_IDS}")
        if self.n < 1:
            raise SpecError(f"n must be >= 1, got {self.n}")
        if self.dim_core < 1 or self.dim_aux < 1:
            raise SpecError("channel dimensions must be >= 1")
        for name in ("label_noise", "z_marginal"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SpecError(f"{name} must lie in [0, 1], got {v}")
        for name, lo, hi in (("confounding", 0.0, 1.0),):
            a, b = getattr(self, name)
            if not (lo < a < hi and lo < b < hi):
                raise SpecError(f"{name} entries must lie in ({lo}, {hi})")
        c_fields = set(self._C_DEFAULTS)
        b_fields = set(self._B_DEFAULTS)
        for name in sorted(c_fields | b_fields):
            value = getattr(self, name)
            if value is None:
                continue
            if name in c_fields and self.graph != "C":
                raise SpecError(f"{name} only applies to graph C, not {self.graph}")
            if name in b_fields and self.graph != "B":
                raise SpecError(f"{name} only applies to graph B, not {self.graph}")

    def resolved(self) -> "GenSpec":
        """Fill per-graph defaults for the fields that apply."""
        updates: dict[str, object] = {}
        if self.graph == "C":
            for name, default in self._C_DEFAULTS.items():
                if getattr(self, name) is None:
                    updates[name] = default
        if self.graph == "B":
            for name, default in self._B_DEFAULTS.items():
                if getattr(self, name) is None:
                    updates[name] = default
        return replace(self, **updates) if updates else self

    def to_dict(self) -> dict:
        out = asdict(self)
        out["confounding"] = list(self.confounding)
        if self.v_flip is not None:
            out["v_flip"] = list(self.v_flip)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GenSpec":
        data = dict(data)
        data["confounding"] = tuple(data["confounding"])
        if data.get("v_flip") is not None:
            data["v_flip"] = tuple(data["v_flip"])
        return cls(**data)


@dataclass(frozen=True)
class Dataset:
    """Weighted rows with binary label y, group z, optional second factor v,
    and a real feature matrix partitioned into named channels."""

    y: np.ndarray
    z: np.ndarray
    x: np.ndarray
    weights: np.ndarray
    channel_slices: dict[str, tuple[int, int]]
    v: np.ndarray | None = None
    spec: GenSpec | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=np.int64)
        z = np.asarray(self.z, dtype=np.int64)
        x = np.asarray(self.x, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        n = y.shape[0]
        if not (z.shape == (n,) and w.shape == (n,) and x.ndim == 2 and x.shape[0] == n):
            raise ArgumentError("column lengths disagree")
        if np.any(w < 0):
            raise ArgumentError("weights must be non-negative")
        v = None if self.v is None else np.asarray(self.v, dtype=np.int64)
        if v is not None and v.shape != (n,):
            raise ArgumentError("v column length disagrees")
        covered = sorted(self.channel_slices.values())
        edges = [0] + [stop for _, stop in covered]
        starts = [start for start, _ in covered]
        if starts != edges[:-1] or edges[-1] != x.shape[1]:
            raise ArgumentError(
                f"channel slices {self.channel_slices} do not partition {x.shape[1]} columns"
            )
        for arr in (y, z, x, w) + ((v,) if v is not None else ()):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "channel_slices", dict(self.channel_slices))

    def __len__(self) -> int:
        return self.y.shape[0]

    def channel(self, name: str) -> np.ndarray:
        start, stop = self.channel_slices[name]
        return self.x[:, start:stop]

    def take(self, idx: np.ndarray, weights: np.ndarray | None = None) -> "Dataset":
        return Dataset(
            self.y[idx],
            self.z[idx],
            self.x[idx],
            self.weights[idx] if weights is None else weights,
            self.channel_slices,
            None if self.v is None else self.v[idx],
            self.spec,
        )

    def with_weights(self, weights: np.ndarray) -> "Dataset":
        return Dataset(self.y, self.z, self.x, weights, self.channel_slices, self.v, self.spec)


def _block_means(dim: int, sep: float) -> np.ndarray:
    """Two orthogonal one-hot-block mean vectors with ||m1 - m0|| = sep*sqrt(2)."""
    b0 = max(dim // 2, 1)
    b1 = max(dim - b0, 1) if dim > 1 else 1
    means = np.zeros((2, dim))
    means[0, :b0] = sep / np.sqrt(b0)
    if dim > 1:
        means[1, b0:] = sep / np.sqrt(b1)
    else:
        means[1, 0] = -sep
    return means


def _gaussian_channel(states: np.ndarray, dim: int, sep: float, noise: float, gen) -> np.ndarray:
    means = _block_means(dim, sep)
    return means[states] + gen.normal(0.0, noise, size=(states.shape[0], dim))


def _pair_table(spec: GenSpec) -> np.ndarray:
    c0, c1 = spec.confounding
    return np.array(
        [
            [spec.z_marginal * c0, (1 - spec.z_marginal) * c1],
            [spec.z_marginal * (1 - c0), (1 - spec.z_marginal) * (1 - c1)],
        ]
    )  # t[y, z]


def _draw_pair(gen, n: int, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = t.reshape(-1)
    idx = np.searchsorted(np.cumsum(flat) / flat.sum(), gen.random(n), side="right")
    return idx >> 1, idx & 1


def _draw_conditional(gen, given: np.ndarray, p_one_given: np.ndarray) -> np.ndarray:
    """Binary draw with P(out=1 | given=g) = p_one_given[g]."""
    return (gen.random(given.shape[0]) < p_one_given[given]).astype(np.int64)


def latent_net_c(spec: GenSpec) -> Cbn:
    """Exact discrete model of graph C's latents: truth T, confounder U,
    label Y (mechanism plus label noise folded in), group Z."""
    spec = spec.resolved()
    m = spec.confounder_strength
    ln = spec.label_noise
    y_rows = np.zeros((2, 2, 2))  # (t, u, y)
    for t in range(2):
        for u in range(2):
            p1 = float(t) if t == u else (1 - m) * t + m * u
            p1 = (1 - ln) * p1 + ln * (1 - p1)
            y_rows[t, u] = (1 - p1, p1)
    # z copies u with probability 1 - z_flip
    z_rows = np.array([[1 - spec.z_flip, spec.z_flip], [spec.z_flip, 1 - spec.z_flip]])
    return Cbn(
        (Variable("T", 2), Variable("U", 2), Variable("Y", 2), Variable("Z", 2)),
        {"Y": ("T", "U"), "Z": ("U",)},
        {
            "T": np.array([0.5, 0.5]),
            "U": np.array([0.5, 0.5]),
            "Y": y_rows,
            "Z": z_rows,
        },
    )


def _c_posteriors(spec: GenSpec) -> tuple[JointTable, np.ndarray, np.ndarray]:
    """Joint over (T, U, Y, Z) plus P(T=1 | y, z) and P(Z=0 | y) tables."""
    table = joint(latent_net_c(spec))
    t_given_yz = np.zeros((2, 2))
    for y in range(2):
        for z in range(2):
            t_given_yz[y, z] = marginalize(condition(table, {"Y": y, "Z": z}), {"T"}).probs[1]
    z0_given_y = np.zeros(2)
    for y in range(2):
        z0_given_y[y] = marginalize(condition(table, {"Y": y}), {"Z"}).probs[0]
    return table, t_given_yz, z0_given_y


def _v_conditional(spec: GenSpec, z0_given_y: np.ndarray) -> np.ndarray:
    """P(V=0 | y, z) with mean v_flip[y] over z and a pull of size v_z_pull."""
    out = np.zeros((2, 2))
    for y in range(2):
        for z in range(2):
            p = spec.v_flip[y] + spec.v_z_pull * ((1.0 if z == 0 else 0.0) - z0_given_y[y])
            out[y, z] = min(max(p, 0.01), 0.99)
    return out


def _channel_layout(spec: GenSpec) -> dict[str, tuple[int, int]]:
    slices = {"core": (0, spec.dim_core)}
    second = "ent" if spec.graph == "D" else "aux"
    slices[second] = (spec.dim_core, spec.dim_core + spec.dim_aux)
    if spec.graph == "C":
        start = spec.dim_core + spec.dim_aux
        slices["v"] = (start, start + spec.dim_v)
    return slices


def _assemble(
    spec: GenSpec,
    gen,
    y: np.ndarray,
    z: np.ndarray,
    core_key: np.ndarray,
    second_key: np.ndarray | None,
    v: np.ndarray | None,
    x_core: np.ndarray | None = None,
) -> Dataset:
    parts = []
    if x_core is None:
        parts.append(_gaussian_channel(core_key, spec.dim_core, spec.sep_core, spec.noise_core, gen))
    else:
        parts.append(x_core)
    if second_key is None:  # disentangled: pure noise in the second channel
        parts.append(gen.normal(0.0, spec.noise_aux, size=(y.shape[0], spec.dim_aux)))
    else:
        parts.append(_gaussian_channel(second_key, spec.dim_aux, spec.sep_aux, spec.noise_aux, gen))
    if spec.graph == "C":
        parts.append(_gaussian_channel(v, spec.dim_v, spec.sep_v, spec.noise_v, gen))
    x = np.concatenate(parts, axis=1)
    return Dataset(y, z, x, np.ones(y.shape[0]), _channel_layout(spec), v, spec)


def _generate_acd(spec: GenSpec, n: int, gen, mode: str, shift_row: np.ndarray | None) -> Dataset:
    """Graphs A, C, D under the source law, the ideal law, or a shifted
    group-given-label conditional (mode in {source, ideal, shift})."""
    if spec.graph == "C":
        table, t_given_yz, z0_given_y = _c_posteriors(spec)
        p_y1 = float(marginalize(table, {"Y"}).probs[1])
        if mode == "source":
            flat = marginalize(table, {"Y", "Z"})
            arr = np.transpose(flat.probs, flat.axes(("Y", "Z")))
            y, z = _draw_pair(gen, n, arr)
        else:
            y = (gen.random(n) < p_y1).astype(np.int64)
            if mode == "ideal":
                z = (gen.random(n) < 0.5).astype(np.int64)
            else:
                z = _draw_conditional(gen, y, 1.0 - shift_row)
        if mode == "ideal":
            # undesired paths cut: truth differs from the label at the source rate
            mismatch = float(
                sum(
                    marginalize(condition(table, {"Y": yv}), {"T"}).probs[1 - yv]
                    * marginalize(table, {"Y"}).probs[yv]
                    for yv in range(2)
                )
            )
            t = np.where(gen.random(n) < mismatch, 1 - y, y)
            p_v0 = 0.5 + spec.v_z_pull * (np.where(z == 0, 1.0, 0.0) - 0.5)
            v = (gen.random(n) >= p_v0).astype(np.int64)
        else:
            t = (gen.random(n) < t_given_yz[y, z]).astype(np.int64)
            v_cond = _v_conditional(spec, z0_given_y)
            v = (gen.random(n) >= v_cond[y, z]).astype(np.int64)
        return _assemble(spec, gen, y, z, t, z, v)

    # graphs A and D share the pair-table latents
    pair = _pair_table(spec)
    p_y1 = float(pair[1].sum())
    if mode == "source":
        y, z = _draw_pair(gen, n, pair)
    else:
        y = (gen.random(n) < p_y1).astype(np.int64)
        if mode == "ideal":
            z = (gen.random(n) < 0.5).astype(np.int64)
        else:
            z = _draw_conditional(gen, y, 1.0 - shift_row)
    t = np.where(gen.random(n) < spec.label_noise, 1 - y, y)
    if spec.graph == "D":
        second = None if mode == "ideal" else np.maximum(y, z)
        return _assemble(spec, gen, y, z, t, second, None)
    return _assemble(spec, gen, y, z, t, z, None)


def _generate_b(spec: GenSpec, n: int, gen, mode: str) -> Dataset:
    """Graph B: the core channel causes the label; a hidden confounder links
    the label and z unless the ideal law cuts it."""
    x_core = gen.normal(0.0, spec.noise_core, size=(n, spec.dim_core))
    s = x_core[:, 0] / spec.noise_core
    u = (gen.random(n) < 0.5).astype(np.int64)
    logits = spec.core_gain * s
    if mode != "ideal":
        logits = logits + spec.conf_gain * (2 * u - 1)
    y = (gen.random(n) < 1.0 / (1.0 + np.exp(-logits))).astype(np.int64)
    if mode == "ideal":
        z = (gen.random(n) < 0.5).astype(np.int64)
    else:
        keep = gen.random(n) < spec.conf_mix
        z = np.where(keep, u, (gen.random(n) < 0.5).astype(np.int64))
    return _assemble(spec, gen, y, z, y, z, None, x_core=x_core)


def generate(spec: GenSpec) -> Dataset:
    """Draw the training distribution of the spec's graph."""
    spec = spec.resolved()
    gen = spawn(spec.seed, _STREAM_SOURCE)
    if spec.graph == "B":
        return _generate_b(spec, spec.n, gen, "source")
    return _generate_acd(spec, spec.n, gen, "source", None)


def ideal_testset(spec: GenSpec, n: int, seed: int) -> Dataset:
    """The law with the undesired dependencies absent: the group factor is a
    fair coin independent of the label, graph C additionally decouples V from
    the label, and graph D replaces the entangled channel with pure noise."""
    spec = spec.resolved()
    gen = spawn(seed, _STREAM_IDEAL)
    if spec.graph == "B":
        return _generate_b(spec, n, gen, "ideal")
    return _generate_acd(spec, n, gen, "ideal", None)


def shift_testsets(
    spec: GenSpec, grid: Sequence[np.ndarray], n: int, seed: int
) -> list[Dataset]:
    """One dataset per grid point, varying only the group-given-label
    conditional; the label marginal and the channel mechanisms stay fixed.

    Grid entries follow the exact-table convention: a (2, 2) row-stochastic
    array whose [y, 0] entry is P'(Z=0 | Y=y).
    """
    spec = spec.resolved()
    if not grid:
        raise ArgumentError("grid must be non-empty")
    rows = []
    for g in grid:
        g = np.asarray(g, dtype=float)
        if g.shape != (2, 2) or np.any(np.abs(g.sum(axis=1) - 1.0) > 1e-12):
            raise ArgumentError("grid entries must be (2, 2) row-stochastic arrays")
        rows.append(g[:, 0])
    out = []
    if spec.graph == "B":
        pool_n = min(max(25 * n, 20_000), 200_000)
        pool = _generate_b(spec, pool_n, spawn(seed, _STREAM_POOL), "source")
        cell = np.zeros((2, 2))
        np.add.at(cell, (pool.y, pool.z), 1.0)
        pz0_given_y = cell[:, 0] / cell.sum(axis=1)
        for k, row in enumerate(rows):
            gen = spawn(seed, _STREAM_SHIFT, k)
            target = np.where(pool.z == 0, row[pool.y], 1.0 - row[pool.y])
            source = np.where(pool.z == 0, pz0_given_y[pool.y], 1.0 - pz0_given_y[pool.y])
            w = target / source
            idx = gen.choice(pool_n, size=n, replace=True, p=w / w.sum())
            out.append(pool.take(idx, weights=np.ones(n)))
        return out
    for k, row in enumerate(rows):
        gen = spawn(seed, _STREAM_SHIFT, k)
        out.append(_generate_acd(spec, n, gen, "shift", row))
    return out


def implied_y_given_z(spec: GenSpec) -> np.ndarray:
    """Exact P(Y=y | Z=z) of the source law, as a (2, 2) array [y, z].

    Graphs A/D read it off the pair table; graph C computes it from the
    latent network.  Graph B has no closed form here and is estimated by the
    callers that need it.
    """
    spec = spec.resolved()
    if spec.graph == "B":
        raise ArgumentError("graph B's label-group conditional has no closed form here")
    if spec.graph == "C":
        table, _, _ = _c_posteriors(spec)
        flat = marginalize(table, {"Y", "Z"})
        arr = np.transpose(flat.probs, flat.axes(("Y", "Z")))
    else:
        arr = _pair_table(spec)
    return arr / arr.sum(axis=0, keepdims=True)


# -- Serialization -------------------------------------------------------------
# Delimited text with a header row; floats use repr() so numeric columns
# round-trip exactly.  A JSON sidecar carries the GenSpec and channel slices.

def _meta_path(path: str) -> str:
    return path + ".meta.json"


def save_dataset(dataset: Dataset, path: str) -> None:
    dim = dataset.x.shape[1]
    cols = ["y", "z"] + (["v"] if dataset.v is not None else []) + ["weight"]
    cols += [f"x{i}" for i in range(dim)]
    lines = [",".join(cols)]
    for i in range(len(dataset)):
        row = [str(int(dataset.y[i])), str(int(dataset.z[i]))]
        if dataset.v is not None:
            row.append(str(int(dataset.v[i])))
        row.append(repr(float(dataset.weights[i])))
        row.extend(repr(float(val)) for val in dataset.x[i])
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    meta = {
        "columns": cols,
        "channel_slices": {k: list(vs) for k, vs in dataset.channel_slices.items()},
        "genspec": None if dataset.spec is None else dataset.spec.to_dict(),
    }
    with open(_meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path: str) -> Dataset:
    with open(_meta_path(path), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != meta["columns"]:
            raise ArgumentError(f"header {header} does not match metadata columns")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    has_v = "v" in header
    arr = np.array(rows, dtype=object)
    y = arr[:, 0].astype(np.int64)
    z = arr[:, 1].astype(np.int64)
    off = 3 if has_v else 2
    v = arr[:, 2].astype(np.int64) if has_v else None
    weights = arr[:, off].astype(float)
    x = arr[:, off + 1 :].astype(float)
    spec = None if meta["genspec"] is None else GenSpec.from_dict(meta["genspec"])
    slices = {k: tuple(vs) for k, vs in meta["channel_slices"].items()}
    return Dataset(y, z, x, weights, slices, v, spec)
