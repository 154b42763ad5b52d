"""Synthetic dataset generation: distributions, channels, shifts, round trips."""

from __future__ import annotations

import numpy as np
import pytest

from balancelab.checks import correlation_grid
from balancelab.datagen import (
    Dataset,
    GenSpec,
    generate,
    ideal_testset,
    implied_y_given_z,
    load_dataset,
    save_dataset,
    shift_testsets,
)
from balancelab.errors import SpecError


def three_se(p: float, n: int) -> float:
    return 3.0 * np.sqrt(max(p * (1 - p), 1e-6) / n)


class TestGenSpec:
    def test_unknown_graph(self):
        with pytest.raises(SpecError):
            GenSpec(graph="E", n=10)

    def test_graph_c_knob_rejected_elsewhere(self):
        with pytest.raises(SpecError, match="graph C"):
            GenSpec(graph="A", n=10, dim_v=4)
        with pytest.raises(SpecError, match="graph B"):
            GenSpec(graph="A", n=10, conf_mix=0.5)

    def test_resolution_fills_graph_defaults(self):
        spec = GenSpec(graph="C", n=10).resolved()
        assert spec.dim_v == 4 and spec.v_flip == (0.2, 0.9)
        spec_b = GenSpec(graph="B", n=10).resolved()
        assert spec_b.conf_mix == 0.8

    def test_dict_round_trip(self):
        spec = GenSpec(graph="C", n=100, seed=4).resolved()
        assert GenSpec.from_dict(spec.to_dict()) == spec


class TestGenerate:
    def test_graph_a_confounding_rate(self):
        spec = GenSpec(graph="A", n=30_000, seed=1, confounding=(0.95, 0.10))
        ds = generate(spec)
        rate = np.mean(ds.y[ds.z == 0] == 0)
        assert abs(rate - 0.95) < three_se(0.95, int((ds.z == 0).sum()))

    def test_graph_c_conditionals_match_implied(self):
        spec = GenSpec(graph="C", n=40_000, seed=2)
        ds = generate(spec)
        implied = implied_y_given_z(spec)
        for z_value in (0, 1):
            emp = np.mean(ds.y[ds.z == z_value] == 0)
            n = int((ds.z == z_value).sum())
            assert abs(emp - implied[0, z_value]) < three_se(implied[0, z_value], n)

    def test_graph_c_v_tracking(self):
        spec = GenSpec(graph="C", n=40_000, seed=3)
        ds = generate(spec)
        v0_y1 = np.mean(ds.v[ds.y == 1] == 0)
        v0_y0 = np.mean(ds.v[ds.y == 0] == 0)
        assert v0_y0 < 0.35 and v0_y1 > 0.7  # strong label tracking

    def test_noiseless_channels_decode_label(self):
        spec = GenSpec(
            graph="A", n=500, seed=4, label_noise=0.0, noise_core=1e-9, noise_aux=1e-9
        )
        ds = generate(spec)
        core = ds.channel("core")
        decoded = core[:, spec.dim_core // 2 :].sum(axis=1) > core[:, : spec.dim_core // 2].sum(axis=1)
        assert np.array_equal(decoded.astype(int), ds.y)

    def test_core_means_free_of_group_for_label_keyed_graphs(self):
        # the core channel is keyed to a label-only truth bit for A and D
        for gid in ("A", "D"):
            spec = GenSpec(graph=gid, n=40_000, seed=5)
            ds = generate(spec)
            core = ds.channel("core")
            for y_value in (0, 1):
                rows = ds.y == y_value
                m0 = core[rows & (ds.z == 0)].mean(axis=0)
                m1 = core[rows & (ds.z == 1)].mean(axis=0)
                n_min = min(int((rows & (ds.z == 0)).sum()), int((rows & (ds.z == 1)).sum()))
                assert np.abs(m0 - m1).max() < 3.0 * 2.0 / np.sqrt(n_min), (gid, y_value)

    def test_entangled_channel_depends_on_group_within_label(self):
        spec = GenSpec(graph="D", n=40_000, seed=6)
        ds = generate(spec)
        ent = ds.channel("ent")
        rows = ds.y == 0  # OR(0, z) = z, so the channel must split by z
        m0 = ent[rows & (ds.z == 0)].mean(axis=0)
        m1 = ent[rows & (ds.z == 1)].mean(axis=0)
        assert np.abs(m0 - m1).max() > 0.5

    def test_deterministic_given_seed(self):
        spec = GenSpec(graph="C", n=300, seed=7)
        a, b = generate(spec), generate(spec)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.v, b.v)


class TestIdeal:
    def test_group_decorrelated(self):
        for gid in "ABCD":
            spec = GenSpec(graph=gid, n=1000, seed=8)
            ideal = ideal_testset(spec, 2000, seed=9)
            corr = np.corrcoef(ideal.y, ideal.z)[0, 1]
            assert abs(corr) < 0.08, gid

    def test_graph_c_v_decoupled_from_label(self):
        spec = GenSpec(graph="C", n=1000, seed=10)
        ideal = ideal_testset(spec, 20_000, seed=11)
        v0_y0 = np.mean(ideal.v[ideal.y == 0] == 0)
        v0_y1 = np.mean(ideal.v[ideal.y == 1] == 0)
        assert abs(v0_y0 - v0_y1) < 0.04
        # the group pull on V survives in the ideal law
        v0_z0 = np.mean(ideal.v[ideal.z == 0] == 0)
        v0_z1 = np.mean(ideal.v[ideal.z == 1] == 0)
        assert v0_z0 - v0_z1 > 0.15

    def test_graph_d_second_channel_is_noise(self):
        spec = GenSpec(graph="D", n=1000, seed=12)
        ideal = ideal_testset(spec, 20_000, seed=13)
        ent = ideal.channel("ent")
        for cond in (ideal.y == 1, ideal.z == 1):
            assert np.abs(ent[cond].mean(axis=0) - ent[~cond].mean(axis=0)).max() < 0.08

    def test_seed_determinism(self):
        spec = GenSpec(graph="A", n=100, seed=14)
        a = ideal_testset(spec, 500, seed=3)
        b = ideal_testset(spec, 500, seed=3)
        assert np.array_equal(a.x, b.x)


class TestShifts:
    @pytest.mark.parametrize("gid", ["A", "B", "C", "D"])
    def test_conditionals_track_grid(self, gid):
        spec = GenSpec(graph=gid, n=1000, seed=15)
        grid = correlation_grid(3)
        sets = shift_testsets(spec, grid, 20_000, seed=16)
        for g, ds in zip(grid, sets):
            for y_value in (0, 1):
                rows = ds.y == y_value
                if int(rows.sum()) < 100:
                    continue
                emp = np.mean(ds.z[rows] == 0)
                target = g[y_value, 0]
                assert abs(emp - target) < max(three_se(target, int(rows.sum())), 0.02), (gid, y_value)

    def test_label_marginal_constant(self):
        spec = GenSpec(graph="A", n=1000, seed=17)
        sets = shift_testsets(spec, correlation_grid(5), 20_000, seed=18)
        p = [ds.y.mean() for ds in sets]
        assert max(p) - min(p) < 0.025

    def test_matching_conditional_reproduces_source(self):
        spec = GenSpec(graph="A", n=50_000, seed=19, confounding=(0.8, 0.2))
        src = generate(spec)
        row = np.array([[0.8, 0.2], [0.2, 0.8]])
        shifted = shift_testsets(spec, [row], 50_000, seed=20)[0]
        # distributionally identical: compare pair-cell frequencies
        src_cells = np.bincount(src.y * 2 + src.z, minlength=4) / len(src)
        new_cells = np.bincount(shifted.y * 2 + shifted.z, minlength=4) / len(shifted)
        assert np.abs(src_cells - new_cells).max() < 0.01


class TestSerialization:
    def test_round_trip_bitwise(self, tmp_path):
        ds = generate(GenSpec(graph="C", n=40, seed=21))
        path = str(tmp_path / "data.csv")
        save_dataset(ds, path)
        back = load_dataset(path)
        assert np.array_equal(back.x, ds.x)
        assert np.array_equal(back.y, ds.y)
        assert np.array_equal(back.v, ds.v)
        assert back.channel_slices == ds.channel_slices
        assert back.spec == ds.spec

    def test_rewrite_is_byte_identical(self, tmp_path):
        ds = generate(GenSpec(graph="A", n=30, seed=22))
        p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        save_dataset(ds, p1)
        save_dataset(generate(GenSpec(graph="A", n=30, seed=22)), p2)
        assert open(p1).read() == open(p2).read()
