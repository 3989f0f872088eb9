import json

import pytest

from noisyhk.sweep import (
    COLUMNS,
    NoTransitionError,
    PhaseDiagramTable,
    SweepSpec,
    detect_transition,
    grid,
    preset,
    run_sweep,
    transition_reference,
    write_sidecar,
)


def tiny(**kw):
    base = dict(R_values=[0.1, 0.3], sigma_values=[0.01, 0.2], T=2.0, N=20, record_stride=20)
    return SweepSpec(**{**base, **kw})


def fake_table(R, sigmas, qs):
    rows = [dict(R=R, sigma=s, replicate=0, seed=0, Q_mean=q, Q_std=0.0, n_clusters=1, phase_label="x",
                 failed=False, wall_ms=0) for s, q in zip(sigmas, qs)]
    return PhaseDiagramTable(rows)


class TestSpec:
    def test_defaults(self):
        s = SweepSpec([0.1], [0.1])
        assert (s.T, s.N, s.window_fraction, s.init) == (2000.0, 100, 0.25, "uniform-random")
        assert SweepSpec([0.1], [0.1], engine="pde").init.startswith("uniform-plus-noise")

    @pytest.mark.parametrize("bad", [dict(R_values=[]), dict(sigma_values=[0.2, 0.1]), dict(engine="ode"),
                                     dict(window_fraction=0), dict(replicates=0), dict(T=-1),
                                     dict(engine="pde", replicates=2)])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            tiny(**bad)

    def test_cell_seeds_depend_on_indices_only(self):
        a = tiny()
        b = tiny(T=5.0)
        assert a.cell_seed(1, 0, 0) == b.cell_seed(1, 0, 0)
        assert len({a.cell_seed(i, j, r) for i in range(3) for j in range(3) for r in range(2)}) == 18

    def test_grid(self):
        assert grid(0.005, 0.1, 10)[-1] == pytest.approx(0.1)
        assert grid(1, 2, 1) == [1.0]
        with pytest.raises(ValueError):
            grid(0, 1, 0)

    def test_presets(self):
        ci = preset("ci")
        assert len(ci.R_values) * len(ci.sigma_values) == 25 and ci.T == 200
        assert preset("pd").N == 300
        assert preset("transition", T=10.0).T == 10.0
        with pytest.raises(KeyError):
            preset("huge")


class TestRun:
    def test_rows_and_order(self):
        t = run_sweep(tiny(replicates=2))
        assert len(t) == 8
        assert [(r["R"], r["sigma"], r["replicate"]) for r in t.rows][:3] == [(0.1, 0.01, 0), (0.1, 0.01, 1),
                                                                              (0.1, 0.2, 0)]
        assert all(0 < r["Q_mean"] <= 1 for r in t.rows)

    def test_csv_byte_identical_and_parallel_invariant(self, tmp_path):
        spec = tiny()
        run_sweep(spec).to_csv(tmp_path / "a.csv")
        run_sweep(spec).to_csv(tmp_path / "b.csv")
        run_sweep(spec, jobs=2).to_csv(tmp_path / "c.csv")
        a = (tmp_path / "a.csv").read_bytes()
        assert a == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()
        assert a.decode().splitlines()[0] == ",".join(COLUMNS)

    def test_round_trip(self, tmp_path):
        t = run_sweep(tiny())
        t.to_csv(tmp_path / "t.csv")
        back = PhaseDiagramTable.from_csv(tmp_path / "t.csv")
        assert back.column("seed") == t.column("seed")
        assert back.column("Q_mean") == pytest.approx(t.column("Q_mean"), rel=1e-9)
        (tmp_path / "bad.csv").write_text("a,b\n")
        with pytest.raises(ValueError):
            PhaseDiagramTable.from_csv(tmp_path / "bad.csv")

    def test_failed_cell_is_recorded(self):
        # an oversized step makes the Euler update unstable
        t = run_sweep(SweepSpec([0.5], [0.0], T=40.0, h=20.0, N=5, init="gaussian(0.5, 0.2)"))
        assert t.rows[0]["failed"] and t.rows[0]["Q_mean"] != t.rows[0]["Q_mean"]

    def test_pde_engine(self):
        t = run_sweep(SweepSpec([0.2], [0.02, 0.3], engine="pde", T=1.0, m=16, pde_h=1e-2, record_every=0.1))
        assert len(t) == 2
        # uniform start: Q stays near the continuum reference 2R
        assert t.rows[1]["Q_mean"] == pytest.approx(0.4, abs=1e-3)

    def test_sidecar(self, tmp_path):
        write_sidecar(tiny(), tmp_path / "s.json")
        meta = json.loads((tmp_path / "s.json").read_text())
        assert meta["columns"] == COLUMNS and meta["spec"]["N"] == 20 and "version" in meta


class TestTransition:
    def test_interpolates_first_crossing(self):
        t = fake_table(0.05, [0.01, 0.02, 0.03, 0.04, 0.05], [1.0, 0.9, 0.5, 0.2, 0.2])
        ref = 0.2
        # midpoint 0.6 lies between 0.9 (sigma 0.02) and 0.5 (sigma 0.03)
        assert detect_transition(t, 0.05, ref) == pytest.approx(0.02 + 0.3 / 0.4 * 0.01)

    def test_no_crossing(self):
        t = fake_table(0.45, [0.01, 0.02, 0.03, 0.04, 0.05], [1.0] * 5)
        with pytest.raises(NoTransitionError, match="no transition in range"):
            detect_transition(t, 0.45, transition_reference(100, 0.45))

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            detect_transition(fake_table(0.1, [0.1, 0.2], [1, 0]), 0.1, 0.2)

    def test_references(self):
        assert transition_reference(100, 0.05) == pytest.approx(0.01 + 0.99 * 0.1)
        assert transition_reference(None, 0.3, engine="pde") == pytest.approx(0.6)


@pytest.mark.slow
def test_symmetry_breaks_in_disordered_unstable_cells():
    from noisyhk.core import disordered_reference
    from noisyhk.stability import DISORDERED_UNSTABLE, classify_phase_region

    table = run_sweep(preset("ci"))
    short = []
    for r in table.rows:
        if classify_phase_region(r["R"], r["sigma"]).label == DISORDERED_UNSTABLE:
            margin = r["Q_mean"] - disordered_reference(100, r["R"])
            if margin < 0.1:
                short.append((r["R"], r["sigma"], round(margin, 3)))
    assert not short, f"cells with Q_mean - reference < 0.1: {short}"
