import pytest

from noisyhk.core import ModelParams
from noisyhk.plotting import SchemaError, render_svg
from noisyhk.sde import simulate, write_trajectory_csv
from noisyhk.sweep import SweepSpec, run_sweep


@pytest.fixture(scope="module")
def phase_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("pd") / "pd.csv"
    run_sweep(SweepSpec([0.1, 0.2], [0.01, 0.05, 0.1], T=1.0, N=10)).to_csv(p)
    return p


def test_heatmap_is_deterministic(phase_csv, tmp_path):
    a = render_svg(phase_csv, "heatmap", tmp_path / "a.svg", config_hash="abc")
    b = render_svg(phase_csv, "heatmap", tmp_path / "b.svg", config_hash="abc")
    assert a == b
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert "<!-- noisyhk heatmap; config-hash abc -->" in a
    assert "<dc:date>" not in a
    assert ">R<" in a and ">sigma<" in a


def test_default_hash_follows_input(phase_csv, tmp_path):
    svg = render_svg(phase_csv, "heatmap", tmp_path / "x.svg")
    other = tmp_path / "other.csv"
    other.write_text(phase_csv.read_text().replace("0.01", "0.02", 1))
    assert svg.splitlines()[1] != render_svg(other, "heatmap", tmp_path / "y.svg").splitlines()[1]


def test_trajectory(tmp_path):
    traj = simulate(ModelParams(N=8), 2.0, record_stride=20)
    write_trajectory_csv(traj, tmp_path / "t.csv")
    lin = render_svg(tmp_path / "t.csv", "trajectory", tmp_path / "lin.svg")
    log = render_svg(tmp_path / "t.csv", "trajectory", tmp_path / "log.svg", log_time=True)
    assert lin != log


def test_lines(tmp_path):
    (tmp_path / "l.csv").write_text("s,a,b\n0,0,1\n1,1,0\n2,4,-1\n")
    svg = render_svg(tmp_path / "l.csv", "lines", tmp_path / "l.svg", title="demo")
    assert ">demo<" in svg


@pytest.mark.parametrize("kind,text", [
    ("heatmap", "s,f\n0,1\n"),
    ("trajectory", "time,x0\n0,1\n"),
    ("lines", "name\nfoo\n"),
    ("lines", "s,f\n"),
    ("bars", "s,f\n0,1\n"),
])
def test_schema_errors(tmp_path, kind, text):
    (tmp_path / "in.csv").write_text(text)
    with pytest.raises(SchemaError):
        render_svg(tmp_path / "in.csv", kind, tmp_path / "out.svg")
    assert not (tmp_path / "out.svg").exists()
