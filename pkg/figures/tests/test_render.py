from pathlib import Path

import pytest

from svagree_figures.cli import main
from svagree_figures.render import (
    ContractError,
    render_histogram,
    render_pca,
    render_predictions,
    render_strata_bar,
    render_strata_line,
    render_units,
)

DATA = Path(__file__).parent / "data"


def test_strata_line_attractors(tmp_path):
    out = tmp_path / "attractors.png"
    fig = render_strata_line(DATA / "report.csv", out, family="attractors")
    assert out.exists() and out.stat().st_size > 0
    assert len(fig.axes[0].lines) >= 1


def test_strata_line_distance(tmp_path):
    out = tmp_path / "distance.png"
    render_strata_line(DATA / "report.csv", out, family="distance")
    assert out.exists()


def test_strata_bar_rc_and_last(tmp_path):
    for family in ("rc", "last"):
        out = tmp_path / f"{family}.png"
        fig = render_strata_bar(DATA / "report.csv", out, family=family)
        assert out.exists()
        assert len(fig.axes[0].patches) >= 2


def test_histogram_uses_log_y_axis(tmp_path):
    out = tmp_path / "hist.png"
    fig = render_histogram(DATA / "attractor_histogram.csv", out)
    assert out.exists()
    assert fig.axes[0].get_yscale() == "log"


def test_pca_scatter(tmp_path):
    out = tmp_path / "pca.png"
    fig = render_pca(DATA / "pca.csv", out)
    assert out.exists()
    assert len(fig.axes[0].collections) == 2  # singular + plural


def test_units_grid_one_panel_per_unit(tmp_path):
    out = tmp_path / "units.png"
    fig = render_units(DATA / "condition_traces.csv", out)
    assert out.exists()
    panels = [ax for ax in fig.axes if ax.has_data()]
    assert len(panels) == 6  # unit_0..unit_5 in the golden CSV
    assert len(panels[0].lines) == 8  # one curve per condition


def test_predictions_pair(tmp_path):
    out = tmp_path / "predictions.png"
    fig = render_predictions(DATA / "long_modifier.csv", out)
    assert out.exists()
    assert len(fig.axes[0].lines) >= 2


def test_missing_column_fails_with_name(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("key,n,errors\noverall,1,0\n")
    with pytest.raises(ContractError, match="rate"):
        render_strata_line(bad, tmp_path / "x.png")


def test_missing_family_rows_fail(tmp_path):
    with pytest.raises(ContractError, match="nope"):
        render_strata_line(DATA / "report.csv", tmp_path / "x.png", family="nope")


def test_render_is_read_only_and_repeatable(tmp_path):
    source = DATA / "attractor_histogram.csv"
    before = source.read_bytes()
    first = tmp_path / "a.png"
    second = tmp_path / "b.png"
    render_histogram(source, first)
    render_histogram(source, second)
    assert source.read_bytes() == before
    assert first.read_bytes() == second.read_bytes()


def test_cli_all_kinds(tmp_path):
    jobs = [
        ("strata-line", DATA / "report.csv"),
        ("strata-bar", DATA / "report.csv"),
        ("histogram", DATA / "attractor_histogram.csv"),
        ("pca", DATA / "pca.csv"),
        ("units", DATA / "condition_traces.csv"),
        ("predictions", DATA / "long_modifier.csv"),
    ]
    for kind, source in jobs:
        out = tmp_path / f"{kind}.png"
        assert main([kind, str(source), str(out)]) == 0, kind
        assert out.exists()


def test_cli_reports_contract_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("foo,bar\n1,2\n")
    assert main(["histogram", str(bad), str(tmp_path / "x.png")]) == 1
    assert "attractors" in capsys.readouterr().err
