"""Figure-contract acceptance: all six kinds render from golden CSVs, and
the attractor histogram uses a logarithmic y axis."""

from pathlib import Path

from svagree_figures.render import RENDERERS, render_histogram

DATA = Path(__file__).parent / "data"

GOLDEN_INPUTS = {
    "strata-line": DATA / "report.csv",
    "strata-bar": DATA / "report.csv",
    "histogram": DATA / "attractor_histogram.csv",
    "pca": DATA / "pca.csv",
    "units": DATA / "condition_traces.csv",
    "predictions": DATA / "long_modifier.csv",
}


def report_line(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {status} {name}" + (f": {detail}" if detail else ""))
    assert passed, f"{name}: {detail}"


def test_figure_contracts(tmp_path):
    assert set(GOLDEN_INPUTS) == set(RENDERERS)
    rendered = []
    for kind, source in GOLDEN_INPUTS.items():
        out = tmp_path / f"{kind}.png"
        RENDERERS[kind](source, out)
        rendered.append(out.exists() and out.stat().st_size > 0)
    log_axis = (
        render_histogram(DATA / "attractor_histogram.csv", tmp_path / "log.png")
        .axes[0]
        .get_yscale()
        == "log"
    )
    report_line(
        "figure-contracts",
        all(rendered) and log_axis,
        f"{len(rendered)} kinds rendered, histogram log-y={log_axis}",
    )
