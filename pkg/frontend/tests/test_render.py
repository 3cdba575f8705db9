"""Rendering from fixture artifacts: all four kinds, determinism, errors."""

import pytest

from hgtplots import PlotSpec, SchemaError, render


def spec(fixture_dir, kind, inputs, output, **kw):
    return PlotSpec(
        kind=kind,
        inputs=[str(fixture_dir / name) for name in inputs],
        output=str(output),
        **kw,
    )


def test_heatmap_renders(fixture_dir, tmp_path):
    out = render(
        spec(
            fixture_dir,
            "heatmap",
            ["tau06_trajectory.csv"],
            tmp_path / "heat.png",
            trait_min=0.0,
            trait_max=4.0,
        )
    )
    assert out.exists() and out.stat().st_size > 10_000


def test_hist_renders(fixture_dir, tmp_path):
    out = render(
        spec(fixture_dir, "hist", ["tau06_trajectory.csv"], tmp_path / "hist.png")
    )
    assert out.exists() and out.stat().st_size > 5_000


def test_portrait_renders(fixture_dir, tmp_path):
    out = render(
        spec(fixture_dir, "portrait", ["fig2a_phase.json"], tmp_path / "portrait.png")
    )
    assert out.exists() and out.stat().st_size > 10_000


def test_invasion_bars_renders(fixture_dir, tmp_path):
    out = render(
        spec(fixture_dir, "invasion_bars", ["fig2b_invasion.json"], tmp_path / "bars.png")
    )
    assert out.exists() and out.stat().st_size > 5_000


def test_svg_output(fixture_dir, tmp_path):
    out = render(
        spec(fixture_dir, "portrait", ["fig2a_phase.json"], tmp_path / "portrait.svg")
    )
    assert out.exists()
    assert out.read_text().startswith("<?xml")


@pytest.mark.parametrize(
    "kind,inputs",
    [
        ("heatmap", ["tau06_trajectory.csv"]),
        ("hist", ["tau06_trajectory.csv"]),
        ("portrait", ["fig2a_phase.json"]),
        ("invasion_bars", ["fig2b_invasion.json"]),
    ],
)
def test_render_is_deterministic(fixture_dir, tmp_path, kind, inputs):
    kw = {"trait_min": 0.0, "trait_max": 4.0} if kind == "heatmap" else {}
    a = render(spec(fixture_dir, kind, inputs, tmp_path / "a.png", **kw))
    b = render(spec(fixture_dir, kind, inputs, tmp_path / "b.png", **kw))
    assert a.read_bytes() == b.read_bytes()


def test_schema_mismatch_reports_column_diff(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,species,count\n0.0,1.0,5\n")
    with pytest.raises(SchemaError) as err:
        render(PlotSpec(kind="heatmap", inputs=[str(bad)], output=str(tmp_path / "o.png")))
    message = str(err.value)
    assert "trait" in message and "species" in message


def test_empty_trajectory_clean_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("time,trait,count\n")
    with pytest.raises(SchemaError, match="no data rows"):
        render(PlotSpec(kind="heatmap", inputs=[str(empty)], output=str(tmp_path / "o.png")))
    truly_empty = tmp_path / "none.csv"
    truly_empty.write_text("")
    with pytest.raises(SchemaError, match="empty"):
        render(PlotSpec(kind="hist", inputs=[str(truly_empty)], output=str(tmp_path / "o.png")))


def test_missing_file_clean_error(tmp_path):
    with pytest.raises(SchemaError, match="not found"):
        render(
            PlotSpec(
                kind="portrait",
                inputs=[str(tmp_path / "nope.json")],
                output=str(tmp_path / "o.png"),
            )
        )


def test_wrong_json_kind_reports_expected_artifact(fixture_dir, tmp_path):
    with pytest.raises(SchemaError, match="invasion.json"):
        render(
            PlotSpec(
                kind="invasion_bars",
                inputs=[str(fixture_dir / "fig2a_phase.json")],
                output=str(tmp_path / "o.png"),
            )
        )


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown plot kind"):
        PlotSpec(kind="scatter", inputs=["x"], output=str(tmp_path / "o.png"))


def test_cli_round_trip(fixture_dir, tmp_path):
    from hgtplots.cli import main

    rc = main(
        [
            "invasion_bars",
            "--input", str(fixture_dir / "fig2b_invasion.json"),
            "--output", str(tmp_path / "bars.png"),
        ]
    )
    assert rc == 0
    assert (tmp_path / "bars.png").exists()


def test_cli_error_exit_code(tmp_path, capsys):
    from hgtplots.cli import main

    rc = main(
        [
            "heatmap",
            "--input", str(tmp_path / "missing.csv"),
            "--output", str(tmp_path / "x.png"),
        ]
    )
    assert rc == 2
    assert "error:" in capsys.readouterr().err
