"""Command-line driver: headless analysis, fixture generation, API server."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import ServiceConfig, load_config
from .engine import PROFILES, RuleBasedAnalyzer
from .errors import ClasspulseError
from .model import (
    default_classroom_layout, layout_to_json_dict, parse_layout, parse_session,
    validate_retention,
)
from .posture import histogram_from_labels, histogram_to_json_dict
from .runner import analysis_stage, vision_stage
from .synthetic import (
    SyntheticConfig, generate_synthetic_session, ground_truth_to_json_dict,
    script_from_json,
)
from . import report as report_mod
from .model import serialize_session


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


@click.group()
def main():
    """Classroom engagement analytics over extracted pose/gaze geometry."""


@main.command()
@click.argument("session_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--layout", "layout_file", type=click.Path(exists=True),
              default=None, help="Layout JSON; defaults to the built-in room.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              required=True, help="Output directory for artifacts.")
@click.option("--profile", type=click.Choice(sorted(PROFILES)),
              default="extended-131k", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render heatmap and posture figures next to the JSON/CSV.")
def analyze(session_file, layout_file, out_dir, profile, figures):
    """Run the full pipeline in-process with the rule-based analyzer."""
    try:
        session = parse_session(Path(session_file).read_bytes())
    except ClasspulseError as e:
        raise click.ClickException(f"session rejected: {e}")

    retention = validate_retention(session)
    if not retention.clean:
        raise click.ClickException(
            "retention violation: source frames "
            f"{list(retention.offending_indices)} not deleted"
        )

    if layout_file:
        layout = parse_layout(Path(layout_file).read_bytes())
    else:
        layout = default_classroom_layout()

    cfg = ServiceConfig(analyzer_profile=profile)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    vision = vision_stage(session, layout, cfg)
    result = analysis_stage(session, vision, RuleBasedAnalyzer(),
                            PROFILES[profile])

    chunk_docs = [c.to_json_dict() for c in result.chunks]
    _dump(out / "final_report.json", result.final.to_json_dict())
    _dump(out / "chunk_analyses.json", chunk_docs)
    _dump(out / "syntheses.json", [s.to_json_dict() for s in result.syntheses])
    _dump(out / "heatmap.json", vision.heatmap.to_json_dict())
    _dump(out / "dead_zones.json", vision.dead_zones)

    timeline = vision.timeline_json()
    labelled = [(s["t_ms"], s["posture"])
                for tr in timeline["tracks"] for s in tr["samples"]]
    bins = histogram_from_labels(labelled, 60.0)
    _dump(out / "posture_histogram.json", histogram_to_json_dict(bins, 60.0))
    report_mod.write_histogram_csv(bins, out / "posture_histogram.csv")
    report_mod.write_engagement_csv(chunk_docs, out / "engagement.csv")

    if figures:
        report_mod.render_heatmap_png(vision.heatmap, layout,
                                      out / "attention_heatmap.png")
        report_mod.render_posture_histogram_png(bins, 60.0,
                                                out / "posture_timeline.png")

    click.echo(
        f"analyzed {session.session_id}: {len(result.chunks)} chunks, "
        f"{len(result.syntheses)} syntheses, 1 final report -> {out}"
    )


@main.command()
@click.option("--out", "out_file", type=click.Path(dir_okay=False),
              required=True, help="Session JSON output path.")
@click.option("--students", default=3, show_default=True)
@click.option("--duration-s", default=300.0, show_default=True)
@click.option("--sample-hz", default=0.2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--jitter-px", default=2.0, show_default=True)
@click.option("--script", "script_file", type=click.Path(exists=True),
              default=None, help="Behavior script JSON (per-student intervals).")
@click.option("--session-id", default="synthetic", show_default=True)
def synth(out_file, students, duration_s, sample_hz, seed, jitter_px,
          script_file, session_id):
    """Generate a deterministic synthetic session plus ground-truth sidecar."""
    layout = default_classroom_layout()
    script = ()
    if script_file:
        script = script_from_json(
            json.loads(Path(script_file).read_text()), layout)
    cfg = SyntheticConfig(
        n_students=students, duration_s=duration_s, sample_hz=sample_hz,
        behavior_script=script, seed=seed, jitter_px=jitter_px, layout=layout,
        session_id=session_id,
    )
    session, truth = generate_synthetic_session(cfg)
    out = Path(out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(serialize_session(session))
    sidecar = out.with_name(out.stem + ".truth.json")
    _dump(sidecar, ground_truth_to_json_dict(truth))
    click.echo(f"wrote {out} ({len(session.frames)} frames) and {sidecar}")


@main.command("make-layout")
@click.option("--out", "out_file", type=click.Path(dir_okay=False),
              required=True)
def make_layout(out_file):
    """Write the built-in default layout JSON."""
    _dump(Path(out_file), layout_to_json_dict(default_classroom_layout()))
    click.echo(f"wrote {out_file}")


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True),
              default=None, help="Service config JSON.")
def serve(config_file):
    """Run the API server (uvicorn)."""
    import uvicorn

    from .api import create_app

    cfg = load_config(config_file)
    app = create_app(cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port)


if __name__ == "__main__":
    sys.exit(main())
