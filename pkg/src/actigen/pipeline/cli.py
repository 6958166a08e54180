"""Command-line entry point: every pipeline stage as a subcommand.

Exit codes: 0 on success, 1 on validation errors (bad config, malformed
input, missing artifacts), 2 on runtime failures (diverged training,
I/O errors).
"""
from __future__ import annotations

import logging

import click

from ..errors import ActigenError
from .config import config_hash, load_config
from .stages import run_pipeline, run_stage


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML pipeline config; built-in defaults when omitted.")
@click.option("--seed", type=int, default=None,
              help="Global seed; overrides the config file.")
@click.option("--out", type=click.Path(), default=None,
              help="Output directory root; overrides the config file.")
@click.option("--strict", is_flag=True,
              help="Refuse artifacts from other config hashes instead of warning.")
@click.option("--quiet", "-q", is_flag=True, help="Only warnings and errors.")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging and tracebacks.")
@click.pass_context
def main(ctx, config_path, seed, out, strict, quiet, verbose):
    """Synthesize, train on, generate, place, and evaluate daily activity
    chains.  Stages communicate through on-disk artifacts keyed by the
    config hash, so any stage can be rerun in isolation."""
    level = logging.WARNING if quiet else (logging.DEBUG if verbose else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {
        "config_path": config_path,
        "seed": seed,
        "out": out,
        "strict": strict,
        "quiet": quiet,
        "verbose": verbose,
    }


def _execute(ctx: click.Context, stage: str) -> None:
    o = ctx.obj
    try:
        config = load_config(o["config_path"], seed=o["seed"], out=o["out"])
        if stage == "pipeline":
            results = run_pipeline(config, strict=o["strict"])
        else:
            results = [run_stage(stage, config, strict=o["strict"])]
    except ActigenError as e:
        click.echo(f"error: {e}", err=True)
        raise SystemExit(1 if isinstance(e, ValueError) else 2) from e
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        raise SystemExit(1) from e
    except Exception as e:
        if o["verbose"]:
            raise
        click.echo(f"runtime error: {e}", err=True)
        raise SystemExit(2) from e
    for r in results:
        click.echo(f"[{r.stage}] {r.artifact_dir} ({r.wall_time_s:.1f}s)")
        if not o["quiet"] and r.info:
            for k, v in r.info.items():
                click.echo(f"    {k} = {v}")
    if stage == "pipeline":
        click.echo(f"pipeline complete; config hash {config_hash(config)}")


@main.command()
@click.pass_context
def synth(ctx):
    """Draw a synthetic survey population into diaries.csv (plus
    diaries_b.csv for the fine-tuning grammar when enabled)."""
    _execute(ctx, "synth")


@main.command()
@click.pass_context
def ingest(ctx):
    """Parse diaries.csv and split it into train/val/test JSONL files."""
    _execute(ctx, "ingest")


@main.command()
@click.pass_context
def balance(ctx):
    """Rake training weights toward relaxed feature targets and resample."""
    _execute(ctx, "balance")


@main.command()
@click.pass_context
def train(ctx):
    """Train the chain generator and checkpoint the best epoch."""
    _execute(ctx, "train")


@main.command()
@click.pass_context
def finetune(ctx):
    """Fine-tune the pretrained checkpoint on the second grammar."""
    _execute(ctx, "finetune")


@main.command()
@click.pass_context
def generate(ctx):
    """Generate chains for the held-out test profiles."""
    _execute(ctx, "generate")


@main.command()
@click.pass_context
def assign(ctx):
    """Assign zone-level locations to the generated chains and build OD
    matrices against the city's reference process."""
    _execute(ctx, "assign")


@main.command()
@click.pass_context
def evaluate(ctx):
    """Score generated chains against the held-out truth (plus OD metrics
    when assignment artifacts exist)."""
    _execute(ctx, "evaluate")


@main.command()
@click.pass_context
def pipeline(ctx):
    """Run every enabled stage in dependency order."""
    _execute(ctx, "pipeline")


if __name__ == "__main__":
    main()
