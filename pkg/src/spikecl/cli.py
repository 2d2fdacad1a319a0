"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""

import functools
import json
import logging
import sys

import click

from . import backend
from .config import dump_yaml, load_config
from .errors import ConfigError, DataError, SpikeclError


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(2)
        except DataError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(3)
        except (SpikeclError, RuntimeError, ValueError, OSError) as exc:
            click.echo(f"runtime error: {exc}", err=True)
            sys.exit(4)
    return wrapper


def _common_config(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="YAML config file; defaults apply without one.")(fn)
    fn = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                      help="Override a config entry, e.g. --set learning.m_max=5.")(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose):
    """Spiking continual learning: train, sweep, evaluate, report."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", datefmt="%H:%M:%S")


@main.command()
@_common_config
@click.option("--mode", type=str, default=None, help="Shortcut for --set mode=...")
@click.option("--seed", type=int, default=None, help="Shortcut for --set seed=...")
@click.option("--output", type=click.Path(), default=None, help="Shortcut for --set output_dir=...")
@click.option("--resume", is_flag=True, help="Continue an interrupted run.")
@_handle_errors
def train(config_path, overrides, mode, seed, output, resume):
    """Train on the sequential task stream and write the run directory."""
    from .experiment import run_experiment
    overrides = list(overrides)
    if mode is not None:
        overrides.append(f"mode={mode}")
    if seed is not None:
        overrides.append(f"seed={seed}")
    if output is not None:
        overrides.append(f"output_dir={output}")
    cfg = load_config(config_path, overrides)
    record = run_experiment(cfg, resume=resume)
    metrics_path = record.run_dir / "metrics.json"
    click.echo(f"run {record.status}: {record.run_dir}")
    if metrics_path.exists():
        final = json.loads(metrics_path.read_text())["final"]
        click.echo(f"mean_accuracy={final['mean_accuracy']:.4f} "
                   f"backward_transfer={final['backward_transfer']:+.4f} "
                   f"memory_overhead={final['memory_overhead']:g}")


@main.command()
@_common_config
@click.option("--seeds", type=str, default=None, help="Comma-separated seeds, e.g. 1,2,3.")
@click.option("--m-max", "m_max", type=str, default=None, help="Comma-separated m_max grid, e.g. 5,25.")
@_handle_errors
def sweep(config_path, overrides, seeds, m_max):
    """Run a seed x m_max grid and aggregate the results."""
    from .experiment import sweep as run_sweep
    cfg = load_config(config_path, overrides)
    seed_list = [int(s) for s in seeds.split(",")] if seeds else None
    m_list = [float(m) for m in m_max.split(",")] if m_max else None
    records = run_sweep(cfg, seeds=seed_list, m_max_values=m_list)
    click.echo(f"{len(records)} runs -> {cfg.output_dir}/sweep_summary.csv")


@main.command("eval")
@click.argument("checkpoint", type=click.Path(exists=True))
@_common_config
@_handle_errors
def eval_cmd(checkpoint, config_path, overrides):
    """Evaluate a checkpoint on every task of the configured stream."""
    from .config import resolve_mode
    from .experiment import build_tasks, evaluate_model, resolve_dataset
    from .network import load_checkpoint
    cfg = resolve_mode(load_config(config_path, overrides))
    backend.set_backend(cfg.backend)
    model = load_checkpoint(checkpoint)
    train_ds, test_ds, note = resolve_dataset(cfg)
    seq = build_tasks(cfg, train_ds, test_ds)
    accs, _ = evaluate_model(model, seq, cfg)
    for task, acc in zip(seq.tasks, accs):
        click.echo(f"task {task.index + 1} {task.classes}: accuracy {acc:.4f}")
    click.echo(f"mean: {accs.mean():.4f}  (data: {note})")


@main.command()
@click.argument("run_dirs", nargs=-1, type=click.Path(exists=True))
@click.option("--output", type=click.Path(), required=True, help="Report directory.")
@_handle_errors
def report(run_dirs, output):
    """Aggregate finished runs into metric files and summary tables."""
    from .experiment import emit_report
    out = emit_report(list(run_dirs), output)
    click.echo(f"report written to {out}")


@main.command()
@_common_config
@_handle_errors
def show_config(config_path, overrides):
    """Print the fully resolved configuration."""
    click.echo(dump_yaml(load_config(config_path, overrides)), nl=False)


if __name__ == "__main__":
    main()
