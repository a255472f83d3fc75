"""
maskwatch command line.

Exit codes: 0 success, 1 usage error, 2 data/format/IO error, 3 invariant
violation.
"""

import logging
from collections import Counter
from collections.abc import Sequence
from pathlib import Path

import click
import typer
from pydantic import ValidationError as PydanticValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import __version__, embednet, gallery
from .base import (
    DataFormatError,
    InvariantViolation,
    IoFailure,
    MaskwatchError,
    SystemClock,
    ValidationError,
    VirtualClock,
)
from .base.clock import Clock
from .eval import SubsetMode, evaluate_curves, export_pr_csv, load_detections, load_ground_truth
from .eval.metrics import REFERENCE_AP, APResult, average_precision
from .marginloss import MarginSpec
from .notify import (
    FileSinkTransport,
    Notifier,
    NotifyConfig,
    SmtpSettings,
    SmtpTransport,
    StdoutTransport,
    Transport,
)
from .pipeline import PipelineConfig, check_event_grammar, compare_reports, load_report, run_script

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3

app = typer.Typer(
    name="maskwatch",
    help="Margin-softmax training, gallery identification, no-mask alerts and AP evaluation.",
    add_completion=False,
    no_args_is_help=True,
)
gallery_app = typer.Typer(help="Enroll, identify and list gallery identities.", no_args_is_help=True)
app.add_typer(gallery_app, name="gallery")

console = Console()
err_console = Console(stderr=True)


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False, rich_tracebacks=verbose)],
        force=True,
    )


def _version_callback(value: bool) -> None:
    if value:
        typer.echo(f"maskwatch {__version__}")
        raise typer.Exit(EXIT_OK)


def _positive(value: float) -> float:
    if value <= 0:
        raise typer.BadParameter("must be positive")
    return value


def _open_unit(value: float) -> float:
    if not 0.0 < value < 1.0:
        raise typer.BadParameter("must lie strictly between 0 and 1")
    return value


def _similarity(value: float) -> float:
    if not -1.0 <= value <= 1.0:
        raise typer.BadParameter("must lie in [-1, 1]")
    return value


@app.callback()
def root(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level to stderr"),
    version: bool = typer.Option(
        False, "--version", callback=_version_callback, is_eager=True, help="Show version and exit"
    ),
) -> None:
    """maskwatch workflows."""
    _configure_logging(verbose)


@app.command()
def train(
    dataset: Path | None = typer.Option(None, "--dataset", help="Labeled dataset file (DATASET v1)"),
    toy: bool = typer.Option(False, "--toy", help="Train on a seeded Gaussian toy dataset"),
    toy_classes: int = typer.Option(2, "--toy-classes", min=2, help="Toy dataset classes"),
    toy_per_class: int | None = typer.Option(
        None, "--toy-per-class", min=1, help="Toy samples per class [default: 1915/1918 for 2 classes, else 200]"
    ),
    m1: float = typer.Option(1.0, "--m1", help="Multiplicative angular margin"),
    m2: float = typer.Option(0.5, "--m2", help="Additive angular margin (radians)"),
    m3: float = typer.Option(0.0, "--m3", help="Additive cosine margin"),
    scale: float = typer.Option(64.0, "--scale", callback=_positive, help="Feature scale s"),
    lr: float = typer.Option(1e-4, "--lr", callback=_positive, help="Learning rate"),
    momentum: float = typer.Option(0.9, "--momentum", help="SGD momentum"),
    decay: float = typer.Option(0.01, "--decay", help="Weight decay"),
    batch: int = typer.Option(32, "--batch", min=1, help="Batch size"),
    epochs: int = typer.Option(40, "--epochs", min=1, help="Training epochs"),
    seed: int = typer.Option(0, "--seed", help="Seed for data, initialization and shuffling"),
    embedding_dim: int = typer.Option(
        embednet.DEFAULT_EMBEDDING_DIM, "--embedding-dim", min=1, help="Embedding dimension"
    ),
    out: Path = typer.Option(Path("checkpoint.txt"), "--out", help="Checkpoint path"),
    loss_out: Path | None = typer.Option(
        None, "--loss-out", help="Loss CSV path [default: <out>.loss.csv]"
    ),
) -> None:
    """Train the embedding network with a margin-softmax head."""
    if (dataset is None) == (not toy):
        raise typer.BadParameter("pass exactly one of --dataset or --toy")
    try:
        spec = MarginSpec(m1=m1, m2=m2, m3=m3, s=scale)
        cfg = embednet.TrainConfig(
            learning_rate=lr,
            momentum=momentum,
            weight_decay=decay,
            batch_size=batch,
            epochs=epochs,
            seed=seed,
        )
    except PydanticValidationError as e:
        raise typer.BadParameter(str(e)) from e

    if dataset is not None:
        data = embednet.load_dataset(dataset)
    else:
        if toy_per_class is None:
            per_class: Sequence[int] = (
                embednet.FOLDER_CLASS_COUNTS if toy_classes == 2 else (200,) * toy_classes
            )
        else:
            per_class = (toy_per_class,) * toy_classes
        data = embednet.make_toy_dataset(
            num_classes=toy_classes, per_class=per_class, input_dim=embednet.DEFAULT_INPUT_DIM, seed=seed
        )

    net = embednet.init_net(embednet.default_layer_dims(data.input_dim, embedding_dim), seed)
    result = embednet.train(data, net, spec, cfg)
    embednet.save_checkpoint(result.net, result.class_weights, out)
    embednet.write_loss_csv(result.loss_history, loss_out or out.with_name(out.name + ".loss.csv"))
    accuracy = embednet.nearest_class_accuracy(result.net, result.class_weights, data)
    typer.echo(f"accuracy {accuracy:.4f}")


@app.command("eval-ap")
def eval_ap(
    gt: Path = typer.Option(..., "--gt", help="Ground-truth file"),
    det: Path = typer.Option(..., "--det", help="Detection file"),
    iou: float = typer.Option(0.5, "--iou", callback=_open_unit, help="IoU threshold"),
    pr_out: str | None = typer.Option(
        None, "--pr-out", help="Prefix for per-subset PR CSVs (<prefix>_<subset>.csv)"
    ),
    subset_mode: SubsetMode = typer.Option(
        SubsetMode.CUMULATIVE, "--subset-mode", help="Difficulty subsets"
    ),
    workers: int = typer.Option(1, "--workers", min=1, help="Threads for per-image matching"),
    show_reference: bool = typer.Option(
        False, "--show-reference", help="Also print the published reference AP row"
    ),
) -> None:
    """Average precision on the easy, medium and hard subsets."""
    curves = evaluate_curves(
        load_detections(det), load_ground_truth(gt), iou, subset_mode, workers
    )
    values: dict[str, float | None] = {}
    for subset, curve in curves.items():
        if curve is None:
            values[subset.value] = None
            continue
        values[subset.value] = average_precision(curve) if curve.points else 0.0
        if pr_out is not None and curve.points:
            export_pr_csv(curve, f"{pr_out}_{subset.value}.csv")
    typer.echo(APResult(**values).format_row())
    if show_reference:
        typer.echo(f"reference {REFERENCE_AP.format_row()}")


def _load_or_create(file: Path, dim: int | None) -> gallery.Gallery:
    if file.exists():
        g = gallery.load(file)
        if dim is not None and dim != g.dim:
            raise ValidationError(f"--dim {dim} does not match gallery dim {g.dim}")
        return g
    return gallery.Gallery(dim=dim or gallery.DEFAULT_DIM)


@gallery_app.command("enroll")
def gallery_enroll(
    file: Path = typer.Option(..., "--file", help="Gallery file (created if absent)"),
    person_id: str = typer.Option(..., "--id", help="Person identifier"),
    vector_file: Path = typer.Option(..., "--vector-file", help="Raw feature vector"),
    dim: int | None = typer.Option(
        None, "--dim", min=1, help="Dimension of a new gallery [default: 512]"
    ),
) -> None:
    """Append an identity to the gallery."""
    g = gallery.enroll(_load_or_create(file, dim), person_id, gallery.load_vector(vector_file))
    gallery.save(g, file)
    typer.echo(f"enrolled {person_id} ({len(g)} entries, dim {g.dim})")


@gallery_app.command("identify")
def gallery_identify(
    file: Path = typer.Option(..., "--file", help="Gallery file"),
    vector_file: Path = typer.Option(..., "--vector-file", help="Raw probe vector"),
    threshold: float = typer.Option(
        gallery.DEFAULT_THRESHOLD, "--threshold", callback=_similarity, help="Match threshold"
    ),
) -> None:
    """Print '<id> <score>' for the best match, or UNKNOWN."""
    g = gallery.load(file)
    result = gallery.identify(g, gallery.normalize(gallery.load_vector(vector_file)), threshold)
    if isinstance(result, gallery.Match):
        typer.echo(f"{result.person_id} {result.score:.6f}")
    else:
        typer.echo("UNKNOWN")


@gallery_app.command("list")
def gallery_list(file: Path = typer.Option(..., "--file", help="Gallery file")) -> None:
    """Show enrolled identities and their entry counts."""
    g = gallery.load(file)
    counts = Counter(entry.person_id for entry in g)
    table = Table(title=f"Gallery dim={g.dim} entries={len(g)}")
    table.add_column("person_id")
    table.add_column("entries", justify="right")
    for person_id in g.persons():
        table.add_row(person_id, str(counts[person_id]))
    console.print(table)


@app.command()
def pipeline(
    script: Path = typer.Option(..., "--script", help="Frame script"),
    gallery_file: Path = typer.Option(..., "--gallery", help="Gallery file"),
    threshold: float = typer.Option(
        gallery.DEFAULT_THRESHOLD, "--threshold", callback=_similarity, help="Match threshold"
    ),
    sink: Path | None = typer.Option(
        None, "--sink", help="Append alerts to this file [default: print to stdout]"
    ),
    smtp: bool = typer.Option(False, "--smtp", help="Send alerts over SMTP (MASKWATCH_SMTP_*)"),
    env_file: Path | None = typer.Option(None, "--env-file", help=".env file for SMTP settings"),
    from_addr: str = typer.Option(NotifyConfig().from_addr, "--from", help="Alert sender"),
    to_addr: str = typer.Option(NotifyConfig().to_addr, "--to", help="Alert recipient"),
    frontal_limit: float = typer.Option(
        25.0, "--frontal-limit", callback=_positive, help="Yaw/pitch limit in degrees"
    ),
    roi_margin: float = typer.Option(0.0, "--roi-margin", min=0.0, help="Relative ROI growth"),
    events_out: Path | None = typer.Option(None, "--events-out", help="Event log path"),
    timing_out: Path | None = typer.Option(None, "--timing-out", help="Timing report path"),
    virtual_clock: bool = typer.Option(
        False, "--virtual-clock", help="Fixed-tick clock for reproducible timings"
    ),
    tick: float = typer.Option(0.001, "--tick", min=0.0, help="Virtual clock tick (seconds)"),
) -> None:
    """Run the detect / mask-check / identify / notify pipeline over a frame script."""
    if smtp and sink is not None:
        raise typer.BadParameter("--smtp and --sink are mutually exclusive")
    try:
        notify_config = NotifyConfig(from_addr=from_addr, to_addr=to_addr)
        config = PipelineConfig(
            threshold=threshold, frontal_limit_deg=frontal_limit, roi_margin=roi_margin
        )
    except (PydanticValidationError, ValidationError) as e:
        raise typer.BadParameter(str(e)) from e

    transport: Transport
    if smtp:
        transport = SmtpTransport(SmtpSettings.from_env(env_file))
    elif sink is not None:
        transport = FileSinkTransport(sink)
    else:
        transport = StdoutTransport(console)
    clock: Clock = VirtualClock(tick=tick) if virtual_clock else SystemClock()

    events, _ = run_script(
        script,
        gallery.load(gallery_file),
        Notifier(transport, notify_config),
        config,
        clock=clock,
        events_out=events_out,
        timing_out=timing_out,
    )
    check_event_grammar(events)
    kinds = Counter(event.kind.value for event in events)
    summary = " ".join(f"{kind}={count}" for kind, count in sorted(kinds.items()))
    err_console.print(f"{len(events)} events {summary}".rstrip())


@app.command()
def bench(
    old: Path = typer.Option(..., "--old", help="Baseline timing report"),
    new: Path = typer.Option(..., "--new", help="Candidate timing report"),
) -> None:
    """Per-stage speedups of one timing report over another."""
    rows = compare_reports(load_report(old), load_report(new))
    table = Table(title="Stage timing")
    for column in ("stage", "old_s", "new_s", "speedup", "delta_s", "note"):
        table.add_column(column, justify="left" if column in ("stage", "note") else "right")
    for row in rows:
        table.add_row(
            row.stage,
            f"{row.old_s:.4f}",
            f"{row.new_s:.4f}",
            f"{row.speedup:.4f}",
            f"{row.delta_s:.4f}",
            "slower" if row.anomalous else "",
        )
    console.print(table)


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code instead of exiting."""
    try:
        result = app(
            args=list(argv) if argv is not None else None,
            prog_name="maskwatch",
            standalone_mode=False,
        )
    except click.exceptions.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        err_console.print("Aborted")
        return EXIT_USAGE
    except click.exceptions.Exit as e:
        return e.exit_code
    except InvariantViolation as e:
        err_console.print(f"[red]Invariant violation:[/red] {e}")
        return EXIT_INVARIANT
    except (DataFormatError, IoFailure, ValidationError) as e:
        err_console.print(f"[red]Error:[/red] {e}")
        return EXIT_DATA
    except (MaskwatchError, PydanticValidationError) as e:
        err_console.print(f"[red]Error:[/red] {e}")
        return EXIT_DATA
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
