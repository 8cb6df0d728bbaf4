"""flakesynth command line.

Every command reads the pipeline config given with ``--config`` (defaults
otherwise), derives all randomness from ``--seed`` and writes its outputs
atomically. Failures print one line ``error: <ErrorClass>: <message>`` on
stderr and exit with 2 for configuration problems, 1 for everything else.
"""

import json
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, List, Optional

import typer
from loguru import logger

from ..annotations.io import import_dataset, load_annotations, write_annotations
from ..core.config import PipelineConfig, load_config
from ..core.errors import ConfigError
from ..core.fileio import atomic_write_text
from ..core.log import setup_logging
from ..core.rng import derive_rng
from ..detector.detector import DetectorParams, detect_directory
from ..evaluation.benchmark import benchmark as run_benchmark
from ..evaluation.metrics import MatchConfig, ap50
from ..mixture.dataset import select_few_shot_subset
from ..mixture.serialization import load_model, save_model
from ..mixture.training import train_classifier
from ..optics.color import ColorLookupTable, OpticalSetup
from ..optics.dispersion import load_dispersion
from ..scene.dataset import generate_dataset
from ..shapes.library import load_library, save_library
from ..shapes.mining import mine_directory

app = typer.Typer(
    name="flakesynth",
    help="Synthetic microscopy data engine for 2D material flakes.",
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_enable=False,
)


class Split(str, Enum):
    train = "train"
    test = "test"


class ModelKind(str, Enum):
    gmm = "gmm"
    amm = "amm"


@dataclass
class CliState:
    """Global options; the config is loaded on first use."""

    config_path: Optional[Path] = None
    seed: Optional[int] = None
    jobs: Optional[int] = None
    _config: Optional[PipelineConfig] = None

    def config(self) -> PipelineConfig:
        if self._config is None:
            self._config = load_config(self.config_path, seed=self.seed)
            setup_logging(self._config.app.log_level, self._config.app.log_file)
            logger.debug(f"Loaded config from {self.config_path or 'defaults'} with seed {self._config.seed}")
        return self._config

    def workers(self) -> int:
        return self.jobs if self.jobs is not None else self.config().app.jobs


def _one_line(message: str) -> str:
    return " ".join(message.split())


@contextmanager
def reporting_errors() -> Iterator[None]:
    """Turn exceptions into a single machine-parsable stderr line and an exit code."""
    try:
        yield
    except typer.Exit:
        raise
    except ConfigError as e:
        typer.echo(f"error: {type(e).__name__}: {_one_line(str(e))}", err=True)
        raise typer.Exit(2)
    except Exception as e:
        logger.opt(exception=e).debug("command failed")
        typer.echo(f"error: {type(e).__name__}: {_one_line(str(e))}", err=True)
        raise typer.Exit(1)


def _state(ctx: typer.Context) -> CliState:
    return ctx.obj


@app.callback()
def main_callback(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", help="Pipeline config (TOML)."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Master seed; overrides the config."),
    jobs: Optional[int] = typer.Option(None, "--jobs", min=1, help="Worker processes for generate and detect."),
):
    setup_logging()
    ctx.obj = CliState(config, seed, jobs)


@app.command("mine-shapes")
def mine_shapes(
    ctx: typer.Context,
    input_dir: Path = typer.Option(..., "--input", help="Directory of real microscope images."),
    out: Path = typer.Option(..., "--out", help="Shape library directory to write."),
):
    """Extract flake silhouettes from real images into a shape library."""
    with reporting_errors():
        state = _state(ctx)
        library = mine_directory(input_dir, state.config().mining, jobs=state.workers())
        manifest = save_library(library, out)
        typer.echo(f"{manifest.shape_count} shapes -> {out}")


@app.command()
def generate(
    ctx: typer.Context,
    shapes: Path = typer.Option(..., "--shapes", help="Shape library directory."),
    count: int = typer.Option(..., "--count", min=0, help="Number of images."),
    out: Path = typer.Option(..., "--out", help="Dataset directory to write."),
    split: Optional[Split] = typer.Option(None, "--split", help="Split tag recorded in the manifest."),
):
    """Render a synthetic dataset with ground-truth annotations."""
    with reporting_errors():
        state = _state(ctx)
        config = state.config()
        library = load_library(shapes)
        annotations = generate_dataset(
            config, library, count, out, jobs=state.workers(), split=split.value if split else None,
        )
        typer.echo(f"{len(annotations.images)} images -> {out}")


@app.command()
def train(
    ctx: typer.Context,
    model: ModelKind = typer.Option(..., "--model", help="Classifier kind."),
    data: Path = typer.Option(..., "--data", help="Ground-truth annotations JSON."),
    images: Optional[Path] = typer.Option(None, "--images", help="Root the annotation file names are relative to."),
    out: Path = typer.Option(..., "--out", help="Model JSON to write."),
    images_per_class: Optional[int] = typer.Option(None, "--images-per-class", min=1,
                                                   help="Train on a few-shot subset."),
    subset_seed: Optional[int] = typer.Option(None, "--subset-seed", help="Seed of the subset draw."),
):
    """Fit a contrast-space classifier on annotated images."""
    with reporting_errors():
        config = _state(ctx).config()
        annotations = load_annotations(data)
        root = images if images is not None else data.parent
        image_ids = None
        if images_per_class is not None:
            seed = subset_seed if subset_seed is not None else config.seed
            image_ids = select_few_shot_subset(annotations, images_per_class, derive_rng(seed, "subset"))
            logger.info(f"Few-shot subset: {len(image_ids)} of {len(annotations.images)} images")
        classifier = train_classifier(model.value, annotations, root, config, image_ids=image_ids)
        save_model(classifier, out)
        typer.echo(f"{model.value} model -> {out}")


@app.command()
def detect(
    ctx: typer.Context,
    model: Path = typer.Option(..., "--model", help="Model JSON."),
    images: Path = typer.Option(..., "--images", help="Image directory or dataset root."),
    out: Path = typer.Option(..., "--out", help="Detections JSON to write."),
):
    """Detect and classify flakes in every image of a directory.

    When the directory holds an annotations.json, its image ids and file
    names are reused so the detections can be evaluated against it.
    """
    with reporting_errors():
        state = _state(ctx)
        config = state.config()
        classifier = load_model(model)
        reference_path = images / "annotations.json"
        reference = load_annotations(reference_path) if reference_path.is_file() else None
        detections = detect_directory(
            classifier, images, DetectorParams.from_settings(config.detector), jobs=state.workers(),
            reference=reference,
        )
        write_annotations(out, detections)
        found = sum(len(image.instances) for image in detections.images)
        typer.echo(f"{found} instances in {len(detections.images)} images -> {out}")


@app.command()
def evaluate(
    ctx: typer.Context,
    gt: Path = typer.Option(..., "--gt", help="Ground-truth annotations JSON."),
    pred: Path = typer.Option(..., "--pred", help="Detections JSON."),
    out: Path = typer.Option(..., "--out", help="Report JSON to write."),
):
    """Score detections against ground truth with per-class AP50."""
    with reporting_errors():
        config = _state(ctx).config()
        report = ap50(load_annotations(pred), load_annotations(gt), MatchConfig.from_settings(config.evaluation))
        atomic_write_text(out, report.model_dump_json(indent=2))
        typer.echo(f"mean AP {report.mean_ap:.4f}")


@app.command("render-color")
def render_color(
    ctx: typer.Context,
    material: Optional[str] = typer.Option(None, "--material", help="Material name; the scene material by default."),
    layers: int = typer.Option(..., "--layers", min=0, help="Layer count."),
    oxide: Optional[float] = typer.Option(None, "--oxide", min=0, help="Oxide thickness in nm."),
):
    """Print the normalized RGB of one flake stack."""
    with reporting_errors():
        config = _state(ctx).config()
        settings = config.material(material)
        if oxide is None:
            lo, hi = config.scene.oxide_range()
            oxide = (lo + hi) / 2
        table = ColorLookupTable(
            OpticalSetup.from_config(config),
            load_dispersion(config.resolve(settings.dispersion, "materials")),
            settings,
            oxide,
        )
        r, g, b = table.color(layers)
        typer.echo(f"{r:.6f} {g:.6f} {b:.6f}")


@app.command("import")
def import_command(
    ctx: typer.Context,
    directory: Path = typer.Argument(..., help="Dataset directory."),
    split: Optional[Split] = typer.Option(None, "--split", help="Split tag to report."),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the manifest JSON here."),
):
    """Validate a dataset directory and report instances per class."""
    with reporting_errors():
        _state(ctx).config()
        manifest = import_dataset(directory, split=split.value if split else None)
        if out is not None:
            atomic_write_text(out, manifest.model_dump_json(indent=2))
        typer.echo(json.dumps({
            "name": manifest.name,
            "split": manifest.split,
            "images": len(manifest.images),
            "class_counts": manifest.class_counts,
        }))


@app.command()
def benchmark(
    ctx: typer.Context,
    train_dir: Path = typer.Option(..., "--train", help="Training dataset directory."),
    test_dir: Path = typer.Option(..., "--test", help="Test dataset directory."),
    repeats: int = typer.Option(10, "--repeats", min=1, help="Number of subsets."),
    images_per_class: Optional[int] = typer.Option(None, "--images-per-class", min=1),
    models: List[ModelKind] = typer.Option([ModelKind.gmm, ModelKind.amm], "--models", help="Classifier kinds."),
    out: Optional[Path] = typer.Option(None, "--out", help="Report JSON to write."),
):
    """Repeat few-shot train, detect and evaluate; report mean and std of AP50."""
    with reporting_errors():
        state = _state(ctx)
        report = run_benchmark(
            state.config(), train_dir, test_dir, repeats, images_per_class,
            kinds=[kind.value for kind in models], jobs=state.workers(),
        )
        if out is not None:
            atomic_write_text(out, report.model_dump_json(indent=2))
        for kind in report.mean:
            typer.echo(f"{kind}: {report.mean[kind]:.4f} +- {report.std[kind]:.4f}")


def main() -> None:
    app()


if __name__ == "__main__":
    main()
