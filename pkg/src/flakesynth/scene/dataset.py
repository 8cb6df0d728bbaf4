"""Synthetic dataset generation.

Every image draws from its own random stream derived from (seed, "image",
index), so any single image can be regenerated without the others and the
output does not depend on the number of worker processes.
"""

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import numpy as np
from loguru import logger
from tqdm import tqdm

from ..annotations.schemas import DatasetAnnotations, ImageAnnotation, InstanceAnnotation, RLEMask
from ..core.config import PipelineConfig
from ..core.errors import FlakeSynthError, GenerationError
from ..core.fileio import atomic_directory, encode_png
from ..core.rng import derive_rng, derive_seed
from ..optics.color import OpticalSetup
from ..optics.dispersion import load_dispersion
from ..shapes.library import ShapeLibrary
from .instances import SceneInstance, class_infos, derive_instances
from .layout import sample_scene
from .postprocess import postprocess
from .render import render_scene, to_uint8


@dataclass(eq=False)
class SyntheticSample:
    """One generated image with its ground truth."""

    index: int
    image: np.ndarray
    instances: List[SceneInstance]
    metadata: Dict[str, Any] = field(default_factory=dict)
    ignore: Optional[np.ndarray] = None

    @property
    def image_id(self) -> str:
        return f"{self.index:06d}"

    @property
    def file_name(self) -> str:
        return f"images/{self.image_id}.png"

    def annotation(self) -> ImageAnnotation:
        height, width = self.image.shape[:2]
        return ImageAnnotation(
            id=self.image_id,
            file_name=self.file_name,
            height=height,
            width=width,
            instances=[
                InstanceAnnotation(
                    class_id=instance.class_label,
                    segmentation=RLEMask.from_mask(instance.mask),
                    area=instance.area,
                    layer_count=instance.layer_count,
                )
                for instance in self.instances
            ],
            ignore=RLEMask.from_mask(self.ignore) if self.ignore is not None and self.ignore.any() else None,
            metadata=self.metadata,
        )


class SceneGenerator:
    """Renders individual synthetic samples from a config and a shape library."""

    def __init__(self, config: PipelineConfig, library: ShapeLibrary, setup: Optional[OpticalSetup] = None):
        library.require_non_empty()
        self.config = config
        self.library = library
        self.setup = setup or OpticalSetup.from_config(config)
        self.material_settings = config.material()
        self.material = load_dispersion(config.resolve(self.material_settings.dispersion, "materials"))
        self.annotated_classes = config.annotated_classes()

    def generate(self, index: int) -> SyntheticSample:
        """Generate image ``index``; failures are reported with the index."""
        try:
            return self._generate(index)
        except GenerationError:
            raise
        except FlakeSynthError as e:
            raise GenerationError(index, str(e)) from e

    def _generate(self, index: int) -> SyntheticSample:
        scene = self.config.scene
        rng = derive_rng(self.config.seed, "image", index)
        oxide = float(rng.uniform(*scene.oxide_range()))
        layer_map, placements = sample_scene(scene, self.library, rng)
        clean, lut = render_scene(layer_map, oxide, self.material, self.material_settings, self.setup)
        image = postprocess(clean, rng, self.config.postprocess)
        instances = [
            instance for instance in derive_instances(layer_map, self.annotated_classes, scene.merge_thick_instances)
            if instance.area >= scene.min_instance_area
        ]
        ignore = layer_map.counts > 0
        for instance in instances:
            ignore[instance.top:instance.top + instance.crop.shape[0],
                   instance.left:instance.left + instance.crop.shape[1]] &= ~instance.crop
        logger.debug(f"image {index}: {len(placements)} shapes, {len(instances)} instances, oxide {oxide:.2f} nm")
        metadata = {
            "seed": derive_seed(self.config.seed, "image", index),
            "oxide_thickness_nm": oxide,
            "material": scene.material,
            "shape_count": len(placements),
            "distinct_layer_counts": int(np.unique(layer_map.counts).size),
            "optics_evaluations": lut.evaluations,
        }
        return SyntheticSample(index, to_uint8(image), instances, metadata, ignore)


_worker: Optional[SceneGenerator] = None


def _init_worker(config: PipelineConfig, library: ShapeLibrary) -> None:
    global _worker
    _worker = SceneGenerator(config, library)


def _generate_encoded(index: int):
    sample = _worker.generate(index)
    return encode_png(sample.image), sample.annotation()


class DatasetGenerator:
    """Coordinates generation of a full dataset directory."""

    def __init__(self, config: PipelineConfig, library: ShapeLibrary, jobs: int = 1):
        self.config = config
        self.library = library
        self.jobs = max(1, int(jobs))

    def _encoded(self, count: int) -> Iterator:
        if self.jobs == 1:
            _init_worker(self.config, self.library)
            return map(_generate_encoded, range(count))
        pool = ProcessPoolExecutor(
            max_workers=self.jobs, mp_context=multiprocessing.get_context("spawn"),
            initializer=_init_worker, initargs=(self.config, self.library),
        )
        return _drain(pool, count, self.jobs)

    def run(self, count: int, out_dir: Path, split: Optional[str] = None,
            name: Optional[str] = None) -> DatasetAnnotations:
        """Write ``images/*.png`` and ``annotations.json``; the directory appears only on success.

        A zero count returns the empty document without touching the filesystem.
        """
        out_dir = Path(out_dir)
        annotations = DatasetAnnotations(
            name=name or f"synthetic-{self.config.scene.material}",
            split=split,
            classes=class_infos(self.config.annotated_classes()),
            config=self.config.echo(),
        )
        if count == 0:
            logger.info(f"Nothing to generate; {out_dir} left untouched")
            return annotations
        logger.info(f"Generating {count} images into {out_dir} with {self.jobs} job(s)")
        with atomic_directory(out_dir) as scratch:
            images_dir = scratch / "images"
            images_dir.mkdir()
            progress = tqdm(self._encoded(count), total=count, desc="generating", disable=None)
            for png, annotation in progress:
                (scratch / annotation.file_name).write_bytes(png)
                annotations.images.append(annotation)
            (scratch / "annotations.json").write_text(annotations.model_dump_json(indent=2), encoding="utf-8")
        counts = annotations.class_counts()
        logger.info(f"Wrote {len(annotations.images)} images; instances per class: {counts}")
        return annotations


def _drain(pool: ProcessPoolExecutor, count: int, jobs: int) -> Iterator:
    with pool:
        yield from pool.map(_generate_encoded, range(count), chunksize=max(1, count // (8 * jobs)))


def generate_dataset(config: PipelineConfig, library: ShapeLibrary, count: int, out_dir: Path,
                     jobs: int = 1, split: Optional[str] = None) -> DatasetAnnotations:
    """Generate ``count`` synthetic images with ground truth under ``out_dir``."""
    if count < 0:
        raise ValueError(f"image count must be >= 0, got {count}")
    return DatasetGenerator(config, library, jobs).run(count, out_dir, split=split)
