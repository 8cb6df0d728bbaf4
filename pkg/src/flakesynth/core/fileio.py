"""Atomic output helpers and image I/O."""

import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Union

import numpy as np
from PIL import Image

PathLike = Union[str, Path]

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp")


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@contextmanager
def atomic_directory(path: PathLike) -> Iterator[Path]:
    """Yield a scratch directory that replaces ``path`` only if the block succeeds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    if path.exists():
        backup = Path(tempfile.mkdtemp(prefix=f".{path.name}.old.", dir=path.parent))
        os.replace(path, backup / "previous")
        os.replace(scratch, path)
        shutil.rmtree(backup, ignore_errors=True)
    else:
        os.replace(scratch, path)


def read_rgb(path: PathLike) -> np.ndarray:
    """(H, W, 3) uint8 array of an image file."""
    with Image.open(path) as image:
        return np.asarray(image.convert("RGB"), dtype=np.uint8)


def encode_png(rgb: np.ndarray) -> bytes:
    """Deterministic PNG bytes of an (H, W, 3) uint8 or (H, W) bool array."""
    from io import BytesIO

    if rgb.dtype == bool:
        image = Image.fromarray(rgb.astype(np.uint8) * 255).convert("1")
    else:
        image = Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8))
    buffer = BytesIO()
    image.save(buffer, format="PNG", optimize=False)
    return buffer.getvalue()


def write_png(path: PathLike, array: np.ndarray) -> None:
    atomic_write_bytes(path, encode_png(array))


def read_bitmap(path: PathLike) -> np.ndarray:
    with Image.open(path) as image:
        return np.asarray(image.convert("L")) > 127


def list_images(directory: PathLike) -> list:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
