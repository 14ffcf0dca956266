"""Grayscale image loading, including a JSON scene descriptor for fixtures.

A scene descriptor looks like::

    {"width": 672, "height": 672,
     "background": {"top": 0.6, "bottom": 0.3},
     "shapes": [{"bbox": [x0, y0, x1, y1], "value": 0.1}, ...],
     "noise": {"sigma": 0.02, "seed": 7}}

Shapes are painted in order; later shapes cover earlier ones.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import FormatError
from .formats import read_raster


def render_scene(desc: dict) -> np.ndarray:
    try:
        w, h = int(desc["width"]), int(desc["height"])
    except (KeyError, TypeError, ValueError):
        raise FormatError("scene descriptor needs integer width and height") from None
    bg = desc.get("background", 0.5)
    if isinstance(bg, dict):
        col = np.linspace(float(bg.get("top", 0.5)), float(bg.get("bottom", 0.5)), h)
        img = np.repeat(col[:, None], w, axis=1)
    else:
        img = np.full((h, w), float(bg))
    for i, shape in enumerate(desc.get("shapes", [])):
        try:
            x0, y0, x1, y1 = (int(v) for v in shape["bbox"])
            value = float(shape["value"])
        except (KeyError, TypeError, ValueError):
            raise FormatError(f"scene shape {i} needs bbox and value") from None
        img[max(y0, 0):min(y1, h), max(x0, 0):min(x1, w)] = value
    noise = desc.get("noise")
    if noise:
        rng = np.random.default_rng(int(noise.get("seed", 0)))
        img = img + float(noise.get("sigma", 0.0)) * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 1.0)


def load_image(path) -> np.ndarray:
    """Grayscale raster in [0, 1] from a .json scene, .npy array, PGM or HMAP file."""
    path = Path(path)
    if path.suffix == ".json":
        try:
            desc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
        return render_scene(desc)
    if path.suffix == ".npy":
        arr = np.load(path)
        if arr.ndim != 2:
            raise FormatError(f"{path}: expected a 2-D array")
        return arr.astype(np.float64)
    return read_raster(path)


def fixture_dir() -> Path:
    """Directory of the bundled offline fixture."""
    return Path(str(resources.files("fasemcom.data").joinpath("fixture")))


def fixture_config() -> Path:
    return fixture_dir() / "config.json"
