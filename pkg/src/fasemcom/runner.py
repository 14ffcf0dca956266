"""Experiment configuration, end-to-end pipeline and report files.

One pipeline run prepares the question-dependent inputs once (keywords, match,
slice, heatmaps, feature tensors) and then evaluates every (mode, beta, SNR)
grid cell. Each cell transmits the base tile and, when a match was found, the
slice tile.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import attnmap, channel, kwx, powalloc, semmatch
from .attnmap import Heatmap, PatchGrid
from .channel import ChannelConfig, FeatureTensor
from .errors import ConfigError, FasemcomError, InputError, StageError
from .formats import atomic_write, encode_hmap, read_ftns, read_raster, write_ftns
from .scene import fixture_config, load_image

log = logging.getLogger(__name__)

MODES = ("fa", "avg", "obj_only", "sub_only")
OUTPUT_DIR_ENV = "FASEMCOM_OUTPUT_DIR"
CSV_FIELDS = ("mode", "alpha", "beta", "snr_db", "overall_ber", "weighted_mse",
              "overall_mse", "important_patch_ber", "seed")
# a patch counts as question-relevant when matched boxes cover this share of it
IMPORTANT_COVERAGE = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    question: str
    detections_path: Path
    embedding_path: Path
    image_path: Path | None = None
    heatmap_path: Path | None = None
    image_size: tuple[int, int] | None = None
    objective_provider: str | None = None
    alpha: float = 0.5
    beta_list: tuple[float, ...] = (1.0,)
    snr_db_list: tuple[float, ...] = (10.0,)
    L: int = 5
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    grid: PatchGrid = field(default_factory=PatchGrid)
    modes: tuple[str, ...] = ("fa", "avg")
    trials: int = 32
    output_dir: Path = Path("fasemcom-out")
    top_k: int = 5
    match_threshold: float = semmatch.DEFAULT_THRESHOLD
    patch_reduce: str = "mean"
    features_base_path: Path | None = None
    features_slice_path: Path | None = None
    write_tensors: bool = True

    def __post_init__(self):
        if not self.question or not self.question.strip():
            raise ConfigError("question must be nonempty")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha={self.alpha} not in [0, 1]")
        if not self.beta_list or not self.snr_db_list:
            raise ConfigError("beta_list and snr_db_list must be nonempty")
        if any(not b >= 0 for b in self.beta_list):
            raise ConfigError("every beta must be >= 0")
        if any(not math.isfinite(s) for s in self.snr_db_list):
            raise ConfigError("every SNR must be finite")
        if self.L < 2:
            raise ConfigError("L must be >= 2")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.modes or any(m not in MODES for m in self.modes):
            raise ConfigError(f"modes must be drawn from {MODES}, got {self.modes}")
        if self.objective_provider not in (None,) + attnmap.PROVIDERS:
            raise ConfigError(f"unknown objective_provider {self.objective_provider!r}")
        if self.objective_provider == "file" and self.heatmap_path is None:
            raise ConfigError("objective_provider 'file' needs heatmap_path")
        if self.image_path is None and self.heatmap_path is None and self.image_size is None:
            raise ConfigError("need image_path, heatmap_path or image_size to fix the image size")

    @property
    def provider(self):
        if self.objective_provider:
            return self.objective_provider
        return "file" if self.heatmap_path is not None else "spectral_residual"


def _num_list(value, name):
    if isinstance(value, (int, float)):
        value = [value]
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number or list of numbers") from None


def config_from_dict(raw: dict, base_dir=".") -> ExperimentConfig:
    """Build a config from parsed JSON; relative input paths resolve against ``base_dir``."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    base_dir = Path(base_dir)
    known = {f for f in ExperimentConfig.__dataclass_fields__} | {"mode"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    def path(key, required=False):
        v = raw.get(key)
        if v is None:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return None
        p = Path(v)
        return p if p.is_absolute() else base_dir / p

    kw = {}
    try:
        kw["question"] = str(raw["question"])
    except KeyError:
        raise ConfigError("missing required key 'question'") from None
    kw["detections_path"] = path("detections_path", True)
    kw["embedding_path"] = path("embedding_path", True)
    for key in ("image_path", "heatmap_path", "features_base_path", "features_slice_path"):
        kw[key] = path(key)
    if raw.get("image_size") is not None:
        w, h = raw["image_size"]
        kw["image_size"] = (int(w), int(h))
    # outputs land relative to the working directory, never beside the inputs
    if raw.get("output_dir") is not None:
        kw["output_dir"] = Path(raw["output_dir"])
    elif os.environ.get(OUTPUT_DIR_ENV):
        kw["output_dir"] = Path(os.environ[OUTPUT_DIR_ENV])
    try:
        for key, conv in (("alpha", float), ("L", int), ("trials", int), ("top_k", int),
                          ("match_threshold", float), ("objective_provider", str),
                          ("patch_reduce", str), ("write_tensors", bool)):
            if raw.get(key) is not None:
                kw[key] = conv(raw[key])
        if "beta_list" in raw:
            kw["beta_list"] = _num_list(raw["beta_list"], "beta_list")
        if "snr_db_list" in raw:
            kw["snr_db_list"] = _num_list(raw["snr_db_list"], "snr_db_list")
        if "modes" in raw:
            modes = raw["modes"]
            kw["modes"] = (modes,) if isinstance(modes, str) else tuple(modes)
        elif "mode" in raw:
            kw["modes"] = (raw["mode"],)
        ch = dict(raw.get("channel") or {})
        ch.pop("snr_db", None)
        kw["channel"] = ChannelConfig(**ch)
        kw["grid"] = PatchGrid(**(raw.get("grid") or {}))
    except ConfigError:
        raise
    except (TypeError, ValueError, FasemcomError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    """Load a JSON config; ``@fixture`` names the bundled fixture config."""
    path = fixture_config() if str(path) == "@fixture" else Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, path.parent)


@dataclass
class Tile:
    name: str
    index: int
    region: tuple | None  # crop box in source pixels, None = whole image
    coverage: np.ndarray  # share of each patch inside matched boxes
    features: FeatureTensor

    @property
    def important(self):
        cov = self.coverage
        mask = cov >= IMPORTANT_COVERAGE
        if not mask.any():
            mask = cov > 0.0
        return mask


@dataclass
class Prepared:
    """Question- and image-dependent state shared by all grid cells."""
    cfg: ExperimentConfig
    image_size: tuple
    keywords: list
    match: semmatch.MatchResult | None
    slice_spec: semmatch.SliceSpec | None
    h_obj: Heatmap
    h_sub: Heatmap
    tiles: list
    warnings: list = field(default_factory=list)

    @property
    def token_count(self):
        return semmatch.token_count(len(self.tiles) - 1, self.cfg.grid.patch_count)


@dataclass
class RunRecord:
    mode: str
    alpha: float | None
    beta: float
    snr_db: float
    overall_ber: float
    weighted_mse: float
    overall_mse: float
    important_patch_ber: float
    seed: int
    ber_maps: dict = field(default_factory=dict, repr=False, compare=False)
    reports: dict = field(default_factory=dict, repr=False, compare=False)
    reconstructions: dict = field(default_factory=dict, repr=False, compare=False)

    def row(self):
        return [self.mode, _fmt(self.alpha), _fmt(self.beta), _fmt(self.snr_db),
                _fmt(self.overall_ber), _fmt(self.weighted_mse), _fmt(self.overall_mse),
                _fmt(self.important_patch_ber), str(self.seed)]


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


def _tag(x):
    return f"{float(x):g}"


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except FasemcomError as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(name, exc) from exc
    except OSError as exc:
        raise StageError(name, InputError(f"{exc.filename or ''}: {exc.strerror or exc}")) from exc


def _load_features(path, grid, dims, seed, stream):
    if path is None:
        return channel.synthesize_features(grid.patch_count, dims, seed, stream, grid)
    values, v_max = read_ftns(path)
    if values.shape != (grid.patch_count, dims):
        raise InputError(f"{path}: tensor {values.shape} does not fit {grid.patch_count} patches x {dims} dims")
    return FeatureTensor(values, v_max, grid)


def prepare(cfg: ExperimentConfig) -> Prepared:
    warn = []
    image = _stage("load-image", load_image, cfg.image_path) if cfg.image_path else None
    heat_raw = _stage("load-heatmap", read_raster, cfg.heatmap_path) if cfg.heatmap_path else None
    if image is not None:
        size = (image.shape[1], image.shape[0])
    elif heat_raw is not None:
        size = (heat_raw.shape[1], heat_raw.shape[0])
    else:
        size = cfg.image_size
    detections = _stage("load-detections", semmatch.load_detections, cfg.detections_path)
    for d in detections:
        _stage("load-detections", d.check_bounds, *size)
    table = _stage("load-embeddings", semmatch.load_embeddings, cfg.embedding_path)

    keywords = _stage("kwx", kwx.extract_keywords, cfg.question, 3, cfg.top_k)
    match = None
    if detections:
        match = _stage("semmatch", semmatch.best_match, keywords, detections, table, cfg.match_threshold)
    if match is None:
        msg = f"no detection matches question {cfg.question!r}; subjective attention is empty"
        log.warning(msg)
        warn.append(msg)
    boxes = match.matched_boxes if match else []
    slice_spec = _stage("slice", semmatch.select_slice, size, boxes, cfg.grid.tile_resolution) if match else None

    provider = cfg.provider
    if provider == "file":
        h_obj = _stage("objective", attnmap.objective_heatmap, image, "file", heat_raw)
    else:
        if image is None:
            if provider != "center_prior":
                raise StageError("objective", InputError(f"provider {provider!r} needs an image"))
            image = np.zeros((size[1], size[0]))
        h_obj = _stage("objective", attnmap.objective_heatmap, image, provider)
    h_sub = _stage("subjective", attnmap.subjective_heatmap, size, boxes)

    ch = cfg.channel
    regions = [("base", None)] + ([("slice", slice_spec.crop_box)] if slice_spec else [])
    paths = {"base": cfg.features_base_path, "slice": cfg.features_slice_path}
    tiles = []
    for idx, (name, region) in enumerate(regions):
        cov = _stage("patch-weights", attnmap.box_coverage, size, boxes, region, cfg.grid)
        feats = _stage("features", _load_features, paths[name], cfg.grid, ch.dims_per_patch, ch.seed, idx)
        tiles.append(Tile(name, idx, region, cov, feats))
    return Prepared(cfg, size, keywords, match, slice_spec, h_obj, h_sub, tiles, warn)


def mode_alpha(mode, alpha):
    return {"fa": alpha, "obj_only": 1.0, "sub_only": 0.0, "avg": None}[mode]


def tile_weights(prep: Prepared, mode: str):
    """Per-tile PatchWeights (levels filled) for ``mode``; uniform for avg."""
    cfg = prep.cfg
    a = mode_alpha(mode, cfg.alpha)
    out = []
    for tile in prep.tiles:
        if a is None:
            n = cfg.grid.patch_count
            out.append(attnmap.PatchWeights(cfg.grid, np.zeros(n), np.ones(n, dtype=np.int64), cfg.L))
            continue
        h_a = _stage("fuse", attnmap.fuse, prep.h_obj, prep.h_sub, a)
        w = _stage("patch-weights", attnmap.patch_weights, h_a, tile.region, cfg.grid, cfg.patch_reduce)
        out.append(attnmap.quantize_levels(w, cfg.L))
    return out


def plans_for(prep: Prepared, mode: str, beta: float):
    weights = tile_weights(prep, mode)
    eff_beta = 0.0 if mode == "avg" else beta
    plans = [
        _stage("allocate", powalloc.allocate, w.levels, eff_beta, prep.cfg.channel.p_total, prep.cfg.grid, prep.cfg.L)
        for w in weights
    ]
    return weights, plans


def run_cell(prep: Prepared, mode: str, beta: float, snr_db: float, plans=None) -> RunRecord:
    cfg = prep.cfg
    if plans is None:
        _, plans = plans_for(prep, mode, beta)
    ch = replace(cfg.channel, snr_db=snr_db)
    reports, recons = {}, {}
    for tile, plan in zip(prep.tiles, plans):
        rep, rec = _stage("transmit", channel.transmit, tile.features, plan, ch, cfg.trials, tile.index)
        reports[tile.name], recons[tile.name] = rep, rec

    reps = [reports[t.name] for t in prep.tiles]
    bits = sum(int(r.per_patch_bits.sum()) for r in reps)
    errs = sum(int(r.per_patch_bit_errors.sum()) for r in reps)
    mse = np.concatenate([r.per_patch_mse for r in reps])
    cov = np.concatenate([t.coverage for t in prep.tiles])
    imp = np.concatenate([t.important for t in prep.tiles])
    imp_bits = np.concatenate([r.per_patch_bits for r in reps])[imp].sum()
    imp_errs = np.concatenate([r.per_patch_bit_errors for r in reps])[imp].sum()
    side = cfg.grid.patches_per_side
    return RunRecord(
        mode=mode,
        alpha=mode_alpha(mode, cfg.alpha),
        beta=0.0 if mode == "avg" else float(beta),
        snr_db=float(snr_db),
        overall_ber=errs / bits,
        weighted_mse=channel.weighted_mse(mse, cov),
        overall_mse=float(mse.mean()),
        important_patch_ber=float(imp_errs / imp_bits) if imp_bits else float("nan"),
        seed=cfg.channel.seed,
        ber_maps={name: r.per_patch_ber.reshape(side, side) for name, r in reports.items()},
        reports=reports,
        reconstructions=recons,
    )


def run_pipeline(cfg: ExperimentConfig, write=True):
    """Evaluate every (mode, beta, SNR) cell; optionally write all artifacts.

    Returns ``(records, prepared)``. avg ignores beta, so it is evaluated once
    per SNR.
    """
    prep = prepare(cfg)
    records = []
    plan_rows = {}
    for mode in cfg.modes:
        betas = (0.0,) if mode == "avg" else cfg.beta_list
        for beta in betas:
            weights, plans = plans_for(prep, mode, beta)
            plan_rows[(mode, beta)] = (weights, plans)
            for snr in cfg.snr_db_list:
                records.append(run_cell(prep, mode, beta, snr, plans))
    if write:
        out = Path(cfg.output_dir)
        emit_reports(records, out, write_tensors=cfg.write_tensors)
        for (mode, beta), (weights, plans) in plan_rows.items():
            atomic_write(out / f"plan_{mode}_b{_tag(beta)}.csv", plan_csv(prep, weights, plans).encode())
        atomic_write(out / "match.json", (json.dumps(match_summary(prep), indent=2) + "\n").encode())
        if prep.warnings:
            atomic_write(out / "warnings.txt", "".join(w + "\n" for w in prep.warnings).encode())
    return records, prep


def plan_csv(prep: Prepared, weights, plans) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tile", "patch", "row", "col", "raw", "level", "power"])
    side = prep.cfg.grid.patches_per_side
    for tile, wt, plan in zip(prep.tiles, weights, plans):
        for i in range(len(plan.powers)):
            w.writerow([tile.name, i, i // side, i % side, _fmt(wt.raw[i]), int(plan.levels[i]), _fmt(plan.powers[i])])
    return buf.getvalue()


def match_summary(prep: Prepared) -> dict:
    m = prep.match
    return {
        "question": prep.cfg.question,
        "keywords": [{"phrase": k.text, "score": k.score, "tf": k.term_frequency} for k in prep.keywords],
        "match": None if m is None else {
            "label": m.matched_label, "keyword": m.keyword,
            "similarity": m.similarity, "boxes": [list(b) for b in m.matched_boxes],
        },
        "slice": None if prep.slice_spec is None else {
            "crop_box": list(prep.slice_spec.crop_box),
            "target_resolution": prep.slice_spec.target_resolution,
        },
        "token_count": prep.token_count,
        "important_patches": {t.name: int(t.important.sum()) for t in prep.tiles},
    }


def runs_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def emit_reports(records, directory, write_tensors=False):
    """Write runs.csv and the per-cell BER rasters (and tensors if asked)."""
    if not records:
        raise ValueError("no records to report")
    directory = Path(directory)
    try:
        for r in records:
            name = f"{r.mode}_b{_tag(r.beta)}_s{_tag(r.snr_db)}"
            for tile, ber in r.ber_maps.items():
                atomic_write(directory / tile / f"ber_{name}.hmap", encode_hmap(ber))
            if write_tensors:
                for tile, rec in r.reconstructions.items():
                    write_ftns(directory / tile / f"recon_{name}.ftns", rec.values, rec.v_max)
        atomic_write(directory / "runs.csv", runs_csv(records).encode())
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report: {exc.strerror}", exc.filename) from exc
    return directory / "runs.csv"
