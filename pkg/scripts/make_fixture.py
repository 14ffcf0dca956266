"""Regenerate the bundled offline fixture under src/fasemcom/data/fixture/.

The output is deterministic; rerunning it rewrites identical files.
"""
import json
from pathlib import Path

import numpy as np

from fasemcom.attnmap import spectral_residual
from fasemcom.formats import write_hmap
from fasemcom.scene import render_scene

OUT = Path(__file__).resolve().parents[1] / "src" / "fasemcom" / "data" / "fixture"

# semantic axes of the toy embedding space
AXES = ["vehicle", "text", "signal", "roadsign", "person", "weather",
        "direction", "color", "road", "large", "place", "motion"]

WORDS = {
    "car": {"vehicle": 1.0},
    "cars": {"vehicle": 1.0, "motion": 0.1},
    "vehicle": {"vehicle": 1.0, "large": 0.2},
    "truck": {"vehicle": 0.6, "large": 1.0},
    "bus": {"vehicle": 0.6, "large": 0.9, "place": 0.2},
    "van": {"vehicle": 0.8, "large": 0.5},
    "black": {"color": 1.0},
    "white": {"color": 1.0},
    "red": {"color": 0.9, "signal": 0.3},
    "green": {"color": 0.9, "signal": 0.3},
    "yellow": {"color": 0.9, "signal": 0.3},
    "color": {"color": 1.0},
    "license": {"text": 1.0, "vehicle": 0.3},
    "plate": {"text": 0.9, "vehicle": 0.4},
    "number": {"text": 0.8},
    "digits": {"text": 0.9},
    "traffic": {"road": 0.7, "signal": 0.4, "roadsign": 0.4},
    "light": {"signal": 1.0, "color": 0.3},
    "lights": {"signal": 1.0, "color": 0.3},
    "signal": {"signal": 1.0},
    "status": {"signal": 0.5, "motion": 0.3},
    "sign": {"roadsign": 1.0, "text": 0.3},
    "signs": {"roadsign": 1.0, "text": 0.3},
    "route": {"roadsign": 0.6, "road": 0.6, "place": 0.3},
    "exit": {"roadsign": 0.7, "road": 0.5},
    "lane": {"road": 1.0},
    "road": {"road": 1.0},
    "highway": {"road": 1.0, "large": 0.2},
    "ahead": {"direction": 1.0, "road": 0.2},
    "pedestrian": {"person": 1.0, "road": 0.2},
    "pedestrians": {"person": 1.0, "road": 0.2},
    "person": {"person": 1.0},
    "people": {"person": 1.0},
    "crosswalk": {"person": 0.6, "road": 0.7},
    "weather": {"weather": 1.0},
    "sky": {"weather": 0.9},
    "rain": {"weather": 1.0},
    "sunny": {"weather": 1.0},
    "front": {"direction": 1.0},
    "left": {"direction": 1.0},
    "right": {"direction": 1.0},
    "behind": {"direction": 1.0},
    "distance": {"direction": 0.6, "motion": 0.5},
    "speed": {"motion": 1.0},
    "limit": {"roadsign": 0.5, "motion": 0.6},
    "stop": {"roadsign": 0.6, "motion": 0.5},
    "current": {"motion": 0.4, "signal": 0.2},
    "end": {"direction": 0.4, "road": 0.3},
    "lake": {"place": 1.0},
    "city": {"place": 1.0},
}

SCENE = {
    "width": 672,
    "height": 672,
    "background": {"top": 0.62, "bottom": 0.38},
    "shapes": [
        {"bbox": [0, 420, 672, 672], "value": 0.30},       # road surface
        {"bbox": [20, 330, 170, 500], "value": 0.72},      # truck
        {"bbox": [60, 100, 220, 190], "value": 0.20},      # traffic sign
        {"bbox": [540, 80, 570, 200], "value": 0.08},      # traffic light housing
        {"bbox": [545, 90, 565, 115], "value": 0.95},      # lit lamp
        {"bbox": [236, 360, 436, 520], "value": 0.06},     # black car in front
        {"bbox": [301, 470, 371, 500], "value": 0.97},     # license plate
        {"bbox": [600, 380, 630, 520], "value": 0.55},     # pedestrian
    ],
    "noise": {"sigma": 0.02, "seed": 7},
}

DETECTIONS = [
    {"label": "car", "bbox": [236, 360, 436, 520], "confidence": 0.94},
    {"label": "license plate", "bbox": [301, 470, 371, 500], "confidence": 0.81},
    {"label": "traffic light", "bbox": [540, 80, 570, 200], "confidence": 0.88},
    {"label": "traffic sign", "bbox": [60, 100, 220, 190], "confidence": 0.90},
    {"label": "pedestrian", "bbox": [600, 380, 630, 520], "confidence": 0.77},
    {"label": "truck", "bbox": [20, 330, 170, 500], "confidence": 0.85},
]

QUESTIONS = [
    {"question": "What is the license plate number of the black car in front?", "label": "license plate"},
    {"question": "What color is the traffic light now?", "label": "traffic light"},
    {"question": "How many pedestrians are in front?", "label": "pedestrian"},
    {"question": "What is the exit number ahead according to the traffic sign?", "label": "traffic sign"},
    {"question": "What color is the truck on the left?", "label": "truck"},
]

CONFIG = {
    "question": QUESTIONS[0]["question"],
    "image_path": "scene.json",
    "detections_path": "detections.json",
    "heatmap_path": "heatmap.hmap",
    "embedding_path": "embeddings.txt",
    "alpha": 0.5,
    "L": 5,
    "beta_list": [0, 0.5, 1, 2, 4],
    "snr_db_list": [10, 12],
    "modes": ["fa", "avg", "obj_only", "sub_only"],
    "trials": 32,
    "grid": {"tile_resolution": 336, "patch_size": 14},
    "channel": {"m_f": 5, "m_s": 4, "p_total": 30, "bits_per_dim": 8, "dims_per_patch": 64, "seed": 2025},
}


def embeddings_text():
    rng = np.random.default_rng(50)
    lines = []
    for word, comp in WORDS.items():
        vec = np.array([comp.get(a, 0.0) for a in AXES]) + 0.05 * rng.standard_normal(len(AXES))
        lines.append(word + " " + " ".join(f"{x:.4f}" for x in vec))
    return "\n".join(lines) + "\n"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "embeddings.txt").write_text(embeddings_text(), encoding="utf-8", newline="\n")
    dump = lambda obj: json.dumps(obj, indent=2) + "\n"
    (OUT / "scene.json").write_text(dump(SCENE), encoding="utf-8", newline="\n")
    (OUT / "detections.json").write_text(dump(DETECTIONS), encoding="utf-8", newline="\n")
    (OUT / "questions.json").write_text(dump(QUESTIONS), encoding="utf-8", newline="\n")
    (OUT / "config.json").write_text(dump(CONFIG), encoding="utf-8", newline="\n")
    write_hmap(OUT / "heatmap.hmap", spectral_residual(render_scene(SCENE)))


if __name__ == "__main__":
    main()
