"""File formats: images (via Pillow), CSV point sets, ASCII PLY clouds.

Images are exchanged as float arrays in [0, 1] with shape (h, w, bands);
grayscale files come back as (h, w, 1). CSV point sets use a header row
x1,...,xN,value. PLY files are ASCII with x,y,z float properties and
red,green,blue uchar properties; each point expands to three observations
(one per color channel, channel index as a fourth coordinate, value / 255).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "load_image",
    "save_image",
    "load_points_csv",
    "save_points_csv",
    "load_ply",
    "save_ply",
    "ply_to_observations",
]


def load_image(path: str | Path) -> np.ndarray:
    img = Image.open(path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def save_image(path: str | Path, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected (h, w, 1|3) image, got shape {arr.shape}")
    q = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    if q.shape[2] == 1:
        Image.fromarray(q[:, :, 0], mode="L").save(path)
    else:
        Image.fromarray(q, mode="RGB").save(path)


def load_points_csv(path: str | Path):
    """Returns (points (m, N), values (m,)) from a CSV with header
    x1,...,xN,value."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) < 2 or header[-1].strip() != "value":
            raise ValueError("expected header x1,...,xN,value")
        rows = [[float(c) for c in row] for row in reader if row]
    if not rows:
        raise ValueError(f"no data rows in {path}")
    data = np.asarray(rows, dtype=np.float64)
    if data.shape[1] != len(header):
        raise ValueError("row width does not match header")
    return data[:, :-1], data[:, -1]


def save_points_csv(path: str | Path, points: np.ndarray,
                    values: np.ndarray) -> None:
    points = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if points.ndim != 2 or values.shape != (points.shape[0],):
        raise ValueError("points must be (m, N) with matching values (m,)")
    header = [f"x{i + 1}" for i in range(points.shape[1])] + ["value"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for p, v in zip(points, values):
            writer.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def load_ply(path: str | Path):
    """Minimal ASCII PLY reader. Returns (xyz (m, 3), rgb (m, 3) uint8).
    Requires x,y,z float and red,green,blue uchar vertex properties."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    if not lines or lines[0] != "ply":
        raise ValueError(f"{path} is not a PLY file")
    n_vertex = None
    props = []
    i = 1
    ascii_fmt = False
    while i < len(lines):
        ln = lines[i]
        i += 1
        if ln.startswith("format"):
            ascii_fmt = "ascii" in ln
        elif ln.startswith("element vertex"):
            n_vertex = int(ln.split()[-1])
        elif ln.startswith("element"):
            raise ValueError(f"unsupported PLY element: {ln}")
        elif ln.startswith("property"):
            props.append(ln.split()[-1])
        elif ln == "end_header":
            break
    else:
        raise ValueError("PLY header has no end_header")
    if not ascii_fmt:
        raise ValueError("only ASCII PLY is supported")
    if n_vertex is None:
        raise ValueError("PLY header has no vertex element")
    needed = ["x", "y", "z", "red", "green", "blue"]
    try:
        cols = [props.index(name) for name in needed]
    except ValueError:
        raise ValueError(f"PLY must have properties {needed}, got {props}")
    body = lines[i:i + n_vertex]
    if len(body) < n_vertex:
        raise ValueError("PLY body shorter than declared vertex count")
    data = np.asarray([[float(c) for c in ln.split()] for ln in body])
    if data.shape[1] != len(props):
        raise ValueError("PLY row width does not match declared properties")
    xyz = data[:, cols[:3]].astype(np.float64)
    rgb = data[:, cols[3:]].astype(np.uint8)
    return xyz, rgb


def save_ply(path: str | Path, xyz: np.ndarray, rgb: np.ndarray) -> None:
    """rgb may be float in [0, 1] or uint8."""
    xyz = np.asarray(xyz, dtype=np.float64)
    rgb = np.asarray(rgb)
    if xyz.ndim != 2 or xyz.shape[1] != 3 or rgb.shape != xyz.shape:
        raise ValueError("xyz and rgb must both be (m, 3)")
    if rgb.dtype != np.uint8:
        rgb = np.clip(np.rint(np.asarray(rgb, dtype=np.float64) * 255.0),
                      0, 255).astype(np.uint8)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {xyz.shape[0]}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property uchar red\nproperty uchar green\n"
                 "property uchar blue\n")
        fh.write("end_header\n")
        for p, c in zip(xyz, rgb):
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r} "
                     f"{int(c[0])} {int(c[1])} {int(c[2])}\n")


def ply_to_observations(xyz: np.ndarray, rgb: np.ndarray):
    """Expand a colored cloud into scalar observations: each point yields
    three rows (x, y, z, channel) -> intensity/255, channel in {0, 1, 2}."""
    xyz = np.asarray(xyz, dtype=np.float64)
    vals = np.asarray(rgb, dtype=np.float64)
    if vals.max() > 1.0:
        vals = vals / 255.0
    m = xyz.shape[0]
    pts = np.empty((3 * m, 4))
    out = np.empty(3 * m)
    for ch in range(3):
        pts[ch * m:(ch + 1) * m, :3] = xyz
        pts[ch * m:(ch + 1) * m, 3] = float(ch)
        out[ch * m:(ch + 1) * m] = vals[:, ch]
    return pts, out
