#!/usr/bin/env python3
"""Render the bundled smoke dataset: small synthetic face crops plus label maps.

Each face is drawn from a handful of ellipses (skin, hair, eyes, brows, nose,
mouth, neck) with smooth shading and mild noise so the images carry texture.
The label PNG stores the class index of every pixel.

Classes: 0 background, 1 skin, 2 hair, 3 eyes, 4 brows, 5 nose, 6 mouth, 7 neck.
"""
import argparse
import pathlib

import numpy as np
from PIL import Image, ImageDraw

NUM_CLASSES = 8


def render_face(rng, size):
    scale = 4  # supersample, then downsample with a box filter
    big = size * scale
    img = Image.new("RGB", (big, big))
    lab = Image.new("L", (big, big), 0)
    di, dl = ImageDraw.Draw(img), ImageDraw.Draw(lab)

    bg = tuple(int(v) for v in rng.integers(40, 200, 3))
    di.rectangle([0, 0, big, big], fill=bg)

    cx = big * (0.5 + rng.uniform(-0.05, 0.05))
    cy = big * (0.52 + rng.uniform(-0.04, 0.04))
    fw = big * rng.uniform(0.26, 0.32)
    fh = big * rng.uniform(0.33, 0.38)

    skin = np.array([rng.uniform(150, 240), rng.uniform(100, 190), rng.uniform(80, 160)])
    hair = np.array(rng.integers(10, 120, 3))

    def ell(draw_img, draw_lab, box, color, cls):
        draw_img.ellipse(box, fill=tuple(int(c) for c in color))
        draw_lab.ellipse(box, fill=cls)

    # neck and shoulders
    ell(di, dl, [cx - fw * 0.45, cy + fh * 0.5, cx + fw * 0.45, cy + fh * 1.9], skin * 0.85, 7)
    # hair behind the head
    ell(di, dl, [cx - fw * 1.15, cy - fh * 1.2, cx + fw * 1.15, cy + fh * 0.55], hair, 2)
    # face
    ell(di, dl, [cx - fw, cy - fh, cx + fw, cy + fh], skin, 1)
    # fringe
    fringe = rng.uniform(0.45, 0.7)
    ell(di, dl, [cx - fw * 1.05, cy - fh * 1.25, cx + fw * 1.05, cy - fh * fringe], hair, 2)

    eye_y = cy - fh * rng.uniform(0.1, 0.22)
    eye_dx = fw * rng.uniform(0.38, 0.48)
    eye_r = fw * rng.uniform(0.12, 0.16)
    iris = np.array(rng.integers(20, 140, 3))
    for sx in (-1, 1):
        ex = cx + sx * eye_dx
        ell(di, dl, [ex - eye_r * 1.4, eye_y - eye_r * 0.8, ex + eye_r * 1.4, eye_y + eye_r * 0.8],
            (245, 245, 240), 3)
        ell(di, dl, [ex - eye_r * 0.6, eye_y - eye_r * 0.6, ex + eye_r * 0.6, eye_y + eye_r * 0.6],
            iris, 3)
        by = eye_y - eye_r * 1.6
        ell(di, dl, [ex - eye_r * 1.6, by - eye_r * 0.3, ex + eye_r * 1.6, by + eye_r * 0.3],
            hair * 0.8, 4)

    nose_y = cy + fh * rng.uniform(0.08, 0.16)
    ell(di, dl, [cx - fw * 0.13, nose_y - fh * 0.14, cx + fw * 0.13, nose_y + fh * 0.1],
        skin * 0.8, 5)

    mouth_y = cy + fh * rng.uniform(0.42, 0.55)
    mw = fw * rng.uniform(0.3, 0.45)
    lips = np.array([rng.uniform(150, 220), rng.uniform(50, 100), rng.uniform(60, 110)])
    ell(di, dl, [cx - mw, mouth_y - fh * 0.07, cx + mw, mouth_y + fh * 0.07], lips, 6)

    img = img.resize((size, size), Image.BOX)
    lab = lab.resize((size, size), Image.NEAREST)

    arr = np.asarray(img).astype(np.float64)
    yy, xx = np.mgrid[0:size, 0:size] / size
    light = 1.0 + 0.18 * ((xx - 0.3) * rng.uniform(-1, 1) + (yy - 0.3) * rng.uniform(-1, 1))
    arr = arr * light[..., None] + rng.normal(0.0, 4.0, arr.shape)
    arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    return Image.fromarray(arr), lab


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/smoke")
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--train", type=int, default=8)
    ap.add_argument("--val", type=int, default=4)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    root = pathlib.Path(args.out)
    for split, count in (("train", args.train), ("val", args.val)):
        (root / split).mkdir(parents=True, exist_ok=True)
        (root / "labels" / split).mkdir(parents=True, exist_ok=True)
        names = []
        for i in range(count):
            img, lab = render_face(rng, args.size)
            name = f"face_{i:03d}.png"
            img.save(root / split / name)
            lab.save(root / "labels" / split / name)
            names.append(f"{split}/{name}")
        (root / f"{split}.txt").write_text("\n".join(names) + "\n")


if __name__ == "__main__":
    main()
