"""Parsing and formatting helpers for the JSON/CSV interfaces.

Matrices are JSON nested arrays (row-major, integer entries); rationals are
strings "p/q"; cover points are {"v": [x, y], "t": t}.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction

import numpy as np

from .errors import ValidationError


def parse_matrix(text_or_obj, size=None):
    obj = json.loads(text_or_obj) if isinstance(text_or_obj, str) else text_or_obj
    try:
        rows = tuple(tuple(int(x) for x in row) for row in obj)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"matrix must be a nested array of integers: {e}")
    if size is not None and (len(rows) != size or any(len(r) != size for r in rows)):
        raise ValidationError(f"expected a {size}x{size} matrix")
    return rows


def parse_int_vector(text_or_obj, size=2):
    obj = json.loads(text_or_obj) if isinstance(text_or_obj, str) else text_or_obj
    vec = tuple(int(x) for x in obj)
    if len(vec) != size:
        raise ValidationError(f"expected a vector of {size} integers")
    return vec


def parse_rational_vector(text_or_obj, size=None):
    obj = json.loads(text_or_obj) if isinstance(text_or_obj, str) else text_or_obj
    vec = tuple(Fraction(str(x)) for x in obj)
    if size is not None and len(vec) != size:
        raise ValidationError(f"expected a vector of {size} rationals")
    return vec


def fraction_str(x) -> str:
    f = Fraction(x)
    return f"{f.numerator}/{f.denominator}" if f.denominator != 1 else str(f.numerator)


def load_cocycle_csv(path):
    """Cocycle rows: v1, v2, t, m11..m33 [, step]; step defaults to identity."""
    points = []
    mats = []
    steps = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        has_step = header and header[-1] == "step"
        for row in reader:
            vals = [float(x) for x in row[:12]]
            points.append(vals[:3])
            mats.append(np.array(vals[3:12]).reshape(3, 3))
            if has_step:
                steps.append(int(row[12]))
    points = np.array(points)
    mats = np.array(mats)
    step = np.array(steps) if steps else np.arange(len(points))
    return points, mats, step


def save_cocycle_csv(path, cocycle):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["v1", "v2", "t"] + [f"m{i}{j}" for i in range(1, 4) for j in range(1, 4)] + ["step"])
        for p, m, s in zip(cocycle.points, cocycle.matrices, cocycle.step):
            writer.writerow(list(p) + list(m.ravel()) + [int(s)])
