#!/usr/bin/env python3
"""Regenerate the shipped scenario files under scenarios/."""

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "scenarios"

RES = 0.05
W, H = 10.0, 8.0  # meters

INTRINSICS = {"f_x": 300.0, "f_y": 300.0, "c_x": 320.0, "c_y": 180.0,
              "width": 640, "height": 480}
CAMERA_HEIGHT = 0.7


def base_rows(walls=()):
    """Bordered free map with optional interior wall boxes (meters)."""
    nx, ny = int(W / RES), int(H / RES)
    rows = []
    for j in range(ny):                 # row 0 = top = max y
        y = H - (j + 0.5) * RES
        row = []
        for i in range(nx):
            x = (i + 0.5) * RES
            occupied = (
                x < RES or x > W - RES or y < RES or y > H - RES
                or any(x0 <= x <= x1 and y0 <= y <= y1 for x0, y0, x1, y1 in walls)
            )
            row.append("#" if occupied else ".")
        rows.append("".join(row))
    return rows


def chair(oid, cx, cy, color, size=0.3, height=0.9):
    h = size / 2
    return {
        "id": oid, "class": "chair", "attributes": [color],
        "footprint": [cx - h, cy - h, cx + h, cy + h], "height": height,
    }


def robot(x, y, theta):
    return {"pose": [x, y, theta], "camera_height": CAMERA_HEIGHT,
            "intrinsics": INTRINSICS, "radius": 0.25}


def write(name, doc):
    doc = {"schema_version": 1, "name": name, **doc}
    (OUT / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
    print("wrote", name)


def occluded_chairs():
    # Robot cannot see the pointed-at red chair from its start pose: a wall
    # band blocks the line of sight until the robot reaches the shared
    # perspective 1 m from the instructor along the pointing ray.
    walls = [(3.0, 4.0, 5.2, 4.2)]
    write("occluded_chairs", {
        "map": {"resolution": RES, "rows": base_rows(walls)},
        "objects": [chair("chair_red", 7.0, 5.5, "red"),
                    chair("chair_blue", 8.0, 4.4, "blue")],
        "instructors": [{
            "id": "guide", "base": [5.5, 2.0, math.pi],
            "point_target": [7.0, 5.5, 0.8], "gaze_target": [7.0, 5.5, 0.8],
        }],
        "robot": robot(2.0, 2.0, 0.0),
        "events": [{"t": 0.5, "instructor": "guide", "utterance": "the red chair"}],
        "seed": 7,
        "expected_target": "chair_red",
    })


def referral():
    write("referral", {
        "map": {"resolution": RES, "rows": base_rows()},
        "objects": [chair("chair_red", 7.5, 7.0, "red")],
        "instructors": [
            {"id": "first", "base": [5.0, 2.0, math.pi],
             "point_target": [5.0, 5.5, 1.0], "gaze_target": [5.0, 5.5, 1.0]},
            {"id": "third", "base": [5.0, 5.5, -math.pi / 2],
             "point_target": [7.5, 7.0, 0.8], "gaze_target": [7.5, 7.0, 0.8]},
        ],
        "robot": robot(2.0, 2.0, 0.0),
        "events": [
            {"t": 0.5, "instructor": "first",
             "utterance": "ask that person over there"},
            {"t": 1.0, "instructor": "third", "utterance": "the red chair"},
        ],
        "seed": 11,
        "expected_target": "chair_red",
    })


def foot_occluded():
    # Instructor so close that the foot-floor contact point projects below
    # the image; depth (and the whole episode) must fail.
    write("foot_occluded", {
        "map": {"resolution": RES, "rows": base_rows()},
        "objects": [chair("chair_red", 7.0, 5.5, "red")],
        "instructors": [{
            "id": "guide", "base": [2.55, 2.0, math.pi],
            "point_target": [7.0, 5.5, 0.8], "gaze_target": [7.0, 5.5, 0.8],
        }],
        "robot": robot(2.0, 2.0, 0.0),
        "events": [{"t": 0.5, "instructor": "guide", "utterance": "the red chair"}],
        "seed": 3,
        "expected_target": "chair_red",
    })


def far_instructor():
    # Instructor beyond the gaze-failure range: the pipeline degrades to the
    # body ray alone and flags the trace.
    write("far_instructor", {
        "map": {"resolution": RES, "rows": base_rows()},
        "objects": [chair("chair_red", 8.5, 6.5, "red")],
        "instructors": [{
            "id": "guide", "base": [8.0, 4.0, math.pi],
            "point_target": [8.5, 6.5, 0.8], "gaze_target": [8.5, 6.5, 0.8],
        }],
        "robot": robot(1.5, 4.0, 0.0),
        "events": [{"t": 0.5, "instructor": "guide", "utterance": "the red chair"}],
        "seed": 5,
        "expected_target": "chair_red",
    })


def office_pgm():
    # Same occluded layout but backed by a PGM + YAML sidecar, exercising
    # the map-server-compatible loader.
    import sys
    sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
    from gesturenav.grid import parse_inline_grid, save_pgm

    walls = [(3.0, 4.0, 5.2, 4.2)]
    grid = parse_inline_grid(base_rows(walls), RES)
    maps = OUT / "maps"
    maps.mkdir(exist_ok=True)
    save_pgm(grid, maps / "office.pgm", maps / "office.yaml")
    write("occluded_chairs_pgm", {
        "map": {"pgm": "maps/office.pgm", "meta": "maps/office.yaml"},
        "objects": [chair("chair_red", 7.0, 5.5, "red"),
                    chair("chair_blue", 8.0, 4.4, "blue")],
        "instructors": [{
            "id": "guide", "base": [5.5, 2.0, math.pi],
            "point_target": [7.0, 5.5, 0.8], "gaze_target": [7.0, 5.5, 0.8],
        }],
        "robot": robot(2.0, 2.0, 0.0),
        "events": [{"t": 0.5, "instructor": "guide", "utterance": "the red chair"}],
        "seed": 7,
        "expected_target": "chair_red",
    })


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    occluded_chairs()
    referral()
    foot_occluded()
    far_instructor()
    office_pgm()
