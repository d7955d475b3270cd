#!/usr/bin/env python3
"""Regenerates fixtures/synthetic: a 4x3 street grid, a 1 Hz GPS drive, an
image index, detector output and tiny placeholder JPEGs.

Output is deterministic for a given seed.
"""
import argparse
import json
import math
import random
from pathlib import Path

from PIL import Image

LAT0, LON0 = 34.6900, 135.1950
DLAT, DLON = 0.0010, 0.0012
COLS, ROWS = 4, 3
SPEED = 8.0  # m/s
R = 6371008.8
LABELS = ["D00", "D10", "D20", "D40"]


def node_id(r, c):
    return 1000 + r * 10 + c


def pos(r, c):
    return LAT0 + r * DLAT, LON0 + c * DLON


def haversine(a, b):
    la1, lo1, la2, lo2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = math.sin((la2 - la1) / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2
    return 2 * R * math.asin(math.sqrt(h))


def write_osm(path):
    out = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6" generator="make_fixture">']
    for r in range(ROWS):
        for c in range(COLS):
            lat, lon = pos(r, c)
            out.append(f'  <node id="{node_id(r, c)}" lat="{lat:.7f}" lon="{lon:.7f}"/>')
    # Off-grid nodes for ways the filters must drop.
    out.append(f'  <node id="2001" lat="{LAT0 - 0.0004:.7f}" lon="{LON0:.7f}"/>')
    out.append(f'  <node id="2002" lat="{LAT0 - 0.0004:.7f}" lon="{LON0 + DLON:.7f}"/>')
    out.append(f'  <node id="2003" lat="{LAT0 - 0.0004:.7f}" lon="{LON0 + 2 * DLON:.7f}"/>')
    way = 100

    def add_way(refs, tags):
        nonlocal way
        out.append(f'  <way id="{way}">')
        out.extend(f'    <nd ref="{x}"/>' for x in refs)
        out.extend(f'    <tag k="{k}" v="{v}"/>' for k, v in tags.items())
        out.append("  </way>")
        way += 1

    streets = ["Hama-dori", "Naka-dori", "Yama-dori"]
    for r in range(ROWS):
        tags = {"highway": "tertiary" if r == 0 else "residential", "name": streets[r]}
        if r == 1:
            tags["oneway"] = "yes"
        add_way([node_id(r, c) for c in range(COLS)], tags)
    for c in range(COLS):
        tags = {"highway": "residential"}
        if c == 0:
            tags["name"] = "Nishi-suji"
        if c == 2:
            tags["oneway"] = "-1"
        add_way([node_id(r, c) for r in range(ROWS)], tags)
    add_way([2001, 2002, 2003], {"highway": "footway", "name": "Promenade"})
    add_way([2001, 2002, 1001, 1000, 2001], {"building": "yes"})
    out.append("</osm>")
    path.write_text("\n".join(out) + "\n")


def drive_route():
    # Row 0 east, column 3 north, row 2 west, column 0 south, then row 1 east
    # and column 2 back down (column 2 is one-way southbound).
    cells = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 3), (2, 3), (2, 2), (2, 1), (2, 0), (1, 0), (0, 0)]
    cells += [(1, 0), (1, 1), (1, 2), (0, 2)]
    return [pos(r, c) for r, c in cells]


def sample(route, s):
    for a, b in zip(route, route[1:]):
        d = haversine(a, b)
        if s <= d:
            f = s / d
            return a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])
        s -= d
    return route[-1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures" / "synthetic"))
    ap.add_argument("--seed", type=int, default=2021)
    args = ap.parse_args()
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)

    write_osm(out / "map.osm")

    route = drive_route()
    length = sum(haversine(a, b) for a, b in zip(route, route[1:]))
    duration = length / SPEED
    t0 = 1_600_000_000.0
    m_lat = math.radians(1) * R
    m_lon = m_lat * math.cos(math.radians(LAT0))
    rows = ["t,lat,lon"]
    for k in range(int(duration) + 1):
        lat, lon = sample(route, k * SPEED)
        lat += rng.gauss(0, 1.5) / m_lat
        lon += rng.gauss(0, 1.5) / m_lon
        rows.append(f"{t0 + k:.1f},{lat:.7f},{lon:.7f}")
    (out / "gps.csv").write_text("\n".join(rows) + "\n")

    images = ["image_id,t"]
    dets = []
    n = 0
    k = 0
    while 0.75 * k < duration:
        iid = f"img_{k:04d}"
        images.append(f"{iid},{t0 + 0.75 * k:.2f}")
        shade = rng.randrange(90, 170)
        Image.new("RGB", (32, 24), (shade, shade, shade)).save(out / "images" / f"{iid}.jpg", quality=60)
        if rng.random() < 0.35:
            for _ in range(rng.choice([1, 1, 2])):
                n += 1
                x0, y0 = rng.randrange(0, 560), rng.randrange(240, 420)
                dets.append({
                    "damage_id": f"d{n:04d}",
                    "image_id": iid,
                    "label": rng.choice(LABELS),
                    "bbox": [x0, y0, x0 + rng.randrange(20, 80), y0 + rng.randrange(10, 60)],
                    "score": round(rng.uniform(0.3, 0.95), 3),
                })
        k += 1
    (out / "images.csv").write_text("\n".join(images) + "\n")
    (out / "detections.jsonl").write_text("".join(json.dumps(d) + "\n" for d in dets))

    config = {
        "paths": {
            "osm": "map.osm",
            "gps_csv": "gps.csv",
            "image_index": "images.csv",
            "detections": "detections.jsonl",
            "images_dir": "images",
            "output_dir": "out",
        },
        "highway": ["tertiary", "residential"],
        "sigma_s": 2.0,
        "min_spacing_m": 10.0,
        "max_dist_m": 25.0,
        "turn_penalties": {"straight": 0, "right": 1, "left": 2, "u_turn": 10},
        "nav_speed_s_per_m": 0.09,
        "maint_s_per_m": 60,
        "exact_limit": 20,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
