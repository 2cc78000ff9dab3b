# Copyright 2026 The rccpath Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


"""Builds the two-slide pipeline fixture and its expected reports.

The expected reports are computed here in straight-line Python from the
fixture definition, without calling the engine. Run from the repository root:

    python3 tools/make_golden.py tests/golden/pipeline
"""

import hashlib
import json
import math
import struct
import sys
import zlib
from pathlib import Path

WHITE = (255, 255, 255)
PINK = (200, 100, 150)
HAZE = (245, 245, 245)

TIMESTAMP = "2026-01-01T00:00:00Z"
ENGINE_VERSION = "0.1.0"

# Detection runs at level 1 (20x of a 40x scan): 32 px patches, 16 px mask
# cells. Subtype and grade re-grid the tumor region with 64 px patches.
DET_PATCH = 32
REGION_PATCH = 64
MASK_STRIDE = 16
OD_THRESHOLD = 0.15
MIN_TISSUE = 0.5
MIN_OVERLAP = 0.5
LOW, HIGH, THRESHOLD = 0.2, 0.8, 0.5
G4_THRESHOLD, G4_OVERRIDE = 0.5, 0.05
MPP0 = 0.25

SLIDES = [
    {
        "case_id": "case-a",
        "slide_id": "slide-1",
        "labels": {"subtype": "pRCC", "isup_grade": 2},
        "size": (512, 512),
        "rects": [((64, 64, 448, 384), PINK), ((448, 0, 512, 64), HAZE)],
        "manifest_mpp": None,
    },
    {
        "case_id": "case-b",
        "slide_id": "slide-2",
        "labels": None,
        "size": (1024, 512),
        "rects": [((640, 128, 960, 448), PINK)],
        "manifest_mpp": 0.25,
    },
]

# Tumor probabilities keyed by (level, x, y). Off-table reads get 0.1.
TUMOR_DEFAULT = 0.1
TUMOR = {}
for col in range(2, 6):
    for row in range(2, 5):
        TUMOR[(1, col * 32, row * 32)] = 0.95
TUMOR[(1, 192, 96)] = 0.6            # band: magnification says no, neighbors say no
TUMOR[(0, 2 * 192 + 16, 2 * 96 + 16)] = 0.2
TUMOR[(1, 32, 128)] = 0.3            # band: magnification and neighbors say yes
TUMOR[(0, 2 * 32 + 16, 2 * 128 + 16)] = 0.9
for (dx, dy), p in zip([(-16, -16), (16, -16), (-16, 16), (16, 16)], [0.9, 0.9, 0.8, 0.1]):
    TUMOR[(1, 32 + dx, 128 + dy)] = p
for col in range(12, 14):
    for row in range(3, 6):
        TUMOR[(1, col * 32, row * 32)] = 0.85
TUMOR[(1, 448, 192)] = 0.5           # band: rotation median 0.5 is tumor, the others are not

SUBTYPE_DEFAULT = [0.5, 0.3, 0.2]
SUBTYPE = {
    (1, 64, 64): [0.1, 0.8, 0.1],
    (1, 128, 64): [0.2, 0.7, 0.1],
    (1, 64, 128): [0.6, 0.3, 0.1],
    (1, 128, 128): [0.3, 0.3, 0.4],
}
G4_DEFAULT = 0.1
G4 = {(1, 64, 64): 0.9, (1, 128, 64): 0.2, (1, 64, 128): 0.1, (1, 128, 128): 0.3}
GRADE_DEFAULT = [0.3, 0.4, 0.3]
GRADE = {
    (1, 128, 64): [0.2, 0.6, 0.2],
    (1, 64, 128): [0.3, 0.5, 0.2],
    (1, 128, 128): [0.5, 0.3, 0.2],
}


def png_bytes(width, height, pixel):
    raw = bytearray()
    for y in range(height):
        raw.append(0)
        for x in range(width):
            raw.extend(pixel(x, y))

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    header = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header) +
            chunk(b"IDAT", zlib.compress(bytes(raw), 9)) + chunk(b"IEND", b""))


def slide_pixel(slide):
    def pixel(x, y):
        for (x0, y0, x1, y1), color in slide["rects"]:
            if x0 <= x < x1 and y0 <= y < y1:
                return color
        return WHITE
    return pixel


def level_image(slide, level):
    w, h = slide["size"]
    img = [[slide_pixel(slide)(x, y) for x in range(w)] for y in range(h)]
    for _ in range(level):
        h2, w2 = (h + 1) // 2, (w + 1) // 2
        out = []
        for y in range(h2):
            row = []
            for x in range(w2):
                block = [img[yy][xx] for yy in (2 * y, 2 * y + 1) for xx in (2 * x, 2 * x + 1)
                         if yy < h and xx < w]
                n = len(block)
                row.append(tuple((sum(p[c] for p in block) * 2 + n) // (2 * n) for c in range(3)))
            out.append(row)
        img, w, h = out, w2, h2
    return img


def od(v):
    return -math.log10((v + 1) / 256.0)


def detection_grid(slide):
    img = level_image(slide, 1)
    h, w = len(img), len(img[0])
    cols, rows = -(-w // MASK_STRIDE), -(-h // MASK_STRIDE)
    tissue = set()
    for r in range(rows):
        for c in range(cols):
            px = [img[y][x] for y in range(r * MASK_STRIDE, min(h, (r + 1) * MASK_STRIDE))
                  for x in range(c * MASK_STRIDE, min(w, (c + 1) * MASK_STRIDE))]
            mean = sum(od(p[0]) + od(p[1]) + od(p[2]) for p in px) / (3 * len(px))
            if mean >= OD_THRESHOLD:
                tissue.add((c, r))
    grid = []
    for r in range(-(-h // DET_PATCH)):
        for c in range(-(-w // DET_PATCH)):
            covered = 0
            for y in range(r * DET_PATCH, min(h, (r + 1) * DET_PATCH)):
                for x in range(c * DET_PATCH, min(w, (c + 1) * DET_PATCH)):
                    covered += (x // MASK_STRIDE, y // MASK_STRIDE) in tissue
            if covered / (DET_PATCH * DET_PATCH) >= MIN_TISSUE:
                grid.append((c * DET_PATCH, r * DET_PATCH))
    return grid, (w, h)


def p_tumor(key):
    return TUMOR.get(key, TUMOR_DEFAULT)


def tumor_call(x, y):
    """Returns (is_tumor, triaged) for the level-1 patch at (x, y)."""
    p = p_tumor((1, x, y))
    if not LOW < p < HIGH:
        return p >= THRESHOLD, False
    s = DET_PATCH // 2
    votes = [
        p >= THRESHOLD,  # every dihedral variant reads the same table entry
        p_tumor((0, 2 * x + s, 2 * y + s)) >= THRESHOLD,
        sum(p_tumor((1, x + dx, y + dy)) for dx, dy in [(-s, -s), (s, -s), (-s, s), (s, s)]) / 4 >= THRESHOLD,
    ]
    return sum(votes) >= 2, True


def region_cells(tumor_rects, level_size):
    w, h = level_size
    out = []
    for r in range(-(-h // REGION_PATCH)):
        for c in range(-(-w // REGION_PATCH)):
            x0, y0 = c * REGION_PATCH, r * REGION_PATCH
            area = 0
            for tx, ty in tumor_rects:
                ox = min(x0 + REGION_PATCH, tx + DET_PATCH) - max(x0, tx)
                oy = min(y0 + REGION_PATCH, ty + DET_PATCH) - max(y0, ty)
                if ox > 0 and oy > 0:
                    area += ox * oy
            if area >= MIN_OVERLAP * REGION_PATCH * REGION_PATCH:
                out.append((x0, y0))
    return out


def area_of(size, mpp):
    side = size * mpp / 1000.0
    return side * side


def argmax(v):
    best = 0
    for i in range(1, len(v)):
        if v[i] > v[best]:
            best = i
    return best


def expected_report(slide, versions, digest):
    grid, level_size = detection_grid(slide)
    calls = [tumor_call(x, y) for x, y in grid]
    tumor_rects = [xy for xy, (t, _) in zip(grid, calls) if t]
    tissue_n, tumor_n = len(grid), len(tumor_rects)
    triaged_n = sum(1 for _, tr in calls if tr)
    mpp = 2 * MPP0
    patch_area = area_of(DET_PATCH, mpp)

    cells = region_cells(tumor_rects, level_size)
    region_area = area_of(REGION_PATCH, mpp)
    labels = ["ccRCC", "pRCC", "chRCC"]
    counts, winning = [0, 0, 0], [[], [], []]
    for x, y in cells:
        probs = SUBTYPE.get((1, x, y), SUBTYPE_DEFAULT)
        k = argmax(probs)
        counts[k] += 1
        winning[k].append(probs[k])
    means = [math.fsum(w) / len(w) if w else 0.0 for w in winning]
    best = 0
    for k in (1, 2):
        if counts[k] > counts[best] or (counts[k] == counts[best] and means[k] > means[best]):
            best = k
    subtype = {
        "per_label": [{"label": labels[k], "patch_count": counts[k], "proportion": counts[k] / len(cells),
                       "area_mm2": counts[k] * region_area, "mean_probability": means[k]} for k in range(3)],
        "tumor_patch_count": len(cells),
        "slide_label": labels[best],
        "slide_confidence": means[best],
        "patch_area_mm2": region_area,
    }

    g4n, kept = 0, []
    for x, y in cells:
        if G4.get((1, x, y), G4_DEFAULT) >= G4_THRESHOLD:
            g4n += 1
        else:
            kept.append(GRADE.get((1, x, y), GRADE_DEFAULT))
    f = g4n / len(cells)
    mean123 = [math.fsum(v[k] for v in kept) / len(kept) if kept else 0.0 for k in range(3)]
    raw = [mean123[0] * (1.0 - f), mean123[1] * (1.0 - f), mean123[2] * (1.0 - f), f]
    total = raw[0] + raw[1] + raw[2] + raw[3]
    grade_value = 4 if (f >= G4_OVERRIDE or not kept) else 1 + argmax(mean123)
    grade = {"patch_count": len(cells), "g4_count": g4n, "g4_fraction": f, "mean_probs_g123": mean123,
             "grade_percentages": [v / total for v in raw], "slide_grade": grade_value}

    report = {
        "schema_version": 1,
        "case": {"id": slide["case_id"]},
        "slide": {"id": slide["slide_id"], "review_flags": []},
        "metrics": {
            "tissue_area_mm2": tissue_n * patch_area,
            "tumor_area_mm2": tumor_n * patch_area,
            "tumor_fraction": tumor_n / tissue_n,
            "tissue_patch_count": tissue_n,
            "tumor_patch_count": tumor_n,
            "patch_area_mm2": patch_area,
            "triaged_patch_count": triaged_n,
            "trigger_rate": triaged_n / tissue_n,
        },
        "subtype": subtype,
        "grade": grade,
        "artifacts": {name: name_file for name, name_file in [
            ("thumbnail", "thumbnail.png"), ("tumor_heatmap", "tumor_heatmap.png"),
            ("subtype_heatmap", "subtype_heatmap.png"), ("grade_heatmap", "grade_heatmap.png"),
            ("patch_records", "patches.jsonl"), ("triage_audit", "triage_audit.jsonl")]},
        "provenance": {"model_versions": versions, "config_digest": digest,
                       "engine_version": ENGINE_VERSION, "timestamp": TIMESTAMP, "seed": 0},
    }
    if slide["labels"]:
        ref_sub, ref_grade = slide["labels"]["subtype"], slide["labels"]["isup_grade"]
        report["ground_truth_comparison"] = {
            "subtype_reference": ref_sub, "subtype_predicted": labels[best],
            "subtype_match": ref_sub == labels[best],
            "grade_reference": ref_grade, "grade_predicted": grade_value,
            "grade_match": ref_grade == grade_value,
        }
    return report


def lookup_files(name, task, table, default, as_pair):
    lines = []
    for (level, x, y), v in sorted(table.items()):
        values = [1.0 - v, v] if as_pair else v
        lines.append(json.dumps({"level": level, "values": values, "x": x, "y": y},
                                sort_keys=True, separators=(",", ":")))
    fixture = ("\n".join(lines) + "\n").encode()
    desc = {"backend": "lookup_table", "task": task, "input_size": None, "expected_mpp": 0.5,
            "fixture": name + ".jsonl", "default_values": [1.0 - default, default] if as_pair else default}
    return desc, fixture


CONFIG = f"""[paths]
store = "store"
output = "out"
tumor_model = "models/tumor2.json"
subtype_model = "models/subtype3.json"
g4_model = "models/g4_binary.json"
grade_model = "models/grade3.json"

[detection]
patch_size = {DET_PATCH}
magnification = 20.0
mask_stride = {MASK_STRIDE}

[subtype]
patch_size = {REGION_PATCH}
magnification = 20.0

[grade]
patch_size = {REGION_PATCH}
magnification = 20.0

[render]
thumbnail_max_dim = 512

[run]
tile_size = 64
report_timestamp = "{TIMESTAMP}"
"""


def settings_digest():
    settings = {
        "detection": {"patch_size": DET_PATCH, "magnification": 20.0, "tissue_od_threshold": OD_THRESHOLD,
                      "mask_stride": MASK_STRIDE, "min_tissue_fraction": MIN_TISSUE},
        "subtype": {"patch_size": REGION_PATCH, "magnification": 20.0, "min_tumor_overlap": MIN_OVERLAP},
        "grade": {"patch_size": REGION_PATCH, "magnification": 20.0, "min_tumor_overlap": MIN_OVERLAP,
                  "g4_threshold": G4_THRESHOLD, "g4_override": G4_OVERRIDE},
        "triage": {"low": LOW, "high": HIGH, "decision_threshold": THRESHOLD, "magnification_factor": 2,
                   "rotation_flip": True, "magnification": True, "neighbor": True},
        "stain": {"beta": 0.15, "alpha": 1.0, "concentration_percentile": 99.0, "min_stained_pixels": 100,
                  "min_stain_separation_deg": 3.0},
        "render": {"alpha": 0.4, "thumbnail_max_dim": 512, "heatmaps": True},
        "run": {"seed": 0, "report_timestamp": TIMESTAMP, "tile_size": 64, "patch_records": True},
    }
    text = json.dumps(settings, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def main(out):
    out = Path(out)
    (out / "models").mkdir(parents=True, exist_ok=True)
    (out / "slides").mkdir(exist_ok=True)
    versions = {}
    models = [("tumor2", "tumor2", TUMOR, TUMOR_DEFAULT, True, DET_PATCH),
              ("subtype3", "subtype3", SUBTYPE, SUBTYPE_DEFAULT, False, REGION_PATCH),
              ("g4_binary", "g4binary", G4, G4_DEFAULT, True, REGION_PATCH),
              ("grade3", "grade3", GRADE, GRADE_DEFAULT, False, REGION_PATCH)]
    for name, task, table, default, as_pair, size in models:
        desc, fixture = lookup_files(name, task, table, default, as_pair)
        desc["input_size"] = size
        desc_bytes = (json.dumps(desc, sort_keys=True, indent=2) + "\n").encode()
        (out / "models" / (name + ".json")).write_bytes(desc_bytes)
        (out / "models" / (name + ".jsonl")).write_bytes(fixture)
        versions[name] = hashlib.sha256(desc_bytes + fixture).hexdigest()
    (out / "config.toml").write_text(CONFIG)

    cases = {}
    for s in SLIDES:
        w, h = s["size"]
        (out / "slides" / (s["slide_id"] + ".png")).write_bytes(png_bytes(w, h, slide_pixel(s)))
        case = cases.setdefault(s["case_id"], {"case_id": s["case_id"], "source": "synthetic", "slides": []})
        if s["labels"]:
            case["labels"] = s["labels"]
        entry = {"slide_id": s["slide_id"], "image": "slides/" + s["slide_id"] + ".png"}
        if s["manifest_mpp"] is not None:
            entry["mpp"] = s["manifest_mpp"]
            entry["magnification"] = 40.0
        case["slides"].append(entry)
    (out / "manifest.json").write_text(json.dumps({"cases": list(cases.values())}, indent=2) + "\n")

    digest = settings_digest()
    for s in SLIDES:
        target = out / "expected" / s["case_id"] / s["slide_id"]
        target.mkdir(parents=True, exist_ok=True)
        report = expected_report(s, versions, digest)
        (target / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/golden/pipeline")
