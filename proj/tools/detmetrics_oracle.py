#!/usr/bin/env python3
"""Brute-force detection-metrics oracle and golden-fixture generator.

Writes a small dataset (manifest.json + label files), a predictions file and
the expected report into tests/fixtures/eval. The oracle shares no code with
the C++ implementation: every precision/recall value is recomputed from
scratch at each rank.

    python3 tools/detmetrics_oracle.py [--out tests/fixtures/eval]
"""

import argparse
import json
import random
from pathlib import Path

SEED = 20240917
PATCH = 64
IOUS = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95]
CONFS = [0.25, 0.50, 0.75]


def iou(a, b):
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)


def ranked(dets):
    # Python's sort is stable: equal confidences keep input order.
    return sorted(range(len(dets)), key=lambda i: -dets[i]["confidence"])


def match(dets, gts, thr):
    """Per-detection (is_tp, iou) with greedy matching inside each image."""
    out = [(False, 0.0)] * len(dets)
    taken = set()
    for i in ranked(dets):
        best, best_v = None, None
        for j, g in enumerate(gts):
            if j in taken or g["image_id"] != dets[i]["image_id"]:
                continue
            v = iou(dets[i]["bbox"], g["bbox"])
            if v >= thr and (best is None or v > best_v):
                best, best_v = j, v
        if best is not None:
            taken.add(best)
            out[i] = (True, best_v)
    return out


def ap(dets, gts, thr):
    m = match(dets, gts, thr)
    order = ranked(dets)
    curve = []
    for k in range(len(order)):
        tp = sum(1 for r in order[: k + 1] if m[r][0])
        rec = tp / len(gts) if gts else 0.0
        curve.append([dets[order[k]]["confidence"], tp / (k + 1), rec])
    if not gts:
        return (0.0, 0.0, curve) if dets else (None, None, curve)
    total = 0.0
    for lvl in range(101):
        total += max([p for _, p, r in curve if r >= lvl / 100.0], default=0.0)
    area, prev = 0.0, 0.0
    for k, (_, _, r) in enumerate(curve):
        env = max(p for _, p, _ in curve[k:])
        area += (r - prev) * env
        prev = r
    return total / 101.0, area, curve


def rates(conf, tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return {"confidence": conf, "tp": tp, "fp": fp, "fn": fn, "precision": p, "recall": r, "f1": f1}


def report(dets, gts, class_names):
    classes, totals = [], [[0, 0, 0] for _ in CONFS]
    tp_all = fp_all = fn_all = 0
    ious = []
    for cid in sorted(class_names):
        d = [x for x in dets if x["class_id"] == cid]
        g = [x for x in gts if x["class_id"] == cid]
        aps = [ap(d, g, t) for t in IOUS]
        ops = []
        base = match(d, g, 0.5)
        ntp = sum(1 for t, _ in base if t)
        tp_all += ntp
        fp_all += len(d) - ntp
        fn_all += len(g) - ntp
        ious += [v for t, v in base if t]
        for k, c in enumerate(CONFS):
            kept = [x for x in d if x["confidence"] >= c]
            tp = sum(1 for t, _ in match(kept, g, 0.5) if t)
            ops.append(rates(c, tp, len(kept) - tp, len(g) - tp))
            totals[k][0] += tp
            totals[k][1] += len(kept) - tp
            totals[k][2] += len(g) - tp
        classes.append({
            "class_id": cid, "name": class_names[cid], "n_gt": len(g), "n_det": len(d),
            "ap": [a[0] for a in aps], "ap_all_point": [a[1] for a in aps],
            "pr_curve_iou50": aps[0][2], "operating_points": ops,
        })

    def mean(vals):
        vals = [v for v in vals if v is not None]
        return sum(vals) / len(vals) if vals else 0.0

    def across(v):
        return None if v[0] is None else sum(v) / len(v)

    return {
        "iou_thresholds": IOUS, "confidence_thresholds": CONFS,
        "mAP50": mean(c["ap"][0] for c in classes),
        "mAP50_95": mean(across(c["ap"]) for c in classes),
        "AP95": mean(c["ap"][-1] for c in classes),
        "mAP50_all_point": mean(c["ap_all_point"][0] for c in classes),
        "mAP50_95_all_point": mean(across(c["ap_all_point"]) for c in classes),
        "AP95_all_point": mean(c["ap_all_point"][-1] for c in classes),
        "mean_tp_iou": sum(ious) / len(ious) if ious else 0.0,
        "counts": {"tp": tp_all, "fp": fp_all, "fn": fn_all},
        "operating_points": [rates(c, *totals[k]) for k, c in enumerate(CONFS)],
        "classes": classes,
    }


def main():
    ap_ = argparse.ArgumentParser()
    ap_.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests/fixtures/eval"))
    out = Path(ap_.parse_args().out)
    rng = random.Random(SEED)
    # Class 2 has detections but no ground truth; class 3 has neither.
    class_names = {0: "vessel_small", 1: "vessel_large", 2: "decoy", 3: "unused"}

    tiles, gts, dets = [], [], []
    for t in range(8):
        image_id = f"fx_{t:05d}"
        split = "test" if t >= 6 else "train"
        lines = []
        for _ in range(rng.randint(0, 5)):
            c = rng.randint(0, 1)
            w, h = rng.uniform(4, 20), rng.uniform(4, 20)
            cx, cy = rng.uniform(w / 2, PATCH - w / 2), rng.uniform(h / 2, PATCH - h / 2)
            lines.append(f"{c} {cx / PATCH:.6f} {cy / PATCH:.6f} {w / PATCH:.6f} {h / PATCH:.6f}")
        (out / "labels" / split).mkdir(parents=True, exist_ok=True)
        (out / "labels" / split / f"{image_id}.txt").write_text("".join(s + "\n" for s in lines))
        tiles.append({"image": f"images/{split}/{image_id}.png", "label": f"labels/{split}/{image_id}.txt",
                      "split": split})
        for s in lines:
            c, cx, cy, w, h = s.split()
            cx, cy, w, h = float(cx), float(cy), float(w), float(h)
            box = [(cx - w / 2) * PATCH, (cy - h / 2) * PATCH, (cx + w / 2) * PATCH, (cy + h / 2) * PATCH]
            gts.append({"image_id": image_id, "class_id": int(c), "bbox": box})
            for _ in range(rng.choice([0, 1, 1, 2])):
                j = [rng.uniform(-2, 2) for _ in range(4)]
                b = [box[0] + j[0], box[1] + j[1], box[2] + j[2], box[3] + j[3]]
                if b[0] < b[2] and b[1] < b[3]:
                    dets.append({"image_id": image_id, "class_id": int(c) if rng.random() < 0.9 else 1 - int(c),
                                 "confidence": round(rng.random(), 2), "bbox": b})
        for _ in range(rng.randint(0, 2)):
            x, y = rng.uniform(0, 50), rng.uniform(0, 50)
            dets.append({"image_id": image_id, "class_id": rng.choice([0, 1, 2]), "confidence": round(rng.random(), 2),
                         "bbox": [x, y, x + rng.uniform(3, 12), y + rng.uniform(3, 12)]})

    dets.append({"image_id": "fx_00006", "class_id": 2, "confidence": 0.6, "bbox": [10.0, 10.0, 20.0, 18.0]})

    manifest = {"format": "yolo", "patch_size": PATCH, "label_decimals": 6,
                "class_map": {str(k): v for k, v in class_names.items()}, "tiles": tiles}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    with open(out / "pred.jsonl", "w") as f:
        for d in dets:
            f.write(json.dumps(d) + "\n")
    (out / "golden_report.json").write_text(json.dumps(report(dets, gts, class_names), indent=2) + "\n")
    test_ids = {t["image"].split("/")[-1][:-4] for t in tiles if t["split"] == "test"}
    golden_test = report([d for d in dets if d["image_id"] in test_ids],
                         [g for g in gts if g["image_id"] in test_ids], class_names)
    (out / "golden_report_test.json").write_text(json.dumps(golden_test, indent=2) + "\n")


if __name__ == "__main__":
    main()
