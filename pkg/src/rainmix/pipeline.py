"""Deterministic batch synthesis and batch evaluation.

Samples are independent work units: every per-sample seed is derived from
the global seed and the filename stem with a stable 64-bit FNV-1a hash, so
output bytes do not depend on worker count or scheduling. The manifest is
JSON Lines, one stem-sorted record per sample, written after all workers
finish.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .fileio import ImageIOError, load_depth, load_image, save_image
from .metrics import LossWeights, MetricsRecord, SsimParams, dc_loss, l1_image, \
    ms_ssim, psnr, rec_loss, ssim, tv_loss
from .raster import DepthMap, Image, TransmissionMap, require_same_hw
from .recipes import RainRecipe, RecipeJitter, apply_jitter
from .synthesis import DropField, MorSample, compose_mor, haze_transmission, \
    render_raindrops, render_streak_pattern, streak_transmission

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 2**64

MOR_BITS = 8       # bit depth of the degraded output image
BUNDLE_BITS = 16   # bit depth of the continuous ground-truth layers


class NoPairsError(ValueError):
    """No input stems could be paired between the two directories."""


def derive_seed(global_seed: int, sample_id: str) -> int:
    """Stable per-sample seed: 64-bit FNV-1a over the little-endian
    global seed bytes followed by the UTF-8 sample id."""
    h = _FNV_OFFSET
    payload = int(global_seed).to_bytes(8, "little") + sample_id.encode("utf-8")
    for byte in payload:
        h ^= byte
        h = (h * _FNV_PRIME) % _U64
    return h


def synth_sample(clean: Image, depth: DepthMap, recipe: RainRecipe) -> MorSample:
    """Synthesize one degraded image plus its ground-truth bundle.

    The streak and drop generators consume sub-seeds derived from the
    recipe seed (ids "streaks" and "drops") so their streams are
    decoupled but still fully determined by the recipe.
    """
    require_same_hw(clean, depth, "synth_sample")
    w, h = clean.width, clean.height
    s_pattern = render_streak_pattern(w, h, recipe.streak,
                                      derive_seed(recipe.seed, "streaks"))
    t_r = streak_transmission(depth, recipe.streak.attenuation)
    drops = render_raindrops(w, h, recipe.drops, derive_seed(recipe.seed, "drops"))
    t = haze_transmission(depth, recipe.haze.scattering)
    mor = compose_mor(clean, s_pattern, t_r, drops, t, recipe.haze.ambient_light)
    return MorSample(mor=mor, clean=clean, depth=depth, s_pattern=s_pattern,
                     t_r=t_r, t=t, drops=drops, recipe=recipe)


@dataclass(frozen=True)
class ManifestRecord:
    """One manifest line: where the sample's files live and how to redo it."""

    sample_id: str
    clean_path: str
    depth_path: str
    mor_path: str
    gt_bundle_paths: dict
    recipe: RainRecipe
    toolkit_version: str = __version__

    def to_json_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "clean_path": self.clean_path,
            "depth_path": self.depth_path,
            "mor_path": self.mor_path,
            "gt_bundle_paths": self.gt_bundle_paths,
            "recipe": self.recipe.to_dict(),
            "toolkit_version": self.toolkit_version,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ManifestRecord":
        return cls(
            sample_id=d["sample_id"],
            clean_path=d["clean_path"],
            depth_path=d["depth_path"],
            mor_path=d["mor_path"],
            gt_bundle_paths=dict(d["gt_bundle_paths"]),
            recipe=RainRecipe.from_dict(d["recipe"]),
            toolkit_version=d.get("toolkit_version", ""),
        )


def _pair_stems(a_dir: Path, b_dir: Path, a_exts, b_exts):
    """Pair files across two directories by filename stem."""
    def index(d: Path, exts):
        out = {}
        for entry in sorted(d.iterdir()):
            if entry.is_file() and entry.suffix.lower() in exts:
                out.setdefault(entry.stem, entry)
        return out

    a_map, b_map = index(a_dir, a_exts), index(b_dir, b_exts)
    stems = sorted(set(a_map) & set(b_map))
    unpaired_a = sorted(set(a_map) - set(b_map))
    unpaired_b = sorted(set(b_map) - set(a_map))
    return [(s, a_map[s], b_map[s]) for s in stems], unpaired_a, unpaired_b


def _load_depth_any(path: Path, depth_scale: float | None) -> DepthMap:
    if path.suffix.lower() == ".pfm":
        return load_depth(path, convention="pfm")
    if depth_scale is None:
        raise ValueError(f"{path}: PNG depth requires --depth-scale")
    return load_depth(path, convention="png16", scale=depth_scale)


def _synth_one(stem: str, clean_path: Path, depth_path: Path, out_dir: Path,
               template: RainRecipe, jitter: RecipeJitter | None,
               global_seed: int, depth_scale: float | None) -> ManifestRecord:
    clean = load_image(clean_path)
    depth = _load_depth_any(depth_path, depth_scale)
    seed = derive_seed(global_seed, stem)
    jitter_rng = np.random.Generator(np.random.Philox(key=derive_seed(seed, "jitter")))
    recipe = dataclasses.replace(apply_jitter(template, jitter, jitter_rng), seed=seed)
    sample = synth_sample(clean, depth, recipe)

    mor_rel = f"mor/{stem}.png"
    gt_rel = {
        "s_pattern": f"gt/{stem}_spattern.png",
        "t_r": f"gt/{stem}_tr.png",
        "t": f"gt/{stem}_t.png",
        "d": f"gt/{stem}_d.png",
        "m": f"gt/{stem}_m.png",
    }
    save_image(sample.mor, out_dir / mor_rel, bits=MOR_BITS)
    save_image(sample.s_pattern, out_dir / gt_rel["s_pattern"], bits=BUNDLE_BITS)
    save_image(Image(sample.t_r.data), out_dir / gt_rel["t_r"], bits=BUNDLE_BITS)
    save_image(Image(sample.t.data), out_dir / gt_rel["t"], bits=BUNDLE_BITS)
    save_image(Image(sample.drops.d), out_dir / gt_rel["d"], bits=BUNDLE_BITS)
    save_image(Image(sample.drops.m), out_dir / gt_rel["m"], bits=8)
    return ManifestRecord(sample_id=stem, clean_path=str(clean_path),
                          depth_path=str(depth_path), mor_path=mor_rel,
                          gt_bundle_paths=gt_rel, recipe=recipe)


def synth_batch(clean_dir, depth_dir, out_dir, template: RainRecipe,
                global_seed: int, *, jitter: RecipeJitter | None = None,
                depth_scale: float | None = None,
                threads: int | None = None) -> list[ManifestRecord]:
    """Synthesize every clean/depth pair (matched by stem) into out_dir.

    Writes mor/<stem>.png (8-bit), the 16-bit ground-truth bundle under
    gt/, and manifest.jsonl. Unpaired stems are skipped with a warning
    and recorded in a manifest footer line. Output bytes are independent
    of the thread count.
    """
    clean_dir, depth_dir, out_dir = Path(clean_dir), Path(depth_dir), Path(out_dir)
    for d in (clean_dir, depth_dir):
        if not d.is_dir():
            raise ImageIOError(f"{d}: not a directory")
    pairs, unpaired_clean, unpaired_depth = _pair_stems(
        clean_dir, depth_dir, {".png"}, {".pfm", ".png"})
    if not pairs:
        raise NoPairsError(f"no pairs: no common stems between {clean_dir} and {depth_dir}")
    for stem in unpaired_clean:
        print(f"warning: {stem}: clean image has no depth map, skipped",
              file=sys.stderr)
    for stem in unpaired_depth:
        print(f"warning: {stem}: depth map has no clean image, skipped",
              file=sys.stderr)
    if depth_scale is None and any(p.suffix.lower() == ".png" for _, _, p in pairs):
        raise ValueError("PNG depth maps present: --depth-scale is required")

    (out_dir / "mor").mkdir(parents=True, exist_ok=True)
    (out_dir / "gt").mkdir(parents=True, exist_ok=True)

    workers = threads if threads and threads > 0 else (os.cpu_count() or 1)
    if workers == 1:
        records = [_synth_one(s, c, d, out_dir, template, jitter, global_seed,
                              depth_scale) for s, c, d in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_synth_one, s, c, d, out_dir, template,
                                   jitter, global_seed, depth_scale)
                       for s, c, d in pairs]
            records = [f.result() for f in futures]

    records.sort(key=lambda r: r.sample_id)
    manifest_path = out_dir / "manifest.jsonl"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(), sort_keys=True) + "\n")
        if unpaired_clean or unpaired_depth:
            footer = {"footer": {"unpaired_clean": unpaired_clean,
                                 "unpaired_depth": unpaired_depth}}
            fh.write(json.dumps(footer, sort_keys=True) + "\n")
    return records


def read_manifest(path) -> tuple[list[ManifestRecord], dict | None]:
    """Read a manifest written by synth_batch; returns (records, footer)."""
    records, footer = [], None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if "footer" in d:
                footer = d["footer"]
            else:
                records.append(ManifestRecord.from_json_dict(d))
    return records, footer


def load_bundle(out_dir, rec: ManifestRecord):
    """Reload a sample's stored rasters (mor plus ground-truth layers)."""
    out_dir = Path(out_dir)
    mor = load_image(out_dir / rec.mor_path)
    gt = rec.gt_bundle_paths
    s_pattern = load_image(out_dir / gt["s_pattern"])
    t_r = TransmissionMap(load_image(out_dir / gt["t_r"]).data[:, :, 0])
    t = TransmissionMap(load_image(out_dir / gt["t"]).data[:, :, 0])
    d = load_image(out_dir / gt["d"]).data[:, :, 0]
    m = load_image(out_dir / gt["m"]).data[:, :, 0]
    return mor, s_pattern, t_r, t, DropField(m=m, d=d)


# --- evaluation -------------------------------------------------------------

def eval_pair(pred: Image, gt: Image, p: SsimParams | None = None,
              patch: int = 15, weights: LossWeights | None = None) -> MetricsRecord:
    """All reference metrics for one pair (dark channel and TV are taken
    on the prediction)."""
    p = p or SsimParams()
    return MetricsRecord(
        psnr_db=psnr(pred, gt),
        ssim=ssim(pred, gt, p),
        ms_ssim=ms_ssim(pred, gt, p),
        l1=l1_image(pred, gt),
        dc_loss=dc_loss(pred, patch),
        tv_loss=tv_loss(pred),
        rec_loss=rec_loss(pred, gt, weights, p),
    )


@dataclass
class EvalReport:
    """Per-pair metric records plus their aggregates."""

    records: list  # (stem, MetricsRecord)
    errors: list   # (stem, message)
    aggregate: dict  # metric key -> {"mean": float, "std": float}

    @property
    def count(self) -> int:
        return len(self.records)

    def to_json_dict(self) -> dict:
        return {
            "count": self.count,
            "pairs": [{"sample_id": s, **r.to_dict()} for s, r in self.records],
            "errors": [{"sample_id": s, "error": e} for s, e in self.errors],
            "aggregate": self.aggregate,
        }


def _aggregate(records) -> dict:
    keys = list(MetricsRecord.METRIC_KEYS) + ["rec_loss"]
    out = {}
    for key in keys:
        values = [getattr(r, key) for _, r in records if getattr(r, key) is not None]
        if values:
            arr = np.asarray(values, dtype=np.float64)
            out[key] = {"mean": float(arr.mean()), "std": float(arr.std())}
    return out


def eval_batch(pred_dir, gt_dir, out_dir=None, p: SsimParams | None = None,
               patch: int = 15, weights: LossWeights | None = None) -> EvalReport:
    """Evaluate every stem-paired PNG in pred_dir against gt_dir.

    Per-pair failures (size mismatch etc.) are recorded and skipped
    without aborting the batch. When out_dir is given, writes
    report.json and report.csv (per-pair rows plus one final aggregate
    row labelled "mean").
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise ImageIOError(f"{d}: not a directory")
    pairs, _, _ = _pair_stems(pred_dir, gt_dir, {".png"}, {".png"})
    if not pairs:
        raise NoPairsError(f"no pairs: no common stems between {pred_dir} and {gt_dir}")

    records, errors = [], []
    for stem, pred_path, gt_path in pairs:
        try:
            rec = eval_pair(load_image(pred_path), load_image(gt_path),
                            p, patch, weights)
            records.append((stem, rec))
        except (ValueError, ImageIOError) as exc:
            errors.append((stem, str(exc)))
    report = EvalReport(records=records, errors=errors,
                        aggregate=_aggregate(records))
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report: EvalReport, out_dir) -> None:
    """Write report.json and report.csv for an evaluation run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    columns = list(MetricsRecord.METRIC_KEYS) + ["rec_loss"]
    with open(out_dir / "report.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(["sample_id"] + columns) + "\n")
        for stem, rec in report.records:
            row = [stem] + [_csv_num(getattr(rec, key)) for key in columns]
            fh.write(",".join(row) + "\n")
        agg = ["mean"] + [_csv_num(report.aggregate.get(key, {}).get("mean"))
                          for key in columns]
        fh.write(",".join(agg) + "\n")


def _csv_num(v) -> str:
    return "" if v is None else repr(float(v))


# --- depth-stratified diagnostics -------------------------------------------

def stratify_by_depth(sample: MorSample, bins: int) -> list[dict]:
    """Per-depth-bin degradation statistics for one sample.

    Bins are equal-width over [min d, max d]. Each row reports the bin
    bounds, pixel count, mean haze and streak transmissions, and the
    fraction of pixels covered by streaks (pattern > 0) and by drops
    (mask = 1). A constant depth map puts every pixel in bin 0; empty
    bins report NaN means.
    """
    if bins < 1:
        raise ValueError("stratify_by_depth: bins must be >= 1")
    d = sample.depth.data
    dmin, dmax = float(d.min()), float(d.max())
    width = (dmax - dmin) / bins
    if width == 0.0:
        idx = np.zeros(d.shape, dtype=np.intp)
    else:
        idx = np.minimum(((d - dmin) / width).astype(np.intp), bins - 1)

    t = sample.t.data
    t_r = sample.t_r.data
    streak_cover = sample.s_pattern.data[:, :, 0] > 0.0
    drop_cover = sample.drops.m == 1.0

    rows = []
    for b in range(bins):
        sel = idx == b
        count = int(sel.sum())
        row = {
            "bin": b,
            "depth_lo": dmin + b * width,
            "depth_hi": dmin + (b + 1) * width if width > 0.0 else dmax,
            "count": count,
            "mean_t": float(t[sel].mean()) if count else float("nan"),
            "mean_t_r": float(t_r[sel].mean()) if count else float("nan"),
            "streak_cover": float(streak_cover[sel].mean()) if count else float("nan"),
            "drop_cover": float(drop_cover[sel].mean()) if count else float("nan"),
        }
        rows.append(row)
    return rows
