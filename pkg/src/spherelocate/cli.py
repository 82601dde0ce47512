"""Command-line interface: ``spherelocate {detect,estimate,synth,eval}``.

Every command prints one JSON document (sorted keys, ``"schema": 1``) to
stdout or to ``--out``. Failures print ``{"schema": 1, "error": {...}}`` and
exit with a stable status:

    0 ok, 2 usage, 3 parse, 4 no detection, 5 estimation failure
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .circle_ransac import RansacConfig
from .errors import EXIT_OK, EXIT_USAGE, SphereLocateError
from .geometry import CameraIntrinsics
from .imageio import read_image, write_pgm
from .pipeline import detect, locate
from .synth import (SyntheticScene, aggregate, evaluate, render_disk, standard_grid)

SCHEMA = 1
log = logging.getLogger("spherelocate")


class UsageError(SphereLocateError):
    code = "usage"
    exit_status = EXIT_USAGE


def _dump(doc: dict) -> str:
    return json.dumps({"schema": SCHEMA, **doc}, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(doc: dict, out: str | None) -> None:
    text = _dump(doc)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path!r} is not valid JSON: {exc}") from None


def _intrinsics(path: str) -> CameraIntrinsics:
    try:
        return CameraIntrinsics.from_dict(_load_json(path, "intrinsics"))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _radius(value: float | None) -> float:
    if value is None or not math.isfinite(value) or value <= 0:
        raise UsageError(f"--radius must be a positive number, got {value}")
    return value


def _ransac(args) -> RansacConfig:
    if args.iterations < 1:
        raise UsageError("--iterations must be >= 1")
    return RansacConfig(iterations=args.iterations, seed=args.seed)


def _image(path: str) -> np.ndarray:
    try:
        return read_image(path)
    except OSError as exc:
        raise UsageError(f"cannot read image {path!r}: {exc.strerror}") from None


def _debug_dump(path: str | None, det) -> None:
    if not path:
        return
    doc = {"edges": det.edges.positions.tolist(),
           "circles": [{"u": c.circle.u, "v": c.circle.v, "R": c.circle.R,
                        "threshold": c.threshold, "score": c.score} for c in det.circles],
           "candidates": [c.geom.to_dict() for c in det.candidates],
           "ellipse_points": det.points.tolist()}
    Path(path).write_text(_dump(doc), encoding="utf-8")


def _timings(det, args) -> dict:
    rounded = {k: round(v, 6) for k, v in sorted(det.timings.items())}
    log.info("stage timings (s): %s", rounded)
    return {"timings": rounded} if args.timings else {}


def cmd_detect(args) -> dict:
    K = _intrinsics(args.intrinsics)
    r = _radius(args.radius)
    det = detect(_image(args.image), K, r, _ransac(args))
    _debug_dump(args.debug_dump, det)
    return {"ellipse": det.ellipse.to_dict(), "support": det.support, **_timings(det, args)}


def cmd_estimate(args) -> dict:
    K = _intrinsics(args.intrinsics)
    r = _radius(args.radius)
    det, est = locate(_image(args.image), K, r, _ransac(args))
    _debug_dump(args.debug_dump, det)
    return {**est.to_dict(), "ellipse": det.ellipse.to_dict(), "support": det.support,
            **_timings(det, args)}


def _scene(config: dict) -> SyntheticScene:
    try:
        return SyntheticScene.from_dict(config)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid scene config: {exc}") from None


def _write_scene(scene: SyntheticScene, image_path: Path) -> dict:
    write_pgm(image_path, render_disk(scene))
    truth = {**scene.to_dict(), "ellipse": scene.ellipse.to_dict(),
             "center": list(scene.sphere.center)}
    image_path.with_suffix(".json").write_text(_dump(truth), encoding="utf-8")
    return {"image": str(image_path), "truth": str(image_path.with_suffix(".json"))}


def cmd_synth(args) -> dict:
    if args.grid:
        out_dir = Path(args.out or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        written = [_write_scene(s, out_dir / f"scene_{i:03d}.pgm")
                   for i, s in enumerate(standard_grid(noise_sigma=args.noise))]
        return {"scenes": len(written), "directory": str(out_dir)}
    if not args.config or not args.out:
        raise UsageError("synth needs --config and --out (or --grid)")
    return _write_scene(_scene(_load_json(args.config, "scene config")), Path(args.out))


def cmd_eval(args) -> dict:
    batch = Path(args.dir)
    if not batch.is_dir():
        raise UsageError(f"{batch} is not a directory")
    configs = sorted(batch.glob("*.json"))
    if not configs:
        raise UsageError(f"no scene configs (*.json) in {batch}")
    cfg = _ransac(args)
    scenes, reports = [], []
    for path in configs:
        scene = _scene(_load_json(str(path), "scene config"))
        image = path.with_suffix(".pgm")
        try:
            img = read_image(image) if image.exists() else render_disk(scene)
            det, est = locate(img, scene.K, scene.sphere.radius, cfg)
            report = evaluate(scene, est.center, det.ellipse,
                              det.timings if args.timings else None)
        except SphereLocateError as exc:
            report = evaluate(scene, error=exc.code)
        log.info("%s: %s", path.name, report.relative_error if report.error is None else report.error)
        reports.append(report)
        scenes.append({"name": path.stem, **report.to_dict()})
    return {"summary": aggregate(reports), "scenes": scenes}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spherelocate",
                                description="Sphere silhouette detection and 3D localization.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_image=True):
        if with_image:
            sp.add_argument("--image", required=True, help="binary PGM (P5) or PPM (P6)")
            sp.add_argument("--intrinsics", required=True, help="JSON {fu, fv, u0, v0, us, vs}")
            sp.add_argument("--radius", type=float, required=True, help="sphere radius (> 0)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--iterations", type=int, default=RansacConfig.iterations,
                        help="circle RANSAC iterations")
        sp.add_argument("--out", help="write JSON here instead of stdout")
        sp.add_argument("--json-only", action="store_true", help="suppress log output")
        sp.add_argument("--timings", action="store_true",
                        help="include wall-clock stage timings (output is then not reproducible)")

    for name, fn in (("detect", cmd_detect), ("estimate", cmd_estimate)):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--debug-dump", help="write intermediate point lists as JSON")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("synth", help="render a scene config, or the standard grid")
    sp.add_argument("--config", help="scene JSON")
    sp.add_argument("--out", help="output PGM (or directory with --grid)")
    sp.add_argument("--grid", action="store_true", help="write the 100-scene standard grid")
    sp.add_argument("--noise", type=float, default=0.0, help="intensity noise for --grid")
    sp.add_argument("--json-only", action="store_true")
    sp.set_defaults(func=cmd_synth, timings=False)

    sp = sub.add_parser("eval", help="estimate every scene in a directory and aggregate")
    sp.add_argument("--dir", required=True)
    common(sp, with_image=False)
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.json_only else logging.INFO - 10 * min(args.verbose, 1)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(message)s")
    out = getattr(args, "out", None)
    if args.command == "synth":
        out = None
    try:
        doc = args.func(args)
    except SphereLocateError as exc:
        sys.stdout.write(_dump({"error": {"code": exc.code, "message": str(exc)}}))
        return exc.exit_status
    _emit(doc, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
