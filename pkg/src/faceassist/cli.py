"""Command-line interface: evaluation runs, the support server, store
management and cascade conversion.

Exit codes: 0 success, 1 runtime/evaluation failure, 2 usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .cascade import CascadeModel, DetectParams, load_cascade_json, parse_cascade_xml, save_cascade_json
from .evaluation import (
    detection_row,
    eval_detection,
    eval_recognition,
    load_annotations,
    recognition_row,
    render_csv,
    render_table,
)
from .facestore import FaceStore, StoreConfig
from .imaging import load_pgm
from .lbph import LbpParams, predict
from .pipeline import Pipeline, PipelineConfig

DEFAULT_KEY_ENV = "FACESTORE_KEY"


def load_cascade_file(path: Path) -> CascadeModel:
    data = Path(path).read_bytes()
    if data.lstrip().startswith(b"<"):
        return parse_cascade_xml(data.decode("utf-8"))
    return load_cascade_json(data)


def _env(name: str, fallback=None):
    value = os.environ.get(name)
    return value if value not in (None, "") else fallback


def _add_store_args(p: argparse.ArgumentParser):
    p.add_argument(
        "--store",
        type=Path,
        default=_env("STORE_DIR"),
        required=_env("STORE_DIR") is None,
        help="store directory (env STORE_DIR)",
    )
    p.add_argument(
        "--capacity",
        type=int,
        default=int(_env("CAPACITY", 10)),
        help="store capacity (env CAPACITY, default 10)",
    )
    p.add_argument(
        "--key-env",
        default=_env("KEY_ENV", DEFAULT_KEY_ENV),
        help=f"name of the env var holding the store key (default {DEFAULT_KEY_ENV})",
    )


def _add_detect_params(p: argparse.ArgumentParser):
    p.add_argument("--scale-factor", type=float, default=1.1)
    p.add_argument("--min-neighbors", type=int, default=3)
    p.add_argument("--min-size", type=int, default=None, metavar="PX")
    p.add_argument("--step-fraction", type=float, default=0.05)
    p.add_argument("--grouping-eps", type=float, default=0.2)


def _detect_params(args) -> DetectParams:
    return DetectParams(
        scale_factor=args.scale_factor,
        min_neighbors=args.min_neighbors,
        min_size=(args.min_size, args.min_size) if args.min_size else None,
        step_fraction=args.step_fraction,
        grouping_eps=args.grouping_eps,
    )


def _open_store(args) -> FaceStore:
    return FaceStore.open(
        StoreConfig(
            root_directory=args.store,
            capacity=args.capacity,
            encryption_key_source=args.key_env,
        )
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faceassist",
        description="Face detection/recognition toolkit: evaluation, store and server.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # eval
    eval_p = sub.add_parser("eval", help="run corpus evaluations")
    eval_sub = eval_p.add_subparsers(dest="eval_command", required=True)

    det = eval_sub.add_parser("detect", help="detection accuracy over an annotated corpus")
    det.add_argument("--corpus", type=Path, required=True, help="directory of PGM frames")
    det.add_argument("--annotations", type=Path, required=True)
    det.add_argument("--cascade", type=Path, default=_env("CASCADE_PATH"), required=_env("CASCADE_PATH") is None)
    det.add_argument("--iou-threshold", type=float, default=0.5)
    det.add_argument("--csv", action="store_true", help="emit CSV instead of the aligned table")
    det.add_argument("--timings", action="store_true", help="print per-frame processing times")
    _add_detect_params(det)

    rec = eval_sub.add_parser("recognize", help="recognition accuracy over labeled crops")
    rec.add_argument("--corpus", type=Path, required=True)
    rec.add_argument("--annotations", type=Path, required=True)
    rec.add_argument("--csv", action="store_true")
    _add_store_args(rec)

    # serve
    srv = sub.add_parser("serve", help="run the support server and console service")
    srv.add_argument("--port", type=int, default=int(_env("PORT", 8000)))
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--cascade", type=Path, default=_env("CASCADE_PATH"), required=_env("CASCADE_PATH") is None)
    srv.add_argument("--temp-dir", type=Path, default=None, help="pipeline temp image directory")
    srv.add_argument("--cooldown-ms", type=int, default=2000)
    srv.add_argument(
        "--server-endpoint",
        default=None,
        help="upstream support server URL for online-mode recognition offload",
    )
    srv.add_argument("--console-dir", type=Path, default=None, help="serve a built web console from this directory")
    _add_store_args(srv)
    _add_detect_params(srv)

    # enroll
    enr = sub.add_parser("enroll", help="add a face image to a store")
    enr.add_argument("image", type=Path)
    enr.add_argument("--name", required=True)
    enr.add_argument("--notes", default="")
    _add_store_args(enr)

    # identify
    idf = sub.add_parser("identify", help="identify a face image against a store")
    idf.add_argument("image", type=Path)
    _add_store_args(idf)

    # cascade
    cas = sub.add_parser("cascade", help="cascade model utilities")
    cas_sub = cas.add_subparsers(dest="cascade_command", required=True)
    conv = cas_sub.add_parser("convert", help="convert legacy XML to the native JSON format")
    conv.add_argument("xml_in", type=Path)
    conv.add_argument("json_out", type=Path)

    return parser


def _cmd_eval_detect(args) -> int:
    annotations = load_annotations(args.annotations)
    cascade = load_cascade_file(args.cascade)
    result = eval_detection(
        args.corpus, annotations, cascade, _detect_params(args), args.iou_threshold
    )
    rows = [detection_row("all", result.report)]
    sys.stdout.write(render_csv(rows) if args.csv else render_table(rows))
    if args.timings:
        for frame_id, ms in result.frame_times_ms:
            sys.stdout.write(f"{frame_id}: {ms:.1f} ms\n")
    for frame_id in result.slow_frames:
        sys.stdout.write(f"warning: frame {frame_id} exceeded 400 ms\n")
    return 0


def _cmd_eval_recognize(args) -> int:
    annotations = load_annotations(args.annotations)
    store = _open_store(args)
    reports = eval_recognition(args.corpus, annotations, store)
    rows = [recognition_row(person, rep) for person, rep in reports]
    sys.stdout.write(render_csv(rows) if args.csv else render_table(rows))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    store = _open_store(args)
    cascade = load_cascade_file(args.cascade)
    temp_dir = args.temp_dir or (args.store / "tmp")
    config = PipelineConfig(
        cooldown_ms=args.cooldown_ms,
        detect_params=_detect_params(args),
        server_endpoint=args.server_endpoint,
    )
    server_client = None
    if args.server_endpoint:
        from .client import HttpIdentifyClient

        server_client = HttpIdentifyClient(args.server_endpoint, config.request_timeout_ms)
    pipeline = Pipeline(
        cascade,
        config,
        temp_dir=temp_dir,
        store=store,
        server_client=server_client,
    )
    app = create_app(store, pipeline, console_dir=args.console_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_enroll(args) -> int:
    import time

    store = _open_store(args)
    face = load_pgm(args.image.read_bytes())
    record = store.enroll(args.name, args.notes, face, int(time.time() * 1000))
    sys.stdout.write(f"{record.id}\n")
    return 0


def _cmd_identify(args) -> int:
    store = _open_store(args)
    face = load_pgm(args.image.read_bytes())
    model = store.build_recognizer(LbpParams())
    result = predict(model, face)
    if result.is_known:
        record = store.get(result.label)
        sys.stdout.write(
            f"{record.id} {record.display_name} distance={result.distance:.6f}\n"
        )
    else:
        sys.stdout.write(f"unknown distance={result.distance:.6f}\n")
    return 0


def _cmd_cascade_convert(args) -> int:
    model = parse_cascade_xml(args.xml_in.read_text("utf-8"))
    args.json_out.write_bytes(save_cascade_json(model))
    sys.stdout.write(
        f"wrote {args.json_out} ({len(model.stages)} stages, "
        f"{model.window_w}x{model.window_h} window)\n"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "eval" and args.eval_command == "detect":
            return _cmd_eval_detect(args)
        if args.command == "eval" and args.eval_command == "recognize":
            return _cmd_eval_recognize(args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "enroll":
            return _cmd_enroll(args)
        if args.command == "identify":
            return _cmd_identify(args)
        if args.command == "cascade" and args.cascade_command == "convert":
            return _cmd_cascade_convert(args)
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # surface runtime failures as exit code 1
        sys.stderr.write(f"error: {exc}\n")
        return 1
    parser.error("unknown command")
    return 2


if __name__ == "__main__":
    sys.exit(main())
