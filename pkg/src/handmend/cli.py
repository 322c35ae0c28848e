"""Command line front end.

Subcommands:

* ``run`` creates a session from an image and executes all five steps.
* ``step`` re-runs one step of an existing session directory.
* ``eval detect`` scores prediction files against ground-truth annotations.
* ``eval fid`` compares two image directories.
* ``templates`` lists or exports the built-in templates.
* ``serve`` starts the HTTP service.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import build_backends
from .evaluation import (
    evaluate_detection_dirs,
    evaluate_image_sets,
    format_detection_report,
    get_extractor,
    write_metrics,
)
from .pipeline import (
    STEPS,
    PipelineError,
    PipelineSession,
    SessionParams,
    StepExecutionError,
)
from .templates import TemplateRegistry, write_template


def _load_backend_config(path: str | None) -> dict | None:
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise ValueError(f"{path}: backend config must be a JSON object")
    return config


def _registry(args: argparse.Namespace) -> TemplateRegistry:
    if getattr(args, "template_dir", None):
        return TemplateRegistry.load_dir(args.template_dir)
    return TemplateRegistry.built_in()


def _cmd_run(args: argparse.Namespace) -> int:
    params = SessionParams(
        include_standard_hands=args.include_standard,
        bbox_expand_ratio=args.bbox_expand,
        template_name=args.template,
        template_expand_ratio=args.template_expand,
        include_undetected_hand=args.include_undetected,
        seed=args.seed,
    )
    backends = build_backends(_load_backend_config(args.backend_config))
    session = PipelineSession.create(
        args.out, args.image, params, backends, registry=_registry(args)
    )
    print(f"session {session.id} at {session.directory}")
    failures = 0
    for step in STEPS:
        try:
            session.run_step(step)
        except StepExecutionError as exc:
            failures += 1
            print(f"  {step}: failed ({exc.cause})")
            break
        status = session.step_status()[step]
        names = ", ".join(status["artifacts"].values())
        print(f"  {step}: done ({names})")
        for warning in status["warnings"]:
            print(f"    warning: {warning}")
    return 1 if failures else 0


def _cmd_step(args: argparse.Namespace) -> int:
    backends = build_backends(_load_backend_config(args.backend_config))
    session = PipelineSession.load(args.session_dir, backends, registry=_registry(args))
    if args.set:
        updates = {}
        for item in args.set:
            if "=" not in item:
                print(f"--set expects key=value, got {item!r}", file=sys.stderr)
                return 2
            key, _, raw = item.partition("=")
            try:
                updates[key] = json.loads(raw)
            except json.JSONDecodeError:
                updates[key] = raw
        session.set_params(session.params.replace(**updates))
    try:
        session.rerun_from(args.step)
    except StepExecutionError as exc:
        print(f"{args.step}: failed ({exc.cause})", file=sys.stderr)
        return 1
    for step in STEPS:
        status = session.step_status()[step]
        run = f" run {status['run']}" if status["run"] is not None else ""
        print(f"  {step}: {status['status']}{run}")
    return 0


def _cmd_eval_detect(args: argparse.Namespace) -> int:
    thresholds = tuple(float(part) for part in args.iou.split(","))
    rows = evaluate_detection_dirs(args.pred, args.gt, thresholds)
    report = format_detection_report(rows)
    print(report)
    if args.report:
        Path(args.report).write_text(report + "\n", encoding="utf-8")
    if args.metrics:
        metrics = {}
        for row in rows:
            tag = f"iou_{row.counts.iou_threshold:g}"
            metrics[f"{tag}_tp"] = row.counts.tp
            metrics[f"{tag}_fp"] = row.counts.fp
            metrics[f"{tag}_fn"] = row.counts.fn
            metrics[f"{tag}_tn"] = row.counts.tn
            if row.precision is not None:
                metrics[f"{tag}_precision"] = round(row.precision, 6)
            if row.recall is not None:
                metrics[f"{tag}_recall"] = round(row.recall, 6)
        write_metrics(args.metrics, metrics)
    return 0


def _cmd_eval_fid(args: argparse.Namespace) -> int:
    report = evaluate_image_sets(args.a, args.b, extractor=get_extractor(args.extractor))
    print(f"fid {report.value:.4f} (d={report.dimension}, n_a={report.count_a}, n_b={report.count_b})")
    if args.metrics:
        write_metrics(
            args.metrics,
            {
                "fid": round(report.value, 6),
                "dimension": report.dimension,
                "count_a": report.count_a,
                "count_b": report.count_b,
                "extractor": report.extractor,
            },
        )
    return 0


def _cmd_templates(args: argparse.Namespace) -> int:
    registry = TemplateRegistry.built_in()
    if args.templates_command == "list":
        for name in registry.names():
            spec = registry.get(name)
            print(f"{name}  {spec.width}x{spec.height}  {spec.chirality.name}")
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in registry.names():
        path = write_template(registry.get(name), out)
        print(f"wrote {path}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        artifact_root=Path(args.artifact_root),
        backend_config=_load_backend_config(args.backend_config),
        session_ttl=args.session_ttl,
        step_timeout=args.step_timeout,
        max_upload_bytes=args.max_upload,
        async_steps=args.async_steps,
    )
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="handmend")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="create a session and run all steps")
    run.add_argument("--image", required=True, help="input image path")
    run.add_argument("--template", default="opened-palm", help="template name")
    run.add_argument("--include-standard", action="store_true")
    run.add_argument("--include-undetected", action="store_true")
    run.add_argument("--bbox-expand", type=float, default=0.0, metavar="R")
    run.add_argument("--template-expand", type=float, default=0.0, metavar="R")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--backend-config", help="JSON backend config path")
    run.add_argument("--template-dir", help="load templates from a directory")
    run.add_argument("--out", required=True, help="session directory to create")
    run.set_defaults(func=_cmd_run)

    step = sub.add_parser("step", help="re-run one step of an existing session")
    step.add_argument("session_dir")
    step.add_argument("step", choices=STEPS)
    step.add_argument("--backend-config", help="JSON backend config path")
    step.add_argument("--template-dir", help="load templates from a directory")
    step.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="update a session parameter before running",
    )
    step.set_defaults(func=_cmd_step)

    ev = sub.add_parser("eval", help="evaluation utilities")
    ev_sub = ev.add_subparsers(dest="eval_command", required=True)

    detect = ev_sub.add_parser("detect", help="score detections against ground truth")
    detect.add_argument("--pred", required=True, help="prediction directory")
    detect.add_argument("--gt", required=True, help="ground-truth directory")
    detect.add_argument("--iou", default="0.8,0.85,0.9,0.95", help="comma-separated thresholds")
    detect.add_argument("--report", help="write the text table here")
    detect.add_argument("--metrics", help="write key-value metrics here")
    detect.set_defaults(func=_cmd_eval_detect)

    fid = ev_sub.add_parser("fid", help="feature distribution distance between image sets")
    fid.add_argument("--a", required=True, help="first image directory")
    fid.add_argument("--b", required=True, help="second image directory")
    fid.add_argument("--extractor", default="identity")
    fid.add_argument("--metrics", help="write key-value metrics here")
    fid.set_defaults(func=_cmd_eval_fid)

    templates = sub.add_parser("templates", help="inspect or export built-in templates")
    templates_sub = templates.add_subparsers(dest="templates_command", required=True)
    templates_sub.add_parser("list").set_defaults(func=_cmd_templates)
    export = templates_sub.add_parser("export")
    export.add_argument("--out", required=True, help="directory to write PNG + sidecar files")
    export.set_defaults(func=_cmd_templates)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--artifact-root", default="sessions")
    serve.add_argument("--backend-config", help="JSON backend config path")
    serve.add_argument("--session-ttl", type=float, default=3600.0)
    serve.add_argument("--step-timeout", type=float, default=120.0)
    serve.add_argument("--max-upload", type=int, default=16 * 1024 * 1024)
    serve.add_argument("--async-steps", action="store_true")
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
